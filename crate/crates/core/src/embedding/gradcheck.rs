//! Central finite-difference check of the analytic objective gradient.

use serde::Serialize;

use super::loss::{objective_gradient, total_objective};
use super::store::{EmbeddingStore, Matrix};
use super::{PairSets, TrainConfig};

/// Norm-wise comparison for one parameter class.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassCheck {
    pub class: &'static str,
    pub params: usize,
    pub analytic_norm: f64,
    /// `|analytic - numeric| / max(|analytic|, |numeric|)`, zero when both vanish.
    pub relative_error: f64,
}

fn class_matrix<'a>(store: &'a mut EmbeddingStore, class: &str) -> &'a mut Matrix {
    match class {
        "user" => &mut store.users,
        "subframe" => &mut store.subframes,
        "influencer" => &mut store.influencers,
        "label" => &mut store.labels,
        "word" => &mut store.encoder.table,
        _ => unreachable!("unknown parameter class {class}"),
    }
}

/// Compares the analytic gradient of the total objective with central
/// differences of step `h`, for every class that has parameters.
pub fn check_gradient(pairs: &PairSets, store: &EmbeddingStore, cfg: &TrainConfig, h: f64) -> Vec<ClassCheck> {
    let (_, grad) = objective_gradient(pairs, store, cfg);
    let mut probe = store.clone();
    let mut out = Vec::new();
    for (class, analytic) in [
        ("user", &grad.users),
        ("subframe", &grad.subframes),
        ("influencer", &grad.influencers),
        ("label", &grad.labels),
        ("word", &grad.words),
    ] {
        let n = analytic.as_slice().len();
        if n == 0 {
            continue;
        }
        let mut numeric = vec![0.0; n];
        for (i, slot) in numeric.iter_mut().enumerate() {
            let orig = class_matrix(&mut probe, class).as_slice()[i];
            class_matrix(&mut probe, class).as_mut_slice()[i] = orig + h;
            let up = total_objective(pairs, &probe, cfg);
            class_matrix(&mut probe, class).as_mut_slice()[i] = orig - h;
            let down = total_objective(pairs, &probe, cfg);
            class_matrix(&mut probe, class).as_mut_slice()[i] = orig;
            *slot = (up - down) / (2.0 * h);
        }
        let a = analytic.as_slice();
        let diff = a.iter().zip(&numeric).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nn = numeric.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = na.max(nn);
        out.push(ClassCheck {
            class,
            params: n,
            analytic_norm: na,
            relative_error: if scale == 0.0 { 0.0 } else { diff / scale },
        });
    }
    out
}
