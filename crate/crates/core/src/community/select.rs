use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::par::Execution;

use super::gmm::{fit_gmm, CommunityModel, GmmConfig};

/// BIC of the best restart for each candidate K.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BicPoint {
    pub k: usize,
    pub bic: f64,
    /// Second difference `BIC(K-1) - 2 BIC(K) + BIC(K+1)`, absent at the ends.
    pub curvature: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Selection {
    pub k: usize,
    pub curve: Vec<BicPoint>,
    /// No interior K cleared the threshold and the fallback rule was used.
    pub fallback: bool,
}

/// Seed of restart `restart` for component count `k`.
pub fn restart_seed(base: u64, k: usize, restart: usize) -> u64 {
    let mut z = base ^ ((k as u64) << 32 | restart as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Knee of a BIC curve given as `(K, BIC)` in increasing K.
///
/// Candidates are interior K whose curvature exceeds `t_n` and whose BIC is
/// below that of K-1; the sharpest candidate wins. Without candidates the
/// sharpest interior K is used; curves shorter than three points fall back
/// to the minimum BIC.
pub fn knee(curve: &[(usize, f64)], t_n: f64) -> Selection {
    let mut points: Vec<BicPoint> = curve
        .iter()
        .map(|&(k, bic)| BicPoint {
            k,
            bic,
            curvature: None,
        })
        .collect();
    for i in 1..curve.len().saturating_sub(1) {
        points[i].curvature = Some(curve[i - 1].1 - 2.0 * curve[i].1 + curve[i + 1].1);
    }
    let sharpest = |filter: &dyn Fn(usize) -> bool| {
        (1..curve.len().saturating_sub(1))
            .filter(|&i| filter(i))
            .fold(None::<usize>, |best, i| match best {
                Some(b) if points[b].curvature >= points[i].curvature => Some(b),
                _ => Some(i),
            })
    };
    if curve.len() < 3 {
        let best = (0..curve.len())
            .min_by(|&a, &b| curve[a].1.total_cmp(&curve[b].1))
            .expect("non-empty curve");
        return Selection {
            k: curve[best].0,
            curve: points,
            fallback: true,
        };
    }
    let qualified = sharpest(&|i| points[i].curvature.is_some_and(|c| c > t_n) && curve[i].1 < curve[i - 1].1);
    match qualified {
        Some(i) => Selection {
            k: curve[i].0,
            curve: points,
            fallback: false,
        },
        None => {
            let i = sharpest(&|_| true).expect("interior point");
            warn!("no BIC knee above threshold {t_n}; using the sharpest bend at K={}", curve[i].0);
            Selection {
                k: curve[i].0,
                curve: points,
                fallback: true,
            }
        }
    }
}

/// Fits every K in `k_range` with `cfg.restarts` seeded restarts, keeps the
/// best likelihood per K and picks K at the BIC knee.
pub fn select_k(
    data: &[Vec<f64>],
    k_range: std::ops::RangeInclusive<usize>,
    t_n: f64,
    cfg: &GmmConfig,
    seed: u64,
    exec: Execution,
) -> Result<(Selection, CommunityModel)> {
    let ks: Vec<usize> = k_range.clone().filter(|&k| k >= 1 && k <= data.len()).collect();
    if ks.is_empty() {
        return Err(Error::Insufficient(format!(
            "no K in {k_range:?} fits {} points",
            data.len()
        )));
    }
    if ks.len() < k_range.clone().count() {
        warn!("K range {k_range:?} truncated to at most {} points", data.len());
    }
    let restarts = cfg.restarts.max(1);
    let tasks: Vec<(usize, usize)> = ks.iter().flat_map(|&k| (0..restarts).map(move |r| (k, r))).collect();
    let fits: Vec<Result<CommunityModel>> = exec.map_slice(&tasks, |&(k, r)| {
        let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(seed, k, r));
        fit_gmm(data, k, cfg, &mut rng, Execution::Sequential)
    });
    let mut best: Vec<Option<CommunityModel>> = vec![None; ks.len()];
    for ((k, _), fit) in tasks.iter().zip(fits) {
        let fit = fit?;
        let slot = &mut best[ks.iter().position(|x| x == k).expect("task K")];
        if slot.as_ref().is_none_or(|b| fit.log_likelihood > b.log_likelihood) {
            *slot = Some(fit);
        }
    }
    let models: Vec<CommunityModel> = best.into_iter().map(|m| m.expect("every K fitted")).collect();
    let curve: Vec<(usize, f64)> = ks.iter().zip(&models).map(|(&k, m)| (k, m.bic())).collect();
    let sel = knee(&curve, t_n);
    let chosen = models
        .into_iter()
        .zip(&ks)
        .find(|(_, &k)| k == sel.k)
        .map(|(m, _)| m)
        .expect("chosen K fitted");
    Ok((sel, chosen))
}
