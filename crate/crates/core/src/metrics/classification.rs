use std::collections::BTreeMap;

use serde::Serialize;

use crate::corpus::Bias;

/// Macro-averaged F1 over both sides; `None` without gold items.
///
/// A side with no gold and no predicted items is left out of the average; a
/// side with either but no true positives scores 0.
pub fn macro_f1(pairs: &[(Bias, Bias)]) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    let mut scores = Vec::new();
    for side in Bias::BOTH {
        let tp = pairs.iter().filter(|(g, p)| *g == side && *p == side).count();
        let gold = pairs.iter().filter(|(g, _)| *g == side).count();
        let predicted = pairs.iter().filter(|(_, p)| *p == side).count();
        if gold + predicted == 0 {
            continue;
        }
        scores.push(2.0 * tp as f64 / (gold + predicted) as f64);
    }
    Some(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Macro-F1 of article labels split by whether the article was shared.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplitF1 {
    pub shared: Option<f64>,
    pub unshared: Option<f64>,
    pub overall: Option<f64>,
    pub shared_count: usize,
    pub unshared_count: usize,
}

/// Scores predictions for every article carrying a gold label.
pub fn split_macro_f1(gold: &BTreeMap<String, Bias>, predicted: &BTreeMap<String, Bias>, shared: &dyn Fn(&str) -> bool) -> SplitF1 {
    let (mut sh, mut un) = (Vec::new(), Vec::new());
    for (id, g) in gold {
        if let Some(p) = predicted.get(id) {
            if shared(id) {
                sh.push((*g, *p));
            } else {
                un.push((*g, *p));
            }
        }
    }
    let all: Vec<(Bias, Bias)> = sh.iter().chain(&un).copied().collect();
    SplitF1 {
        shared: macro_f1(&sh),
        unshared: macro_f1(&un),
        overall: macro_f1(&all),
        shared_count: sh.len(),
        unshared_count: un.len(),
    }
}
