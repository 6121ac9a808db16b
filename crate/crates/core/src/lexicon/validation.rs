use std::collections::{BTreeMap, HashMap, HashSet};

use log::warn;

use crate::corpus::{Bias, Corpus};
use crate::metrics::spearman_scores;

use super::{paragraph_grams, Frame, IndicatorSets};

/// Per-frame Spearman correlation between the Left and Right rankings of a
/// frame's indicators, each side ranked by mean tf-idf over its documents.
///
/// tf is the indicator count divided by the document's token count; idf is
/// `ln(N / df)` over the whole corpus. Indicators that never occur are not
/// usable; frames with fewer than two usable indicators (or a constant side
/// ranking) are omitted with a warning.
pub fn indicator_bias_correlation<L: IndicatorSets>(corpus: &Corpus, lex: &L) -> BTreeMap<Frame, f64> {
    let sets = lex.indicator_sets();
    let wanted: HashSet<&str> = sets.values().flatten().map(String::as_str).collect();
    let mut orders: Vec<usize> = wanted.iter().map(|g| g.split(' ').count()).collect();
    orders.sort_unstable();
    orders.dedup();

    let n_docs = corpus.len();
    let mut doc_counts: Vec<HashMap<&str, usize>> = Vec::with_capacity(n_docs);
    let mut doc_len: Vec<usize> = Vec::with_capacity(n_docs);
    let mut df: HashMap<&str, usize> = HashMap::new();
    for d in 0..n_docs {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for p in corpus.paragraphs(d) {
            for g in paragraph_grams(p, &orders) {
                if let Some(&key) = wanted.get(g.as_str()) {
                    *counts.entry(key).or_insert(0) += 1;
                }
            }
        }
        for key in counts.keys() {
            *df.entry(key).or_insert(0) += 1;
        }
        doc_len.push(corpus.tokens(d).count());
        doc_counts.push(counts);
    }

    let side_mean = |gram: &str, side: Bias| -> f64 {
        let idf = (n_docs as f64 / df[gram] as f64).ln();
        let docs: Vec<usize> = (0..n_docs)
            .filter(|&d| corpus.document(d).bias == Some(side))
            .collect();
        if docs.is_empty() {
            return 0.0;
        }
        let total: f64 = docs
            .iter()
            .map(|&d| {
                let c = doc_counts[d].get(gram).copied().unwrap_or(0) as f64;
                if doc_len[d] == 0 {
                    0.0
                } else {
                    c / doc_len[d] as f64 * idf
                }
            })
            .sum();
        total / docs.len() as f64
    };

    let mut out = BTreeMap::new();
    for (frame, grams) in &sets {
        let usable: Vec<&str> = grams
            .iter()
            .map(String::as_str)
            .filter(|g| df.contains_key(g))
            .collect();
        if usable.len() < 2 {
            warn!("frame {frame}: fewer than two usable indicators, omitted");
            continue;
        }
        let left: Vec<f64> = usable.iter().map(|g| side_mean(g, Bias::Left)).collect();
        let right: Vec<f64> = usable.iter().map(|g| side_mean(g, Bias::Right)).collect();
        match spearman_scores(&left, &right) {
            Ok(rho) => {
                out.insert(*frame, rho);
            }
            Err(e) => warn!("frame {frame}: {e}, omitted"),
        }
    }
    out
}
