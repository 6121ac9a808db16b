use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};

/// Nodes ordered by descending score (ties by id), with display ranks 1..N.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ranking {
    entries: Vec<(String, f64)>,
}

impl Ranking {
    pub fn new(mut entries: Vec<(String, f64)>) -> Self {
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Ranking { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    /// 1-based display rank of `id`.
    pub fn rank_of(&self, id: &str) -> Option<usize> {
        self.entries.iter().position(|(n, _)| n == id).map(|p| p + 1)
    }

    pub fn score_of(&self, id: &str) -> Option<f64> {
        self.entries.iter().find(|(n, _)| n == id).map(|(_, s)| *s)
    }

    /// `Rank_Score` of `id`, zero when absent.
    pub fn rank_score_of(&self, id: &str) -> f64 {
        self.rank_of(id)
            .map(|r| rank_score(r, self.len()))
            .unwrap_or(0.0)
    }
}

/// `(N - r + 1) / N` for a 1-based rank `r` among `n` items.
pub fn rank_score(r: usize, n: usize) -> f64 {
    assert!(r >= 1 && r <= n, "rank {r} outside 1..={n}");
    (n - r + 1) as f64 / n as f64
}

/// Ranks with ties sharing their average position; rank 1 is the highest score.
pub fn average_ranks(scores: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::Insufficient("rank correlation of a constant ranking".into()));
    }
    Ok((cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman correlation of two paired score vectors (tie-averaged ranks).
pub fn spearman_scores(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Invalid(format!("length mismatch {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::Insufficient(format!("spearman needs at least 2 items, got {}", a.len())));
    }
    pearson(&average_ranks(a), &average_ranks(b))
}

/// Spearman correlation over the ids both rankings contain, with the size of
/// that overlap.
pub fn spearman_joined(r1: &Ranking, r2: &Ranking) -> Result<(f64, usize)> {
    let other: HashMap<&str, f64> = r2.entries.iter().map(|(n, s)| (n.as_str(), *s)).collect();
    let (a, b): (Vec<f64>, Vec<f64>) = r1
        .entries
        .iter()
        .filter_map(|(n, s)| other.get(n.as_str()).map(|t| (*s, *t)))
        .unzip();
    let n = a.len();
    spearman_scores(&a, &b).map(|rho| (rho, n))
}

/// Spearman correlation over the shared ids of two rankings.
pub fn spearman(r1: &Ranking, r2: &Ranking) -> Result<f64> {
    spearman_joined(r1, r2).map(|(rho, _)| rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ranking_from_order(ids: &[&str]) -> Ranking {
        let n = ids.len();
        Ranking::new(ids.iter().enumerate().map(|(i, id)| (id.to_string(), (n - i) as f64)).collect())
    }

    #[test]
    fn basic_values() {
        let a = ranking_from_order(&["1", "2", "3", "4"]);
        let b = ranking_from_order(&["1", "3", "2", "4"]);
        let rev = ranking_from_order(&["4", "3", "2", "1"]);
        assert!((spearman(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&a, &rev).unwrap() + 1.0).abs() < 1e-12);
        assert!((spearman(&a, &b).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn too_small_is_error() {
        let a = ranking_from_order(&["x"]);
        assert!(spearman(&a, &a).is_err());
        let b = ranking_from_order(&["y", "z"]);
        assert!(spearman(&a, &b).is_err());
    }

    #[test]
    fn rank_scores() {
        assert_eq!(rank_score(1, 10), 1.0);
        assert!((rank_score(10, 10) - 0.1).abs() < 1e-15);
        let r = ranking_from_order(&["a", "b"]);
        assert_eq!(r.rank_score_of("zz"), 0.0);
        assert_eq!(r.rank_score_of("b"), 0.5);
    }

    #[test]
    fn ties_average() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![1.5, 4.0, 1.5, 3.0]);
        let r = Ranking::new(vec![("b".into(), 1.0), ("a".into(), 1.0), ("c".into(), 2.0)]);
        let ids: Vec<&str> = r.entries().iter().map(|(i, _)| i.as_str()).collect();
        assert_eq!(ids, vec!["c", "a", "b"]);
    }

    proptest! {
        #[test]
        fn symmetric_and_monotone_invariant(xs in proptest::collection::vec(-50i32..50, 3..30), ys in proptest::collection::vec(-50i32..50, 3..30)) {
            let n = xs.len().min(ys.len());
            let a: Vec<f64> = xs[..n].iter().map(|&v| v as f64).collect();
            let b: Vec<f64> = ys[..n].iter().map(|&v| v as f64).collect();
            if let (Ok(ab), Ok(ba)) = (spearman_scores(&a, &b), spearman_scores(&b, &a)) {
                prop_assert!((ab - ba).abs() < 1e-12);
                let warped: Vec<f64> = a.iter().map(|v| (v / 7.0).exp() + 3.0).collect();
                prop_assert!((spearman_scores(&warped, &b).unwrap() - ab).abs() < 1e-12);
                prop_assert!((-1.0..=1.0).contains(&ab));
            }
        }

        #[test]
        fn rank_score_bijection(n in 1usize..60) {
            let mut got: Vec<u64> = (1..=n).map(|r| (rank_score(r, n) * n as f64).round() as u64).collect();
            got.sort_unstable();
            prop_assert_eq!(got, (1..=n as u64).collect::<Vec<_>>());
        }
    }
}
