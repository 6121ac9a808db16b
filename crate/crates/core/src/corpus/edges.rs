use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{Bias, Corpus};

/// Share, follow and affiliation edges.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SocialEdges {
    /// `(user, document)`
    pub shares: BTreeSet<(String, String)>,
    /// `(user, influencer)`
    pub follows: BTreeSet<(String, String)>,
    pub affiliations: BTreeMap<String, Bias>,
}

fn read_tsv(path: &Path) -> Result<Vec<(usize, String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        match (cols.next(), cols.next(), cols.next()) {
            (Some(a), Some(b), None) if !a.trim().is_empty() && !b.trim().is_empty() => {
                rows.push((n + 1, a.trim().to_string(), b.trim().to_string()))
            }
            _ => {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: n + 1,
                    message: "expected two tab-separated columns".into(),
                })
            }
        }
    }
    Ok(rows)
}

fn write_tsv<'a>(path: &Path, rows: impl Iterator<Item = (&'a str, String)>) -> Result<()> {
    let mut out = String::new();
    for (a, b) in rows {
        out.push_str(a);
        out.push('\t');
        out.push_str(&b);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

impl SocialEdges {
    /// Loads whichever edge files are given; absent files mean no edges.
    pub fn load(
        shares: Option<&Path>,
        follows: Option<&Path>,
        affiliations: Option<&Path>,
    ) -> Result<Self> {
        let mut edges = SocialEdges::default();
        if let Some(p) = shares {
            edges.shares = read_tsv(p)?.into_iter().map(|(_, u, d)| (u, d)).collect();
        }
        if let Some(p) = follows {
            edges.follows = read_tsv(p)?.into_iter().map(|(_, u, i)| (u, i)).collect();
        }
        if let Some(p) = affiliations {
            for (line, inf, side) in read_tsv(p)? {
                let bias: Bias = side.parse().map_err(|e: Error| Error::Parse {
                    path: p.display().to_string(),
                    line,
                    message: e.to_string(),
                })?;
                edges.affiliations.insert(inf, bias);
            }
        }
        Ok(edges)
    }

    pub fn write(&self, shares: &Path, follows: &Path, affiliations: &Path) -> Result<()> {
        write_tsv(shares, self.shares.iter().map(|(u, d)| (u.as_str(), d.clone())))?;
        write_tsv(follows, self.follows.iter().map(|(u, i)| (u.as_str(), i.clone())))?;
        write_tsv(
            affiliations,
            self.affiliations
                .iter()
                .map(|(i, b)| (i.as_str(), b.short().to_string())),
        )
    }

    /// Checks that every shared document and followed influencer resolves.
    pub fn validate(&self, corpus: &Corpus) -> Result<()> {
        if let Some((u, d)) = self.shares.iter().find(|(_, d)| corpus.position(d).is_none()) {
            return Err(Error::Dangling(format!("user `{u}` shares unknown document `{d}`")));
        }
        if let Some((u, i)) = self
            .follows
            .iter()
            .find(|(_, i)| !self.affiliations.contains_key(i))
        {
            return Err(Error::Dangling(format!(
                "user `{u}` follows influencer `{i}` without an affiliation"
            )));
        }
        Ok(())
    }

    /// Sorted, de-duplicated user ids appearing in shares or follows.
    pub fn users(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self
            .shares
            .iter()
            .map(|(u, _)| u)
            .chain(self.follows.iter().map(|(u, _)| u))
            .collect();
        set.into_iter().cloned().collect()
    }

    pub fn share_counts(&self) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for (u, _) in &self.shares {
            *counts.entry(u.as_str()).or_insert(0) += 1;
        }
        counts
    }
}

/// Keeps users whose share count lies in `[min_shares, max_shares]`, along
/// with their follow edges. Affiliations are untouched.
pub fn filter_users(edges: &SocialEdges, min_shares: usize, max_shares: usize) -> SocialEdges {
    let counts = edges.share_counts();
    let keep = |u: &str| {
        let c = counts.get(u).copied().unwrap_or(0);
        (min_shares..=max_shares).contains(&c)
    };
    SocialEdges {
        shares: edges.shares.iter().filter(|(u, _)| keep(u)).cloned().collect(),
        follows: edges.follows.iter().filter(|(u, _)| keep(u)).cloned().collect(),
        affiliations: edges.affiliations.clone(),
    }
}

/// External ideology scores for influencers.
///
/// Higher means more conservative, so sorting by descending score yields the
/// conservative-to-liberal ordering.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExternalScores {
    pub scores: BTreeMap<String, f64>,
}

impl ExternalScores {
    pub fn new(scores: BTreeMap<String, f64>) -> Result<Self> {
        if let Some((id, v)) = scores.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!("external score for `{id}` is {v}")));
        }
        Ok(ExternalScores { scores })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut scores = BTreeMap::new();
        for (line, id, v) in read_tsv(path)? {
            let value: f64 = v.parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line,
                message: format!("`{v}` is not a number"),
            })?;
            scores.insert(id, value);
        }
        Self::new(scores)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_tsv(path, self.scores.iter().map(|(i, v)| (i.as_str(), format!("{v}"))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn edges_with(shares: &[(&str, usize)]) -> SocialEdges {
        let mut e = SocialEdges::default();
        for (u, n) in shares {
            for d in 0..*n {
                e.shares.insert((u.to_string(), format!("d{d}")));
            }
            e.follows.insert((u.to_string(), "p".into()));
        }
        e.affiliations.insert("p".into(), Bias::Left);
        e
    }

    #[test]
    fn share_bounds() {
        let e = edges_with(&[("few", 3), ("many", 101), ("ok", 5), ("top", 100)]);
        let f = filter_users(&e, 5, 100);
        assert_eq!(f.users(), vec!["ok", "top"]);
        assert_eq!(f.follows.len(), 2);
        assert_eq!(filter_users(&e, 0, usize::MAX), e);
    }

    #[test]
    fn dangling_references() {
        let corpus = Corpus::from_documents(vec![]).unwrap();
        let mut e = SocialEdges::default();
        e.shares.insert(("u".into(), "missing".into()));
        assert!(matches!(e.validate(&corpus), Err(Error::Dangling(_))));
        let mut e = SocialEdges::default();
        e.follows.insert(("u".into(), "nobody".into()));
        assert!(matches!(e.validate(&corpus), Err(Error::Dangling(_))));
    }

    #[test]
    fn tsv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let e = edges_with(&[("a", 2), ("b", 1)]);
        let (s, f, a) = (dir.path().join("s"), dir.path().join("f"), dir.path().join("a"));
        e.write(&s, &f, &a).unwrap();
        assert_eq!(SocialEdges::load(Some(&s), Some(&f), Some(&a)).unwrap(), e);

        std::fs::write(&s, "u1\td1\nbroken\n").unwrap();
        let err = SocialEdges::load(Some(&s), None, None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn external_scores_finite() {
        let mut m = BTreeMap::new();
        m.insert("x".to_string(), f64::NAN);
        assert!(ExternalScores::new(m).is_err());
    }

    proptest! {
        #[test]
        fn filter_is_idempotent(counts in proptest::collection::vec(0usize..12, 1..8), lo in 0usize..6, span in 0usize..8) {
            let named: Vec<(String, usize)> = counts.iter().enumerate().map(|(i, c)| (format!("u{i}"), *c)).collect();
            let refs: Vec<(&str, usize)> = named.iter().map(|(u, c)| (u.as_str(), *c)).collect();
            let e = edges_with(&refs);
            let once = filter_users(&e, lo, lo + span);
            prop_assert_eq!(filter_users(&once, lo, lo + span), once);
        }
    }
}
