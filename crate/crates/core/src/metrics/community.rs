use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;

use crate::community::Assignments;
use crate::corpus::{Bias, ExternalScores};
use crate::embedding::{cosine, EmbeddingStore};
use crate::error::{Error, Result};
use crate::graph::{InfoGraph, NodeKind, NodeRef, RelationKind};
use crate::lexicon::{Frame, SubframeMap};

use super::ranking::{spearman_joined, spearman_scores, Ranking};

/// Cosine of each centroid with the Left label vector; 1 is far left.
pub fn community_polarity(centroids: &[Vec<f64>], left: &[f64]) -> Vec<f64> {
    centroids.iter().map(|c| cosine(c, left)).collect()
}

/// Community indices from most left to most right; ties keep index order.
pub fn polarity_order(polarity: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..polarity.len()).collect();
    order.sort_by(|&a, &b| polarity[b].total_cmp(&polarity[a]).then(a.cmp(&b)));
    order
}

/// Node types with in-community importance rankings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RankedKind {
    Influencer,
    Article,
    Subframe,
    Frame,
}

impl RankedKind {
    pub const ALL: [RankedKind; 4] = [RankedKind::Influencer, RankedKind::Article, RankedKind::Subframe, RankedKind::Frame];

    pub fn name(self) -> &'static str {
        match self {
            RankedKind::Influencer => "influencer",
            RankedKind::Article => "article",
            RankedKind::Subframe => "subframe",
            RankedKind::Frame => "frame",
        }
    }
}

impl fmt::Display for RankedKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything needed to rank nodes inside detected communities.
pub struct CommunityView<'a> {
    pub graph: &'a InfoGraph,
    pub store: &'a EmbeddingStore,
    pub assignments: &'a Assignments,
    pub map: &'a SubframeMap,
    /// Top frames of each article, in graph article order.
    pub article_frames: &'a [Vec<Frame>],
}

impl CommunityView<'_> {
    pub fn centroid(&self, k: usize) -> Vec<f64> {
        self.store.vector(NodeRef::new(NodeKind::Community, k))
    }

    fn members(&self, k: usize) -> Vec<usize> {
        self.assignments.community(k)
    }

    /// Articles shared by at least one member, ascending.
    pub fn articles(&self, k: usize) -> Vec<usize> {
        self.targets(k, RelationKind::Share)
    }

    /// Influencers followed by at least one member, ascending.
    pub fn influencers(&self, k: usize) -> Vec<usize> {
        self.targets(k, RelationKind::Follow)
    }

    fn targets(&self, k: usize, rel: RelationKind) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .members(k)
            .into_iter()
            .flat_map(|u| self.graph.neighbors(rel, u).iter().map(|&t| t as usize))
            .collect();
        set.into_iter().collect()
    }

    fn node_scores(&self, k: usize, kind: NodeKind, nodes: &[usize]) -> Vec<(usize, f64)> {
        let c = self.centroid(k);
        nodes
            .iter()
            .map(|&i| (i, cosine(&self.store.vector(NodeRef::new(kind, i)), &c)))
            .collect()
    }

    /// Ranking of `kind` inside community `k`.
    ///
    /// Influencers and articles score by cosine with the centroid. A subframe
    /// scores by the mean cosine of its expression nodes and is ranked when
    /// one of its expressions occurs in a community article. A frame scores
    /// by the mean article cosine over community articles carrying it.
    pub fn ranking(&self, k: usize, kind: RankedKind) -> Ranking {
        match kind {
            RankedKind::Influencer => {
                let ids = &self.graph.influencers;
                Ranking::new(
                    self.node_scores(k, NodeKind::Influencer, &self.influencers(k))
                        .into_iter()
                        .map(|(i, s)| (ids[i].clone(), s))
                        .collect(),
                )
            }
            RankedKind::Article => {
                let ids = &self.graph.articles;
                Ranking::new(
                    self.node_scores(k, NodeKind::Article, &self.articles(k))
                        .into_iter()
                        .map(|(i, s)| (ids[i].clone(), s))
                        .collect(),
                )
            }
            RankedKind::Subframe => self.subframe_ranking(k),
            RankedKind::Frame => {
                let scores = self.node_scores(k, NodeKind::Article, &self.articles(k));
                Ranking::new(
                    frame_scores(&scores, self.article_frames)
                        .into_iter()
                        .map(|(f, s)| (f.name().to_string(), s))
                        .collect(),
                )
            }
        }
    }

    fn subframe_ranking(&self, k: usize) -> Ranking {
        let node_of: HashMap<&str, usize> = self.graph.subframes.iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect();
        let present: BTreeSet<usize> = self
            .articles(k)
            .into_iter()
            .flat_map(|a| self.graph.neighbors(RelationKind::Contains, a).iter().map(|&s| s as usize))
            .collect();
        let c = self.centroid(k);
        let mut entries = Vec::new();
        for sf in &self.map.subframes {
            let nodes: Vec<usize> = sf.indicators.iter().filter_map(|i| node_of.get(i.gram.as_str()).copied()).collect();
            if nodes.is_empty() || !nodes.iter().any(|n| present.contains(n)) {
                continue;
            }
            let mean = nodes
                .iter()
                .map(|&n| cosine(&self.store.vector(NodeRef::new(NodeKind::Subframe, n)), &c))
                .sum::<f64>()
                / nodes.len() as f64;
            entries.push((sf.name.clone(), mean));
        }
        Ranking::new(entries)
    }

    /// All four rankings of community `k`.
    pub fn rankings(&self, k: usize) -> BTreeMap<RankedKind, Ranking> {
        RankedKind::ALL.iter().map(|&kind| (kind, self.ranking(k, kind))).collect()
    }
}

/// Frame score: mean article score over the articles whose top frames
/// include the frame. Frames carried by no article are absent.
pub fn frame_scores(article_scores: &[(usize, f64)], article_frames: &[Vec<Frame>]) -> BTreeMap<Frame, f64> {
    let mut acc: BTreeMap<Frame, (f64, usize)> = BTreeMap::new();
    for &(a, s) in article_scores {
        for &f in &article_frames[a] {
            let e = acc.entry(f).or_default();
            e.0 += s;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(f, (sum, n))| (f, sum / n as f64)).collect()
}

/// Spearman between a community's influencer ranking and the external
/// conservative scores, over influencers present in both.
///
/// Left-leaning communities are expected to correlate negatively.
pub fn external_score_correlation(influencers: &Ranking, external: &ExternalScores) -> Result<(f64, usize)> {
    let (mine, theirs): (Vec<f64>, Vec<f64>) = influencers
        .entries()
        .iter()
        .filter_map(|(id, s)| external.scores.get(id).map(|e| (*s, *e)))
        .unzip();
    if mine.len() < 2 {
        return Err(Error::Insufficient(format!(
            "{} of {} ranked influencers have external scores; need 2",
            mine.len(),
            influencers.len()
        )));
    }
    Ok((spearman_scores(&mine, &theirs)?, mine.len()))
}

/// Mean `Rank_Score` of one subframe over left and over right communities.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScatterPoint {
    pub subframe: String,
    /// `None` when that side has no community.
    pub left: Option<f64>,
    pub right: Option<f64>,
}

/// Communities with positive polarity count as left, negative as right and
/// zero as neither. Subframes absent from a community's ranking count 0.
pub fn subframe_polarity_scatter(subframes: &[String], rankings: &[Ranking], polarity: &[f64]) -> Vec<ScatterPoint> {
    assert_eq!(rankings.len(), polarity.len(), "one subframe ranking per community");
    let side = |pred: fn(f64) -> bool, name: &str| -> Option<f64> {
        let ks: Vec<usize> = (0..polarity.len()).filter(|&k| pred(polarity[k])).collect();
        (!ks.is_empty()).then(|| ks.iter().map(|&k| rankings[k].rank_score_of(name)).sum::<f64>() / ks.len() as f64)
    };
    subframes
        .iter()
        .map(|name| ScatterPoint {
            subframe: name.clone(),
            left: side(|p| p > 0.0, name),
            right: side(|p| p < 0.0, name),
        })
        .collect()
}

/// One community's correlations with the two extreme communities.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SegregationRow {
    pub community: usize,
    pub polarity: f64,
    /// `kind -> (with leftmost, with rightmost)`; either side is `None` when
    /// fewer than two ranked items are shared or the ranks are constant.
    pub correlations: BTreeMap<RankedKind, (Option<f64>, Option<f64>)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SegregationProfile {
    pub leftmost: usize,
    pub rightmost: usize,
    /// Rows in left-to-right order.
    pub rows: Vec<SegregationRow>,
}

/// Correlates every community's rankings with those of the leftmost and
/// rightmost community.
pub fn segregation_profile(rankings: &[BTreeMap<RankedKind, Ranking>], polarity: &[f64]) -> Result<SegregationProfile> {
    if rankings.len() < 3 {
        return Err(Error::Insufficient(format!(
            "segregation profile needs at least 3 communities, got {}",
            rankings.len()
        )));
    }
    assert_eq!(rankings.len(), polarity.len(), "one ranking set per community");
    let order = polarity_order(polarity);
    let (leftmost, rightmost) = (order[0], order[order.len() - 1]);
    let corr = |a: &BTreeMap<RankedKind, Ranking>, b: &BTreeMap<RankedKind, Ranking>, kind| match (a.get(&kind), b.get(&kind)) {
        (Some(x), Some(y)) => spearman_joined(x, y).ok().map(|(r, _)| r),
        _ => None,
    };
    let rows = order
        .iter()
        .map(|&k| SegregationRow {
            community: k,
            polarity: polarity[k],
            correlations: RankedKind::ALL
                .iter()
                .map(|&kind| {
                    (
                        kind,
                        (corr(&rankings[k], &rankings[leftmost], kind), corr(&rankings[k], &rankings[rightmost], kind)),
                    )
                })
                .collect(),
        })
        .collect();
    Ok(SegregationProfile { leftmost, rightmost, rows })
}

/// Cosine of article vectors with centroids, columns in the given order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Heatmap {
    pub rows: Vec<String>,
    pub columns: Vec<usize>,
    pub values: Vec<Vec<f64>>,
}

pub fn doc_community_heatmap(
    articles: &[usize],
    graph: &InfoGraph,
    store: &EmbeddingStore,
    centroids: &[Vec<f64>],
    columns: &[usize],
) -> Heatmap {
    Heatmap {
        rows: articles.iter().map(|&a| graph.articles[a].clone()).collect(),
        columns: columns.to_vec(),
        values: articles
            .iter()
            .map(|&a| {
                let v = store.vector(NodeRef::new(NodeKind::Article, a));
                columns.iter().map(|&k| cosine(&v, &centroids[k])).collect()
            })
            .collect(),
    }
}

/// Side of each community by the sign of its polarity; zero counts as none.
pub fn polarity_side(p: f64) -> Option<Bias> {
    if p > 0.0 {
        Some(Bias::Left)
    } else if p < 0.0 {
        Some(Bias::Right)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn polarity_extremes() {
        let left = vec![0.3, -0.4, 1.2];
        let neg: Vec<f64> = left.iter().map(|x| -x).collect();
        let p = community_polarity(&[left.clone(), neg, vec![0.4, 0.3, 0.0]], &left);
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert!((p[1] + 1.0).abs() < 1e-12);
        assert!(p[2].abs() < 1e-12);
        assert_eq!(polarity_order(&p), vec![0, 2, 1]);
    }

    #[test]
    fn frame_score_by_hand() {
        // Three articles: scores 0.9, 0.5, -0.2.
        let frames = vec![
            vec![Frame::Economic, Frame::Morality],
            vec![Frame::Economic],
            vec![Frame::Morality, Frame::Legality],
        ];
        let s = frame_scores(&[(0, 0.9), (1, 0.5), (2, -0.2)], &frames);
        assert!((s[&Frame::Economic] - 0.7).abs() < 1e-12);
        assert!((s[&Frame::Morality] - 0.35).abs() < 1e-12);
        assert!((s[&Frame::Legality] + 0.2).abs() < 1e-12);
        assert!(!s.contains_key(&Frame::Political));
    }

    #[test]
    fn external_correlation_signs() {
        let ext = ExternalScores::new([("a", 0.1), ("b", 0.5), ("c", 0.9)].iter().map(|(k, v)| (k.to_string(), *v)).collect()).unwrap();
        let same = Ranking::new(vec![("a".into(), 0.1), ("b".into(), 0.2), ("c".into(), 0.3)]);
        assert!((external_score_correlation(&same, &ext).unwrap().0 - 1.0).abs() < 1e-12);
        let left = Ranking::new(vec![("a".into(), 0.9), ("b".into(), 0.5), ("c".into(), 0.1), ("z".into(), 0.0)]);
        let (r, n) = external_score_correlation(&left, &ext).unwrap();
        assert!((r + 1.0).abs() < 1e-12);
        assert_eq!(n, 3);
        assert!(external_score_correlation(&Ranking::new(vec![("a".into(), 1.0)]), &ext).is_err());
    }

    #[test]
    fn scatter_by_hand() {
        let names = vec!["x".to_string(), "y".to_string()];
        let r0 = Ranking::new(vec![("x".into(), 0.9), ("y".into(), 0.1)]);
        let r1 = Ranking::new(vec![("y".into(), 0.4)]);
        let pts = subframe_polarity_scatter(&names, &[r0.clone(), r1.clone()], &[0.5, -0.5]);
        assert_eq!(pts[0].left, Some(1.0));
        assert_eq!(pts[0].right, Some(0.0));
        assert_eq!(pts[1].left, Some(0.5));
        assert_eq!(pts[1].right, Some(1.0));
        let one_side = subframe_polarity_scatter(&names, &[r0, r1], &[0.5, 0.2]);
        assert_eq!(one_side[0].right, None);
        assert_eq!(one_side[1].left, Some(0.75));
    }

    fn bloc(scores: &[f64]) -> BTreeMap<RankedKind, Ranking> {
        let r = Ranking::new(scores.iter().enumerate().map(|(i, s)| (format!("n{i}"), *s)).collect());
        RankedKind::ALL.iter().map(|&k| (k, r.clone())).collect()
    }

    #[test]
    fn perfect_echo_chambers() {
        let up = [1.0, 2.0, 3.0, 4.0];
        let down = [4.0, 3.0, 2.0, 1.0];
        let prof = segregation_profile(&[bloc(&down), bloc(&up), bloc(&up)], &[-0.8, 0.9, 0.5]).unwrap();
        assert_eq!((prof.leftmost, prof.rightmost), (1, 0));
        let first = &prof.rows[0];
        assert_eq!(first.community, 1);
        for (l, r) in first.correlations.values() {
            assert!((l.unwrap() - 1.0).abs() < 1e-12);
            assert!((r.unwrap() + 1.0).abs() < 1e-12);
        }
        assert!(segregation_profile(&[bloc(&up), bloc(&up)], &[0.1, 0.2]).is_err());
    }

    proptest! {
        #[test]
        fn polarity_scale_invariant(c in proptest::collection::vec(-5.0f64..5.0, 4), l in proptest::collection::vec(-5.0f64..5.0, 4), s in 0.01f64..100.0) {
            let scaled: Vec<f64> = c.iter().map(|x| x * s).collect();
            let a = community_polarity(&[c], &l)[0];
            let b = community_polarity(&[scaled], &l)[0];
            prop_assert!((a - b).abs() < 1e-9);
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&a));
        }
    }
}
