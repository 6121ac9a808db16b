use std::collections::BTreeSet;

use log::{debug, warn};
use rand::seq::index;
use rand::Rng;
use serde::Serialize;

use crate::corpus::Bias;
use crate::embedding::{infer_bias, EmbeddingStore, Similarity};
use crate::graph::{InfoGraph, NodeKind, NodeRef, RelationKind, TrainingPair};

use super::gmm::CommunityModel;

/// Communities of each user at a membership threshold.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assignments {
    pub k: usize,
    /// Sorted community indices per user.
    pub members: Vec<Vec<usize>>,
    pub unassigned: Vec<usize>,
}

impl Assignments {
    /// Users of community `c`, in user order.
    pub fn community(&self, c: usize) -> Vec<usize> {
        (0..self.members.len()).filter(|&u| self.members[u].contains(&c)).collect()
    }
}

/// Assigns each user to every community with membership ≥ `threshold`.
///
/// # Panics
/// If `threshold` is outside `(0, 1]`.
pub fn assign_users(model: &CommunityModel, threshold: f64) -> Assignments {
    assert!(threshold > 0.0 && threshold <= 1.0, "threshold {threshold} outside (0, 1]");
    let members: Vec<Vec<usize>> = model
        .memberships
        .iter()
        .map(|row| (0..row.len()).filter(|&k| row[k] >= threshold).collect())
        .collect();
    let unassigned: Vec<usize> = (0..members.len()).filter(|&u| members[u].is_empty()).collect();
    if !unassigned.is_empty() {
        warn!("{} users below membership threshold {threshold}", unassigned.len());
    }
    Assignments {
        k: model.k(),
        members,
        unassigned,
    }
}

/// `S_C`: (user, centroid) for each assignment and (article, centroid) for
/// each article shared by a member.
///
/// Negatives are `k_neg` other centroids. With fewer than `k_neg` other
/// centroids the rest are users outside the community; a pair with no
/// negative at all is dropped.
pub fn build_cohesion_pairs<R: Rng + ?Sized>(
    assignments: &Assignments,
    graph: &InfoGraph,
    k_neg: usize,
    rng: &mut R,
) -> Vec<TrainingPair> {
    let k = assignments.k;
    let mut anchors: BTreeSet<(usize, NodeRef)> = BTreeSet::new();
    for (u, comms) in assignments.members.iter().enumerate() {
        for &c in comms {
            anchors.insert((c, NodeRef::new(NodeKind::User, u)));
            for &a in graph.neighbors(RelationKind::Share, u) {
                anchors.insert((c, NodeRef::new(NodeKind::Article, a as usize)));
            }
        }
    }
    let outsiders: Vec<Vec<usize>> = (0..k)
        .map(|c| (0..assignments.members.len()).filter(|&u| !assignments.members[u].contains(&c)).collect())
        .collect();

    let mut pairs = Vec::with_capacity(anchors.len());
    let (mut filled, mut dropped) = (0usize, 0usize);
    for (c, anchor) in anchors {
        let others: Vec<usize> = (0..k).filter(|&j| j != c).collect();
        let mut negatives: Vec<NodeRef> = if others.len() > k_neg {
            index::sample(rng, others.len(), k_neg)
                .into_iter()
                .map(|i| NodeRef::new(NodeKind::Community, others[i]))
                .collect()
        } else {
            others.iter().map(|&j| NodeRef::new(NodeKind::Community, j)).collect()
        };
        let missing = k_neg - negatives.len();
        if missing > 0 {
            let pool: Vec<usize> = outsiders[c]
                .iter()
                .copied()
                .filter(|&u| anchor != NodeRef::new(NodeKind::User, u))
                .collect();
            let take = missing.min(pool.len());
            negatives.extend(
                index::sample(rng, pool.len(), take)
                    .into_iter()
                    .map(|i| NodeRef::new(NodeKind::User, pool[i])),
            );
            filled += 1;
        }
        if negatives.is_empty() {
            dropped += 1;
            continue;
        }
        pairs.push(TrainingPair {
            relation: RelationKind::Cohesion,
            anchor,
            positive: NodeRef::new(NodeKind::Community, c),
            negatives,
        });
    }
    if filled > 0 {
        debug!("cohesion: {filled} pairs padded with non-member users, only {} other centroids", k.saturating_sub(1));
    }
    if dropped > 0 {
        warn!("cohesion: {dropped} pairs dropped without any negative");
    }
    pairs
}

/// Result of labeling communities, users and shared articles.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LabelInference {
    pub community_labels: Vec<Bias>,
    /// Majority community label per article; `None` when unshared, shared
    /// only by unassigned users, or tied.
    pub article_majority: Vec<Option<Bias>>,
    pub ties: usize,
}

/// `S_L`: each assigned user with the label its own vector is closest to,
/// and each shared article with the majority label of the communities it was
/// shared in. The opposite label is the single negative.
pub fn infer_labels(
    store: &EmbeddingStore,
    model: &CommunityModel,
    assignments: &Assignments,
    graph: &InfoGraph,
    sim: Similarity,
) -> (Vec<TrainingPair>, LabelInference) {
    let community_labels: Vec<Bias> = model.means.iter().map(|m| infer_bias(m, store, sim).label).collect();
    let mut pairs = Vec::new();
    let pair = |anchor: NodeRef, label: Bias| TrainingPair {
        relation: RelationKind::InferredLabel,
        anchor,
        positive: NodeRef::label(label),
        negatives: vec![NodeRef::label(label.opposite())],
    };
    for (u, comms) in assignments.members.iter().enumerate() {
        if comms.is_empty() {
            continue;
        }
        let node = NodeRef::new(NodeKind::User, u);
        pairs.push(pair(node, infer_bias(&store.vector(node), store, sim).label));
    }

    let mut votes = vec![[0usize; 2]; graph.articles.len()];
    for &(u, a) in graph.edges(RelationKind::Share) {
        for &c in &assignments.members[u as usize] {
            votes[a as usize][community_labels[c].index()] += 1;
        }
    }
    let mut ties = 0;
    let article_majority: Vec<Option<Bias>> = votes
        .iter()
        .map(|&[l, r]| {
            if l > r {
                Some(Bias::Left)
            } else if r > l {
                Some(Bias::Right)
            } else {
                ties += (l > 0) as usize;
                None
            }
        })
        .collect();
    if ties > 0 {
        debug!("{ties} shared articles tied between left and right communities; skipped");
    }
    for (a, label) in article_majority.iter().enumerate() {
        if let Some(b) = label {
            pairs.push(pair(NodeRef::new(NodeKind::Article, a), *b));
        }
    }
    (
        pairs,
        LabelInference {
            community_labels,
            article_majority,
            ties,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, Document, SocialEdges};
    use crate::embedding::Matrix;
    use crate::graph::build_graph;
    use crate::lexicon::SubframeMap;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model_with(rows: Vec<Vec<f64>>) -> CommunityModel {
        let k = rows[0].len();
        CommunityModel {
            means: vec![vec![0.0]; k],
            variances: vec![vec![1.0]; k],
            weights: vec![1.0 / k as f64; k],
            memberships: rows,
            log_likelihood: 0.0,
            trace: vec![],
        }
    }

    #[test]
    fn threshold_assignment() {
        let a = assign_users(&model_with(vec![vec![0.9, 0.1], vec![0.4, 0.6], vec![0.5, 0.5]]), 0.5);
        assert_eq!(a.members, vec![vec![0], vec![1], vec![0, 1]]);
        let b = assign_users(&model_with(vec![vec![0.35, 0.33, 0.32], vec![0.2, 0.2, 0.6]]), 0.3);
        assert_eq!(b.members, vec![vec![0, 1, 2], vec![2]]);
        let c = assign_users(&model_with(vec![vec![0.4, 0.3, 0.3]]), 0.5);
        assert_eq!(c.unassigned, vec![0]);
    }

    fn world(n_users: usize) -> (Corpus, InfoGraph) {
        let docs = (0..3)
            .map(|i| Document {
                id: format!("a{i}"),
                topic: None,
                bias: None,
                title: String::new(),
                body: "text".into(),
                source: String::new(),
                date: None,
                frame: None,
            })
            .collect();
        let corpus = Corpus::from_documents(docs).unwrap();
        let mut edges = SocialEdges::default();
        for u in 0..n_users {
            edges.shares.insert((format!("u{u}"), format!("a{}", u % 2)));
        }
        let g = build_graph(&corpus, &edges, &SubframeMap::default()).unwrap();
        (corpus, g)
    }

    #[test]
    fn cohesion_pairs_for_user_and_article() {
        let (_, g) = world(4);
        // u0 shares a0; u1 shares a1; u2 shares a0; u3 unassigned.
        let asg = Assignments {
            k: 7,
            members: vec![vec![2], vec![0], vec![2], vec![]],
            unassigned: vec![3],
        };
        let pairs = build_cohesion_pairs(&asg, &g, 5, &mut ChaCha8Rng::seed_from_u64(0));
        let got: Vec<(NodeRef, usize)> = pairs.iter().map(|p| (p.anchor, p.positive.idx())).collect();
        let art = |i| NodeRef::new(NodeKind::Article, i);
        let usr = |i| NodeRef::new(NodeKind::User, i);
        assert_eq!(got, vec![(art(1), 0), (usr(1), 0), (art(0), 2), (usr(0), 2), (usr(2), 2)]);
        for p in &pairs {
            assert_eq!(p.negatives.len(), 5);
            assert!(p.negatives.iter().all(|n| n.kind == NodeKind::Community && *n != p.positive));
        }
    }

    #[test]
    fn few_centroids_fall_back_to_outsiders() {
        let (_, g) = world(3);
        let asg = Assignments {
            k: 2,
            members: vec![vec![0], vec![1], vec![1]],
            unassigned: vec![],
        };
        let pairs = build_cohesion_pairs(&asg, &g, 5, &mut ChaCha8Rng::seed_from_u64(0));
        let u0 = pairs.iter().find(|p| p.anchor == NodeRef::new(NodeKind::User, 0)).unwrap();
        let mut negs = u0.negatives.clone();
        negs.sort();
        assert_eq!(
            negs,
            vec![NodeRef::new(NodeKind::User, 1), NodeRef::new(NodeKind::User, 2), NodeRef::new(NodeKind::Community, 1)]
        );
        // A single community with every user inside has nothing to contrast.
        let all = Assignments {
            k: 1,
            members: vec![vec![0]; 3],
            unassigned: vec![],
        };
        assert!(build_cohesion_pairs(&all, &g, 5, &mut ChaCha8Rng::seed_from_u64(0)).is_empty());
    }

    #[test]
    fn majority_and_ties() {
        let (corpus, g) = world(4);
        let mut store = EmbeddingStore::new(&g, &corpus, 2, 20, &mut ChaCha8Rng::seed_from_u64(0));
        store.labels = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], 2);
        store.users = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.1]], 2);
        let mut model = model_with(vec![vec![1.0, 0.0]; 4]);
        model.means = vec![vec![0.9, 0.1], vec![0.1, 0.9], vec![0.8, 0.0]];
        // a0 is shared by u0 (communities 0 and 2, both left) and u2 (right);
        // a1 by u1 (right) and u3 (left).
        let asg = Assignments {
            k: 3,
            members: vec![vec![0, 2], vec![1], vec![1], vec![0]],
            unassigned: vec![],
        };
        let (pairs, inf) = infer_labels(&store, &model, &asg, &g, Similarity::Cosine);
        assert_eq!(inf.community_labels, vec![Bias::Left, Bias::Right, Bias::Left]);
        assert_eq!(inf.article_majority, vec![Some(Bias::Left), None, None]);
        assert_eq!(inf.ties, 1);
        let user0 = pairs.iter().find(|p| p.anchor == NodeRef::new(NodeKind::User, 0)).unwrap();
        assert_eq!(user0.positive, NodeRef::label(Bias::Left));
        assert_eq!(user0.negatives, vec![NodeRef::label(Bias::Right)]);
        assert_eq!(pairs.len(), 4 + 1);
    }
}
