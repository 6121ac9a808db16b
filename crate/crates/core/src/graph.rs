//! The typed information graph and relation-typed negative sampling.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use log::{debug, warn};
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{sequence_ngrams, Bias, Corpus, SocialEdges};
use crate::error::{Error, Result};
use crate::lexicon::SubframeMap;
use crate::par::Execution;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Article,
    User,
    Subframe,
    Influencer,
    Label,
    /// Community centroids; only referenced by cohesion pairs.
    Community,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeRef {
    pub kind: NodeKind,
    pub index: u32,
}

impl NodeRef {
    pub fn new(kind: NodeKind, index: usize) -> Self {
        NodeRef {
            kind,
            index: index as u32,
        }
    }

    pub fn idx(self) -> usize {
        self.index as usize
    }

    pub fn label(bias: Bias) -> Self {
        NodeRef::new(NodeKind::Label, bias.index())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    Share,
    Follow,
    Affiliation,
    Contains,
    Cohesion,
    InferredLabel,
}

impl RelationKind {
    pub const ALL: [RelationKind; 6] = [
        RelationKind::Share,
        RelationKind::Follow,
        RelationKind::Affiliation,
        RelationKind::Contains,
        RelationKind::Cohesion,
        RelationKind::InferredLabel,
    ];

    /// Relations stored in the base graph.
    pub const BASE: [RelationKind; 4] = [
        RelationKind::Share,
        RelationKind::Follow,
        RelationKind::Affiliation,
        RelationKind::Contains,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RelationKind::Share => "share",
            RelationKind::Follow => "follow",
            RelationKind::Affiliation => "affiliation",
            RelationKind::Contains => "contains",
            RelationKind::Cohesion => "cohesion",
            RelationKind::InferredLabel => "inferred_label",
        }
    }

    pub fn is_base(self) -> bool {
        RelationKind::BASE.contains(&self)
    }

    /// `(source, target)` node kinds of a base relation.
    pub fn endpoints(self) -> Option<(NodeKind, NodeKind)> {
        match self {
            RelationKind::Share => Some((NodeKind::User, NodeKind::Article)),
            RelationKind::Follow => Some((NodeKind::User, NodeKind::Influencer)),
            RelationKind::Affiliation => Some((NodeKind::Influencer, NodeKind::Label)),
            RelationKind::Contains => Some((NodeKind::Article, NodeKind::Subframe)),
            RelationKind::Cohesion | RelationKind::InferredLabel => None,
        }
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RelationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RelationKind::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown relation `{s}`")))
    }
}

/// One positive pair with its negatives, all of the positive's node kind.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingPair {
    pub relation: RelationKind,
    pub anchor: NodeRef,
    pub positive: NodeRef,
    pub negatives: Vec<NodeRef>,
}

/// Articles, users, subframe expressions, influencers and the two label
/// nodes, with share/follow/affiliation/contains edges.
///
/// Node order: articles follow the corpus, users and influencers are sorted
/// by id, expressions follow the subframe map. Label 0 is Left, 1 is Right.
#[derive(Clone, Debug, PartialEq)]
pub struct InfoGraph {
    pub articles: Vec<String>,
    pub users: Vec<String>,
    pub subframes: Vec<String>,
    pub influencers: Vec<String>,
    /// Per base relation, sorted `(source, target)` index pairs.
    edges: BTreeMap<RelationKind, Vec<(u32, u32)>>,
    /// Per base relation, sorted targets of each source.
    adjacency: BTreeMap<RelationKind, Vec<Vec<u32>>>,
}

/// Builds the graph using the default execution mode.
pub fn build_graph(corpus: &Corpus, edges: &SocialEdges, map: &SubframeMap) -> Result<InfoGraph> {
    build_graph_with(corpus, edges, map, Execution::default())
}

pub fn build_graph_with(
    corpus: &Corpus,
    edges: &SocialEdges,
    map: &SubframeMap,
    exec: Execution,
) -> Result<InfoGraph> {
    edges.validate(corpus)?;

    let articles: Vec<String> = corpus.documents().iter().map(|d| d.id.clone()).collect();
    let users = edges.users();
    let influencers: Vec<String> = edges.affiliations.keys().cloned().collect();
    let subframes: Vec<String> = map.grams().into_iter().map(str::to_string).collect();

    let user_ix: HashMap<&str, u32> = users.iter().enumerate().map(|(i, u)| (u.as_str(), i as u32)).collect();
    let inf_ix: HashMap<&str, u32> = influencers
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_str(), i as u32))
        .collect();

    let mut share = Vec::with_capacity(edges.shares.len());
    for (u, d) in &edges.shares {
        let a = corpus
            .position(d)
            .ok_or_else(|| Error::Dangling(format!("share of unknown document `{d}`")))?;
        share.push((user_ix[u.as_str()], a as u32));
    }
    let mut follow = Vec::with_capacity(edges.follows.len());
    for (u, p) in &edges.follows {
        let i = *inf_ix
            .get(p.as_str())
            .ok_or_else(|| Error::Dangling(format!("follow of unknown influencer `{p}`")))?;
        follow.push((user_ix[u.as_str()], i));
    }
    let affiliation: Vec<(u32, u32)> = edges
        .affiliations
        .values()
        .enumerate()
        .map(|(i, b)| (i as u32, b.index() as u32))
        .collect();

    let gram_ix: HashMap<&str, u32> = subframes
        .iter()
        .enumerate()
        .map(|(i, g)| (g.as_str(), i as u32))
        .collect();
    let orders: BTreeSet<usize> = subframes.iter().map(|g| g.split(' ').count()).collect();
    let per_article: Vec<BTreeSet<u32>> = exec.map(corpus.len(), |a| {
        let mut hits = BTreeSet::new();
        for p in corpus.paragraphs(a) {
            for s in &p.sentences {
                for &n in &orders {
                    for g in sequence_ngrams(s, n) {
                        if let Some(&k) = gram_ix.get(g.as_str()) {
                            hits.insert(k);
                        }
                    }
                }
            }
        }
        hits
    });
    let contains: Vec<(u32, u32)> = per_article
        .iter()
        .enumerate()
        .flat_map(|(a, set)| set.iter().map(move |&k| (a as u32, k)))
        .collect();

    let mut graph = InfoGraph {
        articles,
        users,
        subframes,
        influencers,
        edges: BTreeMap::new(),
        adjacency: BTreeMap::new(),
    };
    for (rel, mut list) in [
        (RelationKind::Share, share),
        (RelationKind::Follow, follow),
        (RelationKind::Affiliation, affiliation),
        (RelationKind::Contains, contains),
    ] {
        list.sort_unstable();
        list.dedup();
        let (src, _) = rel.endpoints().expect("base relation");
        let mut adj = vec![Vec::new(); graph.count(src)];
        for &(s, t) in &list {
            adj[s as usize].push(t);
        }
        graph.edges.insert(rel, list);
        graph.adjacency.insert(rel, adj);
    }
    Ok(graph)
}

impl InfoGraph {
    /// Number of nodes of a kind; community nodes are not part of the graph.
    pub fn count(&self, kind: NodeKind) -> usize {
        match kind {
            NodeKind::Article => self.articles.len(),
            NodeKind::User => self.users.len(),
            NodeKind::Subframe => self.subframes.len(),
            NodeKind::Influencer => self.influencers.len(),
            NodeKind::Label => 2,
            NodeKind::Community => 0,
        }
    }

    /// Display id of a node.
    pub fn node_id(&self, node: NodeRef) -> String {
        let i = node.idx();
        match node.kind {
            NodeKind::Article => self.articles[i].clone(),
            NodeKind::User => self.users[i].clone(),
            NodeKind::Subframe => self.subframes[i].clone(),
            NodeKind::Influencer => self.influencers[i].clone(),
            NodeKind::Label => Bias::BOTH[i].to_string(),
            NodeKind::Community => format!("community_{i}"),
        }
    }

    /// Sorted `(source, target)` index pairs of a base relation.
    pub fn edges(&self, rel: RelationKind) -> &[(u32, u32)] {
        self.edges.get(&rel).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Sorted targets of `source` under a base relation.
    pub fn neighbors(&self, rel: RelationKind, source: usize) -> &[u32] {
        self.adjacency
            .get(&rel)
            .and_then(|adj| adj.get(source))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn is_edge(&self, rel: RelationKind, source: usize, target: usize) -> bool {
        self.neighbors(rel, source).binary_search(&(target as u32)).is_ok()
    }

    /// Articles with at least one share edge.
    pub fn shared_articles(&self) -> Vec<bool> {
        let mut shared = vec![false; self.articles.len()];
        for &(_, a) in self.edges(RelationKind::Share) {
            shared[a as usize] = true;
        }
        shared
    }

    /// Users sharing each article, in user order.
    pub fn sharers(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.articles.len()];
        for &(u, a) in self.edges(RelationKind::Share) {
            out[a as usize].push(u);
        }
        out
    }

    /// Line-delimited JSON dump, one `{"rel","src","dst"}` object per edge.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            rel: &'a str,
            src: String,
            dst: String,
        }
        let mut out = Vec::new();
        for rel in RelationKind::BASE {
            let (sk, tk) = rel.endpoints().expect("base relation");
            for &(s, t) in self.edges(rel) {
                let line = Line {
                    rel: rel.name(),
                    src: self.node_id(NodeRef::new(sk, s as usize)),
                    dst: self.node_id(NodeRef::new(tk, t as usize)),
                };
                serde_json::to_writer(&mut out, &line)?;
                out.push(b'\n');
            }
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&out))
            .map_err(|e| Error::io(path, e))
    }
}

/// Draws `k` distinct targets of `total` that are not in `excluded` (sorted),
/// or `k` with replacement when fewer than `k` qualify. `None` when nothing
/// qualifies.
fn draw_negatives<R: Rng + ?Sized>(total: usize, excluded: &[u32], k: usize, rng: &mut R) -> Option<(Vec<u32>, bool)> {
    let free = total - excluded.len();
    if free == 0 {
        return None;
    }
    let allowed = |c: u32| excluded.binary_search(&c).is_err();
    if free >= k && excluded.len() * 2 <= total && free >= 2 * k {
        let mut picked: Vec<u32> = Vec::with_capacity(k);
        while picked.len() < k {
            let c = rng.gen_range(0..total) as u32;
            if allowed(c) && !picked.contains(&c) {
                picked.push(c);
            }
        }
        return Some((picked, false));
    }
    let pool: Vec<u32> = (0..total as u32).filter(|&c| allowed(c)).collect();
    if pool.len() >= k {
        let picked = index::sample(rng, pool.len(), k).into_iter().map(|i| pool[i]).collect();
        Some((picked, false))
    } else {
        let picked = (0..k).map(|_| pool[rng.gen_range(0..pool.len())]).collect();
        Some((picked, true))
    }
}

/// One training pair per edge of a base relation, anchored at the source.
///
/// Negatives are target-kind nodes that are not neighbours of the anchor,
/// drawn uniformly without replacement. Anchors with fewer than `k_neg`
/// candidates sample with replacement; anchors with none are dropped. Both
/// cases are reported once per call.
///
/// # Panics
/// If `rel` is not a base relation or `k_neg` is zero.
pub fn sample_pairs<R: Rng + ?Sized>(g: &InfoGraph, rel: RelationKind, k_neg: usize, rng: &mut R) -> Vec<TrainingPair> {
    assert!(k_neg >= 1, "k_neg must be positive");
    let (sk, tk) = rel
        .endpoints()
        .unwrap_or_else(|| panic!("{rel} pairs are built from community assignments"));
    let total = g.count(tk);
    let mut pairs = Vec::with_capacity(g.edges(rel).len());
    let (mut short, mut dropped) = (0usize, 0usize);
    for &(s, t) in g.edges(rel) {
        match draw_negatives(total, g.neighbors(rel, s as usize), k_neg, rng) {
            Some((negs, replaced)) => {
                short += replaced as usize;
                pairs.push(TrainingPair {
                    relation: rel,
                    anchor: NodeRef::new(sk, s as usize),
                    positive: NodeRef::new(tk, t as usize),
                    negatives: negs.into_iter().map(|n| NodeRef::new(tk, n as usize)).collect(),
                });
            }
            None => dropped += 1,
        }
    }
    if short > 0 {
        debug!("{rel}: {short} pairs had fewer than {k_neg} negatives and sampled with replacement");
    }
    if dropped > 0 {
        warn!("{rel}: {dropped} pairs dropped, every {tk:?} node is a neighbour of the anchor");
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::lexicon::parse_subframe_map;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn doc(id: &str, body: &str) -> Document {
        Document {
            id: id.into(),
            topic: None,
            bias: None,
            title: String::new(),
            body: body.into(),
            source: String::new(),
            date: None,
            frame: None,
        }
    }

    fn map(json: &str) -> SubframeMap {
        parse_subframe_map(json, None).unwrap()
    }

    fn border_map() -> SubframeMap {
        map(r#"{"Wall": {"frame": "Security and Defense", "seeds": ["border wall", "wall"]},
               "Jobs": {"frame": "Economic", "seeds": ["stolen jobs act"]}}"#)
    }

    fn toy() -> (Corpus, SocialEdges) {
        let corpus = Corpus::from_documents(vec![
            doc("a1", "Build the Border wall now. The wall works."),
            doc("a2", "The stolen jobs act failed.\nNothing about borders."),
            doc("a3", "Border. Wall."),
        ])
        .unwrap();
        let mut edges = SocialEdges::default();
        edges.shares.insert(("u2".into(), "a1".into()));
        edges.shares.insert(("u1".into(), "a1".into()));
        edges.follows.insert(("u1".into(), "p1".into()));
        edges.affiliations.insert("p1".into(), Bias::Right);
        edges.affiliations.insert("p0".into(), Bias::Left);
        (corpus, edges)
    }

    #[test]
    fn toy_contains_edges() {
        let (corpus, edges) = toy();
        let g = build_graph(&corpus, &edges, &border_map()).unwrap();
        assert_eq!(g.subframes, vec!["border wall", "wall", "stolen jobs act"]);
        // "border wall" spans a sentence boundary in a3, so only "wall" matches.
        assert_eq!(g.edges(RelationKind::Contains), &[(0, 0), (0, 1), (1, 2), (2, 1)]);
        assert_eq!(g.users, vec!["u1", "u2"]);
        assert_eq!(g.influencers, vec!["p0", "p1"]);
        assert_eq!(g.edges(RelationKind::Share), &[(0, 0), (1, 0)]);
        assert_eq!(g.edges(RelationKind::Affiliation), &[(0, 0), (1, 1)]);
        assert_eq!(g.shared_articles(), vec![true, false, false]);
    }

    #[test]
    fn no_social_edges() {
        let (corpus, _) = toy();
        let mut edges = SocialEdges::default();
        edges.affiliations.insert("p".into(), Bias::Left);
        let g = build_graph(&corpus, &edges, &border_map()).unwrap();
        assert!(g.edges(RelationKind::Share).is_empty());
        assert!(g.edges(RelationKind::Follow).is_empty());
        assert_eq!(g.edges(RelationKind::Affiliation).len(), 1);
        assert_eq!(g.edges(RelationKind::Contains).len(), 4);
        assert!(g.users.is_empty());
    }

    #[test]
    fn dangling_references_fail() {
        let (corpus, mut edges) = toy();
        edges.shares.insert(("u1".into(), "nope".into()));
        assert!(matches!(build_graph(&corpus, &edges, &border_map()), Err(Error::Dangling(_))));
        let (corpus, mut edges) = toy();
        edges.follows.insert(("u1".into(), "ghost".into()));
        assert!(matches!(build_graph(&corpus, &edges, &border_map()), Err(Error::Dangling(_))));
    }

    #[test]
    fn single_edge_exact_negatives() {
        // One share edge, six articles, one neighbour: exactly five candidates.
        let corpus = Corpus::from_documents((0..6).map(|i| doc(&format!("a{i}"), "x")).collect()).unwrap();
        let mut edges = SocialEdges::default();
        edges.shares.insert(("u".into(), "a3".into()));
        let g = build_graph(&corpus, &edges, &SubframeMap::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pairs = sample_pairs(&g, RelationKind::Share, 5, &mut rng);
        assert_eq!(pairs.len(), 1);
        let mut negs: Vec<u32> = pairs[0].negatives.iter().map(|n| n.index).collect();
        negs.sort_unstable();
        assert_eq!(negs, vec![0, 1, 2, 4, 5]);
        let again = sample_pairs(&g, RelationKind::Share, 5, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(pairs, again);
    }

    #[test]
    fn exhausted_candidates() {
        let (corpus, edges) = toy();
        let g = build_graph(&corpus, &edges, &border_map()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // Each influencer has one affiliation and one free label.
        let aff = sample_pairs(&g, RelationKind::Affiliation, 5, &mut rng);
        assert_eq!(aff.len(), 2);
        for p in &aff {
            assert!(p.negatives.iter().all(|n| n.index != p.positive.index));
            assert_eq!(p.negatives.len(), 5);
        }
        // A user following every influencer has nothing to sample.
        let mut edges2 = edges.clone();
        edges2.follows.insert(("u1".into(), "p0".into()));
        let g2 = build_graph(&corpus, &edges2, &border_map()).unwrap();
        assert!(sample_pairs(&g2, RelationKind::Follow, 1, &mut rng).is_empty());
    }

    #[test]
    fn dump_lines() {
        let (corpus, edges) = toy();
        let g = build_graph(&corpus, &edges, &border_map()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.jsonl");
        g.write_jsonl(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2 + 1 + 2 + 4);
        assert_eq!(text.lines().next().unwrap(), r#"{"rel":"share","src":"u1","dst":"a1"}"#);
        assert!(text.contains(r#"{"rel":"affiliation","src":"p0","dst":"Left"}"#));
    }

    fn world() -> impl Strategy<Value = (Vec<String>, Vec<(usize, usize)>)> {
        let words = ["red", "blue", "green", "tax", "wall", "gun"];
        let bodies = proptest::collection::vec(
            proptest::collection::vec(0..words.len(), 1..12).prop_map(move |ix| {
                ix.iter().map(|&i| words[i]).collect::<Vec<_>>().join(" ")
            }),
            2..12,
        );
        (bodies, proptest::collection::vec((0usize..8, 0usize..12), 0..40))
    }

    proptest! {
        #[test]
        fn contains_matches_scan_and_negatives_avoid_neighbours((bodies, shares) in world(), seed in 0u64..1000) {
            let n = bodies.len();
            let corpus = Corpus::from_documents(
                bodies.iter().enumerate().map(|(i, b)| doc(&format!("d{i}"), b)).collect(),
            ).unwrap();
            let mut edges = SocialEdges::default();
            for (u, a) in shares {
                edges.shares.insert((format!("u{u}"), format!("d{}", a % n)));
            }
            let m = map(r#"{"A": {"frame": "Economic", "seeds": ["red blue", "tax"]},
                            "B": {"frame": "Morality", "seeds": ["wall gun red", "green"]}}"#);
            let g = build_graph(&corpus, &edges, &m).unwrap();

            let mut scanned = 0;
            for b in &bodies {
                let padded = format!(" {b} ");
                for gram in m.grams() {
                    scanned += padded.contains(&format!(" {gram} ")) as usize;
                }
            }
            prop_assert_eq!(g.edges(RelationKind::Contains).len(), scanned);

            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for rel in [RelationKind::Share, RelationKind::Contains] {
                let pairs = sample_pairs(&g, rel, 3, &mut rng);
                for p in pairs {
                    prop_assert!(g.is_edge(rel, p.anchor.idx(), p.positive.idx()));
                    for neg in &p.negatives {
                        prop_assert!(!g.is_edge(rel, p.anchor.idx(), neg.idx()));
                        prop_assert_eq!(neg.kind, p.positive.kind);
                    }
                }
            }

            let again = build_graph_with(&corpus, &edges, &m, Execution::Sequential).unwrap();
            prop_assert_eq!(g, again);
        }
    }
}
