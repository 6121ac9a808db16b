use std::collections::{BTreeMap, BTreeSet, HashMap};

use log::warn;
use rand::Rng;

use crate::corpus::{Bias, Corpus, Document, Paragraph};
use crate::error::{Error, Result};
use crate::graph::{InfoGraph, NodeKind, NodeRef};

/// Row-major dense matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Matrix {
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    /// Entries uniform in `[-bound, bound)`.
    pub fn uniform<R: Rng + ?Sized>(rows: usize, dim: usize, bound: f64, rng: &mut R) -> Self {
        let data = (0..rows * dim).map(|_| rng.gen_range(-bound..bound)).collect();
        Matrix { dim, data }
    }

    pub fn from_rows(rows: &[Vec<f64>], dim: usize) -> Self {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            assert_eq!(r.len(), dim, "row width mismatch");
            data.extend_from_slice(r);
        }
        Matrix { dim, data }
    }

    pub fn rows(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows()).map(|i| self.row(i).to_vec()).collect()
    }
}

/// Mean pooling over word vectors of a document's first `sentence_cap`
/// sentences. Each article is cached as a sparse bag of `(word, weight)`
/// whose weights sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanPoolEncoder {
    pub sentence_cap: usize,
    words: Vec<String>,
    index: HashMap<String, u32>,
    pub(crate) table: Matrix,
    bags: Vec<Vec<(u32, f64)>>,
}

fn capped_tokens(paragraphs: &[Paragraph], cap: usize) -> impl Iterator<Item = &String> {
    paragraphs
        .iter()
        .flat_map(|p| p.sentences.iter())
        .take(cap)
        .flatten()
}

fn bag_of(tokens: impl Iterator<Item = Option<u32>>) -> Vec<(u32, f64)> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    let mut n = 0usize;
    for w in tokens.flatten() {
        *counts.entry(w).or_insert(0) += 1;
        n += 1;
    }
    counts.into_iter().map(|(w, c)| (w, c as f64 / n as f64)).collect()
}

impl MeanPoolEncoder {
    /// Vocabulary is every token of the capped article texts, sorted.
    pub fn new<R: Rng + ?Sized>(corpus: &Corpus, dim: usize, sentence_cap: usize, rng: &mut R) -> Self {
        assert!(sentence_cap >= 1, "sentence cap must be positive");
        let vocab: BTreeSet<&String> = (0..corpus.len())
            .flat_map(|d| capped_tokens(corpus.paragraphs(d), sentence_cap))
            .collect();
        let words: Vec<String> = vocab.into_iter().cloned().collect();
        let table = Matrix::uniform(words.len(), dim, 0.5 / dim as f64, rng);
        Self::with_table(corpus, words, table, sentence_cap)
    }

    pub(crate) fn with_table(corpus: &Corpus, words: Vec<String>, table: Matrix, sentence_cap: usize) -> Self {
        let index: HashMap<String, u32> = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        let bags = (0..corpus.len())
            .map(|d| {
                let bag = bag_of(capped_tokens(corpus.paragraphs(d), sentence_cap).map(|t| index.get(t).copied()));
                if bag.is_empty() {
                    warn!("document `{}` has no in-vocabulary tokens; encoded as zero", corpus.document(d).id);
                }
                bag
            })
            .collect();
        MeanPoolEncoder {
            sentence_cap,
            words,
            index,
            table,
            bags,
        }
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word_index(&self, word: &str) -> Option<usize> {
        self.index.get(word).map(|&i| i as usize)
    }

    pub fn bag(&self, article: usize) -> &[(u32, f64)] {
        &self.bags[article]
    }

    pub fn articles(&self) -> usize {
        self.bags.len()
    }

    pub fn pool(&self, bag: &[(u32, f64)], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(w, c) in bag {
            for (o, x) in out.iter_mut().zip(self.table.row(w as usize)) {
                *o += c * x;
            }
        }
    }

    /// Mean of the in-vocabulary token vectors; `None` when every token is
    /// out of vocabulary.
    pub fn encode_tokens<'a>(&self, tokens: impl IntoIterator<Item = &'a String>) -> Option<Vec<f64>> {
        let bag = bag_of(tokens.into_iter().map(|t| self.index.get(t).copied()));
        if bag.is_empty() {
            return None;
        }
        let mut out = vec![0.0; self.table.dim()];
        self.pool(&bag, &mut out);
        Some(out)
    }

    /// Encodes a document that need not belong to the training corpus.
    pub fn encode_document(&self, doc: &Document) -> Vec<f64> {
        let paragraphs: Vec<Paragraph> = crate::corpus::tokenize::split_paragraphs(&doc.body)
            .into_iter()
            .enumerate()
            .map(|(i, t)| Paragraph::from_text(&doc.id, i, t))
            .collect();
        let bag = bag_of(capped_tokens(&paragraphs, self.sentence_cap).map(|t| self.index.get(t).copied()));
        if bag.is_empty() {
            warn!("document `{}` has no in-vocabulary tokens; encoded as zero", doc.id);
        }
        let mut out = vec![0.0; self.table.dim()];
        self.pool(&bag, &mut out);
        out
    }

    /// Overwrites vectors of known words from `word v1 .. vd` lines. Returns
    /// the number of words replaced.
    pub fn import_word_table(&mut self, text: &str, path: &str) -> Result<usize> {
        let dim = self.table.dim();
        let mut replaced = 0;
        for (n, line) in text.lines().enumerate() {
            let mut cols = line.split_whitespace();
            let Some(word) = cols.next() else { continue };
            let values: std::result::Result<Vec<f64>, _> = cols.map(str::parse::<f64>).collect();
            let values = values.map_err(|e| Error::Parse {
                path: path.into(),
                line: n + 1,
                message: e.to_string(),
            })?;
            if values.len() != dim {
                return Err(Error::Parse {
                    path: path.into(),
                    line: n + 1,
                    message: format!("expected {dim} values, found {}", values.len()),
                });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("{path}:{}: word `{word}`", n + 1)));
            }
            if let Some(&i) = self.index.get(word) {
                self.table.row_mut(i as usize).copy_from_slice(&values);
                replaced += 1;
            }
        }
        Ok(replaced)
    }
}

/// Node vectors of every graph node plus the article encoder.
///
/// Users, expressions, influencers and labels own a vector; articles are
/// encoded from word vectors; community centroids are frozen and set from
/// outside.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    pub(crate) users: Matrix,
    pub(crate) subframes: Matrix,
    pub(crate) influencers: Matrix,
    pub(crate) labels: Matrix,
    pub(crate) communities: Matrix,
    pub(crate) encoder: MeanPoolEncoder,
    pub(crate) ids: NodeIds,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct NodeIds {
    pub articles: Vec<String>,
    pub users: Vec<String>,
    pub subframes: Vec<String>,
    pub influencers: Vec<String>,
}

impl EmbeddingStore {
    /// Random initialization, uniform in `±0.5/dim`.
    pub fn new<R: Rng + ?Sized>(graph: &InfoGraph, corpus: &Corpus, dim: usize, sentence_cap: usize, rng: &mut R) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        assert_eq!(graph.articles.len(), corpus.len(), "graph and corpus disagree");
        let bound = 0.5 / dim as f64;
        let users = Matrix::uniform(graph.users.len(), dim, bound, rng);
        let subframes = Matrix::uniform(graph.subframes.len(), dim, bound, rng);
        let influencers = Matrix::uniform(graph.influencers.len(), dim, bound, rng);
        let labels = Matrix::uniform(2, dim, bound, rng);
        let encoder = MeanPoolEncoder::new(corpus, dim, sentence_cap, rng);
        EmbeddingStore {
            dim,
            users,
            subframes,
            influencers,
            labels,
            communities: Matrix::zeros(0, dim),
            encoder,
            ids: NodeIds {
                articles: graph.articles.clone(),
                users: graph.users.clone(),
                subframes: graph.subframes.clone(),
                influencers: graph.influencers.clone(),
            },
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        dim: usize,
        users: Matrix,
        subframes: Matrix,
        influencers: Matrix,
        labels: Matrix,
        communities: Matrix,
        encoder: MeanPoolEncoder,
        ids: NodeIds,
    ) -> Self {
        EmbeddingStore {
            dim,
            users,
            subframes,
            influencers,
            labels,
            communities,
            encoder,
            ids,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn encoder(&self) -> &MeanPoolEncoder {
        &self.encoder
    }

    pub fn encoder_mut(&mut self) -> &mut MeanPoolEncoder {
        &mut self.encoder
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        match kind {
            NodeKind::Article => self.encoder.articles(),
            NodeKind::User => self.users.rows(),
            NodeKind::Subframe => self.subframes.rows(),
            NodeKind::Influencer => self.influencers.rows(),
            NodeKind::Label => 2,
            NodeKind::Community => self.communities.rows(),
        }
    }

    pub(crate) fn direct(&self, kind: NodeKind) -> Option<&Matrix> {
        match kind {
            NodeKind::User => Some(&self.users),
            NodeKind::Subframe => Some(&self.subframes),
            NodeKind::Influencer => Some(&self.influencers),
            NodeKind::Label => Some(&self.labels),
            NodeKind::Community => Some(&self.communities),
            NodeKind::Article => None,
        }
    }

    pub(crate) fn direct_mut(&mut self, kind: NodeKind) -> Option<&mut Matrix> {
        match kind {
            NodeKind::User => Some(&mut self.users),
            NodeKind::Subframe => Some(&mut self.subframes),
            NodeKind::Influencer => Some(&mut self.influencers),
            NodeKind::Label => Some(&mut self.labels),
            NodeKind::Community => Some(&mut self.communities),
            NodeKind::Article => None,
        }
    }

    /// Writes the node's vector into `out`.
    pub fn vector_into(&self, node: NodeRef, out: &mut [f64]) {
        match self.direct(node.kind) {
            Some(m) => out.copy_from_slice(m.row(node.idx())),
            None => self.encoder.pool(self.encoder.bag(node.idx()), out),
        }
    }

    pub fn vector(&self, node: NodeRef) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.vector_into(node, &mut out);
        out
    }

    pub fn label_vector(&self, bias: Bias) -> &[f64] {
        self.labels.row(bias.index())
    }

    /// Every vector of one kind, in node order.
    pub fn vectors(&self, kind: NodeKind) -> Vec<Vec<f64>> {
        (0..self.count(kind)).map(|i| self.vector(NodeRef::new(kind, i))).collect()
    }

    /// Replaces the frozen community centroids.
    pub fn set_communities(&mut self, centroids: &[Vec<f64>]) {
        self.communities = Matrix::from_rows(centroids, self.dim);
    }

    pub fn ids(&self, kind: NodeKind) -> Vec<String> {
        match kind {
            NodeKind::Article => self.ids.articles.clone(),
            NodeKind::User => self.ids.users.clone(),
            NodeKind::Subframe => self.ids.subframes.clone(),
            NodeKind::Influencer => self.ids.influencers.clone(),
            NodeKind::Label => Bias::BOTH.iter().map(Bias::to_string).collect(),
            NodeKind::Community => (0..self.communities.rows()).map(|k| format!("community_{k}")).collect(),
        }
    }

    /// True when every stored parameter is finite.
    pub fn is_finite(&self) -> bool {
        [&self.users, &self.subframes, &self.influencers, &self.labels, &self.communities, &self.encoder.table]
            .iter()
            .all(|m| m.as_slice().iter().all(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SocialEdges;
    use crate::graph::build_graph;
    use crate::lexicon::SubframeMap;
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

    fn store_for(bodies: &[&str], cap: usize) -> (Corpus, EmbeddingStore) {
        let corpus =
            Corpus::from_documents(bodies.iter().enumerate().map(|(i, b)| doc(&format!("d{i}"), b)).collect()).unwrap();
        let g = build_graph(&corpus, &SocialEdges::default(), &SubframeMap::default()).unwrap();
        let store = EmbeddingStore::new(&g, &corpus, 4, cap, &mut ChaCha8Rng::seed_from_u64(0));
        (corpus, store)
    }

    #[test]
    fn mean_of_word_vectors() {
        let (_, store) = store_for(&["alpha", "alpha beta"], 20);
        let enc = store.encoder();
        let a = enc.table.row(enc.word_index("alpha").unwrap()).to_vec();
        let b = enc.table.row(enc.word_index("beta").unwrap()).to_vec();
        assert_eq!(store.vector(NodeRef::new(NodeKind::Article, 0)), a);
        let mean: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x + y) / 2.0).collect();
        let got = store.vector(NodeRef::new(NodeKind::Article, 1));
        for (g, m) in got.iter().zip(&mean) {
            assert!((g - m).abs() < 1e-15);
        }
    }

    #[test]
    fn sentence_cap_truncates() {
        let body: String = (0..25).map(|i| format!("w{i} common. ")).collect();
        let (corpus, store) = store_for(&[&body], 20);
        let enc = store.encoder();
        assert!(enc.word_index("w19").is_some());
        assert!(enc.word_index("w20").is_none());
        assert_eq!(enc.bag(0).len(), 21);
        // "common" appears in all 20 kept sentences out of 40 tokens.
        let common = enc.word_index("common").unwrap() as u32;
        assert_eq!(enc.bag(0).iter().find(|(w, _)| *w == common).unwrap().1, 0.5);
        assert_eq!(enc.encode_document(corpus.document(0)), store.vector(NodeRef::new(NodeKind::Article, 0)));
    }

    #[test]
    fn out_of_vocabulary_is_zero() {
        let (_, store) = store_for(&["alpha"], 20);
        let v = store.encoder().encode_document(&doc("x", "unseen words only"));
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn import_table() {
        let (_, mut store) = store_for(&["alpha beta"], 20);
        let n = store
            .encoder_mut()
            .import_word_table("alpha 1 2 3 4\ngamma 0 0 0 0\n", "t")
            .unwrap();
        assert_eq!(n, 1);
        let i = store.encoder().word_index("alpha").unwrap();
        assert_eq!(store.encoder().table.row(i), &[1.0, 2.0, 3.0, 4.0]);
        assert!(store.encoder_mut().import_word_table("alpha 1 2", "t").is_err());
    }

    #[test]
    fn init_bounds() {
        let (_, store) = store_for(&["alpha beta gamma"], 20);
        for m in [&store.labels, &store.encoder.table] {
            assert!(m.as_slice().iter().all(|v| v.abs() <= 0.125));
        }
        assert!(store.is_finite());
    }
}
