//! Binary store checkpoint plus JSON manifest.
//!
//! Layout, little-endian: magic, version, dim, sentence cap, then the counts of
//! articles, users, expressions, influencers, communities and words. Articles
//! are stored as ids only and re-encoded from the corpus on load; every other
//! section is `(u32 length, UTF-8 id, dim × f32)` per row, labels included.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

use super::store::{EmbeddingStore, Matrix, MeanPoolEncoder, NodeIds};
use super::TrainConfig;

const MAGIC: &[u8; 8] = b"FRSCSTOR";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreManifest {
    pub format_version: u32,
    pub dim: usize,
    pub counts: BTreeMap<String, usize>,
    pub config: TrainConfig,
}

/// `<path>` with its extension replaced by `json`.
pub fn manifest_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }

    fn str(&mut self, s: &str) {
        self.u32(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }

    fn rows(&mut self, ids: &[String], m: &Matrix) {
        for (i, id) in ids.iter().enumerate() {
            self.str(id);
            for v in m.row(i) {
                self.0.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn str(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    fn rows(&mut self, n: usize, dim: usize) -> Result<(Vec<String>, Matrix)> {
        let mut ids = Vec::with_capacity(n);
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            ids.push(self.str()?);
            let raw = self.take(4 * dim)?;
            let row: Vec<f64> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Checkpoint(format!("non-finite vector for `{}`", ids.last().unwrap())));
            }
            rows.push(row);
        }
        Ok((ids, Matrix::from_rows(&rows, dim)))
    }
}

/// Writes the binary checkpoint to `path` and its manifest next to it.
pub fn write_checkpoint(store: &EmbeddingStore, path: &Path, cfg: &TrainConfig) -> Result<()> {
    let d = store.dim();
    let enc = store.encoder();
    let labels: Vec<String> = store.ids(crate::graph::NodeKind::Label);
    let communities: Vec<String> = store.ids(crate::graph::NodeKind::Community);
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION as usize);
    w.u32(d);
    w.u32(enc.sentence_cap);
    let counts = [
        ("articles", store.ids.articles.len()),
        ("users", store.users.rows()),
        ("subframes", store.subframes.rows()),
        ("influencers", store.influencers.rows()),
        ("communities", store.communities.rows()),
        ("words", enc.words().len()),
    ];
    for (_, c) in counts {
        w.u32(c);
    }
    for id in &store.ids.articles {
        w.str(id);
    }
    w.rows(&store.ids.users, &store.users);
    w.rows(&store.ids.subframes, &store.subframes);
    w.rows(&store.ids.influencers, &store.influencers);
    w.rows(&labels, &store.labels);
    w.rows(&communities, &store.communities);
    w.rows(enc.words(), &enc.table);
    fs::write(path, &w.0).map_err(|e| Error::io(path, e))?;

    let manifest = StoreManifest {
        format_version: VERSION,
        dim: d,
        counts: counts.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        config: cfg.clone(),
    };
    let mpath = manifest_path(path);
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(&mpath, json).map_err(|e| Error::io(&mpath, e))
}

/// Reads a checkpoint and re-encodes articles from `corpus`, whose document
/// ids must match the stored ones.
pub fn read_checkpoint(path: &Path, corpus: &Corpus) -> Result<EmbeddingStore> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader { buf: &buf, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint(format!("{}: not a store checkpoint", path.display())));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let dim = r.u32()?;
    let cap = r.u32()?;
    if dim == 0 || cap == 0 {
        return Err(Error::Checkpoint("zero dimension or sentence cap".into()));
    }
    let mut counts = [0usize; 6];
    for c in counts.iter_mut() {
        *c = r.u32()?;
    }
    let [n_art, n_user, n_sf, n_inf, n_comm, n_words] = counts;
    let articles: Vec<String> = (0..n_art).map(|_| r.str()).collect::<Result<_>>()?;
    let stored_match =
        articles.len() == corpus.len() && articles.iter().zip(corpus.documents()).all(|(a, d)| *a == d.id);
    if !stored_match {
        return Err(Error::Checkpoint("article ids do not match the corpus".into()));
    }
    let (users_ids, users) = r.rows(n_user, dim)?;
    let (sf_ids, subframes) = r.rows(n_sf, dim)?;
    let (inf_ids, influencers) = r.rows(n_inf, dim)?;
    let (_, labels) = r.rows(2, dim)?;
    let (_, communities) = r.rows(n_comm, dim)?;
    let (words, table) = r.rows(n_words, dim)?;
    if r.pos != buf.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    Ok(EmbeddingStore::from_parts(
        dim,
        users,
        subframes,
        influencers,
        labels,
        if n_comm == 0 { Matrix::zeros(0, dim) } else { communities },
        MeanPoolEncoder::with_table(corpus, words, table, cap),
        NodeIds {
            articles,
            users: users_ids,
            subframes: sf_ids,
            influencers: inf_ids,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Bias, Document, SocialEdges};
    use crate::graph::{build_graph, NodeKind, NodeRef};
    use crate::lexicon::parse_subframe_map;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (Corpus, EmbeddingStore) {
        let docs = ["the border wall", "tax cuts now. more text"]
            .iter()
            .enumerate()
            .map(|(i, b)| Document {
                id: format!("d{i}"),
                topic: None,
                bias: None,
                title: String::new(),
                body: b.to_string(),
                source: String::new(),
                date: None,
                frame: None,
            })
            .collect();
        let corpus = Corpus::from_documents(docs).unwrap();
        let mut edges = SocialEdges::default();
        edges.shares.insert(("u".into(), "d0".into()));
        edges.affiliations.insert("p".into(), Bias::Right);
        let map = parse_subframe_map(r#"{"W": {"frame": "Economic", "seeds": ["border wall"]}}"#, None).unwrap();
        let g = build_graph(&corpus, &edges, &map).unwrap();
        let mut store = EmbeddingStore::new(&g, &corpus, 5, 20, &mut ChaCha8Rng::seed_from_u64(3));
        store.set_communities(&[vec![0.5; 5], vec![-0.25; 5]]);
        (corpus, store)
    }

    #[test]
    fn round_trip_at_f32_precision() {
        let (corpus, store) = setup();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.bin");
        write_checkpoint(&store, &path, &TrainConfig::default()).unwrap();
        let back = read_checkpoint(&path, &corpus).unwrap();
        assert_eq!(back.dim(), 5);
        for kind in [NodeKind::Article, NodeKind::User, NodeKind::Subframe, NodeKind::Influencer, NodeKind::Label, NodeKind::Community] {
            assert_eq!(back.count(kind), store.count(kind));
            assert_eq!(back.ids(kind), store.ids(kind));
            for i in 0..store.count(kind) {
                let (a, b) = (store.vector(NodeRef::new(kind, i)), back.vector(NodeRef::new(kind, i)));
                for (x, y) in a.iter().zip(&b) {
                    assert!((x - y).abs() < 1e-7);
                }
            }
        }
        // A second write of the reloaded store is byte-identical.
        let again = dir.path().join("again.bin");
        write_checkpoint(&back, &again, &TrainConfig::default()).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
        let manifest: StoreManifest =
            serde_json::from_str(&fs::read_to_string(manifest_path(&path)).unwrap()).unwrap();
        assert_eq!(manifest.counts["words"], store.encoder().words().len());
    }

    #[test]
    fn corrupt_input_rejected() {
        let (corpus, store) = setup();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        write_checkpoint(&store, &path, &TrainConfig::default()).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_checkpoint(&path, &corpus), Err(Error::Checkpoint(_))));
        fs::write(&path, b"nonsense").unwrap();
        assert!(matches!(read_checkpoint(&path, &corpus), Err(Error::Checkpoint(_))));
        let other = Corpus::from_documents(vec![corpus.document(0).clone()]).unwrap();
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_checkpoint(&path, &other), Err(Error::Checkpoint(_))));
    }
}
