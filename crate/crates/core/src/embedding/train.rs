use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{sample_pairs, InfoGraph, NodeKind, RelationKind, TrainingPair};

use super::loss::{pair_objective, NodeGrads};
use super::store::EmbeddingStore;
use super::TrainConfig;

pub type PairSets = BTreeMap<RelationKind, Vec<TrainingPair>>;

/// Mean unweighted loss per relation over one epoch, measured before each
/// pair's update.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub pairs: usize,
    pub losses: BTreeMap<RelationKind, f64>,
}

pub fn sample_base_pairs<R: Rng + ?Sized>(
    graph: &InfoGraph,
    relations: &[RelationKind],
    k_neg: usize,
    rng: &mut R,
) -> PairSets {
    relations
        .iter()
        .map(|&r| (r, sample_pairs(graph, r, k_neg, rng)))
        .collect()
}

fn describe(store: &EmbeddingStore, pair: &TrainingPair) -> String {
    let id = |n: crate::graph::NodeRef| {
        store
            .ids(n.kind)
            .get(n.idx())
            .cloned()
            .unwrap_or_else(|| format!("{:?}#{}", n.kind, n.index))
    };
    format!("{} pair ({} -> {})", pair.relation, id(pair.anchor), id(pair.positive))
}

fn apply(store: &mut EmbeddingStore, grads: &NodeGrads, lr: f64) {
    for (node, g) in &grads.entries {
        match node.kind {
            NodeKind::Community => {}
            NodeKind::Article => {
                let enc = &mut store.encoder;
                for i in 0..enc.bag(node.idx()).len() {
                    let (w, c) = enc.bag(node.idx())[i];
                    for (x, v) in enc.table.row_mut(w as usize).iter_mut().zip(g) {
                        *x -= lr * c * v;
                    }
                }
            }
            kind => {
                let m = store.direct_mut(kind).expect("direct node kind");
                for (x, v) in m.row_mut(node.idx()).iter_mut().zip(g) {
                    *x -= lr * v;
                }
            }
        }
    }
}

/// One SGD pass over every pair in shuffled order.
///
/// Each pair's gradient is computed in full before it is applied. The rate
/// decays linearly over `cfg.epochs` epochs, `epoch` being zero-based.
pub fn train_epoch<R: Rng + ?Sized>(
    store: &mut EmbeddingStore,
    pairs: &PairSets,
    cfg: &TrainConfig,
    epoch: usize,
    rng: &mut R,
) -> Result<EpochReport> {
    let mut order: Vec<&TrainingPair> = pairs.values().flatten().collect();
    order.shuffle(rng);
    let total = order.len().max(1) as f64;
    let epochs = cfg.epochs.max(1) as f64;

    let mut sums: BTreeMap<RelationKind, (f64, usize)> = BTreeMap::new();
    for (i, pair) in order.iter().enumerate() {
        let weight = cfg.weight(pair.relation);
        let mut grads = NodeGrads::default();
        let loss = pair_objective(store, pair, cfg.similarity, weight, Some(&mut grads));
        if !loss.is_finite() || grads.entries.iter().any(|(_, g)| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite(format!(
                "epoch {epoch}: loss {loss} on {}",
                describe(store, pair)
            )));
        }
        let progress = ((epoch as f64 + i as f64 / total) / epochs).min(1.0);
        apply(store, &grads, cfg.rate_at(progress));
        let e = sums.entry(pair.relation).or_insert((0.0, 0));
        e.0 += loss / weight;
        e.1 += 1;
    }
    Ok(EpochReport {
        epoch,
        pairs: order.len(),
        losses: sums.into_iter().map(|(r, (s, n))| (r, s / n as f64)).collect(),
    })
}

/// `cfg.epochs` passes over freshly sampled base-relation pairs plus the
/// fixed `extra` pairs.
pub fn train<R: Rng + ?Sized>(
    store: &mut EmbeddingStore,
    graph: &InfoGraph,
    relations: &[RelationKind],
    extra: &PairSets,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<Vec<EpochReport>> {
    let mut reports = Vec::with_capacity(cfg.epochs);
    let mut base = PairSets::new();
    for epoch in 0..cfg.epochs {
        if epoch == 0 || cfg.resample_negatives {
            base = sample_base_pairs(graph, relations, cfg.k_neg, rng);
        }
        let mut all = base.clone();
        for (r, ps) in extra {
            all.entry(*r).or_default().extend(ps.iter().cloned());
        }
        reports.push(train_epoch(store, &all, cfg, epoch, rng)?);
    }
    Ok(reports)
}
