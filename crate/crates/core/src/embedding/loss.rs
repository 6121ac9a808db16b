use std::collections::BTreeMap;

use log::warn;

use crate::graph::{NodeKind, NodeRef, RelationKind, TrainingPair};

use super::store::{EmbeddingStore, Matrix};
use super::{Similarity, TrainConfig};

/// `-ln(e^pos / (e^pos + e^neg))`, i.e. `softplus(neg - pos)`.
pub fn pair_loss(sim_pos: f64, sim_neg: f64) -> f64 {
    softplus(sim_neg - sim_pos)
}

pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity; zero when either side is the zero vector.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

impl Similarity {
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Similarity::Cosine => cosine(a, b),
            Similarity::Dot => dot(a, b),
        }
    }

    /// Adds `scale * d sim(a, b) / d a` into `out`.
    fn grad_into(self, a: &[f64], b: &[f64], sim: f64, scale: f64, out: &mut [f64]) {
        match self {
            Similarity::Dot => {
                for (o, y) in out.iter_mut().zip(b) {
                    *o += scale * y;
                }
            }
            Similarity::Cosine => {
                let (na, nb) = (norm(a), norm(b));
                if na == 0.0 || nb == 0.0 {
                    return;
                }
                for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
                    *o += scale * (y / nb - sim * x / na) / na;
                }
            }
        }
    }
}

/// Gradient of a loss with respect to the node vectors it touched.
#[derive(Debug, Default)]
pub(crate) struct NodeGrads {
    pub entries: Vec<(NodeRef, Vec<f64>)>,
}

impl NodeGrads {
    fn slot(&mut self, node: NodeRef, dim: usize) -> &mut Vec<f64> {
        let pos = match self.entries.iter().position(|(n, _)| *n == node) {
            Some(p) => p,
            None => {
                self.entries.push((node, vec![0.0; dim]));
                self.entries.len() - 1
            }
        };
        &mut self.entries[pos].1
    }
}

/// Loss `λ · mean_n ℓ(sim(o, p), sim(o, n))` of one pair and, when `grads` is
/// given, its gradient with respect to every involved node vector.
pub(crate) fn pair_objective(
    store: &EmbeddingStore,
    pair: &TrainingPair,
    sim: Similarity,
    weight: f64,
    grads: Option<&mut NodeGrads>,
) -> f64 {
    let dim = store.dim();
    let anchor = store.vector(pair.anchor);
    let pos = store.vector(pair.positive);
    let negs: Vec<Vec<f64>> = pair.negatives.iter().map(|&n| store.vector(n)).collect();
    let k = negs.len() as f64;
    let s_pos = sim.eval(&anchor, &pos);
    let s_negs: Vec<f64> = negs.iter().map(|n| sim.eval(&anchor, n)).collect();
    let loss = weight * s_negs.iter().map(|&s| pair_loss(s_pos, s)).sum::<f64>() / k;

    if let Some(grads) = grads {
        // dℓ/d s_neg = σ(s_neg - s_pos) = -dℓ/d s_pos.
        let coef: Vec<f64> = s_negs.iter().map(|&s| weight * sigmoid(s - s_pos) / k).collect();
        let c_pos: f64 = -coef.iter().sum::<f64>();

        let mut g_anchor = vec![0.0; dim];
        sim.grad_into(&anchor, &pos, s_pos, c_pos, &mut g_anchor);
        for ((n, &s), &c) in negs.iter().zip(&s_negs).zip(&coef) {
            sim.grad_into(&anchor, n, s, c, &mut g_anchor);
        }
        add(grads.slot(pair.anchor, dim), &g_anchor);

        let mut g = vec![0.0; dim];
        sim.grad_into(&pos, &anchor, s_pos, c_pos, &mut g);
        add(grads.slot(pair.positive, dim), &g);
        for ((&node, n), (&s, &c)) in pair.negatives.iter().zip(&negs).zip(s_negs.iter().zip(&coef)) {
            g.iter_mut().for_each(|v| *v = 0.0);
            sim.grad_into(n, &anchor, s, c, &mut g);
            add(grads.slot(node, dim), &g);
        }
    }
    loss
}

fn add(acc: &mut [f64], g: &[f64]) {
    for (a, b) in acc.iter_mut().zip(g) {
        *a += b;
    }
}

/// Mean over pairs and negatives of the pair loss (unweighted). An empty set
/// scores zero.
pub fn relation_loss(pairs: &[TrainingPair], store: &EmbeddingStore, sim: Similarity) -> f64 {
    if pairs.is_empty() {
        warn!("relation loss over an empty pair set");
        return 0.0;
    }
    pairs.iter().map(|p| pair_objective(store, p, sim, 1.0, None)).sum::<f64>() / pairs.len() as f64
}

/// `Σ_r λ_r · relation_loss(r)`.
pub fn total_objective(pairs: &BTreeMap<RelationKind, Vec<TrainingPair>>, store: &EmbeddingStore, cfg: &TrainConfig) -> f64 {
    pairs
        .iter()
        .filter(|(_, ps)| !ps.is_empty())
        .map(|(&r, ps)| cfg.weight(r) * relation_loss(ps, store, cfg.similarity))
        .sum()
}

/// Dense gradient of a scalar objective over every trainable parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub users: Matrix,
    pub subframes: Matrix,
    pub influencers: Matrix,
    pub labels: Matrix,
    pub words: Matrix,
}

impl Gradient {
    pub(crate) fn zeros_like(store: &EmbeddingStore) -> Self {
        let d = store.dim();
        Gradient {
            users: Matrix::zeros(store.users.rows(), d),
            subframes: Matrix::zeros(store.subframes.rows(), d),
            influencers: Matrix::zeros(store.influencers.rows(), d),
            labels: Matrix::zeros(2, d),
            words: Matrix::zeros(store.encoder.table.rows(), d),
        }
    }

    /// Routes node gradients into parameters; article gradients flow to word
    /// vectors through the pooling weights, community gradients are dropped.
    pub(crate) fn accumulate(&mut self, store: &EmbeddingStore, grads: &NodeGrads, scale: f64) {
        for (node, g) in &grads.entries {
            let target = match node.kind {
                NodeKind::User => &mut self.users,
                NodeKind::Subframe => &mut self.subframes,
                NodeKind::Influencer => &mut self.influencers,
                NodeKind::Label => &mut self.labels,
                NodeKind::Community => continue,
                NodeKind::Article => {
                    for &(w, c) in store.encoder.bag(node.idx()) {
                        for (o, v) in self.words.row_mut(w as usize).iter_mut().zip(g) {
                            *o += scale * c * v;
                        }
                    }
                    continue;
                }
            };
            for (o, v) in target.row_mut(node.idx()).iter_mut().zip(g) {
                *o += scale * v;
            }
        }
    }
}

/// Total objective with its full analytic gradient.
pub fn objective_gradient(
    pairs: &BTreeMap<RelationKind, Vec<TrainingPair>>,
    store: &EmbeddingStore,
    cfg: &TrainConfig,
) -> (f64, Gradient) {
    let mut grad = Gradient::zeros_like(store);
    let mut total = 0.0;
    for (&r, ps) in pairs {
        if ps.is_empty() {
            continue;
        }
        let scale = 1.0 / ps.len() as f64;
        for p in ps {
            let mut g = NodeGrads::default();
            total += scale * pair_objective(store, p, cfg.similarity, cfg.weight(r), Some(&mut g));
            grad.accumulate(store, &g, scale);
        }
    }
    (total, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scalar_examples() {
        assert!((pair_loss(0.3, 0.3) - 2f64.ln()).abs() < 1e-15);
        assert!((pair_loss(1.0, -1.0) - (1.0 + (-2f64).exp()).ln()).abs() < 1e-15);
        assert!((pair_loss(1.0, -1.0) - 0.1269).abs() < 1e-4);
        assert!((pair_loss(1.0, 0.0) - 0.3133).abs() < 1e-4);
        assert!(pair_loss(800.0, -800.0) >= 0.0);
        assert!((pair_loss(-800.0, 800.0) - 1600.0).abs() < 1e-9);
    }

    #[test]
    fn cosine_of_zero_vector() {
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
        let mut out = [0.0; 2];
        Similarity::Cosine.grad_into(&[0.0, 0.0], &[1.0, 0.0], 0.0, 1.0, &mut out);
        assert_eq!(out, [0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn monotone_in_both_arguments(p in -5.0f64..5.0, n in -5.0f64..5.0, eps in 1e-3f64..1.0) {
            prop_assert!(pair_loss(p + eps, n) < pair_loss(p, n));
            prop_assert!(pair_loss(p, n + eps) > pair_loss(p, n));
        }

        #[test]
        fn cosine_scale_invariant(a in proptest::collection::vec(-3.0f64..3.0, 4), b in proptest::collection::vec(-3.0f64..3.0, 4), c in 0.01f64..100.0) {
            let scaled: Vec<f64> = a.iter().map(|x| x * c).collect();
            prop_assert!((cosine(&a, &b) - cosine(&scaled, &b)).abs() < 1e-12);
        }
    }
}
