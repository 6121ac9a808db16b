//! Node embeddings, the mean-pool document encoder, relation losses and the
//! SGD trainer.

mod checkpoint;
pub mod gradcheck;
mod loss;
mod store;
mod train;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Bias;
use crate::graph::RelationKind;

pub use checkpoint::{manifest_path, read_checkpoint, write_checkpoint, StoreManifest};
pub use loss::{cosine, objective_gradient, pair_loss, relation_loss, total_objective, Gradient};
pub use store::{EmbeddingStore, Matrix, MeanPoolEncoder};
pub use train::{sample_base_pairs, train, train_epoch, EpochReport, PairSets};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    #[default]
    Cosine,
    Dot,
}

impl std::str::FromStr for Similarity {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "cosine" => Ok(Similarity::Cosine),
            "dot" => Ok(Similarity::Dot),
            _ => Err(crate::Error::Invalid(format!("unknown similarity `{s}`"))),
        }
    }
}

/// Embedding hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub dim: usize,
    pub epochs: usize,
    pub k_neg: usize,
    /// Initial rate; decays linearly to `min_lr_fraction` of it by the last pair.
    pub learning_rate: f64,
    pub min_lr_fraction: f64,
    /// Per-relation weights; relations not listed weigh 1.
    pub lambda: BTreeMap<RelationKind, f64>,
    pub similarity: Similarity,
    pub sentence_cap: usize,
    /// Redraw base-relation negatives every epoch instead of once.
    pub resample_negatives: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 300,
            epochs: 30,
            k_neg: 5,
            learning_rate: 0.025,
            min_lr_fraction: 0.1,
            lambda: BTreeMap::from([(RelationKind::Contains, 2.0)]),
            similarity: Similarity::Cosine,
            sentence_cap: 20,
            resample_negatives: true,
            seed: 7,
        }
    }
}

impl TrainConfig {
    pub fn weight(&self, rel: RelationKind) -> f64 {
        self.lambda.get(&rel).copied().unwrap_or(1.0)
    }

    pub fn validate(&self) -> crate::Result<()> {
        let bad = |m: String| Err(crate::Error::Invalid(m));
        if self.dim == 0 {
            return bad("dim must be positive".into());
        }
        if self.k_neg == 0 {
            return bad("k_neg must be positive".into());
        }
        if self.sentence_cap == 0 {
            return bad("sentence_cap must be positive".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad(format!("learning_rate {} must be finite and non-negative", self.learning_rate));
        }
        if !(0.0..=1.0).contains(&self.min_lr_fraction) {
            return bad(format!("min_lr_fraction {} outside [0, 1]", self.min_lr_fraction));
        }
        if let Some((r, w)) = self.lambda.iter().find(|(_, w)| !(w.is_finite() && **w > 0.0)) {
            return bad(format!("lambda for {r} must be positive, got {w}"));
        }
        Ok(())
    }

    /// Learning rate after `progress` ∈ [0, 1] of the run.
    pub fn rate_at(&self, progress: f64) -> f64 {
        self.learning_rate * (1.0 - (1.0 - self.min_lr_fraction) * progress).max(self.min_lr_fraction)
    }
}

/// Outcome of comparing a vector with the two label vectors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BiasInference {
    pub label: Bias,
    /// `sim(best) - sim(other)`, never negative.
    pub margin: f64,
    /// Both similarities were exactly equal; `label` is then Left.
    pub tie: bool,
}

/// Label whose vector is most similar to `vector`.
pub fn infer_bias(vector: &[f64], store: &EmbeddingStore, sim: Similarity) -> BiasInference {
    let left = sim.eval(vector, store.label_vector(Bias::Left));
    let right = sim.eval(vector, store.label_vector(Bias::Right));
    if left == right {
        BiasInference {
            label: Bias::Left,
            margin: 0.0,
            tie: true,
        }
    } else if left > right {
        BiasInference {
            label: Bias::Left,
            margin: left - right,
            tie: false,
        }
    } else {
        BiasInference {
            label: Bias::Right,
            margin: right - left,
            tie: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, Document, SocialEdges};
    use crate::graph::build_graph;
    use crate::lexicon::SubframeMap;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_store() -> EmbeddingStore {
        let corpus = Corpus::from_documents(vec![Document {
            id: "d".into(),
            topic: None,
            bias: None,
            title: String::new(),
            body: "x".into(),
            source: String::new(),
            date: None,
            frame: None,
        }])
        .unwrap();
        let g = build_graph(&corpus, &SocialEdges::default(), &SubframeMap::default()).unwrap();
        EmbeddingStore::new(&g, &corpus, 3, 20, &mut ChaCha8Rng::seed_from_u64(0))
    }

    #[test]
    fn bias_of_label_vector() {
        let mut s = tiny_store();
        s.labels = Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.6, 0.8, 0.0]], 3);
        let r = infer_bias(&[2.0, 0.0, 0.0], &s, Similarity::Cosine);
        assert_eq!(r.label, Bias::Left);
        assert!((r.margin - 0.4).abs() < 1e-12);
        assert!(!r.tie);
        let t = infer_bias(&[0.0, 0.0, 1.0], &s, Similarity::Cosine);
        assert!(t.tie && t.label == Bias::Left && t.margin == 0.0);
        // Positive rescaling never changes the cosine decision.
        for c in [1e-3, 1.0, 1e3] {
            assert_eq!(infer_bias(&[0.1 * c, 0.9 * c, 0.0], &s, Similarity::Cosine).label, Bias::Right);
        }
    }

    #[test]
    fn schedule_and_defaults() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.weight(RelationKind::Contains), 2.0);
        assert_eq!(cfg.weight(RelationKind::Share), 1.0);
        assert_eq!(cfg.dim, 300);
        assert!((cfg.rate_at(0.0) - 0.025).abs() < 1e-15);
        assert!((cfg.rate_at(1.0) - 0.0025).abs() < 1e-15);
        assert!(cfg.validate().is_ok());
        let mut bad = cfg.clone();
        bad.lambda.insert(RelationKind::Share, 0.0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = TrainConfig::default();
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains(r#""lambda":{"contains":2.0}"#));
        assert_eq!(serde_json::from_str::<TrainConfig>(&json).unwrap(), cfg);
        let partial: TrainConfig = serde_json::from_str(r#"{"dim": 16, "similarity": "dot"}"#).unwrap();
        assert_eq!(partial.dim, 16);
        assert_eq!(partial.similarity, Similarity::Dot);
    }
}
