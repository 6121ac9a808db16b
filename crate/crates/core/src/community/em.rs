use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Bias, Corpus};
use crate::embedding::{infer_bias, train, EmbeddingStore, PairSets, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::{InfoGraph, NodeKind, NodeRef, RelationKind};
use crate::par::Execution;

use super::gmm::{CommunityModel, GmmConfig};
use super::objectives::{assign_users, build_cohesion_pairs, infer_labels, Assignments, LabelInference};
use super::select::{select_k, BicPoint, Selection};

/// Training regime.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// One embedding run over share, follow and affiliation edges.
    LabelPropagation,
    /// The community loop without the expression objective.
    Em,
    /// The community loop with article-expression edges.
    #[default]
    EmSf,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::LabelPropagation, Mode::Em, Mode::EmSf];

    pub fn name(self) -> &'static str {
        match self {
            Mode::LabelPropagation => "label_propagation",
            Mode::Em => "em",
            Mode::EmSf => "em_sf",
        }
    }

    /// Base relations trained in this mode.
    pub fn relations(self) -> Vec<RelationKind> {
        let mut rels = vec![RelationKind::Share, RelationKind::Follow, RelationKind::Affiliation];
        if self == Mode::EmSf {
            rels.push(RelationKind::Contains);
        }
        rels
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown mode `{s}` (label_propagation, em, em_sf)")))
    }
}

/// Which article predictions count towards the label-change fraction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeScope {
    #[default]
    All,
    Shared,
    Unshared,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommunityConfig {
    pub k_min: usize,
    pub k_max: usize,
    /// Minimum BIC curvature for a knee.
    pub t_n: f64,
    /// Label-change fraction below which an iteration counts as stable.
    pub t_p: f64,
    /// Membership probability needed to join a community.
    pub threshold: f64,
    pub max_iterations: usize,
    /// Fit the mixture on unit-length user vectors.
    pub normalize_users: bool,
    pub change_scope: ChangeScope,
    pub gmm: GmmConfig,
}

impl Default for CommunityConfig {
    fn default() -> Self {
        CommunityConfig {
            k_min: 1,
            k_max: 20,
            t_n: 1.0,
            t_p: 0.1,
            threshold: 0.5,
            max_iterations: 20,
            normalize_users: true,
            change_scope: ChangeScope::All,
            gmm: GmmConfig::default(),
        }
    }
}

impl CommunityConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        if self.k_min == 0 || self.k_min > self.k_max {
            return bad(format!("K range {}..={} is empty", self.k_min, self.k_max));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return bad(format!("threshold {} outside (0, 1]", self.threshold));
        }
        if !(0.0..=1.0).contains(&self.t_p) {
            return bad(format!("t_p {} outside [0, 1]", self.t_p));
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive".into());
        }
        if !(self.gmm.variance_floor > 0.0) {
            return bad("variance floor must be positive".into());
        }
        Ok(())
    }
}

/// Where an article's label came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionSource {
    /// Majority over the communities that shared it.
    Community,
    /// Nearest label vector.
    Embedding,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Prediction {
    pub label: Bias,
    pub source: PredictionSource,
    /// Label-similarity margin of the node's own vector.
    pub margin: f64,
    pub tie: bool,
}

/// One line of the iteration report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationReport {
    pub iter: usize,
    pub k: Option<usize>,
    pub bic_curve: Vec<BicPoint>,
    pub knee_fallback: bool,
    pub label_change: f64,
    /// Mean per-relation loss over the last epoch.
    pub losses: BTreeMap<RelationKind, f64>,
    /// Size of each derived objective built at the end of the iteration.
    pub derived_pairs: BTreeMap<RelationKind, usize>,
    pub unassigned_users: usize,
}

pub struct EmOutcome {
    pub store: EmbeddingStore,
    pub model: Option<CommunityModel>,
    pub selection: Option<Selection>,
    pub assignments: Option<Assignments>,
    pub labels: Option<LabelInference>,
    pub articles: Vec<Prediction>,
    pub users: Vec<Prediction>,
    pub report: Vec<IterationReport>,
}

fn embedding_prediction(store: &EmbeddingStore, node: NodeRef, cfg: &TrainConfig) -> Prediction {
    let b = infer_bias(&store.vector(node), store, cfg.similarity);
    Prediction {
        label: b.label,
        source: PredictionSource::Embedding,
        margin: b.margin,
        tie: b.tie,
    }
}

/// Article labels: the community majority where one exists, otherwise the
/// nearer label vector.
pub fn predict_articles(store: &EmbeddingStore, labels: Option<&LabelInference>, cfg: &TrainConfig) -> Vec<Prediction> {
    (0..store.count(NodeKind::Article))
        .map(|a| {
            let own = embedding_prediction(store, NodeRef::new(NodeKind::Article, a), cfg);
            match labels.and_then(|l| l.article_majority[a]) {
                Some(label) => Prediction {
                    label,
                    source: PredictionSource::Community,
                    ..own
                },
                None => own,
            }
        })
        .collect()
}

/// Assigned users take the label of their strongest community.
pub fn predict_users(
    store: &EmbeddingStore,
    community: Option<(&CommunityModel, &Assignments, &LabelInference)>,
    cfg: &TrainConfig,
) -> Vec<Prediction> {
    (0..store.count(NodeKind::User))
        .map(|u| {
            let own = embedding_prediction(store, NodeRef::new(NodeKind::User, u), cfg);
            let Some((model, asg, labels)) = community else { return own };
            let best = asg.members[u]
                .iter()
                .copied()
                .max_by(|&a, &b| model.memberships[u][a].total_cmp(&model.memberships[u][b]).then(b.cmp(&a)));
            match best {
                Some(c) => Prediction {
                    label: labels.community_labels[c],
                    source: PredictionSource::Community,
                    ..own
                },
                None => own,
            }
        })
        .collect()
}

fn change_fraction(prev: &[Prediction], next: &[Prediction], shared: &[bool], scope: ChangeScope) -> f64 {
    let counted: Vec<usize> = (0..next.len())
        .filter(|&a| match scope {
            ChangeScope::All => true,
            ChangeScope::Shared => shared[a],
            ChangeScope::Unshared => !shared[a],
        })
        .collect();
    if counted.is_empty() {
        return 0.0;
    }
    counted.iter().filter(|&&a| prev[a].label != next[a].label).count() as f64 / counted.len() as f64
}

/// User vectors as mixture input, optionally scaled to unit length.
pub fn mixture_input(store: &EmbeddingStore, normalize: bool) -> Vec<Vec<f64>> {
    let mut users = store.vectors(NodeKind::User);
    if normalize {
        for u in users.iter_mut() {
            let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 0.0 {
                u.iter_mut().for_each(|x| *x /= n);
            }
        }
    }
    users
}

/// Runs `mode` to completion.
///
/// The first iteration trains on the base graph only. Each iteration then
/// fits the mixture to user vectors, freezes its means as community nodes
/// and rebuilds `S_C` and `S_L` for the next one. The loop ends after two
/// consecutive iterations whose label-change fraction is below `t_p`, or at
/// `max_iterations`. The first change fraction is taken against the
/// predictions of the untrained store. `observe` sees each report line as
/// soon as it is complete.
pub fn em_loop(
    graph: &InfoGraph,
    corpus: &Corpus,
    mode: Mode,
    train_cfg: &TrainConfig,
    cfg: &CommunityConfig,
    exec: Execution,
    observe: &mut dyn FnMut(&IterationReport),
) -> Result<EmOutcome> {
    train_cfg.validate()?;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed);
    let mut store = EmbeddingStore::new(graph, corpus, train_cfg.dim, train_cfg.sentence_cap, &mut rng);
    let relations = mode.relations();
    let shared = graph.shared_articles();

    if mode == Mode::LabelPropagation {
        let before = predict_articles(&store, None, train_cfg);
        let epochs = train(&mut store, graph, &relations, &PairSets::new(), train_cfg, &mut rng)?;
        let articles = predict_articles(&store, None, train_cfg);
        let line = IterationReport {
            iter: 1,
            k: None,
            bic_curve: Vec::new(),
            knee_fallback: false,
            label_change: change_fraction(&before, &articles, &shared, cfg.change_scope),
            losses: epochs.last().map(|e| e.losses.clone()).unwrap_or_default(),
            derived_pairs: BTreeMap::new(),
            unassigned_users: 0,
        };
        observe(&line);
        let users = predict_users(&store, None, train_cfg);
        return Ok(EmOutcome {
            store,
            model: None,
            selection: None,
            assignments: None,
            labels: None,
            articles,
            users,
            report: vec![line],
        });
    }

    if graph.users.is_empty() {
        return Err(Error::Insufficient("community detection needs at least one user".into()));
    }
    let mut previous = predict_articles(&store, None, train_cfg);
    let mut extra = PairSets::new();
    let mut report = Vec::new();
    let mut stable_streak = 0;
    let mut last = None;
    for iter in 1..=cfg.max_iterations {
        let epochs = train(&mut store, graph, &relations, &extra, train_cfg, &mut rng)?;
        let data = mixture_input(&store, cfg.normalize_users);
        let gmm_seed = train_cfg.seed ^ (iter as u64).wrapping_mul(0xA24B_AED4_963E_E407);
        let (selection, model) = select_k(&data, cfg.k_min..=cfg.k_max, cfg.t_n, &cfg.gmm, gmm_seed, exec)?;
        store.set_communities(&model.means);
        let asg = assign_users(&model, cfg.threshold);
        let cohesion = build_cohesion_pairs(&asg, graph, train_cfg.k_neg, &mut rng);
        let (inferred, labels) = infer_labels(&store, &model, &asg, graph, train_cfg.similarity);
        let articles = predict_articles(&store, Some(&labels), train_cfg);
        let change = change_fraction(&previous, &articles, &shared, cfg.change_scope);

        let line = IterationReport {
            iter,
            k: Some(model.k()),
            bic_curve: selection.curve.clone(),
            knee_fallback: selection.fallback,
            label_change: change,
            losses: epochs.last().map(|e| e.losses.clone()).unwrap_or_default(),
            derived_pairs: BTreeMap::from([
                (RelationKind::Cohesion, cohesion.len()),
                (RelationKind::InferredLabel, inferred.len()),
            ]),
            unassigned_users: asg.unassigned.len(),
        };
        info!("{mode} iteration {iter}: K={} change={change:.4}", model.k());
        observe(&line);
        report.push(line);

        stable_streak = if change < cfg.t_p { stable_streak + 1 } else { 0 };
        extra = PairSets::from([(RelationKind::Cohesion, cohesion), (RelationKind::InferredLabel, inferred)]);
        previous = articles;
        last = Some((model, selection, asg, labels));
        if stable_streak >= 2 {
            break;
        }
    }
    let (model, selection, asg, labels) = last.expect("at least one iteration");
    let users = predict_users(&store, Some((&model, &asg, &labels)), train_cfg);
    Ok(EmOutcome {
        store,
        model: Some(model),
        selection: Some(selection),
        assignments: Some(asg),
        labels: Some(labels),
        articles: previous,
        users,
        report,
    })
}
