//! Gaussian-mixture community detection and the EM training loop.

mod checkpoint;
mod em;
mod gmm;
mod objectives;
mod select;

pub use checkpoint::{read_model, write_model};
pub use em::{
    em_loop, mixture_input, predict_articles, predict_users, ChangeScope, CommunityConfig, EmOutcome, IterationReport, Mode, Prediction,
    PredictionSource,
};
pub use gmm::{fit_gmm, CommunityModel, GmmConfig};
pub use objectives::{assign_users, build_cohesion_pairs, infer_labels, Assignments, LabelInference};
pub use select::{knee, restart_seed, select_k, BicPoint, Selection};
