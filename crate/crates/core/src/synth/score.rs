use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::community::{Assignments, EmOutcome, Prediction};
use crate::corpus::Bias;
use crate::error::{Error, Result};
use crate::graph::InfoGraph;
use crate::metrics::purity;

use super::GroundTruth;

/// Pipeline results keyed by external id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PipelineOutputs {
    pub article_labels: BTreeMap<String, Bias>,
    pub user_labels: BTreeMap<String, Bias>,
    /// Detected community members; empty when no communities were fit.
    pub community_users: Vec<Vec<String>>,
    /// Articles shared by each detected community's members.
    pub community_articles: Vec<Vec<String>>,
    pub k: Option<usize>,
}

impl PipelineOutputs {
    pub fn from_outcome(outcome: &EmOutcome, graph: &InfoGraph) -> Self {
        Self::from_predictions(graph, &outcome.articles, &outcome.users, outcome.assignments.as_ref())
    }

    /// Predictions in graph order; communities come from `assignments`.
    pub fn from_predictions(graph: &InfoGraph, articles: &[Prediction], users: &[Prediction], assignments: Option<&Assignments>) -> Self {
        let article_labels = graph.articles.iter().cloned().zip(articles.iter().map(|p| p.label)).collect();
        let user_labels = graph.users.iter().cloned().zip(users.iter().map(|p| p.label)).collect();
        let mut out = PipelineOutputs {
            article_labels,
            user_labels,
            k: assignments.map(|a| a.k),
            ..PipelineOutputs::default()
        };
        if let Some(asg) = assignments {
            let sharers = graph.sharers();
            for c in 0..asg.k {
                let members = asg.community(c);
                let member_set: BTreeSet<u32> = members.iter().map(|&u| u as u32).collect();
                out.community_users.push(members.iter().map(|&u| graph.users[u].clone()).collect());
                out.community_articles.push(
                    (0..graph.articles.len())
                        .filter(|&a| sharers[a].iter().any(|u| member_set.contains(u)))
                        .map(|a| graph.articles[a].clone())
                        .collect(),
                );
            }
        }
        out
    }
}

/// Agreement of pipeline outputs with the planted truth.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruthScore {
    pub shared_accuracy: Option<f64>,
    pub unshared_accuracy: Option<f64>,
    pub user_accuracy: Option<f64>,
    /// Purity of detected communities against planted community indices.
    pub community_purity: Option<f64>,
    /// Purity of detected communities' users against planted user biases.
    pub user_bias_purity: Option<f64>,
    /// Purity of each community's shared articles against planted biases.
    pub share_purity: Option<f64>,
    pub k_error: Option<usize>,
}

fn accuracy<'a>(predicted: &BTreeMap<String, Bias>, truth: impl Iterator<Item = (&'a String, &'a Bias)>) -> Result<Option<f64>> {
    let (mut hit, mut total) = (0usize, 0usize);
    for (id, want) in truth {
        let got = predicted
            .get(id)
            .ok_or_else(|| Error::Invalid(format!("no predicted label for `{id}`")))?;
        hit += usize::from(got == want);
        total += 1;
    }
    Ok((total > 0).then(|| hit as f64 / total as f64))
}

fn labelled<L: Ord + Copy>(groups: &[Vec<String>], label: &BTreeMap<String, L>) -> Result<Option<f64>> {
    let rows: Vec<Vec<L>> = groups
        .iter()
        .map(|g| {
            g.iter()
                .map(|id| label.get(id).copied().ok_or_else(|| Error::Invalid(format!("`{id}` has no planted label"))))
                .collect()
        })
        .collect::<Result<_>>()?;
    if rows.iter().all(Vec::is_empty) {
        return Ok(None);
    }
    purity(&rows).map(Some)
}

/// Scores labels and communities against the planted truth.
///
/// Every planted article and user must have a prediction.
pub fn score_against_truth(outputs: &PipelineOutputs, truth: &GroundTruth) -> Result<TruthScore> {
    let shared = truth.article_bias.iter().filter(|(id, _)| truth.shared_articles.contains(*id));
    let unshared = truth.article_bias.iter().filter(|(id, _)| !truth.shared_articles.contains(*id));
    Ok(TruthScore {
        shared_accuracy: accuracy(&outputs.article_labels, shared)?,
        unshared_accuracy: accuracy(&outputs.article_labels, unshared)?,
        user_accuracy: accuracy(&outputs.user_labels, truth.user_bias.iter())?,
        community_purity: labelled(&outputs.community_users, &truth.user_community)?,
        user_bias_purity: labelled(&outputs.community_users, &truth.user_bias)?,
        share_purity: labelled(&outputs.community_articles, &truth.article_bias)?,
        k_error: outputs.k.map(|k| k.abs_diff(truth.k_true)),
    })
}

#[cfg(test)]
mod tests {
    use super::super::{generate, WorldSpec};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn perfect(truth: &GroundTruth) -> PipelineOutputs {
        let mut users = vec![Vec::new(); truth.k_true];
        for (u, &c) in &truth.user_community {
            users[c].push(u.clone());
        }
        let mut articles = vec![Vec::new(); truth.k_true];
        for (a, &c) in &truth.article_community {
            if truth.shared_articles.contains(a) {
                articles[c].push(a.clone());
            }
        }
        PipelineOutputs {
            article_labels: truth.article_bias.clone(),
            user_labels: truth.user_bias.clone(),
            community_users: users,
            community_articles: articles,
            k: Some(truth.k_true),
        }
    }

    #[test]
    fn perfect_recovery() {
        let w = generate(&WorldSpec::default().noiseless()).unwrap();
        let s = score_against_truth(&perfect(&w.truth), &w.truth).unwrap();
        assert_eq!(s.shared_accuracy, Some(1.0));
        assert_eq!(s.unshared_accuracy, None);
        assert_eq!(s.user_accuracy, Some(1.0));
        assert_eq!(s.community_purity, Some(1.0));
        assert_eq!(s.share_purity, Some(1.0));
        assert_eq!(s.k_error, Some(0));
    }

    #[test]
    fn random_labels_near_chance() {
        let spec = WorldSpec {
            bias_mixture: vec![0.5; 3],
            articles_per_community: 2000,
            ..WorldSpec::default()
        };
        let w = generate(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut out = perfect(&w.truth);
        for b in out.article_labels.values_mut() {
            *b = if rng.gen_bool(0.5) { Bias::Left } else { Bias::Right };
        }
        let s = score_against_truth(&out, &w.truth).unwrap();
        for acc in [s.shared_accuracy.unwrap(), s.unshared_accuracy.unwrap()] {
            assert!((acc - 0.5).abs() < 0.03, "{acc}");
        }
    }

    #[test]
    fn missing_prediction_errors() {
        let w = generate(&WorldSpec::default()).unwrap();
        let mut out = perfect(&w.truth);
        out.article_labels.pop_first();
        assert!(score_against_truth(&out, &w.truth).is_err());
    }

    #[test]
    fn merged_communities_lose_purity() {
        let w = generate(&WorldSpec::default().noiseless()).unwrap();
        let mut out = perfect(&w.truth);
        let last = out.community_users.pop().unwrap();
        out.community_users[0].extend(last);
        out.k = Some(2);
        let s = score_against_truth(&out, &w.truth).unwrap();
        // 60 users, 20 of them outside the merged community's majority.
        assert!((s.community_purity.unwrap() - 40.0 / 60.0).abs() < 1e-12);
        assert_eq!(s.k_error, Some(1));
    }
}
