use log::debug;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Execution;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// EM settings for one mixture fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmConfig {
    pub max_iters: usize,
    /// Stop once the log-likelihood gain per point drops below this.
    pub tol: f64,
    pub restarts: usize,
    pub variance_floor: f64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            max_iters: 200,
            tol: 1e-8,
            restarts: 3,
            variance_floor: 1e-6,
        }
    }
}

/// Diagonal Gaussian mixture with the memberships of the points it was fit on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommunityModel {
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// `memberships[i][k]`: posterior of component k for point i.
    pub memberships: Vec<Vec<f64>>,
    pub log_likelihood: f64,
    /// Log-likelihood before each M-step, then of the final parameters.
    pub trace: Vec<f64>,
}

impl CommunityModel {
    pub fn k(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// Free parameters: `K(2d + 1) - 1`.
    pub fn free_parameters(&self) -> usize {
        self.k() * (2 * self.dim() + 1) - 1
    }

    /// `p ln n - 2 ln L` over the `n` points the model was fit on.
    pub fn bic(&self) -> f64 {
        let n = self.memberships.len() as f64;
        self.free_parameters() as f64 * n.ln() - 2.0 * self.log_likelihood
    }

    /// Log density of `x` under component `k`, without the weight.
    pub fn component_log_density(&self, k: usize, x: &[f64]) -> f64 {
        log_density(&self.means[k], &self.variances[k], x)
    }

    /// Posterior memberships and log-likelihood of new data.
    pub fn score(&self, data: &[Vec<f64>], exec: Execution) -> (Vec<Vec<f64>>, f64) {
        e_step(data, &self.means, &self.variances, &self.weights, exec)
    }
}

fn log_density(mean: &[f64], var: &[f64], x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((m, v), xi) in mean.iter().zip(var).zip(x) {
        let d = xi - m;
        acc += LN_2PI + v.ln() + d * d / v;
    }
    -0.5 * acc
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Posterior rows and total log-likelihood.
fn e_step(
    data: &[Vec<f64>],
    means: &[Vec<f64>],
    vars: &[Vec<f64>],
    weights: &[f64],
    exec: Execution,
) -> (Vec<Vec<f64>>, f64) {
    let rows: Vec<(Vec<f64>, f64)> = exec.map_slice(data, |x| {
        let logs: Vec<f64> = (0..means.len())
            .map(|k| weights[k].ln() + log_density(&means[k], &vars[k], x))
            .collect();
        let lse = log_sum_exp(&logs);
        (logs.iter().map(|l| (l - lse).exp()).collect(), lse)
    });
    let ll = rows.iter().map(|(_, l)| l).sum();
    (rows.into_iter().map(|(r, _)| r).collect(), ll)
}

/// k-means++ seeding: first center uniform, then proportional to squared
/// distance to the nearest chosen center.
fn kmeans_pp<R: Rng + ?Sized>(data: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let dist2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let mut centers = vec![data[rng.gen_range(0..data.len())].clone()];
    let mut nearest: Vec<f64> = data.iter().map(|x| dist2(x, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut t = rng.gen_range(0.0..total);
            let mut chosen = data.len() - 1;
            for (i, d) in nearest.iter().enumerate() {
                if t < *d {
                    chosen = i;
                    break;
                }
                t -= d;
            }
            chosen
        } else {
            rng.gen_range(0..data.len())
        };
        let c = data[pick].clone();
        for (n, x) in nearest.iter_mut().zip(data) {
            *n = n.min(dist2(x, &c));
        }
        centers.push(c);
    }
    centers
}

/// One EM run from a k-means++ initialization.
///
/// Components whose total membership underflows to zero keep their previous
/// parameters with zero weight. Variances are floored at
/// `cfg.variance_floor`; a component floored in every dimension is reported.
pub fn fit_gmm<R: Rng + ?Sized>(
    data: &[Vec<f64>],
    k: usize,
    cfg: &GmmConfig,
    rng: &mut R,
    exec: Execution,
) -> Result<CommunityModel> {
    let n = data.len();
    if k == 0 || n < k {
        return Err(Error::Insufficient(format!("cannot fit {k} components to {n} points")));
    }
    let d = data[0].len();
    if data.iter().any(|x| x.len() != d || x.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("mixture input has ragged or non-finite rows".into()));
    }
    let floor = cfg.variance_floor;
    let mut means = kmeans_pp(data, k, rng);
    let global_mean: Vec<f64> = (0..d).map(|j| data.iter().map(|x| x[j]).sum::<f64>() / n as f64).collect();
    let global_var: Vec<f64> = (0..d)
        .map(|j| (data.iter().map(|x| (x[j] - global_mean[j]).powi(2)).sum::<f64>() / n as f64).max(floor))
        .collect();
    let mut vars = vec![global_var; k];
    let mut weights = vec![1.0 / k as f64; k];

    let mut trace = Vec::new();
    let (mut resp, mut ll) = e_step(data, &means, &vars, &weights, exec);
    let mut collapsed = false;
    for _ in 0..cfg.max_iters {
        trace.push(ll);
        for c in 0..k {
            let nk: f64 = resp.iter().map(|r| r[c]).sum();
            if nk <= 0.0 {
                weights[c] = 0.0;
                continue;
            }
            weights[c] = nk / n as f64;
            for j in 0..d {
                means[c][j] = resp.iter().zip(data).map(|(r, x)| r[c] * x[j]).sum::<f64>() / nk;
            }
            let mut all_floored = true;
            for j in 0..d {
                let v = resp
                    .iter()
                    .zip(data)
                    .map(|(r, x)| r[c] * (x[j] - means[c][j]).powi(2))
                    .sum::<f64>()
                    / nk;
                all_floored &= v < floor;
                vars[c][j] = v.max(floor);
            }
            collapsed |= all_floored;
        }
        let (r, next) = e_step(data, &means, &vars, &weights, exec);
        resp = r;
        let gain = next - ll;
        ll = next;
        if gain.abs() < cfg.tol * n as f64 {
            break;
        }
    }
    trace.push(ll);
    if collapsed {
        debug!("a mixture component collapsed onto a single point; its variance was floored at {floor}");
    }
    Ok(CommunityModel {
        means,
        variances: vars,
        weights,
        memberships: resp,
        log_likelihood: ll,
        trace,
    })
}
