//! Model-based clustering of frequency vectors: hard-assignment
//! (classification) EM over diagonal Gaussians, with BIC model selection.
//!
//! The two-step loop assigns each point to the component of maximal density,
//! then recomputes each component's mean and per-dimension variance from its
//! members. Empty components are dropped. Everything is deterministic for a
//! given seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ClusterAssignment;
use crate::error::{Error, Result};

/// Variances below this are clamped; keeps densities finite on constant
/// dimensions of count vectors.
const VARIANCE_FLOOR: f64 = 1e-6;
const MAX_ITERATIONS: usize = 100;

/// One diagonal Gaussian component with its hard-assigned members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianCluster {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// Empirical mixing weight (member share of the training set).
    pub weight: f64,
    /// Training-vector indices, not persisted with models.
    #[serde(skip)]
    pub members: Vec<usize>,
}

/// A converged model-based clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBasedClusters {
    pub clusters: Vec<GaussianCluster>,
    /// Mixture log-likelihood under the empirical weights.
    pub log_likelihood: f64,
    /// 2 ln L - p ln n with p = k*(2d) + (k-1) free parameters.
    pub bic: f64,
    /// Total within-cluster negative log-density after each iteration;
    /// non-increasing by construction and kept as a convergence monitor.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

impl ModelBasedClusters {
    pub fn k(&self) -> usize {
        self.clusters.len()
    }
}

fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn log_density(x: &[f64], mean: &[f64], variance: &[f64]) -> f64 {
    let mut acc = 0.0;
    for d in 0..x.len() {
        let diff = x[d] - mean[d];
        acc += (2.0 * std::f64::consts::PI * variance[d]).ln() + diff * diff / variance[d];
    }
    -0.5 * acc
}

/// Greedy farthest-point seeding: a random first center, then repeatedly the
/// point maximizing the minimum distance to the chosen ones.
fn seed_centers(vectors: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = vectors.len();
    let mut centers = vec![rng.gen_range(0..n)];
    let mut min_dist: Vec<f64> = vectors
        .iter()
        .map(|v| squared_euclidean(v, &vectors[centers[0]]))
        .collect();
    while centers.len() < k {
        let mut best = None;
        let mut best_dist = -1.0;
        for i in 0..n {
            if centers.contains(&i) {
                continue;
            }
            if min_dist[i] > best_dist {
                best_dist = min_dist[i];
                best = Some(i);
            }
        }
        let chosen = best.expect("k <= n leaves an unchosen point");
        centers.push(chosen);
        for i in 0..n {
            min_dist[i] = min_dist[i].min(squared_euclidean(&vectors[i], &vectors[chosen]));
        }
    }
    centers
}

fn mean_and_variance(vectors: &[Vec<f64>], members: &[usize], dims: usize) -> (Vec<f64>, Vec<f64>) {
    let count = members.len() as f64;
    let mut mean = vec![0.0; dims];
    for &i in members {
        for d in 0..dims {
            mean[d] += vectors[i][d];
        }
    }
    for m in &mut mean {
        *m /= count;
    }
    let mut variance = vec![0.0; dims];
    for &i in members {
        for d in 0..dims {
            let diff = vectors[i][d] - mean[d];
            variance[d] += diff * diff;
        }
    }
    for v in &mut variance {
        *v = (*v / count).max(VARIANCE_FLOOR);
    }
    (mean, variance)
}

/// Clusters `vectors` into (at most) `k` diagonal-Gaussian components.
///
/// Components losing all members are dropped, so the result may hold fewer
/// than `k` clusters (duplicated inputs, say).
pub fn cluster_model_based(vectors: &[Vec<f64>], k: usize, seed: u64) -> Result<ModelBasedClusters> {
    let n = vectors.len();
    if k == 0 {
        return Err(Error::Parameter("cluster count k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::Parameter(format!(
            "cluster count k={k} exceeds the {n} available vectors"
        )));
    }
    let dims = vectors[0].len();
    if vectors.iter().any(|v| v.len() != dims) {
        return Err(Error::Parameter("vectors must share one dimensionality".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = seed_centers(vectors, k, &mut rng);
    let (_, global_variance) = mean_and_variance(vectors, &(0..n).collect::<Vec<_>>(), dims);
    let mut means: Vec<Vec<f64>> = centers.iter().map(|&c| vectors[c].clone()).collect();
    let mut variances: Vec<Vec<f64>> = vec![global_variance; k];

    let mut assignment: Vec<usize> = vec![usize::MAX; n];
    let mut objective_trace = Vec::new();

    for _ in 0..MAX_ITERATIONS {
        // step 1: each point joins the component of maximal density
        // (ties keep the lowest component id)
        let new_assignment: Vec<usize> = vectors
            .iter()
            .map(|x| {
                let mut best = 0;
                let mut best_density = f64::NEG_INFINITY;
                for (j, (mean, variance)) in means.iter().zip(&variances).enumerate() {
                    let density = log_density(x, mean, variance);
                    if density > best_density {
                        best_density = density;
                        best = j;
                    }
                }
                best
            })
            .collect();

        // step 2: recompute parameters; empty components disappear
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); means.len()];
        for (i, &j) in new_assignment.iter().enumerate() {
            members[j].push(i);
        }
        let mut remap = vec![usize::MAX; means.len()];
        let mut kept = 0usize;
        for (j, m) in members.iter().enumerate() {
            if !m.is_empty() {
                remap[j] = kept;
                kept += 1;
            }
        }
        members.retain(|m| !m.is_empty());
        let (new_means, new_variances) = members
            .iter()
            .map(|m| mean_and_variance(vectors, m, dims))
            .unzip();
        means = new_means;
        variances = new_variances;
        let relabeled: Vec<usize> = new_assignment.iter().map(|&j| remap[j]).collect();

        let objective: f64 = relabeled
            .iter()
            .enumerate()
            .map(|(i, &j)| -log_density(&vectors[i], &means[j], &variances[j]))
            .sum();
        objective_trace.push(objective);

        let converged = relabeled == assignment;
        assignment = relabeled;
        if converged {
            break;
        }
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); means.len()];
    for (i, &j) in assignment.iter().enumerate() {
        members[j].push(i);
    }
    let clusters: Vec<GaussianCluster> = means
        .into_iter()
        .zip(variances)
        .zip(members)
        .map(|((mean, variance), members)| GaussianCluster {
            mean,
            variance,
            weight: members.len() as f64 / n as f64,
            members,
        })
        .collect();

    let log_likelihood = mixture_log_likelihood(vectors, &clusters);
    let bic = bic_score(log_likelihood, clusters.len(), dims, n);
    Ok(ModelBasedClusters {
        clusters,
        log_likelihood,
        bic,
        objective_trace,
    })
}

fn mixture_log_likelihood(vectors: &[Vec<f64>], clusters: &[GaussianCluster]) -> f64 {
    vectors
        .iter()
        .map(|x| {
            // log-sum-exp over components
            let terms: Vec<f64> = clusters
                .iter()
                .map(|c| c.weight.ln() + log_density(x, &c.mean, &c.variance))
                .collect();
            let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
        })
        .sum()
}

fn bic_score(log_likelihood: f64, k: usize, dims: usize, n: usize) -> f64 {
    let parameters = (k * 2 * dims + k.saturating_sub(1)) as f64;
    2.0 * log_likelihood - parameters * (n as f64).ln()
}

/// Fits every cluster count in `k_min..=k_max` (capped at the number of
/// vectors) and returns the fit with the highest BIC; ties keep the smaller
/// count.
pub fn select_k_by_bic(
    vectors: &[Vec<f64>],
    k_min: usize,
    k_max: usize,
    seed: u64,
) -> Result<ModelBasedClusters> {
    if vectors.is_empty() {
        return Err(Error::Parameter("cannot cluster an empty vector set".into()));
    }
    if k_min == 0 || k_min > k_max {
        return Err(Error::Parameter(format!(
            "invalid cluster range {k_min}..={k_max}"
        )));
    }
    let k_max = k_max.min(vectors.len());
    let k_min = k_min.min(k_max);
    let mut best: Option<ModelBasedClusters> = None;
    for k in k_min..=k_max {
        let fit = cluster_model_based(vectors, k, seed)?;
        if best.as_ref().map_or(true, |b| fit.bic > b.bic) {
            best = Some(fit);
        }
    }
    Ok(best.expect("non-empty range"))
}

/// Nearest cluster by Euclidean distance from the cluster means; ties keep
/// the lowest cluster id.
pub fn assign_model_based(clusters: &ModelBasedClusters, vector: &[f64]) -> ClusterAssignment {
    assign_nearest_mean(clusters.clusters.iter().map(|c| c.mean.as_slice()), vector)
}

pub(crate) fn assign_nearest_mean<'a>(
    means: impl Iterator<Item = &'a [f64]>,
    vector: &[f64],
) -> ClusterAssignment {
    let mut best = ClusterAssignment {
        cluster_id: 0,
        distance: f64::INFINITY,
    };
    for (j, mean) in means.enumerate() {
        let distance = squared_euclidean(mean, vector).sqrt();
        if distance < best.distance {
            best = ClusterAssignment {
                cluster_id: j,
                distance,
            };
        }
    }
    best
}
