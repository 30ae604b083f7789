//! Exact O(N²) t-SNE into two dimensions.
//!
//! High-dimensional affinities are Gaussian conditionals whose per-point
//! bandwidth is found by bisection on the precision until the conditional
//! distribution has the requested perplexity; they are then symmetrized,
//! `p_ij = (p_j|i + p_i|j) / 2N`. Low-dimensional affinities use a Student-t
//! kernel with one degree of freedom, and KL(P || Q) is minimized by
//! momentum gradient descent with early exaggeration of P.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Optimizer settings. The defaults are perplexity 30, 1000 iterations,
/// learning rate 100, momentum 0.5 then 0.8 from iteration 250, and 4x
/// exaggeration for the first 100 iterations from a N(0, 1e-4²) start.
#[derive(Debug, Clone, PartialEq)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch: usize,
    pub exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub init_std: f64,
    /// Record the (unexaggerated) KL divergence every this many iterations.
    pub kl_every: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 100.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            exaggeration: 4.0,
            exaggeration_iterations: 100,
            init_std: 1e-4,
            kl_every: 50,
            seed: 0,
        }
    }
}

/// Symmetric joint affinities over `n` points, row-major `n x n`.
#[derive(Debug, Clone)]
pub struct Affinities {
    pub n: usize,
    pub p: Vec<f64>,
    /// Perplexity each point's conditional distribution actually reached.
    pub achieved_perplexity: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TsneResult {
    pub embedding: Vec<[f64; 2]>,
    /// `(completed iterations, KL(P || Q))` checkpoints.
    pub kl_trace: Vec<(usize, f64)>,
}

/// Smallest point count for which `perplexity < (n - 1) / 3`.
pub fn min_points_for(perplexity: f64) -> usize {
    (3.0 * perplexity + 1.0).floor() as usize + 1
}

pub fn check_feasible(points: usize, perplexity: f64) -> Result<()> {
    if perplexity.is_nan() || perplexity <= 0.0 || !perplexity.is_finite() {
        return Err(Error::Precondition(format!("perplexity must be positive, got {}", perplexity)));
    }
    let required = min_points_for(perplexity).max(4);
    if points < required {
        return Err(Error::InfeasiblePerplexity {
            perplexity,
            points,
            required,
        });
    }
    Ok(())
}

pub fn squared_distances(vectors: &[Vec<f32>]) -> Vec<f64> {
    let n = vectors.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = vectors[i]
                .iter()
                .zip(&vectors[j])
                .map(|(&a, &b)| {
                    let diff = a as f64 - b as f64;
                    diff * diff
                })
                .sum();
            d[i * n + j] = s;
            d[j * n + i] = s;
        }
    }
    d
}

/// Conditional distribution of row `i` at precision `beta`, and its entropy
/// in bits. Distances are shifted by their minimum so the largest weight is
/// exactly 1 and nothing underflows to an all-zero row.
fn conditional_row(dist: &[f64], i: usize, beta: f64, out: &mut [f64]) -> f64 {
    let min = dist
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for (j, (o, &d)) in out.iter_mut().zip(dist).enumerate() {
        *o = if j == i { 0.0 } else { (-beta * (d - min)).exp() };
        sum += *o;
    }
    let mut entropy = 0.0;
    for o in out.iter_mut() {
        *o /= sum;
        if *o > 0.0 {
            entropy -= *o * o.log2();
        }
    }
    entropy
}

/// Per-point Gaussian conditionals `p_j|i` (row-major) matched to the target
/// perplexity, plus the perplexity each row reached.
pub fn conditional_affinities(dist: &[f64], n: usize, perplexity: f64) -> (Vec<f64>, Vec<f64>) {
    const TOLERANCE_BITS: f64 = 1e-6;
    const MAX_STEPS: usize = 256;
    let target = perplexity.log2();
    let mut p = vec![0.0; n * n];
    let mut achieved = vec![0.0; n];
    for i in 0..n {
        let row_dist = &dist[i * n..(i + 1) * n];
        let mean = row_dist.iter().sum::<f64>() / (n - 1) as f64;
        let mut beta = if mean > 0.0 { 1.0 / mean } else { 1.0 };
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        let row = &mut p[i * n..(i + 1) * n];
        let mut entropy = conditional_row(row_dist, i, beta, row);
        for _ in 0..MAX_STEPS {
            let diff = entropy - target;
            if diff.abs() < TOLERANCE_BITS {
                break;
            }
            if diff > 0.0 {
                // too flat: sharpen
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
            entropy = conditional_row(row_dist, i, beta, row);
        }
        achieved[i] = entropy.exp2();
    }
    (p, achieved)
}

/// Symmetrized joint affinities for a point set.
pub fn joint_affinities(vectors: &[Vec<f32>], perplexity: f64) -> Result<Affinities> {
    let n = vectors.len();
    check_feasible(n, perplexity)?;
    let dim = vectors[0].len();
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::Shape("t-SNE input vectors differ in length".into()));
    }
    if vectors.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("t-SNE input contains non-finite values".into()));
    }
    let dist = squared_distances(vectors);
    let (cond, achieved_perplexity) = conditional_affinities(&dist, n, perplexity);
    let mut p = vec![0.0; n * n];
    let scale = 1.0 / (2.0 * n as f64);
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) * scale;
        }
    }
    Ok(Affinities {
        n,
        p,
        achieved_perplexity,
    })
}

/// Student-t kernel values `(1 + |y_i - y_j|²)^-1` (zero diagonal) and their sum.
fn kernel(y: &[[f64; 2]]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut num = vec![0.0; n * n];
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = v;
            num[j * n + i] = v;
            sum += 2.0 * v;
        }
    }
    (num, sum)
}

/// Low-dimensional joint affinities Q.
pub fn student_t_affinities(y: &[[f64; 2]]) -> Vec<f64> {
    let (num, sum) = kernel(y);
    num.into_iter().map(|v| v / sum).collect()
}

/// KL(P || Q(Y)), summing only over `p_ij > 0`.
pub fn kl_divergence(p: &[f64], y: &[[f64; 2]]) -> f64 {
    let q = student_t_affinities(y);
    p.iter()
        .zip(&q)
        .filter(|(&pij, _)| pij > 0.0)
        .map(|(&pij, &qij)| pij * (pij / qij).ln())
        .sum()
}

/// `dC/dy_i = 4 Σ_j (α p_ij - q_ij)(y_i - y_j)(1 + |y_i - y_j|²)^-1`, with
/// `α` the exaggeration factor (1 gives the true KL gradient).
pub fn kl_gradient(p: &[f64], y: &[[f64; 2]], exaggeration: f64) -> Vec<[f64; 2]> {
    let n = y.len();
    let (num, sum) = kernel(y);
    let mut grad = vec![[0.0; 2]; n];
    for i in 0..n {
        let mut g = [0.0; 2];
        for j in 0..n {
            if i == j {
                continue;
            }
            let w = num[i * n + j];
            let coeff = (exaggeration * p[i * n + j] - w / sum) * w;
            g[0] += coeff * (y[i][0] - y[j][0]);
            g[1] += coeff * (y[i][1] - y[j][1]);
        }
        grad[i] = [4.0 * g[0], 4.0 * g[1]];
    }
    grad
}

/// Seeded N(0, std²) starting layout.
pub fn initial_layout(n: usize, std: f64, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Normal::new(0.0, std).expect("valid normal");
    (0..n).map(|_| [dist.sample(&mut rng), dist.sample(&mut rng)]).collect()
}

/// Runs the optimizer on precomputed affinities.
pub fn optimize(aff: &Affinities, config: &TsneConfig) -> TsneResult {
    let n = aff.n;
    let mut y = initial_layout(n, config.init_std, config.seed);
    let mut velocity = vec![[0.0; 2]; n];
    let mut kl_trace = Vec::new();
    for iter in 0..config.iterations {
        let exaggeration = if iter < config.exaggeration_iterations {
            config.exaggeration
        } else {
            1.0
        };
        let momentum = if iter < config.momentum_switch {
            config.initial_momentum
        } else {
            config.final_momentum
        };
        let grad = kl_gradient(&aff.p, &y, exaggeration);
        for ((yi, vi), gi) in y.iter_mut().zip(&mut velocity).zip(&grad) {
            for d in 0..2 {
                vi[d] = momentum * vi[d] - config.learning_rate * gi[d];
                yi[d] += vi[d];
            }
        }
        let mean = y
            .iter()
            .fold([0.0; 2], |acc, p| [acc[0] + p[0], acc[1] + p[1]]);
        for p in &mut y {
            p[0] -= mean[0] / n as f64;
            p[1] -= mean[1] / n as f64;
        }
        let done = iter + 1;
        if config.kl_every > 0 && (done % config.kl_every == 0 || done == config.iterations) {
            kl_trace.push((done, kl_divergence(&aff.p, &y)));
        }
    }
    TsneResult {
        embedding: y,
        kl_trace,
    }
}

/// Embeds `vectors` in the plane.
pub fn tsne(vectors: &[Vec<f32>], config: &TsneConfig) -> Result<TsneResult> {
    let aff = joint_affinities(vectors, config.perplexity)?;
    Ok(optimize(&aff, config))
}
