//! Walk entropy `H_P^n(x) = −Σ_w p(w) log(p(w)/a(w))` over length-`n` walks
//! from `x`, topological entropy, stationary measures of arbitrary kernels
//! and the one-step KL gap to the MERW.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Adjacency, WeightedGraph};
use crate::kernel::MarkovKernel;
use crate::spectral::MerwReport;
use crate::truncation::BallTruncation;
use crate::walkcounts::WalkCountSweep;

/// `−Σ_y p_xy log(p_xy/A_xy)` with `0 log 0 = 0`.
pub fn one_step_entropy(graph: &WeightedGraph, kernel: &MarkovKernel) -> Vec<f64> {
    (0..graph.vertex_count())
        .map(|x| {
            -kernel
                .row(x)
                .filter(|&(_, p)| p > 0.0)
                .map(|(y, p)| p * (p / graph.weight(x, y)).ln())
                .sum::<f64>()
        })
        .collect()
}

fn apply_kernel(kernel: &MarkovKernel, v: &[f64], out: &mut [f64]) {
    for (x, o) in out.iter_mut().enumerate() {
        *o = kernel.row(x).map(|(y, p)| p * v[y]).sum();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub n: usize,
    /// `H_P^n(x)`.
    pub per_vertex_entropy: Vec<f64>,
    /// `H_P^n(x)/n`.
    pub rate: Vec<f64>,
    /// `H_P^n(x) − H_P^{n−1}(x)`.
    pub increment: Vec<f64>,
    /// `log W_n(x)/n`.
    pub h_top: Vec<f64>,
    /// `min_{m ≤ n, x} (log W_m(x) − H_P^m(x))`; non-negative by Jensen.
    pub jensen_min_slack: f64,
    /// Relative disagreement between `H^n = H^1 + P H^{n−1}` and the
    /// independently accumulated `H^n = Σ_{k<n} P^k H^1`.
    pub recursion_residual: f64,
}

/// Walk entropies up to length `n_max` by the forward recursion.
pub fn walk_entropy(
    graph: &WeightedGraph,
    kernel: &MarkovKernel,
    n_max: usize,
) -> Result<EntropyReport> {
    if n_max == 0 {
        return Err(Error::InvalidParameter("entropy needs n >= 1".into()));
    }
    kernel.check_support(graph, false)?;
    let n = graph.vertex_count();
    let h1 = one_step_entropy(graph, kernel);
    let mut h = h1.clone();
    let mut prev = vec![0.0; n];
    // Σ_{k<m} P^k H^1, built from powers of P applied to H^1.
    let mut acc = h1.clone();
    let mut power = h1.clone();
    let mut scratch = vec![0.0; n];
    let mut sweep = WalkCountSweep::new(graph);
    let mut slack = f64::INFINITY;
    let mut residual = 0.0f64;
    for m in 1..=n_max {
        if m > 1 {
            prev.copy_from_slice(&h);
            apply_kernel(kernel, &prev, &mut scratch);
            for x in 0..n {
                h[x] = h1[x] + scratch[x];
            }
            apply_kernel(kernel, &power, &mut scratch);
            std::mem::swap(&mut power, &mut scratch);
            for x in 0..n {
                acc[x] += power[x];
            }
        }
        let w = sweep.advance();
        for x in 0..n {
            slack = slack.min(w.ln(x) - h[x]);
            let scale = h[x].abs().max(1.0);
            residual = residual.max((h[x] - acc[x]).abs() / scale);
        }
    }
    let w = sweep.current();
    let nf = n_max as f64;
    Ok(EntropyReport {
        n: n_max,
        rate: h.iter().map(|v| v / nf).collect(),
        increment: h.iter().zip(&prev).map(|(a, b)| a - b).collect(),
        h_top: (0..n).map(|x| w.ln(x) / nf).collect(),
        per_vertex_entropy: h,
        jensen_min_slack: slack,
        recursion_residual: residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopologicalEntropy {
    pub n: usize,
    /// `log W_n(x)/n`.
    pub rate: f64,
    /// `log(W_n(x)/W_{n−1}(x))`.
    pub increment: f64,
}

/// `log W_n(x)/n` on any walk-count operator.
pub fn topological_entropy<A: Adjacency>(
    adj: &A,
    x: usize,
    n: usize,
) -> Result<TopologicalEntropy> {
    if x >= adj.vertex_count() {
        return Err(Error::VertexOutOfRange {
            vertex: x,
            count: adj.vertex_count(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidParameter(
            "topological entropy needs n >= 1".into(),
        ));
    }
    let mut sweep = WalkCountSweep::new(adj);
    for _ in 1..n {
        sweep.advance();
    }
    let prev = sweep.current().ln(x);
    let cur = sweep.advance().ln(x);
    Ok(TopologicalEntropy {
        n,
        rate: cur / n as f64,
        increment: cur - prev,
    })
}

/// As [`topological_entropy`], enforcing the exactness window of the truncation.
pub fn topological_entropy_truncated(
    ball: &BallTruncation,
    x: usize,
    n: usize,
) -> Result<TopologicalEntropy> {
    ball.check_window(x, n)?;
    topological_entropy(ball, x, n)
}

pub const STATIONARY_TOL: f64 = 1e-12;
const STATIONARY_MAX_ITER: usize = 10_000_000;

/// Stationary probability `ν = νP` by power iteration on the ½-lazy chain.
pub fn stationary_measure(kernel: &MarkovKernel) -> Result<Vec<f64>> {
    if !kernel.is_irreducible() {
        return Err(Error::NotIrreducible);
    }
    let n = kernel.vertex_count();
    let mut nu = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut change = f64::INFINITY;
    for _ in 0..STATIONARY_MAX_ITER {
        kernel.push_forward(&nu, &mut next);
        change = nu.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        if change <= STATIONARY_TOL {
            let total: f64 = next.iter().sum();
            next.iter_mut().for_each(|v| *v /= total);
            return Ok(next);
        }
        for (a, b) in nu.iter_mut().zip(&next) {
            *a = 0.5 * (*a + b);
        }
    }
    Err(Error::NoConvergence {
        what: "stationary measure",
        iterations: STATIONARY_MAX_ITER,
        residual: change,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlGap {
    /// `Σ_x ν_x g(x)`.
    pub value: f64,
    /// `g(x) = Σ_y p_xy log(p_xy/u_xy)`.
    pub per_vertex: Vec<f64>,
    pub nu: Vec<f64>,
}

/// Stationary-averaged one-step KL divergence of `kernel` from the MERW.
pub fn kl_gap(
    graph: &WeightedGraph,
    kernel: &MarkovKernel,
    reference: &MerwReport,
) -> Result<KlGap> {
    kernel.check_support(graph, false)?;
    let nu = stationary_measure(kernel)?;
    let per_vertex = (0..graph.vertex_count())
        .map(|x| {
            kernel
                .row(x)
                .filter(|&(_, p)| p > 0.0)
                .map(|(y, p)| {
                    let u = reference.kernel.prob(x, y);
                    if u > 0.0 {
                        Ok(p * (p / u).ln())
                    } else {
                        Err(Error::KernelSupportMismatch { vertex: x })
                    }
                })
                .sum::<Result<f64>>()
        })
        .collect::<Result<Vec<f64>>>()?;
    let value = nu.iter().zip(&per_vertex).map(|(a, b)| a * b).sum();
    Ok(KlGap {
        value,
        per_vertex,
        nu,
    })
}

/// JSON form of an entropy computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropySummary {
    pub n: usize,
    pub per_vertex_entropy: Vec<f64>,
    pub rate: Vec<f64>,
    pub h_top: Vec<f64>,
    pub kl_gap: f64,
}

impl EntropySummary {
    pub fn new(report: &EntropyReport, gap: &KlGap) -> Self {
        Self {
            n: report.n,
            per_vertex_entropy: report.per_vertex_entropy.clone(),
            rate: report.rate.clone(),
            h_top: report.h_top.clone(),
            kl_gap: gap.value,
        }
    }
}
