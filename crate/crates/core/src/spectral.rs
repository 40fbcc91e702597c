//! Principal eigenpair, second eigenvalue and the maximal entropy random walk
//! on finite graphs.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Adjacency, WeightedGraph};
use crate::kernel::{MarkovKernel, WalkKind};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrincipalPair {
    pub rho: f64,
    /// Unit-norm, strictly positive.
    pub f: Vec<f64>,
    pub iterations: usize,
    /// `‖AF − ρF‖₂`.
    pub residual: f64,
    /// `max_x (AF)_x/F_x − min_x (AF)_x/F_x`.
    pub ratio_spread: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub rho: f64,
    pub lambda2: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MerwReport {
    pub principal: PrincipalPair,
    pub kernel: MarkovKernel,
    pub pi: Vec<f64>,
    pub ks_entropy: f64,
}

impl MerwReport {
    pub fn rho(&self) -> f64 {
        self.principal.rho
    }
}

/// JSON form of a MERW computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MerwSummary {
    pub rho: f64,
    pub lambda2: f64,
    pub gap: f64,
    pub ks_entropy: f64,
    pub kernel: Vec<(usize, usize, f64)>,
    pub pi: Vec<f64>,
}

impl MerwSummary {
    pub fn new(report: &MerwReport, spectral: &SpectralReport) -> Self {
        Self {
            rho: report.rho(),
            lambda2: spectral.lambda2,
            gap: spectral.gap,
            ks_entropy: report.ks_entropy,
            kernel: report.kernel.triplets(),
            pi: report.pi.clone(),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_input(graph: &WeightedGraph, tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if graph.vertex_count() == 0 {
        return Err(Error::InvalidGraph("empty graph".into()));
    }
    if !graph.is_connected() {
        return Err(Error::Disconnected);
    }
    Ok(())
}

/// Principal pair by power iteration on `A + D` with `D` the maximal
/// weighted degree. Stops once the Collatz–Wielandt bounds
/// `min (AF)/F <= ρ <= max (AF)/F` are within `tol·ρ` of each other.
pub fn principal_pair(graph: &WeightedGraph, tol: f64) -> Result<PrincipalPair> {
    principal_pair_with(graph, tol, DEFAULT_MAX_ITER, None)
}

/// As [`principal_pair`] with an explicit iteration cap and optional warm start.
pub fn principal_pair_with(
    graph: &WeightedGraph,
    tol: f64,
    max_iter: usize,
    start: Option<&[f64]>,
) -> Result<PrincipalPair> {
    check_input(graph, tol)?;
    let n = graph.vertex_count();
    let shift = graph.max_weighted_degree();
    let mut f: Vec<f64> = match start {
        Some(s) if s.len() == n && s.iter().all(|&v| v > 0.0) => s.to_vec(),
        _ => vec![1.0; n],
    };
    let nf = norm(&f);
    f.iter_mut().for_each(|v| *v /= nf);
    let mut af = vec![0.0; n];
    let mut spread = f64::INFINITY;
    for it in 0..=max_iter {
        graph.apply(&f, &mut af);
        let (lo, hi) =
            f.iter()
                .zip(&af)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&x, &y)| {
                    let r = y / x;
                    (lo.min(r), hi.max(r))
                });
        spread = hi - lo;
        let rho = dot(&f, &af);
        if spread <= tol * rho.abs().max(f64::MIN_POSITIVE) {
            let residual = f
                .iter()
                .zip(&af)
                .map(|(&x, &y)| (y - rho * x).powi(2))
                .sum::<f64>()
                .sqrt();
            if f.iter().any(|&v| v.is_nan() || v <= 0.0) {
                return Err(Error::NoConvergence {
                    what: "principal eigenvector positivity",
                    iterations: it,
                    residual,
                });
            }
            return Ok(PrincipalPair {
                rho,
                f,
                iterations: it,
                residual,
                ratio_spread: spread,
            });
        }
        if it == max_iter {
            break;
        }
        for (x, y) in f.iter_mut().zip(&af) {
            *x = y + shift * *x;
        }
        let nf = norm(&f);
        f.iter_mut().for_each(|v| *v /= nf);
    }
    Err(Error::NoConvergence {
        what: "principal eigenpair",
        iterations: max_iter,
        residual: spread,
    })
}

/// Largest eigenvalue of `A` on the orthogonal complement of the principal
/// eigenvector, by Lanczos with full reorthogonalization.
pub fn second_eigenvalue(graph: &WeightedGraph, tol: f64) -> Result<SpectralReport> {
    let pair = principal_pair(graph, tol)?;
    second_eigenvalue_from(graph, &pair, tol)
}

const MAX_LANCZOS: usize = 1500;

pub fn second_eigenvalue_from(
    graph: &WeightedGraph,
    pair: &PrincipalPair,
    tol: f64,
) -> Result<SpectralReport> {
    let n = graph.vertex_count();
    let rho = pair.rho;
    if pair.residual > 1e-6 * rho.abs().max(1.0) {
        return Err(Error::DeflationResidual {
            residual: pair.residual,
        });
    }
    if n == 1 {
        return Err(Error::InvalidGraph(
            "second eigenvalue needs at least two vertices".into(),
        ));
    }
    let f = &pair.f;
    let project = |v: &mut [f64]| {
        let c = dot(v, f);
        v.iter_mut().zip(f).for_each(|(a, b)| *a -= c * b);
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1a2b);
    let mut q: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    project(&mut q);
    project(&mut q);
    let nq = norm(&q);
    q.iter_mut().for_each(|v| *v /= nq);

    let target = tol.max(1e-11) * rho.abs().max(1.0);
    let max_steps = (n - 1).min(MAX_LANCZOS);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut last_residual = f64::INFINITY;
    for k in 0..max_steps {
        graph.apply(&basis[k], &mut w);
        project(&mut w);
        let a = dot(&w, &basis[k]);
        alpha.push(a);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
            project(&mut w);
        }
        let b = norm(&w);
        let exhausted = b <= 1e-12 * rho.abs().max(1.0);
        let m = alpha.len();
        if exhausted || m.trailing_zeros() >= 3 || k + 1 == max_steps {
            let (theta, s_last) = top_ritz(&alpha, &beta);
            last_residual = b * s_last.abs();
            if exhausted || last_residual <= target || (k + 1 == max_steps && m == n - 1) {
                return Ok(SpectralReport {
                    rho,
                    lambda2: theta,
                    gap: rho - theta,
                });
            }
        }
        beta.push(b);
        basis.push(w.iter().map(|v| v / b).collect());
    }
    Err(Error::NoConvergence {
        what: "second eigenvalue",
        iterations: max_steps,
        residual: last_residual,
    })
}

/// Largest eigenvalue of the Lanczos tridiagonal matrix and the last
/// component of its eigenvector.
fn top_ritz(alpha: &[f64], beta: &[f64]) -> (f64, f64) {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let (idx, &theta) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty tridiagonal");
    (theta, eig.eigenvectors[(m - 1, idx)])
}

/// MERW with `p_xy = A_xy F(y) / (AF)(x)`; at convergence `(AF)(x) = ρF(x)`.
/// Normalizing by `(AF)(x)` makes rows sum to one and `π ∝ F·AF` exactly
/// reversible regardless of the residual.
pub fn merw(graph: &WeightedGraph, tol: f64) -> Result<MerwReport> {
    let pair = principal_pair(graph, tol)?;
    Ok(merw_from_pair(graph, pair))
}

pub fn merw_from_pair(graph: &WeightedGraph, pair: PrincipalPair) -> MerwReport {
    let n = graph.vertex_count();
    let f = &pair.f;
    let mut af = vec![0.0; n];
    graph.apply(f, &mut af);
    let kernel = MarkovKernel::from_graph_fn(graph, WalkKind::Merw, |x, y, a| a * f[y] / af[x]);
    let mass: f64 = f.iter().zip(&af).map(|(a, b)| a * b).sum();
    let pi: Vec<f64> = f.iter().zip(&af).map(|(a, b)| a * b / mass).collect();
    let ks_entropy = -(0..n)
        .map(|x| {
            pi[x]
                * graph
                    .row(x)
                    .map(|(y, a)| {
                        let p = kernel.prob(x, y);
                        p * (p / a).ln()
                    })
                    .sum::<f64>()
        })
        .sum::<f64>();
    MerwReport {
        principal: pair,
        kernel,
        pi,
        ks_entropy,
    }
}

/// Worst `|π_x p_xy − π_y p_yx|` over edges.
pub fn reversibility_defect(graph: &WeightedGraph, kernel: &MarkovKernel, pi: &[f64]) -> f64 {
    graph
        .edges()
        .map(|(x, y, _)| (pi[x] * kernel.prob(x, y) - pi[y] * kernel.prob(y, x)).abs())
        .fold(0.0, f64::max)
}
