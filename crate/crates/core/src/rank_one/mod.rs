//! A single loop of weight `σ` at a vertex `o`: `H = A + σ 1_o 1_o*`.
//!
//! Thresholds, walk growth `ρ_σ`, spectral radius `r_σ`, the URW kernel in
//! each phase and the recurrence classification, all expressed through the
//! Green function `f_ox(t)` of the unperturbed graph.

pub mod green;
pub mod lattice;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use green::{
    tree_h, GreenFunction, GreenMethod, GreenValue, RankOneModel, Site, DEFAULT_SERIES_TERMS,
};

use crate::error::{Error, Result};
use crate::spectral::principal_pair;

/// `σ` within this multiple of `d` of `σ*` is treated as critical.
pub const CRITICAL_BAND: f64 = 1e-9;
pub const DEFAULT_ROOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// `d / f_oo(1/d)`: URW localization.
    pub sigma_star: f64,
    /// `r(A) / f_oo(1/r(A))`: appearance of an `ℓ²` eigenvector.
    pub sigma_l2: f64,
}

pub fn thresholds(green: &GreenFunction) -> Result<Thresholds> {
    let star = threshold_at(green, green.base_rate())?;
    let l2 = if green.l2_radius() == green.base_rate() {
        star
    } else {
        threshold_at(green, green.l2_radius())?
    };
    Ok(Thresholds {
        sigma_star: star,
        sigma_l2: l2,
    })
}

fn threshold_at(green: &GreenFunction, rate: f64) -> Result<f64> {
    if matches!(green.model(), RankOneModel::Finite { .. }) {
        return Ok(0.0);
    }
    let f = green.f_oo(1.0 / rate)?;
    Ok(if f.is_infinite() { 0.0 } else { rate / f })
}

/// Root of `σ t f_oo(t) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecularRoot {
    pub t: f64,
    /// `|σ t f_oo(t) − 1|`.
    pub residual: f64,
}

/// Bisection for `σ t f_oo(t) = 1` on `(0, limit)`.
pub fn secular_root(
    green: &GreenFunction,
    sigma: f64,
    limit: f64,
    tol: f64,
) -> Result<SecularRoot> {
    let g = |t: f64| -> Result<f64> { Ok(sigma * t * green.f_oo(t)? - 1.0) };
    let mut lo = 0.0f64;
    let mut hi = limit;
    let finite_end = !matches!(green.model(), RankOneModel::Finite { .. });
    if finite_end {
        let top = g(hi)?;
        if top.is_finite() && top <= 0.0 {
            return Err(Error::BracketFailure(format!(
                "σ t f_oo(t) − 1 = {top} at t = {hi}; no root below the domain limit"
            )));
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (rl, rh) = (
        g(lo)?.abs(),
        if hi < limit || !finite_end {
            g(hi)?.abs()
        } else {
            f64::INFINITY
        },
    );
    let (t, residual) = if rl <= rh { (lo, rl) } else { (hi, rh) };
    if residual > tol && hi - lo > 4.0 * f64::EPSILON * hi {
        return Err(Error::NoConvergence {
            what: "secular equation bisection",
            iterations: 400,
            residual,
        });
    }
    Ok(SecularRoot { t, residual })
}

fn critical_band(green: &GreenFunction) -> f64 {
    CRITICAL_BAND * green.base_rate()
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma >= 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "σ must be finite and non-negative, got {sigma}"
        )))
    }
}

/// Exponential growth rate of walk weight from `o` in `H`.
pub fn rho_sigma(green: &GreenFunction, sigma: f64, tol: f64) -> Result<f64> {
    check_sigma(sigma)?;
    let th = thresholds(green)?;
    if sigma <= th.sigma_star + critical_band(green) {
        return Ok(green.base_rate());
    }
    Ok(1.0 / secular_root(green, sigma, 1.0 / green.base_rate(), tol)?.t)
}

/// Spectral radius of `H` on `ℓ²`.
pub fn r_sigma(green: &GreenFunction, sigma: f64, tol: f64) -> Result<f64> {
    check_sigma(sigma)?;
    let th = thresholds(green)?;
    if sigma <= th.sigma_l2 + critical_band(green) {
        return Ok(green.l2_radius());
    }
    Ok(1.0 / secular_root(green, sigma, 1.0 / green.l2_radius(), tol)?.t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Transient,
    NullRecurrent,
    PositiveRecurrent,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Transient => "transient",
            Phase::NullRecurrent => "null_recurrent",
            Phase::PositiveRecurrent => "positive_recurrent",
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the URW kernel is expressed at a given `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum Regime {
    /// `σ < σ*`, evaluated at `t = 1/d`.
    Transient { s: f64, f_oo: f64 },
    /// `σ = σ*`.
    Critical,
    /// `σ > σ*`, evaluated at `t = 1/ρ_σ`.
    Localized { rho: f64 },
    /// Unperturbed finite graph: the MERW.
    Merw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelEntry {
    pub target: Site,
    pub multiplicity: u32,
    /// Probability of moving to each single vertex of the class.
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelRow {
    pub site: Site,
    pub entries: Vec<KernelEntry>,
    /// Propagated bound on absolute error of the entries from series truncation.
    pub error_bound: f64,
}

impl KernelRow {
    pub fn row_sum(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| f64::from(e.multiplicity) * e.prob)
            .sum()
    }

    pub fn prob_to(&self, target: &Site) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| &e.target == target)
            .map(|e| e.prob)
    }

    /// Total probability of classes satisfying `pred`.
    pub fn mass_where(&self, pred: impl Fn(&Site) -> bool) -> f64 {
        self.entries
            .iter()
            .filter(|e| pred(&e.target))
            .map(|e| f64::from(e.multiplicity) * e.prob)
            .sum()
    }
}

/// URW of `H`, evaluated on demand at any site.
#[derive(Debug)]
pub struct Rank1Kernel<'a> {
    green: &'a GreenFunction,
    sigma: f64,
    regime: Regime,
    t: f64,
    merw: Option<Vec<f64>>,
    finite_column: Option<Vec<f64>>,
}

/// Builds the URW kernel of `H`; the regime follows from `σ` versus `σ*`.
pub fn urw_rank1(green: &GreenFunction, sigma: f64) -> Result<Rank1Kernel<'_>> {
    check_sigma(sigma)?;
    let th = thresholds(green)?;
    let d = green.base_rate();
    let band = critical_band(green);
    let mut kernel = Rank1Kernel {
        green,
        sigma,
        regime: Regime::Critical,
        t: 1.0 / d,
        merw: None,
        finite_column: None,
    };
    if let RankOneModel::Finite { graph, .. } = green.model() {
        if sigma <= band {
            let pair = principal_pair(graph, 1e-13)?;
            kernel.regime = Regime::Merw;
            kernel.merw = Some(pair.f);
            return Ok(kernel);
        }
    }
    if sigma < th.sigma_star - band || sigma == 0.0 {
        let f_oo = green.f_oo(1.0 / d)?;
        kernel.regime = Regime::Transient { s: sigma / d, f_oo };
    } else if sigma > th.sigma_star + band {
        let rho = rho_sigma(green, sigma, DEFAULT_ROOT_TOL)?;
        kernel.regime = Regime::Localized { rho };
        kernel.t = 1.0 / rho;
    }
    if matches!(green.model(), RankOneModel::Finite { .. }) {
        kernel.finite_column = Some(green.finite_column(kernel.t)?.0);
    }
    Ok(kernel)
}

impl Rank1Kernel<'_> {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// The `t` at which Green functions are evaluated.
    pub fn t(&self) -> f64 {
        self.t
    }

    /// `(target, multiplicity, H_xy)` for the neighbor classes of `site`.
    fn neighbors(&self, site: &Site) -> Result<Vec<(Site, u32, f64)>> {
        let mut out = Vec::new();
        match (self.green.model(), site) {
            (RankOneModel::Tree { d }, Site::Shell(k)) => {
                if *k == 0 {
                    if self.sigma > 0.0 {
                        out.push((Site::Shell(0), 1, self.sigma));
                    }
                    out.push((Site::Shell(1), *d as u32, 1.0));
                } else {
                    out.push((Site::Shell(k - 1), 1, 1.0));
                    out.push((Site::Shell(k + 1), (*d - 1) as u32, 1.0));
                }
            }
            (RankOneModel::Lattice { dim }, Site::Point(x)) if x.len() == *dim => {
                if self.sigma > 0.0 && x.iter().all(|&v| v == 0) {
                    out.push((site.clone(), 1, self.sigma));
                }
                for i in 0..*dim {
                    for step in [-1i64, 1] {
                        let mut y = x.clone();
                        y[i] += step;
                        out.push((Site::Point(y), 1, 1.0));
                    }
                }
            }
            (RankOneModel::Finite { graph, root }, Site::Vertex(x)) => {
                graph.check_vertex(*x)?;
                let mut has_loop = false;
                for (y, w) in graph.row(*x) {
                    let w = if y == *x && *x == *root {
                        has_loop = true;
                        w + self.sigma
                    } else {
                        w
                    };
                    out.push((Site::Vertex(y), 1, w));
                }
                if !has_loop && *x == *root && self.sigma > 0.0 {
                    out.push((site.clone(), 1, self.sigma));
                }
            }
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "site {site} does not belong to model {}",
                    self.green.model().label()
                )))
            }
        }
        Ok(out)
    }

    fn f(&self, site: &Site) -> Result<GreenValue> {
        if let (Some(col), Site::Vertex(x)) = (&self.finite_column, site) {
            return Ok(GreenValue {
                value: col[*x],
                error_bound: 0.0,
                method: GreenMethod::LinearSolve,
            });
        }
        self.green.green(self.t, site)
    }

    /// Full transition row at `site`, including the loop at `o`.
    pub fn row(&self, site: &Site) -> Result<KernelRow> {
        let classes = self.neighbors(site)?;
        let d = self.green.base_rate();
        let mut entries = Vec::with_capacity(classes.len());
        let mut error_bound = 0.0f64;
        if let Some(f) = &self.merw {
            let Site::Vertex(x) = site else {
                unreachable!()
            };
            let rho = self.green.base_rate();
            for (target, m, w) in classes {
                let Site::Vertex(y) = target else {
                    unreachable!()
                };
                entries.push(KernelEntry {
                    target,
                    multiplicity: m,
                    prob: w * f[y] / (rho * f[*x]),
                });
            }
            return Ok(KernelRow {
                site: site.clone(),
                entries,
                error_bound: 0.0,
            });
        }
        let fx = self.f(site)?;
        for (target, m, w) in classes {
            let fy = self.f(&target)?;
            let rel = |g: &GreenValue| {
                if g.value == 0.0 {
                    0.0
                } else {
                    g.error_bound / g.value.abs()
                }
            };
            let prob = match self.regime {
                Regime::Transient { s, f_oo } => {
                    if s == 0.0 {
                        w / d
                    } else {
                        let c = 1.0 - s * f_oo;
                        (w / d) * (c + s * fy.value) / (c + s * fx.value)
                    }
                }
                Regime::Critical => (w / d) * fy.value / fx.value,
                Regime::Localized { rho } => (w / rho) * fy.value / fx.value,
                Regime::Merw => unreachable!(),
            };
            error_bound = error_bound.max(prob.abs() * (rel(&fx) + rel(&fy)));
            entries.push(KernelEntry {
                target,
                multiplicity: m,
                prob,
            });
        }
        Ok(KernelRow {
            site: site.clone(),
            entries,
            error_bound,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    /// Tree distance, axis coordinate for lattices, graph distance for finite graphs.
    pub distance: usize,
    pub site: Site,
    /// `π(x)`; relative to `π(o) = 1` for lattices.
    pub per_vertex: f64,
    /// Mass of the whole shell, where known in closed form.
    pub shell_mass: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryProfile {
    /// `π(x_{k+1}) / π(x_k)` along a geodesic ray, when it is constant.
    pub per_vertex_ratio: Option<f64>,
    pub entries: Vec<ProfileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub model: String,
    pub sigma: f64,
    pub sigma_star: f64,
    pub sigma_l2: f64,
    pub rho_sigma: f64,
    pub r_sigma: f64,
    pub phase: Phase,
    pub stationary_profile: Option<StationaryProfile>,
}

/// Whether `f_o·(1/d)` is square summable at criticality. The lattice Green
/// function decays like `|x|^{2−dim}`, so its square is summable against
/// `|x|^{dim−1}` shells exactly when `2(2 − dim) < −dim`.
pub fn critical_green_is_l2(model: &RankOneModel) -> bool {
    match model {
        RankOneModel::Tree { .. } | RankOneModel::Finite { .. } => true,
        RankOneModel::Lattice { dim } => {
            let n = *dim as i64;
            2 * (2 - n) < -n
        }
    }
}

const PROFILE_SHELLS: usize = 12;

/// Phase of the URW of `H` at amplitude `σ`, with its stationary profile
/// `π ∝ f_o·(1/ρ_σ)²` when positive recurrent.
pub fn classify_phase(green: &GreenFunction, sigma: f64) -> Result<PhaseReport> {
    check_sigma(sigma)?;
    let th = thresholds(green)?;
    let band = critical_band(green);
    let rho = rho_sigma(green, sigma, DEFAULT_ROOT_TOL)?;
    let r = r_sigma(green, sigma, DEFAULT_ROOT_TOL)?;
    let phase = if matches!(green.model(), RankOneModel::Finite { .. }) {
        Phase::PositiveRecurrent
    } else if (sigma - th.sigma_star).abs() <= band {
        if critical_green_is_l2(green.model()) {
            Phase::PositiveRecurrent
        } else {
            Phase::NullRecurrent
        }
    } else if sigma < th.sigma_star {
        Phase::Transient
    } else {
        Phase::PositiveRecurrent
    };
    let stationary_profile = if phase == Phase::PositiveRecurrent {
        Some(profile(green, sigma, rho)?)
    } else {
        None
    };
    Ok(PhaseReport {
        model: green.model().label(),
        sigma,
        sigma_star: th.sigma_star,
        sigma_l2: th.sigma_l2,
        rho_sigma: rho,
        r_sigma: r,
        phase,
        stationary_profile,
    })
}

fn profile(green: &GreenFunction, sigma: f64, rho: f64) -> Result<StationaryProfile> {
    let t = 1.0 / rho;
    match green.model() {
        RankOneModel::Tree { d } => {
            let q = (*d - 1) as f64;
            let h = tree_h(q, t);
            let ratio = (t * h).powi(2);
            // Σ_x f_ox² = f_oo² (1 + d·ratio / (1 − q·ratio)).
            let total = 1.0 + *d as f64 * ratio / (1.0 - q * ratio);
            let entries = (0..PROFILE_SHELLS)
                .map(|k| {
                    let per_vertex = ratio.powi(k as i32) / total;
                    let count = if k == 0 {
                        1.0
                    } else {
                        *d as f64 * q.powi(k as i32 - 1)
                    };
                    ProfileEntry {
                        distance: k,
                        site: Site::Shell(k),
                        per_vertex,
                        shell_mass: Some(per_vertex * count),
                    }
                })
                .collect();
            Ok(StationaryProfile {
                per_vertex_ratio: Some(ratio),
                entries,
            })
        }
        RankOneModel::Lattice { dim } => {
            let f0 = green.f_oo(t)?;
            let entries = (0..PROFILE_SHELLS)
                .map(|k| {
                    let mut x = vec![0i64; *dim];
                    x[0] = k as i64;
                    let site = Site::Point(x);
                    let f = green.green(t, &site)?.value;
                    Ok(ProfileEntry {
                        distance: k,
                        site,
                        per_vertex: (f / f0).powi(2),
                        shell_mass: None,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(StationaryProfile {
                per_vertex_ratio: None,
                entries,
            })
        }
        RankOneModel::Finite { graph, root } => {
            let f = if sigma <= critical_band(green) {
                principal_pair(graph, 1e-13)?.f
            } else {
                green.finite_column(t)?.0
            };
            let total: f64 = f.iter().map(|v| v * v).sum();
            let dist = graph.distances_from(&[*root]);
            let entries = f
                .iter()
                .enumerate()
                .map(|(x, v)| ProfileEntry {
                    distance: dist[x],
                    site: Site::Vertex(x),
                    per_vertex: v * v / total,
                    shell_mass: None,
                })
                .collect();
            Ok(StationaryProfile {
                per_vertex_ratio: None,
                entries,
            })
        }
    }
}

/// Phase reports over a grid of amplitudes, computed in parallel.
pub fn sweep(green: &GreenFunction, sigmas: &[f64]) -> Result<Vec<PhaseReport>> {
    sigmas
        .par_iter()
        .map(|&s| {
            let mut r = classify_phase(green, s)?;
            r.stationary_profile = None;
            Ok(r)
        })
        .collect()
}
