//! The canopy tree `CT_d`: level operator, URW ratio limits, the closed-form
//! level kernel and Monte-Carlo trajectories.
//!
//! Levels start at 1 (the leaves). Every vertex at level `l` has one parent
//! at level `l + 1` and, for `l > 1`, `d − 1` children at level `l − 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Adjacency;
use crate::truncation::BallTruncation;
use crate::walkcounts::{urw_series, UrwEntry};

fn check_d(d: usize) -> Result<()> {
    if d < 3 {
        Err(Error::InvalidParameter(format!(
            "canopy tree needs d >= 3, got {d}"
        )))
    } else {
        Ok(())
    }
}

/// Level projection `B` of the adjacency of `CT_d` cut at level `L`:
/// `B_{k,k+1} = 1`, `B_{k+1,k} = d − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelOperator {
    d: usize,
    ball: BallTruncation,
}

impl LevelOperator {
    pub fn new(d: usize, levels: usize) -> Result<Self> {
        check_d(d)?;
        Ok(Self {
            d,
            ball: BallTruncation::canopy(d, levels)?,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn levels(&self) -> usize {
        self.ball.radius()
    }

    pub fn truncation(&self) -> &BallTruncation {
        &self.ball
    }

    /// Off-diagonal entry of `S^{-1} B S` with `S = diag((√(d−1))^k)`,
    /// which is symmetric: both neighbors of the diagonal equal `√(d−1)`.
    pub fn symmetrized_offdiagonal(&self, k: usize) -> (f64, f64) {
        let s = ((self.d - 1) as f64).sqrt();
        let (sk, sk1) = (s.powi(k as i32), s.powi(k as i32 + 1));
        (sk1 / sk, (self.d - 1) as f64 * sk / sk1)
    }

    /// Reference weight `p_k = (d − 2)/(d − 1)^k` making `B` self-adjoint.
    pub fn reference_weight(&self, k: usize) -> f64 {
        (self.d - 2) as f64 / ((self.d - 1) as f64).powi(k as i32)
    }
}

impl Adjacency for LevelOperator {
    fn vertex_count(&self) -> usize {
        self.ball.vertex_count()
    }

    fn for_each_neighbor<F: FnMut(usize, u32, f64)>(&self, x: usize, f: F) {
        self.ball.for_each_neighbor(x, f)
    }

    fn apply(&self, src: &[f64], dst: &mut [f64]) {
        self.ball.apply(src, dst)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanopyRatio {
    pub d: usize,
    pub level: usize,
    pub n: usize,
    pub levels: usize,
    /// `W_{n−1}(parent)/W_n(x)`.
    pub up_ratio: f64,
    /// `(d − 1) W_{n−1}(child)/W_n(x)`; zero at level 1.
    pub down_ratio: f64,
    pub up_ratio_prev: f64,
    pub down_ratio_prev: f64,
    pub up_parity_avg: f64,
    pub down_parity_avg: f64,
}

/// Exact length-`n` URW ratios at level `level`, on a truncation sized so
/// that the counts agree with the infinite canopy tree.
pub fn canopy_ratio(d: usize, level: usize, n: usize) -> Result<CanopyRatio> {
    check_d(d)?;
    if level == 0 || n < 2 {
        return Err(Error::InvalidParameter(format!(
            "canopy ratio needs level >= 1 and n >= 2, got level {level}, n {n}"
        )));
    }
    let levels = level + n;
    let ball = BallTruncation::canopy(d, levels)?;
    let x = ball.shell_index(level)?;
    let est = urw_series(&ball, x, n)?.pop().expect("n >= 2");
    let pick = |target: usize| est.entry(target).cloned();
    let up = pick(x + 1).expect("parent present below the top level");
    let down = if x > 0 { pick(x - 1) } else { None };
    let agg = |e: &Option<UrwEntry>, f: fn(&UrwEntry) -> f64| {
        e.as_ref().map_or(0.0, |e| f64::from(e.multiplicity) * f(e))
    };
    Ok(CanopyRatio {
        d,
        level,
        n,
        levels,
        up_ratio: up.ratio_raw,
        down_ratio: agg(&down, |e| e.ratio_raw),
        up_ratio_prev: up.ratio_prev,
        down_ratio_prev: agg(&down, |e| e.ratio_prev),
        up_parity_avg: up.ratio_parity_avg,
        down_parity_avg: agg(&down, |e| e.ratio_parity_avg),
    })
}

/// Closed-form URW of `CT_d`: `u_{l,l±1} = (l ± 1)/(2l)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanopyKernel {
    pub d: usize,
}

const DOOB_CHECK_LEVELS: usize = 1000;

/// Builds the kernel and verifies its Doob identities for levels up to 1000.
pub fn canopy_kernel(d: usize) -> Result<CanopyKernel> {
    check_d(d)?;
    let k = CanopyKernel { d };
    let r = k.doob_residual(DOOB_CHECK_LEVELS);
    if r > 1e-12 {
        return Err(Error::NoConvergence {
            what: "canopy Doob identity",
            iterations: DOOB_CHECK_LEVELS,
            residual: r,
        });
    }
    Ok(k)
}

impl CanopyKernel {
    fn q(&self) -> f64 {
        (self.d - 1) as f64
    }

    pub fn up(&self, level: usize) -> f64 {
        (level + 1) as f64 / (2 * level) as f64
    }

    pub fn down_total(&self, level: usize) -> f64 {
        (level - 1) as f64 / (2 * level) as f64
    }

    pub fn per_child(&self, level: usize) -> f64 {
        self.down_total(level) / self.q()
    }

    /// Growth rate `2√(d − 1)`.
    pub fn rho(&self) -> f64 {
        2.0 * self.q().sqrt()
    }

    /// `log F(k)` for `F(k) = k (√(d − 1))^k`.
    pub fn ln_f(&self, level: usize) -> f64 {
        (level as f64).ln() + 0.5 * level as f64 * self.q().ln()
    }

    /// Worst deviation from `u_{k,k+1} = F(k+1)/(ρF(k))` and
    /// `(d − 1)·u_child = (d − 1)F(k − 1)/(ρF(k))` over levels `1..=max_level`.
    pub fn doob_residual(&self, max_level: usize) -> f64 {
        let rho = self.rho();
        (1..=max_level)
            .map(|k| {
                let up = (self.ln_f(k + 1) - self.ln_f(k)).exp() / rho;
                let down = if k > 1 {
                    self.q() * (self.ln_f(k - 1) - self.ln_f(k)).exp() / rho
                } else {
                    0.0
                };
                (up - self.up(k))
                    .abs()
                    .max((down - self.down_total(k)).abs())
            })
            .fold(0.0, f64::max)
    }

    /// `sqrt(A_xy A_yx/(p_xy p_yx))` on the edge between levels `k` and `k + 1`.
    pub fn edge_energy(&self, level: usize) -> f64 {
        (1.0 / (self.up(level) * self.per_child(level + 1))).sqrt()
    }
}

/// Partial sums `Σ_{k ≤ K} F(k)² p_k` of the would-be stationary mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarySums {
    /// Largest level before `F(k)²` overflows.
    pub max_level: usize,
    pub partial_sums: Vec<f64>,
}

impl StationarySums {
    pub fn is_strictly_increasing(&self) -> bool {
        self.partial_sums.windows(2).all(|w| w[1] > w[0])
    }
}

pub fn stationary_partial_sums(d: usize) -> Result<StationarySums> {
    check_d(d)?;
    let q = (d - 1) as f64;
    let mut partial_sums = Vec::new();
    let mut sum = 0.0;
    let mut k = 1usize;
    loop {
        let qk = q.powi(k as i32);
        let f2 = (k * k) as f64 * qk;
        if !f2.is_finite() {
            break;
        }
        sum += f2 * (d - 2) as f64 / qk;
        partial_sums.push(sum);
        k += 1;
    }
    Ok(StationarySums {
        max_level: k - 1,
        partial_sums,
    })
}

/// Summary of one Monte-Carlo run of the level chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanopyTrajectory {
    pub seed: u64,
    pub steps: usize,
    pub up_frequency: f64,
    /// `(1/n) Σ −log(u_step/a_step)`; a downward step counts `d − 1` children.
    pub entropy_rate_mc: f64,
    pub final_level: usize,
    pub displacement_over_sqrt_n: f64,
    /// Level every `path_stride` steps, starting with the initial level.
    pub level_path: Vec<u32>,
    pub path_stride: usize,
}

pub const MIN_STEPS: usize = 10_000;
const PATH_POINTS: usize = 1000;

/// Runs the level chain from level 1 for `steps` steps.
pub fn simulate_canopy(d: usize, steps: usize, seed: u64) -> Result<CanopyTrajectory> {
    check_d(d)?;
    if steps < MIN_STEPS {
        return Err(Error::InvalidParameter(format!(
            "canopy simulation needs at least {MIN_STEPS} steps, got {steps}"
        )));
    }
    let kernel = CanopyKernel { d };
    let ln_q = kernel.q().ln();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stride = steps.div_ceil(PATH_POINTS).max(1);
    let mut level_path = Vec::with_capacity(PATH_POINTS + 1);
    let mut level = 1usize;
    let mut ups = 0usize;
    let mut entropy = 0.0;
    level_path.push(level as u32);
    for i in 1..=steps {
        let up = kernel.up(level);
        if rng.random::<f64>() < up {
            entropy -= up.ln();
            ups += 1;
            level += 1;
        } else {
            entropy -= kernel.down_total(level).ln() - ln_q;
            level -= 1;
        }
        if i % stride == 0 {
            level_path.push(level as u32);
        }
    }
    Ok(CanopyTrajectory {
        seed,
        steps,
        up_frequency: ups as f64 / steps as f64,
        entropy_rate_mc: entropy / steps as f64,
        final_level: level,
        displacement_over_sqrt_n: (level - 1) as f64 / (steps as f64).sqrt(),
        level_path,
        path_stride: stride,
    })
}

/// Independent runs for each seed, in parallel; output order follows `seeds`.
pub fn simulate_canopy_seeds(
    d: usize,
    steps: usize,
    seeds: &[u64],
) -> Result<Vec<CanopyTrajectory>> {
    seeds
        .par_iter()
        .map(|&s| simulate_canopy(d, steps, s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walkcounts::walk_counts;

    #[test]
    fn level_rows_sum_to_one() {
        let k = canopy_kernel(3).unwrap();
        for l in 1..500 {
            assert_eq!(k.up(l) + k.down_total(l), 1.0);
        }
        assert_eq!(k.up(1), 1.0);
        assert_eq!(k.up(2), 0.75);
        assert_eq!(k.per_child(2), 0.125);
    }

    #[test]
    fn energy_is_growth_rate() {
        for d in [3, 4, 6] {
            let k = canopy_kernel(d).unwrap();
            for l in 1..100 {
                assert!((k.edge_energy(l) - k.rho()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn level_one_ratio_is_exactly_one() {
        for n in [2, 3, 10, 51] {
            let r = canopy_ratio(3, 1, n).unwrap();
            assert_eq!(r.up_ratio, 1.0);
            assert_eq!(r.down_ratio, 0.0);
        }
    }

    #[test]
    fn ratios_sum_to_one() {
        let r = canopy_ratio(4, 5, 200).unwrap();
        assert!((r.up_ratio + r.down_ratio - 1.0).abs() < 1e-13);
        assert!((r.up_parity_avg + r.down_parity_avg - 1.0).abs() < 1e-13);
    }

    #[test]
    fn level_counts_match_materialized_canopy() {
        let ops = LevelOperator::new(3, 6).unwrap();
        let full = BallTruncation::canopy_graph(3, 6).unwrap();
        for n in 0..=6 {
            let a = walk_counts(&ops, n);
            let b = walk_counts(&full, n);
            // Vertex 0 is the top of the materialized tree; level 6 is index 5.
            assert_eq!(a.value(5), b.value(0));
        }
    }

    #[test]
    fn symmetrization() {
        let ops = LevelOperator::new(5, 10).unwrap();
        for k in 1..9 {
            let (a, b) = ops.symmetrized_offdiagonal(k);
            assert!((a - 2.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
        }
        // p_k B_{k,k+1} = p_{k+1} B_{k+1,k}.
        assert!((ops.reference_weight(3) - ops.reference_weight(4) * 4.0).abs() < 1e-15);
    }

    #[test]
    fn stationary_sums_diverge() {
        let s = stationary_partial_sums(3).unwrap();
        assert!(s.max_level > 1000);
        assert!(s.is_strictly_increasing());
        assert!(*s.partial_sums.last().unwrap() > 1e8);
    }

    #[test]
    fn simulation_is_reproducible() {
        let a = simulate_canopy(3, 20_000, 7).unwrap();
        let b = simulate_canopy(3, 20_000, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.level_path.len() <= PATH_POINTS + 1);
        assert!(simulate_canopy(3, 100, 7).is_err());
    }

    #[test]
    fn rejects_small_degree() {
        assert!(canopy_kernel(2).is_err());
        assert!(canopy_ratio(2, 1, 5).is_err());
    }
}
