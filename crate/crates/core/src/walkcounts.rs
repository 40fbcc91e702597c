//! Exact walk weights `W_n(x) = <1_x, A^n 1>`, the ratio-limit URW
//! estimator, and verification of the Doob (bridge-uniform) property.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Adjacency, WeightedGraph};
use crate::kernel::MarkovKernel;
use crate::truncation::BallTruncation;

const RESCALE_HIGH: f64 = 1.0e120;
const RESCALE_LOW: f64 = 1.0e-120;

/// Exact powers of two, `2^e` for `-1022 <= e <= 1023`.
fn pow2(e: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((1023 + e) as u64) << 52)
}

/// Walk weights of a fixed length, stored as `mantissa[x] * 2^exponent`.
///
/// Rescaling only ever multiplies by powers of two, so integer counts stay
/// exact for as long as they would in plain `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkCountVector {
    pub n: usize,
    pub mantissa: Vec<f64>,
    pub exponent: i64,
    /// Per-vertex flag: the count equals the infinite-model value.
    pub valid: Vec<bool>,
}

impl WalkCountVector {
    fn ones(len: usize) -> Self {
        Self {
            n: 0,
            mantissa: vec![1.0; len],
            exponent: 0,
            valid: vec![true; len],
        }
    }

    /// `W_n(x)` as a plain float; may overflow to infinity.
    pub fn value(&self, x: usize) -> f64 {
        let mut v = self.mantissa[x];
        let mut e = self.exponent;
        while e > 1000 {
            v *= pow2(1000);
            e -= 1000;
        }
        while e < -1000 {
            v *= pow2(-1000);
            e += 1000;
        }
        v * pow2(e as i32)
    }

    pub fn ln(&self, x: usize) -> f64 {
        self.mantissa[x].ln() + self.exponent as f64 * std::f64::consts::LN_2
    }

    /// `W_n(x) / other(y)` evaluated without leaving the scaled representation.
    pub fn ratio_to(&self, x: usize, other: &WalkCountVector, y: usize) -> f64 {
        let e = self.exponent - other.exponent;
        let r = self.mantissa[x] / other.mantissa[y];
        if e.abs() <= 1000 {
            r * pow2(e as i32)
        } else {
            (r.ln() + e as f64 * std::f64::consts::LN_2).exp()
        }
    }

    fn rescale(&mut self) {
        let max = self.mantissa.iter().cloned().fold(0.0, f64::max);
        if max > 0.0 && !(RESCALE_LOW..=RESCALE_HIGH).contains(&max) {
            let e = max.log2().floor() as i32;
            let s = pow2(-e.clamp(-1022, 1023));
            for m in &mut self.mantissa {
                *m *= s;
            }
            self.exponent += i64::from(e.clamp(-1022, 1023));
        }
    }
}

/// Streams `W_0, W_1, ...` by repeated row sweeps.
pub struct WalkCountSweep<'a, A: Adjacency> {
    adj: &'a A,
    current: WalkCountVector,
    scratch: Vec<f64>,
    window: Option<(&'a BallTruncation, usize)>,
}

impl<'a, A: Adjacency> WalkCountSweep<'a, A> {
    pub fn new(adj: &'a A) -> Self {
        let len = adj.vertex_count();
        Self {
            adj,
            current: WalkCountVector::ones(len),
            scratch: vec![0.0; len],
            window: None,
        }
    }

    pub fn current(&self) -> &WalkCountVector {
        &self.current
    }

    /// Advances to `W_{n+1}`.
    pub fn advance(&mut self) -> &WalkCountVector {
        self.adj.apply(&self.current.mantissa, &mut self.scratch);
        std::mem::swap(&mut self.current.mantissa, &mut self.scratch);
        self.current.n += 1;
        self.current.rescale();
        if let Some((ball, radius)) = self.window {
            let n = self.current.n;
            for (x, v) in self.current.valid.iter_mut().enumerate() {
                *v = ball.depth(x) + n <= radius;
            }
        }
        &self.current
    }
}

impl<'a> WalkCountSweep<'a, BallTruncation> {
    pub fn on_truncation(ball: &'a BallTruncation) -> Self {
        let mut s = Self::new(ball);
        s.window = Some((ball, ball.radius()));
        for (x, v) in s.current.valid.iter_mut().enumerate() {
            *v = ball.depth(x) <= ball.radius();
        }
        s
    }
}

/// `W_n` on any walk-count operator.
pub fn walk_counts<A: Adjacency>(adj: &A, n: usize) -> WalkCountVector {
    let mut sweep = WalkCountSweep::new(adj);
    for _ in 0..n {
        sweep.advance();
    }
    sweep.current
}

/// `W_n` on a truncation, with validity flags from the exactness window.
pub fn walk_counts_truncated(ball: &BallTruncation, n: usize) -> WalkCountVector {
    let mut sweep = WalkCountSweep::on_truncation(ball);
    for _ in 0..n {
        sweep.advance();
    }
    sweep.current
}

/// Worst relative deviation of `next` from one row sweep applied to `prev`.
pub fn recursion_residual<A: Adjacency>(
    adj: &A,
    prev: &WalkCountVector,
    next: &WalkCountVector,
) -> f64 {
    let mut swept = vec![0.0; adj.vertex_count()];
    adj.apply(&prev.mantissa, &mut swept);
    let shift = prev.exponent - next.exponent;
    (0..swept.len())
        .map(|x| {
            let lhs = next.mantissa[x];
            let rhs = if shift.abs() <= 1000 {
                swept[x] * pow2(shift as i32)
            } else {
                (swept[x].ln() + shift as f64 * std::f64::consts::LN_2).exp()
            };
            if lhs == 0.0 && rhs == 0.0 {
                0.0
            } else {
                (lhs - rhs).abs() / lhs.abs().max(rhs.abs())
            }
        })
        .fold(0.0, f64::max)
}

/// `(A^k)_xy`, the total weight of length-`k` walks from `x` to `y`.
pub fn bridge_weight<A: Adjacency>(adj: &A, x: usize, y: usize, k: usize) -> f64 {
    let n = adj.vertex_count();
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    v[y] = 1.0;
    for _ in 0..k {
        adj.apply(&v, &mut w);
        std::mem::swap(&mut v, &mut w);
    }
    v[x]
}

/// One neighbor class in a URW row estimate. Ratios are per single neighbor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrwEntry {
    pub neighbor: usize,
    pub multiplicity: u32,
    pub weight: f64,
    /// `A_xy W_{n-1}(y) / W_n(x)`.
    pub ratio_raw: f64,
    /// The same ratio at length `n - 1`.
    pub ratio_prev: f64,
    /// Mean of the two consecutive ratios.
    pub ratio_parity_avg: f64,
    /// `ratio_raw - ratio_prev`.
    pub cauchy_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrwEstimate {
    pub vertex: usize,
    pub n: usize,
    pub entries: Vec<UrwEntry>,
}

impl UrwEstimate {
    /// `Σ_y multiplicity · ratio_raw`; exactly one up to rounding.
    pub fn row_sum(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| f64::from(e.multiplicity) * e.ratio_raw)
            .sum()
    }

    pub fn entry(&self, neighbor: usize) -> Option<&UrwEntry> {
        self.entries.iter().find(|e| e.neighbor == neighbor)
    }
}

fn ratio_rows<A: Adjacency>(
    adj: &A,
    x: usize,
    n_max: usize,
    mut window: impl FnMut(usize) -> Result<()>,
) -> Result<Vec<UrwEstimate>> {
    if n_max < 2 {
        return Err(Error::InvalidParameter(format!(
            "ratio estimate needs n >= 2, got {n_max}"
        )));
    }
    window(n_max)?;
    let mut classes = Vec::new();
    adj.for_each_neighbor(x, |y, m, w| classes.push((y, m, w)));
    if classes.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "vertex {x} has no neighbors"
        )));
    }
    let mut sweep = WalkCountSweep::new(adj);
    // raw[j] holds the ratios at length j.
    let mut prev_counts = sweep.current().clone();
    let mut prev_ratios: Option<Vec<f64>> = None;
    let mut out = Vec::with_capacity(n_max - 1);
    for n in 1..=n_max {
        let cur = sweep.advance();
        let ratios: Vec<f64> = classes
            .iter()
            .map(|&(y, _, w)| w * prev_counts.ratio_to(y, cur, x))
            .collect();
        if let Some(prev) = &prev_ratios {
            let entries = classes
                .iter()
                .zip(ratios.iter().zip(prev))
                .map(|(&(y, m, w), (&r, &p))| UrwEntry {
                    neighbor: y,
                    multiplicity: m,
                    weight: w,
                    ratio_raw: r,
                    ratio_prev: p,
                    ratio_parity_avg: 0.5 * (r + p),
                    cauchy_delta: r - p,
                })
                .collect();
            out.push(UrwEstimate {
                vertex: x,
                n,
                entries,
            });
        }
        prev_ratios = Some(ratios);
        prev_counts = cur.clone();
    }
    Ok(out)
}

/// URW row at `x` from exact counts of length `n` on a truncation.
/// Fails hard when `depth(x) + n` exceeds the truncation radius.
pub fn urw_estimate(ball: &BallTruncation, x: usize, n: usize) -> Result<UrwEstimate> {
    let mut rows = urw_series(ball, x, n)?;
    Ok(rows.pop().expect("n >= 2 yields at least one row"))
}

/// URW row estimates at `x` for every length `2..=n_max`, from a single sweep.
pub fn urw_series(ball: &BallTruncation, x: usize, n_max: usize) -> Result<Vec<UrwEstimate>> {
    ratio_rows(ball, x, n_max, |n| ball.check_window(x, n))
}

/// Finite-length URW ratios on a finite graph (no truncation window).
pub fn finite_urw_estimate(graph: &WeightedGraph, x: usize, n: usize) -> Result<UrwEstimate> {
    graph.check_vertex(x)?;
    let mut rows = ratio_rows(graph, x, n, |_| Ok(()))?;
    Ok(rows.pop().expect("n >= 2 yields at least one row"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoobReport {
    pub is_doob: bool,
    /// Mean per-edge energy `sqrt(A_xy A_yx / (p_xy p_yx))`.
    pub energy: f64,
    pub energy_min: f64,
    pub energy_max: f64,
    /// `(max - min) / mean` over edges, loops included.
    pub energy_spread: f64,
    /// Worst relative difference of `p(w)/a(w)` over same-endpoint,
    /// equal-length walk pairs that were compared.
    pub max_bridge_discrepancy: f64,
    pub pairs_tested: usize,
}

/// Relative tolerance for declaring a kernel Doob.
pub const DOOB_TOLERANCE: f64 = 1e-9;

/// Walks up to this many in total are enumerated exhaustively.
const EXHAUSTIVE_BUDGET: f64 = 2.0e5;

/// Checks the Doob property of `kernel` on `graph`: equal `p(w)/a(w)` for
/// all walks sharing endpoints and length, via per-edge energies plus
/// compared bridge pairs. Small instances are enumerated exhaustively up to
/// length 6; otherwise `samples` pairs per length are drawn with a seeded
/// generator by bidirectional meeting, falling back to a local detour.
pub fn doob_check(
    graph: &WeightedGraph,
    kernel: &MarkovKernel,
    max_len: usize,
    samples: usize,
    seed: u64,
) -> Result<DoobReport> {
    kernel.check_support(graph, true)?;
    let n = graph.vertex_count();
    let mut energies = Vec::new();
    for x in 0..n {
        for (y, a) in graph.row(x) {
            if y < x {
                continue;
            }
            let e = (a * a / (kernel.prob(x, y) * kernel.prob(y, x))).sqrt();
            energies.push(e);
        }
    }
    let mean = energies.iter().sum::<f64>() / energies.len().max(1) as f64;
    let (lo, hi) = energies
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| {
            (lo.min(e), hi.max(e))
        });
    let spread = if energies.is_empty() {
        0.0
    } else {
        (hi - lo) / mean
    };

    let log_ratio = |w: &[usize]| -> f64 {
        w.windows(2)
            .map(|s| (kernel.prob(s[0], s[1]) / graph.weight(s[0], s[1])).ln())
            .sum()
    };

    let mut worst = 0.0f64;
    let mut pairs = 0usize;
    let walk_volume = n as f64 * graph.degree_bound().powi(max_len.min(6) as i32);
    if max_len <= 6 && walk_volume <= EXHAUSTIVE_BUDGET {
        for len in 1..=max_len {
            for x in 0..n {
                let mut extremes: HashMap<usize, (f64, f64)> = HashMap::new();
                let mut walk = vec![x];
                enumerate_walks(graph, &mut walk, len, &mut |w| {
                    let lr = log_ratio(w);
                    let e = extremes
                        .entry(*w.last().unwrap())
                        .or_insert((f64::INFINITY, f64::NEG_INFINITY));
                    e.0 = e.0.min(lr);
                    e.1 = e.1.max(lr);
                    pairs += 1;
                });
                for (lo, hi) in extremes.into_values() {
                    worst = worst.max((hi - lo).exp_m1());
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let step = |rng: &mut ChaCha8Rng, x: usize| {
            let nb = graph.neighbors(x);
            nb[rng.random_range(0..nb.len())]
        };
        for len in 2..=max_len.max(2) {
            for _ in 0..samples {
                let x = rng.random_range(0..n);
                let mut w1 = vec![x];
                for _ in 0..len {
                    let next = step(&mut rng, *w1.last().unwrap());
                    w1.push(next);
                }
                let y = w1[len];
                let mut w2 = None;
                let half = len.div_ceil(2);
                for _ in 0..32 {
                    let mut fwd = vec![x];
                    for _ in 0..half {
                        let next = step(&mut rng, *fwd.last().unwrap());
                        fwd.push(next);
                    }
                    let mut bwd = vec![y];
                    for _ in 0..len - half {
                        let next = step(&mut rng, *bwd.last().unwrap());
                        bwd.push(next);
                    }
                    if fwd.last() == bwd.last() {
                        bwd.pop();
                        fwd.extend(bwd.into_iter().rev());
                        if fwd != w1 {
                            w2 = Some(fwd);
                        }
                        break;
                    }
                }
                let w2 = match w2 {
                    Some(w) => w,
                    None => match detour(graph, &w1, &mut rng) {
                        Some(w) => w,
                        None => continue,
                    },
                };
                worst = worst.max((log_ratio(&w1) - log_ratio(&w2)).abs().exp_m1());
                pairs += 1;
            }
        }
    }

    Ok(DoobReport {
        is_doob: spread <= DOOB_TOLERANCE && worst <= DOOB_TOLERANCE,
        energy: mean,
        energy_min: lo,
        energy_max: hi,
        energy_spread: spread,
        max_bridge_discrepancy: worst,
        pairs_tested: pairs,
    })
}

/// Replaces one interior vertex of `w` by another common neighbor of its
/// two walk-neighbors, if one exists.
fn detour(graph: &WeightedGraph, w: &[usize], rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
    let len = w.len();
    let start = rng.random_range(1..len - 1);
    for off in 0..len - 2 {
        let i = 1 + (start - 1 + off) % (len - 2);
        let (a, b) = (w[i - 1], w[i + 1]);
        let alt: Vec<usize> = graph
            .neighbors(a)
            .iter()
            .copied()
            .filter(|&z| z != w[i] && graph.weight(z, b) > 0.0)
            .collect();
        if !alt.is_empty() {
            let mut out = w.to_vec();
            out[i] = alt[rng.random_range(0..alt.len())];
            return Some(out);
        }
    }
    None
}

fn enumerate_walks<F: FnMut(&[usize])>(
    graph: &WeightedGraph,
    walk: &mut Vec<usize>,
    remaining: usize,
    visit: &mut F,
) {
    if remaining == 0 {
        visit(walk);
        return;
    }
    let x = *walk.last().unwrap();
    for &y in graph.neighbors(x) {
        walk.push(y);
        enumerate_walks(graph, walk, remaining - 1, visit);
        walk.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, perturb_loops, Family, LoopSpec};
    use crate::kernel::WalkKind;

    #[test]
    fn tree_center_counts_are_powers() {
        let ball = BallTruncation::tree(3, 10).unwrap();
        let w = walk_counts_truncated(&ball, 5);
        assert_eq!(w.value(0), 243.0);
        assert!(w.valid[5] && !w.valid[6]);
    }

    #[test]
    fn path_three_two_step_walks() {
        let g = generate(&Family::Path { n: 3 }).unwrap();
        let w = walk_counts(&g, 2);
        assert_eq!(w.value(0), 2.0);
        assert_eq!(w.value(1), 2.0);
        assert_eq!(walk_counts(&g, 3).value(1), 4.0);
    }

    #[test]
    fn loop_adds_weighted_degree() {
        let ball = BallTruncation::tree(4, 5)
            .unwrap()
            .with_center_loop(1.0)
            .unwrap();
        assert_eq!(walk_counts(&ball, 1).value(0), 5.0);
    }

    #[test]
    fn scaled_representation_survives_overflow() {
        let ball = BallTruncation::tree(4, 800).unwrap();
        let w = walk_counts_truncated(&ball, 700);
        assert!((w.ln(0) - 700.0 * 4f64.ln()).abs() < 1e-9);
        assert!(w.value(0).is_infinite());
        let prev = walk_counts_truncated(&ball, 699);
        assert!(recursion_residual(&ball, &prev, &w) < 1e-14);
    }

    #[test]
    fn regular_tree_ratio_is_constant() {
        let ball = BallTruncation::tree(4, 40).unwrap();
        for est in urw_series(&ball, 3, 30).unwrap() {
            for e in &est.entries {
                assert_eq!(e.ratio_raw, 0.25);
            }
        }
    }

    #[test]
    fn window_violation_is_an_error() {
        let ball = BallTruncation::tree(4, 40).unwrap();
        assert!(matches!(
            urw_estimate(&ball, 5, 36),
            Err(Error::WindowViolation { .. })
        ));
    }

    #[test]
    fn srw_on_cycle_is_doob_with_energy_two() {
        let g = generate(&Family::Cycle { n: 6 }).unwrap();
        let k = MarkovKernel::srw(&g);
        let r = doob_check(&g, &k, 6, 100, 1).unwrap();
        assert!(r.is_doob);
        assert!((r.energy - 2.0).abs() < 1e-15);
        assert!(r.pairs_tested > 0);
    }

    #[test]
    fn lopsided_center_is_not_doob() {
        let g = generate(&Family::Path { n: 3 }).unwrap();
        let k = MarkovKernel::from_rows(
            vec![vec![(1, 1.0)], vec![(0, 0.7), (2, 0.3)], vec![(1, 1.0)]],
            WalkKind::Custom,
        )
        .unwrap();
        let r = doob_check(&g, &k, 4, 10, 1).unwrap();
        assert!(!r.is_doob);
        assert!(r.energy_spread > 0.1);
    }

    #[test]
    fn sampled_mode_on_larger_graph() {
        let g = generate(&Family::RandomRegular {
            n: 200,
            d: 4,
            seed: 2,
        })
        .unwrap();
        let k = MarkovKernel::srw(&g);
        let r = doob_check(&g, &k, 8, 50, 3).unwrap();
        assert!(r.is_doob && r.pairs_tested > 100);
        let g = perturb_loops(&g, &LoopSpec::single(0, 2.0).unwrap()).unwrap();
        let k = MarkovKernel::srw(&g);
        let r = doob_check(&g, &k, 8, 50, 3).unwrap();
        assert!(!r.is_doob);
    }

    #[test]
    fn support_must_match_exactly() {
        let g = generate(&Family::Path { n: 3 }).unwrap();
        let k = MarkovKernel::from_rows(
            vec![vec![(1, 1.0)], vec![(0, 1.0), (2, 0.0)], vec![(1, 1.0)]],
            WalkKind::Custom,
        )
        .unwrap();
        assert!(matches!(
            doob_check(&g, &k, 3, 1, 0),
            Err(Error::KernelSupportMismatch { vertex: 1 })
        ));
    }
}
