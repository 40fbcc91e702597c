//! Sequences of loop-perturbed random regular graphs: MERW growth, distance
//! of MERW rows from the simple random walk far from the loops, and edge
//! energy statistics.
//!
//! Local convergence is measured by a surrogate: total variation of root
//! rows and of two-step distributions at roots far from the loops.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{generate, perturb_loops, Family, LoopSpec, WeightedGraph};
use crate::kernel::MarkovKernel;
use crate::rank_one::{rho_sigma, urw_rank1, GreenFunction, Site, DEFAULT_ROOT_TOL};
use crate::spectral::{merw_from_pair, principal_pair, second_eigenvalue_from};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LoopRule {
    /// One loop at vertex 0 (a uniform vertex of the random graph).
    SingleSite,
    /// Each vertex independently with probability `p`.
    Iid { p: f64 },
}

impl std::fmt::Display for LoopRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LoopRule::SingleSite => f.write_str("single"),
            LoopRule::Iid { p } => write!(f, "iid:{p}"),
        }
    }
}

impl std::str::FromStr for LoopRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "single" || s == "single_site" {
            return Ok(LoopRule::SingleSite);
        }
        if let Some(p) = s.strip_prefix("iid:") {
            let p: f64 = p
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad iid probability '{p}'")))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!(
                    "iid probability {p} not in [0, 1]"
                )));
            }
            return Ok(LoopRule::Iid { p });
        }
        Err(Error::InvalidParameter(format!(
            "loop rule must be 'single' or 'iid:<p>', got '{s}'"
        )))
    }
}

/// Loop support under `rule` for a graph on `n` vertices.
pub fn loop_support(rule: LoopRule, n: usize, seed: u64) -> Vec<usize> {
    match rule {
        LoopRule::SingleSite => vec![0],
        LoopRule::Iid { p } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6c6f_6f70_7369_7465);
            (0..n).filter(|_| rng.random::<f64>() < p).collect()
        }
    }
}

/// `⌊log_{d−1}(n)/2⌋`.
pub fn far_cutoff(n: usize, d: usize) -> usize {
    ((n as f64).ln() / ((d - 1) as f64).ln() / 2.0).floor() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalStats {
    /// `½ Σ_y |p_xy − 1/deg(x)|` per root; loops count as non-neighbors.
    pub tv_to_srw: Vec<f64>,
    /// Total variation between two-step distributions of the kernel and SRW.
    pub tv2_to_srw: Vec<f64>,
    /// `p_xy p_yx/(A_xy A_yx)` per edge, the inverse squared Doob energy.
    pub energy: Vec<f64>,
}

fn srw_prob(graph: &WeightedGraph, x: usize, y: usize) -> f64 {
    if x == y {
        return 0.0;
    }
    let deg = graph.neighbors(x).iter().filter(|&&z| z != x).count();
    1.0 / deg as f64
}

/// Row and two-step total variation to SRW at `roots`, energy statistic on `edges`.
pub fn local_stats(
    graph: &WeightedGraph,
    kernel: &MarkovKernel,
    roots: &[usize],
    edges: &[(usize, usize)],
) -> Result<LocalStats> {
    kernel.check_support(graph, false)?;
    let mut tv_to_srw = Vec::with_capacity(roots.len());
    let mut tv2_to_srw = Vec::with_capacity(roots.len());
    for &x in roots {
        graph.check_vertex(x)?;
        let tv: f64 = graph
            .neighbors(x)
            .iter()
            .map(|&y| (kernel.prob(x, y) - srw_prob(graph, x, y)).abs())
            .sum();
        tv_to_srw.push(0.5 * tv);
        let mut two: Vec<(usize, f64)> = Vec::new();
        for &y in graph.neighbors(x) {
            let (p1, s1) = (kernel.prob(x, y), srw_prob(graph, x, y));
            for &z in graph.neighbors(y) {
                two.push((z, p1 * kernel.prob(y, z) - s1 * srw_prob(graph, y, z)));
            }
        }
        two.sort_by_key(|&(z, _)| z);
        let mut tv2 = 0.0;
        let mut i = 0;
        while i < two.len() {
            let z = two[i].0;
            let mut diff = 0.0;
            while i < two.len() && two[i].0 == z {
                diff += two[i].1;
                i += 1;
            }
            tv2 += diff.abs();
        }
        tv2_to_srw.push(0.5 * tv2);
    }
    let energy = edges
        .iter()
        .map(|&(x, y)| {
            let a = graph.weight(x, y);
            if a == 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "({x}, {y}) is not an edge"
                )));
            }
            Ok(kernel.prob(x, y) * kernel.prob(y, x) / (a * a))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LocalStats {
        tv_to_srw,
        tv2_to_srw,
        energy,
    })
}

/// `max_x |Σ_{y∼x} 1/(d² p_xy) − 1|` on a `d`-regular graph. By the
/// harmonic–arithmetic mean inequality this vanishes only for SRW.
pub fn harmonic_defect(graph: &WeightedGraph, kernel: &MarkovKernel) -> Result<f64> {
    let d = graph
        .regular_degree()
        .ok_or_else(|| Error::InvalidGraph("harmonic defect needs a regular graph".into()))?;
    let d2 = (d * d) as f64;
    Ok((0..graph.vertex_count())
        .map(|x| {
            let s: f64 = graph
                .neighbors(x)
                .iter()
                .map(|&y| 1.0 / (d2 * kernel.prob(x, y)))
                .sum();
            (s - 1.0).abs()
        })
        .fold(0.0, f64::max))
}

/// Linear-interpolation quantile of unsorted data; `NaN` when empty.
pub fn quantile(data: &[f64], q: f64) -> f64 {
    if data.is_empty() {
        return f64::NAN;
    }
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

fn mean(data: &[f64]) -> f64 {
    if data.is_empty() {
        f64::NAN
    } else {
        data.iter().sum::<f64>() / data.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceConfig {
    pub d: usize,
    pub sizes: Vec<usize>,
    pub omega: LoopRule,
    pub sigma: f64,
    pub seeds: Vec<u64>,
    /// Override of the far-root distance cutoff.
    pub cutoff: Option<usize>,
    pub tol: f64,
}

impl SequenceConfig {
    pub fn new(d: usize, sizes: Vec<usize>, omega: LoopRule, sigma: f64, seeds: Vec<u64>) -> Self {
        Self {
            d,
            sizes,
            omega,
            sigma,
            seeds,
            cutoff: None,
            tol: 1e-12,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.d < 3 {
            return Err(Error::InvalidParameter(format!(
                "degree must be >= 3, got {}",
                self.d
            )));
        }
        if self.sizes.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidParameter(
                "sizes and seeds must be non-empty".into(),
            ));
        }
        if self.sizes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "sizes must be strictly increasing".into(),
            ));
        }
        if let Some(&n) = self
            .sizes
            .iter()
            .find(|&&n| n * self.d % 2 == 1 || n <= self.d)
        {
            return Err(Error::InfeasibleDegreeSequence { n, d: self.d });
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "σ must be >= 0, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// One graph of the sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRecord {
    pub n: usize,
    pub seed: u64,
    pub rho_n: f64,
    /// Second eigenvalue of the unperturbed graph.
    pub lambda2_n: f64,
    /// `d − λ₂ − σ`.
    pub margin: f64,
    pub tv_mean: f64,
    pub tv_p95: f64,
    pub tv2_mean: f64,
    pub energy_median: f64,
    pub energy_iqr: f64,
    /// `ρ_σ(T_d)` for a single site.
    pub predicted_rho: Option<f64>,
    /// Mean row TV to the rank-one tree URW at far roots (single site only).
    pub tv_urw_mean: Option<f64>,
    /// `(ρ_n − d) − σ|ω|/n`; non-negative by the Rayleigh quotient of `1`.
    pub rayleigh_slack: f64,
    pub loops: usize,
    pub far_roots: usize,
    pub far_edges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub config: SequenceConfig,
    pub records: Vec<SizeRecord>,
}

/// Per-size averages over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub n: usize,
    pub tv_mean: f64,
    pub rho_mean: f64,
    pub energy_median_mean: f64,
    pub margin_mean: f64,
}

impl SequenceReport {
    pub fn by_size(&self) -> Vec<SizeSummary> {
        self.config
            .sizes
            .iter()
            .map(|&n| {
                let rs: Vec<&SizeRecord> = self.records.iter().filter(|r| r.n == n).collect();
                let avg =
                    |f: fn(&SizeRecord) -> f64| mean(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
                SizeSummary {
                    n,
                    tv_mean: avg(|r| r.tv_mean),
                    rho_mean: avg(|r| r.rho_n),
                    energy_median_mean: avg(|r| r.energy_median),
                    margin_mean: avg(|r| r.margin),
                }
            })
            .collect()
    }
}

/// Builds, perturbs and analyzes one graph per (size, seed), in parallel.
pub fn sequence_experiment(config: &SequenceConfig) -> Result<SequenceReport> {
    config.validate()?;
    let green = GreenFunction::tree(config.d)?;
    let predicted = match config.omega {
        LoopRule::SingleSite => Some(rho_sigma(&green, config.sigma, DEFAULT_ROOT_TOL)?),
        LoopRule::Iid { .. } => None,
    };
    let jobs: Vec<(usize, u64)> = config
        .sizes
        .iter()
        .flat_map(|&n| config.seeds.iter().map(move |&s| (n, s)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(n, seed)| run_instance(config, &green, predicted, n, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(SequenceReport {
        config: config.clone(),
        records,
    })
}

fn run_instance(
    config: &SequenceConfig,
    green: &GreenFunction,
    predicted: Option<f64>,
    n: usize,
    seed: u64,
) -> Result<SizeRecord> {
    let d = config.d;
    let graph = generate(&Family::RandomRegular { n, d, seed })?;
    let support = loop_support(config.omega, n, seed);
    let perturbed = if support.is_empty() || config.sigma == 0.0 {
        graph.clone()
    } else {
        perturb_loops(&graph, &LoopSpec::new(support.clone(), config.sigma)?)?
    };

    let base = principal_pair(&graph, config.tol)?;
    let lambda2 = second_eigenvalue_from(&graph, &base, 1e-9)?.lambda2;
    let pair = principal_pair(&perturbed, config.tol)?;
    let rho_n = pair.rho;
    let merw = merw_from_pair(&perturbed, pair);

    let cutoff = config.cutoff.unwrap_or_else(|| far_cutoff(n, d));
    let dist = if support.is_empty() {
        vec![usize::MAX; n]
    } else {
        graph.distances_from(&support)
    };
    let roots: Vec<usize> = (0..n).filter(|&x| dist[x] > cutoff).collect();
    let edges: Vec<(usize, usize)> = graph
        .edges()
        .filter(|&(x, y, _)| dist[x] > cutoff && dist[y] > cutoff)
        .map(|(x, y, _)| (x, y))
        .collect();
    let stats = local_stats(&perturbed, &merw.kernel, &roots, &edges)?;

    let tv_urw_mean = match config.omega {
        LoopRule::SingleSite => Some(mean(&tv_to_rank_one(
            &perturbed,
            &merw.kernel,
            green,
            config.sigma,
            &dist,
            &roots,
        )?)),
        LoopRule::Iid { .. } => None,
    };

    Ok(SizeRecord {
        n,
        seed,
        rho_n,
        lambda2_n: lambda2,
        margin: d as f64 - lambda2 - config.sigma,
        tv_mean: mean(&stats.tv_to_srw),
        tv_p95: quantile(&stats.tv_to_srw, 0.95),
        tv2_mean: mean(&stats.tv2_to_srw),
        energy_median: quantile(&stats.energy, 0.5),
        energy_iqr: quantile(&stats.energy, 0.75) - quantile(&stats.energy, 0.25),
        predicted_rho: predicted,
        tv_urw_mean,
        rayleigh_slack: (rho_n - d as f64) - config.sigma * support.len() as f64 / n as f64,
        loops: support.len(),
        far_roots: roots.len(),
        far_edges: edges.len(),
    })
}

/// Row TV between `kernel` and the tree URW of the rank-one model at the
/// same distance from the loop, over roots with one neighbor closer to the
/// loop and none at the same distance.
fn tv_to_rank_one(
    graph: &WeightedGraph,
    kernel: &MarkovKernel,
    green: &GreenFunction,
    sigma: f64,
    dist: &[usize],
    roots: &[usize],
) -> Result<Vec<f64>> {
    let urw = urw_rank1(green, sigma)?;
    roots
        .iter()
        .filter(|&&x| {
            let k = dist[x];
            graph.neighbors(x).iter().filter(|&&y| dist[y] < k).count() == 1
                && graph.neighbors(x).iter().all(|&y| dist[y] != k)
        })
        .map(|&x| {
            let k = dist[x];
            let row = urw.row(&Site::Shell(k))?;
            let up = row.prob_to(&Site::Shell(k - 1)).unwrap_or(0.0);
            let down = row.prob_to(&Site::Shell(k + 1)).unwrap_or(0.0);
            Ok(0.5
                * graph
                    .neighbors(x)
                    .iter()
                    .map(|&y| (kernel.prob(x, y) - if dist[y] < k { up } else { down }).abs())
                    .sum::<f64>())
        })
        .collect()
}

/// CSV header for [`SizeRecord`] rows.
pub const CSV_COLUMNS: &[&str] = &[
    "n",
    "seed",
    "rho_n",
    "lambda2_n",
    "margin",
    "tv_mean",
    "tv_p95",
    "energy_median",
    "energy_iqr",
    "predicted_rho",
    "tv2_mean",
    "tv_urw_mean",
    "rayleigh_slack",
    "far_roots",
];
