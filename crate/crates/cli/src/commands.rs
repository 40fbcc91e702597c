use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use merw_core::bs_lab::CSV_COLUMNS;
use merw_core::canopy::{canopy_ratio, simulate_canopy_seeds, stationary_partial_sums};
use merw_core::entropy::kl_gap;
use merw_core::rank_one::{sweep, urw_rank1, Regime};
use merw_core::spectral::{
    merw_from_pair, principal_pair, reversibility_defect, second_eigenvalue_from,
};
use merw_core::{
    classify_phase, doob_check, generate, perturb_loops, read_edge_list, sequence_experiment,
    thresholds, urw_series, walk_entropy, BallTruncation, Error, GreenFunction, LoopSpec,
    MarkovKernel, RankOneModel, Result, SequenceConfig, Site, WeightedGraph,
};
use rayon::prelude::*;

use crate::args::*;
use crate::output::{Cell, Table};

fn load_graph(model: &str, input: Option<&Path>) -> Result<WeightedGraph> {
    match input {
        Some(path) => read_edge_list(BufReader::new(File::open(path)?)),
        None => generate(&parse_family(model)?),
    }
}

fn with_loop(graph: WeightedGraph, site: usize, sigma: f64) -> Result<WeightedGraph> {
    if sigma == 0.0 {
        return Ok(graph);
    }
    perturb_loops(&graph, &LoopSpec::single(site, sigma)?)
}

pub fn merw(a: &MerwArgs) -> Result<Table> {
    let graph = with_loop(
        load_graph(&a.graph.model, a.graph.input.as_deref())?,
        a.site,
        a.sigma,
    )?;
    let pair = principal_pair(&graph, a.tol)?;
    let spectral = if graph.vertex_count() > 1 {
        Some(second_eigenvalue_from(&graph, &pair, a.tol.max(1e-10))?)
    } else {
        None
    };
    let report = merw_from_pair(&graph, pair);
    let doob = doob_check(&graph, &report.kernel, 4, 64, 0)?;
    let mut t = Table::new(&["x", "f", "pi", "degree"]);
    t.summary("vertices", graph.vertex_count())
        .summary("rho", report.rho())
        .summary("lambda2", spectral.map(|s| s.lambda2))
        .summary("gap", spectral.map(|s| s.gap))
        .summary("ks_entropy", report.ks_entropy)
        .summary("log_rho", report.rho().ln())
        .summary("max_row_sum_error", report.kernel.max_row_sum_error())
        .summary(
            "reversibility_defect",
            reversibility_defect(&graph, &report.kernel, &report.pi),
        )
        .summary("doob_energy", doob.energy)
        .summary("doob_energy_spread", doob.energy_spread)
        .summary("doob_bridge_discrepancy", doob.max_bridge_discrepancy);
    for x in 0..graph.vertex_count() {
        t.push(vec![
            x.into(),
            report.principal.f[x].into(),
            report.pi[x].into(),
            graph.degree(x).into(),
        ]);
    }
    Ok(t)
}

pub fn urw_ball(a: &UrwBallArgs) -> Result<Table> {
    if a.n < 2 {
        return Err(Error::InvalidParameter("walk length must be >= 2".into()));
    }
    let (ball, root) = match a.model {
        BallModel::Tree => {
            let level = a.level.unwrap_or(0);
            let ball = BallTruncation::tree(a.d, a.radius.unwrap_or(level + a.n))?
                .with_center_loop(a.sigma)?;
            let root = ball.shell_index(level)?;
            (ball, root)
        }
        BallModel::Lattice => {
            if a.level.is_some() {
                return Err(Error::InvalidParameter(
                    "lattice balls are rooted at the origin".into(),
                ));
            }
            let ball = BallTruncation::lattice(a.dim, a.radius.unwrap_or(a.n))?
                .with_center_loop(a.sigma)?;
            let root = ball.center();
            (ball, root)
        }
        BallModel::Canopy => {
            if a.sigma != 0.0 {
                return Err(Error::InvalidParameter(
                    "the canopy ball takes no loop".into(),
                ));
            }
            let level = a.level.unwrap_or(1);
            let ball = BallTruncation::canopy(a.d, a.radius.unwrap_or(level + a.n))?;
            let root = ball.shell_index(level)?;
            (ball, root)
        }
    };
    let series = urw_series(&ball, root, a.n)?;
    let mut t = Table::new(&[
        "n",
        "neighbor",
        "neighbor_depth",
        "multiplicity",
        "weight",
        "ratio_raw",
        "ratio_prev",
        "ratio_parity_avg",
        "cauchy_delta",
    ]);
    let last = series.last().expect("series is non-empty for n >= 2");
    t.summary("root", root)
        .summary("root_depth", ball.depth(root))
        .summary("radius", ball.radius())
        .summary("row_sum", last.row_sum());
    let shown = if a.series {
        &series[..]
    } else {
        std::slice::from_ref(last)
    };
    for est in shown {
        for e in &est.entries {
            t.push(vec![
                est.n.into(),
                e.neighbor.into(),
                ball.depth(e.neighbor).into(),
                (e.multiplicity as usize).into(),
                e.weight.into(),
                e.ratio_raw.into(),
                e.ratio_prev.into(),
                e.ratio_parity_avg.into(),
                e.cauchy_delta.into(),
            ]);
        }
    }
    Ok(t)
}

pub fn rank_one(a: &RankOneArgs) -> Result<Table> {
    let model = match a.model {
        RankOneKind::Tree => RankOneModel::Tree { d: a.d },
        RankOneKind::Lattice => RankOneModel::Lattice { dim: a.dim },
        RankOneKind::Finite => RankOneModel::Finite {
            graph: load_graph(&a.graph, a.input.as_deref())?,
            root: a.site,
        },
    };
    let green = GreenFunction::with_terms(model, a.terms)?;
    let sigmas = match (&a.sigma, &a.sigma_grid) {
        (Some(s), None) => vec![*s],
        (None, Some(g)) => parse_grid(g)?,
        _ => {
            return Err(Error::InvalidParameter(
                "give one of --sigma or --sigma-grid".into(),
            ))
        }
    };
    let th = thresholds(&green)?;
    let mut t = Table::new(&["sigma", "rho_sigma", "r_sigma", "phase"]);
    t.summary("model_label", green.model().label())
        .summary("base_rate", green.base_rate())
        .summary("l2_radius", green.l2_radius())
        .summary("sigma_star", th.sigma_star)
        .summary("sigma_l2", th.sigma_l2);
    let reports = if sigmas.len() == 1 {
        let r = classify_phase(&green, sigmas[0])?;
        if let Some(ratio) = r
            .stationary_profile
            .as_ref()
            .and_then(|p| p.per_vertex_ratio)
        {
            t.summary("stationary_ratio", ratio);
        }
        if let RankOneModel::Tree { .. } = green.model() {
            let urw = urw_rank1(&green, sigmas[0])?;
            if let Regime::Transient { s, .. } | Regime::Localized { rho: s } = urw.regime() {
                t.summary("regime_parameter", s);
            }
            let row = urw.row(&Site::Shell(0))?;
            for e in &row.entries {
                t.summary(&format!("u_o_{}", e.target), e.prob);
            }
        }
        vec![r]
    } else {
        sweep(&green, &sigmas)?
    };
    for r in reports {
        t.push(vec![
            r.sigma.into(),
            r.rho_sigma.into(),
            r.r_sigma.into(),
            r.phase.as_str().into(),
        ]);
    }
    Ok(t)
}

pub fn canopy(a: &CanopyArgs) -> Result<Table> {
    let seeds = parse_seeds(&a.seeds)?;
    let runs = simulate_canopy_seeds(a.d, a.steps, &seeds)?;
    let sums = stationary_partial_sums(a.d)?;
    let mut t = Table::new(&[
        "seed",
        "steps",
        "up_frequency",
        "entropy_rate_mc",
        "final_level",
        "displacement_over_sqrt_n",
    ]);
    let rho = 2.0 * ((a.d - 1) as f64).sqrt();
    t.summary("rho", rho)
        .summary("log_rho", rho.ln())
        .summary("stationary_sum_levels", sums.max_level)
        .summary(
            "stationary_sum_last",
            sums.partial_sums.last().copied().unwrap_or(f64::NAN),
        );
    if let Some(n) = a.n {
        let r = canopy_ratio(a.d, a.level, n)?;
        t.summary("ratio_level", r.level)
            .summary("ratio_n", r.n)
            .summary("up_ratio", r.up_ratio)
            .summary("down_ratio", r.down_ratio)
            .summary("up_parity_avg", r.up_parity_avg)
            .summary("down_parity_avg", r.down_parity_avg);
    }
    for r in runs {
        t.push(vec![
            r.seed.into(),
            r.steps.into(),
            r.up_frequency.into(),
            r.entropy_rate_mc.into(),
            r.final_level.into(),
            r.displacement_over_sqrt_n.into(),
        ]);
    }
    Ok(t)
}

fn build_kernel(
    spec: &str,
    graph: &WeightedGraph,
    reference: &merw_core::MerwReport,
) -> Result<MarkovKernel> {
    match spec {
        "srw" => Ok(MarkovKernel::srw(graph)),
        "merw" => Ok(reference.kernel.clone()),
        _ => match spec.strip_prefix("random:").map(str::parse::<u64>) {
            Some(Ok(seed)) => Ok(MarkovKernel::random(graph, seed)),
            _ => Err(Error::InvalidParameter(format!(
                "kernel must be srw, merw or random:SEED, got '{spec}'"
            ))),
        },
    }
}

pub fn entropy(a: &EntropyArgs) -> Result<Table> {
    let graph = load_graph(&a.graph.model, a.graph.input.as_deref())?;
    let reference = merw_from_pair(&graph, principal_pair(&graph, a.tol)?);
    let kernel = build_kernel(&a.kernel, &graph, &reference)?;
    let report = walk_entropy(&graph, &kernel, a.n)?;
    let gap = kl_gap(&graph, &kernel, &reference)?;
    let mut t = Table::new(&["x", "entropy", "rate", "increment", "h_top"]);
    t.summary("kl_gap", gap.value)
        .summary("log_rho", reference.rho().ln())
        .summary("jensen_min_slack", report.jensen_min_slack)
        .summary("recursion_residual", report.recursion_residual);
    for x in 0..graph.vertex_count() {
        t.push(vec![
            x.into(),
            report.per_vertex_entropy[x].into(),
            report.rate[x].into(),
            report.increment[x].into(),
            report.h_top[x].into(),
        ]);
    }
    Ok(t)
}

pub fn bs_experiment(a: &BsArgs) -> Result<Table> {
    let mut cfg = SequenceConfig::new(
        a.d,
        parse_sizes(&a.sizes)?,
        parse_omega(&a.omega)?,
        a.sigma,
        parse_seeds(&a.seeds)?,
    );
    cfg.tol = a.tol;
    let report = sequence_experiment(&cfg)?;
    let mut t = Table::new(CSV_COLUMNS);
    t.summary(
        "local_metric",
        "row TV and two-step TV to SRW at far roots (surrogate)",
    );
    for s in report.by_size() {
        t.summary(&format!("tv_mean_n{}", s.n), s.tv_mean);
    }
    for r in &report.records {
        t.push(vec![
            r.n.into(),
            r.seed.into(),
            r.rho_n.into(),
            r.lambda2_n.into(),
            r.margin.into(),
            r.tv_mean.into(),
            r.tv_p95.into(),
            r.energy_median.into(),
            r.energy_iqr.into(),
            r.predicted_rho.into(),
            r.tv2_mean.into(),
            r.tv_urw_mean.into(),
            r.rayleigh_slack.into(),
            r.far_roots.into(),
        ]);
    }
    Ok(t)
}

pub fn sweep_loops(a: &SweepArgs) -> Result<Table> {
    let base = load_graph(&a.model, a.input.as_deref())?;
    base.check_vertex(a.site)?;
    let sigmas = parse_grid(&a.sigma_grid)?;
    let rows = sigmas
        .par_iter()
        .map(|&sigma| {
            let g = with_loop(base.clone(), a.site, sigma)?;
            let pair = principal_pair(&g, a.tol)?;
            let spectral = second_eigenvalue_from(&g, &pair, a.tol.max(1e-10))?;
            let report = merw_from_pair(&g, pair);
            Ok(vec![
                Cell::from(sigma),
                report.rho().into(),
                spectral.lambda2.into(),
                spectral.gap.into(),
                report.ks_entropy.into(),
                report.pi[a.site].into(),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&["sigma", "rho", "lambda2", "gap", "ks_entropy", "pi_site"]);
    t.summary("vertices", base.vertex_count());
    for r in rows {
        t.push(r);
    }
    Ok(t)
}
