use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use merw_core::{Error, Family, LoopRule, Result};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "merwlab",
    version,
    about = "Maximal-entropy and ratio-limit random walk experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true, env = "MERWLAB_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// MERW of a finite graph, optionally with one loop.
    Merw(MerwArgs),
    /// Walk-count ratios on an exact ball of the tree, lattice or canopy tree.
    UrwBall(UrwBallArgs),
    /// Thresholds, growth rates and phases of a rank-one loop perturbation.
    RankOne(RankOneArgs),
    /// Canopy tree trajectories and walk-count ratios.
    Canopy(CanopyArgs),
    /// Walk entropy, topological entropy and the KL gap to the MERW.
    Entropy(EntropyArgs),
    /// Loop-perturbed random regular graph sequences.
    BsExperiment(BsArgs),
    /// MERW of a finite graph across a grid of loop weights.
    Sweep(SweepArgs),
}

/// Graph source shared by the finite-graph commands.
#[derive(Debug, Clone, Args, Serialize)]
pub struct GraphArgs {
    /// cycle:N, path:N, complete:N, petersen, random-regular:N:D[:SEED],
    /// random-connected:N:P:MAXW[:SEED], tree-ball:D:R, lattice-box:DIM:W, canopy:D:LEVELS
    #[arg(long, default_value = "petersen")]
    pub model: String,
    /// Edge list file; overrides --model.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MerwArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArgs,
    /// Loop weight added at --site.
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub site: usize,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BallModel {
    Tree,
    Lattice,
    Canopy,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct UrwBallArgs {
    #[arg(long, value_enum, default_value_t = BallModel::Tree)]
    pub model: BallModel,
    #[arg(long, default_value_t = 4)]
    pub d: usize,
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    /// Loop weight at the center (tree and lattice).
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    /// Walk length.
    #[arg(long, default_value_t = 60)]
    pub n: usize,
    /// Shell (tree) or level (canopy) of the root; the center by default.
    #[arg(long)]
    pub level: Option<usize>,
    /// Truncation radius; defaults to the smallest exact one.
    #[arg(long)]
    pub radius: Option<usize>,
    /// Emit every walk length from 2 to n.
    #[arg(long)]
    pub series: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RankOneKind {
    Tree,
    Lattice,
    Finite,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RankOneArgs {
    #[arg(long, value_enum, default_value_t = RankOneKind::Tree)]
    pub model: RankOneKind,
    #[arg(long, default_value_t = 4)]
    pub d: usize,
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    /// Graph for the finite model, as in `merw --model`.
    #[arg(long, default_value = "petersen")]
    pub graph: String,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub site: usize,
    #[arg(long, conflicts_with = "sigma_grid")]
    pub sigma: Option<f64>,
    /// start:stop:step, inclusive.
    #[arg(long)]
    pub sigma_grid: Option<String>,
    /// Lattice series length.
    #[arg(long, default_value_t = 10_000)]
    pub terms: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CanopyArgs {
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub steps: usize,
    /// A seed count (`8` means 0..8) or a comma list (`3,7,11`).
    #[arg(long, default_value = "8")]
    pub seeds: String,
    /// Also report the walk-count ratio at --level for this walk length.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub level: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EntropyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub graph: GraphArgs,
    /// srw, merw or random:SEED.
    #[arg(long, default_value = "srw")]
    pub kernel: String,
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BsArgs {
    #[arg(long, default_value_t = 4)]
    pub d: usize,
    /// Comma list of graph sizes.
    #[arg(long, default_value = "500,1000,2000,4000")]
    pub sizes: String,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// single or iid:P.
    #[arg(long, default_value = "single")]
    pub omega: String,
    #[arg(long, default_value = "4")]
    pub seeds: String,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long, default_value = "random-regular:1000:4:0")]
    pub model: String,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub site: usize,
    #[arg(long, default_value = "0:6:0.5")]
    pub sigma_grid: String,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

fn invalid(msg: String) -> Error {
    Error::InvalidParameter(msg)
}

/// Inclusive grid `start:stop:step`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, h] = parts.as_slice() else {
        return Err(invalid(format!("grid must be start:stop:step, got '{s}'")));
    };
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| invalid(format!("bad number '{t}' in grid '{s}'")))
    };
    let (start, stop, step) = (num(a)?, num(b)?, num(h)?);
    if !(step > 0.0 && step.is_finite() && start.is_finite() && stop >= start) {
        return Err(invalid(format!(
            "grid '{s}' must have step > 0 and stop >= start"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| start + k as f64 * step).collect())
}

/// `8` means seeds 0..8; anything with a comma is an explicit list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = |t: &str| invalid(format!("bad seed '{t}'"));
    if s.contains(',') {
        s.split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| t.trim().parse::<u64>().map_err(|_| bad(t)))
            .collect()
    } else {
        let count = s.trim().parse::<u64>().map_err(|_| bad(s))?;
        if count == 0 {
            return Err(invalid("seed count must be positive".into()));
        }
        Ok((0..count).collect())
    }
}

pub fn parse_sizes(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| invalid(format!("bad size '{t}'")))
        })
        .collect()
}

pub fn parse_omega(s: &str) -> Result<LoopRule> {
    s.parse()
}

/// Graph family from `name:arg:arg...`.
pub fn parse_family(s: &str) -> Result<Family> {
    let mut it = s.split(':');
    let name = it.next().unwrap_or_default();
    let args: Vec<&str> = it.collect();
    let int = |i: usize| -> Result<usize> {
        args.get(i)
            .ok_or_else(|| invalid(format!("'{s}' is missing argument {}", i + 1)))?
            .parse()
            .map_err(|_| invalid(format!("bad integer in '{s}'")))
    };
    let seed = |i: usize| -> Result<u64> {
        args.get(i).map_or(Ok(0), |t| {
            t.parse().map_err(|_| invalid(format!("bad seed in '{s}'")))
        })
    };
    let arity = |n: usize, opt: usize| {
        if args.len() < n || args.len() > n + opt {
            Err(invalid(format!("'{name}' takes {n} arguments, got '{s}'")))
        } else {
            Ok(())
        }
    };
    let family = match name {
        "cycle" => {
            arity(1, 0)?;
            Family::Cycle { n: int(0)? }
        }
        "path" => {
            arity(1, 0)?;
            Family::Path { n: int(0)? }
        }
        "complete" => {
            arity(1, 0)?;
            Family::Complete { n: int(0)? }
        }
        "petersen" => {
            arity(0, 0)?;
            Family::Petersen
        }
        "random-regular" => {
            arity(2, 1)?;
            Family::RandomRegular {
                n: int(0)?,
                d: int(1)?,
                seed: seed(2)?,
            }
        }
        "random-connected" => {
            arity(3, 1)?;
            let p: f64 = args[1]
                .parse()
                .map_err(|_| invalid(format!("bad probability in '{s}'")))?;
            Family::RandomConnected {
                n: int(0)?,
                p,
                max_weight: int(2)? as u32,
                seed: seed(3)?,
            }
        }
        "tree-ball" => {
            arity(2, 0)?;
            Family::TreeBall {
                d: int(0)?,
                radius: int(1)?,
            }
        }
        "lattice-box" => {
            arity(2, 0)?;
            Family::LatticeBox {
                dim: int(0)?,
                half_width: int(1)?,
            }
        }
        "canopy" => {
            arity(2, 0)?;
            Family::CanopyTrunc {
                d: int(0)?,
                levels: int(1)?,
            }
        }
        _ => return Err(invalid(format!("unknown graph model '{s}'"))),
    };
    Ok(family)
}

/// Config entries echoing a serializable argument struct.
pub fn echo<T: Serialize>(command: &str, args: &T) -> Vec<(String, serde_json::Value)> {
    let mut out = vec![
        ("command".to_string(), command.into()),
        ("version".to_string(), env!("CARGO_PKG_VERSION").into()),
    ];
    if let Ok(serde_json::Value::Object(map)) = serde_json::to_value(args) {
        out.extend(map);
    }
    out
}
