//! Maximal-entropy and ratio-limit random walks on graphs with loop
//! perturbations: exact walk counting, spectral MERW, rank-one Green
//! function analysis, the canopy tree, entropy accounting and random
//! regular graph experiments.

pub mod bs_lab;
pub mod canopy;
pub mod entropy;
pub mod error;
pub mod graph;
pub mod kernel;
pub mod rank_one;
pub mod spectral;
pub mod truncation;
pub mod walkcounts;

pub use bs_lab::{
    local_stats, sequence_experiment, LocalStats, LoopRule, SequenceConfig, SequenceReport,
    SizeRecord,
};
pub use canopy::{
    canopy_kernel, canopy_ratio, simulate_canopy, CanopyKernel, CanopyRatio, CanopyTrajectory,
    LevelOperator,
};
pub use entropy::{
    kl_gap, stationary_measure, topological_entropy, walk_entropy, EntropyReport, EntropySummary,
    KlGap,
};
pub use error::{Error, Result};
pub use graph::{
    generate, perturb_loops, read_edge_list, write_edge_list, Adjacency, Family, GraphBuilder,
    Labels, LoopSpec, WeightedGraph,
};
pub use kernel::{MarkovKernel, WalkKind};
pub use rank_one::{
    classify_phase, r_sigma, rho_sigma, thresholds, urw_rank1, GreenFunction, Phase, PhaseReport,
    RankOneModel, Site,
};
pub use spectral::{
    merw, principal_pair, second_eigenvalue, MerwReport, MerwSummary, PrincipalPair, SpectralReport,
};
pub use truncation::{BallTruncation, NeighborClass, TruncationModel};
pub use walkcounts::{
    bridge_weight, doob_check, urw_estimate, urw_series, walk_counts, walk_counts_truncated,
    DoobReport, UrwEstimate, WalkCountVector,
};
