//! Contour theory of one-dimensional long-range Ising models.
//!
//! Spin configurations with plus boundary conditions map bijectively to
//! compatible triangle configurations; triangles group into contours,
//! contours encode into trees, and the resulting bounds are checked by
//! exhaustive enumeration and Metropolis sampling.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod contour;
pub mod entropy;
pub mod enumerate;
pub mod error;
pub mod exact;
pub mod model;
pub mod sampler;
pub mod squares;
pub mod tree;
pub mod triangle;
mod union_find;

pub use bounds::{
    alpha_plus, convexity_check, h_alpha, peierls_beta_threshold, peierls_series_bound, walpha_scan, zeta_alpha,
    zeta_alpha_raw, ConvexityReport, HAlpha, SeriesBound, WScanReport,
};
pub use contour::{
    contour_weight, decompose, decompose_random_order, peierls_check, peierls_check_all, verify_c, weight_bound_check,
    Contour, ContourPartition, PeierlsParams, PeierlsReport, SeparationSum, WeightBoundReport, DEFAULT_C,
};
pub use entropy::{entropy_census, enumerate_g, EntropyCensus, EntropyReport};
pub use error::{Error, Result};
pub use model::{
    conditional_energy, coupling, relative_energy, tail_sum, CouplingTable, ModelParams, SpinConfiguration, Window,
};
pub use sampler::{
    contour_event_estimate, run_chain, run_chain_observed, ChainSummary, ContourEventSummary, Estimate, SamplerConfig,
};
pub use squares::{
    arrow_lemma_checks, run_square_process, squares_init, step, Arrow, ArrowKind, ArrowLemmaReport, Square,
    SquareProcessTrace, StepOutcome,
};
pub use tree::{extract_tree, validate_tree_constraints, ContourTree, NodeKind, TreeNode, TreeReport, TreeViolation};
pub use triangle::{
    build_triangles, check_compatibility, interface_points, spins_from_triangles, tri_dist, w_kernel, InterfaceList,
    Triangle, TriangleConfiguration, WKernel,
};
