//! Low-rank computation of time-marginal distributions of structured
//! continuous-time Markov chains.
//!
//! The chain is given as a network of interacting automata whose
//! transition rates factor over the automata. The generator then has a
//! short Kronecker-product representation, and the marginal distribution
//! of the state observed at an exponentially distributed time solves a
//! linear system that a normalized, truncated fixed-point iteration can
//! approximate entirely in a hierarchical low-rank tensor format.
//!
//! Modules:
//! - [`tree`]: binary dimension trees;
//! - [`cp`]: Kronecker-structured tensors and operators;
//! - [`san`]: automata-network models, generators and rate bounds;
//! - [`dense`]: exact dense reference computations for small models;
//! - [`ht`]: hierarchical low-rank tensor arithmetic and truncation;
//! - [`solver`]: the normalized low-rank fixed-point iteration;
//! - [`experiments`]: parameter sampling and reproducible studies.

pub mod cp;
pub mod dense;
pub mod error;
pub mod experiments;
pub mod ht;
pub mod san;
pub mod solver;
pub mod tree;

pub use cp::{CpOperator, CpTensor};
pub use dense::{
    dense_eigenvalues_q_minus_id, dense_generator, dense_marginal, from_matricization, matricize,
    max_diagonal_magnitude, singular_values, tree_singular_values, DenseTensor, DENSE_CAP,
};
pub use error::{Error, Result};
pub use experiments::{
    derive_seed, run_convergence_study, run_rank_study, run_sv_study, run_truncation_study,
    sample_block_parameters, write_conv_csv, write_rank_csv, write_sv_csv, write_trunc_csv,
    BlockSamplerConfig, ConvergenceStudy, RankRecord, RankStudy, SvStudyRow, TruncationRecord,
};
pub use ht::{apply_cp_operator, HtTensor};
pub use san::{
    build_cp_generator, build_identity, build_initial, build_ones, diagonal_spectrum, from_mhn,
    gamma_bound, mhn_gamma, model_from_json, validate_model, MhnParams, ModelFile, SanModel,
    Transition,
};
pub use solver::{
    convergence_bound, low_rank_uniformization, low_rank_uniformization_observed,
    relative_residual, IterationState, SolverConfig, SolverReport,
};
pub use tree::DimensionTree;
