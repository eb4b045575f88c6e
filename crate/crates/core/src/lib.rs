//! Sparse–smooth spatially varying coefficient quantile regression.
//!
//! Each varying coefficient is split into a global value and a degree-weight centered
//! deviation field over a k-NN graph of the sampling locations. Fields are selected by
//! an adaptive group lasso and smoothed by the normalized graph Laplacian. Two solvers
//! are provided: ADMM (the default) and a Moreau-smoothed accelerated proximal gradient.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod cg;
pub mod error;
pub mod fit;
pub mod graph;
pub mod inference;
pub mod loss;
pub mod model;
pub mod simulation;
pub mod sparse;
pub mod spg;
pub mod tuning;

pub use admm::{fit_admm, fit_global_qr, AdmmConfig, AdmmSolver, AdmmState};
pub use error::{Error, Result};
pub use fit::{predict_transfer, transfer_fields, FitResult, SolverKind};
pub use graph::{build_graph, Bandwidth, CoordinateScaling, Location, SpatialGraph};
pub use inference::{kkt_residual, morans_i, pseudo_r2, sandwich, KdeBandwidth, SandwichEstimate};
pub use model::{objective, predict_quantile, residuals, ParameterState, PenaltyConfig, SpatialDataset};
pub use simulation::{generate_dataset, run_monte_carlo, DgpConfig, ErrorLaw, McConfig, SimulatedData};
pub use spg::{fit_spg, SpgConfig};
pub use tuning::{cross_validate, fit_pipeline, lambda_anchors, make_spatial_folds, CvPlan, CvResult, LambdaGrid, PipelineConfig, PipelineFit};
