// SPDX-License-Identifier: MIT OR Apache-2.0

//! High-dimensional mean-changepoint estimation by sparse projection.
//!
//! The estimator finds a sparse direction that aligns with the vector of
//! mean changes by solving a convex relaxation over the CUSUM transformation
//! of the data, projects the series onto that direction, and locates
//! changepoints at the peaks of the projected CUSUM statistic. Multiple
//! changepoints are found by wild binary segmentation over random time
//! windows; variants handle cross-sectionally dependent noise.
//!
//! Module map:
//! - [`cusum`]: data matrices, the CUSUM transformation, piecewise-mean
//!   ground truth descriptions;
//! - [`projection`]: soft-thresholding, simplex and nuclear-ball
//!   projections, the ADMM and closed-form solvers, power iteration, and a
//!   brute-force sparse oracle;
//! - [`single`]: robust noise normalisation and the single-changepoint
//!   estimators (full-data and sample-splitting);
//! - [`wbs`]: wild binary segmentation and threshold calibration;
//! - [`spatial`]: precision-matrix fits and the precision-weighted detector
//!   for spatially dependent noise;
//! - [`simulate`]: seeded generators for the Gaussian model and its
//!   misspecified variants;
//! - [`metrics`]: Hausdorff, L1-Wasserstein and Adjusted Rand Index.

pub mod cusum;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod projection;
pub mod rng;
pub mod simulate;
pub mod single;
pub mod spatial;
pub mod wbs;

pub use cusum::{cusum_transform, gamma_vector, CusumMatrix, ObservationMatrix, PiecewiseMeanSpec};
pub use error::{Error, Result};
pub use metrics::{adjusted_rand_index, hausdorff, wasserstein1, Segmentation};
pub use projection::{
    admm_solve, brute_force_sparse_svd, closed_form_s2, leading_left_singular_vector,
    project_nuclear_ball, project_simplex, soft_threshold, ConstraintSet, LeadingVector,
    ProjectionSolution, SolveMethod, SolverConfig,
};
pub use simulate::{generate, overlap_signal, standard_signal, NoiseModel, Overlap, SimulatedData};
pub use single::{
    default_lambda, estimate_noise_mad, inspect_single, inspect_single_split, normalize,
    DetectionVariant, NoiseProfile, SingleDetection,
};
pub use spatial::{
    build_residuals, estimate_rho_global, estimate_rho_local, inspect_single_spatial,
    precision_global, precision_local, DependenceKind, DependenceModel, PrecisionEstimate,
    SpatialDetection,
};
pub use wbs::{
    calibrate_threshold, draw_intervals, inspect_wbs, CandidateRecord, InspectConfig,
    IntervalDraw, MultiDetection,
};
