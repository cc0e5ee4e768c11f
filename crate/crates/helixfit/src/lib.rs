//! Shell distributions and helix axis estimation.
//!
//! This crate fits the Mardia-Holmes (M-H) family of shell distributions —
//! densities concentrated near the boundary of a circle, ellipse, or
//! ellipsoid — and estimates the axis of noisy 3-D helix data by nested
//! maximum likelihood:
//!
//! - [`specfun`] — normal CDF, parabolic cylinder function `U(a, z)`, and the
//!   radial normalizing integral `b(κ)`.
//! - [`optim`] — a deterministic Nelder-Mead simplex minimizer.
//! - [`helix`] — the generative helix model, orthonormal frames, and the
//!   stereographic parameterization of candidate axes.
//! - [`mh2d`] — the planar M-H model: log-density, initial estimates, and
//!   maximum-likelihood circle/ellipse fits.
//! - [`axisfit`] — axis estimation by maximizing the profile likelihood
//!   `MLL(w)` over stereographic coordinates, plus PCA and least-squares
//!   (OptLS-style) baselines.
//! - [`mvmh`] — the d-dimensional M-H model for ellipsoid and cylinder fits.
//! - [`simlab`] — seeded replicate benchmarks comparing axis estimators.
//! - [`io`] — CSV/PDB point-cloud ingestion and fit reports.

pub mod axisfit;
pub mod cli;
pub mod helix;
pub mod io;
pub mod mh2d;
pub mod mvmh;
pub mod optim;
pub mod simlab;
pub mod specfun;

pub use axisfit::{estimate_axis_mh, init_axis_pca, mll_given_axis, optls_fit, AxisFit, HelixFit};
pub use helix::{
    angle_between_axes, frame_from_axis, simulate_helix, stereographic_to_axis, HelixParams,
    PointCloud,
};
pub use mh2d::{fit_circle, fit_ellipse, init_circle, MhCircleParams, MhEllipseParams, MhFit};
pub use mvmh::{mvmh_fit, mvmh_logpdf, MvMhFit, MvMhParams};
pub use optim::{minimize, OptOptions, OptResult};
pub use simlab::{mse_axis, run_benchmark, BenchConfig, BenchRow, Estimator};
pub use specfun::{b_kappa, pcf_u, std_normal_cdf, BKappaMethod, QuadratureSpec};
