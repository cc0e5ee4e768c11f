//! The planar Mardia-Holmes shell model.
//!
//! Density of a point `y` in the plane:
//!
//! ```text
//! f(y) = C(κ) |Σ|^{-1/2} exp{-½ κ [(y-a)ᵀ Σ⁻¹ (y-a) - 1]²},
//! C(κ) = (κ/2π)^{1/2} / (π Φ(√κ)),
//! ```
//!
//! concentrated near the ellipse `(y-a)ᵀΣ⁻¹(y-a) = 1`; `Σ = ρ²I₂` gives the
//! circle of radius `ρ`. Fitting is by maximum likelihood over the
//! unconstrained parameters `(a, τ = log ρ, η = log κ)` (log-Cholesky factors
//! of `Σ` in the ellipse case), driven by the simplex minimizer.

use nalgebra::{Matrix2, Vector2};
use thiserror::Error;

use crate::optim::{self, OptOptions};
use crate::specfun::{self, SpecFunError};

/// Upper cap on fitted/initial concentration. Exact-shell data has an
/// unbounded likelihood in κ; the cap keeps such fits finite.
pub const KAPPA_CAP: f64 = 1e8;

/// Minimum points for a circle fit (4 free parameters).
pub const MIN_POINTS_CIRCLE: usize = 4;
/// Minimum points for an ellipse fit (6 free parameters).
pub const MIN_POINTS_ELLIPSE: usize = 6;

/// Errors from planar shell-model evaluation and fitting.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Mh2dError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("optimizer setup failed: {0}")]
    Optim(#[from] optim::OptimError),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
}

/// Circle-case parameters: center `a`, radius `rho`, concentration `kappa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MhCircleParams {
    pub a: Vector2<f64>,
    pub rho: f64,
    pub kappa: f64,
}

impl MhCircleParams {
    pub fn new(a: Vector2<f64>, rho: f64, kappa: f64) -> Result<Self, Mh2dError> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Mh2dError::Domain(format!("rho must be > 0, got {rho}")));
        }
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Mh2dError::Domain(format!("kappa must be > 0, got {kappa}")));
        }
        Ok(Self { a, rho, kappa })
    }

    /// Log-density at `y`.
    pub fn logpdf(&self, y: &Vector2<f64>) -> f64 {
        let q = (y - self.a).norm_squared() / (self.rho * self.rho);
        log_norm_const_unchecked(self.kappa) - 2.0 * self.rho.ln()
            - 0.5 * self.kappa * (q - 1.0) * (q - 1.0)
    }

    /// Summed log-likelihood of a dataset.
    pub fn log_likelihood(&self, data: &[Vector2<f64>]) -> f64 {
        data.iter().map(|y| self.logpdf(y)).sum()
    }
}

/// Ellipse-case parameters: center `a`, shape `sigma` (SPD), concentration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MhEllipseParams {
    pub a: Vector2<f64>,
    pub sigma: Matrix2<f64>,
    pub kappa: f64,
}

impl MhEllipseParams {
    pub fn new(a: Vector2<f64>, sigma: Matrix2<f64>, kappa: f64) -> Result<Self, Mh2dError> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Mh2dError::Domain(format!("kappa must be > 0, got {kappa}")));
        }
        if (sigma.m12 - sigma.m21).abs() > 1e-12 {
            return Err(Mh2dError::Domain("sigma must be symmetric".into()));
        }
        let det = sigma.determinant();
        if !(det > 0.0) || !(sigma.m11 > 0.0) {
            return Err(Mh2dError::Domain(
                "sigma must be positive definite".into(),
            ));
        }
        Ok(Self { a, sigma, kappa })
    }

    /// Log-density at `y`.
    pub fn logpdf(&self, y: &Vector2<f64>) -> f64 {
        let d = y - self.a;
        let det = self.sigma.determinant();
        let inv = Matrix2::new(self.sigma.m22, -self.sigma.m12, -self.sigma.m21, self.sigma.m11)
            / det;
        let q = d.dot(&(inv * d));
        log_norm_const_unchecked(self.kappa) - 0.5 * det.ln()
            - 0.5 * self.kappa * (q - 1.0) * (q - 1.0)
    }

    pub fn log_likelihood(&self, data: &[Vector2<f64>]) -> f64 {
        data.iter().map(|y| self.logpdf(y)).sum()
    }

    /// Eigenvalues of `sigma`, descending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let eig = nalgebra::SymmetricEigen::new(self.sigma);
        let (a, b) = (eig.eigenvalues[0], eig.eigenvalues[1]);
        if a >= b {
            [a, b]
        } else {
            [b, a]
        }
    }
}

/// A completed maximum-likelihood fit.
#[derive(Debug, Clone, PartialEq)]
pub struct MhFit<P> {
    /// Fitted parameters.
    pub params: P,
    /// Maximized log-likelihood, summed over observations and recomputed at
    /// `params`.
    pub mll: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Initial values the optimizer started from.
    pub init: P,
}

/// `log C(κ)` for the planar model; errors on `κ ≤ 0`.
pub fn mh_log_norm_const(kappa: f64) -> Result<f64, Mh2dError> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Mh2dError::Domain(format!(
            "normalizing constant requires kappa > 0, got {kappa}"
        )));
    }
    Ok(log_norm_const_unchecked(kappa))
}

fn log_norm_const_unchecked(kappa: f64) -> f64 {
    let phi = 0.5 * specfun_erfc_scaled(kappa.sqrt());
    0.5 * (kappa / (2.0 * std::f64::consts::PI)).ln() - std::f64::consts::PI.ln() - phi.ln()
}

/// `2·Φ(√κ)` without the Result plumbing; √κ is finite and positive here.
fn specfun_erfc_scaled(sqrt_kappa: f64) -> f64 {
    2.0 * specfun::std_normal_cdf(sqrt_kappa).expect("finite argument")
}

fn check_data(data: &[Vector2<f64>], needed: usize) -> Result<(), Mh2dError> {
    if data.len() < needed {
        return Err(Mh2dError::TooFewPoints {
            needed,
            got: data.len(),
        });
    }
    if data
        .iter()
        .any(|y| !(y.x.is_finite() && y.y.is_finite()))
    {
        return Err(Mh2dError::Domain("data contains non-finite points".into()));
    }
    Ok(())
}

/// Moment-style initial estimates for the circle fit: center = data mean,
/// radius = mean distance to the center, concentration = reciprocal sample
/// variance (n-1 divisor) of the radial distances, capped at [`KAPPA_CAP`].
pub fn init_circle(data: &[Vector2<f64>]) -> Result<MhCircleParams, Mh2dError> {
    check_data(data, MIN_POINTS_CIRCLE)?;
    let n = data.len() as f64;
    let mean = data.iter().sum::<Vector2<f64>>() / n;
    let radii: Vec<f64> = data.iter().map(|y| (y - mean).norm()).collect();
    let rho = radii.iter().sum::<f64>() / n;
    if rho < 1e-12 {
        return Err(Mh2dError::Degenerate(
            "all points coincide with their mean".into(),
        ));
    }
    let var = radii.iter().map(|r| (r - rho) * (r - rho)).sum::<f64>() / (n - 1.0);
    let kappa = if var > 0.0 {
        (1.0 / var).min(KAPPA_CAP)
    } else {
        KAPPA_CAP
    };
    MhCircleParams::new(mean, rho, kappa)
}

/// Maximum-likelihood circle fit over `(a₁, a₂, τ = log ρ, η = log κ)`.
///
/// `init` defaults to [`init_circle`]. Non-convergence is reported through
/// `converged`, not as an error.
pub fn fit_circle(
    data: &[Vector2<f64>],
    init: Option<MhCircleParams>,
    options: &OptOptions,
) -> Result<MhFit<MhCircleParams>, Mh2dError> {
    check_data(data, MIN_POINTS_CIRCLE)?;
    let init = match init {
        Some(p) => p,
        None => init_circle(data)?,
    };
    let x0 = [
        init.a.x,
        init.a.y,
        init.rho.ln(),
        init.kappa.min(KAPPA_CAP).ln(),
    ];
    let objective = |x: &[f64]| -> f64 {
        let rho = x[2].exp();
        let kappa = x[3].exp().min(KAPPA_CAP);
        if !(rho > 0.0) || !rho.is_finite() || !(kappa > 0.0) {
            return f64::INFINITY;
        }
        let params = MhCircleParams {
            a: Vector2::new(x[0], x[1]),
            rho,
            kappa,
        };
        -params.log_likelihood(data)
    };
    let result = optim::minimize(objective, &x0, options)?;
    let params = MhCircleParams::new(
        Vector2::new(result.x_min[0], result.x_min[1]),
        result.x_min[2].exp(),
        result.x_min[3].exp().min(KAPPA_CAP),
    )?;
    let mll = params.log_likelihood(data);
    Ok(MhFit {
        params,
        mll,
        converged: result.converged,
        iterations: result.iterations,
        init,
    })
}

/// Maximum-likelihood ellipse fit over `(a, log-Cholesky of Σ, η = log κ)`.
///
/// `init` defaults to the circle fit inflated to `Σ = ρ̂² I₂`.
pub fn fit_ellipse(
    data: &[Vector2<f64>],
    init: Option<MhEllipseParams>,
    options: &OptOptions,
) -> Result<MhFit<MhEllipseParams>, Mh2dError> {
    check_data(data, MIN_POINTS_ELLIPSE)?;
    let init = match init {
        Some(p) => p,
        None => {
            let circle = fit_circle(data, None, options)?;
            MhEllipseParams::new(
                circle.params.a,
                Matrix2::identity() * (circle.params.rho * circle.params.rho),
                circle.params.kappa,
            )?
        }
    };
    // Cholesky of the initial sigma: L = [[exp(l11), 0], [l21, exp(l22)]].
    let chol = nalgebra::Cholesky::new(init.sigma)
        .ok_or_else(|| Mh2dError::Domain("initial sigma is not positive definite".into()))?;
    let l = chol.l();
    let x0 = [
        init.a.x,
        init.a.y,
        l[(0, 0)].ln(),
        l[(1, 0)],
        l[(1, 1)].ln(),
        init.kappa.min(KAPPA_CAP).ln(),
    ];
    let objective = |x: &[f64]| -> f64 {
        let (l11, l21, l22) = (x[2].exp(), x[3], x[4].exp());
        let kappa = x[5].exp().min(KAPPA_CAP);
        if !(l11 > 0.0) || !(l22 > 0.0) || !l11.is_finite() || !l22.is_finite() || !(kappa > 0.0)
        {
            return f64::INFINITY;
        }
        let a = Vector2::new(x[0], x[1]);
        let half_log_det = x[2] + x[4]; // log|Σ|/2 = log l11 + log l22
        let log_c = log_norm_const_unchecked(kappa);
        let mut nll = -(data.len() as f64) * (log_c - half_log_det);
        for y in data {
            let d = y - a;
            // Forward substitution with L: q = |L⁻¹ d|².
            let z1 = d.x / l11;
            let z2 = (d.y - l21 * z1) / l22;
            let q = z1 * z1 + z2 * z2;
            nll += 0.5 * kappa * (q - 1.0) * (q - 1.0);
        }
        nll
    };
    let result = optim::minimize(objective, &x0, options)?;
    let (l11, l21, l22) = (
        result.x_min[2].exp(),
        result.x_min[3],
        result.x_min[4].exp(),
    );
    let lmat = Matrix2::new(l11, 0.0, l21, l22);
    let params = MhEllipseParams::new(
        Vector2::new(result.x_min[0], result.x_min[1]),
        lmat * lmat.transpose(),
        result.x_min[5].exp().min(KAPPA_CAP),
    )?;
    let mll = params.log_likelihood(data);
    Ok(MhFit {
        params,
        mll,
        converged: result.converged,
        iterations: result.iterations,
        init,
    })
}
