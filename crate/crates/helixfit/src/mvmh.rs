//! The d-dimensional Mardia-Holmes model: a density concentrated near the
//! ellipsoid `(x-μ)ᵀΣ⁻¹(x-μ) = 1`,
//!
//! ```text
//! f(x) = C(κ) |Σ|^{-1/2} exp{-½κ(r² - 1)²},   r² = (x-μ)ᵀΣ⁻¹(x-μ),
//! C(κ) = Γ(d/2) / (2 π^{d/2} b(κ)),
//! ```
//!
//! with `b(κ)` the radial integral from [`crate::specfun`]. Fitting follows
//! the planar module: unconstrained log-Cholesky/log-κ coordinates through
//! the simplex minimizer. An optional constraint ties the two smallest
//! eigenvalues of `Σ` (d = 3), the shape relevant to right-cylinder data.

use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::helix::{axis_to_stereographic, stereographic_to_axis};
use crate::mh2d::KAPPA_CAP;
use crate::optim::{self, OptOptions};
use crate::specfun::{self, BKappaMethod, QuadratureSpec, SpecFunError};

/// Errors from multivariate shell-model evaluation and fitting.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum MvMhError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("need at least {needed} points for d={d}, got {got}")]
    TooFewPoints { needed: usize, got: usize, d: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("sampler failed: {0}")]
    Sampling(String),
    #[error("optimizer setup failed: {0}")]
    Optim(#[from] optim::OptimError),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
}

/// Parameters of the d-dimensional model.
#[derive(Debug, Clone, PartialEq)]
pub struct MvMhParams {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub kappa: f64,
}

impl MvMhParams {
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>, kappa: f64) -> Result<Self, MvMhError> {
        let d = mu.len();
        if d < 2 {
            return Err(MvMhError::Domain(format!("dimension must be >= 2, got {d}")));
        }
        if sigma.nrows() != d || sigma.ncols() != d {
            return Err(MvMhError::Domain(format!(
                "sigma must be {d}x{d}, got {}x{}",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(MvMhError::Domain(format!("kappa must be > 0, got {kappa}")));
        }
        for i in 0..d {
            for j in (i + 1)..d {
                if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 {
                    return Err(MvMhError::Domain("sigma must be symmetric".into()));
                }
            }
        }
        if nalgebra::Cholesky::new(sigma.clone()).is_none() {
            return Err(MvMhError::Domain("sigma must be positive definite".into()));
        }
        Ok(Self { mu, sigma, kappa })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Mahalanobis quadratic form `(x-μ)ᵀΣ⁻¹(x-μ)`.
    pub fn quad_form(&self, x: &DVector<f64>) -> Result<f64, MvMhError> {
        if x.len() != self.dim() {
            return Err(MvMhError::Domain(format!(
                "point has dimension {}, expected {}",
                x.len(),
                self.dim()
            )));
        }
        let chol = nalgebra::Cholesky::new(self.sigma.clone())
            .ok_or_else(|| MvMhError::Domain("sigma must be positive definite".into()))?;
        let z = chol.l_dirty().solve_lower_triangular(&(x - &self.mu)).ok_or_else(
            || MvMhError::Domain("singular Cholesky factor".into()),
        )?;
        Ok(z.norm_squared())
    }

    /// Summed log-likelihood of a dataset.
    pub fn log_likelihood(&self, data: &[DVector<f64>]) -> Result<f64, MvMhError> {
        let log_c = log_norm_const(self.kappa, self.dim())?;
        let chol = nalgebra::Cholesky::new(self.sigma.clone())
            .ok_or_else(|| MvMhError::Domain("sigma must be positive definite".into()))?;
        let half_log_det: f64 = (0..self.dim()).map(|i| chol.l_dirty()[(i, i)].ln()).sum();
        let mut total = 0.0;
        for x in data {
            let z = chol
                .l_dirty()
                .solve_lower_triangular(&(x - &self.mu))
                .ok_or_else(|| MvMhError::Domain("singular Cholesky factor".into()))?;
            let q = z.norm_squared();
            total += log_c - half_log_det - 0.5 * self.kappa * (q - 1.0) * (q - 1.0);
        }
        Ok(total)
    }

    /// Eigenvalues of `sigma`, descending, paired with unit eigenvectors.
    pub fn eigen(&self) -> Vec<(f64, DVector<f64>)> {
        let eig = nalgebra::SymmetricEigen::new(self.sigma.clone());
        let mut pairs: Vec<(f64, DVector<f64>)> = eig
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, eig.eigenvectors.column(i).into_owned()))
            .collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        pairs
    }
}

/// A completed fit.
#[derive(Debug, Clone, PartialEq)]
pub struct MvMhFit {
    pub params: MvMhParams,
    /// Maximized log-likelihood, recomputed at `params`.
    pub mll: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// `log C(κ)` for dimension `d`.
pub fn log_norm_const(kappa: f64, d: usize) -> Result<f64, MvMhError> {
    if d < 2 {
        return Err(MvMhError::Domain(format!("dimension must be >= 2, got {d}")));
    }
    let b = specfun::b_kappa(kappa, d as u32, BKappaMethod::ClosedForm)?;
    let d = d as f64;
    Ok(specfun::ln_gamma(d / 2.0)
        - std::f64::consts::LN_2
        - 0.5 * d * std::f64::consts::PI.ln()
        - b.ln())
}

/// Log-density of `x` under `params`.
pub fn mvmh_logpdf(x: &DVector<f64>, params: &MvMhParams) -> Result<f64, MvMhError> {
    let q = params.quad_form(x)?;
    let chol = nalgebra::Cholesky::new(params.sigma.clone())
        .ok_or_else(|| MvMhError::Domain("sigma must be positive definite".into()))?;
    let half_log_det: f64 = (0..params.dim()).map(|i| chol.l_dirty()[(i, i)].ln()).sum();
    Ok(log_norm_const(params.kappa, params.dim())?
        - half_log_det
        - 0.5 * params.kappa * (q - 1.0) * (q - 1.0))
}

/// Constraint options for [`mvmh_fit_constrained`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MvMhConstraint {
    /// Free symmetric positive-definite `Σ`.
    #[default]
    None,
    /// `Σ = λₛ I + (λₗ - λₛ) w wᵀ`: the two smallest eigenvalues tied, d = 3
    /// only. Matches right-cylinder shells, where they are equal a priori.
    TieSmallestTwo,
}

fn required_points(d: usize, constraint: MvMhConstraint) -> usize {
    match constraint {
        MvMhConstraint::None => d * (d + 1) / 2 + d + 1,
        MvMhConstraint::TieSmallestTwo => 9, // mu(3) + axis(2) + 2 eigenvalues + kappa + 1
    }
}

fn moment_init(data: &[DVector<f64>], d: usize) -> Result<MvMhParams, MvMhError> {
    let n = data.len() as f64;
    let mut mu = DVector::zeros(d);
    for x in data {
        mu += x;
    }
    mu /= n;
    let mut cov = DMatrix::zeros(d, d);
    for x in data {
        let c = x - &mu;
        cov += &c * c.transpose();
    }
    cov /= n;
    // Scale so the mean Mahalanobis form is 1: with the 1/n covariance the
    // sample mean of (x-μ)ᵀS⁻¹(x-μ) is exactly d.
    let sigma = cov * (d as f64);
    let params = MvMhParams::new(mu.clone(), sigma.clone(), 1.0)
        .map_err(|_| MvMhError::Degenerate("sample covariance is singular".into()))?;
    let radii: Vec<f64> = data
        .iter()
        .map(|x| params.quad_form(x).map(f64::sqrt))
        .collect::<Result<_, _>>()?;
    let mean_r = radii.iter().sum::<f64>() / n;
    let var = radii.iter().map(|r| (r - mean_r) * (r - mean_r)).sum::<f64>() / (n - 1.0);
    let kappa = if var > 0.0 {
        (1.0 / var).min(KAPPA_CAP)
    } else {
        KAPPA_CAP
    };
    MvMhParams::new(mu, sigma, kappa)
}

/// Maximum-likelihood ellipsoid fit over `(μ, log-Cholesky of Σ, log κ)`.
///
/// `init` defaults to moment estimates (mean, rescaled sample covariance,
/// radial-variance κ).
pub fn mvmh_fit(
    data: &[DVector<f64>],
    init: Option<MvMhParams>,
    options: &OptOptions,
) -> Result<MvMhFit, MvMhError> {
    mvmh_fit_constrained(data, init, options, MvMhConstraint::None)
}

/// [`mvmh_fit`] with an eigenvalue-structure constraint.
pub fn mvmh_fit_constrained(
    data: &[DVector<f64>],
    init: Option<MvMhParams>,
    options: &OptOptions,
    constraint: MvMhConstraint,
) -> Result<MvMhFit, MvMhError> {
    if data.is_empty() {
        return Err(MvMhError::Degenerate("empty dataset".into()));
    }
    let d = data[0].len();
    if d < 2 {
        return Err(MvMhError::Domain("dimension must be >= 2".into()));
    }
    if data.iter().any(|x| x.len() != d) {
        return Err(MvMhError::Domain("points have mixed dimensions".into()));
    }
    if data.iter().any(|x| x.iter().any(|v| !v.is_finite())) {
        return Err(MvMhError::Domain("data contains non-finite points".into()));
    }
    let needed = required_points(d, constraint);
    if data.len() < needed {
        return Err(MvMhError::TooFewPoints {
            needed,
            got: data.len(),
            d,
        });
    }
    if constraint == MvMhConstraint::TieSmallestTwo && d != 3 {
        return Err(MvMhError::Domain(
            "the tied-eigenvalue constraint is implemented for d = 3 only".into(),
        ));
    }
    let init = match init {
        Some(p) => {
            if p.dim() != d {
                return Err(MvMhError::Domain("init dimension mismatch".into()));
            }
            p
        }
        None => moment_init(data, d)?,
    };
    match constraint {
        MvMhConstraint::None => fit_free(data, init, options),
        MvMhConstraint::TieSmallestTwo => fit_tied(data, init, options),
    }
}

fn fit_free(
    data: &[DVector<f64>],
    init: MvMhParams,
    options: &OptOptions,
) -> Result<MvMhFit, MvMhError> {
    let d = init.dim();
    let n = data.len() as f64;
    let chol = nalgebra::Cholesky::new(init.sigma.clone())
        .ok_or_else(|| MvMhError::Domain("initial sigma is not positive definite".into()))?;
    let l0 = chol.l();

    // Parameter vector: mu, then column-major strict lower triangle and
    // logged diagonal of L, then log kappa.
    let mut x0 = Vec::with_capacity(d + d * (d + 1) / 2 + 1);
    x0.extend(init.mu.iter());
    for j in 0..d {
        x0.push(l0[(j, j)].ln());
        for i in (j + 1)..d {
            x0.push(l0[(i, j)]);
        }
    }
    x0.push(init.kappa.min(KAPPA_CAP).ln());

    let unpack = move |x: &[f64]| -> (DVector<f64>, DMatrix<f64>, f64, f64) {
        let mu = DVector::from_row_slice(&x[..d]);
        let mut l = DMatrix::zeros(d, d);
        let mut idx = d;
        let mut half_log_det = 0.0;
        for j in 0..d {
            l[(j, j)] = x[idx].exp();
            half_log_det += x[idx];
            idx += 1;
            for i in (j + 1)..d {
                l[(i, j)] = x[idx];
                idx += 1;
            }
        }
        let kappa = x[idx].exp().min(KAPPA_CAP);
        (mu, l, half_log_det, kappa)
    };

    let objective = |x: &[f64]| -> f64 {
        let (mu, l, half_log_det, kappa) = unpack(x);
        if !kappa.is_finite() || !(kappa > 0.0) || !half_log_det.is_finite() {
            return f64::INFINITY;
        }
        let log_c = match log_norm_const(kappa, d) {
            Ok(v) => v,
            Err(_) => return f64::INFINITY,
        };
        let mut nll = -n * (log_c - half_log_det);
        for p in data {
            let z = match l.solve_lower_triangular(&(p - &mu)) {
                Some(z) => z,
                None => return f64::INFINITY,
            };
            let q = z.norm_squared();
            nll += 0.5 * kappa * (q - 1.0) * (q - 1.0);
        }
        nll
    };

    let result = optim::minimize(objective, &x0, options)?;
    let (mu, l, _, kappa) = unpack(&result.x_min);
    let params = MvMhParams::new(mu, &l * l.transpose(), kappa)?;
    let mll = params.log_likelihood(data)?;
    Ok(MvMhFit {
        params,
        mll,
        converged: result.converged,
        iterations: result.iterations,
    })
}

fn fit_tied(
    data: &[DVector<f64>],
    init: MvMhParams,
    options: &OptOptions,
) -> Result<MvMhFit, MvMhError> {
    let n = data.len() as f64;
    let eigen = init.eigen();
    let lambda_long = eigen[0].0.max(1e-12);
    let lambda_small = (0.5 * (eigen[1].0 + eigen[2].0)).max(1e-12);
    let mut w0 = Vector3::new(eigen[0].1[0], eigen[0].1[1], eigen[0].1[2]).normalize();
    // Keep the axis away from the stereographic branch point at +z.
    if w0.z > 0.0 {
        w0 = -w0;
    }
    let p0 = axis_to_stereographic(&w0)
        .map_err(|e| MvMhError::Domain(format!("axis parameterization failed: {e}")))?;

    let x0 = [
        init.mu[0],
        init.mu[1],
        init.mu[2],
        p0.x,
        p0.y,
        lambda_long.ln(),
        lambda_small.ln(),
        init.kappa.min(KAPPA_CAP).ln(),
    ];

    let objective = |x: &[f64]| -> f64 {
        let mu = Vector3::new(x[0], x[1], x[2]);
        let w = stereographic_to_axis(&Vector2::new(x[3], x[4]));
        let (ll, ls) = (x[5].exp(), x[6].exp());
        let kappa = x[7].exp().min(KAPPA_CAP);
        if !(ll > 0.0) || !(ls > 0.0) || !ll.is_finite() || !ls.is_finite() || !(kappa > 0.0) {
            return f64::INFINITY;
        }
        let log_c = match log_norm_const(kappa, 3) {
            Ok(v) => v,
            Err(_) => return f64::INFINITY,
        };
        let half_log_det = 0.5 * (ll.ln() + 2.0 * ls.ln());
        let mut nll = -n * (log_c - half_log_det);
        for p in data {
            let c = Vector3::new(p[0] - mu.x, p[1] - mu.y, p[2] - mu.z);
            let along = w.dot(&c);
            // Σ⁻¹ = (I - wwᵀ)/λₛ + wwᵀ/λₗ.
            let q = (c.norm_squared() - along * along) / ls + along * along / ll;
            nll += 0.5 * kappa * (q - 1.0) * (q - 1.0);
        }
        nll
    };

    let result = optim::minimize(objective, &x0, options)?;
    let x = &result.x_min;
    let w = stereographic_to_axis(&Vector2::new(x[3], x[4]));
    let (ll, ls) = (x[5].exp(), x[6].exp());
    let eye = DMatrix::identity(3, 3);
    let w_dyn = DVector::from_vec(vec![w.x, w.y, w.z]);
    let sigma = eye * ls + &w_dyn * w_dyn.transpose() * (ll - ls);
    let params = MvMhParams::new(
        DVector::from_vec(vec![x[0], x[1], x[2]]),
        sigma,
        x[7].exp().min(KAPPA_CAP),
    )?;
    let mll = params.log_likelihood(data)?;
    Ok(MvMhFit {
        params,
        mll,
        converged: result.converged,
        iterations: result.iterations,
    })
}

/// Draw `n` samples: uniform directions scaled by a radius from the shell
/// law `∝ r^{d-1} exp{-½κ(r²-1)²}`, then mapped through the Cholesky factor
/// of `Σ`. The radial draw is rejection sampling under a `N(1, 1/(2κ))`
/// envelope with a grid-calibrated constant; intended for the concentrated
/// regime (κ ≥ ~1), which is where it is used.
pub fn sample_mvmh(
    params: &MvMhParams,
    n: usize,
    seed: u64,
) -> Result<Vec<DVector<f64>>, MvMhError> {
    let d = params.dim();
    let kappa = params.kappa;
    let chol = nalgebra::Cholesky::new(params.sigma.clone())
        .ok_or_else(|| MvMhError::Domain("sigma must be positive definite".into()))?;
    let l = chol.l();

    let sigma_p = 1.0 / (2.0 * kappa).sqrt();
    let log_target = |r: f64| (d as f64 - 1.0) * r.ln() - 0.5 * kappa * (r * r - 1.0).powi(2);
    let log_proposal = |r: f64| -0.5 * ((r - 1.0) / sigma_p).powi(2) - sigma_p.ln();
    // Envelope constant over a dense grid; the ratio decays on both flanks
    // beyond it (polynomial-times-Gaussian versus quartic-exponential tail).
    let r_max = (1.0 + 8.0 * sigma_p).max(4.0);
    let mut log_m = f64::NEG_INFINITY;
    let grid = 8192;
    for i in 1..=grid {
        let r = r_max * i as f64 / grid as f64;
        log_m = log_m.max(log_target(r) - log_proposal(r));
    }
    log_m += 0.3; // safety margin on the grid maximum

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut radius = None;
        for _ in 0..100_000 {
            let r: f64 = 1.0 + sigma_p * <StandardNormal as Distribution<f64>>::sample(&normal, &mut rng);
            if r <= 0.0 {
                continue;
            }
            let log_accept = log_target(r) - log_proposal(r) - log_m;
            if rng.random::<f64>().ln() < log_accept {
                radius = Some(r);
                break;
            }
        }
        let radius = radius.ok_or_else(|| {
            MvMhError::Sampling(format!(
                "radial rejection sampler stalled at kappa = {kappa}"
            ))
        })?;
        let mut dir = DVector::from_fn(d, |_, _| {
            <StandardNormal as Distribution<f64>>::sample(&normal, &mut rng)
        });
        while dir.norm() < 1e-12 {
            dir = DVector::from_fn(d, |_, _| {
                <StandardNormal as Distribution<f64>>::sample(&normal, &mut rng)
            });
        }
        dir /= dir.norm();
        out.push(&params.mu + &l * (dir * radius));
    }
    Ok(out)
}
