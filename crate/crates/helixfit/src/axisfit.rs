//! Helix-axis estimation.
//!
//! The profile-likelihood estimator projects the cloud onto the plane normal
//! to a candidate axis `w`, fits the circular shell model there, and calls
//! the maximized log-likelihood `MLL(w)`. Since the planar fit is invariant
//! to rotations within the plane, `MLL` depends only on `w` — and only up to
//! sign — so the outer optimizer searches the unit sphere through
//! stereographic coordinates recentered at the initial axis, starting from
//! `p = 0`. Initial axes come from plain first-PC analysis or from the
//! least-squares baseline.
//!
//! The baseline (`optls_fit`, a reconstruction of the OptLS approach: β
//! known, least squares) profiles the same 2-D axis search over a closed-form
//! inner solve: for fixed `w` the model is linear in
//! `(r cos t0, r sin t0, c, b)`, so an ordinary least-squares solve on the
//! regressors `{cos iβ, sin iβ, iβ, 1}` — the trigonometric pair coupled
//! across the two in-plane coordinates, the linear trend on the axial one —
//! gives the residual sum of squares directly.

use std::cell::RefCell;

use nalgebra::{Matrix2, Matrix3, Matrix4, Vector2, Vector3, Vector4};
use thiserror::Error;

use crate::helix::{
    frame_from_axis, helix_point, stereographic_to_axis, GeometryError, HelixParams, PointCloud,
};
use crate::mh2d::{self, Mh2dError, MhCircleParams, MhFit};
use crate::optim::{self, OptOptions, OptResult, OptimError};

/// Errors from axis estimation.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum AxisFitError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("initialization failed: {0}")]
    InitFailure(String),
    #[error("singular least-squares design: {0}")]
    DesignSingular(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Mh2d(#[from] Mh2dError),
    #[error("optimizer setup failed: {0}")]
    Optim(#[from] OptimError),
}

/// Result of the profile-likelihood axis fit.
#[derive(Debug, Clone)]
pub struct AxisFit {
    /// Estimated unit axis, sign-aligned with `w_init`.
    pub w: Vector3<f64>,
    /// Stereographic coordinates at the outer optimum (recentered frame).
    pub p: Vector2<f64>,
    /// `MLL(w)`, recomputed at the final axis from a cold inner start.
    pub mll: f64,
    /// The inner circle fit at the final axis.
    pub inner_fit: MhFit<MhCircleParams>,
    /// Raw outer optimizer record.
    pub outer_result: OptResult,
    /// Initial axis the search was recentered on.
    pub w_init: Vector3<f64>,
}

/// Result of the least-squares helix fit.
#[derive(Debug, Clone)]
pub struct HelixFit {
    /// Full fitted helix model (frame, radius, rise rate, shift, phase).
    pub params: HelixParams,
    /// Residual sum of squares, recomputable from `params` and the data.
    pub rss: f64,
    pub converged: bool,
}

/// Project a cloud onto the plane normal to `w`: the first two coordinates
/// of `Rᵀx` with `R = frame_from_axis(w)`.
pub fn project_to_plane(
    cloud: &PointCloud,
    w: &Vector3<f64>,
) -> Result<Vec<Vector2<f64>>, AxisFitError> {
    let frame = frame_from_axis(w)?;
    let rt = frame.transpose();
    Ok(cloud
        .points
        .iter()
        .map(|x| {
            let y = rt * x;
            Vector2::new(y.x, y.y)
        })
        .collect())
}

/// The profile objective: project onto the plane normal to `w` and maximize
/// the circular shell likelihood there. `warm_start` seeds the inner fit
/// (falling back to moment initialization if it does not evaluate finitely).
pub fn mll_given_axis(
    cloud: &PointCloud,
    w: &Vector3<f64>,
    options: &OptOptions,
    warm_start: Option<MhCircleParams>,
) -> Result<(f64, MhFit<MhCircleParams>), AxisFitError> {
    let projected = project_to_plane(cloud, w)?;
    let init = warm_start.filter(|p| p.log_likelihood(&projected).is_finite());
    let fit = mh2d::fit_circle(&projected, init, options)?;
    Ok((fit.mll, fit))
}

/// First-principal-component initial axis: the top eigenvector of the
/// centered covariance, signed to point from the first toward the last point.
pub fn init_axis_pca(cloud: &PointCloud) -> Result<Vector3<f64>, AxisFitError> {
    let n = cloud.len();
    if n < 3 {
        return Err(AxisFitError::TooFewPoints { needed: 3, got: n });
    }
    let mean = cloud.points.iter().sum::<Vector3<f64>>() / n as f64;
    let mut cov = Matrix3::zeros();
    for x in &cloud.points {
        let c = x - mean;
        cov += c * c.transpose();
    }
    cov /= n as f64;
    let scale = 1.0 + mean.norm_squared();
    if cov.trace() <= 1e-24 * scale {
        return Err(AxisFitError::Degenerate(
            "points are (numerically) coincident".into(),
        ));
    }
    let eig = nalgebra::SymmetricEigen::new(cov);
    let top = (0..3)
        .max_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]))
        .unwrap();
    let mut axis: Vector3<f64> = eig.eigenvectors.column(top).into_owned().normalize();
    let span = cloud.points[n - 1] - cloud.points[0];
    if axis.dot(&span) < 0.0 {
        axis = -axis;
    }
    Ok(axis)
}

/// Estimate the helix axis by maximizing `MLL(w)` over stereographic
/// coordinates recentered at `w_init` (default: PCA), starting at `p = 0`.
///
/// Inner circle fits are warm-started from the previous outer iterate. The
/// returned axis is sign-aligned with `w_init`, and `mll`/`inner_fit` are
/// recomputed at it from a cold start so they are reproducible from the
/// fit record alone.
pub fn estimate_axis_mh(
    cloud: &PointCloud,
    w_init: Option<Vector3<f64>>,
    inner_options: &OptOptions,
    outer_options: &OptOptions,
) -> Result<AxisFit, AxisFitError> {
    if cloud.len() < mh2d::MIN_POINTS_CIRCLE {
        return Err(AxisFitError::TooFewPoints {
            needed: mh2d::MIN_POINTS_CIRCLE,
            got: cloud.len(),
        });
    }
    let w_init = match w_init {
        Some(w) => {
            let n = w.norm();
            if n < 1e-12 {
                return Err(AxisFitError::InitFailure("initial axis has zero length".into()));
            }
            w / n
        }
        None => init_axis_pca(cloud)?,
    };
    let recenter = frame_from_axis(&w_init)?;
    let rt = recenter.transpose();
    let rotated = PointCloud::new(cloud.points.iter().map(|x| rt * x).collect())?;

    let warm: RefCell<Option<MhCircleParams>> = RefCell::new(None);
    let objective = |p: &[f64]| -> f64 {
        let w_local = stereographic_to_axis(&Vector2::new(p[0], p[1]));
        let seed = warm.borrow().as_ref().copied();
        match mll_given_axis(&rotated, &w_local, inner_options, seed) {
            Ok((mll, fit)) => {
                *warm.borrow_mut() = Some(fit.params);
                -mll
            }
            Err(_) => f64::INFINITY,
        }
    };
    let outer = optim::minimize(objective, &[0.0, 0.0], outer_options).map_err(|e| match e {
        OptimError::NonFiniteAtStart => {
            AxisFitError::InitFailure("inner circle fit failed at the initial axis".into())
        }
        other => AxisFitError::Optim(other),
    })?;

    let p_star = Vector2::new(outer.x_min[0], outer.x_min[1]);
    let mut w = (recenter * stereographic_to_axis(&p_star)).normalize();
    if w.dot(&w_init) < 0.0 {
        w = -w;
    }
    let (mll, inner_fit) = mll_given_axis(cloud, &w, inner_options, None)?;
    Ok(AxisFit {
        w,
        p: p_star,
        mll,
        inner_fit,
        outer_result: outer,
        w_init,
    })
}

/// Residual sum of squares of a cloud against a helix model sampled at
/// `t_i = iβ`.
pub fn helix_rss(params: &HelixParams, cloud: &PointCloud) -> f64 {
    cloud
        .points
        .iter()
        .enumerate()
        .map(|(i, x)| (x - helix_point(params, (i + 1) as f64 * params.beta)).norm_squared())
        .sum()
}

/// Least-squares helix fit with known turn angle `beta` (OptLS
/// reconstruction): a 2-D outer search over the axis with a closed-form
/// linear inner solve.
pub fn optls_fit(
    cloud: &PointCloud,
    beta: f64,
    w_init: Option<Vector3<f64>>,
) -> Result<HelixFit, AxisFitError> {
    let n = cloud.len();
    if n < 4 {
        return Err(AxisFitError::TooFewPoints { needed: 4, got: n });
    }
    if !beta.is_finite() {
        return Err(AxisFitError::Degenerate("beta must be finite".into()));
    }
    let design = LsDesign::new(n, beta)?;
    let w_init = match w_init {
        Some(w) => {
            let norm = w.norm();
            if norm < 1e-12 {
                return Err(AxisFitError::InitFailure("initial axis has zero length".into()));
            }
            w / norm
        }
        None => init_axis_pca(cloud)?,
    };

    // The trigonometric design encodes the handedness of the turn, so
    // rss(w) != rss(-w): probe both orientations of the initial axis and
    // search around the one that explains the data better.
    let mut best: Option<(f64, Matrix3<f64>, Vec<Vector3<f64>>)> = None;
    for sign in [1.0f64, -1.0] {
        // Recenter on -sign*w_init so the outer start p = 0 (which maps to
        // the south pole) lands exactly on sign*w_init.
        let recenter = frame_from_axis(&(-(w_init * sign)))?;
        let rt = recenter.transpose();
        let rotated: Vec<Vector3<f64>> = cloud.points.iter().map(|x| rt * x).collect();
        let rss0 = design
            .solve(&rotated, &Vector3::new(0.0, 0.0, -1.0))
            .rss;
        match &best {
            Some((r, _, _)) if *r <= rss0 => {}
            _ => best = Some((rss0, recenter, rotated)),
        }
    }
    let (_, recenter, rotated) = best.expect("both orientations evaluated");

    let objective = |p: &[f64]| -> f64 {
        let w_local = stereographic_to_axis(&Vector2::new(p[0], p[1]));
        design.solve(&rotated, &w_local).rss
    };
    let outer = optim::minimize(objective, &[0.0, 0.0], &OptOptions::default())?;

    let w_local = stereographic_to_axis(&Vector2::new(outer.x_min[0], outer.x_min[1]));
    let inner = design.solve(&rotated, &w_local);
    let local_frame = frame_from_axis(&w_local)?;
    let frame = recenter * local_frame;

    let r = inner.a.hypot(inner.b);
    if r < 1e-12 {
        return Err(AxisFitError::Degenerate(
            "fitted radius is zero; data shows no circular motion at this beta".into(),
        ));
    }
    let t0 = inner.b.atan2(inner.a);
    let shift_frame = Vector3::new(inner.d1, inner.d2, inner.d3 - inner.c * t0);
    let params = HelixParams::new(
        r,
        inner.c,
        beta,
        frame.column(0).into(),
        frame.column(1).into(),
        frame.column(2).into(),
        frame * shift_frame,
        t0,
    )
    .map_err(AxisFitError::from)?;
    let rss = helix_rss(&params, cloud);
    Ok(HelixFit {
        params,
        rss,
        converged: outer.converged,
    })
}

/// Precomputed least-squares design for fixed `n` and `beta`.
///
/// In-plane coordinates share the coupled sinusoid `A cosθ - B sinθ` /
/// `A sinθ + B cosθ` plus per-coordinate intercepts; the axial coordinate is
/// a straight line in `θ`. Both normal systems depend only on `θ_i = iβ`,
/// so they are factored once per fit.
struct LsDesign {
    theta: Vec<f64>,
    trig: Vec<(f64, f64)>,
    plane_normal: Matrix4<f64>,
    axial_normal: Matrix2<f64>,
}

struct LsSolution {
    rss: f64,
    a: f64,
    b: f64,
    d1: f64,
    d2: f64,
    c: f64,
    d3: f64,
}

impl LsDesign {
    fn new(n: usize, beta: f64) -> Result<Self, AxisFitError> {
        let theta: Vec<f64> = (1..=n).map(|i| i as f64 * beta).collect();
        let trig: Vec<(f64, f64)> = theta.iter().map(|&t| (t.cos(), t.sin())).collect();
        let nf = n as f64;
        let sum_c: f64 = trig.iter().map(|t| t.0).sum();
        let sum_s: f64 = trig.iter().map(|t| t.1).sum();
        // The plane system is singular exactly when all angles coincide
        // (beta a multiple of 2π), i.e. C² + S² = n².
        if nf * nf - (sum_c * sum_c + sum_s * sum_s) <= 1e-9 * nf * nf {
            return Err(AxisFitError::DesignSingular(format!(
                "beta = {beta} is a multiple of 2π; the trigonometric design collapses"
            )));
        }
        let plane_normal = Matrix4::new(
            nf, 0.0, sum_c, sum_s, //
            0.0, nf, -sum_s, sum_c, //
            sum_c, -sum_s, nf, 0.0, //
            sum_s, sum_c, 0.0, nf,
        );
        let sum_t: f64 = theta.iter().sum();
        let sum_t2: f64 = theta.iter().map(|t| t * t).sum();
        let axial_normal = Matrix2::new(sum_t2, sum_t, sum_t, nf);
        Ok(Self {
            theta,
            trig,
            plane_normal,
            axial_normal,
        })
    }

    /// Closed-form least squares for the cloud (already in the recentering
    /// frame) observed through the frame of `w_local`.
    fn solve(&self, rotated: &[Vector3<f64>], w_local: &Vector3<f64>) -> LsSolution {
        let frame = frame_from_axis(w_local).expect("stereographic axes are unit length");
        let ft = frame.transpose();
        let ys: Vec<Vector3<f64>> = rotated.iter().map(|z| ft * z).collect();

        let mut plane_rhs = Vector4::zeros();
        let mut axial_rhs = Vector2::zeros();
        for ((y, &(c, s)), &t) in ys.iter().zip(&self.trig).zip(&self.theta) {
            plane_rhs[0] += c * y.x + s * y.y;
            plane_rhs[1] += -s * y.x + c * y.y;
            plane_rhs[2] += y.x;
            plane_rhs[3] += y.y;
            axial_rhs[0] += t * y.z;
            axial_rhs[1] += y.z;
        }
        let plane = self
            .plane_normal
            .lu()
            .solve(&plane_rhs)
            .expect("plane normal matrix validated non-singular");
        let axial = self
            .axial_normal
            .lu()
            .solve(&axial_rhs)
            .expect("axial normal matrix non-singular for beta != 0");

        let (a, b, d1, d2) = (plane[0], plane[1], plane[2], plane[3]);
        let (c_rate, d3) = (axial[0], axial[1]);
        let mut rss = 0.0;
        for ((y, &(c, s)), &t) in ys.iter().zip(&self.trig).zip(&self.theta) {
            let r1 = y.x - (a * c - b * s + d1);
            let r2 = y.y - (a * s + b * c + d2);
            let r3 = y.z - (c_rate * t + d3);
            rss += r1 * r1 + r2 * r2 + r3 * r3;
        }
        LsSolution {
            rss,
            a,
            b,
            d1,
            d2,
            c: c_rate,
            d3,
        }
    }
}
