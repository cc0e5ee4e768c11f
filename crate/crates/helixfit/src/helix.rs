//! Helix geometry: the generative model, orthonormal frames, and the
//! stereographic parameterization of candidate axes.
//!
//! A helix point at time `t` is
//!
//! ```text
//! x(t) = r cos(t0 + t) u + r sin(t0 + t) v + c (t0 + t) w + b,
//! ```
//!
//! where `[u v w]` is a right-handed orthonormal frame, `w` the axis,
//! `2πc` the pitch, and `b` a shift. Sampling at `t_i = iβ` and adding
//! isotropic Gaussian noise gives the statistical helix the fitters consume.

use nalgebra::{Matrix3, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

/// Errors from helix-geometry construction and evaluation.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeometryError {
    #[error("invalid helix parameters: {0}")]
    BadParams(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Full generative helix model.
#[derive(Debug, Clone, PartialEq)]
pub struct HelixParams {
    /// Radius (> 0).
    pub r: f64,
    /// Rise rate; the pitch is `2πc`.
    pub c: f64,
    /// Turn angle per sampled point, radians.
    pub beta: f64,
    /// First frame vector (in-plane).
    pub u: Vector3<f64>,
    /// Second frame vector (in-plane).
    pub v: Vector3<f64>,
    /// Axis (third frame vector).
    pub w: Vector3<f64>,
    /// Shift.
    pub b: Vector3<f64>,
    /// Phase offset, radians.
    pub t0: f64,
}

impl HelixParams {
    /// Build and validate a helix model. The frame must be right-handed and
    /// orthonormal (unit/orthogonality to 1e-12, determinant +1 to 1e-9).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        r: f64,
        c: f64,
        beta: f64,
        u: Vector3<f64>,
        v: Vector3<f64>,
        w: Vector3<f64>,
        b: Vector3<f64>,
        t0: f64,
    ) -> Result<Self, GeometryError> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(GeometryError::BadParams(format!("radius must be > 0, got {r}")));
        }
        for (name, val) in [("c", c), ("beta", beta), ("t0", t0)] {
            if !val.is_finite() {
                return Err(GeometryError::BadParams(format!("{name} must be finite")));
            }
        }
        for (name, vec) in [("u", &u), ("v", &v), ("w", &w)] {
            if (vec.norm() - 1.0).abs() > 1e-12 {
                return Err(GeometryError::BadParams(format!(
                    "{name} must be unit length (|{name}| = {})",
                    vec.norm()
                )));
            }
        }
        for (pair, dot) in [("u.v", u.dot(&v)), ("u.w", u.dot(&w)), ("v.w", v.dot(&w))] {
            if dot.abs() > 1e-12 {
                return Err(GeometryError::BadParams(format!(
                    "frame not orthogonal: {pair} = {dot}"
                )));
            }
        }
        let det = Matrix3::from_columns(&[u, v, w]).determinant();
        if (det - 1.0).abs() > 1e-9 {
            return Err(GeometryError::BadParams(format!(
                "frame must be right-handed (det = {det})"
            )));
        }
        Ok(Self {
            r,
            c,
            beta,
            u,
            v,
            w,
            b,
            t0,
        })
    }

    /// Helix in the canonical frame (axis = +z), zero shift and phase.
    pub fn canonical(r: f64, c: f64, beta: f64) -> Result<Self, GeometryError> {
        Self::new(
            r,
            c,
            beta,
            Vector3::x(),
            Vector3::y(),
            Vector3::z(),
            Vector3::zeros(),
            0.0,
        )
    }

    /// Helix whose axis is `w` (frame completed canonically), shift `b`,
    /// zero phase.
    pub fn with_axis(
        r: f64,
        c: f64,
        beta: f64,
        w: &Vector3<f64>,
        b: Vector3<f64>,
    ) -> Result<Self, GeometryError> {
        let frame = frame_from_axis(w)?;
        Self::new(
            r,
            c,
            beta,
            frame.column(0).into(),
            frame.column(1).into(),
            frame.column(2).into(),
            b,
            0.0,
        )
    }

    /// The frame as a rotation matrix with columns `u, v, w`.
    pub fn frame(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[self.u, self.v, self.w])
    }
}

/// An ordered set of 3-D points, optionally labelled (e.g. residue ids).
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub labels: Option<Vec<String>>,
}

impl PointCloud {
    /// Build a cloud, rejecting empty input and non-finite coordinates.
    pub fn new(points: Vec<Vector3<f64>>) -> Result<Self, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::Degenerate("point cloud is empty".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(GeometryError::Domain(format!(
                    "point {i} has non-finite coordinates"
                )));
            }
        }
        Ok(Self {
            points,
            labels: None,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Point on the noise-free helix at time `t`.
pub fn helix_point(params: &HelixParams, t: f64) -> Vector3<f64> {
    let phase = params.t0 + t;
    params.u * (params.r * phase.cos())
        + params.v * (params.r * phase.sin())
        + params.w * (params.c * phase)
        + params.b
}

/// Sample `n` helix points at `t_i = iβ` (i = 1..n) with isotropic Gaussian
/// noise of variance `sigma2` per coordinate. Deterministic given `seed`.
pub fn simulate_helix(
    params: &HelixParams,
    n: usize,
    sigma2: f64,
    seed: u64,
) -> Result<PointCloud, GeometryError> {
    if n < 1 {
        return Err(GeometryError::Domain("n must be >= 1".into()));
    }
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(GeometryError::Domain(format!(
            "sigma2 must be >= 0, got {sigma2}"
        )));
    }
    let sigma = sigma2.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let points = (1..=n)
        .map(|i| {
            let mut p = helix_point(params, i as f64 * params.beta);
            if sigma > 0.0 {
                let e: [f64; 3] = [
                    normal.sample(&mut rng),
                    normal.sample(&mut rng),
                    normal.sample(&mut rng),
                ];
                p += Vector3::new(e[0], e[1], e[2]) * sigma;
            }
            p
        })
        .collect();
    PointCloud::new(points)
}

/// Complete a unit axis `w` to a right-handed orthonormal frame `[u v w]`.
///
/// `u` is the canonical basis vector of smallest |component| in `w`,
/// Gram-Schmidt-projected orthogonal to `w`; `v = w × u`. Deterministic, and
/// continuous except where the smallest-component choice switches.
pub fn frame_from_axis(w: &Vector3<f64>) -> Result<Matrix3<f64>, GeometryError> {
    let norm = w.norm();
    if norm < 1e-12 {
        return Err(GeometryError::Degenerate("axis has (near-)zero length".into()));
    }
    if (norm - 1.0).abs() > 1e-6 {
        return Err(GeometryError::Domain(format!(
            "axis must be unit length within 1e-6 (|w| = {norm})"
        )));
    }
    let w = w / norm;
    let abs = [w.x.abs(), w.y.abs(), w.z.abs()];
    let k = (0..3).min_by(|&i, &j| abs[i].total_cmp(&abs[j])).unwrap();
    let mut e = Vector3::zeros();
    e[k] = 1.0;
    let u = (e - w * e.dot(&w)).normalize();
    let v = w.cross(&u);
    Ok(Matrix3::from_columns(&[u, v, w]))
}

/// Map stereographic coordinates `p = (p₁, p₂)` to a unit axis:
///
/// ```text
/// w = (2p₁, 2p₂, -1 + |p|²) / (1 + |p|²),
/// ```
///
/// so `p = 0` maps to `(0, 0, -1)`. Likelihoods in this crate are invariant
/// under `w ↦ -w`, so which pole `p = 0` hits is immaterial; final sign
/// conventions are applied by the axis fitters.
pub fn stereographic_to_axis(p: &Vector2<f64>) -> Vector3<f64> {
    let s = p.norm_squared();
    let denom = 1.0 + s;
    Vector3::new(2.0 * p.x / denom, 2.0 * p.y / denom, (s - 1.0) / denom)
}

/// Inverse of [`stereographic_to_axis`]: `p = (w₁, w₂) / (1 - w₃)`.
///
/// Branch point at the north pole (`w₃ → 1`); callers keep their working
/// axis in the southern hemisphere (the maps are insensitive to `w ↦ -w`).
pub fn axis_to_stereographic(w: &Vector3<f64>) -> Result<Vector2<f64>, GeometryError> {
    let norm = w.norm();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(GeometryError::Domain(format!(
            "axis must be unit length within 1e-6 (|w| = {norm})"
        )));
    }
    let denom = 1.0 - w.z / norm;
    if denom < 1e-9 {
        return Err(GeometryError::Degenerate(
            "axis is at the stereographic branch point (north pole)".into(),
        ));
    }
    Ok(Vector2::new(w.x / norm, w.y / norm) / denom)
}

/// Angle between two axes as `arccos` of the clamped inner product, in
/// `[0, π]`. Inputs must be unit length within 1e-6.
pub fn angle_between_axes(
    w1: &Vector3<f64>,
    w2: &Vector3<f64>,
) -> Result<f64, GeometryError> {
    for (name, w) in [("w1", w1), ("w2", w2)] {
        let n = w.norm();
        if n < 1e-12 {
            return Err(GeometryError::Degenerate(format!("{name} has zero length")));
        }
        if (n - 1.0).abs() > 1e-6 {
            return Err(GeometryError::Domain(format!(
                "{name} must be unit length within 1e-6 (got {n})"
            )));
        }
    }
    Ok(w1.dot(w2).clamp(-1.0, 1.0).acos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn alpha_like() -> HelixParams {
        HelixParams::canonical(2.3, 5.4 / (2.0 * PI), 2.0 * PI / 3.6).unwrap()
    }

    #[test]
    fn helix_point_canonical_values() {
        let p = alpha_like();
        let x0 = helix_point(&p, 0.0);
        assert_relative_eq!(x0.x, 2.3, epsilon = 1e-12);
        assert_relative_eq!(x0.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(x0.z, 0.0, epsilon = 1e-12);

        // One full turn rises by the pitch 2πc = 5.4.
        let x1 = helix_point(&p, 2.0 * PI);
        assert_relative_eq!(x1.x, 2.3, epsilon = 1e-10);
        assert_relative_eq!(x1.y, 0.0, epsilon = 1e-10);
        assert_relative_eq!(x1.z, 5.4, epsilon = 1e-10);

        let xq = helix_point(&p, PI / 2.0);
        assert_relative_eq!(xq.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(xq.y, 2.3, epsilon = 1e-12);
        assert_relative_eq!(xq.z, 5.4 / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn pitch_property_off_canonical_frame() {
        let w = Vector3::new(1.0, 2.0, -0.5).normalize();
        let params = HelixParams::with_axis(1.7, 0.4, 1.1, &w, Vector3::new(3.0, -1.0, 2.0))
            .unwrap();
        for &t in &[0.0, 0.7, 3.3, -2.0] {
            let step = helix_point(&params, t + 2.0 * PI) - helix_point(&params, t);
            let expected = params.w * (2.0 * PI * params.c);
            assert!((step - expected).norm() <= 1e-10);
        }
    }

    #[test]
    fn simulate_zero_noise_is_exact() {
        let p = alpha_like();
        let cloud = simulate_helix(&p, 30, 0.0, 99).unwrap();
        for (i, x) in cloud.points.iter().enumerate() {
            let t = (i + 1) as f64 * p.beta;
            assert!((x - helix_point(&p, t)).norm() == 0.0);
        }
    }

    #[test]
    fn simulate_is_seed_deterministic() {
        let p = alpha_like();
        let a = simulate_helix(&p, 30, 0.001, 42).unwrap();
        let b = simulate_helix(&p, 30, 0.001, 42).unwrap();
        let c = simulate_helix(&p, 30, 0.001, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn simulate_noise_scale_is_plausible() {
        let p = alpha_like();
        let sigma2 = 0.05;
        let cloud = simulate_helix(&p, 2000, sigma2, 7).unwrap();
        let mse: f64 = cloud
            .points
            .iter()
            .enumerate()
            .map(|(i, x)| (x - helix_point(&p, (i + 1) as f64 * p.beta)).norm_squared())
            .sum::<f64>()
            / 2000.0;
        // E|ε|² = 3σ²; a 2000-sample mean stays well within 10%.
        assert!((mse / (3.0 * sigma2) - 1.0).abs() < 0.1, "mse = {mse}");
    }

    #[test]
    fn simulate_rejects_negative_variance() {
        let p = alpha_like();
        assert!(simulate_helix(&p, 10, -0.1, 1).is_err());
    }

    #[test]
    fn zero_noise_projection_lies_on_circle() {
        let w = Vector3::new(0.3, -0.4, 0.8).normalize();
        let b = Vector3::new(1.0, 2.0, 3.0);
        let params = HelixParams::with_axis(2.3, 0.86, 1.745, &w, b).unwrap();
        let cloud = simulate_helix(&params, 25, 0.0, 0).unwrap();
        let frame = params.frame();
        let center = frame.transpose() * b;
        for x in &cloud.points {
            let y = frame.transpose() * x;
            let radial = ((y.x - center.x).powi(2) + (y.y - center.y).powi(2)).sqrt();
            assert!((radial - 2.3).abs() <= 1e-10);
        }
    }

    #[test]
    fn frame_from_canonical_axes() {
        let r = frame_from_axis(&Vector3::z()).unwrap();
        assert_relative_eq!(r, Matrix3::identity(), epsilon = 1e-14);

        let r = frame_from_axis(&Vector3::x()).unwrap();
        assert_relative_eq!(Vector3::from(r.column(2)), Vector3::x(), epsilon = 1e-14);
    }

    #[test]
    fn frame_rejects_zero_axis() {
        assert!(frame_from_axis(&Vector3::zeros()).is_err());
    }

    #[test]
    fn stereographic_fixed_points() {
        let south = stereographic_to_axis(&Vector2::new(0.0, 0.0));
        assert_eq!(south, Vector3::new(0.0, 0.0, -1.0));
        let equator = stereographic_to_axis(&Vector2::new(1.0, 0.0));
        assert_relative_eq!(equator, Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-15);
        let w = stereographic_to_axis(&Vector2::new(3.0, 4.0));
        assert_relative_eq!(
            w,
            Vector3::new(3.0 / 13.0, 4.0 / 13.0, 12.0 / 13.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn stereographic_round_trip() {
        for &(p1, p2) in &[(0.0, 0.0), (1.0, -2.0), (0.3, 0.4), (-5.0, 2.5)] {
            let p = Vector2::new(p1, p2);
            let w = stereographic_to_axis(&p);
            let back = axis_to_stereographic(&w).unwrap();
            assert!((back - p).norm() <= 1e-9 * (1.0 + p.norm()));
        }
        assert!(axis_to_stereographic(&Vector3::z()).is_err());
    }

    #[test]
    fn angle_paper_anchor() {
        // Known cosine/angle pairs used as fixed numeric anchors.
        let theta = (0.999_931_5f64).acos();
        assert!((theta - 0.011_704_63).abs() <= 1e-6);
        let w1 = Vector3::z();
        let w2 = Vector3::new((1.0f64 - 0.999_931_5f64.powi(2)).sqrt(), 0.0, 0.999_931_5);
        let got = angle_between_axes(&w1, &w2).unwrap();
        assert!((got - 0.011_704_63).abs() <= 1e-6);
    }

    #[test]
    fn angle_degenerate_cases() {
        let w = Vector3::new(0.6, 0.0, 0.8);
        assert_eq!(angle_between_axes(&w, &w).unwrap(), 0.0);
        assert_relative_eq!(
            angle_between_axes(&w, &(-w)).unwrap(),
            std::f64::consts::PI,
            epsilon = 1e-12
        );
        assert!(angle_between_axes(&w, &Vector3::zeros()).is_err());
    }

    proptest! {
        #[test]
        fn stereographic_always_unit(p1 in -1e6f64..1e6, p2 in -1e6f64..1e6) {
            let w = stereographic_to_axis(&Vector2::new(p1, p2));
            prop_assert!((w.norm() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn frames_are_proper_rotations(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
            let v = Vector3::new(x, y, z);
            prop_assume!(v.norm() > 1e-3);
            let w = v.normalize();
            let r = frame_from_axis(&w).unwrap();
            let eye = r.transpose() * r;
            prop_assert!((eye - Matrix3::identity()).norm() <= 1e-12);
            prop_assert!((r.determinant() - 1.0).abs() <= 1e-9);
            prop_assert!((Vector3::from(r.column(2)) - w).norm() <= 1e-12);
        }
    }
}
