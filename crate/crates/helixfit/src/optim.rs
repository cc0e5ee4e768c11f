//! Derivative-free minimization: Nelder-Mead simplex with restarts.
//!
//! Both levels of the nested shell-likelihood optimization go through this
//! single entry point. Standard coefficients (reflection 1, expansion 2,
//! contraction ½, shrink ½); non-finite objective values are treated as +∞
//! so callers can use barrier-style domain guards. Runs are deterministic:
//! identical inputs produce bit-identical results.

use thiserror::Error;

/// Options for [`minimize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptOptions {
    /// Converged when every vertex is within this distance (∞-norm) of the best.
    pub x_tol: f64,
    /// Converged when the simplex f-spread is below this, relative to |f|.
    pub f_tol: f64,
    /// Iteration budget per restart.
    pub max_iters: usize,
    /// Fresh-simplex restarts after convergence.
    pub restarts: usize,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
}

impl Default for OptOptions {
    fn default() -> Self {
        Self {
            x_tol: 1e-8,
            f_tol: 1e-10,
            max_iters: 2000,
            restarts: 2,
            initial_step: 0.1,
        }
    }
}

impl OptOptions {
    fn validate(&self) -> Result<(), OptimError> {
        if !(self.x_tol > 0.0) || !(self.f_tol > 0.0) || !(self.initial_step > 0.0) {
            return Err(OptimError::BadOptions(
                "tolerances and initial_step must be positive".into(),
            ));
        }
        if self.max_iters < 1 {
            return Err(OptimError::BadOptions("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Outcome of a [`minimize`] run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    /// Best point found.
    pub x_min: Vec<f64>,
    /// Objective at `x_min`.
    pub f_min: f64,
    /// Iterations used, summed over restarts.
    pub iterations: usize,
    /// Whether the final (re)start converged rather than exhausting max_iters.
    pub converged: bool,
    /// Objective evaluations, summed over restarts.
    pub evaluations: usize,
}

/// Errors from [`minimize`].
#[derive(Debug, Clone, Error, PartialEq)]
pub enum OptimError {
    #[error("objective is not finite at the starting point")]
    NonFiniteAtStart,
    #[error("x0 must have at least one coordinate")]
    EmptyStart,
    #[error("invalid options: {0}")]
    BadOptions(String),
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

struct Vertex {
    x: Vec<f64>,
    f: f64,
}

/// Minimize `objective` from `x0` by the Nelder-Mead simplex method.
///
/// Non-finite objective values away from `x0` are treated as +∞ (the vertex
/// is rejected); a non-finite value at `x0` itself is an error. Exhausting
/// `max_iters` returns the best point so far with `converged = false`.
pub fn minimize<F: FnMut(&[f64]) -> f64>(
    mut objective: F,
    x0: &[f64],
    options: &OptOptions,
) -> Result<OptResult, OptimError> {
    options.validate()?;
    if x0.is_empty() {
        return Err(OptimError::EmptyStart);
    }
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64], n: &mut usize| -> f64 {
        *n += 1;
        let f = objective(x);
        if f.is_finite() {
            f
        } else {
            f64::INFINITY
        }
    };

    let f0 = eval(x0, &mut evaluations);
    if !f0.is_finite() {
        return Err(OptimError::NonFiniteAtStart);
    }

    let mut best_x = x0.to_vec();
    let mut best_f = f0;
    let mut iterations = 0usize;
    let mut converged = false;

    for _round in 0..=options.restarts {
        let (x, f, iters, ok) = run_simplex(
            &mut eval,
            &mut evaluations,
            &best_x,
            best_f,
            options,
        );
        iterations += iters;
        converged = ok;
        if f <= best_f {
            best_f = f;
            best_x = x;
        }
    }

    Ok(OptResult {
        x_min: best_x,
        f_min: best_f,
        iterations,
        converged,
        evaluations,
    })
}

/// One Nelder-Mead run from a fresh simplex around `x0` (whose value `f0` is
/// already known). Returns (best x, best f, iterations, converged).
fn run_simplex<E: FnMut(&[f64], &mut usize) -> f64>(
    eval: &mut E,
    evaluations: &mut usize,
    x0: &[f64],
    f0: f64,
    options: &OptOptions,
) -> (Vec<f64>, f64, usize, bool) {
    let dim = x0.len();
    let mut simplex: Vec<Vertex> = Vec::with_capacity(dim + 1);
    simplex.push(Vertex {
        x: x0.to_vec(),
        f: f0,
    });
    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] += options.initial_step;
        let f = eval(&x, evaluations);
        simplex.push(Vertex { x, f });
    }
    sort_simplex(&mut simplex);

    let mut iterations = 0usize;
    let mut converged = false;
    while iterations < options.max_iters {
        if simplex_converged(&simplex, options) {
            converged = true;
            break;
        }
        iterations += 1;

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; dim];
        for v in &simplex[..dim] {
            for (c, &xi) in centroid.iter_mut().zip(&v.x) {
                *c += xi;
            }
        }
        for c in centroid.iter_mut() {
            *c /= dim as f64;
        }

        let worst = simplex[dim].f;
        let second_worst = simplex[dim - 1].f;
        let best = simplex[0].f;

        let reflected = affine(&centroid, &simplex[dim].x, REFLECT);
        let f_r = eval(&reflected, evaluations);

        if f_r < best {
            let expanded = affine(&centroid, &simplex[dim].x, EXPAND);
            let f_e = eval(&expanded, evaluations);
            if f_e < f_r {
                replace_worst(&mut simplex, expanded, f_e);
            } else {
                replace_worst(&mut simplex, reflected, f_r);
            }
        } else if f_r < second_worst {
            replace_worst(&mut simplex, reflected, f_r);
        } else if f_r < worst {
            // Outside contraction.
            let contracted = affine(&centroid, &simplex[dim].x, REFLECT * CONTRACT);
            let f_c = eval(&contracted, evaluations);
            if f_c <= f_r {
                replace_worst(&mut simplex, contracted, f_c);
            } else {
                shrink(&mut simplex, eval, evaluations);
            }
        } else {
            // Inside contraction.
            let contracted = affine(&centroid, &simplex[dim].x, -CONTRACT);
            let f_c = eval(&contracted, evaluations);
            if f_c < worst {
                replace_worst(&mut simplex, contracted, f_c);
            } else {
                shrink(&mut simplex, eval, evaluations);
            }
        }
    }

    let best = &simplex[0];
    (best.x.clone(), best.f, iterations, converged)
}

/// `centroid + coeff * (centroid - worst)`.
fn affine(centroid: &[f64], worst: &[f64], coeff: f64) -> Vec<f64> {
    centroid
        .iter()
        .zip(worst)
        .map(|(&c, &w)| c + coeff * (c - w))
        .collect()
}

fn replace_worst(simplex: &mut [Vertex], x: Vec<f64>, f: f64) {
    let last = simplex.len() - 1;
    simplex[last] = Vertex { x, f };
    sort_simplex(simplex);
}

fn shrink<E: FnMut(&[f64], &mut usize) -> f64>(
    simplex: &mut Vec<Vertex>,
    eval: &mut E,
    evaluations: &mut usize,
) {
    let best = simplex[0].x.clone();
    for v in simplex.iter_mut().skip(1) {
        for (xi, &bi) in v.x.iter_mut().zip(&best) {
            *xi = bi + SHRINK * (*xi - bi);
        }
        v.f = eval(&v.x, evaluations);
    }
    sort_simplex(simplex);
}

fn sort_simplex(simplex: &mut [Vertex]) {
    // Stable sort on the value alone keeps ties in insertion order, which
    // makes the whole run deterministic.
    simplex.sort_by(|a, b| a.f.total_cmp(&b.f));
}

/// Diameter test on x plus a scale-invariant f-spread test. The relative
/// f test keeps argmin results invariant under positive rescaling of the
/// objective (Nelder-Mead steps themselves only ever compare f values).
fn simplex_converged(simplex: &[Vertex], options: &OptOptions) -> bool {
    let best = &simplex[0];
    let mut diameter = 0.0f64;
    for v in &simplex[1..] {
        for (&xi, &bi) in v.x.iter().zip(&best.x) {
            diameter = diameter.max((xi - bi).abs());
        }
    }
    if diameter <= options.x_tol {
        return true;
    }
    let worst_f = simplex[simplex.len() - 1].f;
    if !worst_f.is_finite() {
        return false;
    }
    let spread = worst_f - best.f;
    let scale = best.f.abs().max(worst_f.abs());
    spread <= options.f_tol * scale
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn minimizes_sphere() {
        let r = minimize(sphere, &[1.0, 1.0], &OptOptions::default()).unwrap();
        assert!(r.x_min.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-6);
        assert!(r.f_min <= 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn minimizes_shifted_quadratic() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2);
        let r = minimize(f, &[0.0, 0.0], &OptOptions::default()).unwrap();
        assert!((r.x_min[0] - 3.0).abs() <= 1e-6);
        assert!((r.x_min[1] + 2.0).abs() <= 1e-6);
    }

    #[test]
    fn minimizes_rosenbrock_with_restarts() {
        let rosen = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        };
        let opts = OptOptions {
            restarts: 2,
            ..OptOptions::default()
        };
        let r = minimize(rosen, &[-1.2, 1.0], &opts).unwrap();
        assert!(r.f_min <= 1e-8, "f_min = {}", r.f_min);
        assert!((r.x_min[0] - 1.0).abs() < 1e-3);
        assert!((r.x_min[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn never_worse_than_start() {
        let f = |x: &[f64]| x[0].sin() + (x[0] * 0.3).cos() * 2.0;
        let r = minimize(f, &[0.7], &OptOptions::default()).unwrap();
        assert!(r.f_min <= f(&[0.7]));
    }

    #[test]
    fn deterministic_and_scale_invariant() {
        let f = |x: &[f64]| (x[0] - 0.5).powi(2) + (x[1] * x[0] - 1.0).powi(2);
        let opts = OptOptions::default();
        let a = minimize(f, &[2.0, 2.0], &opts).unwrap();
        let b = minimize(f, &[2.0, 2.0], &opts).unwrap();
        assert_eq!(a, b, "two identical runs must match bit for bit");

        // Positive rescaling leaves the iterate path unchanged.
        let scaled = |x: &[f64]| 10.0 * f(x);
        let c = minimize(scaled, &[2.0, 2.0], &opts).unwrap();
        for (ai, ci) in a.x_min.iter().zip(&c.x_min) {
            assert!((ai - ci).abs() <= opts.x_tol, "{ai} vs {ci}");
        }
        assert_eq!(a.iterations, c.iterations);
    }

    #[test]
    fn nan_regions_are_rejected() {
        // NaN outside the unit box acts as a barrier.
        let f = |x: &[f64]| {
            if x[0].abs() > 1.0 {
                f64::NAN
            } else {
                (x[0] - 0.3).powi(2)
            }
        };
        let r = minimize(f, &[0.9], &OptOptions::default()).unwrap();
        assert!((r.x_min[0] - 0.3).abs() <= 1e-6);
    }

    #[test]
    fn nan_at_start_is_an_error() {
        let f = |_: &[f64]| f64::NAN;
        assert!(matches!(
            minimize(f, &[0.0], &OptOptions::default()),
            Err(OptimError::NonFiniteAtStart)
        ));
    }

    #[test]
    fn exhausted_budget_returns_best_so_far() {
        let rosen = |x: &[f64]| {
            (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
        };
        let opts = OptOptions {
            max_iters: 5,
            restarts: 0,
            ..OptOptions::default()
        };
        let r = minimize(rosen, &[-1.2, 1.0], &opts).unwrap();
        assert!(!r.converged);
        assert!(r.f_min <= rosen(&[-1.2, 1.0]));
    }

    #[test]
    fn monotone_best_value_trace() {
        use std::cell::RefCell;
        let trace: RefCell<Vec<f64>> = RefCell::new(vec![]);
        let f = |x: &[f64]| {
            let v = (x[0] + 1.0).powi(2) * (1.0 + 0.1 * (5.0 * x[0]).sin());
            let mut t = trace.borrow_mut();
            let best = t.last().copied().unwrap_or(f64::INFINITY);
            t.push(best.min(v));
            v
        };
        minimize(f, &[2.0], &OptOptions::default()).unwrap();
        let t = trace.borrow();
        assert!(t.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn empty_start_rejected() {
        assert!(matches!(
            minimize(sphere, &[], &OptOptions::default()),
            Err(OptimError::EmptyStart)
        ));
    }
}
