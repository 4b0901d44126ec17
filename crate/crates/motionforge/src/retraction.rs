//! Euclidean distance retraction by predictor-corrector continuation.
//!
//! The retraction of a tangent step v at a feasible point p is the endpoint of
//! the curve of constrained closest points to u(t) = p + t*step_scale*v,
//! tracked from t = 0 (where x = p, lambda = 0 solves everything) to t = 1.
//! Stationarity is the Lagrange system
//!     F(x, lambda; u) = [ x - u + J(x)^T lambda ; g(x) ] = 0,
//! advanced by an Euler predictor on the Davidenko ODE and re-solved by the
//! damped Gauss-Newton corrector.
//!
//! When the start point carries equilibrium stresses the original equations
//! are rank-deficient everywhere on the path, so tracking runs on a
//! randomized view Lambda * g with generic Gaussian Lambda; every accepted
//! point is then validated against the original constraints.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::constraint::ConstraintSystem;
use crate::error::{Error, Result};
use crate::linalg::{min_norm_solve, rank_revealed};
use crate::newton::{damped_gauss_newton, GaussNewtonOptions, ResidualMap};

/// Residual slack allowed on the start point, relative to corrector_tol.
const START_SLACK: f64 = 10.0;
/// Tangency tolerance for the direction at the start point.
const TANGENT_TOL: f64 = 1e-6;
/// Corrector results farther than this multiple of the predictor step are
/// treated as path jumps and rejected.
const JUMP_FACTOR: f64 = 10.0;
/// Randomization post-check retry budget.
const RANDOMIZE_ATTEMPTS: usize = 5;

/// Tracking parameters. Defaults follow the documented contract.
#[derive(Debug, Clone)]
pub struct TrackerConfig {
    pub corrector_tol: f64,
    pub max_newton_iters: usize,
    pub armijo_shrink: f64,
    pub armijo_slope: f64,
    pub t_step_init: f64,
    pub t_step_min: f64,
    pub t_step_grow: f64,
    pub t_step_shrink: f64,
    pub max_corrector_failures: usize,
    pub rank_tol: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            corrector_tol: 1e-10,
            max_newton_iters: 50,
            armijo_shrink: 0.5,
            armijo_slope: 0.5,
            t_step_init: 0.1,
            t_step_min: 1e-6,
            t_step_grow: 1.25,
            t_step_shrink: 0.5,
            max_corrector_failures: 40,
            rank_tol: 1e-10,
        }
    }
}

impl TrackerConfig {
    pub(crate) fn gn_options(&self) -> GaussNewtonOptions {
        GaussNewtonOptions {
            tol: self.corrector_tol,
            max_iters: self.max_newton_iters,
            armijo_shrink: self.armijo_shrink,
            armijo_slope: self.armijo_slope,
            rank_tol: self.rank_tol,
            require_contraction: true,
        }
    }
}

/// Primal-dual state of the Lagrange system.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangeState {
    pub x: DVector<f64>,
    pub lambda: DVector<f64>,
}

/// A constraint system, possibly left-multiplied by a randomization matrix.
pub enum SystemView<'a> {
    Original(&'a ConstraintSystem),
    Randomized {
        system: &'a ConstraintSystem,
        lambda_mat: DMatrix<f64>,
    },
}

impl<'a> SystemView<'a> {
    pub fn system(&self) -> &'a ConstraintSystem {
        match self {
            SystemView::Original(s) => s,
            SystemView::Randomized { system, .. } => system,
        }
    }

    pub fn n_rows(&self) -> usize {
        match self {
            SystemView::Original(s) => s.n_constraints(),
            SystemView::Randomized { lambda_mat, .. } => lambda_mat.nrows(),
        }
    }

    pub fn is_randomized(&self) -> bool {
        matches!(self, SystemView::Randomized { .. })
    }

    pub fn evaluate(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            SystemView::Original(s) => s.evaluate(x),
            SystemView::Randomized { system, lambda_mat } => lambda_mat * system.evaluate(x),
        }
    }

    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match self {
            SystemView::Original(s) => s.rigidity_matrix(x),
            SystemView::Randomized { system, lambda_mat } => {
                lambda_mat * system.rigidity_matrix(x)
            }
        }
    }

    /// Sum of view-row Hessians weighted by w: for the randomized view the
    /// effective constraint weights are Lambda^T w.
    pub fn weighted_quad(&self, w: &DVector<f64>) -> DMatrix<f64> {
        match self {
            SystemView::Original(s) => s.weighted_quad(w),
            SystemView::Randomized { system, lambda_mat } => {
                system.weighted_quad(&(lambda_mat.transpose() * w))
            }
        }
    }
}

/// F(state; u) = [x - u + J(x)^T lambda ; g(x)], linear in lambda.
pub fn lagrange_residual(view: &SystemView, state: &LagrangeState, u: &DVector<f64>) -> DVector<f64> {
    let n = state.x.len();
    let m = view.n_rows();
    assert_eq!(state.lambda.len(), m, "lagrange_residual: multiplier count");
    let mut out = DVector::zeros(n + m);
    let grad_part = &state.x - u + view.jacobian(&state.x).transpose() * &state.lambda;
    out.rows_mut(0, n).copy_from(&grad_part);
    out.rows_mut(n, m).copy_from(&view.evaluate(&state.x));
    out
}

/// Jacobian of F with respect to (x, lambda):
/// [[ I + 2 W(lambda), J^T ], [ J, 0 ]] with W(lambda) = sum lambda_i A_i.
fn lagrange_jacobian(view: &SystemView, state: &LagrangeState) -> DMatrix<f64> {
    let n = state.x.len();
    let m = view.n_rows();
    let jac = view.jacobian(&state.x);
    let w = view.weighted_quad(&state.lambda);
    let mut out = DMatrix::zeros(n + m, n + m);
    let mut top_left = w * 2.0;
    for i in 0..n {
        top_left[(i, i)] += 1.0;
    }
    out.view_mut((0, 0), (n, n)).copy_from(&top_left);
    out.view_mut((0, n), (n, m)).copy_from(&jac.transpose());
    out.view_mut((n, 0), (m, n)).copy_from(&jac);
    out
}

struct LagrangeMap<'a, 'b> {
    view: &'b SystemView<'a>,
    u: DVector<f64>,
}

impl ResidualMap for LagrangeMap<'_, '_> {
    fn residual(&self, z: &DVector<f64>) -> DVector<f64> {
        let state = split(self.view, z);
        lagrange_residual(self.view, &state, &self.u)
    }
    fn jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let state = split(self.view, z);
        lagrange_jacobian(self.view, &state)
    }
}

fn split(view: &SystemView, z: &DVector<f64>) -> LagrangeState {
    let n = view.system().n_coords();
    LagrangeState {
        x: z.rows(0, n).into_owned(),
        lambda: z.rows(n, view.n_rows()).into_owned(),
    }
}

fn join(state: &LagrangeState) -> DVector<f64> {
    let mut z = DVector::zeros(state.x.len() + state.lambda.len());
    z.rows_mut(0, state.x.len()).copy_from(&state.x);
    z.rows_mut(state.x.len(), state.lambda.len())
        .copy_from(&state.lambda);
    z
}

/// Damped Gauss-Newton correction of the Lagrange system at fixed u.
/// Returns the final state, iteration count, and whether it converged;
/// starting on a solution returns in zero iterations with the state unchanged.
pub fn newton_correct(
    view: &SystemView,
    state: &LagrangeState,
    u: &DVector<f64>,
    config: &TrackerConfig,
) -> (LagrangeState, usize, bool) {
    let map = LagrangeMap { view, u: u.clone() };
    let out = damped_gauss_newton(&map, join(state), &config.gn_options());
    (split(view, &out.z), out.iterations, out.converged)
}

/// Plain projection onto the constraint set: damped Gauss-Newton on g alone,
/// taking minimum-norm steps from x0. Used to validate randomized tracking
/// and to re-solve after constraint edits.
pub fn project_to_constraints(
    system: &ConstraintSystem,
    x0: &DVector<f64>,
    config: &TrackerConfig,
) -> Result<DVector<f64>> {
    struct Plain<'a>(&'a ConstraintSystem);
    impl ResidualMap for Plain<'_> {
        fn residual(&self, z: &DVector<f64>) -> DVector<f64> {
            self.0.evaluate(z)
        }
        fn jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
            self.0.rigidity_matrix(z)
        }
    }
    let mut opts = config.gn_options();
    opts.require_contraction = false;
    let out = damped_gauss_newton(&Plain(system), x0.clone(), &opts);
    if out.converged {
        Ok(out.z)
    } else {
        Err(Error::CorrectorFailed {
            residual: out.residual_norm,
        })
    }
}

/// Draws a randomization matrix Lambda of shape (m - k) x m, k the stress
/// dimension at p, from a seeded Gaussian stream. Retries until the
/// randomized Jacobian at p has trivial cokernel and an unchanged kernel.
pub fn randomize(
    system: &ConstraintSystem,
    p: &DVector<f64>,
    seed: u64,
    rank_tol: f64,
) -> Result<DMatrix<f64>> {
    let r = system.rigidity_matrix(p);
    let rr = rank_revealed(&r, rank_tol);
    let m = system.n_constraints();
    let k = m - rr.rank;
    if k == 0 {
        return Err(Error::RandomizationNotNeeded);
    }
    let kernel_dim = rr.kernel.ncols();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RANDOMIZE_ATTEMPTS {
        let lambda = DMatrix::from_fn(m - k, m, |_, _| StandardNormal.sample(&mut rng));
        let reduced = &lambda * &r;
        let check = rank_revealed(&reduced, rank_tol);
        if check.cokernel.ncols() == 0 && check.kernel.ncols() == kernel_dim {
            return Ok(lambda);
        }
    }
    Err(Error::RandomizationFailed {
        attempts: RANDOMIZE_ATTEMPTS,
    })
}

/// Result of one retraction call.
#[derive(Debug, Clone)]
pub struct RetractionResult {
    pub endpoint: DVector<f64>,
    /// Accepted points, starting at p.
    pub polyline: Vec<DVector<f64>>,
    /// Homotopy parameter of each polyline point.
    pub t_values: Vec<f64>,
    /// Sum of polyline chord lengths.
    pub curve_length: f64,
    pub t_steps_used: usize,
    pub randomized: bool,
    /// Residual of the endpoint on the original constraints.
    pub final_residual: f64,
}

/// Tracks the Euclidean-distance retraction of step_scale * v at p.
pub fn retract(
    system: &ConstraintSystem,
    p: &DVector<f64>,
    v: &DVector<f64>,
    step_scale: f64,
    config: &TrackerConfig,
    seed: u64,
) -> Result<RetractionResult> {
    let start_residual = system.residual_norm(p);
    let start_tol = config.corrector_tol * START_SLACK;
    if start_residual > start_tol {
        return Err(Error::InfeasibleRealization {
            residual: start_residual,
            tol: start_tol,
        });
    }
    let r0 = system.rigidity_matrix(p);
    let tangency = (&r0 * v).norm() / (1.0 + v.norm());
    if tangency > TANGENT_TOL {
        return Err(Error::NotAFlex { deviation: tangency });
    }

    if step_scale.abs() * v.norm() < 1e-15 {
        return Ok(RetractionResult {
            endpoint: p.clone(),
            polyline: vec![p.clone()],
            t_values: vec![0.0],
            curve_length: 0.0,
            t_steps_used: 0,
            randomized: false,
            final_residual: start_residual,
        });
    }

    let stress_dim = system.n_constraints() - rank_revealed(&r0, config.rank_tol).rank;
    let view = if stress_dim > 0 {
        let lambda = randomize(system, p, seed, config.rank_tol)?;
        SystemView::Randomized {
            system,
            lambda_mat: lambda,
        }
    } else {
        SystemView::Original(system)
    };

    let n = system.n_coords();
    let m = view.n_rows();
    let mut state = LagrangeState {
        x: p.clone(),
        lambda: DVector::zeros(m),
    };
    let mut t = 0.0f64;
    let mut dt = config.t_step_init;
    let mut failures = 0usize;
    let mut polyline = vec![p.clone()];
    let mut t_values = vec![0.0];
    let mut curve_length = 0.0;
    let direction = v * step_scale;

    while t < 1.0 {
        let t_next = (t + dt).min(1.0);
        let h = t_next - t;
        let u_next = p + &direction * t_next;

        // Euler predictor on grad F * zdot = [direction; 0].
        let jac = lagrange_jacobian(&view, &state);
        let mut rhs = DVector::zeros(n + m);
        rhs.rows_mut(0, n).copy_from(&direction);
        let zdot = min_norm_solve(&jac, &rhs, config.rank_tol);
        let z_pred = join(&state) + &zdot * h;
        let predictor_norm = (zdot.norm() * h).max(1e-14);

        let pred_state = split(&view, &z_pred);
        let (mut corrected, iters, converged) = newton_correct(&view, &pred_state, &u_next, config);
        let jump = (join(&corrected) - &z_pred).norm() > JUMP_FACTOR * predictor_norm;

        if converged && !jump {
            if view.is_randomized() {
                let orig_residual = system.residual_norm(&corrected.x);
                if orig_residual > config.corrector_tol {
                    match project_to_constraints(system, &corrected.x, config) {
                        Ok(fixed) => corrected.x = fixed,
                        Err(_) => {
                            return Err(Error::ComponentEscape {
                                residual: orig_residual,
                            })
                        }
                    }
                }
            }
            curve_length += (&corrected.x - &state.x).norm();
            log::debug!(
                "retract t={t_next:.6} dist(u,x)={:.3e} iters={iters}",
                (&corrected.x - &u_next).norm()
            );
            polyline.push(corrected.x.clone());
            t_values.push(t_next);
            state = corrected;
            t = t_next;
            if iters <= 3 {
                dt *= config.t_step_grow;
            }
        } else {
            failures += 1;
            dt *= config.t_step_shrink;
            if dt < config.t_step_min || failures > config.max_corrector_failures {
                return Err(Error::PathFailure {
                    t,
                    last: state.x.iter().copied().collect(),
                });
            }
        }
    }

    let final_residual = system.residual_norm(&state.x);
    if final_residual > config.corrector_tol {
        return Err(Error::ComponentEscape {
            residual: final_residual,
        });
    }
    let t_steps_used = t_values.len() - 1;
    Ok(RetractionResult {
        endpoint: state.x.clone(),
        polyline,
        t_values,
        curve_length,
        t_steps_used,
        randomized: view.is_randomized(),
        final_residual,
    })
}
