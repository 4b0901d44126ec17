//! Damped Gauss-Newton on a generic residual map.
//!
//! Steps are minimum-norm least-squares solutions through the SVD
//! pseudoinverse, with Armijo backtracking on the residual norm:
//! accept x + a*step once ||F(x + a*step)|| <= ||F(x)|| * (1 - slope*a*c),
//! where c = ||P F||^2 / ||F||^2 is the normalized descent slope and P the
//! projector onto the Jacobian's column space.

use nalgebra::{DMatrix, DVector};

use crate::linalg::min_norm_solve;

/// Smallest Armijo step before the line search gives up.
const MIN_DAMPING: f64 = 1e-8;

pub trait ResidualMap {
    fn residual(&self, z: &DVector<f64>) -> DVector<f64>;
    fn jacobian(&self, z: &DVector<f64>) -> DMatrix<f64>;
}

pub struct GaussNewtonOutcome {
    pub z: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub residual_norm: f64,
    /// ||F_k+1|| / ||F_k|| of the final executed iteration, if any.
    pub last_contraction: Option<f64>,
}

pub struct GaussNewtonOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub armijo_shrink: f64,
    pub armijo_slope: f64,
    pub rank_tol: f64,
    /// Convergence additionally requires the final contraction factor < 0.5
    /// (unless the start already satisfied the tolerance).
    pub require_contraction: bool,
}

pub fn damped_gauss_newton<M: ResidualMap>(
    map: &M,
    z0: DVector<f64>,
    opts: &GaussNewtonOptions,
) -> GaussNewtonOutcome {
    let mut z = z0;
    let mut f = map.residual(&z);
    let mut norm = f.norm();
    let mut last_contraction = None;

    if norm <= opts.tol {
        return GaussNewtonOutcome {
            z,
            iterations: 0,
            converged: true,
            residual_norm: norm,
            last_contraction,
        };
    }

    for it in 1..=opts.max_iters {
        let jac = map.jacobian(&z);
        let step = -min_norm_solve(&jac, &f, opts.rank_tol);
        // Descent slope of ||F|| along the step: (F^T J step) / ||F||.
        let descent = -(&jac * &step).dot(&f) / norm;
        let slope_term = descent.max(0.0);

        let mut alpha = 1.0;
        let (z_next, f_next, norm_next) = loop {
            let cand = &z + &step * alpha;
            let fc = map.residual(&cand);
            let nc = fc.norm();
            if nc <= norm - opts.armijo_slope * alpha * slope_term && nc < norm * (1.0 + 1e-14) {
                break (cand, fc, nc);
            }
            alpha *= opts.armijo_shrink;
            if alpha < MIN_DAMPING {
                return GaussNewtonOutcome {
                    z,
                    iterations: it,
                    converged: false,
                    residual_norm: norm,
                    last_contraction,
                };
            }
        };

        last_contraction = Some(norm_next / norm);
        z = z_next;
        f = f_next;
        norm = norm_next;

        if norm <= opts.tol {
            let contracted = !opts.require_contraction
                || last_contraction.map(|c| c < 0.5).unwrap_or(true);
            return GaussNewtonOutcome {
                z,
                iterations: it,
                converged: contracted,
                residual_norm: norm,
                last_contraction,
            };
        }
    }

    GaussNewtonOutcome {
        z,
        iterations: opts.max_iters,
        converged: false,
        residual_norm: norm,
        last_contraction,
    }
}
