//! Choosing a motion direction from the nontrivial flex space.
//!
//! With stresses present, a flex combination v = sum lambda_j v_j only extends
//! to second order if every stress satisfies omega_i^T B(v, v) = 0. Those are
//! the quadrics Q_i(lambda) = 0; together with the sphere condition
//! 1 - ||lambda||^2 = 0 they form the square-ified system a seeded
//! random-restart Gauss-Newton solve attacks.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::constraint::ConstraintSystem;
use crate::error::{Error, Result};
use crate::newton::{damped_gauss_newton, GaussNewtonOptions, ResidualMap};
use crate::rigidity::{is_blocked, q_system, QTensor, RigidityReport};

/// Max infinity-norm of the quadric residuals at an accepted solution.
const Q_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlexSource {
    /// Explicit coefficients supplied by the caller.
    UserCoefficients,
    /// No stresses: the first nontrivial basis column works as-is.
    SoleFlex,
    /// Found by solving the quadric-plus-sphere system.
    SolvedUnblocked,
}

#[derive(Debug, Clone)]
pub struct FlexChoice {
    /// Unit coefficient vector in the nontrivial flex basis.
    pub coefficients: DVector<f64>,
    /// The selected flex, unit norm.
    pub flex: DVector<f64>,
    pub source: FlexSource,
}

/// Normalized combination of the nontrivial flex basis with the given
/// coefficients. The basis is orthonormal, so ||flex|| = ||coefficients||
/// and normalizing the coefficients normalizes the flex.
pub fn select_flex(report: &RigidityReport, coefficients: &[f64]) -> Result<FlexChoice> {
    let r = report.nontrivial_dim();
    if coefficients.len() != r {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for a {r}-dimensional flex space",
            coefficients.len()
        )));
    }
    let lambda = DVector::from_row_slice(coefficients);
    let norm = lambda.norm();
    if norm == 0.0 {
        return Err(Error::ZeroFlex);
    }
    let lambda = lambda / norm;
    let flex = &report.nontrivial_flex_basis * &lambda;
    Ok(FlexChoice {
        coefficients: lambda,
        flex,
        source: FlexSource::UserCoefficients,
    })
}

/// The quadrics plus the unit-sphere residual, over lambda in R^r.
struct QSphere<'a> {
    q: &'a QTensor,
}

impl ResidualMap for QSphere<'_> {
    fn residual(&self, z: &DVector<f64>) -> DVector<f64> {
        let s = self.q.n_stresses();
        let mut out = DVector::zeros(s + 1);
        out.rows_mut(0, s).copy_from(&self.q.evaluate(z));
        out[s] = 1.0 - z.norm_squared();
        out
    }

    fn jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let s = self.q.n_stresses();
        let r = self.q.n_flexes;
        let mut jac = DMatrix::zeros(s + 1, r);
        for (i, c) in self.q.coeffs.iter().enumerate() {
            jac.row_mut(i).copy_from(&(c * z * 2.0).transpose());
        }
        jac.row_mut(s).copy_from(&(-z * 2.0).transpose());
        jac
    }
}

/// Flips signs so the first coefficient above 1e-12 in magnitude is positive.
fn canonicalize(mut lambda: DVector<f64>) -> DVector<f64> {
    for &v in lambda.iter() {
        if v.abs() > 1e-12 {
            if v < 0.0 {
                lambda = -lambda;
            }
            break;
        }
    }
    lambda
}

/// Searches for a nontrivial flex no stress blocks.
///
/// Restart starts are uniform on the unit sphere from a ChaCha stream seeded
/// with `seed`, tried sequentially; the same seed always returns the same
/// choice. Ok(None) means the restart budget was exhausted without a solution
/// (which is a proof of nothing).
pub fn find_unblocked_flex(
    system: &ConstraintSystem,
    report: &RigidityReport,
    restarts: usize,
    seed: u64,
) -> Result<Option<FlexChoice>> {
    let r = report.nontrivial_dim();
    if r == 0 {
        return Ok(None);
    }
    if report.stress_dim() == 0 {
        return Ok(Some(FlexChoice {
            coefficients: unit_coeff(r),
            flex: report.nontrivial_flex_basis.column(0).into_owned(),
            source: FlexSource::SoleFlex,
        }));
    }

    let q = q_system(system, report);
    let map = QSphere { q: &q };
    let opts = GaussNewtonOptions {
        tol: 1e-12,
        max_iters: 100,
        armijo_shrink: 0.5,
        armijo_slope: 0.5,
        rank_tol: 1e-12,
        require_contraction: false,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for _ in 0..restarts {
        let start = random_unit(&mut rng, r);
        let out = damped_gauss_newton(&map, start, &opts);
        let residual = map.residual(&out.z);
        if residual.amax() > Q_RESIDUAL_TOL {
            continue;
        }
        let lambda = canonicalize(out.z.normalize());
        let flex = &report.nontrivial_flex_basis * &lambda;
        // The quadric residuals already certify this, but re-check through
        // the stress test to keep the contract airtight.
        if is_blocked(system, report, &flex)? {
            continue;
        }
        return Ok(Some(FlexChoice {
            coefficients: lambda,
            flex,
            source: FlexSource::SolvedUnblocked,
        }));
    }
    Ok(None)
}

fn unit_coeff(r: usize) -> DVector<f64> {
    let mut e = DVector::zeros(r);
    e[0] = 1.0;
    e
}

fn random_unit(rng: &mut ChaCha8Rng, r: usize) -> DVector<f64> {
    loop {
        let v: DVector<f64> = DVector::from_fn(r, |_, _| StandardNormal.sample(rng));
        let n = v.norm();
        if n > 1e-8 {
            return v / n;
        }
    }
}
