//! Deformation-path tracking: iterated retraction with unit-speed step
//! rescaling, Procrustes vector transport, rank-based singularity detection,
//! and acceleration-based traversal of singular configurations.

use nalgebra::{DMatrix, DVector};

use crate::constraint::ConstraintSystem;
use crate::error::{Error, Result};
use crate::linalg::{min_norm_solve, rank_revealed};
use crate::retraction::{
    newton_correct, project_to_constraints, retract, LagrangeState, SystemView, TrackerConfig,
};

/// Approach phase stops once a sub-step moves less than this.
const APPROACH_PROGRESS: f64 = 1e-4;
/// A look-ahead retraction achieving less than this fraction of the requested
/// arc length counts as stalled and routes to singularity resolution.
const STALL_FRACTION: f64 = 0.5;
/// Outgoing chords this parallel to the incoming branch count as retracing.
const RETRACE_COS: f64 = 0.99;
/// Resolution candidates farther than this many steps from their base point
/// are rejected as non-local.
const LOCALITY_FACTOR: f64 = 3.0;
/// Acceleration solves with relative residual above this are inconsistent.
const ACCEL_RESIDUAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    RankDrop,
    QuadraticEscape,
    CuspFallback,
    StickyContact { pair: (usize, usize) },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathEvent {
    /// Index into `realizations` of the frame the event produced.
    pub step: usize,
    pub kind: EventKind,
}

/// A discretized motion. All logs are frame- or step-aligned: `realizations`,
/// `tangents`, and `residual_log` have one entry per frame; `step_sizes` and
/// `curve_lengths` one per accepted step.
#[derive(Debug, Clone)]
pub struct DeformationPath {
    pub realizations: Vec<DVector<f64>>,
    pub tangents: Vec<DVector<f64>>,
    pub step_sizes: Vec<f64>,
    pub curve_lengths: Vec<f64>,
    pub events: Vec<PathEvent>,
    pub residual_log: Vec<f64>,
    /// Populated when the run ended before num_steps.
    pub failure: Option<String>,
}

impl DeformationPath {
    pub fn len(&self) -> usize {
        self.realizations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.realizations.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.residual_log.iter().cloned().fold(0.0, f64::max)
    }
}

/// Moves v_prev from the tangent space spanned by T_prev to the one spanned
/// by T_next using the orthogonal Procrustes alignment of the two bases.
/// Output norm equals the input norm.
pub fn transport(
    t_prev: &DMatrix<f64>,
    t_next: &DMatrix<f64>,
    v_prev: &DVector<f64>,
) -> Result<DVector<f64>> {
    if t_prev.ncols() != t_next.ncols() {
        return Err(Error::RankChange {
            prev: t_prev.ncols(),
            next: t_next.ncols(),
        });
    }
    for t in [t_prev, t_next] {
        let gram = t.transpose() * t;
        let dev = (&gram - DMatrix::identity(gram.nrows(), gram.ncols())).norm();
        assert!(dev <= 1e-8, "transport: basis not orthonormal ({dev:.2e})");
    }
    let m = t_next.transpose() * t_prev;
    let svd = m.svd(true, true);
    let o = svd.u.as_ref().unwrap() * svd.v_t.as_ref().unwrap();
    let raw = t_next * (o * (t_prev.transpose() * v_prev));
    let raw_norm = raw.norm();
    if raw_norm < 1e-14 {
        return Ok(raw);
    }
    Ok(raw * (v_prev.norm() / raw_norm))
}

/// True iff the rigidity-matrix rank at x fell below the reference rank.
pub fn detect_singularity(
    system: &ConstraintSystem,
    x: &DVector<f64>,
    reference_rank: usize,
    rank_tol: f64,
) -> bool {
    rank_revealed(&system.rigidity_matrix(x), rank_tol).rank < reference_rank
}

/// Minimum-norm solution of the stacked system [top; gauge] a = [rhs_top; 0],
/// returned with its least-squares residual norm. This is the raw solver
/// behind `acceleration`; callers may supply arbitrary row blocks.
pub fn stacked_solve(
    top: &DMatrix<f64>,
    gauge: &DMatrix<f64>,
    rhs_top: &DVector<f64>,
    rank_tol: f64,
) -> (DVector<f64>, f64) {
    assert_eq!(top.ncols(), gauge.ncols(), "stacked_solve: column mismatch");
    assert_eq!(top.nrows(), rhs_top.len(), "stacked_solve: rhs length");
    let rows = top.nrows() + gauge.nrows();
    let mut stacked = DMatrix::zeros(rows, top.ncols());
    stacked.view_mut((0, 0), (top.nrows(), top.ncols())).copy_from(top);
    stacked
        .view_mut((top.nrows(), 0), (gauge.nrows(), gauge.ncols()))
        .copy_from(gauge);
    let mut rhs = DVector::zeros(rows);
    rhs.rows_mut(0, rhs_top.len()).copy_from(rhs_top);
    let a = min_norm_solve(&stacked, &rhs, rank_tol);
    let residual = (&stacked * &a - rhs).norm();
    (a, residual)
}

/// Curve acceleration at a regular point: solves R(x) a = -2 h(v) subject to
/// a being orthogonal to the tangent space (the normal-space gauge).
pub fn acceleration(
    system: &ConstraintSystem,
    x: &DVector<f64>,
    v: &DVector<f64>,
    rank_tol: f64,
) -> Result<DVector<f64>> {
    let r = system.rigidity_matrix(x);
    let kernel = rank_revealed(&r, rank_tol).kernel;
    let rhs = system.hessian_form(v) * -2.0;
    let (a, residual) = stacked_solve(&r, &kernel.transpose(), &rhs, rank_tol);
    if residual > ACCEL_RESIDUAL_TOL * (1.0 + rhs.norm()) {
        return Err(Error::NoAcceleration { residual });
    }
    Ok(a)
}

/// All n*(n-1)/2 vertex pair distances of a flattened realization, in fixed
/// (i, j) lexicographic order. Two realizations are congruent exactly when
/// these vectors match.
pub fn pairwise_distance_vector(dim: usize, x: &DVector<f64>) -> Vec<f64> {
    assert_eq!(x.len() % dim, 0);
    let n = x.len() / dim;
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut s = 0.0;
            for c in 0..dim {
                let d = x[i * dim + c] - x[j * dim + c];
                s += d * d;
            }
            out.push(s.sqrt());
        }
    }
    out
}

/// Outcome of a successful singularity resolution.
#[derive(Debug, Clone)]
pub struct Resolution {
    pub x_new: DVector<f64>,
    /// Best available estimate of the singular configuration.
    pub x_singular: DVector<f64>,
    pub kind: EventKind,
}

fn kernel_at(system: &ConstraintSystem, x: &DVector<f64>, rank_tol: f64) -> DMatrix<f64> {
    rank_revealed(&system.rigidity_matrix(x), rank_tol).kernel
}

fn rank_at(system: &ConstraintSystem, x: &DVector<f64>, rank_tol: f64) -> usize {
    rank_revealed(&system.rigidity_matrix(x), rank_tol).rank
}

/// Newton correction of a predicted point onto the original constraint set:
/// closest-point Lagrange solve first, plain constraint projection as backup.
fn correct_prediction(
    system: &ConstraintSystem,
    z: &DVector<f64>,
    config: &TrackerConfig,
) -> Result<DVector<f64>> {
    let view = SystemView::Original(system);
    let state = LagrangeState {
        x: z.clone(),
        lambda: DVector::zeros(system.n_constraints()),
    };
    let (out, _, converged) = newton_correct(&view, &state, z, config);
    if converged && system.residual_norm(&out.x) <= config.corrector_tol {
        return Ok(out.x);
    }
    project_to_constraints(system, z, config)
}

struct StepAttempt {
    endpoint: DVector<f64>,
    curve_length: f64,
    rank: usize,
    kernel: DMatrix<f64>,
}

/// Retraction wrapped with the health checks that route to singularity
/// resolution: corrector success, meaningful arc progress, and no rank drop.
fn attempt_step(
    system: &ConstraintSystem,
    x: &DVector<f64>,
    v: &DVector<f64>,
    alpha: f64,
    reference_rank: usize,
    config: &TrackerConfig,
    seed: u64,
) -> Result<StepAttempt> {
    let res = retract(system, x, v, alpha, config, seed)?;
    if res.curve_length < STALL_FRACTION * alpha * v.norm() {
        return Err(Error::PathFailure {
            t: 0.0,
            last: res.endpoint.iter().copied().collect(),
        });
    }
    let rr = rank_revealed(&system.rigidity_matrix(&res.endpoint), config.rank_tol);
    if rr.rank < reference_rank {
        return Err(Error::RankChange {
            prev: reference_rank,
            next: rr.rank,
        });
    }
    Ok(StepAttempt {
        endpoint: res.endpoint,
        curve_length: res.curve_length,
        rank: rr.rank,
        kernel: rr.kernel,
    })
}

fn routes_to_resolution(err: &Error) -> bool {
    matches!(
        err,
        Error::PathFailure { .. }
            | Error::NotAFlex { .. }
            | Error::ComponentEscape { .. }
            | Error::CorrectorFailed { .. }
            | Error::RankChange { .. }
    )
}

/// Traverses a singular region ahead of (x_prev, v). Phase order: shrink
/// steps toward the singularity, escape with the quadratic predictor, then
/// fall back to correcting prev + alpha * acceleration (cusp geometry).
pub fn resolve_singularity(
    system: &ConstraintSystem,
    x_prev: &DVector<f64>,
    v: &DVector<f64>,
    accel: Option<&DVector<f64>>,
    alpha: f64,
    reference_rank: usize,
    config: &TrackerConfig,
    seed: u64,
) -> Result<Resolution> {
    // Precondition probe: a healthy full step means no singularity ahead.
    if attempt_step(system, x_prev, v, alpha, reference_rank, config, seed).is_ok() {
        return Err(Error::InvalidSystem(
            "singularity resolution invoked at a regular step".into(),
        ));
    }

    // Phase (a): approach with halving steps until progress stalls.
    let mut xa = x_prev.clone();
    let mut va = v.clone();
    let mut h = alpha * 0.5;
    for _ in 0..60 {
        if h < config.t_step_min {
            break;
        }
        match retract(system, &xa, &va, h, config, seed) {
            Ok(out) => {
                let moved = (&out.endpoint - &xa).norm();
                let k_prev = kernel_at(system, &xa, config.rank_tol);
                let k_next = kernel_at(system, &out.endpoint, config.rank_tol);
                let vt = match transport(&k_prev, &k_next, &va) {
                    Ok(vt) if vt.norm() > 1e-14 => vt,
                    _ => break,
                };
                xa = out.endpoint;
                va = vt;
                if moved < APPROACH_PROGRESS {
                    break;
                }
                h *= 0.5;
            }
            Err(_) => h *= 0.5,
        }
    }
    let x_sing = xa;
    let back_dir = {
        let chord = x_prev - &x_sing;
        let nrm = chord.norm();
        if nrm > 1e-12 {
            chord / nrm
        } else {
            -&va
        }
    };

    let eps_progress = 10.0 * config.corrector_tol.sqrt() * alpha;
    let a_used = match accel {
        Some(a) => a.clone(),
        None => acceleration(system, x_prev, v, config.rank_tol)
            .unwrap_or_else(|_| DVector::zeros(x_prev.len())),
    };

    // Phase (b): quadratic predictor out of the singular point.
    for j in 0..12 {
        let ab = alpha / f64::powi(2.0, j);
        let z = &x_sing + &va * ab + &a_used * (0.5 * ab * ab);
        let Ok(xc) = correct_prediction(system, &z, config) else {
            continue;
        };
        let out_chord = &xc - &x_sing;
        let dist = out_chord.norm();
        if dist < eps_progress || dist > LOCALITY_FACTOR * alpha {
            continue;
        }
        if (out_chord / dist).dot(&back_dir) >= RETRACE_COS {
            continue;
        }
        return Ok(Resolution {
            x_new: xc,
            x_singular: x_sing,
            kind: EventKind::QuadraticEscape,
        });
    }

    // Phase (c): cusp fallback along the cached acceleration.
    if a_used.norm() > 1e-14 {
        for j in 0..20 {
            let ac = alpha / f64::powi(2.0, j);
            let z = x_prev + &a_used * ac;
            if (&z - x_prev).norm() > LOCALITY_FACTOR * alpha {
                continue;
            }
            let Ok(xc) = correct_prediction(system, &z, config) else {
                continue;
            };
            let d_prev = (&xc - x_prev).norm();
            let d_sing = (&xc - &x_sing).norm();
            if d_prev >= eps_progress
                && d_sing >= eps_progress
                && d_prev <= LOCALITY_FACTOR * alpha
            {
                return Ok(Resolution {
                    x_new: xc,
                    x_singular: x_sing,
                    kind: EventKind::CuspFallback,
                });
            }
        }
    }

    Err(Error::StuckAtSingularity)
}

/// New constraints produced by a sticky-contact callback, already projected:
/// `system.realization` satisfies the augmented constraint set.
pub struct StickyOutcome {
    pub system: ConstraintSystem,
    pub pairs: Vec<(usize, usize)>,
}

/// Per-step contact hook. Receives the current system and accepted point;
/// returns an augmented system when new contacts closed.
pub type StickyCallback<'a> =
    dyn FnMut(&ConstraintSystem, &DVector<f64>) -> Result<Option<StickyOutcome>> + 'a;

/// Tracks num_steps retraction steps of the given flex. Always returns the
/// path traced so far; unrecoverable errors truncate it and set `failure`.
pub fn track_path(
    system: &ConstraintSystem,
    flex: &DVector<f64>,
    num_steps: usize,
    step_size: f64,
    config: &TrackerConfig,
    seed: u64,
    mut sticky: Option<&mut StickyCallback<'_>>,
) -> DeformationPath {
    let mut sys = system.clone();
    let mut path = DeformationPath {
        realizations: Vec::with_capacity(num_steps + 1),
        tangents: Vec::with_capacity(num_steps + 1),
        step_sizes: Vec::with_capacity(num_steps),
        curve_lengths: Vec::with_capacity(num_steps),
        events: Vec::new(),
        residual_log: Vec::with_capacity(num_steps + 1),
        failure: None,
    };

    let mut x = sys.realization.clone();
    if sys.residual_norm(&x) > config.corrector_tol {
        match project_to_constraints(&sys, &x, config) {
            Ok(fixed) => x = fixed,
            Err(e) => {
                path.failure = Some(format!("start correction failed: {e}"));
                return path;
            }
        }
    }
    let flex_norm = flex.norm();
    if flex_norm < 1e-14 {
        path.failure = Some("zero flex".into());
        return path;
    }
    let mut v = flex / flex_norm;
    let mut kernel = kernel_at(&sys, &x, config.rank_tol);
    let mut reference_rank = rank_at(&sys, &x, config.rank_tol);

    path.realizations.push(x.clone());
    path.tangents.push(v.clone());
    path.residual_log.push(sys.residual_norm(&x));

    let mut alpha = step_size;
    let mut base_length: Option<f64> = None;
    let mut accel_cache: Option<DVector<f64>> = None;

    for _ in 0..num_steps {
        let lookahead = attempt_step(&sys, &x, &v, alpha, reference_rank, config, seed);
        let chosen = match lookahead {
            Ok(out) => {
                if let Some(l0) = base_length {
                    let ratio = (l0 / out.curve_length.max(1e-300)).clamp(0.1, 10.0);
                    let alpha_new = alpha * ratio;
                    if (ratio - 1.0).abs() <= 0.05 {
                        alpha = alpha_new;
                        Ok(out)
                    } else {
                        match attempt_step(&sys, &x, &v, alpha_new, reference_rank, config, seed)
                        {
                            Ok(better) => {
                                alpha = alpha_new;
                                Ok(better)
                            }
                            // Rescale failed; the original look-ahead was
                            // healthy, so keep it.
                            Err(_) => Ok(out),
                        }
                    }
                } else {
                    base_length = Some(out.curve_length);
                    Ok(out)
                }
            }
            Err(e) => Err(e),
        };

        match chosen {
            Ok(step) => {
                let vt = match transport(&kernel, &step.kernel, &v) {
                    Ok(vt) if vt.norm() > 1e-14 => vt,
                    Err(Error::RankChange { prev, next })
                        if next < prev
                            && (&step.kernel * (step.kernel.transpose() * &v)).norm() > 1e-10 =>
                    {
                        // The step left a singular locus: the tangent space
                        // shrank to the branch dimension. Project instead of
                        // transporting (Procrustes needs equal dimensions).
                        &step.kernel * (step.kernel.transpose() * &v)
                    }
                    Ok(_) | Err(Error::RankChange { .. }) => {
                        // Tangent space changed shape at the accepted point:
                        // treat as a singular step instead.
                        match handle_singular_step(
                            &sys,
                            &x,
                            &v,
                            accel_cache.as_ref(),
                            alpha,
                            reference_rank,
                            config,
                            seed,
                            &mut path,
                        ) {
                            Some((nx, nv)) => {
                                x = nx;
                                v = nv;
                                kernel = kernel_at(&sys, &x, config.rank_tol);
                                reference_rank = reference_rank.max(rank_at(&sys, &x, config.rank_tol));
                                accel_cache = acceleration(&sys, &x, &v, config.rank_tol)
                                    .ok()
                                    .or(accel_cache);
                                continue;
                            }
                            None => return path,
                        }
                    }
                    Err(e) => {
                        path.failure = Some(format!("transport failed: {e}"));
                        return path;
                    }
                };

                let mut x_new = step.endpoint;
                let mut v_new = vt.normalize();
                let mut contact_events = Vec::new();
                if let Some(cb) = sticky.as_mut() {
                    match cb(&sys, &x_new) {
                        Ok(Some(outcome)) => {
                            sys = outcome.system;
                            x_new = sys.realization.clone();
                            // Contacts change the tangent space; re-derive
                            // the flex by projecting the old one.
                            let k_new = kernel_at(&sys, &x_new, config.rank_tol);
                            let proj = &k_new * (k_new.transpose() * &v_new);
                            if proj.norm() < 1e-10 {
                                path.failure =
                                    Some("flex vanished after sticky contact".into());
                                for pair in outcome.pairs {
                                    path.events.push(PathEvent {
                                        step: path.realizations.len(),
                                        kind: EventKind::StickyContact { pair },
                                    });
                                }
                                return path;
                            }
                            v_new = proj.normalize();
                            reference_rank = rank_at(&sys, &x_new, config.rank_tol);
                            for pair in outcome.pairs {
                                contact_events.push(EventKind::StickyContact { pair });
                            }
                            accel_cache = None;
                        }
                        Ok(None) => {}
                        Err(e) => {
                            path.failure = Some(format!("sticky update failed: {e}"));
                            return path;
                        }
                    }
                }

                let frame_idx = path.realizations.len();
                for kind in contact_events {
                    path.events.push(PathEvent { step: frame_idx, kind });
                }
                path.step_sizes.push(alpha);
                path.curve_lengths.push(step.curve_length);
                path.residual_log.push(sys.residual_norm(&x_new));
                path.realizations.push(x_new.clone());
                path.tangents.push(v_new.clone());

                x = x_new;
                v = v_new;
                kernel = kernel_at(&sys, &x, config.rank_tol);
                reference_rank = reference_rank.max(step.rank.max(rank_at(&sys, &x, config.rank_tol)));
                accel_cache = acceleration(&sys, &x, &v, config.rank_tol)
                    .ok()
                    .or(accel_cache);
            }
            Err(e) if routes_to_resolution(&e) => {
                match handle_singular_step(
                    &sys,
                    &x,
                    &v,
                    accel_cache.as_ref(),
                    alpha,
                    reference_rank,
                    config,
                    seed,
                    &mut path,
                ) {
                    Some((nx, nv)) => {
                        x = nx;
                        v = nv;
                        kernel = kernel_at(&sys, &x, config.rank_tol);
                        reference_rank = reference_rank.max(rank_at(&sys, &x, config.rank_tol));
                        accel_cache = acceleration(&sys, &x, &v, config.rank_tol)
                            .ok()
                            .or(accel_cache);
                    }
                    None => return path,
                }
            }
            Err(e) => {
                path.failure = Some(format!("step failed: {e}"));
                return path;
            }
        }
    }
    path
}

/// Runs resolve_singularity and appends the resulting frame and events.
/// Returns the new (x, v) on success; on failure records it and returns None.
#[allow(clippy::too_many_arguments)]
fn handle_singular_step(
    sys: &ConstraintSystem,
    x: &DVector<f64>,
    v: &DVector<f64>,
    accel: Option<&DVector<f64>>,
    alpha: f64,
    reference_rank: usize,
    config: &TrackerConfig,
    seed: u64,
    path: &mut DeformationPath,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let frame_idx = path.realizations.len();
    path.events.push(PathEvent {
        step: frame_idx,
        kind: EventKind::RankDrop,
    });
    match resolve_singularity(sys, x, v, accel, alpha, reference_rank, config, seed) {
        Ok(res) => {
            log::info!(
                "singularity resolved via {:?} at frame {frame_idx}",
                res.kind
            );
            let kernel = kernel_at(sys, &res.x_new, config.rank_tol);
            let outgoing = &res.x_new - &res.x_singular;
            let mut vt = &kernel * (kernel.transpose() * &outgoing);
            if vt.norm() < 1e-12 {
                vt = &kernel * (kernel.transpose() * v);
            }
            if vt.norm() < 1e-14 {
                path.failure = Some("no tangent after singularity resolution".into());
                return None;
            }
            let mut v_new = vt.normalize();
            if v_new.dot(&outgoing) < 0.0 {
                v_new = -v_new;
            }
            path.events.push(PathEvent {
                step: frame_idx,
                kind: res.kind.clone(),
            });
            path.step_sizes.push(alpha);
            path.curve_lengths.push((&res.x_new - x).norm());
            path.residual_log.push(sys.residual_norm(&res.x_new));
            path.realizations.push(res.x_new.clone());
            path.tangents.push(v_new.clone());
            Some((res.x_new, v_new))
        }
        Err(e) => {
            path.failure = Some(format!("singularity resolution failed: {e}"));
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use approx::assert_abs_diff_eq;

    #[test]
    fn transport_identity_bases_projects() {
        let t = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let v = DVector::from_row_slice(&[1.0, 2.0, 5.0]);
        let out = transport(&t, &t, &v).unwrap();
        // Direction of the in-span projection, rescaled to ||v||.
        let proj = DVector::from_row_slice(&[1.0, 2.0, 0.0]);
        let expected: DVector<f64> = &proj * (v.norm() / proj.norm());
        assert!((out - expected).norm() < 1e-12);
    }

    #[test]
    fn transport_in_span_vector_is_fixed() {
        let t = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let v = DVector::from_row_slice(&[3.0, -4.0, 0.0]);
        let out = transport(&t, &t, &v).unwrap();
        assert!((out - v).norm() < 1e-12);
    }

    #[test]
    fn transport_small_rotation_keeps_orientation() {
        let th = 10f64.to_radians();
        let t_prev = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let t_next = DMatrix::from_column_slice(2, 1, &[th.cos(), th.sin()]);
        let v = DVector::from_row_slice(&[2.0, 0.0]);
        let out = transport(&t_prev, &t_next, &v).unwrap();
        assert_abs_diff_eq!(out.norm(), 2.0, epsilon = 1e-12);
        assert!(out.dot(&v) > 0.0, "transport flipped the vector");
        assert!((out[1] / out[0] - th.tan()).abs() < 1e-12);
    }

    #[test]
    fn transport_rejects_rank_change() {
        let t1 = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let t2 = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let v = DVector::from_row_slice(&[1.0, 0.0, 0.0]);
        assert!(matches!(
            transport(&t1, &t2, &v),
            Err(Error::RankChange { prev: 1, next: 2 })
        ));
    }

    #[test]
    fn detect_fires_on_collinear_four_bar() {
        let sys = catalog::builtin("four_bar").unwrap();
        let start = sys.realization.clone();
        let reference = rank_at(&sys, &start, 1e-10);
        assert!(!detect_singularity(&sys, &start, reference, 1e-10));
        // All four joints on the x-axis: bars become linearly dependent.
        let collinear = DVector::from_row_slice(&[0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 2.0, 0.0]);
        assert!(sys.residual_norm(&collinear) < 1e-12);
        assert!(detect_singularity(&sys, &collinear, reference, 1e-10));
    }

    #[test]
    fn acceleration_of_zero_flex_is_zero() {
        let sys = catalog::builtin("four_bar").unwrap();
        let x = sys.realization.clone();
        let v = DVector::zeros(x.len());
        let a = acceleration(&sys, &x, &v, 1e-10).unwrap();
        assert!(a.norm() < 1e-12);
    }

    #[test]
    fn circle_acceleration_is_curvature_vector() {
        use crate::constraint::{unit_norm_constraint, ConstraintSystem, TrivialKind};
        let coords = DVector::from_row_slice(&[1.0, 0.0]);
        let sys = ConstraintSystem::new(
            2,
            1,
            coords,
            vec![unit_norm_constraint(2, 1, 0)],
            vec![],
            TrivialKind::PinsOnly,
        )
        .unwrap();
        let x = DVector::from_row_slice(&[1.0, 0.0]);
        let v = DVector::from_row_slice(&[0.0, 1.0]);
        let a = acceleration(&sys, &x, &v, 1e-10).unwrap();
        assert_abs_diff_eq!(a[0], -1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(a[1], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn stacked_solve_reproduces_two_by_two_arithmetic() {
        let top = DMatrix::from_row_slice(1, 2, &[-3.0, 2.0]);
        let gauge = DMatrix::from_row_slice(1, 2, &[2.0, 3.0]);
        let rhs = DVector::from_row_slice(&[42.0]);
        let (a, residual) = stacked_solve(&top, &gauge, &rhs, 1e-10);
        assert!(residual < 1e-10);
        assert_abs_diff_eq!(a[0], -126.0 / 13.0, epsilon = 1e-10);
        assert_abs_diff_eq!(a[1], 84.0 / 13.0, epsilon = 1e-10);
    }

    #[test]
    fn zero_steps_returns_start_only() {
        let sys = catalog::builtin("four_bar").unwrap();
        let rep = crate::rigidity::analyze(&sys, None);
        let v = rep.flex_basis.column(0).into_owned();
        let path = track_path(&sys, &v, 0, 0.05, &TrackerConfig::default(), 0, None);
        assert_eq!(path.len(), 1);
        assert!(path.failure.is_none());
        assert_eq!(path.realizations[0], sys.realization);
        assert!(path.step_sizes.is_empty());
    }

    #[test]
    fn four_bar_short_path_is_smooth_and_feasible() {
        let sys = catalog::builtin("four_bar").unwrap();
        let rep = crate::rigidity::analyze(&sys, None);
        assert_eq!(rep.flex_dim(), 1);
        let v = rep.flex_basis.column(0).into_owned();
        let config = TrackerConfig::default();
        let path = track_path(&sys, &v, 20, 0.05, &config, 0, None);
        assert!(path.failure.is_none(), "failure: {:?}", path.failure);
        assert_eq!(path.len(), 21);
        assert!(path.max_residual() <= 1e-8);
        let first_chord = (&path.realizations[1] - &path.realizations[0]).norm();
        for w in path.realizations.windows(2) {
            let chord = (&w[1] - &w[0]).norm();
            assert!(chord >= 0.8 * first_chord && chord <= 1.2 * first_chord);
        }
        for w in path.tangents.windows(2) {
            assert!(w[0].dot(&w[1]) >= 0.9);
        }
        // The motion is nontrivial: some pairwise distance changed.
        let d0 = pairwise_distance_vector(2, &path.realizations[0]);
        let d1 = pairwise_distance_vector(2, path.realizations.last().unwrap());
        let max_dev = d0
            .iter()
            .zip(&d1)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_dev > 1e-4);
    }

    #[test]
    fn transport_agrees_with_projection_on_fine_steps() {
        let sys = catalog::builtin("four_bar").unwrap();
        let rep = crate::rigidity::analyze(&sys, None);
        let v = rep.flex_basis.column(0).into_owned();
        let config = TrackerConfig::default();
        let path = track_path(&sys, &v, 5, 1e-3, &config, 0, None);
        assert!(path.failure.is_none());
        for k in 1..path.len() {
            let kernel = kernel_at(&sys, &path.realizations[k], config.rank_tol);
            let proj = &kernel * (kernel.transpose() * &path.tangents[k - 1]);
            let proj = proj.normalize();
            assert!((&path.tangents[k] - proj).norm() <= 1e-2);
        }
    }

    #[test]
    fn resolution_rejects_regular_steps() {
        let sys = catalog::builtin("four_bar").unwrap();
        let rep = crate::rigidity::analyze(&sys, None);
        let v = rep.flex_basis.column(0).into_owned();
        let x = sys.realization.clone();
        let reference = rank_at(&sys, &x, 1e-10);
        let err = resolve_singularity(
            &sys,
            &x,
            &v,
            None,
            0.05,
            reference,
            &TrackerConfig::default(),
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidSystem(_)));
    }
}
