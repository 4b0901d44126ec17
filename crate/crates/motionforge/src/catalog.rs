//! Constructors for the constraint classes shipped with the crate, plus a
//! registry of named example systems with exact reference coordinates.
//!
//! All vertex indices in this module's public API are 0-based. The builtin
//! data tables below are written 1-based, matching the published listings
//! they were transcribed from, and shifted on construction.

use std::collections::BTreeSet;

use log::warn;
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::constraint::{
    distance_constraint, planarity_constraint, unit_norm_constraint, volume2d_constraint,
    ConstraintKind, ConstraintSystem, QuadraticConstraint, TrivialKind,
};
use crate::error::{Error, Result};
use crate::newton::{damped_gauss_newton, ResidualMap};
use crate::retraction::{newton_correct, LagrangeState, SystemView, TrackerConfig};
use crate::tracking::{DeformationPath, StickyOutcome};

/// Flattens a d x n coordinate matrix into the stacked realization vector,
/// vertex j occupying slots j*d .. j*d+d.
pub fn flatten(coords: &DMatrix<f64>) -> DVector<f64> {
    let (d, n) = coords.shape();
    let mut x = DVector::zeros(d * n);
    for j in 0..n {
        for c in 0..d {
            x[j * d + c] = coords[(c, j)];
        }
    }
    x
}

fn check_edges(edges: &[(usize, usize)], n: usize) -> Result<()> {
    let mut seen = BTreeSet::new();
    for &(u, v) in edges {
        if u >= n || v >= n {
            return Err(Error::InvalidSystem(format!(
                "edge ({u}, {v}) references a vertex outside 0..{n}"
            )));
        }
        if u == v {
            return Err(Error::InvalidSystem(format!("edge ({u}, {v}) is a loop")));
        }
        if !seen.insert((u.min(v), u.max(v))) {
            return Err(Error::InvalidSystem(format!("edge ({u}, {v}) repeated")));
        }
    }
    Ok(())
}

/// Bar-joint framework: one squared-distance constraint per edge, targets
/// measured from `coords`, plus pin rows for `pins`.
pub fn framework(
    edges: &[(usize, usize)],
    coords: &DMatrix<f64>,
    pins: &[usize],
) -> Result<ConstraintSystem> {
    let (d, n) = coords.shape();
    check_edges(edges, n)?;
    let x = flatten(coords);
    let mut cons = Vec::with_capacity(edges.len());
    for &(u, v) in edges {
        let diff = coords.column(u) - coords.column(v);
        let target_sq = diff.norm_squared();
        if target_sq < 1e-20 {
            return Err(Error::InvalidSystem(format!(
                "zero-length bar between coincident vertices {u} and {v}"
            )));
        }
        cons.push(distance_constraint(d, n, u, v, target_sq)?);
    }
    ConstraintSystem::new(d, n, x, cons, pins.to_vec(), TrivialKind::Euclidean)
}

/// Equal-radius sphere packing: centers plus a shared radius. Contacts are
/// center pairs at distance 2r up to `contact_tol`.
#[derive(Debug, Clone)]
pub struct PackingSpec {
    pub radius: f64,
    pub centers: DMatrix<f64>,
    pub contact_tol: f64,
}

impl PackingSpec {
    pub fn new(radius: f64, centers: DMatrix<f64>) -> Self {
        PackingSpec {
            radius,
            centers,
            contact_tol: 1e-6,
        }
    }
}

/// Center pairs at distance 2r up to the spec's tolerance, sorted.
pub fn detect_contacts(spec: &PackingSpec) -> Vec<(usize, usize)> {
    let n = spec.centers.ncols();
    let mut out = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let dist = (spec.centers.column(u) - spec.centers.column(v)).norm();
            if (dist - 2.0 * spec.radius).abs() <= spec.contact_tol {
                out.push((u, v));
            }
        }
    }
    out
}

/// Builds the contact framework of a packing. Errors when two spheres
/// overlap by more than the contact tolerance.
pub fn sphere_packing(spec: &PackingSpec, pins: &[usize]) -> Result<ConstraintSystem> {
    let n = spec.centers.ncols();
    if spec.radius <= 0.0 {
        return Err(Error::InvalidSystem(format!(
            "sphere radius must be positive, got {}",
            spec.radius
        )));
    }
    for u in 0..n {
        for v in (u + 1)..n {
            let dist = (spec.centers.column(u) - spec.centers.column(v)).norm();
            if dist < 2.0 * spec.radius - spec.contact_tol {
                return Err(Error::InvalidSystem(format!(
                    "spheres {u} and {v} overlap: center distance {dist:.6} < 2r"
                )));
            }
        }
    }
    let edges = detect_contacts(spec);
    framework(&edges, &spec.centers, pins)
}

struct RawConstraints<'a>(&'a [QuadraticConstraint]);

impl ResidualMap for RawConstraints<'_> {
    fn residual(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.0.len(), self.0.iter().map(|c| c.value(z)))
    }

    fn jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let nn = z.len();
        let mut j = DMatrix::zeros(self.0.len(), nn);
        for (i, c) in self.0.iter().enumerate() {
            j.row_mut(i).copy_from(&c.gradient(z).transpose());
        }
        j
    }
}

/// Checks the current realization of a packing system for disk pairs that
/// moved closer than 2r - contact_tol. When a pair has, the pair sticks:
/// the system gains a distance row with target (2r)^2, x is pulled onto the
/// enlarged constraint set, and the augmented system is returned. Returns
/// None while no new pair touches. Existing rows are kept verbatim, so every
/// motion of the augmented system still satisfies the original constraints.
pub fn sticky_update(
    spec: &PackingSpec,
    system: &ConstraintSystem,
    x: &DVector<f64>,
) -> Result<Option<StickyOutcome>> {
    let d = system.dim;
    let n = system.point_vertices;
    let mut constrained = BTreeSet::new();
    for c in &system.constraints {
        if c.kind == ConstraintKind::Distance && c.refs.len() == 2 {
            constrained.insert((c.refs[0].min(c.refs[1]), c.refs[0].max(c.refs[1])));
        }
    }
    let mut pairs = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if constrained.contains(&(u, v)) {
                continue;
            }
            let dist = (system.block(x, u) - system.block(x, v)).norm();
            if dist < 2.0 * spec.radius - spec.contact_tol {
                pairs.push((u, v));
            }
        }
    }
    if pairs.is_empty() {
        return Ok(None);
    }

    let target_sq = (2.0 * spec.radius) * (2.0 * spec.radius);
    let mut cons: Vec<QuadraticConstraint> = system
        .constraints
        .iter()
        .filter(|c| c.kind != ConstraintKind::Pin)
        .cloned()
        .collect();
    for &(u, v) in &pairs {
        cons.push(distance_constraint(d, system.n_vertices, u, v, target_sq)?);
    }

    let config = TrackerConfig::default();
    // Pin rows are regenerated from whatever realization the constructor
    // sees, so pinned coordinates must come out bit-identical for the old
    // constraint list to stay a sublist of the new one.
    let snap_pins = |z: &mut DVector<f64>| {
        for &j in &system.pinned {
            for c in 0..d {
                z[j * d + c] = system.realization[j * d + c];
            }
        }
    };
    // The penetrating point is infeasible for the new row; pre-project
    // (pins included) so the system constructor's feasibility check passes,
    // then take the proper closest point to x.
    let mut proj_list = cons.clone();
    proj_list.extend(
        system
            .constraints
            .iter()
            .filter(|c| c.kind == ConstraintKind::Pin)
            .cloned(),
    );
    let pre = damped_gauss_newton(&RawConstraints(&proj_list), x.clone(), &config.gn_options());
    if !pre.converged {
        return Err(Error::CorrectorFailed {
            residual: pre.residual_norm,
        });
    }
    let mut z = pre.z;
    snap_pins(&mut z);
    let candidate = ConstraintSystem::new(
        d,
        system.n_vertices,
        z.clone(),
        cons.clone(),
        system.pinned.clone(),
        system.trivial_kind,
    )?
    .with_point_vertices(system.point_vertices);
    let m = candidate.n_constraints();
    let state = LagrangeState {
        x: z,
        lambda: DVector::zeros(m),
    };
    let (corrected, _, ok) = newton_correct(&SystemView::Original(&candidate), &state, x, &config);
    if !ok {
        return Err(Error::CorrectorFailed {
            residual: candidate.residual_norm(&corrected.x),
        });
    }
    let mut xf = corrected.x;
    snap_pins(&mut xf);
    let system = ConstraintSystem::new(
        d,
        system.n_vertices,
        xf,
        cons,
        system.pinned.clone(),
        system.trivial_kind,
    )?
    .with_point_vertices(system.point_vertices);
    Ok(Some(StickyOutcome { system, pairs }))
}

/// Adapter for `track_path`: consults `sticky_update` at every accepted step.
pub fn sticky_callback(
    spec: &PackingSpec,
) -> impl FnMut(&ConstraintSystem, &DVector<f64>) -> Result<Option<StickyOutcome>> + '_ {
    move |system, x| sticky_update(spec, system, x)
}

/// Combinatorial polytope: faces as vertex-index lists plus a geometric
/// realization of the vertices.
#[derive(Debug, Clone)]
pub struct PolytopeSpec {
    pub faces: Vec<Vec<usize>>,
    pub vertex_coords: DMatrix<f64>,
}

/// Edge set derived as the 2-element pairwise facet intersections. Errors on
/// facet pairs sharing 3 or more vertices.
pub fn polytope_edges(faces: &[Vec<usize>]) -> Result<Vec<(usize, usize)>> {
    let sets: Vec<BTreeSet<usize>> = faces.iter().map(|f| f.iter().cloned().collect()).collect();
    let mut edges = BTreeSet::new();
    for i in 0..sets.len() {
        for j in (i + 1)..sets.len() {
            let shared: Vec<usize> = sets[i].intersection(&sets[j]).cloned().collect();
            match shared.len() {
                0 | 1 => {}
                2 => {
                    edges.insert((shared[0], shared[1]));
                }
                k => {
                    return Err(Error::InvalidSystem(format!(
                        "facets {i} and {j} share {k} vertices; a facet pair may share at most 2"
                    )));
                }
            }
        }
    }
    Ok(edges.into_iter().collect())
}

/// Least-squares plane through the face's vertices: unit normal and the
/// largest out-of-plane deviation.
fn face_plane(coords: &DMatrix<f64>, face: &[usize]) -> Result<(DVector<f64>, f64)> {
    let d = coords.nrows();
    let k = face.len();
    let mut centroid = DVector::zeros(d);
    for &v in face {
        centroid += coords.column(v);
    }
    centroid /= k as f64;
    let mut centered = DMatrix::zeros(d, k);
    for (out, &v) in face.iter().enumerate() {
        centered.column_mut(out).copy_from(&(coords.column(v) - &centroid));
    }
    let svd = centered.clone().svd(true, false);
    let u = svd.u.as_ref().expect("svd with u");
    let sv = &svd.singular_values;
    if d >= 2 && (sv.len() < d - 1 || sv[d - 2] < 1e-10) {
        return Err(Error::InvalidSystem(
            "polytope face does not affinely span a hyperplane".into(),
        ));
    }
    let normal: DVector<f64> = u.column(d - 1).into_owned();
    let mut dev: f64 = 0.0;
    for out in 0..k {
        dev = dev.max(normal.dot(&centered.column(out).into_owned()).abs());
    }
    Ok((normal, dev))
}

impl PolytopeSpec {
    /// Unit face normals at the reference realization, oriented outward via
    /// the face-centroid minus body-centroid sign test. One column per face.
    pub fn normals_init(&self) -> Result<DMatrix<f64>> {
        let d = self.vertex_coords.nrows();
        let n = self.vertex_coords.ncols();
        let mut body_centroid = DVector::zeros(d);
        for j in 0..n {
            body_centroid += self.vertex_coords.column(j);
        }
        body_centroid /= n as f64;
        let mut normals = DMatrix::zeros(d, self.faces.len());
        for (fi, face) in self.faces.iter().enumerate() {
            let (mut normal, dev) = face_plane(&self.vertex_coords, face)?;
            if dev > 1e-8 {
                return Err(Error::InvalidSystem(format!(
                    "face {fi} is not planar at the given realization (deviation {dev:.2e})"
                )));
            }
            let mut face_centroid = DVector::zeros(d);
            for &v in face {
                face_centroid += self.vertex_coords.column(v);
            }
            face_centroid /= face.len() as f64;
            if normal.dot(&(&face_centroid - &body_centroid)) < 0.0 {
                normal = -normal;
            }
            normals.column_mut(fi).copy_from(&normal);
        }
        Ok(normals)
    }
}

/// Polytope with edge-length constraints. Variables are the vertex
/// coordinates plus one direction block per face holding the facet normal;
/// rows are distance per derived edge, bilinear star-form planarity per face
/// (every face vertex against the face's first listed vertex), and a unit
/// norm row per face.
pub fn polytope(spec: &PolytopeSpec, pins: &[usize]) -> Result<ConstraintSystem> {
    let d = spec.vertex_coords.nrows();
    let nv = spec.vertex_coords.ncols();
    let nf = spec.faces.len();
    for (fi, face) in spec.faces.iter().enumerate() {
        if face.len() < 3 {
            return Err(Error::InvalidSystem(format!(
                "face {fi} has {} vertices, need at least 3",
                face.len()
            )));
        }
        let mut sorted = face.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != face.len() || sorted.iter().any(|&v| v >= nv) {
            return Err(Error::InvalidSystem(format!("face {fi} has invalid vertices")));
        }
    }
    let edges = polytope_edges(&spec.faces)?;
    if d == 3 && (nv + nf) as i64 - edges.len() as i64 != 2 {
        return Err(Error::InvalidSystem(format!(
            "Euler check failed: {nv} - {} + {nf} != 2",
            edges.len()
        )));
    }
    let normals = spec.normals_init()?;

    let n_total = nv + nf;
    let mut x = DVector::zeros(d * n_total);
    for j in 0..nv {
        for c in 0..d {
            x[j * d + c] = spec.vertex_coords[(c, j)];
        }
    }
    for fi in 0..nf {
        for c in 0..d {
            x[(nv + fi) * d + c] = normals[(c, fi)];
        }
    }

    let mut cons = Vec::new();
    for &(u, v) in &edges {
        let target_sq = (spec.vertex_coords.column(u) - spec.vertex_coords.column(v)).norm_squared();
        if target_sq < 1e-20 {
            return Err(Error::InvalidSystem(format!(
                "zero-length polytope edge between {u} and {v}"
            )));
        }
        cons.push(distance_constraint(d, n_total, u, v, target_sq)?);
    }
    for (fi, face) in spec.faces.iter().enumerate() {
        let v0 = face[0];
        for &u in &face[1..] {
            cons.push(planarity_constraint(d, n_total, nv + fi, u, v0)?);
        }
        cons.push(unit_norm_constraint(d, n_total, nv + fi));
    }

    Ok(
        ConstraintSystem::new(d, n_total, x, cons, pins.to_vec(), TrivialKind::Euclidean)?
            .with_point_vertices(nv),
    )
}

/// Continuation in a single distance target: the squared target of edge
/// (u, v) is moved linearly from its current value to (gamma * length)^2 in
/// `steps` increments, re-solving from the previous frame each time. A
/// corrector failure truncates the path and records the failure.
pub fn edge_contraction_path(
    system: &ConstraintSystem,
    edge: (usize, usize),
    gamma: f64,
    steps: usize,
    config: &TrackerConfig,
) -> Result<DeformationPath> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidSystem(format!(
            "contraction fraction must lie in (0, 1], got {gamma}"
        )));
    }
    let key = (edge.0.min(edge.1), edge.0.max(edge.1));
    let idx = system
        .constraints
        .iter()
        .position(|c| {
            c.kind == ConstraintKind::Distance
                && c.refs.len() == 2
                && (c.refs[0].min(c.refs[1]), c.refs[0].max(c.refs[1])) == key
        })
        .ok_or_else(|| {
            Error::InvalidSystem(format!(
                "no distance constraint on edge ({}, {})",
                edge.0, edge.1
            ))
        })?;
    let start_sq = system.constraints[idx].target;
    let end_sq = gamma * gamma * start_sq;

    let mut work = system.clone();
    let mut x = system.realization.clone();
    let mut path = DeformationPath {
        realizations: vec![x.clone()],
        tangents: vec![DVector::zeros(x.len())],
        step_sizes: Vec::new(),
        curve_lengths: Vec::new(),
        events: Vec::new(),
        residual_log: vec![system.residual_norm(&x)],
        failure: None,
    };
    for j in 1..=steps {
        let tau = j as f64 / steps as f64;
        let target_sq = (1.0 - tau) * start_sq + tau * end_sq;
        work.constraints[idx] =
            distance_constraint(work.dim, work.n_vertices, key.0, key.1, target_sq)?;
        let state = LagrangeState {
            x: x.clone(),
            lambda: DVector::zeros(work.n_constraints()),
        };
        let view = SystemView::Original(&work);
        let (corrected, _, ok) = newton_correct(&view, &state, &x, config);
        if !ok {
            path.failure = Some(format!(
                "corrector failed at contraction step {j} (target {target_sq:.6})"
            ));
            return Ok(path);
        }
        let chord = &corrected.x - &x;
        let chord_norm = chord.norm();
        path.step_sizes.push((end_sq - start_sq).abs() / steps as f64);
        path.curve_lengths.push(chord_norm);
        path.tangents.push(if chord_norm > 1e-15 {
            chord / chord_norm
        } else {
            DVector::zeros(x.len())
        });
        path.residual_log.push(work.residual_norm(&corrected.x));
        x = corrected.x;
        path.realizations.push(x.clone());
    }
    Ok(path)
}

fn affine_rank(coords: &DMatrix<f64>, verts: &[usize]) -> usize {
    let d = coords.nrows();
    let k = verts.len();
    if k <= 1 {
        return 0;
    }
    let mut centroid = DVector::zeros(d);
    for &v in verts {
        centroid += coords.column(v);
    }
    centroid /= k as f64;
    let mut centered = DMatrix::zeros(d, k);
    for (out, &v) in verts.iter().enumerate() {
        centered.column_mut(out).copy_from(&(coords.column(v) - &centroid));
    }
    crate::linalg::rank_revealed(&centered, 1e-10).rank
}

fn panel_edges(panels: &[Vec<usize>], coords: &DMatrix<f64>) -> Result<BTreeSet<(usize, usize)>> {
    let d = coords.nrows();
    let mut edges = BTreeSet::new();
    for (pi, panel) in panels.iter().enumerate() {
        if panel.len() < 3 {
            return Err(Error::InvalidSystem(format!(
                "panel {pi} has {} vertices, need at least 3",
                panel.len()
            )));
        }
        if affine_rank(coords, panel) < d.min(panel.len() - 1) {
            warn!("panel {pi} is affinely degenerate; its clique will carry extra flexes");
        }
        for i in 0..panel.len() {
            for j in (i + 1)..panel.len() {
                let (u, v) = (panel[i], panel[j]);
                edges.insert((u.min(v), u.max(v)));
            }
        }
    }
    Ok(edges)
}

/// Panels as rigid bodies: the complete distance graph on each panel, shared
/// pairs (hinges) deduplicated.
pub fn body_hinge(panels: &[Vec<usize>], coords: &DMatrix<f64>) -> Result<ConstraintSystem> {
    let edges: Vec<(usize, usize)> = panel_edges(panels, coords)?.into_iter().collect();
    framework(&edges, coords, &[])
}

/// Panel cliques plus connecting bars.
pub fn body_bar(
    bars: &[(usize, usize)],
    panels: &[Vec<usize>],
    coords: &DMatrix<f64>,
) -> Result<ConstraintSystem> {
    let mut edges = panel_edges(panels, coords)?;
    for &(u, v) in bars {
        edges.insert((u.min(v), u.max(v)));
    }
    let edges: Vec<(usize, usize)> = edges.into_iter().collect();
    framework(&edges, coords, &[])
}

/// Triangle complex in the plane with fixed signed areas. The determinant
/// constraint is quadratic exactly in dimension 2, which is why other
/// dimensions are rejected.
pub fn volume_hypergraph(
    triangles: &[[usize; 3]],
    coords: &DMatrix<f64>,
    pins: &[usize],
) -> Result<ConstraintSystem> {
    let (d, n) = coords.shape();
    if d != 2 {
        return Err(Error::InvalidSystem(format!(
            "volume constraints are supported for planar systems only, got dimension {d}"
        )));
    }
    let mut seen = BTreeSet::new();
    let mut cons = Vec::with_capacity(triangles.len());
    for tri in triangles {
        let [i, j, k] = *tri;
        if i >= n || j >= n || k >= n {
            return Err(Error::InvalidSystem(format!(
                "triangle {tri:?} references a vertex outside 0..{n}"
            )));
        }
        let mut key = *tri;
        key.sort_unstable();
        if !seen.insert(key) {
            return Err(Error::InvalidSystem(format!("triangle {tri:?} repeated")));
        }
        let target = (coords[(0, j)] - coords[(0, i)]) * (coords[(1, k)] - coords[(1, i)])
            - (coords[(0, k)] - coords[(0, i)]) * (coords[(1, j)] - coords[(1, i)]);
        cons.push(volume2d_constraint(n, i, j, k, target)?);
    }
    ConstraintSystem::new(
        2,
        n,
        flatten(coords),
        cons,
        pins.to_vec(),
        TrivialKind::VolumePreserving,
    )
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 10] = [
    "three_prism",
    "double_watt",
    "four_bar",
    "k3_collinear",
    "three_prism_symmetric",
    "disk_packing_4",
    "octahedral_volume",
    "cube_polytope",
    "pentagon_body_hinge",
    "cube_body_bar",
];

fn shift(edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    edges.iter().map(|&(u, v)| (u - 1, v - 1)).collect()
}

fn shift_verts(verts: &[usize]) -> Vec<usize> {
    verts.iter().map(|&v| v - 1).collect()
}

fn coords_from_rows(rows: &[&[f64]]) -> DMatrix<f64> {
    let d = rows.len();
    let n = rows[0].len();
    DMatrix::from_fn(d, n, |r, c| rows[r][c])
}

fn three_prism() -> Result<ConstraintSystem> {
    let s = 3f64.sqrt() / 2.0;
    let coords = coords_from_rows(&[
        &[0.0, 0.0, s, 1.0, 1.0, 1.0 + s],
        &[0.0, 1.0, 0.5, 0.0, 1.0, 0.5],
    ]);
    let edges = [(1, 2), (1, 3), (2, 3), (4, 5), (5, 6), (4, 6), (1, 4), (2, 5), (3, 6)];
    framework(&shift(&edges), &coords, &shift_verts(&[1, 4]))
}

fn three_prism_symmetric() -> Result<ConstraintSystem> {
    let s = 3f64.sqrt();
    let coords = coords_from_rows(&[
        &[1.0, -0.5, -0.5, 2.0, -1.0, -1.0],
        &[0.0, s / 2.0, -s / 2.0, 0.0, s, -s],
    ]);
    let edges = [(1, 2), (1, 3), (1, 4), (2, 3), (2, 5), (3, 6), (4, 5), (4, 6), (5, 6)];
    framework(&shift(&edges), &coords, &[])
}

/// Two straight-line linkages joined at their coupler midpoints (vertex 3 on
/// the left, 9 on the right). Each coupler is a rigid triangulated body whose
/// marked vertex sits exactly mid-segment, so the configuration curve is
/// regular everywhere except this symmetric realization, where the marked
/// points reverse and the rank drops by one: a cusp of the deformation space.
/// The couplers are braced through the off-line vertices 4 and 8; tight
/// (collinear) triangles are avoided on purpose, since their buckling modes
/// sit inside corrector slack and make the rank flicker along the path.
fn double_watt() -> Result<ConstraintSystem> {
    let coords = coords_from_rows(&[
        &[0.0, 1.0, 2.0, 1.0, 3.0, 4.0, 5.0, 7.0, 6.0, 7.0, 8.0],
        &[0.0, 0.0, 1.0, 2.0, 2.0, 2.0, 2.0, 2.0, 1.0, 0.0, 0.0],
    ]);
    let edges = [
        (1, 2),
        (2, 3),
        (3, 4),
        (4, 5),
        (5, 6),
        (6, 7),
        (7, 8),
        (8, 9),
        (9, 10),
        (10, 11),
        (2, 4),
        (3, 5),
        (7, 9),
        (8, 10),
        (3, 9),
    ];
    framework(&shift(&edges), &coords, &shift_verts(&[1, 6, 11]))
}

fn four_bar() -> Result<ConstraintSystem> {
    let coords = coords_from_rows(&[&[0.0, 1.0, 0.0, 1.0], &[0.0, 0.0, 1.0, 1.0]]);
    let edges = [(1, 3), (3, 4), (4, 2)];
    framework(&shift(&edges), &coords, &shift_verts(&[1, 2]))
}

fn k3_collinear() -> Result<ConstraintSystem> {
    let coords = coords_from_rows(&[&[0.0, 1.0, 2.0], &[0.0, 0.0, 0.0]]);
    let edges = [(1, 2), (1, 3), (2, 3)];
    framework(&shift(&edges), &coords, &[])
}

/// The 4-disk chain: three tangencies, one pinned disk, a 2-dimensional
/// nontrivial flex space, and a 4-bar linkage as limit case.
pub fn disk_packing_4_spec() -> PackingSpec {
    let coords = coords_from_rows(&[
        &[0.0, 7.0 / 4.0, 7.0 / 2.0, 7.0 / 2.0 + 2f64.sqrt()],
        &[0.0, -(15f64 / 16.0).sqrt(), 0.0, 2f64.sqrt()],
    ]);
    PackingSpec::new(1.0, coords)
}

fn disk_packing_4() -> Result<ConstraintSystem> {
    sphere_packing(&disk_packing_4_spec(), &shift_verts(&[1]))
}

fn octahedral_volume() -> Result<ConstraintSystem> {
    let coords = coords_from_rows(&[&[0.0, 3.0, 0.0, 1.0, 1.0, 0.5], &[0.0, 0.0, 3.0, 1.0, 0.5, 1.0]]);
    let triangles_1b = [[1, 3, 6], [1, 2, 5], [2, 3, 4], [1, 5, 6], [6, 4, 5]];
    let triangles: Vec<[usize; 3]> = triangles_1b
        .iter()
        .map(|t| [t[0] - 1, t[1] - 1, t[2] - 1])
        .collect();
    volume_hypergraph(&triangles, &coords, &shift_verts(&[4, 5, 6]))
}

fn unit_cube_coords() -> DMatrix<f64> {
    coords_from_rows(&[
        &[0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0],
        &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0],
        &[0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0],
    ])
}

/// Cube faces, 1-based.
const CUBE_FACES: [[usize; 4]; 6] = [
    [1, 2, 3, 4],
    [5, 6, 7, 8],
    [1, 2, 6, 5],
    [2, 3, 7, 6],
    [3, 4, 8, 7],
    [1, 4, 8, 5],
];

/// The regular unit cube. Its three classes of four parallel edges make it a
/// degenerate realization: it carries three equilibrium stresses, one per
/// edge direction, and flexes as a zonotope.
pub fn regular_cube_spec() -> PolytopeSpec {
    PolytopeSpec {
        faces: CUBE_FACES.iter().map(|f| shift_verts(f)).collect(),
        vertex_coords: unit_cube_coords(),
    }
}

/// Supporting planes of a generic convex hexahedron: outward normal and
/// offset (n . x = c) per face, in CUBE_FACES order (bottom, top, front,
/// right, back, left). Tilted and shifted versions of the unit cube's planes.
const CUBE_PLANES: [([f64; 3], f64); 6] = [
    ([-0.26, -0.13, -1.0], -0.14),
    ([-0.16, -0.13, 1.0], 0.87),
    ([0.25, -1.0, 0.04], 0.09),
    ([1.0, 0.0, -0.04], 0.92),
    ([0.28, 1.0, 0.08], 1.03),
    ([-1.0, -0.14, -0.19], 0.14),
];

/// Convex hexahedron with the cube's combinatorics at a generic realization:
/// every vertex is the intersection of its three supporting planes, so the
/// faces are planar to machine precision.
///
/// The regular cube is unusable here: its parallel-edge stresses pair to zero
/// with the quadratic term of every flex, and since the constraints are exact
/// quadratics that rules out changing any single edge length along a motion,
/// at any order. The generic realization has no stresses, is infinitesimally
/// rigid, and supports regular single-edge continuation.
pub fn cube_polytope_spec() -> PolytopeSpec {
    let faces: Vec<Vec<usize>> = CUBE_FACES.iter().map(|f| shift_verts(f)).collect();
    let mut coords = DMatrix::zeros(3, 8);
    for v in 0..8 {
        let incident: Vec<usize> = (0..6).filter(|&fi| faces[fi].contains(&v)).collect();
        debug_assert_eq!(incident.len(), 3);
        let n = |k: usize| CUBE_PLANES[incident[k]].0;
        let a = Matrix3::new(
            n(0)[0], n(0)[1], n(0)[2],
            n(1)[0], n(1)[1], n(1)[2],
            n(2)[0], n(2)[1], n(2)[2],
        );
        let b = Vector3::new(
            CUBE_PLANES[incident[0]].1,
            CUBE_PLANES[incident[1]].1,
            CUBE_PLANES[incident[2]].1,
        );
        let p = a.lu().solve(&b).expect("supporting plane triple is nondegenerate");
        coords.column_mut(v).copy_from(&p);
    }
    PolytopeSpec { faces, vertex_coords: coords }
}

fn cube_polytope() -> Result<ConstraintSystem> {
    polytope(&cube_polytope_spec(), &[])
}

fn pentagon_body_hinge() -> Result<ConstraintSystem> {
    use std::f64::consts::PI;
    let mut coords = DMatrix::zeros(3, 6);
    coords[(2, 0)] = 1.0;
    for k in 1..=5usize {
        let angle = 2.0 * PI * k as f64 / 5.0;
        coords[(0, k)] = angle.cos();
        coords[(1, k)] = angle.sin();
    }
    let panels_1b = [[1, 2, 3], [1, 3, 4], [1, 4, 5], [1, 5, 6], [1, 6, 2]];
    let panels: Vec<Vec<usize>> = panels_1b.iter().map(|p| shift_verts(p)).collect();
    body_hinge(&panels, &coords)
}

fn cube_body_bar() -> Result<ConstraintSystem> {
    let bars = [(1, 5), (2, 6), (3, 7), (4, 8)];
    let panels_1b = [[1, 2, 3, 4], [5, 6, 7, 8]];
    let panels: Vec<Vec<usize>> = panels_1b.iter().map(|p| shift_verts(p)).collect();
    body_bar(&shift(&bars), &panels, &unit_cube_coords())
}

/// Builds one of the named example systems.
pub fn builtin(name: &str) -> Result<ConstraintSystem> {
    match name {
        "three_prism" => three_prism(),
        "double_watt" => double_watt(),
        "four_bar" => four_bar(),
        "k3_collinear" => k3_collinear(),
        "three_prism_symmetric" => three_prism_symmetric(),
        "disk_packing_4" => disk_packing_4(),
        "octahedral_volume" => octahedral_volume(),
        "cube_polytope" => cube_polytope(),
        "pentagon_body_hinge" => pentagon_body_hinge(),
        "cube_body_bar" => cube_body_bar(),
        _ => Err(Error::UnknownBuiltin(format!(
            "{name} (available: {})",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

/// The packing spec behind a builtin, for contact dynamics and rendering.
pub fn builtin_packing(name: &str) -> Option<PackingSpec> {
    match name {
        "disk_packing_4" => Some(disk_packing_4_spec()),
        _ => None,
    }
}
