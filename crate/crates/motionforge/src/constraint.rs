//! Quadratic geometric constraint systems.
//!
//! Every constraint is stored in the explicit form g_i(x) = x^T A_i x + b_i^T x + c_i
//! with A_i exactly symmetric, over the flattened coordinate vector x in R^(d*n)
//! (vertex j occupies slots j*d .. j*d+d-1, 0-based). Because each g_i is quadratic,
//! the expansion g(x + v) = g(x) + R(x) v + h(v) is exact to machine precision,
//! where R is the rigidity matrix (Jacobian) and h(v)_i = v^T A_i v.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Residual bound enforced on realizations at construction time.
pub const FEASIBILITY_TOL: f64 = 1e-8;

pub type Realization = DVector<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// Squared distance between two vertex blocks.
    Distance,
    /// One coordinate of one vertex fixed to a value.
    Pin,
    /// Facet normal orthogonal to an in-facet difference vector.
    Planarity,
    /// Unit squared norm of one block.
    UnitNorm,
    /// Signed 2D triangle determinant (twice the area).
    Volume2D,
    /// Anything else, given directly as (A, b, c).
    Generic,
}

/// Which vector fields count as trivial (non-deforming) flexes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrivialKind {
    /// Rigid motions: blockwise translations and rotations.
    Euclidean,
    /// Volume-preserving affine maps: translations plus trace-zero matrices.
    VolumePreserving,
    /// No trivial flexes beyond what pins remove.
    PinsOnly,
}

/// A single quadratic constraint g(x) = x^T quad x + lin^T x + const_term.
///
/// `refs` records the vertex blocks the constraint was built from (plus the
/// coordinate index for pins) and `target` its scalar parameter; both exist so
/// systems can be serialized back to the structured JSON form and so catalog
/// updates (edge contraction, sticky contacts) can find their constraint again.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticConstraint {
    pub quad: DMatrix<f64>,
    pub lin: DVector<f64>,
    pub const_term: f64,
    pub kind: ConstraintKind,
    pub refs: Vec<usize>,
    pub target: f64,
}

impl QuadraticConstraint {
    /// Builds a constraint, symmetrizing `quad` so that quad == quad^T holds
    /// entrywise. (a+b)/2 == (b+a)/2 in IEEE arithmetic, so the result is
    /// exactly symmetric.
    pub fn new(
        quad: DMatrix<f64>,
        lin: DVector<f64>,
        const_term: f64,
        kind: ConstraintKind,
    ) -> Result<Self> {
        if quad.nrows() != quad.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "quad is {}x{}",
                quad.nrows(),
                quad.ncols()
            )));
        }
        if quad.nrows() != lin.len() {
            return Err(Error::DimensionMismatch(format!(
                "quad is {0}x{0} but lin has length {1}",
                quad.nrows(),
                lin.len()
            )));
        }
        let quad = (&quad + quad.transpose()) * 0.5;
        Ok(Self {
            quad,
            lin,
            const_term,
            kind,
            refs: Vec::new(),
            target: 0.0,
        })
    }

    pub fn with_refs(mut self, refs: Vec<usize>, target: f64) -> Self {
        self.refs = refs;
        self.target = target;
        self
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        (x.transpose() * &self.quad * x)[(0, 0)] + self.lin.dot(x) + self.const_term
    }

    /// Gradient row (2 A x + b)^T.
    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.quad * x * 2.0 + &self.lin
    }

    /// The exact second-order term v^T A v of g(x + v) - g(x) - R(x) v.
    pub fn quad_form(&self, v: &DVector<f64>) -> f64 {
        (v.transpose() * &self.quad * v)[(0, 0)]
    }

    fn kind_shape_ok(&self) -> bool {
        match self.kind {
            ConstraintKind::Pin => self.quad.iter().all(|&a| a == 0.0),
            ConstraintKind::Distance | ConstraintKind::UnitNorm => {
                self.lin.iter().all(|&b| b == 0.0)
            }
            _ => true,
        }
    }
}

/// Distance constraint ||p_u - p_v||^2 = target_sq in d dimensions over n blocks.
pub fn distance_constraint(dim: usize, n: usize, u: usize, v: usize, target_sq: f64) -> Result<QuadraticConstraint> {
    if u == v {
        return Err(Error::InvalidSystem(format!(
            "distance constraint needs distinct vertices, got ({u}, {v})"
        )));
    }
    let nn = dim * n;
    let mut quad = DMatrix::zeros(nn, nn);
    for c in 0..dim {
        let iu = u * dim + c;
        let iv = v * dim + c;
        quad[(iu, iu)] = 1.0;
        quad[(iv, iv)] = 1.0;
        quad[(iu, iv)] = -1.0;
        quad[(iv, iu)] = -1.0;
    }
    Ok(
        QuadraticConstraint::new(quad, DVector::zeros(nn), -target_sq, ConstraintKind::Distance)?
            .with_refs(vec![u, v], target_sq),
    )
}

/// Pin constraint x[v*dim + coord] = value.
pub fn pin_constraint(dim: usize, n: usize, v: usize, coord: usize, value: f64) -> QuadraticConstraint {
    let nn = dim * n;
    let mut lin = DVector::zeros(nn);
    lin[v * dim + coord] = 1.0;
    QuadraticConstraint::new(DMatrix::zeros(nn, nn), lin, -value, ConstraintKind::Pin)
        .expect("pin shape")
        .with_refs(vec![v, coord], value)
}

/// Unit-norm constraint ||p_v||^2 = 1.
pub fn unit_norm_constraint(dim: usize, n: usize, v: usize) -> QuadraticConstraint {
    let nn = dim * n;
    let mut quad = DMatrix::zeros(nn, nn);
    for c in 0..dim {
        quad[(v * dim + c, v * dim + c)] = 1.0;
    }
    QuadraticConstraint::new(quad, DVector::zeros(nn), -1.0, ConstraintKind::UnitNorm)
        .expect("unit norm shape")
        .with_refs(vec![v], 1.0)
}

/// Planarity constraint a_f . (p_u - p_v) = 0 where block `f` holds the facet
/// normal and u, v are vertices of the facet.
pub fn planarity_constraint(dim: usize, n: usize, f: usize, u: usize, v: usize) -> Result<QuadraticConstraint> {
    if u == v || f == u || f == v {
        return Err(Error::InvalidSystem(
            "planarity constraint needs three distinct blocks".into(),
        ));
    }
    let nn = dim * n;
    let mut quad = DMatrix::zeros(nn, nn);
    for c in 0..dim {
        let ia = f * dim + c;
        quad[(ia, u * dim + c)] = 0.5;
        quad[(u * dim + c, ia)] = 0.5;
        quad[(ia, v * dim + c)] = -0.5;
        quad[(v * dim + c, ia)] = -0.5;
    }
    Ok(
        QuadraticConstraint::new(quad, DVector::zeros(nn), 0.0, ConstraintKind::Planarity)?
            .with_refs(vec![f, u, v], 0.0),
    )
}

/// 2D signed-volume constraint det[p_i p_j p_k; 1 1 1] = target (twice the
/// signed triangle area). Expanded, the determinant is the pure bilinear form
///   x_i (y_j - y_k) + x_j (y_k - y_i) + x_k (y_i - y_j).
pub fn volume2d_constraint(n: usize, i: usize, j: usize, k: usize, target: f64) -> Result<QuadraticConstraint> {
    if i == j || j == k || i == k {
        return Err(Error::InvalidSystem(
            "volume constraint needs three distinct vertices".into(),
        ));
    }
    let dim = 2;
    let nn = dim * n;
    let mut quad = DMatrix::zeros(nn, nn);
    let mut add = |xi: usize, yj: usize, s: f64| {
        quad[(xi * 2, yj * 2 + 1)] += s * 0.5;
        quad[(yj * 2 + 1, xi * 2)] += s * 0.5;
    };
    add(i, j, 1.0);
    add(i, k, -1.0);
    add(j, k, 1.0);
    add(j, i, -1.0);
    add(k, i, 1.0);
    add(k, j, -1.0);
    Ok(
        QuadraticConstraint::new(quad, DVector::zeros(nn), -target, ConstraintKind::Volume2D)?
            .with_refs(vec![i, j, k], target),
    )
}

/// A constraint system with a feasible reference realization.
///
/// Blocks `0..point_vertices` are geometric points; any remaining blocks are
/// direction-type auxiliaries (polytope facet normals), which rotate with the
/// system but do not translate.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    pub dim: usize,
    pub n_vertices: usize,
    pub point_vertices: usize,
    pub realization: Realization,
    pub constraints: Vec<QuadraticConstraint>,
    /// 0-based indices of pinned vertices; each contributes `dim` Pin rows.
    pub pinned: Vec<usize>,
    pub trivial_kind: TrivialKind,
}

impl ConstraintSystem {
    /// Builds a system and verifies feasibility of the realization. Pin
    /// constraints for `pinned` are appended automatically, fixing each pinned
    /// vertex at its realization coordinates.
    pub fn new(
        dim: usize,
        n_vertices: usize,
        realization: Realization,
        mut constraints: Vec<QuadraticConstraint>,
        pinned: Vec<usize>,
        trivial_kind: TrivialKind,
    ) -> Result<Self> {
        let nn = dim * n_vertices;
        if realization.len() != nn {
            return Err(Error::DimensionMismatch(format!(
                "realization has length {} but dim*n = {}",
                realization.len(),
                nn
            )));
        }
        for (i, c) in constraints.iter().enumerate() {
            if c.quad.nrows() != nn {
                return Err(Error::DimensionMismatch(format!(
                    "constraint {i} sized for {} coordinates, system has {nn}",
                    c.quad.nrows()
                )));
            }
            if !c.kind_shape_ok() {
                return Err(Error::InvalidSystem(format!(
                    "constraint {i} violates the shape of kind {:?}",
                    c.kind
                )));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for &p in &pinned {
            if p >= n_vertices {
                return Err(Error::InvalidSystem(format!(
                    "pinned vertex {p} out of range (n = {n_vertices})"
                )));
            }
            if !seen.insert(p) {
                return Err(Error::InvalidSystem(format!("vertex {p} pinned twice")));
            }
            for c in 0..dim {
                constraints.push(pin_constraint(dim, n_vertices, p, c, realization[p * dim + c]));
            }
        }
        let sys = Self {
            dim,
            n_vertices,
            point_vertices: n_vertices,
            realization,
            constraints,
            pinned,
            trivial_kind,
        };
        let residual = sys.residual_norm(&sys.realization);
        if residual > FEASIBILITY_TOL {
            return Err(Error::InfeasibleRealization {
                residual,
                tol: FEASIBILITY_TOL,
            });
        }
        Ok(sys)
    }

    /// Marks the trailing `n_vertices - point_vertices` blocks as direction
    /// blocks. Used by the polytope constructor for facet normals.
    pub fn with_point_vertices(mut self, point_vertices: usize) -> Self {
        assert!(point_vertices <= self.n_vertices);
        self.point_vertices = point_vertices;
        self
    }

    pub fn n_coords(&self) -> usize {
        self.dim * self.n_vertices
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// g(x): one residual per constraint.
    pub fn evaluate(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.n_coords(), "evaluate: coordinate count");
        DVector::from_iterator(
            self.constraints.len(),
            self.constraints.iter().map(|c| c.value(x)),
        )
    }

    /// Rigidity matrix R(x): row i is (2 A_i x + b_i)^T. Affine-linear in x.
    pub fn rigidity_matrix(&self, x: &DVector<f64>) -> DMatrix<f64> {
        assert_eq!(x.len(), self.n_coords(), "rigidity_matrix: coordinate count");
        let m = self.constraints.len();
        let nn = self.n_coords();
        let mut r = DMatrix::zeros(m, nn);
        for (i, c) in self.constraints.iter().enumerate() {
            r.row_mut(i).copy_from(&c.gradient(x).transpose());
        }
        r
    }

    /// h(v): the exact quadratic remainder of g along the direction v,
    /// h(v)_i = v^T A_i v. The second derivative of g_i along v is 2 h(v)_i
    /// for every quadratic constraint, pins included.
    pub fn hessian_form(&self, v: &DVector<f64>) -> DVector<f64> {
        assert_eq!(v.len(), self.n_coords(), "hessian_form: coordinate count");
        DVector::from_iterator(
            self.constraints.len(),
            self.constraints.iter().map(|c| c.quad_form(v)),
        )
    }

    /// Sum of constraint Hessians weighted by w: Σ w_i A_i.
    pub fn weighted_quad(&self, w: &DVector<f64>) -> DMatrix<f64> {
        assert_eq!(w.len(), self.constraints.len(), "weighted_quad: weight count");
        let nn = self.n_coords();
        let mut acc = DMatrix::zeros(nn, nn);
        for (c, &wi) in self.constraints.iter().zip(w.iter()) {
            if wi != 0.0 {
                acc += &c.quad * wi;
            }
        }
        acc
    }

    /// Euclidean norm of g(x).
    pub fn residual_norm(&self, x: &DVector<f64>) -> f64 {
        self.evaluate(x).norm()
    }

    /// Rows of the pin constraints only, used to cut trivial flexes down to
    /// the pinned subspace.
    pub fn pin_rows(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let rows: Vec<usize> = self
            .constraints
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == ConstraintKind::Pin)
            .map(|(i, _)| i)
            .collect();
        let nn = self.n_coords();
        let mut p = DMatrix::zeros(rows.len(), nn);
        for (out, &i) in rows.iter().enumerate() {
            p.row_mut(out)
                .copy_from(&self.constraints[i].gradient(x).transpose());
        }
        p
    }

    /// Position of point vertex j at x.
    pub fn block(&self, x: &DVector<f64>, j: usize) -> DVector<f64> {
        x.rows(j * self.dim, self.dim).into_owned()
    }
}
