//! Rank-revealing decompositions shared by the rigidity and tracking layers.
//!
//! nalgebra's thin SVD of an m x n matrix only returns min(m, n) singular
//! vectors per side, so the null space on the wide side is recovered from a
//! second SVD of the zero-padded (square) matrix. Padding rows leaves the
//! right singular structure untouched and vice versa.

use nalgebra::{DMatrix, DVector};

/// Relative cutoff below which a singular value counts as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// SVD-based rank decision plus orthonormal kernel and cokernel bases.
pub struct RankRevealed {
    pub rank: usize,
    /// Singular values, descending.
    pub singular_values: DVector<f64>,
    /// n x (n - rank), orthonormal columns spanning the right null space.
    pub kernel: DMatrix<f64>,
    /// m x (m - rank), orthonormal columns spanning the left null space.
    pub cokernel: DMatrix<f64>,
}

impl RankRevealed {
    pub fn sigma_max(&self) -> f64 {
        if self.singular_values.is_empty() {
            0.0
        } else {
            self.singular_values[0]
        }
    }
}

fn count_rank(sv: &DVector<f64>, rel_tol: f64) -> usize {
    let smax = if sv.is_empty() { 0.0 } else { sv[0] };
    if smax <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Computes rank and both null-space bases of `a` with relative tolerance `rel_tol`.
pub fn rank_revealed(a: &DMatrix<f64>, rel_tol: f64) -> RankRevealed {
    let (m, n) = a.shape();
    assert!(m > 0 && n > 0, "rank_revealed on empty matrix");

    let svd = a.clone().svd(true, true);
    let sv = DVector::from_iterator(
        svd.singular_values.len(),
        svd.singular_values.iter().copied(),
    );
    let rank = count_rank(&sv, rel_tol);

    // Thin SVD is complete on the short side only.
    let cokernel = if m <= n {
        let u = svd.u.as_ref().expect("svd u");
        u.columns(rank, m - rank).into_owned()
    } else {
        null_space_padded(&a.transpose(), rank)
    };
    let kernel = if n <= m {
        let vt = svd.v_t.as_ref().expect("svd v_t");
        vt.rows(rank, n - rank).transpose()
    } else {
        null_space_padded(a, rank)
    };

    RankRevealed {
        rank,
        singular_values: sv,
        kernel,
        cokernel,
    }
}

/// Right null space of a wide matrix via SVD of the row-padded square matrix.
/// Zero rows do not alter right singular vectors, and the padded problem has a
/// full n x n V factor.
fn null_space_padded(a: &DMatrix<f64>, rank: usize) -> DMatrix<f64> {
    let (m, n) = a.shape();
    debug_assert!(m < n);
    let mut padded = DMatrix::zeros(n, n);
    padded.view_mut((0, 0), (m, n)).copy_from(a);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.as_ref().expect("svd v_t");
    vt.rows(rank, n - rank).transpose()
}

/// Orthonormal basis of the column span of `a`, discarding directions whose
/// singular value falls below `abs_tol` (relative to the largest when that is
/// larger than one).
pub fn orthonormal_span(a: &DMatrix<f64>, abs_tol: f64) -> DMatrix<f64> {
    let (m, n) = a.shape();
    if n == 0 {
        return DMatrix::zeros(m, 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.as_ref().expect("svd u");
    let smax = svd.singular_values.max();
    let cut = abs_tol * smax.max(1.0);
    let dim = svd.singular_values.iter().filter(|&&s| s > cut).count();
    u.columns(0, dim.min(u.ncols())).into_owned()
}

/// Basis of span(gens) ∩ ker(rows): kernel combinations of `rows * gens`
/// mapped back through the generators and orthonormalized.
pub fn intersect_span_with_nullspace(
    gens: &DMatrix<f64>,
    rows: &DMatrix<f64>,
    tol: f64,
) -> DMatrix<f64> {
    if gens.ncols() == 0 {
        return gens.clone();
    }
    if rows.nrows() == 0 {
        return orthonormal_span(gens, tol);
    }
    let restricted = rows * gens;
    let rr = rank_revealed(&restricted, tol);
    if rr.kernel.ncols() == 0 {
        return DMatrix::zeros(gens.nrows(), 0);
    }
    orthonormal_span(&(gens * rr.kernel), tol)
}

/// Minimum-norm least-squares solution of `a x = b` through the SVD
/// pseudoinverse with relative singular-value cutoff `rel_tol`.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = if smax > 0.0 { rel_tol * smax } else { rel_tol };
    svd.solve(b, eps).expect("svd solve")
}
