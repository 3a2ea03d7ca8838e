//! Dense complex-matrix kernels: compact SVD, Hermitian eigendecomposition,
//! PSD projection and guarded Hermitian solves.
//!
//! Decompositions are made deterministic: every singular/eigen vector has its
//! first significant component rotated onto the positive real axis, and
//! eigenvectors with (nearly) tied eigenvalues are ordered lexicographically.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix, the numeric carrier for channels, beamformers and signals.
pub type ComplexMatrix = DMatrix<Complex64>;

/// Relative rank threshold used when none is given: `σ > 1e-10·σ_max`.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
/// Tolerance on `‖M − M^H‖_max` (scaled by `max(1, ‖M‖_max)`).
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Adjacent eigenvalues closer than this are reported as tied.
pub const TIE_TOL: f64 = 1e-9;
/// Hermitian solves refuse matrices with a larger condition number.
pub const CONDITION_LIMIT: f64 = 1e12;

#[inline]
pub fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Builds a matrix from row-major entries.
pub fn from_row_major(rows: usize, cols: usize, entries: &[Complex64]) -> Result<ComplexMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::Dimension(format!("empty {rows}x{cols} matrix")));
    }
    if entries.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "{} entries for a {rows}x{cols} matrix",
            entries.len()
        )));
    }
    let m = ComplexMatrix::from_row_slice(rows, cols, entries);
    ensure_finite(&m)?;
    Ok(m)
}

/// Real diagonal matrix.
pub fn diag(values: &[f64]) -> ComplexMatrix {
    let n = values.len();
    ComplexMatrix::from_fn(n, n, |i, j| if i == j { real(values[i]) } else { real(0.0) })
}

pub fn ensure_finite(m: &ComplexMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput("matrix has non-finite entries".into()))
    }
}

fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entrywise deviation from Hermitian symmetry, relative to `max(1, ‖M‖_max)`.
pub fn hermitian_defect(m: &ComplexMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst / max_abs(m).max(1.0)
}

pub fn is_hermitian(m: &ComplexMatrix, tol: f64) -> bool {
    hermitian_defect(m) <= tol
}

/// `‖M^H M − I‖_max`.
pub fn orthonormality_defect(m: &ComplexMatrix) -> f64 {
    let gram = m.adjoint() * m;
    let eye = ComplexMatrix::identity(m.ncols(), m.ncols());
    max_abs(&(gram - eye))
}

pub fn trace_re(m: &ComplexMatrix) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Largest singular value.
pub fn spectral_norm(m: &ComplexMatrix) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Rotates each column so that its first significant entry is real and positive.
/// Returns the unit phases that were applied (column `j` was multiplied by `phases[j]`).
pub fn normalize_column_phases(m: &mut ComplexMatrix) -> Vec<Complex64> {
    let mut phases = Vec::with_capacity(m.ncols());
    for j in 0..m.ncols() {
        let col_norm = m.column(j).norm();
        let pivot = m.column(j).iter().copied().find(|z| z.norm() > 1e-10 * col_norm);
        let phase = match pivot {
            Some(z) => z.conj() / z.norm(),
            None => real(1.0),
        };
        for z in m.column_mut(j).iter_mut() {
            *z *= phase;
        }
        phases.push(phase);
    }
    phases
}

/// Compact singular value decomposition `m = U·diag(s)·V^H`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// `rows × rank`, orthonormal columns.
    pub u: ComplexMatrix,
    /// Nonincreasing, all above `rank_tol·σ_max`.
    pub singular_values: Vec<f64>,
    /// `cols × rank`, orthonormal columns.
    pub v: ComplexMatrix,
    pub rank: usize,
}

impl SvdResult {
    pub fn reconstruct(&self) -> ComplexMatrix {
        &self.u * diag(&self.singular_values) * self.v.adjoint()
    }
}

/// Compact SVD keeping only the triplets with `σ > rank_tol·σ_max`.
pub fn compact_svd(m: &ComplexMatrix, rank_tol: f64) -> Result<SvdResult> {
    ensure_finite(m)?;
    if !(rank_tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "rank tolerance {rank_tol} must be positive"
        )));
    }
    let svd = m.clone().svd(true, true);
    let u_full = svd.u.expect("left vectors requested");
    let v_full = svd.v_t.expect("right vectors requested").adjoint();

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(Ordering::Equal)
    });
    let sigma_max = order.first().map_or(0.0, |&i| svd.singular_values[i]);
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&i| svd.singular_values[i] > rank_tol * sigma_max)
        .collect();

    let mut u = u_full.select_columns(&keep);
    let mut v = v_full.select_columns(&keep);
    let singular_values: Vec<f64> = keep.iter().map(|&i| svd.singular_values[i]).collect();

    // U·e^{iφ} paired with V·e^{iφ} leaves U·Σ·V^H unchanged.
    let phases = normalize_column_phases(&mut u);
    for (j, p) in phases.iter().enumerate() {
        for z in v.column_mut(j).iter_mut() {
            *z *= *p;
        }
    }
    Ok(SvdResult {
        rank: keep.len(),
        u,
        singular_values,
        v,
    })
}

/// Full spectral decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermEigResult {
    /// Nonincreasing.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal columns, column `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: ComplexMatrix,
    /// Indices `i` with `|λ_i − λ_{i+1}| < TIE_TOL`.
    pub near_ties: Vec<usize>,
}

impl HermEigResult {
    /// The `l` leading eigenvectors.
    pub fn leading(&self, l: usize) -> ComplexMatrix {
        self.eigenvectors.columns(0, l).into_owned()
    }

    /// `λ_l − λ_{l+1}` (1-based), or `λ_l` when `l` is the full dimension.
    pub fn eigengap(&self, l: usize) -> f64 {
        match self.eigenvalues.get(l) {
            Some(next) => self.eigenvalues[l - 1] - next,
            None => self.eigenvalues[l - 1],
        }
    }
}

fn lexicographic(a: &[Complex64], b: &[Complex64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.re.partial_cmp(&y.re).unwrap_or(Ordering::Equal) {
            Ordering::Equal => {}
            o => return o,
        }
        match x.im.partial_cmp(&y.im).unwrap_or(Ordering::Equal) {
            Ordering::Equal => {}
            o => return o,
        }
    }
    Ordering::Equal
}

pub fn herm_eig(m: &ComplexMatrix) -> Result<HermEigResult> {
    ensure_finite(m)?;
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "eigendecomposition of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let defect = hermitian_defect(m);
    if defect > HERMITIAN_TOL {
        return Err(Error::InvalidInput(format!(
            "matrix is not Hermitian (relative defect {defect:e})"
        )));
    }
    let n = m.nrows();
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(Ordering::Equal)
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = eig.eigenvectors.select_columns(&order);
    normalize_column_phases(&mut vectors);

    let near_ties: Vec<usize> = (0..n.saturating_sub(1))
        .filter(|&i| (eigenvalues[i] - eigenvalues[i + 1]).abs() < TIE_TOL)
        .collect();

    // Within each run of tied eigenvalues, order the vectors lexicographically.
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && near_ties.contains(&(end - 1)) {
            end += 1;
        }
        if end - start > 1 {
            let mut cols: Vec<Vec<Complex64>> = (start..end)
                .map(|j| vectors.column(j).iter().copied().collect())
                .collect();
            cols.sort_by(|a, b| lexicographic(b, a));
            for (offset, col) in cols.into_iter().enumerate() {
                for (i, z) in col.into_iter().enumerate() {
                    vectors[(i, start + offset)] = z;
                }
            }
        }
        start = end;
    }

    Ok(HermEigResult {
        eigenvalues,
        eigenvectors: vectors,
        near_ties,
    })
}

/// Frobenius-nearest PSD matrix: eigenvalues clipped at zero.
pub fn psd_project(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = herm_eig(m)?;
    let clipped: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let v = &eig.eigenvectors;
    let p = v * diag(&clipped) * v.adjoint();
    Ok((&p + p.adjoint()).scale(0.5))
}

/// Dominant eigen-subspace of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct PrincipalSubspace {
    /// `n × l`, orthonormal columns.
    pub basis: ComplexMatrix,
    /// All eigenvalues, nonincreasing.
    pub eigenvalues: Vec<f64>,
    /// `λ_l − λ_{l+1}`.
    pub eigengap: f64,
}

impl PrincipalSubspace {
    /// The leading subspace is not unique when the eigengap vanishes; only
    /// subspace-level (not vector-level) comparisons are meaningful then.
    pub fn is_degenerate(&self) -> bool {
        self.eigengap < TIE_TOL
    }
}

pub fn principal_subspace(m: &ComplexMatrix, l: usize) -> Result<PrincipalSubspace> {
    if l == 0 || l > m.nrows() {
        return Err(Error::Dimension(format!(
            "cannot take {l} leading eigenvectors of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let eig = herm_eig(m)?;
    Ok(PrincipalSubspace {
        basis: eig.leading(l),
        eigengap: eig.eigengap(l),
        eigenvalues: eig.eigenvalues,
    })
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &ComplexMatrix) -> Result<f64> {
    Ok(*herm_eig(m)?.eigenvalues.last().expect("nonempty matrix"))
}

/// Hermitian positive-definite matrix factored for solves, guarded by the
/// condition number limit.
pub struct HermitianSolver {
    chol: nalgebra::Cholesky<Complex64, nalgebra::Dyn>,
    pub condition: f64,
}

impl HermitianSolver {
    /// Fails with [`Error::NonInvertible`] (sensor index 0; callers re-tag it)
    /// when the matrix is not positive definite or too ill-conditioned.
    pub fn new(m: &ComplexMatrix) -> Result<Self> {
        ensure_finite(m)?;
        if !m.is_square() {
            return Err(Error::Dimension("Hermitian solve needs a square matrix".into()));
        }
        let sym = (m + m.adjoint()).scale(0.5);
        let eigs = sym.symmetric_eigenvalues();
        let lmax = eigs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lmin = eigs.iter().copied().fold(f64::INFINITY, f64::min);
        let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
        if !(condition <= CONDITION_LIMIT) {
            return Err(Error::NonInvertible { sensor: 0, condition });
        }
        let chol = sym.cholesky().ok_or(Error::NonInvertible { sensor: 0, condition })?;
        Ok(Self { chol, condition })
    }

    pub fn solve(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.chol.solve(rhs)
    }

    /// `tr(M^{-1})`.
    pub fn inverse_trace(&self) -> f64 {
        let n = self.chol.l_dirty().nrows();
        trace_re(&self.solve(&ComplexMatrix::identity(n, n)))
    }
}
