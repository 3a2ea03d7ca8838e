//! Principal angles and subspace distances on the Grassmann manifold.
//!
//! A point is represented by any orthonormal basis of the subspace; every
//! quantity here is invariant under `basis ↦ basis·Q` for unitary `Q`.

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, orthonormality_defect, spectral_norm, trace_re, ComplexMatrix};
use crate::random::orthonormalize;

/// Basis orthonormality tolerance accepted by [`Subspace::new`].
pub const BASIS_TOL: f64 = 1e-10;

/// A subspace of `C^N` held through an `N × M` orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: ComplexMatrix,
}

impl Subspace {
    pub fn new(basis: ComplexMatrix) -> Result<Self> {
        let (n, m) = basis.shape();
        if m == 0 || m > n {
            return Err(Error::Dimension(format!("a {n}x{m} basis cannot span a subspace")));
        }
        let defect = orthonormality_defect(&basis);
        if !(defect <= BASIS_TOL) {
            return Err(Error::InvalidInput(format!(
                "basis is not orthonormal (defect {defect:e})"
            )));
        }
        Ok(Self { basis })
    }

    /// Subspace spanned by the columns of an arbitrary full-column-rank matrix.
    pub fn span_of(m: &ComplexMatrix) -> Result<Self> {
        Self::new(orthonormalize(m))
    }

    pub fn basis(&self) -> &ComplexMatrix {
        &self.basis
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Orthogonal projector `X·X^H`.
    pub fn projector(&self) -> ComplexMatrix {
        &self.basis * self.basis.adjoint()
    }

    pub fn into_basis(self) -> ComplexMatrix {
        self.basis
    }
}

/// Principal angles in `[0, π/2]`, nondecreasing, `min(M_X, M_Y)` of them.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalAngles {
    pub angles: Vec<f64>,
}

impl PrincipalAngles {
    pub fn sines(&self) -> impl Iterator<Item = f64> + '_ {
        self.angles.iter().map(|t| t.sin())
    }
}

fn same_ambient(x: &Subspace, y: &Subspace) -> Result<()> {
    if x.ambient_dim() != y.ambient_dim() {
        return Err(Error::Dimension(format!(
            "subspaces live in C^{} and C^{}",
            x.ambient_dim(),
            y.ambient_dim()
        )));
    }
    Ok(())
}

fn same_dims(x: &Subspace, y: &Subspace) -> Result<()> {
    same_ambient(x, y)?;
    if x.dim() != y.dim() {
        return Err(Error::Dimension(format!(
            "distance between subspaces of dimensions {} and {}",
            x.dim(),
            y.dim()
        )));
    }
    Ok(())
}

fn sorted_singular_values(m: &ComplexMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Principal angles from the singular values of `X^H·Y`.
///
/// Cosines are clamped to `[0, 1]`. Angles below π/4 are taken from the sines
/// (singular values of `Y − X·X^H·Y`) instead, where `arccos` loses precision.
pub fn principal_angles(x: &Subspace, y: &Subspace) -> Result<PrincipalAngles> {
    same_ambient(x, y)?;
    // Angles are symmetric; let `x` be the larger subspace so that `y` has
    // exactly min(M_X, M_Y) columns.
    let (x, y) = if x.dim() >= y.dim() { (x, y) } else { (y, x) };
    let cross = x.basis.adjoint() * &y.basis;
    let cosines = sorted_singular_values(&cross);
    let residual = &y.basis - &x.basis * &cross;
    let mut sines = sorted_singular_values(&residual);
    sines.reverse();

    let mut angles: Vec<f64> = cosines
        .iter()
        .zip(&sines)
        .map(|(&c, &s)| {
            let c = c.clamp(0.0, 1.0);
            if c * c < 0.5 {
                c.acos()
            } else {
                s.clamp(0.0, 1.0).asin()
            }
        })
        .collect();
    angles.sort_by(f64::total_cmp);
    Ok(PrincipalAngles { angles })
}

/// Projection 2-norm distance `‖sin θ‖_∞`.
pub fn dist_p2(x: &Subspace, y: &Subspace) -> Result<f64> {
    same_dims(x, y)?;
    Ok(principal_angles(x, y)?.sines().fold(0.0, f64::max))
}

/// Projection F-norm distance `‖sin θ‖_2`.
pub fn dist_pf(x: &Subspace, y: &Subspace) -> Result<f64> {
    same_dims(x, y)?;
    Ok(principal_angles(x, y)?.sines().map(|s| s * s).sum::<f64>().sqrt())
}

/// Geodesic (arc-length) distance `sqrt(Σ θ_i²)`.
pub fn dist_geodesic(x: &Subspace, y: &Subspace) -> Result<f64> {
    same_dims(x, y)?;
    Ok(principal_angles(x, y)?.angles.iter().map(|t| t * t).sum::<f64>().sqrt())
}

/// `‖X·X^H − Y·Y^H‖_2`, the matrix form of [`dist_p2`].
pub fn dist_p2_matrix(x: &Subspace, y: &Subspace) -> Result<f64> {
    same_dims(x, y)?;
    Ok(spectral_norm(&(x.projector() - y.projector())))
}

/// `sqrt(M − tr(X^H·Y·Y^H·X))`, the matrix form of [`dist_pf`].
pub fn dist_pf_matrix(x: &Subspace, y: &Subspace) -> Result<f64> {
    same_dims(x, y)?;
    let cross = x.basis.adjoint() * &y.basis;
    let overlap = trace_re(&(&cross * cross.adjoint()));
    Ok((x.dim() as f64 - overlap).max(0.0).sqrt())
}

/// `(d_P2²(U, F), 1 − λ_min(U^H·F·F^H·U))`; the two agree for equal dimensions.
pub fn p2_lambda_identity(u: &Subspace, f: &Subspace) -> Result<(f64, f64)> {
    let d = dist_p2(u, f)?;
    let cross = u.basis.adjoint() * &f.basis;
    let lmin = min_eigenvalue(&(&cross * cross.adjoint()))?;
    Ok((d * d, 1.0 - lmin))
}
