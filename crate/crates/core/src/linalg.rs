//! Complex matrix helpers shared by the estimation and receiver modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative deviation from Hermitian symmetry accepted by [`HermitianMatrix::new`].
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Square complex matrix equal to its conjugate transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    /// Wraps `m` after checking squareness and Hermitian symmetry.
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                context: "Hermitian matrix",
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("Hermitian matrix"));
        }
        let scale = m.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
        let deviation = hermitian_deviation(&m);
        if deviation > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self(m))
    }

    /// Hermitian part `(m + m^H) / 2` of a square matrix.
    pub fn from_hermitian_part(m: &CMatrix) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "Hermitian part of a non-square matrix");
        let n = m.nrows();
        let mut out = CMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
                out[(i, j)] = v;
                out[(j, i)] = v.conj();
            }
            out[(j, j)].im = 0.0;
        }
        Self(out)
    }

    /// Caller guarantees exact symmetry.
    pub(crate) fn new_unchecked(m: CMatrix) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Self(m)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(CMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    /// Real parts of the diagonal.
    pub fn diagonal(&self) -> DVector<f64> {
        DVector::from_iterator(self.dim(), (0..self.dim()).map(|i| self.0[(i, i)].re))
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }

    /// `self + shift * I`.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut m = self.0.clone();
        for i in 0..m.nrows() {
            m[(i, i)].re += shift;
        }
        Self(m)
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(&self.0)
    }

    /// Largest entry modulus.
    pub fn max_norm(&self) -> f64 {
        max_norm(&self.0)
    }

    /// Ascending real eigenvalues.
    pub fn eigenvalues(&self) -> Result<DVector<f64>> {
        let eig = hermitian_eigen(&self.0)?;
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        Ok(DVector::from_vec(vals))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.iter().copied().fold(f64::INFINITY, f64::min))
    }

    /// PSD check with the eigenvalue floor `-rel_tol * max(1, max |eigenvalue|)`.
    pub fn is_psd(&self, rel_tol: f64) -> Result<bool> {
        let vals = self.eigenvalues()?;
        let scale = vals.iter().map(|v| v.abs()).fold(1.0_f64, f64::max);
        Ok(vals.iter().all(|&v| v >= -rel_tol * scale))
    }
}

/// Largest entry of `|m - m^H|`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn frobenius_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub(crate) fn hermitian_eigen(m: &CMatrix) -> Result<SymmetricEigen<C64, nalgebra::Dyn>> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("eigendecomposition input"));
    }
    SymmetricEigen::try_new(m.clone(), f64::EPSILON, 100_000).ok_or(Error::EigenFailure)
}

/// Inverse of a Hermitian matrix under the condition-cap policy.
#[derive(Debug, Clone)]
pub struct RegularizedInverse {
    pub inverse: CMatrix,
    /// Condition number of the input before any ridge.
    pub condition: f64,
    /// Ridge added to the diagonal, if the condition cap was exceeded.
    pub ridge: Option<f64>,
}

/// Why [`regularized_inverse`] refused to invert.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InversionFailure {
    Singular { condition: f64 },
    Decomposition,
}

/// Inverts a Hermitian matrix through its eigendecomposition.
///
/// If the condition number `max|eig| / min|eig|` exceeds `cond_cap`, a ridge of
/// `1e-10 * trace / dim` is added to the diagonal. The matrix is refused when it
/// is numerically singular (`min|eig| <= dim * eps * max|eig|`) or when the
/// ridged matrix still exceeds the cap.
pub fn regularized_inverse(
    m: &CMatrix,
    cond_cap: f64,
) -> std::result::Result<RegularizedInverse, InversionFailure> {
    let n = m.nrows();
    let eig = hermitian_eigen(m).map_err(|_| InversionFailure::Decomposition)?;
    let condition = condition_number(eig.eigenvalues.iter().copied());
    let max_abs = eig.eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let min_abs = eig.eigenvalues.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    if max_abs == 0.0 || min_abs <= n as f64 * f64::EPSILON * max_abs {
        return Err(InversionFailure::Singular { condition });
    }

    let mut ridge = None;
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if condition > cond_cap {
        let trace: f64 = (0..n).map(|i| m[(i, i)].re).sum();
        let r = 1e-10 * trace / n as f64;
        vals.iter_mut().for_each(|v| *v += r);
        let ridged = condition_number(vals.iter().copied());
        if !(ridged <= cond_cap) {
            return Err(InversionFailure::Singular { condition });
        }
        ridge = Some(r);
    }

    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, lambda) in vals.iter().enumerate() {
        let inv = 1.0 / lambda;
        scaled.column_mut(j).iter_mut().for_each(|z| *z *= inv);
    }
    let inverse = scaled * v.adjoint();
    Ok(RegularizedInverse {
        inverse,
        condition,
        ridge,
    })
}

fn condition_number(vals: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = vals.fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| {
        (lo.min(v.abs()), hi.max(v.abs()))
    });
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// `x x^H` for a complex vector.
pub fn outer(x: &CVector) -> CMatrix {
    x * x.adjoint()
}
