//! Bussgang linearization of the one-bit quantizer and the BLMMSE estimator.
//!
//! For `r = csign(y)` with Gaussian `y ~ CN(0, C_y)` the quantizer output is
//! written `r = A y + q`, where `A = sqrt(2/pi) diag(C_y)^{-1/2}` makes `q`
//! uncorrelated with `y`, and the output covariance follows the arcsine law.
//! The BLMMSE estimate is then `C_h A^H C_r^{-1} r`. The plug-in variant runs
//! the same code on an estimated `C_y`.

use std::f64::consts::{FRAC_2_PI, FRAC_PI_2};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{regularized_inverse, CMatrix, CVector, HermitianMatrix, InversionFailure, C64};
use crate::quantizer::QuantizedVector;

pub const DEFAULT_DIAG_FLOOR: f64 = 1e-8;
pub const DEFAULT_COND_CAP: f64 = 1e12;
/// Normalized correlations up to `1 + CLIP_TOL` in magnitude are clipped to 1.
pub const CLIP_TOL: f64 = 1e-9;

/// Numerical guards for building filters and receivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterOptions {
    pub diag_floor: f64,
    pub cond_cap: f64,
}

impl Default for FilterOptions {
    fn default() -> Self {
        Self {
            diag_floor: DEFAULT_DIAG_FLOOR,
            cond_cap: DEFAULT_COND_CAP,
        }
    }
}

fn checked_diagonal(c_y: &HermitianMatrix, floor: f64) -> Result<DVector<f64>> {
    let d = c_y.diagonal();
    for (index, &value) in d.iter().enumerate() {
        if !(value > floor) {
            return Err(Error::DiagonalUnderflow { index, value, floor });
        }
    }
    Ok(d)
}

/// Diagonal of the Bussgang gain, `sqrt(2/pi) / sqrt([C_y]_ii)`.
pub fn bussgang_gain(c_y: &HermitianMatrix, diag_floor: f64) -> Result<DVector<f64>> {
    let d = checked_diagonal(c_y, diag_floor)?;
    Ok(d.map(|v| FRAC_2_PI.sqrt() / v.sqrt()))
}

fn clipped(x: f64, row: usize, col: usize) -> Result<f64> {
    if x.abs() > 1.0 + CLIP_TOL {
        return Err(Error::NormalizationOverflow {
            row,
            col,
            value: x.abs(),
        });
    }
    Ok(x.clamp(-1.0, 1.0))
}

/// Arcsine law: covariance of `csign(y)` for `y ~ CN(0, C_y)`.
///
/// Real and imaginary parts of the normalized covariance go through `arcsin`
/// separately and are scaled by `2/pi`. The diagonal is exactly one.
pub fn arcsine_map(c_y: &HermitianMatrix, diag_floor: f64) -> Result<HermitianMatrix> {
    let d = checked_diagonal(c_y, diag_floor)?;
    let s = d.map(f64::sqrt);
    let n = c_y.dim();
    let m = c_y.as_matrix();
    let mut out = CMatrix::zeros(n, n);
    for j in 0..n {
        out[(j, j)] = C64::new(1.0, 0.0);
        for i in 0..j {
            let z = m[(i, j)] / (s[i] * s[j]);
            let re = clipped(z.re, i, j)?.asin();
            let im = clipped(z.im, i, j)?.asin();
            let v = C64::new(re, im) * FRAC_2_PI;
            out[(i, j)] = v;
            out[(j, i)] = v.conj();
        }
    }
    Ok(HermitianMatrix::new_unchecked(out))
}

/// Inverse of the arcsine law on a correlation of sign data:
/// `sin(pi/2 * Re) + j sin(pi/2 * Im)`, elementwise.
pub fn inverse_arcsine_map(c_r: &HermitianMatrix) -> HermitianMatrix {
    let n = c_r.dim();
    let m = c_r.as_matrix();
    let mut out = CMatrix::zeros(n, n);
    for j in 0..n {
        out[(j, j)] = C64::new((FRAC_PI_2 * m[(j, j)].re).sin(), 0.0);
        for i in 0..j {
            let z = m[(i, j)];
            let v = C64::new((FRAC_PI_2 * z.re).sin(), (FRAC_PI_2 * z.im).sin());
            out[(i, j)] = v;
            out[(j, i)] = v.conj();
        }
    }
    HermitianMatrix::new_unchecked(out)
}

/// Which covariance a filter was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Oracle,
    PlugIn,
}

/// The linear map `C_h A^H C_r^{-1}` taking quantized observations to channel
/// estimates.
#[derive(Debug, Clone)]
pub struct BlmmseFilter {
    matrix: CMatrix,
    provenance: Provenance,
    c_y: HermitianMatrix,
    condition: f64,
    ridge: Option<f64>,
}

impl BlmmseFilter {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn covariance(&self) -> &HermitianMatrix {
        &self.c_y
    }

    /// Condition number of the arcsine-law covariance before regularization.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Ridge added to `C_r`, when its condition number exceeded the cap.
    pub fn ridge(&self) -> Option<f64> {
        self.ridge
    }

    /// A filter with an arbitrary matrix, e.g. a perturbed one for comparisons.
    pub fn from_matrix(matrix: CMatrix, c_y: HermitianMatrix, provenance: Provenance) -> Self {
        Self {
            matrix,
            provenance,
            c_y,
            condition: f64::NAN,
            ridge: None,
        }
    }
}

/// Builds `(C_y - n0 I) A C_r^{-1}` with `A` and `C_r` derived from `c_y`.
/// The oracle and plug-in variants differ only in the `c_y` passed in.
pub fn build_blmmse_filter(
    c_y: &HermitianMatrix,
    n0: f64,
    provenance: Provenance,
    opts: FilterOptions,
) -> Result<BlmmseFilter> {
    let gain = bussgang_gain(c_y, opts.diag_floor)?;
    let c_r = arcsine_map(c_y, opts.diag_floor)?;
    let inv = regularized_inverse(c_r.as_matrix(), opts.cond_cap).map_err(|e| match e {
        InversionFailure::Singular { condition } => Error::SingularArcsineMatrix { condition },
        InversionFailure::Decomposition => Error::EigenFailure,
    })?;
    let mut c_hr = c_y.shifted(-n0).into_inner();
    for (j, g) in gain.iter().enumerate() {
        c_hr.column_mut(j).iter_mut().for_each(|z| *z *= *g);
    }
    let matrix = c_hr * inv.inverse;
    if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("BLMMSE filter"));
    }
    Ok(BlmmseFilter {
        matrix,
        provenance,
        c_y: c_y.clone(),
        condition: inv.condition,
        ridge: inv.ridge,
    })
}

/// `f * r`.
pub fn estimate_channel(f: &BlmmseFilter, r: &QuantizedVector) -> Result<CVector> {
    if f.matrix.ncols() != r.len() {
        return Err(Error::DimensionMismatch {
            context: "channel estimate",
            expected: f.matrix.ncols(),
            found: r.len(),
        });
    }
    Ok(&f.matrix * r.as_vector())
}

/// Closed-form `E ||h - F csign(h + n)||^2` for Gaussian `h ~ CN(0, C_h)` and
/// `C_y = C_h + n0 I`, using `E[r h^H] = A C_h` and `E[r r^H] = C_r`.
pub fn expected_squared_error(
    f: &CMatrix,
    c_h: &HermitianMatrix,
    c_y: &HermitianMatrix,
    diag_floor: f64,
) -> Result<f64> {
    let gain = bussgang_gain(c_y, diag_floor)?;
    let c_r = arcsine_map(c_y, diag_floor)?;
    let mut c_rh = c_h.as_matrix().clone();
    for (i, g) in gain.iter().enumerate() {
        c_rh.row_mut(i).iter_mut().for_each(|z| *z *= *g);
    }
    let cross = (f * c_rh).trace().re;
    let quad = (f * c_r.as_matrix() * f.adjoint()).trace().re;
    Ok(c_h.trace() - 2.0 * cross + quad)
}
