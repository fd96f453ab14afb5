//! Memoryless one-bit quantization, with and without uniform dither.

use std::f64::consts::FRAC_1_SQRT_2;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{CVector, C64};

/// `+1` for `x >= 0`, `-1` otherwise.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Output of [`csign`]: every entry is `(+-1 +- j) / sqrt(2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedVector(CVector);

impl QuantizedVector {
    pub fn as_vector(&self) -> &CVector {
        &self.0
    }

    pub fn into_inner(self) -> CVector {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Complex sign: real and imaginary parts are quantized independently and the
/// result is scaled to unit modulus.
pub fn csign(y: &CVector) -> QuantizedVector {
    QuantizedVector(y.map(|z| C64::new(sign(z.re), sign(z.im)) * FRAC_1_SQRT_2))
}

/// The four sign streams of one dithered snapshot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DitheredSnapshot {
    pub re: Vec<i8>,
    pub im: Vec<i8>,
    pub re_tilde: Vec<i8>,
    pub im_tilde: Vec<i8>,
}

impl DitheredSnapshot {
    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }
}

/// Dithered snapshots sharing one dither scale.
#[derive(Debug, Clone, PartialEq)]
pub struct DitheredSampleBatch {
    lambda: f64,
    snapshots: Vec<DitheredSnapshot>,
}

impl DitheredSampleBatch {
    pub fn new(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self {
            lambda,
            snapshots: Vec::new(),
        })
    }

    pub fn push(&mut self, s: DitheredSnapshot) {
        self.snapshots.push(s);
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn snapshots(&self) -> &[DitheredSnapshot] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidLambda(lambda))
    }
}

#[inline]
fn dithered_sign<R: Rng + ?Sized>(x: f64, lambda: f64, rng: &mut R) -> i8 {
    let tau: f64 = rng.random_range(-lambda..=lambda);
    if x + tau >= 0.0 {
        1
    } else {
        -1
    }
}

/// Quantizes one snapshot with four fresh, independent uniform dithers on
/// `[-lambda, lambda]^M`.
pub fn dithered_quantize<R: Rng + ?Sized>(y: &CVector, lambda: f64, rng: &mut R) -> Result<DitheredSnapshot> {
    check_lambda(lambda)?;
    let draw = |part: fn(&C64) -> f64, rng: &mut R| -> Vec<i8> {
        y.iter().map(|z| dithered_sign(part(z), lambda, rng)).collect()
    };
    let re = draw(|z| z.re, rng);
    let im = draw(|z| z.im, rng);
    let re_tilde = draw(|z| z.re, rng);
    let im_tilde = draw(|z| z.im, rng);
    Ok(DitheredSnapshot {
        re,
        im,
        re_tilde,
        im_tilde,
    })
}
