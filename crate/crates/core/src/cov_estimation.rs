//! Covariance estimation from unquantized, one-bit and dithered one-bit samples.
//!
//! All estimators stream: snapshots are buffered in small blocks and folded into
//! running sums with real matrix products. The sign-based sums only ever hold
//! integers, so they are exact and partial accumulators can be merged in any
//! order without changing the result.

use nalgebra::DMatrix;

use crate::bussgang::inverse_arcsine_map;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, HermitianMatrix, C64};
use crate::quantizer::{DitheredSampleBatch, DitheredSnapshot, QuantizedVector};

const BLOCK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimationMethod {
    Unquantized,
    NonditheredArcsine,
    Dithered,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub matrix: HermitianMatrix,
    pub method: EstimationMethod,
    pub num_samples: usize,
    pub lambda: Option<f64>,
}

/// Running `sum x z^H` with `x = a + jb`, `z = c + jd`, kept as real and
/// imaginary parts.
#[derive(Debug, Clone)]
struct BilinearSum {
    dim: usize,
    re: DMatrix<f64>,
    im: DMatrix<f64>,
    buf: [DMatrix<f64>; 4],
    filled: usize,
    count: usize,
}

impl BilinearSum {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            re: DMatrix::zeros(dim, dim),
            im: DMatrix::zeros(dim, dim),
            buf: std::array::from_fn(|_| DMatrix::zeros(dim, BLOCK)),
            filled: 0,
            count: 0,
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::DimensionMismatch {
                context: "covariance accumulator",
                expected: self.dim,
                found: len,
            });
        }
        Ok(())
    }

    fn push(&mut self, parts: [&mut dyn Iterator<Item = f64>; 4]) {
        let col = self.filled;
        for (buf, it) in self.buf.iter_mut().zip(parts) {
            for (slot, v) in buf.column_mut(col).iter_mut().zip(it) {
                *slot = v;
            }
        }
        self.filled += 1;
        self.count += 1;
        if self.filled == BLOCK {
            self.flush();
        }
    }

    fn flush(&mut self) {
        if self.filled == 0 {
            return;
        }
        let k = self.filled;
        let [a, b, c, d] = &self.buf;
        let (a, b) = (a.columns(0, k), b.columns(0, k));
        let ct = c.columns(0, k).transpose();
        let dt = d.columns(0, k).transpose();
        self.re.gemm(1.0, &a, &ct, 1.0);
        self.re.gemm(1.0, &b, &dt, 1.0);
        self.im.gemm(1.0, &b, &ct, 1.0);
        self.im.gemm(-1.0, &a, &dt, 1.0);
        self.filled = 0;
    }

    fn merge(&mut self, mut other: Self) -> Result<()> {
        self.check_len(other.dim)?;
        self.flush();
        other.flush();
        self.re += &other.re;
        self.im += &other.im;
        self.count += other.count;
        Ok(())
    }

    /// `scale * sum`, flushing pending snapshots.
    fn scaled(&mut self, scale: f64) -> CMatrix {
        self.flush();
        CMatrix::from_fn(self.dim, self.dim, |i, j| {
            C64::new(self.re[(i, j)], self.im[(i, j)]) * scale
        })
    }
}

/// Streaming `(1/N) sum y y^H`.
#[derive(Debug, Clone)]
pub struct SampleCovarianceAccumulator(BilinearSum);

impl SampleCovarianceAccumulator {
    pub fn new(dim: usize) -> Self {
        Self(BilinearSum::new(dim))
    }

    pub fn push(&mut self, y: &CVector) -> Result<()> {
        self.0.check_len(y.len())?;
        let mut a = y.iter().map(|z| z.re);
        let mut b = y.iter().map(|z| z.im);
        let mut c = y.iter().map(|z| z.re);
        let mut d = y.iter().map(|z| z.im);
        self.0.push([&mut a, &mut b, &mut c, &mut d]);
        Ok(())
    }

    pub fn merge(&mut self, other: Self) -> Result<()> {
        self.0.merge(other.0)
    }

    pub fn count(&self) -> usize {
        self.0.count
    }

    pub fn finish(mut self) -> Result<CovarianceEstimate> {
        let n = self.0.count;
        if n == 0 {
            return Err(Error::EmptyBatch);
        }
        let m = self.0.scaled(1.0 / n as f64);
        Ok(CovarianceEstimate {
            matrix: HermitianMatrix::from_hermitian_part(&m),
            method: EstimationMethod::Unquantized,
            num_samples: n,
            lambda: None,
        })
    }
}

fn sign_parts(r: &QuantizedVector) -> (Vec<f64>, Vec<f64>) {
    let re = r.as_vector().iter().map(|z| z.re.signum()).collect();
    let im = r.as_vector().iter().map(|z| z.im.signum()).collect();
    (re, im)
}

/// Streaming one-bit estimator: sample covariance of the sign data followed by
/// the inverse arcsine law.
#[derive(Debug, Clone)]
pub struct SignCovarianceAccumulator(BilinearSum);

impl SignCovarianceAccumulator {
    pub fn new(dim: usize) -> Self {
        Self(BilinearSum::new(dim))
    }

    pub fn push(&mut self, r: &QuantizedVector) -> Result<()> {
        self.0.check_len(r.len())?;
        let (re, im) = sign_parts(r);
        let mut a = re.iter().copied();
        let mut b = im.iter().copied();
        let mut c = re.iter().copied();
        let mut d = im.iter().copied();
        self.0.push([&mut a, &mut b, &mut c, &mut d]);
        Ok(())
    }

    pub fn merge(&mut self, other: Self) -> Result<()> {
        self.0.merge(other.0)
    }

    pub fn count(&self) -> usize {
        self.0.count
    }

    /// Sample covariance of the quantized vectors, `(1/N) sum r r^H`.
    pub fn correlation(&mut self) -> Result<HermitianMatrix> {
        let n = self.0.count;
        if n == 0 {
            return Err(Error::EmptyBatch);
        }
        // r = (a + jb) / sqrt(2)
        let m = self.0.scaled(0.5 / n as f64);
        Ok(HermitianMatrix::from_hermitian_part(&m))
    }

    pub fn finish(mut self) -> Result<CovarianceEstimate> {
        let c_r = self.correlation()?;
        Ok(CovarianceEstimate {
            matrix: inverse_arcsine_map(&c_r),
            method: EstimationMethod::NonditheredArcsine,
            num_samples: self.0.count,
            lambda: None,
        })
    }
}

/// Streaming dithered estimator: `lambda^2 / N * sum r r~^H`, symmetrized.
#[derive(Debug, Clone)]
pub struct DitheredCovarianceAccumulator {
    lambda: f64,
    sum: BilinearSum,
}

impl DitheredCovarianceAccumulator {
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidLambda(lambda));
        }
        Ok(Self {
            lambda,
            sum: BilinearSum::new(dim),
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn push(&mut self, s: &DitheredSnapshot) -> Result<()> {
        self.sum.check_len(s.len())?;
        for part in [&s.im, &s.re_tilde, &s.im_tilde] {
            self.sum.check_len(part.len())?;
        }
        let mut a = s.re.iter().map(|&v| v as f64);
        let mut b = s.im.iter().map(|&v| v as f64);
        let mut c = s.re_tilde.iter().map(|&v| v as f64);
        let mut d = s.im_tilde.iter().map(|&v| v as f64);
        self.sum.push([&mut a, &mut b, &mut c, &mut d]);
        Ok(())
    }

    pub fn merge(&mut self, other: Self) -> Result<()> {
        if other.lambda != self.lambda {
            return Err(Error::InvalidLambda(other.lambda));
        }
        self.sum.merge(other.sum)
    }

    pub fn count(&self) -> usize {
        self.sum.count
    }

    /// The asymmetric estimate before symmetrization.
    pub fn asymmetric(&mut self) -> Result<CMatrix> {
        let n = self.sum.count;
        if n == 0 {
            return Err(Error::EmptyBatch);
        }
        Ok(self.sum.scaled(self.lambda * self.lambda / n as f64))
    }

    pub fn finish(mut self) -> Result<CovarianceEstimate> {
        let c = self.asymmetric()?;
        Ok(CovarianceEstimate {
            matrix: HermitianMatrix::from_hermitian_part(&c),
            method: EstimationMethod::Dithered,
            num_samples: self.sum.count,
            lambda: Some(self.lambda),
        })
    }
}

fn first_len<T>(items: &[T], len: impl Fn(&T) -> usize) -> Result<usize> {
    items.first().map(len).ok_or(Error::EmptyBatch)
}

pub fn sample_covariance(ys: &[CVector]) -> Result<CovarianceEstimate> {
    let mut acc = SampleCovarianceAccumulator::new(first_len(ys, |y| y.len())?);
    for y in ys {
        acc.push(y)?;
    }
    acc.finish()
}

pub fn nondithered_estimate(rs: &[QuantizedVector]) -> Result<CovarianceEstimate> {
    let mut acc = SignCovarianceAccumulator::new(first_len(rs, |r| r.len())?);
    for r in rs {
        acc.push(r)?;
    }
    acc.finish()
}

pub fn dithered_estimate(batch: &DitheredSampleBatch) -> Result<CovarianceEstimate> {
    let dim = first_len(batch.snapshots(), |s| s.len())?;
    let mut acc = DitheredCovarianceAccumulator::new(dim, batch.lambda())?;
    for s in batch.snapshots() {
        acc.push(s)?;
    }
    acc.finish()
}

/// Basic channel covariance estimate `C_y - n0 I`. May be indefinite.
pub fn channel_cov_from_y(c_y: &CovarianceEstimate, n0: f64) -> HermitianMatrix {
    c_y.matrix.shifted(-n0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bussgang::{arcsine_map, DEFAULT_DIAG_FLOOR};
    use crate::linalg::{frobenius_norm, max_norm};
    use crate::quantizer::{csign, dithered_quantize};
    use crate::rng::{stream_rng, SimRng};
    use crate::testutil::{random_covariance, sample_gaussian};
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn e1(m: usize) -> CVector {
        let mut v = CVector::zeros(m);
        v[0] = c(1.0, 0.0);
        v
    }

    fn gaussian_source(cov: &HermitianMatrix, seed: u64) -> (CMatrix, SimRng) {
        let l = cov.as_matrix().clone().cholesky().expect("PD covariance").l();
        (l, stream_rng(seed, &[]))
    }

    #[test]
    fn sample_covariance_examples() {
        let est = sample_covariance(&[e1(3)]).unwrap();
        let want = &e1(3) * e1(3).adjoint();
        assert_eq!(est.matrix.as_matrix(), &want);

        let y = CVector::from_vec(vec![c(1.0, 2.0), c(-0.5, 0.25), c(0.0, -1.0)]);
        let ys = vec![y.clone(); 150];
        let est = sample_covariance(&ys).unwrap();
        assert!((est.matrix.as_matrix() - &y * y.adjoint()).norm() < 1e-12);
        assert_eq!(est.num_samples, 150);
    }

    #[test]
    fn empty_batches_rejected() {
        assert_eq!(sample_covariance(&[]), Err(Error::EmptyBatch));
        assert_eq!(nondithered_estimate(&[]), Err(Error::EmptyBatch));
        let batch = DitheredSampleBatch::new(1.0).unwrap();
        assert_eq!(dithered_estimate(&batch), Err(Error::EmptyBatch));
    }

    #[test]
    fn sample_covariance_converges() {
        let cov = random_covariance(4, 5, 0.1);
        let (l, mut rng) = gaussian_source(&cov, 6);
        let mut acc = SampleCovarianceAccumulator::new(4);
        for _ in 0..100_000 {
            acc.push(&sample_gaussian(&l, &mut rng)).unwrap();
        }
        let est = acc.finish().unwrap();
        assert!(max_norm(&(est.matrix.as_matrix() - cov.as_matrix())) < 0.05);
    }

    #[test]
    fn perfect_sign_correlation_maps_to_identity() {
        let c_r = HermitianMatrix::identity(3);
        assert_eq!(inverse_arcsine_map(&c_r), HermitianMatrix::identity(3));
    }

    #[test]
    fn nondithered_inverts_arcsine_law() {
        // unit diagonal, rho = 0.5 -> sign correlation 1/3
        let cov = HermitianMatrix::new(CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(1.0, 0.0)]))
            .unwrap();
        let c_r = arcsine_map(&cov, DEFAULT_DIAG_FLOOR).unwrap();
        assert_abs_diff_eq!(c_r.as_matrix()[(0, 1)].re, 1.0 / 3.0, epsilon = 1e-15);
        let (l, mut rng) = gaussian_source(&cov, 7);
        let mut acc = SignCovarianceAccumulator::new(2);
        for _ in 0..1_000_000 {
            acc.push(&csign(&sample_gaussian(&l, &mut rng))).unwrap();
        }
        let est = acc.finish().unwrap();
        assert!((est.matrix.as_matrix()[(0, 1)].re - 0.5).abs() < 0.01);
        assert!(est.matrix.as_matrix()[(0, 1)].im.abs() < 0.01);
        assert_eq!(est.matrix.diagonal()[0], 1.0);
    }

    #[test]
    fn nondithered_forces_unit_diagonal() {
        let cov = HermitianMatrix::new(CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.2, 0.1), c(0.2, -0.1), c(0.3, 0.0)]))
            .unwrap();
        let (l, mut rng) = gaussian_source(&cov, 8);
        for n in [100, 10_000] {
            let rs: Vec<_> = (0..n).map(|_| csign(&sample_gaussian(&l, &mut rng))).collect();
            let est = nondithered_estimate(&rs).unwrap();
            assert_eq!(est.matrix.diagonal().as_slice(), &[1.0, 1.0]);
            assert!(max_norm(&(est.matrix.as_matrix() - cov.as_matrix())) >= 0.7);
        }
    }

    fn dithered_run(cov: &HermitianMatrix, lambda: f64, n: usize, seed: u64) -> CovarianceEstimate {
        let (l, mut rng) = gaussian_source(cov, seed);
        let mut acc = DitheredCovarianceAccumulator::new(cov.dim(), lambda).unwrap();
        for _ in 0..n {
            let y = sample_gaussian(&l, &mut rng);
            acc.push(&dithered_quantize(&y, lambda, &mut rng).unwrap()).unwrap();
        }
        acc.finish().unwrap()
    }

    #[test]
    fn dithered_zero_input_is_centered() {
        let m = 4;
        let lambda = 1.0;
        let n = 100_000;
        let mut rng = stream_rng(9, &[]);
        let mut acc = DitheredCovarianceAccumulator::new(m, lambda).unwrap();
        for _ in 0..n {
            acc.push(&dithered_quantize(&CVector::zeros(m), lambda, &mut rng).unwrap()).unwrap();
        }
        let est = acc.finish().unwrap();
        // each symmetrized entry averages products of independent coins with
        // variance lambda^4 / N per real part
        let stderr = lambda * lambda / (n as f64).sqrt();
        assert!(est.matrix.max_norm() < 5.0 * stderr * 2f64.sqrt());
    }

    #[test]
    fn dithered_recovers_non_constant_diagonal() {
        let m = 8;
        let mut cov = random_covariance(m, 10, 0.05).into_inner();
        // taper the diagonal power along the array
        for i in 0..m {
            for j in 0..m {
                let s = (1.0 - 0.1 * i as f64) * (1.0 - 0.1 * j as f64);
                cov[(i, j)] *= c(s, 0.0);
            }
        }
        let cov = HermitianMatrix::from_hermitian_part(&cov);
        let max_diag = cov.diagonal().max();
        let lambda = 4.0 * max_diag.sqrt();
        let est = dithered_run(&cov, lambda, 100_000, 11);
        assert!(max_norm(&(est.matrix.as_matrix() - cov.as_matrix())) < 0.05);
        let d_err = (est.matrix.diagonal() - cov.diagonal()).amax();
        assert!(d_err < 0.05);
    }

    /// `E[(y^2 - a^2)_+]` for standard normal `y`, i.e. the clipping bias of
    /// the dithered second moment at `lambda = a`.
    fn clipping_bias(a: f64) -> f64 {
        let phi = (-a * a / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let q = normal_upper_tail(a);
        2.0 * (a * phi + q - a * a * q)
    }

    /// Upper normal tail by Simpson quadrature of the density on [a, a + 12].
    fn normal_upper_tail(a: f64) -> f64 {
        let n = 20_000;
        let h = 12.0 / n as f64;
        let f = |x: f64| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = f(a) + f(a + 12.0);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn dithered_bias_shrinks_with_lambda() {
        // real Gaussian input with unit variance; lambda^2 E[sign(y + t) sign(y + t~)]
        // equals E[min(y^2, lambda^2)], so the bias is E[(y^2 - lambda^2)_+].
        let n = 1_000_000;
        let mut rng = stream_rng(12, &[]);
        let mut biases = Vec::new();
        for lambda in [1.0, 2.0, 3.0] {
            let mut acc = 0.0;
            for _ in 0..n {
                let u: f64 = rand::Rng::sample(&mut rng, rand_distr::StandardNormal);
                let s = dithered_quantize(&CVector::from_vec(vec![c(u, 0.0)]), lambda, &mut rng).unwrap();
                acc += (s.re[0] * s.re_tilde[0]) as f64;
            }
            let bias = (lambda * lambda * acc / n as f64 - 1.0).abs();
            let stderr = lambda * lambda / (n as f64).sqrt();
            assert!((bias - clipping_bias(lambda)).abs() < 5.0 * stderr, "{lambda}: {bias}");
            biases.push(bias);
        }
        assert!(biases[0] > biases[1] && biases[1] > biases[2], "{biases:?}");
    }

    #[test]
    fn dithered_output_is_exactly_hermitian_and_norms_are_ordered() {
        let cov = random_covariance(6, 13, 0.1);
        for seed in 0..5 {
            let est = dithered_run(&cov, 2.0, 500, 100 + seed);
            assert_eq!(crate::linalg::hermitian_deviation(est.matrix.as_matrix()), 0.0);
            let diff = est.matrix.as_matrix() - cov.as_matrix();
            let (mx, fro) = (max_norm(&diff), frobenius_norm(&diff));
            assert!(mx <= fro && fro <= 6.0 * mx);
        }
    }

    #[test]
    fn merge_matches_single_pass() {
        let m = 5;
        let cov = random_covariance(m, 14, 0.1);
        let (l, mut rng) = gaussian_source(&cov, 15);
        let ys: Vec<_> = (0..300).map(|_| sample_gaussian(&l, &mut rng)).collect();
        let snaps: Vec<_> = ys.iter().map(|y| dithered_quantize(y, 1.5, &mut rng).unwrap()).collect();

        let mut whole = DitheredCovarianceAccumulator::new(m, 1.5).unwrap();
        snaps.iter().for_each(|s| whole.push(s).unwrap());
        let mut left = DitheredCovarianceAccumulator::new(m, 1.5).unwrap();
        let mut right = DitheredCovarianceAccumulator::new(m, 1.5).unwrap();
        snaps[..77].iter().for_each(|s| left.push(s).unwrap());
        snaps[77..].iter().for_each(|s| right.push(s).unwrap());
        right.merge(left).unwrap();
        assert_eq!(whole.finish().unwrap().matrix, right.finish().unwrap().matrix);

        let mut whole = SampleCovarianceAccumulator::new(m);
        ys.iter().for_each(|y| whole.push(y).unwrap());
        let mut left = SampleCovarianceAccumulator::new(m);
        let mut right = SampleCovarianceAccumulator::new(m);
        ys[..130].iter().for_each(|y| left.push(y).unwrap());
        ys[130..].iter().for_each(|y| right.push(y).unwrap());
        right.merge(left).unwrap();
        let a = whole.finish().unwrap().matrix;
        let b = right.finish().unwrap().matrix;
        assert!((a.as_matrix() - b.as_matrix()).norm() <= 1e-9 * a.frobenius_norm());
    }

    #[test]
    fn channel_cov_subtracts_noise() {
        let est = |m: HermitianMatrix| CovarianceEstimate {
            matrix: m,
            method: EstimationMethod::Unquantized,
            num_samples: 1,
            lambda: None,
        };
        let id = channel_cov_from_y(&est(HermitianMatrix::identity(3)), 0.1);
        assert!((id.as_matrix() - CMatrix::identity(3, 3) * c(0.9, 0.0)).norm() < 1e-15);
        let zero = channel_cov_from_y(&est(HermitianMatrix::identity(3).shifted(-0.9)), 0.1);
        assert!(zero.max_norm() < 1e-15);
        let mut low = HermitianMatrix::identity(2).into_inner();
        low[(1, 1)] = c(0.05, 0.0);
        let out = channel_cov_from_y(&est(HermitianMatrix::new(low).unwrap()), 0.1);
        assert!(out.diagonal()[1] < 0.0);
    }

    #[test]
    fn dimension_checked() {
        let mut acc = SampleCovarianceAccumulator::new(3);
        assert!(matches!(acc.push(&CVector::zeros(2)), Err(Error::DimensionMismatch { .. })));
    }
}
