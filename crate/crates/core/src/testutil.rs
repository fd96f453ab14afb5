use rand::Rng;

use crate::linalg::{CMatrix, CVector, HermitianMatrix, C64};
use crate::rng::{complex_normal_vector, stream_rng, SimRng};

/// Random covariance `X X^H / m + ridge I`.
pub(crate) fn random_covariance(m: usize, seed: u64, ridge: f64) -> HermitianMatrix {
    let mut rng = stream_rng(seed, &[99]);
    let x = CMatrix::from_fn(m, m, |_, _| {
        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let mut cov = &x * x.adjoint() / C64::new(m as f64, 0.0);
    for i in 0..m {
        cov[(i, i)] += C64::new(ridge, 0.0);
    }
    HermitianMatrix::from_hermitian_part(&cov)
}

/// `l z` with `z ~ CN(0, I)`; `l` is a covariance square root.
pub(crate) fn sample_gaussian(l: &CMatrix, rng: &mut SimRng) -> CVector {
    l * complex_normal_vector(rng, l.ncols(), 1.0)
}
