//! Angular power spectrum fitting.
//!
//! The channel covariance is approximated on an angle grid as
//! `sum_g gc_g a_g a_g^H + sum_i S_i (sum_g gl_ig a_g a_g^H) S_i` with
//! non-negative weights, fitted to an unstructured estimate in Frobenius norm.
//! Every term is PSD, so the fit also repairs indefinite inputs.
//!
//! Dictionary columns are `vec(S a_g a_g^H S)` ordered local blocks first and
//! the common block last. The complex least-squares problem is solved as a real
//! one by stacking real and imaginary parts. Its normal equations only need
//! `Re <B_k, B_l> = |a_i^H S_k S_l a_j|^2` and `Re <B_k, C>`, so the Gram matrix
//! is built once per mask set and the `M^2`-row design is never formed.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::channel_model::{steering_vector, AntennaMask, ClusterGeometry};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, HermitianMatrix, C64};
use crate::nnls::{nnls_solve_normal, NnlsOptions, NnlsStatus, NormalEquations};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpacing {
    /// `theta_g = -90 + 180 g / G` degrees.
    #[default]
    Angle,
    /// `sin(theta_g) = -1 + 2 g / G`.
    Sine,
}

/// `G` grid angles in degrees over `[-90, 90)`.
pub fn angle_grid(size: usize, spacing: GridSpacing) -> Vec<f64> {
    (0..size)
        .map(|g| {
            let t = g as f64 / size as f64;
            match spacing {
                GridSpacing::Angle => -90.0 + 180.0 * t,
                GridSpacing::Sine => (-1.0 + 2.0 * t).asin().to_degrees(),
            }
        })
        .collect()
}

/// Grid steering vectors, the masks of the local blocks and the cached Gram
/// matrix of the realified dictionary.
#[derive(Debug, Clone)]
pub struct AngularDictionary {
    grid: Vec<f64>,
    steering: CMatrix,
    masks: Vec<AntennaMask>,
    gram: DMatrix<f64>,
}

fn rows(m: &CMatrix, idx: &[usize]) -> CMatrix {
    CMatrix::from_fn(idx.len(), m.ncols(), |r, c| m[(idx[r], c)])
}

impl AngularDictionary {
    pub fn new(num_antennas: usize, masks: Vec<AntennaMask>, grid: Vec<f64>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::InvalidGeometry("angle grid is empty".into()));
        }
        if masks.iter().flat_map(|m| m.indices()).any(|&i| i >= num_antennas) {
            return Err(Error::InvalidGeometry("mask exceeds the array".into()));
        }
        let g = grid.len();
        let mut steering = CMatrix::zeros(num_antennas, g);
        for (j, &theta) in grid.iter().enumerate() {
            steering.set_column(j, &steering_vector(theta, num_antennas));
        }

        let blocks: Vec<AntennaMask> = masks
            .iter()
            .cloned()
            .chain(std::iter::once(AntennaMask::full(num_antennas)))
            .collect();
        let n = blocks.len() * g;
        let mut gram = DMatrix::zeros(n, n);
        for k in 0..blocks.len() {
            for l in k..blocks.len() {
                let shared = blocks[k].intersection(&blocks[l]);
                let a = rows(&steering, shared.indices());
                let p = a.ad_mul(&a);
                for j in 0..g {
                    for i in 0..g {
                        let v = p[(i, j)].norm_sqr();
                        gram[(k * g + i, l * g + j)] = v;
                        gram[(l * g + j, k * g + i)] = v;
                    }
                }
            }
        }
        Ok(Self {
            grid,
            steering,
            masks,
            gram,
        })
    }

    pub fn num_antennas(&self) -> usize {
        self.steering.nrows()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn grid_size(&self) -> usize {
        self.grid.len()
    }

    pub fn masks(&self) -> &[AntennaMask] {
        &self.masks
    }

    /// Number of blocks, `L + 1`.
    pub fn num_blocks(&self) -> usize {
        self.masks.len() + 1
    }

    pub fn num_columns(&self) -> usize {
        self.num_blocks() * self.grid.len()
    }

    /// `Re <B_i, B_j>` for all column pairs.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    fn block_indices(&self, block: usize) -> Vec<usize> {
        match self.masks.get(block) {
            Some(mask) => mask.indices().to_vec(),
            None => (0..self.num_antennas()).collect(),
        }
    }

    /// Column `idx` reshaped to an `M x M` matrix.
    pub fn column(&self, idx: usize) -> CMatrix {
        let m = self.num_antennas();
        let (block, g) = (idx / self.grid.len(), idx % self.grid.len());
        assert!(block < self.num_blocks(), "column {idx} out of range");
        let a = self.steering.column(g);
        let mut out = CMatrix::zeros(m, m);
        let idx = self.block_indices(block);
        for &c in &idx {
            for &r in &idx {
                out[(r, c)] = a[r] * a[c].conj();
            }
        }
        out
    }

    /// The complex `M^2 x (L+1)G` dictionary with column-major `vec`.
    pub fn matrix(&self) -> CMatrix {
        let m = self.num_antennas();
        let mut out = CMatrix::zeros(m * m, self.num_columns());
        for j in 0..self.num_columns() {
            let col = self.column(j);
            out.set_column(j, &CMatrix::from_column_slice(m * m, 1, col.as_slice()).column(0));
        }
        out
    }

    /// `Re <B_j, C>` for every column.
    fn correlations(&self, c: &HermitianMatrix) -> DVector<f64> {
        let g = self.grid.len();
        let mut out = DVector::zeros(self.num_columns());
        for block in 0..self.num_blocks() {
            let idx = self.block_indices(block);
            let a = rows(&self.steering, &idx);
            let sub = CMatrix::from_fn(idx.len(), idx.len(), |r, s| c.as_matrix()[(idx[r], idx[s])]);
            let x = sub * &a;
            for j in 0..g {
                let v: C64 = a.column(j).dotc(&x.column(j));
                out[block * g + j] = v.re;
            }
        }
        out
    }
}

/// Dictionary for a geometry's masks on `grid_size` points.
pub fn build_dictionary(g: &ClusterGeometry, grid_size: usize, spacing: GridSpacing) -> Result<AngularDictionary> {
    AngularDictionary::new(g.num_antennas(), g.masks(), angle_grid(grid_size, spacing))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApsFit {
    pub coefficients: DVector<f64>,
    /// `||C(gamma) - C_hat||_F^2`.
    pub objective: f64,
    pub status: NnlsStatus,
    pub iterations: usize,
}

/// Non-negative Frobenius fit of `c_hat` over the dictionary.
pub fn fit_aps(d: &AngularDictionary, c_hat: &HermitianMatrix) -> Result<ApsFit> {
    fit_aps_with(d, c_hat, &NnlsOptions::for_columns(d.num_columns()))
}

pub fn fit_aps_with(d: &AngularDictionary, c_hat: &HermitianMatrix, opts: &NnlsOptions) -> Result<ApsFit> {
    if c_hat.dim() != d.num_antennas() {
        return Err(Error::DimensionMismatch {
            context: "APS fit input",
            expected: d.num_antennas(),
            found: c_hat.dim(),
        });
    }
    let ne = NormalEquations::new(d.gram.clone(), d.correlations(c_hat))?;
    let sol = nnls_solve_normal(&ne, opts)?;
    let fitted = reconstruct_covariance(d, &sol.x)?;
    let objective = (fitted.as_matrix() - c_hat.as_matrix()).norm_squared();
    Ok(ApsFit {
        coefficients: sol.x,
        objective,
        status: sol.status,
        iterations: sol.iterations,
    })
}

/// `sum_k S_k A diag(gamma_k) A^H S_k`.
pub fn reconstruct_covariance(d: &AngularDictionary, gamma: &DVector<f64>) -> Result<HermitianMatrix> {
    if gamma.len() != d.num_columns() {
        return Err(Error::DimensionMismatch {
            context: "APS coefficients",
            expected: d.num_columns(),
            found: gamma.len(),
        });
    }
    if let Some((index, &value)) = gamma.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        if value.is_nan() {
            return Err(Error::NonFinite("APS coefficients"));
        }
        return Err(Error::NegativeCoefficient { index, value });
    }
    let m = d.num_antennas();
    let g = d.grid_size();
    let mut out = CMatrix::zeros(m, m);
    for block in 0..d.num_blocks() {
        let weights = gamma.rows(block * g, g);
        if weights.iter().all(|&w| w == 0.0) {
            continue;
        }
        let idx = d.block_indices(block);
        let a = rows(&d.steering, &idx);
        let mut scaled = a.clone();
        for (j, &w) in weights.iter().enumerate() {
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= w);
        }
        let sub = scaled * a.adjoint();
        for (s, &c) in idx.iter().enumerate() {
            for (r, &row) in idx.iter().enumerate() {
                out[(row, c)] += sub[(r, s)];
            }
        }
    }
    Ok(HermitianMatrix::from_hermitian_part(&out))
}
