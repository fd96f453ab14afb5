//! Multi-user uplink data phase with one-bit receivers.
//!
//! `y_D = H s + n` is quantized to `r_D = csign(y_D) = A_D y_D + q_D`. Linear
//! receivers `W^H` are built from a channel estimate and scored with the
//! Bussgang SINR lower bound evaluated on the true channel.

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::bussgang::{arcsine_map, bussgang_gain, FilterOptions};
use crate::error::{Error, Result};
use crate::linalg::{regularized_inverse, CMatrix, HermitianMatrix, InversionFailure, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverKind {
    Mrc,
    Zf,
    Blmmse,
}

impl ReceiverKind {
    pub const ALL: [ReceiverKind; 3] = [ReceiverKind::Mrc, ReceiverKind::Zf, ReceiverKind::Blmmse];

    pub fn name(self) -> &'static str {
        match self {
            ReceiverKind::Mrc => "mrc",
            ReceiverKind::Zf => "zf",
            ReceiverKind::Blmmse => "blmmse",
        }
    }
}

impl fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `M x K` channel matrix with one column per user, plus the noise power.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiUserChannel {
    h: CMatrix,
    n0: f64,
}

impl MultiUserChannel {
    pub fn new(h: CMatrix, n0: f64) -> Result<Self> {
        if h.ncols() == 0 || h.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                context: "multi-user channel",
                expected: 1,
                found: 0,
            });
        }
        if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("channel matrix"));
        }
        if !(n0 >= 0.0 && n0.is_finite()) {
            return Err(Error::NonFinite("noise power"));
        }
        Ok(Self { h, n0 })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.h
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }

    pub fn num_antennas(&self) -> usize {
        self.h.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.h.ncols()
    }

    /// `H H^H + N0 I`.
    pub fn data_covariance(&self) -> HermitianMatrix {
        data_covariance(&self.h, self.n0)
    }
}

fn data_covariance(h: &CMatrix, n0: f64) -> HermitianMatrix {
    HermitianMatrix::from_hermitian_part(&(h * h.adjoint())).shifted(n0)
}

/// `W^H` (row `k` is `w_k^H`) together with the estimate it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearReceiver {
    w_h: CMatrix,
    kind: ReceiverKind,
    h_hat: CMatrix,
    ridge: Option<f64>,
}

impl LinearReceiver {
    /// A receiver with arbitrary rows.
    pub fn from_rows(w_h: CMatrix, kind: ReceiverKind, h_hat: CMatrix) -> Self {
        Self {
            w_h,
            kind,
            h_hat,
            ridge: None,
        }
    }

    pub fn rows(&self) -> &CMatrix {
        &self.w_h
    }

    pub fn kind(&self) -> ReceiverKind {
        self.kind
    }

    pub fn channel_estimate(&self) -> &CMatrix {
        &self.h_hat
    }

    /// Ridge used when inverting, if the condition cap was hit.
    pub fn ridge(&self) -> Option<f64> {
        self.ridge
    }
}

/// Diagonal of `A_D = sqrt(2/pi) diag(H H^H + N0 I)^{-1/2}`.
pub fn data_bussgang_gain(h: &CMatrix, n0: f64, diag_floor: f64) -> Result<DVector<f64>> {
    bussgang_gain(&data_covariance(h, n0), diag_floor)
}

/// `C_qD = arcsine(C_yD) - A_D C_yD A_D`.
pub fn quantizer_noise_cov(h: &CMatrix, n0: f64, diag_floor: f64) -> Result<HermitianMatrix> {
    let c_y = data_covariance(h, n0);
    let gain = bussgang_gain(&c_y, diag_floor)?;
    let c_r = arcsine_map(&c_y, diag_floor)?;
    let linear = CMatrix::from_fn(c_y.dim(), c_y.dim(), |i, j| c_y.as_matrix()[(i, j)] * (gain[i] * gain[j]));
    Ok(HermitianMatrix::from_hermitian_part(&(c_r.into_inner() - linear)))
}

pub fn mrc_receiver(h_hat: &CMatrix) -> LinearReceiver {
    LinearReceiver::from_rows(h_hat.adjoint(), ReceiverKind::Mrc, h_hat.clone())
}

/// `(H^H H)^{-1} H^H`.
pub fn zf_receiver(h_hat: &CMatrix, cond_cap: f64) -> Result<LinearReceiver> {
    let gram = h_hat.ad_mul(h_hat);
    let inv = regularized_inverse(&gram, cond_cap).map_err(|e| match e {
        InversionFailure::Singular { condition } => Error::SingularGram { condition },
        InversionFailure::Decomposition => Error::EigenFailure,
    })?;
    Ok(LinearReceiver {
        w_h: inv.inverse * h_hat.adjoint(),
        kind: ReceiverKind::Zf,
        h_hat: h_hat.clone(),
        ridge: inv.ridge,
    })
}

/// `H^H A_D arcsine(C_yD)^{-1}` with `A_D` and `C_yD` built from the estimate.
pub fn blmmse_receiver(h_hat: &CMatrix, n0: f64, opts: FilterOptions) -> Result<LinearReceiver> {
    let c_y = data_covariance(h_hat, n0);
    let gain = bussgang_gain(&c_y, opts.diag_floor)?;
    let c_r = arcsine_map(&c_y, opts.diag_floor)?;
    let inv = regularized_inverse(c_r.as_matrix(), opts.cond_cap).map_err(|e| match e {
        InversionFailure::Singular { condition } => Error::SingularArcsineMatrix { condition },
        InversionFailure::Decomposition => Error::EigenFailure,
    })?;
    let mut w_h = h_hat.adjoint();
    for (j, g) in gain.iter().enumerate() {
        w_h.column_mut(j).iter_mut().for_each(|z| *z *= *g);
    }
    Ok(LinearReceiver {
        w_h: w_h * inv.inverse,
        kind: ReceiverKind::Blmmse,
        h_hat: h_hat.clone(),
        ridge: inv.ridge,
    })
}

/// Bussgang gain and quantization-noise covariance of the true channel.
#[derive(Debug, Clone)]
pub struct DataPhaseModel {
    pub gain: DVector<f64>,
    pub quantization_noise: HermitianMatrix,
}

impl DataPhaseModel {
    pub fn new(channel: &MultiUserChannel, diag_floor: f64) -> Result<Self> {
        Ok(Self {
            gain: data_bussgang_gain(channel.matrix(), channel.n0(), diag_floor)?,
            quantization_noise: quantizer_noise_cov(channel.matrix(), channel.n0(), diag_floor)?,
        })
    }
}

/// Per-user SINR
/// `|v h_k|^2 / (sum_{i != k} |v h_i|^2 + N0 ||v||^2 + w_k^H C_qD w_k)`
/// with `v = w_k^H A_D`. A zero row scores 0.
pub fn per_user_sinr(w: &LinearReceiver, channel: &MultiUserChannel, model: &DataPhaseModel) -> Result<Vec<f64>> {
    let h = channel.matrix();
    let (m, k) = (channel.num_antennas(), channel.num_users());
    if w.w_h.shape() != (k, m) {
        return Err(Error::DimensionMismatch {
            context: "receiver rows",
            expected: k * m,
            found: w.w_h.nrows() * w.w_h.ncols(),
        });
    }
    if model.gain.len() != m {
        return Err(Error::DimensionMismatch {
            context: "data-phase model",
            expected: m,
            found: model.gain.len(),
        });
    }
    let c_q = model.quantization_noise.as_matrix();
    let mut out = Vec::with_capacity(k);
    for user in 0..k {
        let row = w.w_h.row(user);
        let v = row.map_with_location(|_, j, z| z * model.gain[j]);
        let gains: Vec<f64> = (0..k).map(|i| (&v * h.column(i))[(0, 0)].norm_sqr()).collect();
        let signal = gains[user];
        if signal == 0.0 {
            out.push(0.0);
            continue;
        }
        let interference: f64 = gains.iter().enumerate().filter(|(i, _)| *i != user).map(|(_, g)| g).sum();
        let noise = channel.n0() * v.norm_squared();
        let quant: C64 = (row * c_q * row.adjoint())[(0, 0)];
        let denominator = interference + noise + quant.re.max(0.0);
        if !(denominator > 0.0) {
            return Err(Error::ZeroDenominator { user });
        }
        out.push(signal / denominator);
    }
    Ok(out)
}

/// `sum_k log2(1 + SINR_k)` on the true channel.
pub fn sum_rate(w: &LinearReceiver, channel: &MultiUserChannel, diag_floor: f64) -> Result<f64> {
    let model = DataPhaseModel::new(channel, diag_floor)?;
    Ok(per_user_sinr(w, channel, &model)?.iter().map(|s| (1.0 + s).log2()).sum())
}
