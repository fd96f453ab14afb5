//! Spatially non-stationary ULA channels.
//!
//! A channel is the superposition of common-cluster paths, seen by the whole
//! array, and local-cluster paths, seen only by the antennas in the cluster's
//! mask. Path gains are independent CN(0, power) per snapshot; the geometry
//! (angles, powers, masks) stays fixed.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, HermitianMatrix, C64};
use crate::rng::{complex_normal, complex_normal_vector};

/// Tolerance on `max(diag(C_h)) == 1`.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// ULA steering vector with half-wavelength spacing: entry `m` is
/// `exp(j * pi * m * sin(theta))`, `m = 0..M`.
pub fn steering_vector(theta_deg: f64, num_antennas: usize) -> CVector {
    let phase = PI * theta_deg.to_radians().sin();
    CVector::from_iterator(
        num_antennas,
        (0..num_antennas).map(|m| C64::from_polar(1.0, phase * m as f64)),
    )
}

/// Sorted, duplicate-free set of 0-based antenna indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AntennaMask(Vec<usize>);

impl AntennaMask {
    pub fn new(mut indices: Vec<usize>, num_antennas: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&last) = indices.last() {
            if last >= num_antennas {
                return Err(Error::InvalidGeometry(format!(
                    "antenna index {} outside an array of {num_antennas}",
                    last + 1
                )));
            }
        }
        Ok(Self(indices))
    }

    /// Contiguous run `start..end` (0-based, end exclusive).
    pub fn range(start: usize, end: usize, num_antennas: usize) -> Result<Self> {
        Self::new((start..end).collect(), num_antennas)
    }

    pub fn full(num_antennas: usize) -> Self {
        Self((0..num_antennas).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, m: usize) -> bool {
        self.0.binary_search(&m).is_ok()
    }

    /// 0/1 indicator over the array (the diagonal of the selection matrix).
    pub fn indicator(&self, num_antennas: usize) -> Vec<f64> {
        let mut v = vec![0.0; num_antennas];
        for &m in &self.0 {
            v[m] = 1.0;
        }
        v
    }

    pub fn intersection(&self, other: &Self) -> Self {
        Self(self.0.iter().copied().filter(|&m| other.contains(m)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub aoa_deg: f64,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalCluster {
    pub paths: Vec<Path>,
    pub mask: AntennaMask,
}

/// Frozen channel statistics: common paths, local clusters and the array size.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterGeometry {
    num_antennas: usize,
    common: Vec<Path>,
    local: Vec<LocalCluster>,
}

impl ClusterGeometry {
    /// Checks structure: angles within [-90, 90], finite non-negative powers,
    /// masks inside the array. Normalization is checked separately by
    /// [`ClusterGeometry::is_normalized`].
    pub fn new(num_antennas: usize, common: Vec<Path>, local: Vec<LocalCluster>) -> Result<Self> {
        if num_antennas == 0 {
            return Err(Error::InvalidGeometry("array must have at least one antenna".into()));
        }
        let all_paths = common.iter().chain(local.iter().flat_map(|c| c.paths.iter()));
        for p in all_paths {
            if !(-90.0..=90.0).contains(&p.aoa_deg) {
                return Err(Error::InvalidGeometry(format!("AoA {} outside [-90, 90]", p.aoa_deg)));
            }
            if !p.power.is_finite() || p.power < 0.0 {
                return Err(Error::InvalidGeometry(format!("path power {} is invalid", p.power)));
            }
        }
        for c in &local {
            if c.mask.indices().iter().any(|&m| m >= num_antennas) {
                return Err(Error::InvalidGeometry("mask exceeds the array".into()));
            }
        }
        Ok(Self {
            num_antennas,
            common,
            local,
        })
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn common_paths(&self) -> &[Path] {
        &self.common
    }

    pub fn local_clusters(&self) -> &[LocalCluster] {
        &self.local
    }

    pub fn masks(&self) -> Vec<AntennaMask> {
        self.local.iter().map(|c| c.mask.clone()).collect()
    }

    pub fn common_power(&self) -> f64 {
        self.common.iter().map(|p| p.power).sum()
    }

    pub fn local_powers(&self) -> Vec<f64> {
        self.local.iter().map(|c| c.paths.iter().map(|p| p.power).sum()).collect()
    }

    /// Diagonal of the channel covariance: unit-modulus steering entries make
    /// it the common power plus every local power whose mask covers the antenna.
    pub fn covariance_diagonal(&self) -> Vec<f64> {
        let mut d = vec![self.common_power(); self.num_antennas];
        for (cluster, power) in self.local.iter().zip(self.local_powers()) {
            for &m in cluster.mask.indices() {
                d[m] += power;
            }
        }
        d
    }

    pub fn is_normalized(&self) -> bool {
        let max = self.covariance_diagonal().into_iter().fold(f64::NEG_INFINITY, f64::max);
        (max - 1.0).abs() <= NORMALIZATION_TOL
    }
}

/// `C_h = sum_i g_i a_i a_i^H + sum_i sum_j g_ij S_i a_ij a_ij^H S_i`.
pub fn channel_covariance(g: &ClusterGeometry) -> HermitianMatrix {
    let m = g.num_antennas;
    let mut c = CMatrix::zeros(m, m);
    let full = AntennaMask::full(m);
    let clusters = std::iter::once((&g.common, &full))
        .chain(g.local.iter().map(|l| (&l.paths, &l.mask)));
    for (paths, mask) in clusters {
        let idx = mask.indices();
        for p in paths {
            let a = steering_vector(p.aoa_deg, m);
            for (jj, &col) in idx.iter().enumerate() {
                for &row in &idx[..=jj] {
                    c[(row, col)] += a[row] * a[col].conj() * p.power;
                }
            }
        }
    }
    for col in 0..m {
        c[(col, col)].im = 0.0;
        for row in 0..col {
            c[(col, row)] = c[(row, col)].conj();
        }
    }
    HermitianMatrix::new_unchecked(c)
}

/// One channel realization with fresh CN(0, power) path gains.
pub fn sample_channel<R: Rng + ?Sized>(g: &ClusterGeometry, rng: &mut R) -> CVector {
    let m = g.num_antennas;
    let mut h = CVector::zeros(m);
    for p in &g.common {
        let rho = complex_normal(rng, p.power);
        let a = steering_vector(p.aoa_deg, m);
        h.axpy(rho, &a, C64::new(1.0, 0.0));
    }
    for cluster in &g.local {
        for p in &cluster.paths {
            let rho = complex_normal(rng, p.power);
            let a = steering_vector(p.aoa_deg, m);
            for &i in cluster.mask.indices() {
                h[i] += rho * a[i];
            }
        }
    }
    h
}

/// `y = h + n` with `n ~ CN(0, n0 I)`.
pub fn received_signal<R: Rng + ?Sized>(h: &CVector, n0: f64, rng: &mut R) -> CVector {
    assert!(n0 >= 0.0, "noise power must be non-negative");
    if n0 == 0.0 {
        return h.clone();
    }
    h + complex_normal_vector(rng, h.len(), n0)
}

/// Noise power for a given SNR under the unit peak-diagonal normalization.
pub fn snr_db_to_noise_power(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Random draw recipe for one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub paths: usize,
    /// Inclusive AoA range in degrees.
    pub aoa_range: [f64; 2],
    /// Total cluster power.
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalClusterSpec {
    pub paths: usize,
    pub aoa_range: [f64; 2],
    pub power: f64,
    /// Visible antennas as inclusive 1-based `[first, last]` runs.
    pub antennas: Vec<[usize; 2]>,
}

impl LocalClusterSpec {
    pub fn mask(&self, num_antennas: usize) -> Result<AntennaMask> {
        let mut idx = Vec::new();
        for &[first, last] in &self.antennas {
            if first == 0 || first > last || last > num_antennas {
                return Err(Error::InvalidGeometry(format!(
                    "antenna run [{first}, {last}] is not inside 1..={num_antennas}"
                )));
            }
            idx.extend(first - 1..last);
        }
        AntennaMask::new(idx, num_antennas)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub num_antennas: usize,
    pub common: ClusterSpec,
    #[serde(default)]
    pub local: Vec<LocalClusterSpec>,
}

impl GeometrySpec {
    /// Three common paths in [-60, 60] with power 0.3, plus local clusters on
    /// the first quarter (three paths in [-60, 0], power 0.7) and the last
    /// quarter (three paths in [0, 60], power 0.5).
    pub fn quarter_split(num_antennas: usize) -> Self {
        let q = num_antennas / 4;
        Self {
            num_antennas,
            common: ClusterSpec {
                paths: 3,
                aoa_range: [-60.0, 60.0],
                power: 0.3,
            },
            local: vec![
                LocalClusterSpec {
                    paths: 3,
                    aoa_range: [-60.0, 0.0],
                    power: 0.7,
                    antennas: vec![[1, q]],
                },
                LocalClusterSpec {
                    paths: 3,
                    aoa_range: [0.0, 60.0],
                    power: 0.5,
                    antennas: vec![[num_antennas - q + 1, num_antennas]],
                },
            ],
        }
    }

    pub fn masks(&self) -> Result<Vec<AntennaMask>> {
        self.local.iter().map(|l| l.mask(self.num_antennas)).collect()
    }

    /// Checks ranges, path counts, powers and the unit peak diagonal.
    pub fn validate(&self) -> Result<()> {
        if self.num_antennas == 0 {
            return Err(Error::InvalidGeometry("num_antennas must be positive".into()));
        }
        let clusters = std::iter::once((self.common.paths, self.common.aoa_range, self.common.power))
            .chain(self.local.iter().map(|l| (l.paths, l.aoa_range, l.power)));
        for (paths, [lo, hi], power) in clusters {
            if !(-90.0..=90.0).contains(&lo) || !(-90.0..=90.0).contains(&hi) || lo > hi {
                return Err(Error::InvalidGeometry(format!("AoA range [{lo}, {hi}] is invalid")));
            }
            if !power.is_finite() || power < 0.0 {
                return Err(Error::InvalidGeometry(format!("cluster power {power} is invalid")));
            }
            if paths == 0 && power > 0.0 {
                return Err(Error::InvalidGeometry("positive power on a cluster without paths".into()));
            }
        }
        let masks = self.masks()?;
        let mut diag = vec![self.common.power; self.num_antennas];
        for (mask, l) in masks.iter().zip(&self.local) {
            for &m in mask.indices() {
                diag[m] += l.power;
            }
        }
        let max = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if (max - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidGeometry(format!(
                "peak covariance diagonal is {max}, the cluster powers must make it 1"
            )));
        }
        Ok(())
    }
}

fn draw_paths<R: Rng + ?Sized>(paths: usize, [lo, hi]: [f64; 2], power: f64, rng: &mut R) -> Vec<Path> {
    if paths == 0 {
        return Vec::new();
    }
    let aoas: Vec<f64> = (0..paths)
        .map(|_| if lo == hi { lo } else { rng.random_range(lo..=hi) })
        .collect();
    let mut weights: Vec<f64> = (0..paths).map(|_| rng.random::<f64>()).collect();
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        weights.iter_mut().for_each(|w| *w /= total);
    } else {
        weights.iter_mut().for_each(|w| *w = 1.0 / paths as f64);
    }
    aoas.into_iter()
        .zip(weights)
        .map(|(aoa_deg, w)| Path {
            aoa_deg,
            power: w * power,
        })
        .collect()
}

/// Draws AoAs uniformly in each cluster's range and splits the cluster power
/// with normalized Uniform(0, 1) weights.
pub fn random_geometry<R: Rng + ?Sized>(spec: &GeometrySpec, rng: &mut R) -> Result<ClusterGeometry> {
    spec.validate()?;
    let masks = spec.masks()?;
    let common = draw_paths(spec.common.paths, spec.common.aoa_range, spec.common.power, rng);
    let local = spec
        .local
        .iter()
        .zip(masks)
        .map(|(l, mask)| LocalCluster {
            paths: draw_paths(l.paths, l.aoa_range, l.power, rng),
            mask,
        })
        .collect();
    ClusterGeometry::new(spec.num_antennas, common, local)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use approx::assert_abs_diff_eq;

    fn close(a: C64, b: C64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn steering_vector_examples() {
        let a = steering_vector(0.0, 4);
        assert!(a.iter().all(|&z| close(z, C64::new(1.0, 0.0))));
        let a = steering_vector(90.0, 2);
        assert!(close(a[0], C64::new(1.0, 0.0)) && close(a[1], C64::new(-1.0, 0.0)));
        let a = steering_vector(30.0, 3);
        assert!(close(a[0], C64::new(1.0, 0.0)));
        assert!(close(a[1], C64::new(0.0, 1.0)));
        assert!(close(a[2], C64::new(-1.0, 0.0)));
    }

    #[test]
    fn steering_vector_mirror_is_conjugate() {
        for theta in [-73.0, -12.5, 0.0, 41.0, 89.0] {
            let a = steering_vector(theta, 16);
            let b = steering_vector(-theta, 16);
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(*x, y.conj());
                assert_abs_diff_eq!(x.norm(), 1.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn quarter_split_diagonal_pattern() {
        let spec = GeometrySpec::quarter_split(256);
        let g = random_geometry(&spec, &mut stream_rng(3, &[])).unwrap();
        let d = g.covariance_diagonal();
        assert!(g.is_normalized());
        assert_abs_diff_eq!(d[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d[63], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d[64], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(d[191], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(d[192], 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(d[255], 0.8, epsilon = 1e-12);
        let c = channel_covariance(&g);
        for (m, &want) in d.iter().enumerate() {
            assert_abs_diff_eq!(c.as_matrix()[(m, m)].re, want, epsilon = 1e-12);
        }
        for p in g.common_paths() {
            assert!((-60.0..=60.0).contains(&p.aoa_deg));
        }
        assert!(g.local_clusters()[0].paths.iter().all(|p| (-60.0..=0.0).contains(&p.aoa_deg)));
        assert!(g.local_clusters()[1].paths.iter().all(|p| (0.0..=60.0).contains(&p.aoa_deg)));
        assert_abs_diff_eq!(g.common_power(), 0.3, epsilon = 1e-12);
        let lp = g.local_powers();
        assert_abs_diff_eq!(lp[0], 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(lp[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn single_broadside_path_is_all_ones() {
        let spec = GeometrySpec {
            num_antennas: 5,
            common: ClusterSpec {
                paths: 1,
                aoa_range: [0.0, 0.0],
                power: 1.0,
            },
            local: vec![],
        };
        let g = random_geometry(&spec, &mut stream_rng(1, &[])).unwrap();
        let c = channel_covariance(&g);
        assert!(c.as_matrix().iter().all(|&z| close(z, C64::new(1.0, 0.0))));
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let spec = GeometrySpec::quarter_split(32);
        let a = random_geometry(&spec, &mut stream_rng(9, &[1])).unwrap();
        let b = random_geometry(&spec, &mut stream_rng(9, &[1])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unnormalized_spec_rejected() {
        let mut spec = GeometrySpec::quarter_split(32);
        spec.common.power = 0.4;
        assert!(matches!(
            random_geometry(&spec, &mut stream_rng(0, &[])),
            Err(Error::InvalidGeometry(_))
        ));
        let mut spec = GeometrySpec::quarter_split(32);
        spec.local[0].antennas = vec![[30, 40]];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn single_path_trace() {
        let g = ClusterGeometry::new(
            6,
            vec![Path {
                aoa_deg: 17.0,
                power: 0.4,
            }],
            vec![],
        )
        .unwrap();
        let c = channel_covariance(&g);
        assert_abs_diff_eq!(c.trace(), 0.4 * 6.0, epsilon = 1e-12);
        let a = steering_vector(17.0, 6);
        let want = (&a * a.adjoint()) * C64::new(0.4, 0.0);
        assert!((c.as_matrix() - want).norm() < 1e-12);
    }

    #[test]
    fn zero_power_geometry_gives_zero_channel() {
        let g = ClusterGeometry::new(
            4,
            vec![Path {
                aoa_deg: 10.0,
                power: 0.0,
            }],
            vec![],
        )
        .unwrap();
        let h = sample_channel(&g, &mut stream_rng(0, &[]));
        assert!(h.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn local_only_channel_vanishes_off_mask() {
        let mask = AntennaMask::new(vec![1, 4, 5], 8).unwrap();
        let g = ClusterGeometry::new(
            8,
            vec![],
            vec![LocalCluster {
                paths: vec![
                    Path { aoa_deg: -20.0, power: 0.6 },
                    Path { aoa_deg: 35.0, power: 0.4 },
                ],
                mask: mask.clone(),
            }],
        )
        .unwrap();
        let mut rng = stream_rng(2, &[]);
        for _ in 0..50 {
            let h = sample_channel(&g, &mut rng);
            for m in 0..8 {
                if !mask.contains(m) {
                    assert_eq!(h[m], C64::new(0.0, 0.0));
                }
            }
        }
        let c = channel_covariance(&g);
        for i in 0..8 {
            for j in 0..8 {
                if !(mask.contains(i) && mask.contains(j)) {
                    assert_eq!(c.as_matrix()[(i, j)], C64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn noiseless_received_signal_is_channel() {
        let h = CVector::from_vec(vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.0)]);
        assert_eq!(received_signal(&h, 0.0, &mut stream_rng(0, &[])), h);
    }

    #[test]
    fn noise_variance() {
        let mut rng = stream_rng(5, &[]);
        let h = CVector::zeros(4);
        let n = 100_000;
        let mut acc = [0.0; 4];
        for _ in 0..n {
            let y = received_signal(&h, 0.1, &mut rng);
            for (a, z) in acc.iter_mut().zip(y.iter()) {
                *a += z.norm_sqr();
            }
        }
        for a in acc {
            assert!((a / n as f64 - 0.1).abs() < 0.01);
        }
    }

    #[test]
    fn ten_db_is_tenth() {
        assert_abs_diff_eq!(snr_db_to_noise_power(10.0), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn path_permutation_invariance() {
        let paths = vec![
            Path { aoa_deg: -40.0, power: 0.2 },
            Path { aoa_deg: 5.0, power: 0.5 },
            Path { aoa_deg: 61.0, power: 0.3 },
        ];
        let mut rev = paths.clone();
        rev.reverse();
        let a = channel_covariance(&ClusterGeometry::new(9, paths, vec![]).unwrap());
        let b = channel_covariance(&ClusterGeometry::new(9, rev, vec![]).unwrap());
        assert!((a.as_matrix() - b.as_matrix()).norm() < 1e-12);
    }
}
