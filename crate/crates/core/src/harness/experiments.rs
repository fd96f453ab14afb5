use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::aps_fitting::{fit_aps, reconstruct_covariance, AngularDictionary, angle_grid};
use crate::bussgang::{build_blmmse_filter, estimate_channel, expected_squared_error, BlmmseFilter, Provenance};
use crate::channel_model::{channel_covariance, random_geometry, received_signal, sample_channel, ClusterGeometry};
use crate::cov_estimation::{
    DitheredCovarianceAccumulator, SampleCovarianceAccumulator, SignCovarianceAccumulator,
};
use crate::error::Result;
use crate::linalg::{CMatrix, CVector, HermitianMatrix};
use crate::quantizer::{csign, dithered_quantize, QuantizedVector};
use crate::receivers::{
    blmmse_receiver, mrc_receiver, per_user_sinr, zf_receiver, DataPhaseModel, LinearReceiver, MultiUserChannel,
    ReceiverKind,
};
use crate::rng::{domain, stream_rng};

use super::config::{EstimatorKind, ExperimentConfig};
use super::results::{ExperimentKind, ExperimentResult, Record, Tally};

pub const METRIC_E_NF: &str = "e_nf";
pub const METRIC_E_NF_BASIC: &str = "e_nf_basic";
pub const METRIC_E_NMSE: &str = "e_nmse";
pub const METRIC_E_NMSE_CLOSED: &str = "e_nmse_closed_form";
pub const METRIC_R_SUM: &str = "r_sum";

/// Where a covariance (or channel estimate) came from. `Dithered` holds an
/// index into `lambdas`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Method {
    PerfectCsi,
    Oracle,
    Unquantized,
    Nondithered,
    Dithered(usize),
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::PerfectCsi => "perfect_csi",
            Method::Oracle => "oracle",
            Method::Unquantized => EstimatorKind::Unquantized.name(),
            Method::Nondithered => EstimatorKind::Nondithered.name(),
            Method::Dithered(_) => EstimatorKind::Dithered.name(),
        }
    }

    fn quantized(self) -> bool {
        matches!(self, Method::Nondithered | Method::Dithered(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    method: Method,
    /// Index into `sample_sizes`.
    n: Option<usize>,
    receiver: Option<ReceiverKind>,
    metric: &'static str,
}

type Tallies = BTreeMap<Key, Tally>;

fn estimated_methods(cfg: &ExperimentConfig) -> Vec<Method> {
    let mut out = Vec::new();
    if cfg.uses(EstimatorKind::Unquantized) {
        out.push(Method::Unquantized);
    }
    if cfg.uses(EstimatorKind::Nondithered) {
        out.push(Method::Nondithered);
    }
    if cfg.uses(EstimatorKind::Dithered) {
        out.extend((0..cfg.lambdas.len()).map(Method::Dithered));
    }
    out
}

/// Every record an experiment reports, so that a failing cell still shows up.
fn expected_keys(cfg: &ExperimentConfig, kind: ExperimentKind) -> Vec<Key> {
    let mut keys = Vec::new();
    let estimated = estimated_methods(cfg);
    let per_n = |m: Method, receiver: Option<ReceiverKind>, metric: &'static str, keys: &mut Vec<Key>| {
        for n in 0..cfg.sample_sizes.len() {
            keys.push(Key {
                method: m,
                n: Some(n),
                receiver,
                metric,
            });
        }
    };
    match kind {
        ExperimentKind::Covariance => {
            for &m in &estimated {
                per_n(m, None, METRIC_E_NF, &mut keys);
                if m.quantized() {
                    per_n(m, None, METRIC_E_NF_BASIC, &mut keys);
                }
            }
        }
        ExperimentKind::Channel => {
            for metric in [METRIC_E_NMSE, METRIC_E_NMSE_CLOSED] {
                keys.push(Key {
                    method: Method::Oracle,
                    n: None,
                    receiver: None,
                    metric,
                });
                for &m in &estimated {
                    per_n(m, None, metric, &mut keys);
                }
            }
        }
        ExperimentKind::SumRate => {
            for &r in &cfg.receivers {
                for m in [Method::PerfectCsi, Method::Oracle] {
                    keys.push(Key {
                        method: m,
                        n: None,
                        receiver: Some(r),
                        metric: METRIC_R_SUM,
                    });
                }
                for &m in &estimated {
                    per_n(m, Some(r), METRIC_R_SUM, &mut keys);
                }
            }
        }
    }
    keys.sort();
    keys
}

fn cells(cfg: &ExperimentConfig) -> Vec<(u64, u64)> {
    (0..cfg.geometries as u64)
        .flat_map(|g| (0..cfg.groups as u64).map(move |j| (g, j)))
        .collect()
}

/// Geometry of `user` in realization `g`; users are drawn independently.
pub fn user_geometry(cfg: &ExperimentConfig, g: u64, user: u64) -> Result<ClusterGeometry> {
    random_geometry(&cfg.geometry, &mut stream_rng(cfg.seed, &[domain::GEOMETRY, g, user]))
}

/// The dictionary only depends on the antenna masks, which every geometry
/// drawn from the configured `GeometrySpec` shares.
pub fn config_dictionary(cfg: &ExperimentConfig) -> Result<AngularDictionary> {
    AngularDictionary::new(
        cfg.num_antennas(),
        cfg.geometry.masks()?,
        angle_grid(cfg.grid_points(), cfg.grid_spacing),
    )
}

/// Unstructured `C_y` estimates at every configured sample size.
struct CovarianceEstimates {
    /// `by_n[n_idx]` lists `(method, C_y estimate)`.
    by_n: Vec<Vec<(Method, HermitianMatrix)>>,
}

/// Streams `max(sample_sizes)` snapshots once and snapshots every estimator at
/// each requested size, so smaller sample sizes are prefixes of larger ones.
fn estimate_covariances(
    cfg: &ExperimentConfig,
    geometry: &ClusterGeometry,
    coords: &[u64],
) -> Result<CovarianceEstimates> {
    let m = geometry.num_antennas();
    let n0 = cfg.n0();
    let key = |d: u64, extra: &[u64]| -> Vec<u64> {
        std::iter::once(d).chain(coords.iter().copied()).chain(extra.iter().copied()).collect()
    };
    let mut samples = stream_rng(cfg.seed, &key(domain::SAMPLES, &[]));
    let mut unq = cfg.uses(EstimatorKind::Unquantized).then(|| SampleCovarianceAccumulator::new(m));
    let mut nd = cfg.uses(EstimatorKind::Nondithered).then(|| SignCovarianceAccumulator::new(m));
    let mut dith = Vec::new();
    if cfg.uses(EstimatorKind::Dithered) {
        for (li, &lambda) in cfg.lambdas.iter().enumerate() {
            let rng = stream_rng(cfg.seed, &key(domain::DITHER, &[li as u64]));
            dith.push((DitheredCovarianceAccumulator::new(m, lambda)?, rng));
        }
    }

    let mut by_n = vec![Vec::new(); cfg.sample_sizes.len()];
    let n_max = cfg.sample_sizes.iter().copied().max().unwrap_or(0);
    for n in 1..=n_max {
        let h = sample_channel(geometry, &mut samples);
        let y = received_signal(&h, n0, &mut samples);
        if let Some(acc) = unq.as_mut() {
            acc.push(&y)?;
        }
        if let Some(acc) = nd.as_mut() {
            acc.push(&csign(&y))?;
        }
        for (acc, rng) in dith.iter_mut() {
            let lambda = acc.lambda();
            acc.push(&dithered_quantize(&y, lambda, rng)?)?;
        }
        for (idx, _) in cfg.sample_sizes.iter().enumerate().filter(|(_, &s)| s == n) {
            let out = &mut by_n[idx];
            if let Some(acc) = unq.as_ref() {
                out.push((Method::Unquantized, acc.clone().finish()?.matrix));
            }
            if let Some(acc) = nd.as_ref() {
                out.push((Method::Nondithered, acc.clone().finish()?.matrix));
            }
            for (li, (acc, _)) in dith.iter().enumerate() {
                out.push((Method::Dithered(li), acc.clone().finish()?.matrix));
            }
        }
    }
    Ok(CovarianceEstimates { by_n })
}

/// `||C_h - C||_F^2 / ||C_h||_F^2`.
pub fn normalized_frobenius_error(c_h: &HermitianMatrix, estimate: &HermitianMatrix) -> f64 {
    (c_h.as_matrix() - estimate.as_matrix()).norm_squared() / c_h.as_matrix().norm_squared()
}

/// The channel covariance estimate a method produces: basic subtraction for
/// unquantized data, APS refinement of the basic estimate for quantized data.
/// Returns `(refined, basic)`.
fn channel_covariance_estimate(
    method: Method,
    c_y: &HermitianMatrix,
    n0: f64,
    dict: &AngularDictionary,
) -> Result<(HermitianMatrix, HermitianMatrix)> {
    let basic = c_y.shifted(-n0);
    if !method.quantized() {
        return Ok((basic.clone(), basic));
    }
    let fit = fit_aps(dict, &basic)?;
    Ok((reconstruct_covariance(dict, &fit.coefficients)?, basic))
}

/// Covariance handed to the plug-in filter: the raw sample covariance for
/// unquantized data, `C_h* + N0 I` otherwise.
fn plug_in_covariance(
    method: Method,
    c_y: &HermitianMatrix,
    n0: f64,
    dict: &AngularDictionary,
) -> Result<HermitianMatrix> {
    if !method.quantized() {
        return Ok(c_y.clone());
    }
    Ok(channel_covariance_estimate(method, c_y, n0, dict)?.0.shifted(n0))
}

/// One pilot observation: the channel and its one-bit measurement.
#[derive(Debug, Clone)]
pub struct PilotDraw {
    pub h: CVector,
    pub r: QuantizedVector,
}

pub fn pilot_draws<R: rand::Rng + ?Sized>(
    geometry: &ClusterGeometry,
    n0: f64,
    count: usize,
    rng: &mut R,
) -> Vec<PilotDraw> {
    (0..count)
        .map(|_| {
            let h = sample_channel(geometry, rng);
            let r = csign(&received_signal(&h, n0, rng));
            PilotDraw { h, r }
        })
        .collect()
}

/// `||h - F r||^2 / tr(C_h)` for every draw.
pub fn normalized_squared_errors(f: &BlmmseFilter, c_h: &HermitianMatrix, draws: &[PilotDraw]) -> Result<Vec<f64>> {
    let scale = c_h.trace();
    draws
        .iter()
        .map(|d| Ok((&d.h - estimate_channel(f, &d.r)?).norm_squared() / scale))
        .collect()
}

fn record_failure(t: &mut Tallies, keys: impl IntoIterator<Item = Key>, err: &dyn std::fmt::Display) {
    for k in keys {
        t.entry(k).or_default().fail(err);
    }
}

fn covariance_cell(cfg: &ExperimentConfig, dict: &AngularDictionary, g: u64, j: u64) -> Result<Tallies> {
    let geometry = user_geometry(cfg, g, 0)?;
    let c_h = channel_covariance(&geometry);
    let n0 = cfg.n0();
    let est = estimate_covariances(cfg, &geometry, &[g, j, 0])?;
    let mut t = Tallies::new();
    for (n_idx, list) in est.by_n.iter().enumerate() {
        for (method, c_y) in list {
            let key = |metric| Key {
                method: *method,
                n: Some(n_idx),
                receiver: None,
                metric,
            };
            match channel_covariance_estimate(*method, c_y, n0, dict) {
                Ok((refined, basic)) => {
                    t.entry(key(METRIC_E_NF)).or_default().push(normalized_frobenius_error(&c_h, &refined));
                    if method.quantized() {
                        t.entry(key(METRIC_E_NF_BASIC))
                            .or_default()
                            .push(normalized_frobenius_error(&c_h, &basic));
                    }
                }
                Err(e) => record_failure(&mut t, [key(METRIC_E_NF)], &e),
            }
        }
    }
    Ok(t)
}

fn push_filter_errors(
    t: &mut Tallies,
    f: &BlmmseFilter,
    c_h: &HermitianMatrix,
    c_y_true: &HermitianMatrix,
    draws: &[PilotDraw],
    cfg: &ExperimentConfig,
    method: Method,
    n: Option<usize>,
) {
    let key = |metric| Key {
        method,
        n,
        receiver: None,
        metric,
    };
    let result = normalized_squared_errors(f, c_h, draws).and_then(|errs| {
        let closed = expected_squared_error(f.matrix(), c_h, c_y_true, cfg.diag_floor)? / c_h.trace();
        Ok((errs, closed))
    });
    match result {
        Ok((errs, closed)) => {
            let mc = t.entry(key(METRIC_E_NMSE)).or_default();
            errs.iter().for_each(|&e| mc.push(e));
            let cf = t.entry(key(METRIC_E_NMSE_CLOSED)).or_default();
            cf.push(closed);
            if f.ridge().is_some() {
                for metric in [METRIC_E_NMSE, METRIC_E_NMSE_CLOSED] {
                    t.entry(key(metric)).or_default().ridge_activations += 1;
                }
            }
        }
        Err(e) => record_failure(t, [key(METRIC_E_NMSE), key(METRIC_E_NMSE_CLOSED)], &e),
    }
}

fn channel_cell(cfg: &ExperimentConfig, dict: &AngularDictionary, g: u64, j: u64) -> Result<Tallies> {
    let geometry = user_geometry(cfg, g, 0)?;
    let c_h = channel_covariance(&geometry);
    let n0 = cfg.n0();
    let c_y_true = c_h.shifted(n0);
    let opts = cfg.filter_options();
    let draws = pilot_draws(
        &geometry,
        n0,
        cfg.channel_draws,
        &mut stream_rng(cfg.seed, &[domain::CHANNEL, g, j, 0]),
    );
    let mut t = Tallies::new();

    let fail_keys = |method, n| {
        [METRIC_E_NMSE, METRIC_E_NMSE_CLOSED].map(|metric| Key {
            method,
            n,
            receiver: None,
            metric,
        })
    };
    match build_blmmse_filter(&c_y_true, n0, Provenance::Oracle, opts) {
        Ok(f) => push_filter_errors(&mut t, &f, &c_h, &c_y_true, &draws, cfg, Method::Oracle, None),
        Err(e) => record_failure(&mut t, fail_keys(Method::Oracle, None), &e),
    }

    let est = estimate_covariances(cfg, &geometry, &[g, j, 0])?;
    for (n_idx, list) in est.by_n.iter().enumerate() {
        for (method, c_y) in list {
            let filter = plug_in_covariance(*method, c_y, n0, dict)
                .and_then(|cov| build_blmmse_filter(&cov, n0, Provenance::PlugIn, opts));
            match filter {
                Ok(f) => push_filter_errors(&mut t, &f, &c_h, &c_y_true, &draws, cfg, *method, Some(n_idx)),
                Err(e) => record_failure(&mut t, fail_keys(*method, Some(n_idx)), &e),
            }
        }
    }
    Ok(t)
}

fn build_receiver(kind: ReceiverKind, h_hat: &CMatrix, cfg: &ExperimentConfig) -> Result<LinearReceiver> {
    match kind {
        ReceiverKind::Mrc => Ok(mrc_receiver(h_hat)),
        ReceiverKind::Zf => zf_receiver(h_hat, cfg.cond_cap),
        ReceiverKind::Blmmse => blmmse_receiver(h_hat, cfg.n0(), cfg.filter_options()),
    }
}

fn score_receivers(
    t: &mut Tallies,
    cfg: &ExperimentConfig,
    h_hat: &CMatrix,
    channel: &MultiUserChannel,
    model: &DataPhaseModel,
    method: Method,
    n: Option<usize>,
) {
    for &kind in &cfg.receivers {
        let key = Key {
            method,
            n,
            receiver: Some(kind),
            metric: METRIC_R_SUM,
        };
        let rate = build_receiver(kind, h_hat, cfg).and_then(|w| {
            let sinr = per_user_sinr(&w, channel, model)?;
            Ok((sinr.iter().map(|s| (1.0 + s).log2()).sum::<f64>(), w.ridge().is_some()))
        });
        let tally = t.entry(key).or_default();
        match rate {
            Ok((r, ridged)) => {
                tally.push(r);
                if ridged {
                    tally.ridge_activations += 1;
                }
            }
            Err(e) => tally.fail(e),
        }
    }
}

fn sumrate_cell(cfg: &ExperimentConfig, dict: &AngularDictionary, g: u64, j: u64) -> Result<Tallies> {
    let k = cfg.num_users;
    let n0 = cfg.n0();
    let opts = cfg.filter_options();
    let geometries: Vec<ClusterGeometry> = (0..k as u64).map(|u| user_geometry(cfg, g, u)).collect::<Result<_>>()?;
    let covs: Vec<HermitianMatrix> = geometries.iter().map(channel_covariance).collect();
    let mut t = Tallies::new();

    // per-user filters for every (method, n); a failure disables that pair
    type Filters = Vec<BlmmseFilter>;
    let mut pipelines: Vec<(Method, Option<usize>, Filters)> = Vec::new();
    let all_receivers = |method, n| {
        cfg.receivers
            .iter()
            .map(|&r| Key {
                method,
                n,
                receiver: Some(r),
                metric: METRIC_R_SUM,
            })
            .collect::<Vec<_>>()
    };
    let oracle: Result<Filters> = covs
        .iter()
        .map(|c| build_blmmse_filter(&c.shifted(n0), n0, Provenance::Oracle, opts))
        .collect();
    match oracle {
        Ok(f) => pipelines.push((Method::Oracle, None, f)),
        Err(e) => record_failure(&mut t, all_receivers(Method::Oracle, None), &e),
    }

    let per_user: Vec<CovarianceEstimates> = geometries
        .iter()
        .enumerate()
        .map(|(u, geo)| estimate_covariances(cfg, geo, &[g, j, u as u64]))
        .collect::<Result<_>>()?;
    for n_idx in 0..cfg.sample_sizes.len() {
        for (pos, &(method, _)) in per_user[0].by_n[n_idx].iter().enumerate() {
            let filters: Result<Filters> = per_user
                .iter()
                .map(|est| {
                    let c_y = &est.by_n[n_idx][pos].1;
                    let cov = plug_in_covariance(method, c_y, n0, dict)?;
                    build_blmmse_filter(&cov, n0, Provenance::PlugIn, opts)
                })
                .collect();
            match filters {
                Ok(f) => pipelines.push((method, Some(n_idx), f)),
                Err(e) => record_failure(&mut t, all_receivers(method, Some(n_idx)), &e),
            }
        }
    }

    let mut rng = stream_rng(cfg.seed, &[domain::CHANNEL, g, j]);
    for _ in 0..cfg.channel_draws {
        let pilots: Vec<PilotDraw> = geometries.iter().flat_map(|geo| pilot_draws(geo, n0, 1, &mut rng)).collect();
        let h = CMatrix::from_columns(&pilots.iter().map(|p| p.h.clone()).collect::<Vec<_>>());
        let channel = match MultiUserChannel::new(h.clone(), n0) {
            Ok(c) => c,
            Err(e) => {
                let keys = expected_keys(cfg, ExperimentKind::SumRate);
                record_failure(&mut t, keys, &e);
                continue;
            }
        };
        let model = match DataPhaseModel::new(&channel, cfg.diag_floor) {
            Ok(m) => m,
            Err(e) => {
                let keys = expected_keys(cfg, ExperimentKind::SumRate);
                record_failure(&mut t, keys, &e);
                continue;
            }
        };
        score_receivers(&mut t, cfg, &h, &channel, &model, Method::PerfectCsi, None);
        for (method, n, filters) in &pipelines {
            let estimates: Result<Vec<CVector>> =
                filters.iter().zip(&pilots).map(|(f, p)| estimate_channel(f, &p.r)).collect();
            match estimates {
                Ok(cols) => {
                    let h_hat = CMatrix::from_columns(&cols);
                    score_receivers(&mut t, cfg, &h_hat, &channel, &model, *method, *n);
                }
                Err(e) => record_failure(&mut t, all_receivers(*method, *n), &e),
            }
        }
    }
    Ok(t)
}

fn run(
    cfg: &ExperimentConfig,
    kind: ExperimentKind,
    cell: fn(&ExperimentConfig, &AngularDictionary, u64, u64) -> Result<Tallies>,
) -> anyhow::Result<ExperimentResult> {
    cfg.validate()?;
    let keys = expected_keys(cfg, kind);
    let dict = config_dictionary(cfg)?;
    let per_cell: Vec<Tallies> = cells(cfg)
        .par_iter()
        .map(|&(g, j)| {
            cell(cfg, &dict, g, j).unwrap_or_else(|e| {
                let mut t = Tallies::new();
                record_failure(&mut t, keys.iter().copied(), &e);
                t
            })
        })
        .collect();

    let mut total: Tallies = keys.iter().map(|&k| (k, Tally::default())).collect();
    for t in &per_cell {
        for (k, v) in t {
            total.entry(*k).or_default().merge(v);
        }
    }
    let records = total
        .into_iter()
        .map(|(k, v)| Record {
            kind,
            method: k.method.name().to_string(),
            receiver: k.receiver,
            lambda: match k.method {
                Method::Dithered(li) => Some(cfg.lambdas[li]),
                _ => None,
            },
            n: k.n.map(|i| cfg.sample_sizes[i]),
            seed: cfg.seed,
            metric: k.metric.to_string(),
            value: v.mean(),
            stderr: v.stderr(),
            count: v.count(),
            ridge_activations: v.ridge_activations,
            failures: v.failures,
            failure: v.failure,
        })
        .collect();
    Ok(ExperimentResult { records })
}

/// Normalized Frobenius error of the channel covariance estimate per
/// (estimator, lambda, N), averaged over geometries x groups.
pub fn run_covariance_experiment(cfg: &ExperimentConfig) -> anyhow::Result<ExperimentResult> {
    run(cfg, ExperimentKind::Covariance, covariance_cell)
}

/// Normalized channel MSE of the plug-in BLMMSE estimator, with the
/// true-covariance filter as the `oracle` reference.
pub fn run_channel_experiment(cfg: &ExperimentConfig) -> anyhow::Result<ExperimentResult> {
    run(cfg, ExperimentKind::Channel, channel_cell)
}

/// Ergodic sum rate per receiver, with `perfect_csi` (receivers built from
/// the true channel) and `oracle` (true-covariance channel estimates) as
/// references.
pub fn run_sumrate_experiment(cfg: &ExperimentConfig) -> anyhow::Result<ExperimentResult> {
    run(cfg, ExperimentKind::SumRate, sumrate_cell)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bussgang::FilterOptions;

    fn tiny() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::desk();
        cfg.geometry = crate::channel_model::GeometrySpec::quarter_split(8);
        cfg.sample_sizes = vec![20, 60];
        cfg.lambdas = vec![1.0];
        cfg.geometries = 2;
        cfg.groups = 2;
        cfg.channel_draws = 5;
        cfg.num_users = 2;
        cfg
    }

    #[test]
    fn injected_truth_has_zero_error() {
        let cfg = tiny();
        let geometry = user_geometry(&cfg, 0, 0).unwrap();
        let c_h = channel_covariance(&geometry);
        assert_eq!(normalized_frobenius_error(&c_h, &c_h), 0.0);
    }

    #[test]
    fn injected_true_covariance_matches_oracle() {
        let cfg = tiny();
        let geometry = user_geometry(&cfg, 1, 0).unwrap();
        let c_h = channel_covariance(&geometry);
        let c_y = c_h.shifted(cfg.n0());
        let draws = pilot_draws(&geometry, cfg.n0(), 10, &mut stream_rng(1, &[]));
        let oracle = build_blmmse_filter(&c_y, cfg.n0(), Provenance::Oracle, FilterOptions::default()).unwrap();
        let plug = build_blmmse_filter(&c_y, cfg.n0(), Provenance::PlugIn, FilterOptions::default()).unwrap();
        assert_eq!(
            normalized_squared_errors(&oracle, &c_h, &draws).unwrap(),
            normalized_squared_errors(&plug, &c_h, &draws).unwrap()
        );
    }

    #[test]
    fn nested_sample_sizes_share_prefixes() {
        let mut cfg = tiny();
        cfg.sample_sizes = vec![60, 20, 60];
        let geometry = user_geometry(&cfg, 0, 0).unwrap();
        let est = estimate_covariances(&cfg, &geometry, &[0, 0, 0]).unwrap();
        assert_eq!(est.by_n[0], est.by_n[2]);
        cfg.sample_sizes = vec![20];
        let small = estimate_covariances(&cfg, &geometry, &[0, 0, 0]).unwrap();
        assert_eq!(small.by_n[0], est.by_n[1]);
    }

    #[test]
    fn every_expected_record_is_reported() {
        let cfg = tiny();
        for (kind, res) in [
            (ExperimentKind::Covariance, run_covariance_experiment(&cfg).unwrap()),
            (ExperimentKind::Channel, run_channel_experiment(&cfg).unwrap()),
            (ExperimentKind::SumRate, run_sumrate_experiment(&cfg).unwrap()),
        ] {
            assert_eq!(res.records.len(), expected_keys(&cfg, kind).len());
            assert_eq!(res.total_failures(), 0);
            for r in &res.records {
                assert!(r.value.unwrap().is_finite() && r.value.unwrap() >= 0.0, "{r:?}");
            }
        }
    }
}
