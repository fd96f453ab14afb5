use onebit_mimo::harness::{
    run_covariance_experiment, EstimatorKind, ExperimentConfig, ExperimentResult, METRIC_E_NF, METRIC_E_NF_BASIC,
};

fn value(res: &ExperimentResult, lambda: f64, n: usize, metric: &str) -> (f64, f64) {
    let r = res.find("dithered", None, Some(lambda), Some(n), metric).unwrap();
    assert_eq!(r.failures, 0, "{:?}", r.failure);
    (r.value.unwrap(), r.stderr.unwrap())
}

#[test]
fn dithered_error_nonincreasing_in_n() {
    let mut cfg = ExperimentConfig::desk();
    cfg.lambdas = vec![1.5];
    cfg.sample_sizes = vec![20, 50, 100, 200, 500, 1000, 2000, 5000];
    cfg.geometries = 4;
    cfg.groups = 3;
    cfg.estimators = vec![EstimatorKind::Dithered];
    let res = run_covariance_experiment(&cfg).unwrap();
    for w in cfg.sample_sizes.windows(2) {
        let (a, sa) = value(&res, 1.5, w[0], METRIC_E_NF);
        let (b, sb) = value(&res, 1.5, w[1], METRIC_E_NF);
        assert!(b <= a + 2.0 * (sa * sa + sb * sb).sqrt(), "N={} -> {}: {a} -> {b}", w[0], w[1]);
    }
}

#[test]
fn lambda_sweep_is_u_shaped_on_paper_geometry() {
    let mut cfg = ExperimentConfig::paper();
    cfg.lambdas = vec![0.3, 1.5, 4.0];
    cfg.sample_sizes = vec![1000];
    cfg.geometries = 4;
    cfg.groups = 1;
    cfg.estimators = vec![EstimatorKind::Dithered];
    let res = run_covariance_experiment(&cfg).unwrap();
    let e: Vec<f64> = cfg.lambdas.iter().map(|&l| value(&res, l, 1000, METRIC_E_NF).0).collect();
    assert!(e[1] < e[0] && e[1] < e[2], "E_NF over lambda {:?}: {e:?}", cfg.lambdas);
}

#[test]
fn refinement_beats_basic_estimate_on_paper_geometry() {
    let mut cfg = ExperimentConfig::paper();
    cfg.lambdas = vec![1.0];
    cfg.sample_sizes = vec![1000];
    cfg.geometries = 10;
    cfg.groups = 2;
    cfg.estimators = vec![EstimatorKind::Dithered];
    let res = run_covariance_experiment(&cfg).unwrap();
    let (refined, _) = value(&res, 1.0, 1000, METRIC_E_NF);
    let (basic, _) = value(&res, 1.0, 1000, METRIC_E_NF_BASIC);
    assert!(refined <= basic, "refined E_NF {refined:.4} > basic {basic:.4}");
}
