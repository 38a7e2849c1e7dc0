use std::collections::HashSet;

use ksconf::harness::{
    EvalConfig, EvalSettings, MixtureSpec, ScoreSource, TestKind, calibration_split,
    evaluate_fpr, evaluate_tpr, sample_batch, sample_mixture_batch,
};
use ksconf::rng;
use ksconf::{Error, ScoreSample};

fn mixture(rho: f64) -> MixtureSpec {
    MixtureSpec::new(
        ScoreSource::beta(5.0, 1.0).unwrap(),
        ScoreSource::beta(1.0, 5.0).unwrap(),
        rho,
    )
    .unwrap()
}

#[test]
fn mixture_counts_are_exact() {
    for (rho, m, expected) in [(0.0, 50, 0), (1.0, 50, 50), (0.3, 10, 3), (0.25, 10, 3), (0.5, 7, 4)] {
        let batch = sample_mixture_batch(&mixture(rho), m, &mut rng::seeded(1)).unwrap();
        assert_eq!(batch.len(), m);
        assert_eq!(batch.iter().filter(|s| s.alternative).count(), expected, "rho={rho} m={m}");
    }
}

#[test]
fn mixture_positions_are_shuffled_and_deterministic() {
    let a = sample_mixture_batch(&mixture(0.5), 100, &mut rng::seeded(3)).unwrap();
    let b = sample_mixture_batch(&mixture(0.5), 100, &mut rng::seeded(3)).unwrap();
    assert_eq!(a, b);
    let first_half = a[..50].iter().filter(|s| s.alternative).count();
    assert!(first_half > 0 && first_half < 50);
    let ids: HashSet<&str> = a.iter().map(|s| s.sample.id.as_str()).collect();
    assert_eq!(ids.len(), 100);
}

#[test]
fn empty_pool_is_rejected() {
    assert!(matches!(
        ScoreSource::pool(Vec::new()),
        Err(Error::InsufficientData { .. })
    ));
    assert!(ScoreSource::beta(0.0, 1.0).is_err());
    assert!(MixtureSpec::new(ScoreSource::beta(1.0, 1.0).unwrap(), ScoreSource::beta(1.0, 1.0).unwrap(), 1.5).is_err());
}

#[test]
fn pool_split_is_disjoint() {
    let samples: Vec<ScoreSample> = (0..1000)
        .map(|i| ScoreSample::new(format!("p{i}"), None, (i as f64 + 0.5) / 1000.0).unwrap())
        .collect();
    let pool = ScoreSource::pool(samples).unwrap();
    let settings = EvalSettings {
        seed: 5,
        ..EvalSettings::default()
    };
    let (cal, test) = calibration_split(&pool, &settings).unwrap();
    assert_eq!(cal.len(), 500);
    let cal_ids: HashSet<String> = cal.iter().map(|s| s.id.clone()).collect();
    let ScoreSource::Pool { samples } = &test else { panic!("pool expected") };
    assert_eq!(samples.len(), 500);
    assert!(samples.iter().all(|s| !cal_ids.contains(&s.id)));

    // Test batches only ever see held-out confidences.
    let held: HashSet<u64> = samples.iter().map(|s| s.confidence.to_bits()).collect();
    let batch = sample_batch(&test, 2000, &mut rng::seeded(1)).unwrap();
    assert!(batch.iter().all(|s| held.contains(&s.confidence.to_bits())));
}

#[test]
fn fpr_near_zero_for_tiny_alpha_and_rows_reproduce() {
    let settings = EvalSettings {
        seed: 11,
        calibration_size: 5_000,
        ..EvalSettings::default()
    };
    let src = ScoreSource::beta(5.0, 1.0).unwrap();
    let row = evaluate_fpr(TestKind::KsConf, &src, 100, 0.00001, 2_000, &settings).unwrap();
    assert!(row.rate <= 0.001, "{row:?}");
    let again = evaluate_fpr(TestKind::KsConf, &src, 100, 0.00001, 2_000, &settings).unwrap();
    assert_eq!(row, again);
}

#[test]
fn tpr_at_zero_mixing_is_fpr_level() {
    let settings = EvalSettings {
        seed: 2,
        calibration_size: 20_000,
        ..EvalSettings::default()
    };
    let reference = ScoreSource::beta(5.0, 1.0).unwrap();
    let alternative = ScoreSource::beta(1.0, 5.0).unwrap();
    let rows = evaluate_tpr(TestKind::KsConf, &reference, &alternative, &[0.0, 1.0], 100, 0.1, 2_000, &settings).unwrap();
    let band = 4.0 * (0.1f64 * 0.9 / 2_000.0).sqrt();
    assert!((rows[0].rate - 0.1).abs() < band, "{:?}", rows[0]);
    assert_eq!(rows[1].rate, 1.0);
}

#[test]
fn config_runs_and_is_reproducible() {
    let text = r#"
        seed = 3
        trials = 300
        calibration_size = 5000
        bootstrap_resamples = 2000

        [sources.ref]
        kind = "beta"
        a = 5.0
        b = 1.0
        labels = { kind = "uniform", k = 10 }

        [sources.alt]
        kind = "beta"
        a = 1.0
        b = 5.0

        [[fpr]]
        source = "ref"
        tests = ["ks-conf", "mean", "sym-log-z", "chi2"]
        alpha = [0.1]
        m = [50]

        [[tpr]]
        reference = "ref"
        alternative = "alt"
        tests = ["ks-conf"]
        rho = [0.0, 1.0]
        alpha = [0.1]
        m = [50]

        [[filtering]]
        reference = "ref"
        alternative = "alt"
        rho = [0.3]
        m = 100
        w = 10
        positives = 50
    "#;
    let cfg = EvalConfig::from_toml(text).unwrap();
    let a = cfg.run(std::path::Path::new(".")).unwrap();
    let b = cfg.run(std::path::Path::new(".")).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.rows.len(), 4 + 2 + 3);
    assert!(a.rows.iter().all(|r| (0.0..=1.0).contains(&r.rate)));
    assert!(a.to_csv().starts_with("test,alpha,m,rho,rate,stderr,trials\n"));
}

#[test]
fn config_errors() {
    assert!(matches!(EvalConfig::from_toml("seed = \"x\""), Err(Error::Config(_))));
    let cfg = EvalConfig::from_toml(
        "[sources.a]\nkind = \"beta\"\na = 1.0\nb = 1.0\n[[fpr]]\nsource = \"zzz\"\ntests = [\"z\"]\nalpha = [0.1]\nm = [5]\n",
    )
    .unwrap();
    assert!(matches!(cfg.run(std::path::Path::new(".")), Err(Error::Config(_))));
    let cfg = EvalConfig::from_toml("[sources.a]\nkind = \"file\"\npath = \"missing.csv\"\n").unwrap();
    assert!(cfg.run(std::path::Path::new(".")).is_err());
}
