use std::sync::Arc;

use idtrace_bench::efficiency::visible_attributes;
use idtrace_bench::generator::GeneratorConfig;
use idtrace_bench::{
    generate_universe, titf_vs_random, EfficiencyConfig, EfficiencyError, MissingProtocol,
};
use idtrace_core::Status;

fn universe(n: usize, seed: u64) -> Arc<idtrace_core::Universe> {
    Arc::new(generate_universe(&GeneratorConfig::with_shape(n, 10, 2, 6, seed)).unwrap())
}

fn config(rates: Vec<f64>) -> EfficiencyConfig {
    EfficiencyConfig {
        missing_rates: rates,
        objects: 25,
        baseline_repetitions: 5,
        ..EfficiencyConfig::default()
    }
}

#[test]
fn nothing_hidden_means_nothing_to_acquire() {
    let u = universe(200, 1);
    let report = titf_vs_random(&u, &config(vec![0.0]), 3).unwrap();
    assert_eq!(report.runs.len(), 25);
    for run in &report.runs {
        assert_eq!(run.known, 10);
        assert_eq!(run.titf_acquisitions, 0);
        assert_eq!(run.random_mean_acquisitions, 0.0);
        assert_eq!(run.titf_status, Status::Identified);
    }
    assert_eq!(report.summary[0].reduction, 0.0);
}

#[test]
fn greedy_needs_no_more_than_the_hidden_attributes() {
    let u = universe(400, 2);
    let report = titf_vs_random(&u, &config(vec![0.3, 0.6, 0.9]), 4).unwrap();
    assert_eq!(report.runs.len(), 75);
    for run in &report.runs {
        assert!(run.titf_acquisitions <= 10 - run.known);
        assert!(run.random_max_acquisitions <= 10 - run.known);
        assert!(run.random_min_acquisitions as f64 <= run.random_mean_acquisitions);
        assert!(run.random_mean_acquisitions <= run.random_max_acquisitions as f64);
        assert_eq!(run.titf_status, Status::Identified);
    }
    for s in &report.summary {
        assert_eq!(s.objects, 25);
        assert!(
            s.titf_mean_acquisitions <= s.random_mean_acquisitions,
            "{s:?}"
        );
    }
    let hidden: Vec<f64> = report.summary.iter().map(|s| s.mean_known).collect();
    assert!(hidden.windows(2).all(|w| w[0] > w[1]));
}

#[test]
fn acquisition_tables_repeat_exactly() {
    let u = universe(300, 3);
    let cfg = config(vec![0.5, 0.8]);
    let a = titf_vs_random(&u, &cfg, 9).unwrap();
    let b = titf_vs_random(&u, &cfg, 9).unwrap();
    assert_eq!(a.summary_table().to_csv(), b.summary_table().to_csv());
    assert_eq!(a.objects_table(&u).to_csv(), b.objects_table(&u).to_csv());
    for t in [a.summary_table(), a.objects_table(&u), a.timing_table()] {
        t.validate().unwrap();
    }
    let c = titf_vs_random(&u, &cfg, 10).unwrap();
    assert_ne!(a.objects_table(&u).to_csv(), c.objects_table(&u).to_csv());
}

#[test]
fn reductions_follow_their_definitions() {
    let u = universe(300, 4);
    let report = titf_vs_random(&u, &config(vec![0.5, 0.8]), 1).unwrap();
    for s in &report.summary {
        let expected =
            (s.random_mean_acquisitions - s.titf_mean_acquisitions) / s.random_mean_acquisitions;
        assert!((s.reduction - expected).abs() < 1e-12);
    }
    let mean = report.summary.iter().map(|s| s.reduction).sum::<f64>() / 2.0;
    assert!((report.aggregate_reduction() - mean).abs() < 1e-12);
    let titf: usize = report.runs.iter().map(|r| r.titf_acquisitions).sum();
    let random: f64 = report.runs.iter().map(|r| r.random_mean_acquisitions).sum();
    assert!((report.pooled_reduction() - (random - titf as f64) / random).abs() < 1e-12);
}

#[test]
fn fixed_count_hides_exactly_ceil_s_m() {
    let u = universe(50, 5);
    for (rate, visible) in [(0.0, 10), (0.2, 8), (0.25, 7), (0.8, 2), (0.95, 0)] {
        for obj in 0..5 {
            let known = visible_attributes(&u, obj, rate, MissingProtocol::FixedCount, obj as u64);
            assert_eq!(known.len(), visible, "rate {rate}");
            for o in &known {
                assert_eq!(u.cell(obj, o.attribute), o.value);
            }
        }
    }
}

#[test]
fn bernoulli_hides_about_s() {
    let u = universe(50, 6);
    let total: usize = (0..2000)
        .map(|s| visible_attributes(&u, s % 50, 0.3, MissingProtocol::Bernoulli, s as u64).len())
        .sum();
    let share = total as f64 / (2000.0 * 10.0);
    assert!((share - 0.7).abs() < 0.02, "{share}");
}

#[test]
fn invalid_configs_are_rejected() {
    let u = universe(50, 7);
    assert!(
        matches!(titf_vs_random(&u, &config(vec![1.0]), 0), Err(EfficiencyError::BadRate(r)) if r == 1.0)
    );
    assert!(matches!(
        titf_vs_random(&u, &config(vec![-0.1]), 0),
        Err(EfficiencyError::BadRate(_))
    ));
    let mut cfg = config(vec![0.5]);
    cfg.baseline_repetitions = 0;
    assert!(matches!(
        titf_vs_random(&u, &cfg, 0),
        Err(EfficiencyError::Zero("baseline_repetitions"))
    ));
    cfg.baseline_repetitions = 1;
    cfg.objects = 51;
    assert!(matches!(
        titf_vs_random(&u, &cfg, 0),
        Err(EfficiencyError::Sample(_))
    ));
}
