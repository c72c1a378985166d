//! Monte-Carlo checks of the closed-form noise covariances and of filter consistency.

use cvtrack::sim::{
    check_measurement_noise, check_process_noise, estimate_covariance, run_consistency_experiment,
    sample_process_noise, simulate_trajectory, ConsistencyConfig, GaussianStream, SimConfig,
};
use cvtrack::{AxisSigmas, DVector, NoiseParams, Parameterization};

#[test]
fn process_noise_covariance_converges_unit_dt() {
    let noise = NoiseParams::default();
    let check = check_process_noise(Parameterization::Cxcywh, &noise, 1_000_000, 11).unwrap();
    assert!(
        check.relative_frobenius_error < 0.02,
        "relative error {}",
        check.relative_frobenius_error
    );
    assert!(
        check.max_structural_zero < 0.01,
        "{}",
        check.max_structural_zero
    );
    // the dt³/2 cross terms
    assert!((check.empirical[(0, 2)] - 0.5).abs() < 0.01);
    assert!((check.empirical[(1, 3)] - 0.5).abs() < 0.01);
}

#[test]
fn process_noise_covariance_converges_dt_two() {
    let noise = NoiseParams::new(
        2.0,
        AxisSigmas::new(1.0, 0.0, 0.0, 0.0),
        AxisSigmas::uniform(1.0),
    )
    .unwrap();
    let check = check_process_noise(Parameterization::Cxcywh, &noise, 1_000_000, 12).unwrap();
    assert!(check.relative_frobenius_error < 0.02);
    for (i, j) in [(0, 0), (0, 2), (2, 0), (2, 2)] {
        assert!((check.empirical[(i, j)] - 4.0).abs() < 0.08, "({i},{j})");
    }
}

#[test]
fn process_noise_covariance_converges_every_layout() {
    let noise = NoiseParams::new(
        0.7,
        AxisSigmas::new(1.5, 0.5, 2.0, 0.8),
        AxisSigmas::uniform(1.0),
    )
    .unwrap();
    for param in Parameterization::ALL {
        let check = check_process_noise(param, &noise, 400_000, 13).unwrap();
        assert!(
            check.relative_frobenius_error < 0.02,
            "{param}: {}",
            check.relative_frobenius_error
        );
        assert!(
            check.max_structural_zero < 0.02,
            "{param}: {}",
            check.max_structural_zero
        );
    }
}

#[test]
fn measurement_noise_covariance_converges() {
    let noise = NoiseParams::new(
        1.0,
        AxisSigmas::uniform(1.0),
        AxisSigmas::new(1.0, 2.0, 3.0, 4.0),
    )
    .unwrap();
    let check = check_measurement_noise(&noise, 1_000_000, 14).unwrap();
    assert!(check.relative_frobenius_error < 0.02);
    assert!(check.max_structural_zero < 0.05);
}

#[test]
fn estimate_covariance_agrees_with_accumulator_path() {
    let noise = NoiseParams::default();
    let mut rng = GaussianStream::new(3, 0);
    let samples: Vec<DVector<f64>> = (0..20_000)
        .map(|_| sample_process_noise(Parameterization::Cxcywh, &noise, &mut rng))
        .collect();
    let cov = estimate_covariance(&samples).unwrap();

    // two-pass textbook estimator as an independent route
    let n = samples.len() as f64;
    let mean = samples.iter().fold(DVector::zeros(6), |acc, s| acc + s) / n;
    let two_pass = samples
        .iter()
        .map(|s| (s - &mean) * (s - &mean).transpose())
        .fold(cvtrack::DMatrix::zeros(6, 6), |acc, m| acc + m)
        / (n - 1.0);
    assert!((cov - two_pass).amax() < 1e-10);
}

#[test]
fn simulated_measurement_noise_variance() {
    let noise = NoiseParams::new(
        1.0,
        AxisSigmas::uniform(0.0),
        AxisSigmas::new(2.0, 0.0, 0.0, 0.0),
    )
    .unwrap();
    let sim = simulate_trajectory(&SimConfig {
        noise,
        n_steps: 100_000,
        seed: 21,
        ..Default::default()
    })
    .unwrap();
    let residuals: Vec<f64> = sim
        .frames
        .iter()
        .map(|f| f.detections[0].1.bbox.cx - f.states[0][0])
        .collect();
    let n = residuals.len() as f64;
    let mean = residuals.iter().sum::<f64>() / n;
    let var = residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((3.9..=4.1).contains(&var), "variance {var}");
}

#[test]
fn simulation_is_seed_deterministic() {
    let cfg = SimConfig {
        n_targets: 4,
        n_steps: 30,
        seed: 99,
        drop_probability: 0.2,
        ..Default::default()
    };
    assert_eq!(
        simulate_trajectory(&cfg).unwrap(),
        simulate_trajectory(&cfg).unwrap()
    );
    let other = SimConfig {
        seed: 100,
        ..cfg.clone()
    };
    assert_ne!(
        simulate_trajectory(&cfg).unwrap(),
        simulate_trajectory(&other).unwrap()
    );
}

#[test]
fn matched_filter_is_consistent() {
    let report = run_consistency_experiment(&ConsistencyConfig::default()).unwrap();
    assert!(
        report.nees_in_band(),
        "NEES {} outside {:?}",
        report.mean_nees,
        report.nees_band
    );
    assert!(
        report.nis_in_band(),
        "NIS {} outside {:?}",
        report.mean_nis,
        report.nis_band
    );
}

#[test]
fn mismatched_process_noise_leaves_the_band() {
    let inflated = run_consistency_experiment(&ConsistencyConfig {
        filter_q_scale: 100.0,
        ..Default::default()
    })
    .unwrap();
    assert!(
        inflated.mean_nees < inflated.nees_band.0,
        "{}",
        inflated.mean_nees
    );
    assert!(inflated.mean_nees < 6.0);

    let deflated = run_consistency_experiment(&ConsistencyConfig {
        filter_q_scale: 0.01,
        ..Default::default()
    })
    .unwrap();
    assert!(
        deflated.mean_nees > deflated.nees_band.1,
        "{}",
        deflated.mean_nees
    );
}

#[test]
fn consistency_holds_for_other_layouts() {
    for param in [Parameterization::CxcywhV, Parameterization::RandomWalk] {
        let report = run_consistency_experiment(&ConsistencyConfig {
            param,
            runs: 300,
            steps: 30,
            seed: 4,
            ..Default::default()
        })
        .unwrap();
        assert!(
            report.nees_in_band(),
            "{param}: {} {:?}",
            report.mean_nees,
            report.nees_band
        );
        assert!(
            report.nis_in_band(),
            "{param}: {} {:?}",
            report.mean_nis,
            report.nis_band
        );
    }
}
