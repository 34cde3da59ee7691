use rlass0::calibration::QutSpec;
use rlass0::design::{draw_sparse_signed, gaussian_matrix, gaussian_vector, standardize_columns, SupportLayout};
use rlass0::estimators::{fit_medians, hard_threshold, noise_dictionaries, robust_lasso_zero, Pipeline, RlzConfig};
use rlass0::experiments::{run_experiment, EstimatorTag, Mechanism, SimulationSpec, Tuning};
use rlass0::lp::SolverOptions;
use rlass0::metrics::{oracle_s_threshold, psr_indicator};
use rlass0::missing::{generate_missingness, rlz_with_missing, IncompleteMatrix, MissingOptions, MissingnessSpec};
use rlass0::{DenseMatrix, RngStream};

#[test]
fn high_snr_sign_recovery_with_oracle_threshold() {
    let (n, p, s) = (50, 100, 3);
    let opts = SolverOptions::default();
    let mut hits = 0;
    for r in 0..50u64 {
        let mut rng = RngStream::with_path(31, &[r]).rng();
        let x: DenseMatrix = standardize_columns(&gaussian_matrix(n, p, &mut rng)).unwrap();
        let beta0: Vec<f64> = draw_sparse_signed(p, s, 10.0, SupportLayout::UniformRandom, &mut rng).unwrap();
        let eps: Vec<f64> = gaussian_vector(n, &mut rng);
        let y: Vec<f64> = x.mul_vec(&beta0).iter().zip(&eps).map(|(a, e)| a + 0.1 * e).collect();
        let dicts = noise_dictionaries::<f64>(n, 10, 1000 + r, false);
        let fit = fit_medians(&x, &y, 1.0, None, &dicts, Pipeline::Robust, &opts).unwrap();
        let tau = oracle_s_threshold(&fit.beta_med, s).unwrap();
        hits += usize::from(psr_indicator(&hard_threshold(&fit.beta_med, tau), &beta0).unwrap());
    }
    assert!(hits >= 48, "{hits}/50");
}

#[test]
fn complete_data_matches_plain_robust_fit() {
    let (n, p) = (20, 15);
    let x: DenseMatrix = gaussian_matrix(n, p, &mut RngStream::new(32).rng());
    let y: Vec<f64> = gaussian_vector(n, &mut RngStream::new(33).rng());
    let inc = IncompleteMatrix::from_mask(&x, |_, _| false);
    let cfg = RlzConfig {
        dictionaries: 5,
        master_seed: 34,
        ..RlzConfig::default()
    }
    .with_tau(0.1);
    let opts = SolverOptions::default();
    let missing = rlz_with_missing(&y, &inc, &cfg, None, &MissingOptions::default(), &opts).unwrap();
    // no incomplete rows, so no corruption columns at all
    assert!(missing.fit.corruption_rows.is_empty());
    let direct = robust_lasso_zero(
        &standardize_columns(&x).unwrap(),
        &y,
        &RlzConfig {
            corruption_cols: Some(Vec::new()),
            ..cfg
        },
        &opts,
    )
    .unwrap();
    assert_eq!(missing.fit.beta_med, direct.beta_med);
    assert_eq!(missing.fit.beta_hat, direct.beta_hat);
}

#[test]
fn null_response_with_missing_data_is_rarely_selected() {
    let (n, p) = (30, 60);
    let opts = SolverOptions::default();
    let x: DenseMatrix = standardize_columns(&gaussian_matrix(n, p, &mut RngStream::new(35).rng())).unwrap();
    let inc = generate_missingness(&x, &MissingnessSpec::new(5.0, 0.05).unwrap(), &RngStream::new(36));
    let cfg = RlzConfig {
        dictionaries: 5,
        master_seed: 37,
        ..RlzConfig::default()
    };
    let qut = QutSpec::new(0.05, 500, 1.0, 5, 37).unwrap();
    // calibrate once, then reuse the pivot quantile on fresh nulls
    let y0: Vec<f64> = gaussian_vector(n, &mut RngStream::new(38).rng());
    let first = rlz_with_missing(&y0, &inc, &cfg, Some(&qut), &MissingOptions::default(), &opts).unwrap();
    let q = first.qut.unwrap();
    let cfg = RlzConfig {
        tau: rlass0::estimators::Tau::Pivotal {
            pivot_quantile: q.pivot_quantile,
            pivot: q.pivot,
        },
        ..cfg
    };
    let trials = 300;
    let mut selected = 0;
    for j in 0..trials {
        let y: Vec<f64> = gaussian_vector::<f64, _>(n, &mut RngStream::with_path(39, &[j]).rng())
            .iter()
            .map(|e| 0.7 * e)
            .collect();
        let fit = rlz_with_missing(&y, &inc, &cfg, None, &MissingOptions::default(), &opts).unwrap();
        selected += usize::from(fit.fit.beta_hat.iter().any(|b| *b != 0.0));
    }
    let rate = selected as f64 / trials as f64;
    let band = 3.0 * (0.05f64 * 0.95 / trials as f64).sqrt();
    assert!((rate - 0.05).abs() <= band, "null selection rate {rate}");
}

#[test]
fn noiseless_tjp_regime_recovers_signs() {
    let spec = SimulationSpec {
        n: 60,
        p: 40,
        rho: 0.3,
        s: 3,
        sigma_noise: 0.0,
        beta_magnitude: Default::default(),
        beta_scale: 5.0,
        support_layout: Default::default(),
        corruptions: 0,
        corruption_magnitude: 1.0,
        mechanism: Mechanism::None,
        pi: 0.0,
        replications: 10,
        estimators: vec![EstimatorTag::Tjp],
        tuning: Tuning::OracleS,
        m: 5,
        lambda: 1.0,
        alpha: 0.05,
        n_mc: 500,
        imputation: Default::default(),
        restrict_corruption_rows: true,
        pivot: Default::default(),
        master_seed: 40,
    };
    let out = run_experiment(&spec, None, &SolverOptions::default()).unwrap();
    assert_eq!(out.metrics[0].psr, 1.0);
}
