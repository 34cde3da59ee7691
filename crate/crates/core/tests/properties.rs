use rlass0::analysis::{check_stable_nsp, extreme_eigenvalues, power_iteration_extremes, AnalysisBudget, DEFAULT_NSP_RHO};
use rlass0::calibration::{pivot_statistic, PivotRule};
use rlass0::design::{draw_sparse_signed, gaussian_matrix, gaussian_vector, standardize_columns, toeplitz_sigma, SupportLayout};
use rlass0::estimators::{fit_medians, hard_threshold, noise_dictionaries, Pipeline};
use rlass0::lp::{enumerate_vertex_optima, formulate_jp, solve_jp, SolverOptions};
use rlass0::missing::{generate_missingness, logistic_missing_prob, mean_impute, solve_b_for_pi, MissingnessSpec};
use rlass0::{DenseMatrix, RngStream};

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

#[test]
fn missingness_offset_matches_monte_carlo() {
    let draws = 10_000_000;
    for (k, (a, pi)) in [(0.0, 0.05), (0.0, 0.2), (5.0, 0.05), (5.0, 0.2), (2.0, 0.5)].into_iter().enumerate() {
        let b = solve_b_for_pi(a, pi).unwrap();
        let mut rng = RngStream::with_path(11, &[k as u64]).rng();
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..draws / 100_000 {
            for x in gaussian_vector::<f64, _>(100_000, &mut rng) {
                let q = logistic_missing_prob(x, a, b);
                sum += q;
                sq += q * q;
            }
        }
        let mean = sum / draws as f64;
        let se = ((sq / draws as f64 - mean * mean) / draws as f64).sqrt();
        assert!((mean - pi).abs() <= 3.0 * se.max(1e-12), "a={a} pi={pi}: MC {mean} vs target, se {se}");
    }
}

#[test]
fn toeplitz_extremes_agree_with_power_iteration() {
    let sigma = toeplitz_sigma::<f64>(200, 0.75).unwrap();
    let (lo, hi) = extreme_eigenvalues(&sigma).unwrap();
    let (plo, phi) = power_iteration_extremes(&sigma, 1e-15, 2_000_000).unwrap();
    let (k, pk) = (hi / lo, phi / plo);
    assert!(((k - pk) / k).abs() < 1e-6, "kappa {k} vs {pk}");
    // spectrum of the symbol (1−ρ²)/(1−2ρcos ω+ρ²)
    assert!(lo > 0.25 / 1.75 && hi < 1.75 / 0.25);
}

#[test]
fn toeplitz_stays_positive_definite() {
    for rho in [0.0, 0.5, 0.9, 0.95] {
        let (lo, _) = extreme_eigenvalues(&toeplitz_sigma::<f64>(500, rho).unwrap()).unwrap();
        assert!(lo > 0.0, "rho {rho}");
    }
}

#[test]
fn nsp_gives_the_stability_bound() {
    let (n, p, lambda) = (8, 4, 1.0);
    let (s0, t0) = (vec![0usize], vec![3usize]);
    let opts = SolverOptions::default();
    let x = (0..50u64)
        .map(|seed| gaussian_matrix::<f64, _>(n, p, &mut RngStream::with_path(12, &[seed]).rng()))
        .find(|x| {
            check_stable_nsp(x, &s0, &t0, lambda, DEFAULT_NSP_RHO, &AnalysisBudget::default(), &opts)
                .unwrap()
                .holds
        })
        .expect("some small design satisfies the property");
    let sq = (n as f64).sqrt();
    for t in 0..50u64 {
        let mut rng = RngStream::with_path(13, &[t]).rng();
        // dominant entries on S0 and T0, small dense tails elsewhere
        let mut beta: Vec<f64> = gaussian_vector::<f64, _>(p, &mut rng).iter().map(|v| 0.05 * v).collect();
        let mut omega: Vec<f64> = gaussian_vector::<f64, _>(n, &mut rng).iter().map(|v| 0.05 * v).collect();
        beta[0] = 3.0;
        omega[3] = -2.0;
        let y: Vec<f64> = x.mul_vec(&beta).iter().zip(&omega).map(|(a, w)| a + sq * w).collect();
        let sol = solve_jp(&x, &y, lambda, None, &opts).unwrap();
        let err_b: Vec<f64> = sol.beta.iter().zip(&beta).map(|(a, b)| a - b).collect();
        let err_w: Vec<f64> = sol.omega_full(n).iter().zip(&omega).map(|(a, b)| a - b).collect();
        let lhs = l1(&err_b) + lambda * l1(&err_w);
        let tail = l1(&beta[1..]) + lambda * (l1(&omega) - omega[3].abs());
        assert!(lhs <= 4.0 * tail + 1e-9, "trial {t}: {lhs} > 4 x {tail}");
    }
}

#[test]
fn imputation_error_vanishes_on_complete_rows() {
    let (n, p) = (60, 10);
    let x: DenseMatrix = standardize_columns(&gaussian_matrix(n, p, &mut RngStream::new(14).rng())).unwrap();
    let inc = generate_missingness(&x, &MissingnessSpec::new(5.0, 0.2).unwrap(), &RngStream::new(15));
    let xt = mean_impute(&inc).unwrap();
    let mut rng = RngStream::new(16).rng();
    let beta: Vec<f64> = draw_sparse_signed(p, 3, 1.0, SupportLayout::UniformRandom, &mut rng).unwrap();
    let support: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
    let sq = (n as f64).sqrt();
    let (a, b) = (x.mul_vec(&beta), xt.mul_vec(&beta));
    let mut nonzero_rows = 0;
    for i in 0..n {
        let omega = (a[i] - b[i]) / sq;
        if support.iter().all(|&j| !inc.is_missing(i, j)) {
            assert_eq!(omega, 0.0, "row {i}");
        } else {
            nonzero_rows += usize::from(omega != 0.0);
        }
    }
    assert!(nonzero_rows > 0);
}

#[test]
fn restricted_optimum_agrees_with_full_model() {
    // an optimum of the full model that only uses corruption rows in M is
    // optimal, and unique, for the model restricted to M
    let opts = SolverOptions::default();
    let mut checked = 0;
    for t in 0..60u64 {
        let mut rng = RngStream::with_path(17, &[t]).rng();
        let (n, p) = (3 + (t as usize % 3), 2 + (t as usize % 4));
        let x: DenseMatrix = gaussian_matrix(n, p, &mut rng);
        let rows: Vec<usize> = (0..n).filter(|i| i % 2 == 0).collect();
        let beta: Vec<f64> = draw_sparse_signed(p, 1, 1.0, SupportLayout::UniformRandom, &mut rng).unwrap();
        let noise: Vec<f64> = gaussian_vector(n, &mut rng);
        let sq = (n as f64).sqrt();
        let y: Vec<f64> = x
            .mul_vec(&beta)
            .iter()
            .zip(&noise)
            .enumerate()
            .map(|(i, (a, e))| a + if rows.contains(&i) { sq * e } else { 0.0 })
            .collect();
        let full = formulate_jp(&x, &y, 1.0, None).unwrap();
        let optima = enumerate_vertex_optima(&full, 1e-9, u128::MAX).unwrap();
        if !optima.is_unique() {
            continue;
        }
        let sol = solve_jp(&x, &y, 1.0, None, &opts).unwrap();
        let omega = sol.omega_full(n);
        if (0..n).any(|i| !rows.contains(&i) && omega[i].abs() > 1e-9) {
            continue;
        }
        checked += 1;
        let restricted = formulate_jp(&x, &y, 1.0, Some(&rows)).unwrap();
        let r = enumerate_vertex_optima(&restricted, 1e-9, u128::MAX).unwrap();
        assert!(r.is_unique(), "instance {t}");
        let rsol = solve_jp(&x, &y, 1.0, Some(&rows), &opts).unwrap();
        assert!((rsol.objective - sol.objective).abs() < 1e-9 * (1.0 + sol.objective));
        let romega = rsol.omega_full(n);
        for i in 0..n {
            assert!((romega[i] - omega[i]).abs() < 1e-8);
        }
        for j in 0..p {
            assert!((rsol.beta[j] - sol.beta[j]).abs() < 1e-8);
        }
    }
    assert!(checked >= 10, "only {checked} instances exercised");
}

#[test]
fn null_fit_vanishes_above_the_largest_median() {
    let (n, p) = (20, 30);
    let opts = SolverOptions::default();
    let x: DenseMatrix = standardize_columns(&gaussian_matrix(n, p, &mut RngStream::new(18).rng())).unwrap();
    let dicts = noise_dictionaries::<f64>(n, 5, 19, false);
    for t in 0..5u64 {
        let y: Vec<f64> = gaussian_vector(n, &mut RngStream::with_path(20, &[t]).rng());
        let fit = fit_medians(&x, &y, 1.0, None, &dicts, Pipeline::Robust, &opts).unwrap();
        let top = fit.beta_med.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(hard_threshold(&fit.beta_med, top + 1e-12).iter().all(|v| *v == 0.0));
        assert!(hard_threshold(&fit.omega_med.unwrap(), f64::MAX).iter().all(|v| *v == 0.0));
    }
}

#[test]
fn pivot_statistic_is_scale_free() {
    let (n, p) = (15, 25);
    let opts = SolverOptions::default();
    let x: DenseMatrix = standardize_columns(&gaussian_matrix(n, p, &mut RngStream::new(21).rng())).unwrap();
    let dicts = noise_dictionaries::<f64>(n, 5, 22, false);
    for t in 0..5u64 {
        let eps: Vec<f64> = gaussian_vector(n, &mut RngStream::with_path(23, &[t]).rng());
        let base = fit_medians(&x, &eps, 1.0, None, &dicts, Pipeline::Robust, &opts).unwrap();
        let t0 = pivot_statistic(&base, PivotRule::default()).unwrap();
        for c in [0.01, 3.0, 250.0] {
            let scaled: Vec<f64> = eps.iter().map(|e| c * e).collect();
            let fit = fit_medians(&x, &scaled, 1.0, None, &dicts, Pipeline::Robust, &opts).unwrap();
            let tc = pivot_statistic(&fit, PivotRule::default()).unwrap();
            assert!(((tc - t0) / t0).abs() < 1e-8, "c={c}: {tc} vs {t0}");
        }
    }
}
