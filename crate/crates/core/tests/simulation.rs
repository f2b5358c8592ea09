mod common;

use hcmix::baseline::{payoff_discounted, simulate_spot, PayoffMode};
use hcmix::conditional::{conditional_coefficients, conditional_price, mixed_log_spot};
use hcmix::estimators::{price_barrier_mixed, price_european_mixed, price_european_standard, variance_report};
use hcmix::paths::{simulate_factor_paths, Increments};
use hcmix::variance::integrated_variance_moments;
use hcmix::{Contract, CorrelationMatrix, FactorPaths, ModelParams, PdeSettings, SimulationSettings, TimeGrid};

fn a11_zero_corr() -> CorrelationMatrix {
    CorrelationMatrix {
        rho_sv: -0.6,
        rho_sd: 0.48,
        rho_sf: -0.64,
        rho_vd: 0.0,
        rho_vf: 0.0,
        rho_df: 0.0,
    }
}

#[test]
fn results_are_bit_identical_across_thread_counts() {
    let model = common::base_european_model().validate().unwrap();
    let call = Contract::european_call(100.0, 1.5);
    let base = SimulationSettings::new(5000, 16, 11);
    let runs: Vec<_> = [1, 2, 8]
        .iter()
        .map(|&t| price_european_mixed(&model, &call, &base.with_threads(t)).unwrap())
        .collect();
    for r in &runs[1..] {
        assert_eq!(r.mean.to_bits(), runs[0].mean.to_bits());
        assert_eq!(r.stderr.to_bits(), runs[0].stderr.to_bits());
    }

    let barrier_model = common::base_barrier_model().validate().unwrap();
    let put = Contract::up_and_out_put(105.0, 110.0, 0.25);
    let small = SimulationSettings::new(1500, 8, 3);
    let a = price_barrier_mixed(&barrier_model, &put, &small.with_threads(1), &PdeSettings::new(20)).unwrap();
    let b = price_barrier_mixed(&barrier_model, &put, &small.with_threads(8), &PdeSettings::new(20)).unwrap();
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
}

#[test]
fn seeds_and_path_indices_give_distinct_streams() {
    let grid = TimeGrid::new(1.0, 4).unwrap();
    let a = Increments::sample(&grid, 1, 0);
    assert_eq!(a, Increments::sample(&grid, 1, 0));
    assert_ne!(a, Increments::sample(&grid, 1, 1));
    assert_ne!(a, Increments::sample(&grid, 2, 0));
}

#[test]
fn driving_increments_have_the_target_correlation() {
    let model = common::base_european_model().validate().unwrap();
    let a = *model.factors();
    let grid = TimeGrid::new(1.0, 1).unwrap();
    let corr = model.params().corr;
    let m = 200_000;
    // (s, f, d, v) increments built from the factor rows
    let mut sums = [[0.0f64; 4]; 4];
    for i in 0..m {
        let w = Increments::sample(&grid, 5, i);
        let z: Vec<f64> = (0..4).map(|j| w.dim(j)[0]).collect();
        let x = [
            a.a11 * z[0] + a.a12 * z[1] + a.a13 * z[2] + a.a14 * z[3],
            a.a22 * z[1] + a.a23 * z[2] + a.a24 * z[3],
            a.a33 * z[2] + a.a34 * z[3],
            z[3],
        ];
        for r in 0..4 {
            for c in 0..4 {
                sums[r][c] += x[r] * x[c];
            }
        }
    }
    let target = corr.to_matrix();
    // sampling error of a correlation estimate is at most 1/sqrt(m)
    let tol = 5.0 / (m as f64).sqrt();
    for r in 0..4 {
        for c in 0..4 {
            let est = sums[r][c] / m as f64;
            assert!((est - target[r][c]).abs() < tol, "({r}, {c}): {est} vs {}", target[r][c]);
        }
    }
}

#[test]
fn integrated_variance_moments_match_simulation() {
    let params = common::base_european_model();
    let model = params.validate().unwrap();
    let grid = TimeGrid::new(1.5, 400).unwrap();
    let m = 20_000;
    let (mut s1, mut s2) = (0.0, 0.0);
    for p in simulate_factor_paths(&model, &grid, 9, m) {
        let iv: f64 = p.v[..400].iter().sum::<f64>() * grid.dt();
        s1 += iv;
        s2 += iv * iv;
    }
    let mean = s1 / m as f64;
    let var = s2 / m as f64 - mean * mean;
    let (mu, sigma2) = integrated_variance_moments(params.v0, params.k, params.theta, params.xi, 1.5).unwrap();
    let se = (var / m as f64).sqrt();
    // Euler bias at 400 steps is far below the statistical error
    assert!((mean - mu).abs() < 3.0 * se, "{mean} vs {mu} (se {se})");
    // variance estimate has relative noise of about sqrt(2 / m)
    assert!((var / sigma2 - 1.0).abs() < 3.0 * (2.0 / m as f64).sqrt() + 0.01, "{var} vs {sigma2}");
}

#[test]
fn mixed_and_standard_spot_coincide_on_grid_nodes() {
    let model = common::base_european_model().validate().unwrap();
    let grid = TimeGrid::new(1.5, 50).unwrap();
    for p in simulate_factor_paths(&model, &grid, 21, 50) {
        let standard = simulate_spot(&p, model.factors(), model.spot());
        let mixed = mixed_log_spot(&p, model.factors(), model.spot());
        for (x, y) in standard.log_spot.iter().zip(&mixed) {
            let (sx, sy) = (x.exp(), y.exp());
            assert!(((sx - sy) / sx).abs() < 1e-12);
        }
    }
}

#[test]
fn mixed_equals_standard_when_a11_vanishes() {
    let model = common::base_european_model().with_corr(a11_zero_corr()).validate().unwrap();
    let a11 = model.factors().a11.abs();
    assert!(a11 < 1e-7);
    // the residual a11 from rounding feeds W~1 into the standard arm only
    let tol = (10.0 * a11 + 1e-12) * model.spot();
    let grid = TimeGrid::new(1.5, 12).unwrap();
    for strike in [80.0, 100.0, 125.0] {
        let call = Contract::european_call(strike, 1.5);
        for p in simulate_factor_paths(&model, &grid, 4, 200) {
            let spot = simulate_spot(&p, model.factors(), model.spot());
            let standard = payoff_discounted(&spot, &p, &call, PayoffMode::Terminal).unwrap();
            let cc = conditional_coefficients(&p, model.factors(), &grid);
            let mixed = conditional_price(&call, &cc, model.spot()).unwrap();
            assert!((standard - mixed).abs() < tol, "{standard} vs {mixed}");
        }
    }
}

#[test]
fn mixed_and_standard_agree_in_mean() {
    let model = common::base_european_model().validate().unwrap();
    let call = Contract::european_call(100.0, 1.5);
    let report = variance_report(&model, &call, &SimulationSettings::new(40_000, 8, 17), &PdeSettings::new(20)).unwrap();
    let diff = report.standard.mean - report.mixed.mean;
    let se = (report.standard.stderr.powi(2) + report.mixed.stderr.powi(2)).sqrt();
    assert!(diff.abs() < 4.0 * se);
}

#[test]
fn stderr_scales_with_inverse_square_root_of_paths() {
    let model = common::base_european_model().validate().unwrap();
    let call = Contract::european_call(100.0, 1.5);
    let small = price_european_standard(&model, &call, &SimulationSettings::new(10_000, 8, 2)).unwrap();
    let large = price_european_standard(&model, &call, &SimulationSettings::new(160_000, 8, 2)).unwrap();
    let ratio = small.stderr / large.stderr;
    assert!((ratio - 4.0).abs() < 0.4, "ratio {ratio}");
}

#[test]
fn deterministic_model_has_no_sampling_error() {
    let mut params = ModelParams::base_case(105.0).deterministic();
    params.corr = CorrelationMatrix::IDENTITY;
    let model = params.validate().unwrap();
    let grid = TimeGrid::new(1.0, 10).unwrap();
    let p0 = FactorPaths::simulate(&model, &grid, 1, 0);
    let p1 = FactorPaths::simulate(&model, &grid, 1, 1);
    assert_eq!(p0.v, p1.v);
    assert_eq!(p0.rd, p1.rd);
    assert_eq!(p0.rf, p1.rf);
}
