//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use hcmix::baseline::simulate_spot;
use hcmix::conditional::{conditional_price, mixed_log_spot, ConditionalCoefficients};
use hcmix::estimators::{
    barrier_bias_study, european_bias_study, price_barrier_mixed, price_european_mixed, variance_report,
    CoupledBias,
};
use hcmix::paths::simulate_factor_paths;
use hcmix::pde::{FdGrid, PdeCoefficients, PdeWorkspace};
use hcmix::rng::PathRng;
use hcmix::special::norm_cdf;
use hcmix::theory::{discounted_moment_horizon, discounted_scheme_horizon};
use hcmix::variance::{gamma_dev_partial_approx, gamma_dev_predicted, integrated_variance_moments, optimal_rho_df, owen_t};
use hcmix::{
    cholesky_coefficients, Contract, CorrelationMatrix, ModelParams, OptionType, PdeSettings, SimulationSettings,
    TimeGrid,
};

const THETA_EUROPEAN: f64 = 12.11968;
const THETA_BARRIER: f64 = 5.7631;

struct Outcome {
    pass: bool,
    detail: String,
}

fn threads() -> usize {
    std::env::var("HCMIX_THREADS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target.abs()
}

fn european() -> (hcmix::ValidatedModel, Contract) {
    (common::base_european_model().validate().unwrap(), Contract::european_call(100.0, 1.5))
}

fn criterion_1() -> Outcome {
    let (model, call) = european();
    let r = price_european_mixed(&model, &call, &SimulationSettings::new(2_000_000, 200, 1).with_threads(threads()))
        .unwrap();
    let pass = (r.mean - THETA_EUROPEAN).abs() <= 3.0 * r.stderr && r.stderr <= 2e-3;
    Outcome {
        pass,
        detail: format!(
            "mean {:.5} stderr {:.5} (target {THETA_EUROPEAN} within 3 stderr, stderr <= 2e-3), {:.1} s on {} thread(s)",
            r.mean,
            r.stderr,
            r.seconds,
            threads()
        ),
    }
}

/// Coupled European bias study shared by criteria 2 and 3.
fn european_bias() -> Vec<CoupledBias> {
    let (model, call) = european();
    european_bias_study(&model, &call, &[2, 4, 8, 16, 32], 256, 3_000_000, 2, threads()).unwrap()
}

fn bias_at(study: &[CoupledBias], n: usize) -> CoupledBias {
    *study.iter().find(|b| b.n == n).unwrap()
}

fn criterion_2(bias: &[CoupledBias]) -> Outcome {
    let (model, call) = european();
    let rows = [
        (2usize, 4000usize, 0.24126, 0.04194, 0.08039),
        (8, 64000, 0.06071, 0.00994, 0.00444),
        (32, 1_024_000, 0.01507, 0.00262, 0.00073),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (n, m, std_ref, mix_ref, bias_ref) in rows {
        let settings = SimulationSettings::new(m, n, 3).with_threads(threads());
        let rep = variance_report(&model, &call, &settings, &PdeSettings::new(20)).unwrap();
        let b = bias_at(bias, n);
        let ok_std = within(rep.standard.stderr, std_ref, 0.3);
        let ok_mix = within(rep.mixed.stderr, mix_ref, 0.3);
        let ok_bias = within(b.bias, bias_ref, 0.5);
        pass &= ok_std && ok_mix && ok_bias;
        parts.push(format!(
            "N={n}: std {:.5}{} mix {:.5}{} bias {:.5}+-{:.5}{}",
            rep.standard.stderr,
            flag(ok_std),
            rep.mixed.stderr,
            flag(ok_mix),
            b.bias,
            b.stderr,
            flag(ok_bias)
        ));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn flag(ok: bool) -> &'static str {
    if ok {
        ""
    } else {
        " [out]"
    }
}

/// Least-squares slope of `-ln(bias)` on `ln N`, weighted by inverse variance of `ln(bias)`.
fn decay_slope(study: &[CoupledBias]) -> Option<f64> {
    if study.iter().any(|b| b.bias <= 0.0) {
        return None;
    }
    let x: Vec<f64> = study.iter().map(|b| b.n as f64).collect();
    let y: Vec<f64> = study.iter().map(|b| b.bias).collect();
    let w: Vec<f64> = study.iter().map(|b| (b.bias / b.stderr).powi(2)).collect();
    Some(-common::log_log_slope(&x, &y, Some(&w)))
}

fn criterion_3(bias: &[CoupledBias]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [4, 8, 16] {
        let ratio = bias_at(bias, n).bias / bias_at(bias, 2 * n).bias;
        let ok = (1.5..=4.0).contains(&ratio);
        pass &= ok;
        parts.push(format!("bias({n})/bias({}) {ratio:.3}{}", 2 * n, flag(ok)));
    }

    let model = common::base_barrier_model().validate().unwrap();
    let put = Contract::up_and_out_put(105.0, 110.0, 0.25);
    let (discrete, bridge) = barrier_bias_study(&model, &put, &[4, 8, 16, 32, 64], 512, 1_500_000, 4, threads()).unwrap();
    let slope_d = decay_slope(&discrete);
    let slope_b = decay_slope(&bridge);
    let ok_d = slope_d.is_some_and(|s| (s - 0.5).abs() <= 0.25);
    let ok_b = slope_b.is_some_and(|s| (s - 1.0).abs() <= 0.25);
    let b8 = bias_at(&bridge, 8);
    let ok_8 = within(b8.bias, 0.0075, 0.5);
    pass &= ok_d && ok_b && ok_8;
    let fmt = |s: Option<f64>| s.map_or("undefined (non-positive bias)".to_string(), |v| format!("{v:.3}"));
    parts.push(format!("discrete slope {}{}", fmt(slope_d), flag(ok_d)));
    parts.push(format!("bridge slope {}{}", fmt(slope_b), flag(ok_b)));
    parts.push(format!("bridge bias(8) {:.5}+-{:.5}{}", b8.bias, b8.stderr, flag(ok_8)));
    let list = |s: &[CoupledBias]| s.iter().map(|b| format!("{:.5}", b.bias)).collect::<Vec<_>>().join(",");
    parts.push(format!("discrete [{}] bridge [{}]", list(&discrete), list(&bridge)));
    Outcome { pass, detail: parts.join("; ") }
}

fn criterion_4() -> Outcome {
    let model = common::base_barrier_model().validate().unwrap();
    let put = Contract::up_and_out_put(105.0, 110.0, 0.25);
    let settings = SimulationSettings::new(1_000_000, 100, 5).with_threads(threads());
    let r = price_barrier_mixed(&model, &put, &settings, &PdeSettings::new(20)).unwrap();
    Outcome {
        pass: (r.mean - THETA_BARRIER).abs() <= 0.02,
        detail: format!(
            "mean {:.5} stderr {:.5} (target {THETA_BARRIER} +- 0.02), {:.1} s on {} thread(s)",
            r.mean,
            r.stderr,
            r.seconds,
            threads()
        ),
    }
}

fn criterion_5() -> Outcome {
    let (r, q, sigma) = (0.0524, 0.0291, 0.0275f64.sqrt());
    let (s0, k, b, t) = (100.0, 105.0, 110.0, 0.25);
    let exact = common::up_and_out_put(s0, k, b, r, q, sigma, t);
    let coeffs = vec![PdeCoefficients::constant(r, q, sigma); 2000];
    let err = |l: usize, shift: bool| {
        let g = FdGrid::new(s0, k, b, l, shift).unwrap();
        (PdeWorkspace::new(g).solve(&coeffs, k, t, s0, false).unwrap() - exact).abs()
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for l in [20, 40, 80] {
        let ratio = err(l, true) / err(2 * l, true);
        let ok = (3.0..=5.0).contains(&ratio);
        pass &= ok;
        parts.push(format!("e({l})/e({}) {ratio:.2}{}", 2 * l, flag(ok)));
    }
    for l in [20, 40, 80, 160] {
        let (shifted, on_node) = (err(l, true), err(l, false));
        let ok = shifted <= on_node;
        pass &= ok;
        parts.push(format!("L={l} shifted {shifted:.2e} on-node {on_node:.2e}{}", flag(ok)));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn criterion_6() -> Outcome {
    let (_, call) = european();
    let settings = SimulationSettings::new(64000, 8, 6).with_threads(threads());
    let pde = PdeSettings::new(20);
    let report = |corr: CorrelationMatrix| {
        let model = common::base_european_model().with_corr(corr).validate().unwrap();
        variance_report(&model, &call, &settings, &pde).unwrap()
    };
    let base = report(CorrelationMatrix::base_case());
    let low = report(CorrelationMatrix { rho_sv: -0.05, rho_sd: 0.0, rho_sf: 0.0, ..CorrelationMatrix::base_case() });
    let zero = report(CorrelationMatrix {
        rho_sv: -0.6,
        rho_sd: 0.48,
        rho_sf: -0.64,
        rho_vd: 0.0,
        rho_vf: 0.0,
        rho_df: 0.0,
    });
    let ok_base = (4.5..=8.0).contains(&base.gamma_dev);
    let ok_low = (13.0..=30.0).contains(&low.gamma_dev);
    let ok_zero = (0.8..=1.25).contains(&zero.gamma_var);
    Outcome {
        pass: ok_base && ok_low && ok_zero,
        detail: format!(
            "base Gamma_dev {:.3}{}; rho_sv=-0.05 rho_sd=rho_sf=0 Gamma_dev {:.3}{}; a11=0 Gamma_var {:.4}{}",
            base.gamma_dev,
            flag(ok_base),
            low.gamma_dev,
            flag(ok_low),
            zero.gamma_var,
            flag(ok_zero)
        ),
    }
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

fn criterion_7() -> Outcome {
    let predicted = gamma_dev_predicted(0.7893).unwrap().to_f64();
    let ok_pred = round3(predicted) == 1.629;
    let mut pass = ok_pred;
    let mut parts = vec![format!("gamma_dev_predicted(0.7893) {predicted:.4}{}", flag(ok_pred))];
    let (_, call) = european();
    let settings = SimulationSettings::new(64000, 8, 7).with_threads(threads());
    for rho_sd in [-0.15, -0.10, -0.05, 0.0, 0.05, 0.10, 0.15] {
        let rho_sf = -0.20;
        let (rho_df, clamped) = optimal_rho_df(rho_sd, rho_sf, (-0.85, 0.85)).unwrap();
        let corr = CorrelationMatrix { rho_sv: -0.10, rho_sd, rho_sf, rho_vd: 0.0, rho_vf: 0.0, rho_df };
        let mu = gamma_dev_partial_approx(&corr).unwrap();
        let model = common::base_european_model().with_corr(corr).validate().unwrap();
        let measured = variance_report(&model, &call, &settings, &PdeSettings::new(20)).unwrap().gamma_dev;
        let ok_mu = !clamped && round3(mu) == 4.472;
        let ok_meas = measured >= 0.85 * mu;
        pass &= ok_mu && ok_meas;
        parts.push(format!(
            "rho_sd={rho_sd:+.2} rho_df*={rho_df:+.2} mu {mu:.4}{} measured {measured:.3}{}",
            flag(ok_mu),
            flag(ok_meas)
        ));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn criterion_8() -> Outcome {
    let mut failures = Vec::new();
    let mut rng = PathRng::new(8, 0);

    // factorisation on random valid correlation matrices
    let mut checked = 0;
    let mut worst = 0.0f64;
    while checked < 1000 {
        let rows: [[f64; 4]; 4] = std::array::from_fn(|_| std::array::from_fn(|_| rng.normal()));
        let Some(corr) = common::correlation_from_vectors(rows) else { continue };
        if corr.validate().is_err() {
            continue;
        }
        worst = worst.max(cholesky_coefficients(&corr).unwrap().max_residual(&corr));
        checked += 1;
    }
    if worst >= 1e-12 {
        failures.push(format!("AA^T residual {worst:.1e}"));
    }

    // parity and binary decomposition
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let s = 20.0 + 180.0 * rng.uniform();
        let k = 20.0 + 180.0 * rng.uniform();
        let cc = ConditionalCoefficients {
            r: 0.1 * rng.uniform(),
            q: 0.1 * rng.uniform(),
            sigma: 0.01 + 0.6 * rng.uniform(),
            maturity: 0.1 + 3.0 * rng.uniform(),
        };
        let t = cc.maturity;
        let price = |c: Contract| conditional_price(&c, &cc, s).unwrap();
        let call = price(Contract::European { option: OptionType::Call, strike: k, maturity: t });
        let put = price(Contract::European { option: OptionType::Put, strike: k, maturity: t });
        let cash = price(Contract::CashOrNothing { option: OptionType::Call, strike: k, maturity: t });
        let asset = price(Contract::AssetOrNothing { option: OptionType::Call, strike: k, maturity: t });
        let parity = call - put - (s * (-cc.q * t).exp() - k * (-cc.r * t).exp());
        let split = call - (asset - k * cash);
        worst = worst.max(parity.abs().max(split.abs()) / s.max(k));
    }
    if worst >= 1e-12 {
        failures.push(format!("parity/binary residual {worst:.1e}"));
    }

    // Owen's T identities and a trapezoid oracle
    let mut worst_id = 0.0f64;
    let mut worst_quad = 0.0f64;
    for i in 0..=40 {
        let beta = -5.0 + 0.25 * i as f64;
        let p = norm_cdf(beta);
        worst_id = worst_id.max((owen_t(beta, 1.0) - 0.5 * p * (1.0 - p)).abs());
        let th = 0.075 * i as f64;
        worst_id = worst_id.max((owen_t(0.0, th) - th.atan() / (2.0 * PI)).abs());
        let panels = 200_000;
        let f = |x: f64| (-0.5 * beta * beta * (1.0 + x * x)).exp() / (1.0 + x * x);
        let h = th / panels as f64;
        let inner: f64 = (1..panels).map(|j| f(j as f64 * h)).sum();
        let trap = (0.5 * (f(0.0) + f(th)) + inner) * h / (2.0 * PI);
        worst_quad = worst_quad.max((owen_t(beta, th) - trap).abs());
    }
    if worst_id >= 1e-10 || worst_quad >= 1e-9 {
        failures.push(format!("Owen T identity {worst_id:.1e} quadrature {worst_quad:.1e}"));
    }

    // integrated CIR mean against simulation
    let params = common::base_european_model();
    let model = params.validate().unwrap();
    let grid = TimeGrid::new(1.5, 400).unwrap();
    let m = 20_000;
    let (mut s1, mut s2) = (0.0, 0.0);
    for p in simulate_factor_paths(&model, &grid, 81, m) {
        let iv = p.v[..400].iter().sum::<f64>() * grid.dt();
        s1 += iv;
        s2 += iv * iv;
    }
    let mean = s1 / m as f64;
    let se = ((s2 / m as f64 - mean * mean) / m as f64).sqrt();
    let (mu, _) = integrated_variance_moments(params.v0, params.k, params.theta, params.xi, 1.5).unwrap();
    if (mean - mu).abs() > 3.0 * se {
        failures.push(format!("integrated CIR mean {mean:.6} vs {mu:.6} (se {se:.1e})"));
    }

    // standard and mixed spot agree on grid nodes
    let grid = TimeGrid::new(1.5, 64).unwrap();
    let mut worst = 0.0f64;
    for p in simulate_factor_paths(&model, &grid, 82, 200) {
        let a = simulate_spot(&p, model.factors(), model.spot()).log_spot;
        let b = mixed_log_spot(&p, model.factors(), model.spot());
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max(((x.exp() - y.exp()) / x.exp()).abs());
        }
    }
    if worst >= 1e-12 {
        failures.push(format!("grid-node coincidence {worst:.1e}"));
    }

    // horizon ordering
    let mut violations = 0;
    for _ in 0..1000 {
        let mut p = ModelParams::base_case(100.0);
        p.k = 0.05 + 5.0 * rng.uniform();
        p.xi = 0.01 + 2.0 * rng.uniform();
        p.corr = CorrelationMatrix { rho_sv: -0.95 + 1.9 * rng.uniform(), ..CorrelationMatrix::IDENTITY };
        let alpha = 1.0 + 3.0 * rng.uniform();
        let model = p.validate().unwrap();
        let exact = discounted_moment_horizon(alpha, &model).unwrap().to_f64();
        let scheme = discounted_scheme_horizon(alpha, &model).unwrap().to_f64();
        if exact < scheme * (1.0 - 1e-9) {
            violations += 1;
        }
    }
    if violations > 0 {
        failures.push(format!("{violations} horizon ordering violations"));
    }

    // determinism across thread counts
    let (model, call) = european();
    let bits: Vec<u64> = [1, 2, 8]
        .iter()
        .map(|&t| {
            price_european_mixed(&model, &call, &SimulationSettings::new(20_000, 16, 9).with_threads(t))
                .unwrap()
                .mean
                .to_bits()
        })
        .collect();
    if bits.iter().any(|&b| b != bits[0]) {
        failures.push("thread counts disagree".into());
    }

    Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            "factorisation, parity, Owen's T, CIR moments, node coincidence, horizon ordering, thread determinism".into()
        } else {
            failures.join("; ")
        },
    }
}

fn main() {
    // `cargo test -- --list` and similar harness probes should not start the run
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let start = Instant::now();
    let mut all = true;
    let mut emit = |id: u32, outcome: Outcome| {
        all &= outcome.pass;
        println!("criterion {id}: {} {}", if outcome.pass { "PASS" } else { "FAIL" }, outcome.detail);
    };
    emit(1, criterion_1());
    let bias = european_bias();
    emit(2, criterion_2(&bias));
    emit(3, criterion_3(&bias));
    emit(4, criterion_4());
    emit(5, criterion_5());
    emit(6, criterion_6());
    emit(7, criterion_7());
    emit(8, criterion_8());
    println!("acceptance finished in {:.1} s", start.elapsed().as_secs_f64());
    if !all {
        std::process::exit(1);
    }
}
