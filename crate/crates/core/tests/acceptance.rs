//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

mod common;

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::BruteForce;
use num_complex::Complex64;
use qudit_unruh::cli::{default_engine, oracle_suites_with, random_qutrit_states, RunConfig, ORACLE_THRESHOLD};
use qudit_unruh::diagnostics::{edr_from_table, transition_probability_from_table, EdrRatio};
use qudit_unruh::perturbation::{assemble_final_state, correction_from_table, ququint_oracle_middle};
use qudit_unruh::qudit_algebra::{
    build_hw_model, build_su2_model, hermiticity_deviation, x_o_split, DensityMatrix, DetectorModel,
};
use qudit_unruh::response_integrals::{
    build_table, full_plane_transform, half_plane_transform, integral_i, integral_l, integral_q, IntegralParams,
    RegulatorScheme, Sign,
};
use qudit_unruh::wightman::{kms_fourier_ratio, regular_part, WorldlineParams};
use qudit_unruh::CMatrix;
use rayon::prelude::*;

struct Outcome {
    passed: bool,
    detail: String,
}

fn params(a: f64, t: f64, regulator: RegulatorScheme) -> IntegralParams {
    IntegralParams::new(WorldlineParams::with_default_epsilon(a, t).unwrap(), regulator).unwrap()
}

fn tanh_params(a: f64, t: f64) -> IntegralParams {
    params(a, t, RegulatorScheme::TanhHeaviside(t / 200.0))
}

fn rel(x: Complex64, y: Complex64) -> f64 {
    (x - y).norm() / y.norm()
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// `(1/4π)(e^{−x²/2} ± √(π/2)·x·erfc(∓x/√2))` at `x = ΩT`, evaluated at 40
/// digits (the `−` branch cancels catastrophically in double precision).
fn l_vacuum_reference(x: f64, sign: Sign) -> f64 {
    const TABLE: [(f64, f64, f64); 5] = [
        (2.0, 0.400635930533516891672364, 0.001693650132084213732417907),
        (4.0, 0.7978859860757118966212965, 0.000001425272846540741404422926),
        (8.0, 1.595769121605730726820379, 1.506059452125578786920749e-17),
        (16.0, 3.191538243211461423519568, 7.903782036434631942501434e-60),
        (32.0, 6.383076486422922847039137, 3.39193420105410863544691e-227),
    ];
    let row = TABLE.iter().find(|r| r.0 == x).expect("grid point");
    match sign {
        Sign::Plus => row.1,
        Sign::Minus => row.2,
    }
}

fn closed_forms() -> Outcome {
    let mut worst_l: f64 = 0.0;
    let mut worst_q: f64 = 0.0;
    for omega in [0.5, 1.0, 2.0] {
        for t in [4.0, 8.0, 16.0] {
            let x = omega * t;
            let p = tanh_params(1.0, t);
            for sign in [Sign::Plus, Sign::Minus] {
                let expected = l_vacuum_reference(x, sign);
                let vac = integral_l(&p, sign, omega).unwrap().vacuum.unwrap();
                worst_l = worst_l.max(rel(vac, Complex64::new(expected, 0.0)));
            }
            for a0 in [t / 100.0, t / 500.0] {
                let damp = (-x * x / 2.0).exp();
                let method1 = Complex64::new(damp / (8.0 * PI), -t.powi(3) * damp / (8.0 * PI * a0 * (a0 * a0 + t * t)));
                let method2 = Complex64::new(damp / (8.0 * PI), -t * damp / (8.0 * (2.0 * PI).sqrt() * a0));
                let q1 = integral_q(&params(1.0, t, RegulatorScheme::NascentDelta(a0)), omega).unwrap().vacuum.unwrap();
                let q2 = integral_q(&params(1.0, t, RegulatorScheme::TanhHeaviside(a0)), omega).unwrap().vacuum.unwrap();
                worst_q = worst_q.max(rel(q1, method1)).max(rel(q2, method2));
            }
        }
    }
    Outcome {
        passed: worst_l <= 1e-12 && worst_q <= 1e-12,
        detail: format!("L vacuum rel {worst_l:.2e}, Q vacuum rel {worst_q:.2e} (tol 1e-12)"),
    }
}

fn brute_force() -> Outcome {
    let mut points = Vec::new();
    for a in [0.5, 1.0, 2.0] {
        for t in [2.0, 4.0, 8.0] {
            for omega in [0.5, 1.0, 2.0] {
                points.push((a, t, omega));
            }
        }
    }
    let deviations: Vec<f64> = points
        .par_iter()
        .map(|&(a, t, omega)| {
            let wl = WorldlineParams::new(a, 1e-3, t).unwrap();
            let a0 = t / 200.0;
            let p = IntegralParams::new(wl, RegulatorScheme::TanhHeaviside(a0)).unwrap().finite_epsilon();
            let brute = BruteForce::new(&wl, a0);
            let pairs = [(omega, -omega), (-omega, omega), (omega, omega)];
            let reference: Vec<(Complex64, Complex64)> = pairs.iter().map(|&(w1, w2)| brute.pair(w1, w2)).collect();
            // entries of one family are compared on the scale of its largest member
            let scale = reference.iter().fold(0.0f64, |m, (g, gt)| m.max(g.norm()).max(gt.norm()));
            let mut dev: f64 = 0.0;
            for (&(w1, w2), (g_ref, gt_ref)) in pairs.iter().zip(&reference) {
                let g = full_plane_transform(w1, w2, &p).unwrap().value;
                let gt = half_plane_transform(w1, w2, Sign::Plus, &p).unwrap().value;
                dev = dev.max((g - g_ref).norm() / scale).max((gt - gt_ref).norm() / scale);
            }
            dev
        })
        .collect();
    let worst = deviations.iter().cloned().fold(0.0, f64::max);
    Outcome {
        passed: worst <= 1e-6,
        detail: format!("{} points, worst rel deviation {worst:.2e} (tol 1e-6)", points.len()),
    }
}

fn detailed_balance() -> Outcome {
    let a = 1.0;
    let mut worst: f64 = 0.0;
    for at in [50.0, 100.0] {
        for omega_over_a in [0.2, 0.25, 0.5, 1.0] {
            let (t, omega) = (at / a, omega_over_a * a);
            let p = tanh_params(a, t);
            let lp = integral_l(&p, Sign::Plus, omega).unwrap().value.re;
            let lm = integral_l(&p, Sign::Minus, omega).unwrap().value.re;
            let target = (-2.0 * PI * omega / a).exp();
            worst = worst.max((lm / lp / target - 1.0).abs());
        }
    }
    Outcome { passed: worst <= 0.01, detail: format!("worst rel residual {worst:.3e} (tol 1e-2)") }
}

fn kms() -> Outcome {
    let wl = WorldlineParams::with_default_epsilon(1.0, 50.0).unwrap();
    let mut worst_core: f64 = 0.0;
    for w in [0.25, 0.5, 1.0] {
        let k = kms_fourier_ratio(w, &wl, 50.0).unwrap();
        worst_core = worst_core.max((k.ratio / (-2.0 * PI * w).exp() - 1.0).abs());
    }
    let k = kms_fourier_ratio(2.0, &wl, 50.0).unwrap();
    let high = (k.ratio / (-4.0 * PI).exp() - 1.0).abs();
    Outcome {
        passed: worst_core <= 0.01 && high <= 0.05,
        detail: format!("ω/a ≤ 1 worst {worst_core:.3e} (tol 1e-2), ω/a = 2 {high:.3e} (tol 5e-2)"),
    }
}

fn oracle_equivalence() -> Outcome {
    let cfg = RunConfig::parse(
        "[model]\nkind = \"su2\"\nspin = 1.0\ngap = 0.5\n[worldline]\naccel = 1.0\nswitching = 10.0\n",
    )
    .unwrap();
    let suites = oracle_suites_with(&cfg, &default_engine).unwrap();
    let spin2 = build_su2_model(2.0, 0.5).unwrap();
    let table = build_table(&spin2, &tanh_params(1.0, 10.0)).unwrap();
    let engine = correction_from_table(&spin2, &DensityMatrix::basis(5, 2).unwrap(), &table, 1.0).unwrap();
    let reference = ququint_oracle_middle(&table).unwrap();
    let zero = Complex64::new(0.0, 0.0);
    let engine_zeros = engine.correction.iter().filter(|z| **z == zero).count();
    let reference_zeros = reference.correction.iter().filter(|z| **z == zero).count();
    let worst = suites.iter().map(|s| s.max_deviation).fold(0.0, f64::max);
    let failed: Vec<&str> = suites.iter().filter(|s| !s.passed).map(|s| s.name).collect();
    Outcome {
        passed: failed.is_empty() && engine_zeros == reference_zeros,
        detail: format!(
            "{} suites, worst {worst:.2e} (tol {ORACLE_THRESHOLD:.0e}), failed {failed:?}; ququint exact zeros engine {engine_zeros}, reference {reference_zeros}",
            suites.len()
        ),
    }
}

fn selection_rules() -> Outcome {
    let su2 = build_su2_model(1.0, 0.5).unwrap();
    let table = build_table(&su2, &tanh_params(1.0, 20.0)).unwrap();
    let up = transition_probability_from_table(&su2, &table, 0, 2, 0.1).unwrap();
    let down = transition_probability_from_table(&su2, &table, 2, 0, 0.1).unwrap();

    let hw = build_hw_model(3, 0.5).unwrap();
    let hw_table = build_table(&hw, &tanh_params(1.0, 20.0)).unwrap();
    let degenerate = edr_from_table(&hw, &hw_table, 1, 2, 0.1).unwrap();
    let degenerate_ok = degenerate.ratio == EdrRatio::Value(1.0);

    let mut closure: f64 = 0.0;
    for state in random_qutrit_states(7, 20) {
        let (x, _) = x_o_split(state.entries()).unwrap();
        let x_state = DensityMatrix::new(x).unwrap();
        let from_x = correction_from_table(&su2, &x_state, &table, 1.0).unwrap().correction;
        let (_, leaked) = x_o_split(&from_x).unwrap();
        closure = closure.max(max_abs(&leaked) / max_abs(&from_x));
        let from_full = correction_from_table(&su2, &state, &table, 1.0).unwrap().correction;
        let (full_x, _) = x_o_split(&from_full).unwrap();
        let (only_x, _) = x_o_split(&from_x).unwrap();
        closure = closure.max(max_abs(&(full_x - only_x)) / max_abs(&from_full));
    }
    Outcome {
        passed: up == 0.0 && down == 0.0 && degenerate_ok && closure <= 1e-12,
        detail: format!(
            "P(-1→1) = {up:e}, P(1→-1) = {down:e}, HW degenerate ratio {:?}, X/O closure {closure:.2e} (tol 1e-12)",
            degenerate.ratio
        ),
    }
}

fn limit_laws() -> Outcome {
    fn slope(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        sxy / sxx
    }
    let t = 4.0;
    let p = tanh_params(1.0, t);
    let xs: Vec<f64> = [1.0f64, 2.0, 3.0, 4.0, 5.0].iter().map(|x| x * x).collect();
    let mut log_i = Vec::new();
    let mut log_q = Vec::new();
    for x in [1.0, 2.0, 3.0, 4.0, 5.0] {
        let omega = x / t;
        log_i.push(integral_i(&p, omega).unwrap().value.norm().ln());
        log_q.push(integral_q(&p, omega).unwrap().value.re.abs().ln());
    }
    let slope_i = slope(&xs, &log_i);
    let slope_q = slope(&xs, &log_q);
    let gauss_ok = [slope_i, slope_q].iter().all(|s| (s / -0.5 - 1.0).abs() <= 0.02);

    let mut doubling = Vec::new();
    for omega in [0.5, 1.0] {
        for sign in [Sign::Plus, Sign::Minus] {
            let short = integral_l(&tanh_params(1.0, 50.0), sign, omega).unwrap().value.re;
            let long = integral_l(&tanh_params(1.0, 100.0), sign, omega).unwrap().value.re;
            doubling.push(long / short);
        }
    }
    let doubling_ok = doubling.iter().all(|r| (1.9..=2.1).contains(r));

    let accels = [0.01, 0.02, 0.04, 0.08];
    let log_a: Vec<f64> = accels.iter().map(|a: &f64| a.ln()).collect();
    let mut powers = Vec::new();
    for u in [1.0, 5.0] {
        let log_r: Vec<f64> = accels.iter().map(|&a| regular_part(u, a).abs().ln()).collect();
        powers.push(slope(&log_a, &log_r));
    }
    let power_ok = powers.iter().all(|p| (p - 2.0).abs() <= 0.05);
    Outcome {
        passed: gauss_ok && doubling_ok && power_ok,
        detail: format!(
            "Gaussian slopes I {slope_i:.5}, Re Q {slope_q:.5}; doubling {:?}; regular-part powers {:?}",
            doubling.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>(),
            powers.iter().map(|p| format!("{p:.4}")).collect::<Vec<_>>()
        ),
    }
}

fn structural() -> Outcome {
    let lambda = 0.1;
    let mut models: Vec<DetectorModel> = vec![build_su2_model(1.0, 0.5).unwrap(), build_hw_model(3, 0.5).unwrap()];
    models.push(build_su2_model(1.5, 0.5).unwrap());
    let mut worst_trace: f64 = 0.0;
    let mut worst_herm: f64 = 0.0;
    let mut worst_unit: f64 = 0.0;
    for model in &models {
        let table = build_table(model, &tanh_params(1.0, 20.0)).unwrap();
        let d = model.dim();
        let mut states = Vec::new();
        for i in 0..d {
            states.push(DensityMatrix::basis(d, i).unwrap());
        }
        if d == 3 {
            states.extend(random_qutrit_states(11, 20));
        } else {
            let amps: Vec<Complex64> = (0..d).map(|k| Complex64::from_polar(1.0, 0.7 * k as f64)).collect();
            states.push(DensityMatrix::pure(&amps).unwrap());
        }
        for state in &states {
            let report = correction_from_table(model, state, &table, lambda).unwrap();
            let scale = max_abs(&report.correction).max(f64::MIN_POSITIVE);
            worst_trace = worst_trace.max(report.correction.trace().norm() / scale);
            worst_herm = worst_herm.max(hermiticity_deviation(&report.correction) / scale);
            let out = assemble_final_state(state, &report).unwrap();
            worst_unit = worst_unit.max((out.trace() - 1.0).norm());
        }
    }

    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        "[model]\nkind = \"hw\"\ndim = 3\ngap = 0.5\n[worldline]\naccel = 1.0\nswitching = 10.0\n\
         [coupling]\nlambda = 0.1\n[initial]\npopulations = [0.5, 0.3, 0.2]\n\
         [sweep]\naxis = \"accel\"\nstart = 0.5\nstop = 2.0\npoints = 4\n",
    )
    .unwrap();
    let mut identical = true;
    for sub in ["integrals", "evolve", "edr-sweep"] {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let out = dir.path().join(format!("{sub}-{run}.csv"));
            let status = Command::new(env!("CARGO_BIN_EXE_qudit-unruh"))
                .args([sub, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
                .status()
                .unwrap();
            identical &= status.success();
            outputs.push(std::fs::read(&out).unwrap_or_default());
        }
        identical &= !outputs[0].is_empty() && outputs[0] == outputs[1];
    }
    Outcome {
        passed: worst_trace <= 1e-10 && worst_herm <= 1e-10 && worst_unit <= 1e-10 && identical,
        detail: format!(
            "trace {worst_trace:.2e}, hermiticity {worst_herm:.2e}, |tr ρ − 1| {worst_unit:.2e} (tol 1e-10); CSV byte-identical {identical}"
        ),
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Duration); 8] = [
        ("closed-form vacuum pieces", closed_forms, Duration::from_secs(1)),
        ("brute-force double integral", brute_force, Duration::from_secs(120)),
        ("Unruh detailed balance", detailed_balance, Duration::from_secs(30)),
        ("KMS power-spectrum ratio", kms, Duration::from_secs(30)),
        ("oracle equivalence", oracle_equivalence, Duration::from_secs(60)),
        ("selection rules and degeneracy", selection_rules, Duration::from_secs(10)),
        ("limit laws", limit_laws, Duration::from_secs(60)),
        ("structural invariants", structural, Duration::from_secs(10)),
    ];
    let mut failures = 0;
    for (k, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let passed = outcome.passed && elapsed <= *budget;
        if !passed {
            failures += 1;
        }
        println!(
            "criterion {} {:<32} {}  {}; runtime {:.2} s (budget {} s)",
            k + 1,
            name,
            if passed { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criterion/criteria failed");
        ExitCode::FAILURE
    }
}
