//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `--nocapture` to see them alongside the test harness output).
//!
//! Criteria 1-5 drive the `robbins` binary the way a user would; 6 and 7
//! exercise the library surfaces directly.

use serde_json::Value;
use std::process::{Command, Output};

use robbins::quadrature::{integrate, QuadConfig};
use robbins::simulate::{apply_rule, derive_seed, sample_process};
use robbins::{
    analytic, expected_rank, mc_compare, mc_estimate, threshold_formula, Phase, RuleParams,
    SimConfig, StopOutcome,
};

const OPTIMUM: (f64, f64, f64) = (0.34328, 1.82571, 2.0);
const TAMAKI: (f64, f64, f64) = (0.42, 1.95, 1.95);
const THRESHOLD_C: f64 = 1.9469;

fn robbins_bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robbins"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn eval_cli(alpha: f64, b: f64, c: f64) -> Value {
    let (a, b, c) = (alpha.to_string(), b.to_string(), c.to_string());
    let out = robbins_bin(&["eval", "--alpha", &a, "--b", &b, "--c", &c]);
    assert!(
        out.status.success(),
        "eval failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("eval emits JSON")
}

fn verdict(n: u32, pass: bool, detail: &str) {
    println!(
        "CRITERION {n}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

/// Headline value: eval at the optimal triple returns 2.32614 +- 1e-4.
#[test]
fn acceptance_1_headline_value() {
    let v = eval_cli(OPTIMUM.0, OPTIMUM.1, OPTIMUM.2);
    let total = v["analytic"]["total"].as_f64().unwrap();
    let pass = (total - 2.32614).abs() <= 1e-4;
    verdict(
        1,
        pass,
        &format!("eval(0.34328, 1.82571, 2.0) = {total:.6}, target 2.32614 +- 1e-4"),
    );
    assert!(
        pass,
        "expected 2.32614 +- 1e-4, got {total:.6}; the displayed risk decomposition \
         evaluates to ~2.32734 at this triple (confirmed by unbiased simulation), \
         so the published headline value is not attainable from it"
    );
}

/// Threshold-rule cross-check: eval at alpha = 0, c = 1.9469 agrees with the
/// closed form to 1e-6 and equals 2.3318 to four decimals.
#[test]
fn acceptance_2_threshold_cross_check() {
    let v = eval_cli(0.0, 2.0, THRESHOLD_C);
    let total = v["analytic"]["total"].as_f64().unwrap();
    let formula = threshold_formula(THRESHOLD_C);
    let pass = (total - formula).abs() < 1e-6 && (total - 2.3318).abs() < 5e-5;
    verdict(
        2,
        pass,
        &format!(
            "eval(0, -, 1.9469) = {total:.9}, closed form {formula:.9}, |diff| = {:.2e}",
            (total - formula).abs()
        ),
    );
    assert!(pass);
}

/// Tamaki cross-check: eval at (0.42, 1.95, 1.95) returns 2.33045 +- 1e-4.
#[test]
fn acceptance_3_tamaki_cross_check() {
    let v = eval_cli(TAMAKI.0, TAMAKI.1, TAMAKI.2);
    let total = v["analytic"]["total"].as_f64().unwrap();
    let pass = (total - 2.33045).abs() <= 1e-4;
    verdict(
        3,
        pass,
        &format!("eval(0.42, 1.95, 1.95) = {total:.6}, target 2.33045 +- 1e-4"),
    );
    assert!(pass);
}

/// Optimization: default config lands within 1e-2 of (0.34328, 1.82571, 2.0)
/// with value <= 2.32615; with alpha fixed at 0 it recovers c = 1.9469 +- 1e-3.
#[test]
fn acceptance_4_optimization() {
    let out = robbins_bin(&["optimize"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let best = &v["opt"]["best"];
    let (ba, bb, bc) = (
        best["alpha"].as_f64().unwrap(),
        best["b"].as_f64().unwrap(),
        best["c"].as_f64().unwrap(),
    );
    let value = v["opt"]["value"].as_f64().unwrap();
    let near = (ba - OPTIMUM.0).abs() <= 1e-2
        && (bb - OPTIMUM.1).abs() <= 1e-2
        && (bc - OPTIMUM.2).abs() <= 1e-2;
    let low = value <= 2.32615;

    let fixed = robbins_bin(&["optimize", "--fix-alpha", "0"]);
    assert!(fixed.status.success());
    let vf: Value = serde_json::from_slice(&fixed.stdout).unwrap();
    let c_star = vf["opt"]["best"]["c"].as_f64().unwrap();
    let c_ok = (c_star - THRESHOLD_C).abs() <= 1e-3;

    let pass = near && low && c_ok;
    verdict(
        4,
        pass,
        &format!(
            "best = ({ba:.5}, {bb:.5}, {bc:.5}) value {value:.6} \
             [near target: {near}, value <= 2.32615: {low}]; fixed-alpha c* = {c_star:.5} [ok: {c_ok}]"
        ),
    );
    assert!(
        pass,
        "optimizer found ({ba:.5}, {bb:.5}, {bc:.5}) -> {value:.6}; the true minimum \
         of the implemented risk decomposition is ~2.327282 at ~(0.3506, 1.8441, 2.0059), \
         which cannot satisfy a 2.32615 value gate tied to the published headline number"
    );
}

/// Monte Carlo agreement at the three reference parameter sets: mean within
/// three reported standard errors of the analytic value, censoring below 1e-3.
#[test]
fn acceptance_5_monte_carlo_agreement() {
    let quad = QuadConfig::default();
    let sets = [OPTIMUM, TAMAKI, (0.0, 2.0, THRESHOLD_C)];
    let mut all = true;
    let mut details = Vec::new();
    for (alpha, b, c) in sets {
        let p = RuleParams::new(alpha, b, c).unwrap();
        let analytic_total = expected_rank(&p, &quad).unwrap().total;
        let out = robbins_bin(&[
            "simulate",
            "--alpha",
            &alpha.to_string(),
            "--b",
            &b.to_string(),
            "--c",
            &c.to_string(),
            "--replicates",
            "500000",
            "--x-max",
            "200",
            "--seed",
            "42",
        ]);
        assert!(out.status.success());
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        let mean = v["mc"]["mean"].as_f64().unwrap();
        let se = v["mc"]["std_error"].as_f64().unwrap();
        let censored = v["mc"]["censored_count"].as_f64().unwrap();
        let z = (mean - analytic_total) / se;
        let within = z.abs() <= 3.0;
        let rare = censored / 500_000.0 < 1e-3;
        all &= within && rare;
        details.push(format!(
            "({alpha}, {b}, {c}): mc {mean:.5} vs analytic {analytic_total:.5} ({z:+.2} se), censored {censored}"
        ));
    }
    verdict(5, all, &details.join("; "));
    assert!(
        all,
        "{}; the truncated estimator at x_max = 200 is biased low by ~1e-2 because \
         rare stops above the cut carry losses of order x_max (see the \
         mc_cross_validation suite), while 3 se at 5e5 replicates is ~1.1e-2",
        details.join("; ")
    );
}

/// Dominance: the optimum beats both reference rules analytically, and a
/// paired-seed comparison against the Tamaki rule is significant at t > 3.
#[test]
fn acceptance_6_dominance() {
    let quad = QuadConfig::default();
    let star = expected_rank(&RuleParams::new(OPTIMUM.0, OPTIMUM.1, OPTIMUM.2).unwrap(), &quad)
        .unwrap()
        .total;
    let tamaki = expected_rank(&RuleParams::new(TAMAKI.0, TAMAKI.1, TAMAKI.2).unwrap(), &quad)
        .unwrap()
        .total;
    let threshold = expected_rank(&RuleParams::new(0.0, 2.0, THRESHOLD_C).unwrap(), &quad)
        .unwrap()
        .total;
    let analytic_ok = star < tamaki && star < threshold;

    let cmp = mc_compare(
        &RuleParams::new(TAMAKI.0, TAMAKI.1, TAMAKI.2).unwrap(),
        &RuleParams::new(OPTIMUM.0, OPTIMUM.1, OPTIMUM.2).unwrap(),
        &SimConfig {
            x_max: 200.0,
            seed: 42,
            replicates: 500_000,
        },
    )
    .unwrap();
    // mean_diff = loss(tamaki) - loss(optimum) should be positive.
    let paired_ok = cmp.t_statistic > 3.0;

    let pass = analytic_ok && paired_ok;
    verdict(
        6,
        pass,
        &format!(
            "analytic: {star:.6} < tamaki {tamaki:.6} and < threshold {threshold:.6} [{analytic_ok}]; \
             paired diff {:+.5} +- {:.5}, t = {:.2} on {} replicates [{paired_ok}]",
            cmp.mean_diff, cmp.std_error_diff, cmp.t_statistic, cmp.n_used
        ),
    );
    assert!(pass);
}

/// Property gates: closed forms vs quadrature at 1e-8, density normalization
/// at 1e-8, the pre-alpha relative-rank-one invariant over 1e4 replicates,
/// and bit-identical simulation across thread counts.
#[test]
fn acceptance_7_property_suites() {
    use rand::{Rng, SeedableRng};
    let quad = QuadConfig::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(424242);

    // Closed forms against quadrature of the defining integrals.
    let mut closed_ok = true;
    for _ in 0..100 {
        let p = RuleParams::new(
            rng.random_range(0.05..0.7),
            rng.random_range(0.8..3.0),
            rng.random_range(1.3..3.0),
        )
        .unwrap();
        let t = rng.random_range(0.0..0.95);
        let y: f64 = rng.random_range(0.2..6.0);
        let x: f64 = rng.random_range(0.0..8.0);

        let t_cross = (1.0 - p.b() / y).clamp(0.0, t);
        let f1_int = |s: f64| analytic::f_threshold(s, p.b()).min(y);
        let f1_quad = integrate(f1_int, 0.0, t_cross, &quad).unwrap().value
            + integrate(f1_int, t_cross, t, &quad).unwrap().value;
        closed_ok &= (analytic::big_f1(t, y, &p) - f1_quad).abs() < 1e-8;

        if t >= p.alpha() {
            let f2_quad = integrate(|s| analytic::f_threshold(s, p.c()), p.alpha(), t, &quad)
                .unwrap()
                .value;
            closed_ok &= (analytic::big_f2(t, &p) - f2_quad).abs() < 1e-8;
        }

        let s1_f = |z: f64| analytic::f_inverse(z, p.b(), 0.0).min(p.alpha());
        let knee = (p.b() / (1.0 - p.alpha())).clamp(p.b().min(y), y);
        let s1_quad = integrate(s1_f, p.b().min(y), knee, &quad).unwrap().value
            + integrate(s1_f, knee, y, &quad).unwrap().value;
        closed_ok &= (analytic::s1(y, &p) - s1_quad).abs() < 1e-8;

        let s2_lo = (p.c() / (1.0 - p.alpha())).min(x);
        let s2_quad = integrate(
            |z| analytic::f_inverse(z, p.c(), p.alpha()) - p.alpha(),
            s2_lo,
            x,
            &quad,
        )
        .unwrap()
        .value;
        closed_ok &= (analytic::s2(x, &p) - s2_quad).abs() < 1e-8;
    }

    // Density normalization.
    let mut norm_ok = true;
    for _ in 0..5 {
        let p = RuleParams::new(
            rng.random_range(0.05..0.7),
            rng.random_range(0.8..3.0),
            rng.random_range(1.3..3.0),
        )
        .unwrap();
        let knee = p.b() / (1.0 - p.alpha());
        let norm = integrate(|y| analytic::y_density(y, &p), p.b(), knee, &quad)
            .unwrap()
            .value
            + robbins::integrate_semi_infinite(|y| analytic::y_density(y, &p), knee, &quad)
                .unwrap()
                .value;
        norm_ok &= (norm - 1.0).abs() < 1e-8;
    }

    // Pre-alpha stops have relative rank one, with zero violations.
    let p = RuleParams::new(OPTIMUM.0, OPTIMUM.1, OPTIMUM.2).unwrap();
    let mut rank_ok = true;
    let mut pre_seen = 0u32;
    for i in 0..10_000u64 {
        let atoms = sample_process(derive_seed(4242, i), 200.0);
        if let StopOutcome::Stopped { atom, phase, .. } = apply_rule(&atoms, &p) {
            if phase == Phase::PreAlpha {
                pre_seen += 1;
                rank_ok &= !atoms.iter().any(|a| a.t < atom.t && a.x < atom.x);
            }
        }
    }
    rank_ok &= pre_seen > 1_000;

    // Bit-identical output across thread counts.
    let sim_cfg = SimConfig {
        x_max: 200.0,
        seed: 99,
        replicates: 20_000,
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| mc_estimate(&p, &sim_cfg).unwrap())
    };
    let (r1, r4) = (run(1), run(4));
    let det_ok =
        r1.mean.to_bits() == r4.mean.to_bits() && r1.std_error.to_bits() == r4.std_error.to_bits();

    let pass = closed_ok && norm_ok && rank_ok && det_ok;
    verdict(
        7,
        pass,
        &format!(
            "closed forms: {closed_ok}; normalization: {norm_ok}; \
             pre-alpha rank-1 ({pre_seen} stops): {rank_ok}; thread determinism: {det_ok}"
        ),
    );
    assert!(pass);
}
