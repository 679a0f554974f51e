//! Acceptance suite: one line per criterion, then a single assertion over
//! all of them so that every line is printed even when one fails.
//!
//! Run with `cargo test -p tonelab --test acceptance -- --nocapture`.

mod common;

use std::f64::consts::PI;

use rand::Rng;
use tonelab::bounds::{
    eigenfield_from_tone, estimators, logderivative_bound, volume_ratio_check, BoundError,
    BoundOptions, Interval, RadialField, DEFAULT_CUTOFF,
};
use tonelab::certificate::Verdict;
use tonelab::comparison::{comparison_check, solve_jacobi, ComparisonOptions, DEFAULT_HORIZON};
use tonelab::identities::{
    check_divergence_identity, check_grad_average, check_laplacian_lift, resolve_sign_convention,
    IdentityOptions,
};
use tonelab::models::{ModelDescription, RadialWeight, UniformWeight};
use tonelab::profiles::Profile;
use tonelab::spectrum::{
    brooks_growth, discreteness_certificate, ess_bottom_estimate, CertificateOptions,
    DrivingFunction, EssEstimate, SpectrumError, TruncationPolicy,
};
use tonelab::sturm_liouville::{
    assemble, smallest_eigenpair, Grid, RadialDomain, DEFAULT_TOLERANCE,
};
use tonelab::tone::{fundamental_tone, total_space_tone, weighted_tone, Mode, ToneOptions};

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Outcome {
        Outcome {
            passed,
            detail: detail.into(),
        }
    }
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target.abs()
}

fn exterior(desc: ModelDescription, rs: &[f64], total: bool) -> Result<EssEstimate, SpectrumError> {
    let model = desc.build().unwrap();
    let opts = ToneOptions {
        check_modes: false,
        ..ToneOptions::default()
    };
    let weight: &dyn RadialWeight = if total { &model } else { model.base() };
    ess_bottom_estimate(weight, rs, &TruncationPolicy::default(), &opts)
}

fn hyperbolic_bottom() -> Outcome {
    let base = ModelDescription::base(2, "hyperbolic").build().unwrap();
    let ball = fundamental_tone(
        base.base(),
        RadialDomain::ball(16.0).unwrap(),
        &ToneOptions::default(),
    )
    .unwrap();
    let h2 = exterior(
        ModelDescription::base(2, "hyperbolic"),
        &[2.0, 4.0, 8.0, 16.0],
        false,
    )
    .unwrap()
    .bottom()
    .unwrap();
    let h4 = exterior(
        ModelDescription::base(2, "hyperbolic:-4"),
        &[2.0, 4.0, 8.0, 16.0],
        false,
    )
    .unwrap()
    .bottom()
    .unwrap();
    let ok = [
        within(ball.lambda, 0.25, 0.02),
        within(h2, 0.25, 0.01),
        within(h4, 1.0, 0.01),
    ];
    Outcome::new(
        ok.iter().all(|&b| b),
        format!(
            "ball R=16 λ*={:.6} (±2% of 0.25: {}), ess κ=−1 {:.6} ({}), ess κ=−4 {:.6} ({})",
            ball.lambda, ok[0], h2, ok[1], h4, ok[2]
        ),
    )
}

fn minimal_fiber_equality() -> Outcome {
    let mut rng = common::rng(0xc2);
    let opts = ToneOptions::with_grid(2048);
    let mut worst = 0.0f64;
    let mut count = 0;
    for f in ["euclidean", "hyperbolic", "hyperbolic:-4"] {
        for _ in 0..10 {
            let c = rng.gen_range(0.3..4.0);
            let m = rng.gen_range(1..=3);
            let n = rng.gen_range(2..=3);
            let model = ModelDescription::base(n, f)
                .with_fiber(m, &format!("constant:{c}"))
                .build()
                .unwrap();
            let d = common::random_domain(&mut rng);
            let down = fundamental_tone(model.base(), d, &opts).unwrap();
            let up = total_space_tone(&model, d, 0, &opts).unwrap();
            worst = worst.max((down.lambda - up.lambda).abs());
            count += 1;
        }
    }
    Outcome::new(
        worst <= 1e-10,
        format!("{count} cases, max |λ̃ − λ| = {worst:.2e}"),
    )
}

fn volume_ratio_inequality() -> Outcome {
    let mut rng = common::rng(0xc3);
    let opts = ToneOptions::with_grid(2048);
    let mut violations = 0;
    let mut min_slack = f64::INFINITY;
    for _ in 0..20 {
        let psi = common::random_bounded_psi(&mut rng);
        let model = common::random_base(&mut rng)
            .with_fiber(rng.gen_range(1..=3), &psi)
            .build()
            .unwrap();
        let d = common::random_domain(&mut rng);
        let down = fundamental_tone(model.base(), d, &opts).unwrap();
        let up = total_space_tone(&model, d, 0, &opts).unwrap();
        let r = volume_ratio_check(&model, d, &down, &up, 2000).unwrap();
        if !r.passed {
            violations += 1;
        }
        min_slack = min_slack.min(r.relative_slack);
    }
    Outcome::new(
        violations == 0,
        format!("20 bounded ψ, {violations} violations, min slack {min_slack:.3e}"),
    )
}

fn estimator_soundness_and_equality() -> Outcome {
    let bopts = BoundOptions::default();
    let topts = ToneOptions::with_grid(2048);
    let mut rng = common::rng(0xc4);

    // equality clause on interior-shrunk fixtures
    let fixtures = [
        (
            ModelDescription::base(2, "hyperbolic"),
            RadialDomain::annulus(1.0, 2.0).unwrap(),
        ),
        (
            ModelDescription::base(2, "euclidean"),
            RadialDomain::annulus(0.5, 2.0).unwrap(),
        ),
        (
            ModelDescription::base(3, "hyperbolic:-4"),
            RadialDomain::annulus(0.3, 1.5).unwrap(),
        ),
        (
            ModelDescription::base(2, "baider_base").with_fiber(1, "baider_fiber"),
            RadialDomain::annulus(2.0, 4.0).unwrap(),
        ),
    ];
    let mut worst_gap = 0.0f64;
    for (desc, d) in &fixtures {
        let model = desc.build().unwrap();
        let (tone, weight): (_, &dyn RadialWeight) = if model.fiber().is_some() {
            (total_space_tone(&model, *d, 0, &topts).unwrap(), &model)
        } else {
            (
                fundamental_tone(model.base(), *d, &topts).unwrap(),
                model.base(),
            )
        };
        let field = eigenfield_from_tone(&tone, DEFAULT_CUTOFF).unwrap();
        let RadialField::Sampled(s) = &field else {
            unreachable!()
        };
        let inner = Interval::new(s.nodes[0], *s.nodes.last().unwrap())
            .unwrap()
            .shrink(0.1);
        let r = logderivative_bound(weight, inner, &field, &bopts).unwrap();
        worst_gap = worst_gap.max((r.bound - tone.lambda).abs());
    }

    // soundness over random models, domains and fields
    let mut violations = 0;
    let mut evaluated = 0;
    for _ in 0..30 {
        let total = rng.gen_bool(0.5);
        let desc = common::random_base(&mut rng);
        let desc = if total {
            desc.with_fiber(1, &common::random_bounded_psi(&mut rng))
        } else {
            desc
        };
        let model = desc.build().unwrap();
        let d = common::random_domain(&mut rng);
        let (tone, weight): (_, &dyn RadialWeight) = if total {
            (total_space_tone(&model, d, 0, &topts).unwrap(), &model)
        } else {
            (
                fundamental_tone(model.base(), d, &topts).unwrap(),
                model.base(),
            )
        };
        let tol = tone.error_estimate + 1e-9 * tone.lambda.max(1.0);
        for src in ["1", "t", "tanh(t)", "t/(1 + t^2)", "0.5 + 0.2*t"] {
            let field = RadialField::parse(src).unwrap();
            for est in estimators() {
                match est.estimate(weight, d.into(), &field, &bopts) {
                    Ok(r) => {
                        evaluated += 1;
                        if r.bound > tone.lambda + tol {
                            violations += 1;
                        }
                    }
                    Err(BoundError::HypothesisFailed(_)) => {}
                    Err(e) => panic!("{e}"),
                }
            }
        }
    }
    Outcome::new(
        worst_gap < 1e-3 && violations == 0,
        format!(
            "eigenfield gap max {worst_gap:.2e} (< 1e-3); soundness {violations} violations in {evaluated} bounds"
        ),
    )
}

fn proper_h_certificate() -> Outcome {
    let model = ModelDescription::base(2, "baider_base")
        .with_fiber(1, "constant")
        .build()
        .unwrap();
    let cert = discreteness_certificate(
        &model,
        DrivingFunction::H,
        &CertificateOptions::new(2.0, 20.0),
    )
    .unwrap();
    let bound = cert.bound.unwrap_or(f64::NAN);
    let bound_ok = cert.verdict == Verdict::CertifiedToHorizon && (bound - 5.0625).abs() <= 1e-9;
    let est = match exterior(ModelDescription::base(2, "baider_base"), &[2.0], false) {
        Ok(e) => e,
        Err(SpectrumError::BudgetExhausted { partial, .. }) => *partial,
        Err(e) => panic!("{e}"),
    };
    let sweep = &est.points[0].sweep;
    let below: Vec<_> = sweep.iter().filter(|p| p.lambda < 5.0625 - p.err).collect();
    let min = sweep.iter().map(|p| p.lambda).fold(f64::INFINITY, f64::min);
    Outcome::new(
        bound_ok && below.is_empty(),
        format!(
            "bound {bound:.12} ({}), {} sweep tones on [2, R_cut], min {min:.6}, {} below 5.0625",
            cert.verdict,
            sweep.len(),
            below.len()
        ),
    )
}

fn baider_dichotomy() -> Outcome {
    let base = exterior(
        ModelDescription::base(2, "baider_base"),
        &[4.0, 8.0, 16.0, 24.0, 32.0, 40.0],
        false,
    )
    .unwrap();
    let base_ok = base.is_discrete() && base.points.last().unwrap().lambda > 1e3;

    let baider = ModelDescription::base(2, "baider_base").with_fiber(1, "baider_fiber");
    let total = exterior(baider.clone(), &[4.0, 6.0, 8.0, 10.0], true).unwrap();
    let tones = total.lambdas();
    let total_ok = tones.iter().all(|l| (0.2..=0.3).contains(l));

    let model = baider.build().unwrap();
    let cert = discreteness_certificate(
        &model,
        DrivingFunction::H,
        &CertificateOptions::new(2.0, 20.0),
    )
    .unwrap();
    let cert_ok = cert.verdict == Verdict::NotCertified && cert.sup_driving <= 1.6;

    let brooks = brooks_growth(&model, 30.0, 30_000).unwrap();
    let brooks_ok = (brooks.mu_estimate - 1.0).abs() <= 0.05 && brooks.volume_diverges;

    Outcome::new(
        base_ok && total_ok && cert_ok && brooks_ok,
        format!(
            "base tones {:?} discrete={}; total {:?}; certificate {} sup h {:.4}; μ̂ {:.4} vol→∞ {}",
            base.lambdas()
                .iter()
                .map(|l| format!("{l:.4e}"))
                .collect::<Vec<_>>(),
            base.is_discrete(),
            tones.iter().map(|l| format!("{l:.4}")).collect::<Vec<_>>(),
            cert.verdict,
            cert.sup_driving,
            brooks.mu_estimate,
            brooks.volume_diverges
        ),
    )
}

fn jacobi_comparison() -> Outcome {
    let p = |s: &str| Profile::parse(s).unwrap();
    let sol = solve_jacobi(&p("1"), 5.0, 1e-3, 2).unwrap();
    let sinh_err = (0..=500)
        .map(|i| {
            let t = 0.01 * i as f64;
            (sol.value(t).unwrap() - t.sinh()).abs() / t.sinh().max(1.0)
        })
        .fold(0.0, f64::max);

    let exact = 2f64.sinh();
    let err = |h| {
        (solve_jacobi(&p("1"), 2.0, h, 2)
            .unwrap()
            .value(2.0)
            .unwrap()
            - exact)
            .abs()
    };
    let ratio = err(0.05) / err(0.025);

    let sol = solve_jacobi(&p("4*t^2 + 6"), 2.0, 1e-3, 2).unwrap();
    let warp_err = (0..=200)
        .map(|i| {
            let t = 0.01 * i as f64;
            (sol.value(t).unwrap() - t * (t * t).exp()).abs()
        })
        .fold(0.0, f64::max);

    let opts = ComparisonOptions::default();
    let fixtures = [
        ("hyperbolic", "1"),
        ("hyperbolic", "0.5"),
        ("hyperbolic:-4", "4"),
        ("euclidean", "0"),
        ("baider_base", "4*t^2 + 6"),
        ("baider_base", "1"),
        ("baider_base", "4*t^2"),
    ];
    let mut worst = f64::NEG_INFINITY;
    let mut all_passed = true;
    for (f, g) in fixtures {
        let base = ModelDescription::base(2, f).build().unwrap();
        let r = comparison_check(base.base(), &p(g), DEFAULT_HORIZON, &opts).unwrap();
        assert!(r.hypothesis_met, "{f} {g}");
        worst = worst.max(r.max_violation);
        all_passed &= r.passed && r.max_violation < 1e-6;
    }
    Outcome::new(
        sinh_err < 1e-8 && (14.0..=18.0).contains(&ratio) && warp_err < 1e-6 && all_passed,
        format!(
            "sinh err {sinh_err:.2e}, order ratio {ratio:.3}, t·e^(t²) err {warp_err:.2e}, comparison max violation {worst:.2e}"
        ),
    )
}

fn identity_suite() -> Outcome {
    let opts = IdentityOptions::default();
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut run = |model: &tonelab::models::SubmersionModel, a: &str, phi: &str| {
        let (a, phi) = (Profile::parse(a).unwrap(), Profile::parse(phi).unwrap());
        for r in [
            check_divergence_identity(model, &a, &opts).unwrap(),
            check_laplacian_lift(model, &phi, &opts).unwrap(),
            check_grad_average(model, &phi, &opts).unwrap(),
        ] {
            worst = worst.max(r.max_residual);
            if !r.passed {
                failures += 1;
            }
        }
    };
    let presets = [
        ModelDescription::base(2, "euclidean").with_fiber(1, "constant"),
        ModelDescription::base(2, "hyperbolic").with_fiber(1, "constant:2"),
        ModelDescription::base(2, "hyperbolic:-4").with_fiber(1, "constant"),
        ModelDescription::base(2, "baider_base").with_fiber(1, "baider_fiber"),
        ModelDescription::base(2, "baider_base").with_fiber(1, "constant"),
        ModelDescription::base(2, "hyperbolic").with_fiber(3, "exp(t)"),
    ];
    for desc in &presets {
        run(&desc.build().unwrap(), "1", "t");
        run(&desc.build().unwrap(), "t^2 + 1", "sinh(t)");
    }
    let mut rng = common::rng(0xc8);
    for _ in 0..50 {
        let (model, phi, a) = common::random_identity_triple(&mut rng);
        run(&model, &a, &phi);
    }

    let mut sign_ok = true;
    let mut min_sep = f64::INFINITY;
    for desc in [
        ModelDescription::base(2, "baider_base").with_fiber(1, "baider_fiber"),
        ModelDescription::base(2, "hyperbolic").with_fiber(3, "exp(t)"),
        ModelDescription::base(3, "hyperbolic:-4").with_fiber(2, "2 + tanh(t)"),
        ModelDescription::base(2, "euclidean").with_fiber(1, "1 + exp(-t^2)"),
    ] {
        let s = resolve_sign_convention(&desc.build().unwrap(), &opts).unwrap();
        sign_ok &= s.sign == 1 && !s.degenerate;
        min_sep = min_sep.min(s.minus.max_residual / opts.tolerance);
    }
    Outcome::new(
        failures == 0 && sign_ok && min_sep > 10.0,
        format!(
            "max residual {worst:.2e} at tolerance 1e-7, {failures} failures; sign +1, rejected sign at {min_sep:.1e}× tolerance"
        ),
    )
}

fn solver_fixtures() -> Outcome {
    let interval = RadialDomain::annulus(0.0, PI).unwrap();
    let flat = weighted_tone(
        &UniformWeight,
        &|_| Ok(None),
        interval,
        Mode::INVARIANT,
        &ToneOptions::default(),
    )
    .unwrap()
    .lambda;

    let disk = ModelDescription::base(2, "euclidean").build().unwrap();
    let bessel = fundamental_tone(
        disk.base(),
        RadialDomain::ball(1.0).unwrap(),
        &ToneOptions::default(),
    )
    .unwrap()
    .lambda;

    // spacing π/(N+1) halves along 200, 401, 803
    let eig = |n: usize| {
        let grid = Grid::new(interval, n).unwrap();
        let sys = assemble(&UniformWeight, &grid, &|_| Ok(None)).unwrap();
        smallest_eigenpair(&sys, DEFAULT_TOLERANCE).unwrap().lambda
    };
    let (l1, l2, l3) = (eig(200), eig(401), eig(803));
    let ratio = (l1 - l2) / (l2 - l3);
    Outcome::new(
        (flat - 1.0).abs() <= 1e-6
            && (bessel - 5.78319).abs() <= 1e-3
            && (ratio - 4.0).abs() <= 0.8,
        format!("[0,π] λ₁ = {flat:.10}, disk λ₁ = {bessel:.6}, Richardson ratio {ratio:.4}"),
    )
}

fn parser_property_suite() -> Outcome {
    let suite = common::ast_suite(100, 0xc10);
    let max_depth = suite.iter().map(|e| e.depth()).max().unwrap();
    let deriv = suite
        .iter()
        .map(common::derivative_error)
        .fold(0.0, f64::max);
    let round = suite
        .iter()
        .map(common::roundtrip_error)
        .fold(0.0, f64::max);
    Outcome::new(
        max_depth <= common::AST_MAX_DEPTH && deriv < 1e-6 && round <= 1e-12,
        format!(
            "100 ASTs (depth ≤ {max_depth}) × {} points, derivative err {deriv:.2e}, round-trip err {round:.2e}",
            common::DERIVATIVE_POINTS
        ),
    )
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("hyperbolic bottom", hyperbolic_bottom),
        ("minimal-fiber tone equality", minimal_fiber_equality),
        ("fiber-volume tone inequality", volume_ratio_inequality),
        (
            "lower-bound soundness and equality",
            estimator_soundness_and_equality,
        ),
        ("proper-h certificate for t·e^(t²)", proper_h_certificate),
        ("t·e^t weight dichotomy", baider_dichotomy),
        ("Jacobi comparison", jacobi_comparison),
        ("submersion identities", identity_suite),
        ("solver fixtures", solver_fixtures),
        ("parser and derivative properties", parser_property_suite),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {:>2}. {name}: {}", i + 1, o.detail);
        if !o.passed {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
