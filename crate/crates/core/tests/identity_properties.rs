mod common;

use tonelab::identities::{
    check_divergence_identity, check_grad_average, check_laplacian_lift, resolve_sign_convention,
    IdentityOptions,
};
use tonelab::models::ModelDescription;
use tonelab::profiles::Profile;

fn presets() -> Vec<ModelDescription> {
    vec![
        ModelDescription::base(2, "euclidean").with_fiber(1, "constant"),
        ModelDescription::base(2, "hyperbolic").with_fiber(1, "constant:2"),
        ModelDescription::base(3, "hyperbolic:-4").with_fiber(2, "cosh(t)"),
        ModelDescription::base(2, "baider_base").with_fiber(1, "baider_fiber"),
        ModelDescription::base(2, "baider_base").with_fiber(1, "constant"),
        ModelDescription::base(2, "hyperbolic").with_fiber(3, "exp(t)"),
    ]
}

#[test]
fn identities_hold_on_presets() {
    let opts = IdentityOptions::default();
    for desc in presets() {
        let model = desc.build().unwrap();
        for (a, phi) in [
            ("1", "t"),
            ("t^2 + 1", "sin(t)"),
            ("tanh(t)", "exp(0.5*t) - t^3"),
        ] {
            let (a, phi) = (Profile::parse(a).unwrap(), Profile::parse(phi).unwrap());
            for r in [
                check_divergence_identity(&model, &a, &opts).unwrap(),
                check_laplacian_lift(&model, &phi, &opts).unwrap(),
                check_grad_average(&model, &phi, &opts).unwrap(),
            ] {
                assert!(r.passed && r.fd_consistent, "{desc:?}: {r:?}");
            }
        }
    }
}

#[test]
fn identities_hold_on_random_triples() {
    let opts = IdentityOptions::default();
    let mut rng = common::rng(0x1d_2024);
    for _ in 0..50 {
        let (model, phi, a) = common::random_identity_triple(&mut rng);
        let (phi, a) = (Profile::parse(&phi).unwrap(), Profile::parse(&a).unwrap());
        for r in [
            check_divergence_identity(&model, &a, &opts).unwrap(),
            check_laplacian_lift(&model, &phi, &opts).unwrap(),
            check_grad_average(&model, &phi, &opts).unwrap(),
        ] {
            assert!(r.passed, "{phi} {a}: {r:?}");
            assert!(r.max_residual < r.tolerance);
            assert!(r.fd_consistent, "{phi} {a}: {r:?}");
        }
    }
}

#[test]
fn sign_resolution_on_nondegenerate_fixtures() {
    let opts = IdentityOptions::default();
    let mut rng = common::rng(0x5_1611);
    let mut fixtures: Vec<ModelDescription> = presets()
        .into_iter()
        .filter(|d| !d.psi.as_deref().unwrap().starts_with("constant"))
        .collect();
    for _ in 0..10 {
        fixtures.push(
            common::random_base(&mut rng).with_fiber(2, &common::random_bounded_psi(&mut rng)),
        );
    }
    for desc in fixtures {
        let model = desc.build().unwrap();
        let s = resolve_sign_convention(&model, &opts).unwrap();
        assert_eq!(s.sign, 1, "{desc:?}");
        assert!(!s.degenerate, "{desc:?}");
        assert!(s.minus.max_residual > 10.0 * opts.tolerance);
    }
}

#[test]
fn h_is_the_log_derivative_of_the_volume_density() {
    let mut rng = common::rng(77);
    for _ in 0..20 {
        let (model, _, _) = common::random_identity_triple(&mut rng);
        for k in 1..40 {
            let t = 0.1 * k as f64;
            let h = 1e-5;
            let fd = (model.log_volume_density(t + h).unwrap()
                - model.log_volume_density(t - h).unwrap())
                / (2.0 * h);
            let exact = model.h_function(t).unwrap();
            assert!(
                (fd - exact).abs() < 1e-6 * exact.abs().max(1.0),
                "{t}: {fd} {exact}"
            );
        }
    }
}
