//! Generators and oracles shared by the integration suites.
#![allow(dead_code)]

use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, RngAlgorithm, RngSeed, TestRunner};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tonelab::models::{ModelDescription, SubmersionModel};
use tonelab::profiles::{parse_profile, ExprNode, Func};
use tonelab::sturm_liouville::RadialDomain;

pub const AST_MAX_DEPTH: usize = 5;
pub const DERIVATIVE_POINTS: usize = 50;
pub const SAMPLE_RANGE: (f64, f64) = (0.5, 2.5);
/// Intermediate values larger than this make central differences lose too
/// many digits.
const MAGNITUDE_CAP: f64 = 1e4;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn proptest_config(cases: u32, seed: u64) -> Config {
    Config {
        cases,
        rng_algorithm: RngAlgorithm::ChaCha,
        rng_seed: RngSeed::Fixed(seed),
        failure_persistence: None,
        max_global_rejects: 100_000,
        ..Config::default()
    }
}

fn unary(u: ExprNode, which: u8) -> ExprNode {
    use ExprNode as E;
    match which {
        0 => E::call(Func::Sin, u),
        1 => E::call(Func::Cos, u),
        2 => E::call(Func::Tanh, u),
        3 => E::call(Func::Exp, u),
        4 => E::call(Func::Sinh, u),
        5 => E::call(Func::Cosh, u),
        // arguments kept in the domain: cosh u ≥ 1
        6 => E::call(Func::Log, E::call(Func::Cosh, u)),
        7 => E::call(Func::Sqrt, E::call(Func::Cosh, u)),
        8 => E::call(Func::Coth, E::call(Func::Cosh, u)),
        _ => E::neg(u),
    }
}

fn binary(l: ExprNode, r: ExprNode, which: u8) -> ExprNode {
    use ExprNode as E;
    match which {
        0 => E::add(l, r),
        1 => E::sub(l, r),
        2 => E::mul(l, r),
        3 => E::div(l, E::call(Func::Cosh, r)),
        4 => E::pow(l, E::constant(2.0)),
        5 => E::pow(l, E::constant(3.0)),
        _ => E::pow(E::call(Func::Cosh, l), E::constant(0.5)),
    }
}

/// Random expression trees of depth two to five over `t` whose value and
/// derivative are defined on the sample range. Division, `log`, `sqrt` and
/// `coth` act on `cosh(·)`, which keeps them off their singular sets.
pub fn ast_strategy() -> impl Strategy<Value = ExprNode> {
    let leaf = prop_oneof![
        Just(ExprNode::var()),
        (-2.0f64..2.0).prop_map(ExprNode::constant),
    ];
    leaf.prop_recursive(4, 32, 2, |inner| {
        prop_oneof![
            (inner.clone(), 0u8..10).prop_map(|(u, w)| unary(u, w)),
            (inner.clone(), inner, 0u8..7).prop_map(|(l, r, w)| binary(l, r, w)),
        ]
    })
    .prop_filter("depth", |e| (2..=AST_MAX_DEPTH).contains(&e.depth()))
    .prop_filter("magnitude", tame)
}

pub fn sample_points() -> Vec<f64> {
    let (a, b) = SAMPLE_RANGE;
    (0..DERIVATIVE_POINTS)
        .map(|i| a + (b - a) * (i as f64 + 0.5) / DERIVATIVE_POINTS as f64)
        .collect()
}

fn subtrees(e: &ExprNode) -> Vec<&ExprNode> {
    let mut out = vec![e];
    match e {
        ExprNode::Neg(u) | ExprNode::Call(_, u) => out.extend(subtrees(u)),
        ExprNode::Binary(_, l, r) => {
            out.extend(subtrees(l));
            out.extend(subtrees(r));
        }
        ExprNode::Const(_) | ExprNode::Var => {}
    }
    out
}

/// Every subtree stays below the magnitude cap near every sample point.
fn tame(e: &ExprNode) -> bool {
    let parts = subtrees(e);
    sample_points().iter().all(|&t| {
        [t - 1e-2, t, t + 1e-2].iter().all(|&s| {
            parts
                .iter()
                .all(|p| matches!(p.eval(s), Ok(v) if v.abs() < MAGNITUDE_CAP))
        })
    })
}

/// `n` trees from a fixed seed.
pub fn ast_suite(n: usize, seed: u64) -> Vec<ExprNode> {
    let mut runner = TestRunner::new(proptest_config(n as u32, seed));
    let strategy = ast_strategy();
    (0..n)
        .map(|_| strategy.new_tree(&mut runner).expect("generator").current())
        .collect()
}

/// Ridders' extrapolation of central differences: a Neville tableau over
/// steps shrinking by 1.4, returning the entry with the smallest error
/// estimate. The initial step shrinks with the largest slope nearby so that
/// fast oscillations are resolved.
pub fn central_difference(e: &ExprNode, t: f64) -> f64 {
    const CON: f64 = 1.4;
    const CON2: f64 = CON * CON;
    const NTAB: usize = 12;
    let d = |h: f64| (e.eval(t + h).unwrap() - e.eval(t - h).unwrap()) / (2.0 * h);
    let mut a = [[0.0f64; NTAB]; NTAB];
    let slope = (-4..=4)
        .map(|k| {
            let s = t + 1e-3 * k as f64;
            ((e.eval(s + 1e-6).unwrap() - e.eval(s - 1e-6).unwrap()) / 2e-6).abs()
        })
        .fold(0.0, f64::max);
    let mut h = 1e-2f64.min(0.05 / slope.max(1e-300));
    a[0][0] = d(h);
    let mut best = a[0][0];
    let mut err = f64::INFINITY;
    for i in 1..NTAB {
        h /= CON;
        a[0][i] = d(h);
        let mut fac = CON2;
        for j in 1..=i {
            a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1.0);
            fac *= CON2;
            let errt = (a[j][i] - a[j - 1][i])
                .abs()
                .max((a[j][i] - a[j - 1][i - 1]).abs());
            if errt <= err {
                err = errt;
                best = a[j][i];
            }
        }
        if (a[i][i] - a[i - 1][i - 1]).abs() >= 2.0 * err {
            break;
        }
    }
    best
}

pub fn relative_error(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs().max(1.0)
}

/// Largest relative error of the symbolic derivative against central
/// differences over the sample points.
pub fn derivative_error(e: &ExprNode) -> f64 {
    let d = tonelab::profiles::differentiate(e);
    sample_points()
        .into_iter()
        .map(|t| {
            relative_error(
                d.eval(t).unwrap_or_else(|err| panic!("{e}: {err}")),
                central_difference(e, t),
            )
        })
        .fold(0.0, f64::max)
}

/// Largest relative difference between `e` and `parse(print(e))`.
pub fn roundtrip_error(e: &ExprNode) -> f64 {
    let printed = e.to_string();
    let back = parse_profile(&printed).unwrap_or_else(|err| panic!("`{printed}`: {err}"));
    sample_points()
        .into_iter()
        .map(|t| relative_error(back.eval(t).unwrap(), e.eval(t).unwrap()))
        .fold(0.0, f64::max)
}

fn round(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// `(n, f)` drawn from Euclidean and hyperbolic bases of dimension 2 to 4.
pub fn random_base(rng: &mut impl Rng) -> ModelDescription {
    let n = rng.gen_range(2..=4);
    let f = match rng.gen_range(0..3) {
        0 => "euclidean".to_string(),
        1 => "hyperbolic".to_string(),
        _ => format!("hyperbolic:{}", -round(rng.gen_range(0.25..4.0))),
    };
    ModelDescription::base(n, &f)
}

/// A positive `ψ` bounded between two positive constants.
pub fn random_bounded_psi(rng: &mut impl Rng) -> String {
    let c = round(rng.gen_range(1.5..3.0));
    let a = round(rng.gen_range(-1.0..1.0));
    let b = round(rng.gen_range(0.2..3.0));
    let d = round(rng.gen_range(0.0..2.0));
    match rng.gen_range(0..3) {
        0 => format!("{c} + {a}*tanh({b}*t - {d})"),
        1 => format!("{c} + {a}*sin({b}*t + {d})"),
        _ => format!("{c} + {a}*exp(-{b}*t^2)"),
    }
}

/// A ball or an annulus with moderate radii.
pub fn random_domain(rng: &mut impl Rng) -> RadialDomain {
    if rng.gen_bool(0.5) {
        RadialDomain::ball(round(rng.gen_range(0.5..3.0))).unwrap()
    } else {
        let a = round(rng.gen_range(0.2..2.0));
        let b = a + round(rng.gen_range(0.5..3.0));
        RadialDomain::annulus(a, b).unwrap()
    }
}

/// Random analytic test function for the identity checks.
pub fn random_test_function(rng: &mut impl Rng) -> String {
    let p = round(rng.gen_range(-2.0..2.0));
    let q = round(rng.gen_range(-2.0..2.0));
    let r = round(rng.gen_range(0.1..2.0));
    match rng.gen_range(0..4) {
        0 => format!("{p}*t^3 + {q}*t^2 + {r}*t + 1"),
        1 => format!("{p}*sin({r}*t) + {q}"),
        2 => format!("exp({r}*t) + {p}*t"),
        _ => format!("{p}*tanh({r}*t) + {q}*cos(t)"),
    }
}

/// `(model, φ, a)` over random bases and fibers: bounded `ψ`, exponential
/// `ψ`, constant `ψ` and the fast-decaying fiber of the `t e^{t²}` example.
pub fn random_identity_triple(rng: &mut impl Rng) -> (SubmersionModel, String, String) {
    let m = rng.gen_range(1..=3);
    let desc = match rng.gen_range(0..4) {
        0 => random_base(rng).with_fiber(m, &random_bounded_psi(rng)),
        1 => {
            let s = round(rng.gen_range(-1.5..1.5));
            random_base(rng).with_fiber(m, &format!("exp({s}*t)"))
        }
        2 => {
            random_base(rng).with_fiber(m, &format!("constant:{}", round(rng.gen_range(0.5..3.0))))
        }
        _ => ModelDescription::base(2, "baider_base").with_fiber(m, "baider_fiber"),
    };
    let model = desc.build().expect("random model is valid");
    (model, random_test_function(rng), random_test_function(rng))
}
