//! Submersion calculus checked in the radial reduction.
//!
//! For `M = N ×_ψ F` over a radial base, the volume density is
//! `w = f^{n−1} ψ^m` and a radial field `a(t) ∂_t` lifts horizontally. The
//! left-hand sides below are built as expression trees and differentiated
//! symbolically; the right-hand sides come from the model's own radial
//! quantities. A finite-difference evaluation of the left-hand side is kept
//! as an independent cross-check.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{ModelError, SubmersionModel};
use crate::profiles::{differentiate, EvalError, ExprNode, Profile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IdentityError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{what}: {source}")]
    Eval {
        what: &'static str,
        #[source]
        source: EvalError,
    },
    #[error("invalid sample range [{0}, {1}]: need 0 < start < end")]
    InvalidRange(f64, f64),
    #[error("need at least 2 samples")]
    TooFewSamples,
    #[error("sign unresolved: residual {plus:e} with +H and {minus:e} with −H at tolerance {tolerance:e}")]
    SignUnresolved {
        plus: f64,
        minus: f64,
        tolerance: f64,
    },
}

fn eval(what: &'static str) -> impl Fn(EvalError) -> IdentityError {
    move |source| IdentityError::Eval { what, source }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityOptions {
    /// Sample interval, kept away from the pole.
    pub range: (f64, f64),
    pub samples: usize,
    pub tolerance: f64,
    pub fd_points: usize,
    pub fd_step: f64,
    pub fd_tolerance: f64,
}

impl Default for IdentityOptions {
    fn default() -> Self {
        IdentityOptions {
            range: (0.25, 4.0),
            samples: 200,
            tolerance: 1e-7,
            fd_points: 20,
            fd_step: 1e-5,
            fd_tolerance: 1e-5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub check: String,
    pub max_residual: f64,
    pub argmax_t: f64,
    pub samples: usize,
    pub tolerance: f64,
    pub passed: bool,
    /// Largest residual of the finite-difference left-hand side against the
    /// symbolic one.
    pub fd_max_residual: f64,
    pub fd_consistent: bool,
}

/// `|lhs − rhs| / max(1, |lhs|, |rhs|)`
pub fn residual(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).abs() / 1f64.max(lhs.abs()).max(rhs.abs())
}

fn power(e: &ExprNode, k: usize) -> ExprNode {
    ExprNode::pow(e.clone(), ExprNode::constant(k as f64))
}

/// `f^{n−1} ψ^m` as an expression tree.
fn density_expr(model: &SubmersionModel) -> ExprNode {
    let base = model.base();
    let f = power(base.warp().expr(), base.dim() - 1);
    match model.fiber() {
        Some(fiber) => ExprNode::mul(f, power(fiber.warp().expr(), fiber.dim())),
        None => f,
    }
}

/// `ψ^m`
fn fiber_density_expr(model: &SubmersionModel) -> Result<ExprNode, IdentityError> {
    let fiber = model.fiber().ok_or(ModelError::FiberAbsent)?;
    Ok(power(fiber.warp().expr(), fiber.dim()))
}

/// `(weight·g)′ / weight`, symbolically and by central differences.
struct WeightedDerivative {
    weight: ExprNode,
    product: ExprNode,
    derivative: ExprNode,
}

impl WeightedDerivative {
    fn new(weight: ExprNode, g: ExprNode) -> Self {
        let product = ExprNode::mul(weight.clone(), g);
        let derivative = differentiate(&product);
        WeightedDerivative {
            weight,
            product,
            derivative,
        }
    }

    fn symbolic(&self, t: f64) -> Result<f64, IdentityError> {
        let w = self.weight.eval(t).map_err(eval("weight"))?;
        let d = self.derivative.eval(t).map_err(eval("derivative"))?;
        Ok(d / w)
    }

    fn central(&self, t: f64, h: f64) -> Result<f64, IdentityError> {
        let w = self.weight.eval(t).map_err(eval("weight"))?;
        let plus = self.product.eval(t + h).map_err(eval("product"))?;
        let minus = self.product.eval(t - h).map_err(eval("product"))?;
        Ok((plus - minus) / (2.0 * h * w))
    }
}

fn sample_points(opts: &IdentityOptions) -> Result<Vec<f64>, IdentityError> {
    let (a, b) = opts.range;
    if !(a > 0.0 && b > a && b.is_finite()) {
        return Err(IdentityError::InvalidRange(a, b));
    }
    if opts.samples < 2 {
        return Err(IdentityError::TooFewSamples);
    }
    let n = opts.samples - 1;
    Ok((0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect())
}

/// Quasi-random points in the interior of the range, golden-ratio spaced.
fn fd_points(opts: &IdentityOptions) -> Vec<f64> {
    let (a, b) = opts.range;
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let margin = 2.0 * opts.fd_step;
    (1..=opts.fd_points)
        .map(|i| {
            let u = (i as f64 * phi).fract();
            a + margin + (b - a - 2.0 * margin) * u
        })
        .collect()
}

fn run_check(
    check: &str,
    lhs: &WeightedDerivative,
    rhs: impl Fn(f64) -> Result<f64, IdentityError>,
    opts: &IdentityOptions,
) -> Result<ResidualReport, IdentityError> {
    let ts = sample_points(opts)?;
    let (mut max, mut argmax) = (0.0f64, ts[0]);
    for &t in &ts {
        let r = residual(lhs.symbolic(t)?, rhs(t)?);
        if !(r <= max) {
            max = r;
            argmax = t;
        }
    }
    let mut fd_max = 0.0f64;
    for t in fd_points(opts) {
        let r = residual(lhs.central(t, opts.fd_step)?, lhs.symbolic(t)?);
        fd_max = fd_max.max(r);
    }
    Ok(ResidualReport {
        check: check.to_string(),
        max_residual: max,
        argmax_t: argmax,
        samples: ts.len(),
        tolerance: opts.tolerance,
        passed: max < opts.tolerance,
        fd_max_residual: fd_max,
        fd_consistent: fd_max < opts.fd_tolerance,
    })
}

fn divergence_with_sign(
    model: &SubmersionModel,
    a: &Profile,
    sign: f64,
    opts: &IdentityOptions,
) -> Result<ResidualReport, IdentityError> {
    model.fiber().ok_or(ModelError::FiberAbsent)?;
    let lhs = WeightedDerivative::new(density_expr(model), a.expr().clone());
    let rhs = |t: f64| -> Result<f64, IdentityError> {
        let av = a.value(t).map_err(eval("a"))?;
        let da = a.derivative(t).map_err(eval("a'"))?;
        let div_n = da + av * model.base().radial_laplacian(t)?;
        Ok(div_n + sign * av * model.mean_curvature_radial(t)?)
    };
    run_check("divergence", &lhs, rhs, opts)
}

/// `div^M X̃ = div^N X + ⟨X̃, H⟩` for `X = a(t) ∂_t`.
pub fn check_divergence_identity(
    model: &SubmersionModel,
    a: &Profile,
    opts: &IdentityOptions,
) -> Result<ResidualReport, IdentityError> {
    divergence_with_sign(model, a, 1.0, opts)
}

/// `Δ^M φ̃ = Δ^N φ + ⟨∇^N φ, dπ H⟩` for radial `φ`. Without a fiber the
/// mean curvature term is absent and the check compares two forms of `Δ^N`.
pub fn check_laplacian_lift(
    model: &SubmersionModel,
    phi: &Profile,
    opts: &IdentityOptions,
) -> Result<ResidualReport, IdentityError> {
    let lhs = WeightedDerivative::new(density_expr(model), phi.d1().clone());
    let rhs = |t: f64| -> Result<f64, IdentityError> {
        let d1 = phi.derivative(t).map_err(eval("phi'"))?;
        let d2 = phi.second_derivative(t).map_err(eval("phi''"))?;
        let mut v = d2 + d1 * model.base().radial_laplacian(t)?;
        if model.fiber().is_some() {
            v += d1 * model.mean_curvature_radial(t)?;
        }
        Ok(v)
    };
    run_check("laplacian-lift", &lhs, rhs, opts)
}

/// `d/dt[vol(F_t) φ] = vol(F_t) (φ′ + φ·H)`, both sides divided by `vol(F_t)`.
pub fn check_grad_average(
    model: &SubmersionModel,
    phi: &Profile,
    opts: &IdentityOptions,
) -> Result<ResidualReport, IdentityError> {
    let lhs = WeightedDerivative::new(fiber_density_expr(model)?, phi.expr().clone());
    let rhs = |t: f64| -> Result<f64, IdentityError> {
        let v = phi.value(t).map_err(eval("phi"))?;
        let d = phi.derivative(t).map_err(eval("phi'"))?;
        Ok(d + v * model.mean_curvature_radial(t)?)
    };
    run_check("grad-average", &lhs, rhs, opts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignResolution {
    /// `+1` or `−1`: the sign in front of `m ψ′/ψ` that makes the divergence
    /// identity hold.
    pub sign: i8,
    pub plus: ResidualReport,
    pub minus: ResidualReport,
    /// Both signs pass, as for minimal fibers.
    pub degenerate: bool,
}

/// Runs the divergence identity with `a ≡ 1` under `+H` and `−H`. The
/// accepted sign must pass and the rejected one must fail by a factor of 10.
pub fn resolve_sign_convention(
    model: &SubmersionModel,
    opts: &IdentityOptions,
) -> Result<SignResolution, IdentityError> {
    let one = crate::profiles::constant(1.0);
    let plus = divergence_with_sign(model, &one, 1.0, opts)?;
    let minus = divergence_with_sign(model, &one, -1.0, opts)?;
    let tol = opts.tolerance;
    let unresolved = || IdentityError::SignUnresolved {
        plus: plus.max_residual,
        minus: minus.max_residual,
        tolerance: tol,
    };
    let (sign, degenerate) = match (plus.passed, minus.passed) {
        (true, true) => (1, true),
        (true, false) if minus.max_residual > 10.0 * tol => (1, false),
        (false, true) if plus.max_residual > 10.0 * tol => (-1, false),
        _ => return Err(unresolved()),
    };
    Ok(SignResolution {
        sign,
        plus,
        minus,
        degenerate,
    })
}

/// All three checks with the given test functions.
pub fn verify_all(
    model: &SubmersionModel,
    a: &Profile,
    phi: &Profile,
    opts: &IdentityOptions,
) -> Result<Vec<ResidualReport>, IdentityError> {
    Ok(vec![
        check_divergence_identity(model, a, opts)?,
        check_laplacian_lift(model, phi, opts)?,
        check_grad_average(model, phi, opts)?,
    ])
}
