//! Radial profile functions `f(t)`, `ψ(t)` and `G(t)` with exact symbolic
//! first and second derivatives.

mod diff;
mod expr;
mod parse;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use diff::{differentiate, log_expand};
pub use expr::{BinaryOp, EvalError, ExprNode, Func};
pub use parse::{parse_profile, ParseError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileDomain {
    /// `[0, ∞)`
    Closed,
    /// `(0, ∞)`
    Open,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("preset `{name}`: {message}")]
    BadPresetParameter { name: String, message: String },
}

#[derive(Debug)]
struct ProfileInner {
    source: String,
    expr: ExprNode,
    d1: ExprNode,
    d2: ExprNode,
    log: ExprNode,
    dlog: ExprNode,
    d2log: ExprNode,
    domain: ProfileDomain,
}

/// A radial function together with its symbolic derivatives and the
/// derivatives of its logarithm. Cheap to clone.
#[derive(Clone, Debug)]
pub struct Profile(Arc<ProfileInner>);

impl Profile {
    /// Parses `src`, or resolves it as a builtin preset name first.
    pub fn resolve(src: &str) -> Result<Profile, ProfileError> {
        match preset(src) {
            Err(ProfileError::UnknownPreset(_)) => Profile::parse(src),
            other => other,
        }
    }

    pub fn parse(src: &str) -> Result<Profile, ProfileError> {
        let expr = parse_profile(src)?;
        let domain = if expr.eval(0.0).is_ok() {
            ProfileDomain::Closed
        } else {
            ProfileDomain::Open
        };
        Ok(Profile::from_expr(src.trim(), expr, domain))
    }

    /// Builds a profile whose derivatives come from the differentiator.
    pub fn from_expr(source: &str, expr: ExprNode, domain: ProfileDomain) -> Profile {
        let d1 = differentiate(&expr);
        let d2 = differentiate(&d1);
        Profile::from_parts(source, expr, d1, d2, domain)
    }

    /// Builds a profile from closed-form derivative trees supplied by the caller.
    pub fn from_parts(
        source: &str,
        expr: ExprNode,
        d1: ExprNode,
        d2: ExprNode,
        domain: ProfileDomain,
    ) -> Profile {
        let log = log_expand(&expr);
        let dlog = differentiate(&log);
        let d2log = differentiate(&dlog);
        Profile(Arc::new(ProfileInner {
            source: source.to_string(),
            expr,
            d1,
            d2,
            log,
            dlog,
            d2log,
            domain,
        }))
    }

    pub fn source(&self) -> &str {
        &self.0.source
    }

    pub fn expr(&self) -> &ExprNode {
        &self.0.expr
    }

    pub fn d1(&self) -> &ExprNode {
        &self.0.d1
    }

    pub fn d2(&self) -> &ExprNode {
        &self.0.d2
    }

    pub fn domain(&self) -> ProfileDomain {
        self.0.domain
    }

    /// The profile does not depend on `t`.
    pub fn is_constant(&self) -> bool {
        self.0.expr.is_constant()
    }

    pub fn value(&self, t: f64) -> Result<f64, EvalError> {
        self.0.expr.eval(t)
    }

    pub fn derivative(&self, t: f64) -> Result<f64, EvalError> {
        self.0.d1.eval(t)
    }

    pub fn second_derivative(&self, t: f64) -> Result<f64, EvalError> {
        self.0.d2.eval(t)
    }

    /// `log p(t)`; an error means the profile is not positive (or not finite) at `t`.
    pub fn log_value(&self, t: f64) -> Result<f64, EvalError> {
        self.0.log.eval(t)
    }

    /// `p'(t) / p(t)`
    pub fn log_derivative(&self, t: f64) -> Result<f64, EvalError> {
        self.0.dlog.eval(t)
    }

    /// `(log p)''(t)`
    pub fn log_second_derivative(&self, t: f64) -> Result<f64, EvalError> {
        self.0.d2log.eval(t)
    }

    /// `p''(t) / p(t)`, computed from the logarithmic derivatives.
    pub fn second_derivative_ratio(&self, t: f64) -> Result<f64, EvalError> {
        let g = self.log_derivative(t)?;
        Ok(self.log_second_derivative(t)? + g * g)
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.source)
    }
}

fn t() -> ExprNode {
    ExprNode::Var
}

fn c(v: f64) -> ExprNode {
    ExprNode::Const(v)
}

fn t_squared() -> ExprNode {
    ExprNode::pow(t(), c(2.0))
}

/// Builtin profile names. `hyperbolic` and `constant` accept a parameter
/// after a colon, e.g. `hyperbolic:-4` or `constant:2.5`.
pub const PRESET_NAMES: [&str; 5] = [
    "euclidean",
    "hyperbolic",
    "baider_base",
    "baider_fiber",
    "constant",
];

/// Looks up a builtin preset. Presets never go through the parser and carry
/// hand-written derivative trees.
pub fn preset(spec: &str) -> Result<Profile, ProfileError> {
    let spec = spec.trim();
    let (name, param) = match spec.split_once(':') {
        Some((n, p)) => (n.trim(), Some(p.trim())),
        None => (spec, None),
    };
    let parse_param = |default: f64| -> Result<f64, ProfileError> {
        match param {
            None => Ok(default),
            Some(p) => p
                .parse::<f64>()
                .map_err(|_| ProfileError::BadPresetParameter {
                    name: name.to_string(),
                    message: format!("`{p}` is not a number"),
                }),
        }
    };
    let no_param = || -> Result<(), ProfileError> {
        match param {
            None => Ok(()),
            Some(_) => Err(ProfileError::BadPresetParameter {
                name: name.to_string(),
                message: "takes no parameter".into(),
            }),
        }
    };
    match name {
        "euclidean" => {
            no_param()?;
            Ok(euclidean())
        }
        "hyperbolic" => {
            let kappa = parse_param(-1.0)?;
            if !(kappa < 0.0 && kappa.is_finite()) {
                return Err(ProfileError::BadPresetParameter {
                    name: name.into(),
                    message: format!("curvature must be negative, got {kappa}"),
                });
            }
            Ok(hyperbolic(kappa))
        }
        "baider_base" => {
            no_param()?;
            Ok(baider_base())
        }
        "baider_fiber" => {
            no_param()?;
            Ok(baider_fiber())
        }
        "constant" => {
            let value = parse_param(1.0)?;
            if !(value > 0.0 && value.is_finite()) {
                return Err(ProfileError::BadPresetParameter {
                    name: name.into(),
                    message: format!("value must be positive, got {value}"),
                });
            }
            Ok(constant(value))
        }
        _ => Err(ProfileError::UnknownPreset(spec.to_string())),
    }
}

/// `f(t) = t`
pub fn euclidean() -> Profile {
    Profile::from_parts("euclidean", t(), c(1.0), c(0.0), ProfileDomain::Closed)
}

/// `f(t) = sinh(√(−κ) t) / √(−κ)`, the space form of curvature `κ < 0`.
pub fn hyperbolic(kappa: f64) -> Profile {
    let s = (-kappa).sqrt();
    let arg = ExprNode::mul(c(s), t());
    let (expr, d1, d2) = if s == 1.0 {
        (
            ExprNode::call(Func::Sinh, t()),
            ExprNode::call(Func::Cosh, t()),
            ExprNode::call(Func::Sinh, t()),
        )
    } else {
        (
            ExprNode::div(ExprNode::call(Func::Sinh, arg.clone()), c(s)),
            ExprNode::call(Func::Cosh, arg.clone()),
            ExprNode::mul(c(s), ExprNode::call(Func::Sinh, arg)),
        )
    };
    let source = if kappa == -1.0 {
        "hyperbolic".to_string()
    } else {
        format!("hyperbolic:{kappa}")
    };
    Profile::from_parts(&source, expr, d1, d2, ProfileDomain::Closed)
}

/// `f(t) = t e^{t²}`
pub fn baider_base() -> Profile {
    let e = ExprNode::call(Func::Exp, t_squared());
    let expr = ExprNode::mul(t(), e.clone());
    // (1 + 2t²) e^{t²}
    let d1 = ExprNode::mul(
        ExprNode::add(c(1.0), ExprNode::mul(c(2.0), t_squared())),
        e.clone(),
    );
    // (6t + 4t³) e^{t²}
    let d2 = ExprNode::mul(
        ExprNode::add(
            ExprNode::mul(c(6.0), t()),
            ExprNode::mul(c(4.0), ExprNode::pow(t(), c(3.0))),
        ),
        e,
    );
    Profile::from_parts("baider_base", expr, d1, d2, ProfileDomain::Closed)
}

/// `ψ(t) = e^{t − t²}`
pub fn baider_fiber() -> Profile {
    let e = ExprNode::call(Func::Exp, ExprNode::sub(t(), t_squared()));
    let slope = ExprNode::sub(c(1.0), ExprNode::mul(c(2.0), t()));
    let d1 = ExprNode::mul(slope.clone(), e.clone());
    // ((1 − 2t)² − 2) e^{t − t²}
    let d2 = ExprNode::mul(ExprNode::sub(ExprNode::pow(slope, c(2.0)), c(2.0)), e);
    Profile::from_parts(
        "baider_fiber",
        ExprNode::call(Func::Exp, ExprNode::sub(t(), t_squared())),
        d1,
        d2,
        ProfileDomain::Closed,
    )
}

pub fn constant(value: f64) -> Profile {
    let source = if value == 1.0 {
        "constant".to_string()
    } else {
        format!("constant:{value}")
    };
    Profile::from_parts(&source, c(value), c(0.0), c(0.0), ProfileDomain::Closed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_presets() -> Vec<Profile> {
        vec![
            euclidean(),
            hyperbolic(-1.0),
            hyperbolic(-4.0),
            hyperbolic(-0.3),
            baider_base(),
            baider_fiber(),
            constant(2.0),
        ]
    }

    #[test]
    fn evaluation_examples() {
        let p = Profile::parse("sinh(t)").unwrap();
        assert!((p.value(1.0).unwrap() - 1.175_201_2).abs() < 1e-7);
        assert_eq!(Profile::parse("t").unwrap().value(3.5).unwrap(), 3.5);
        assert!(matches!(
            Profile::parse("1/t").unwrap().value(0.0),
            Err(EvalError::DivisionByZero { .. })
        ));
        assert_eq!(Profile::parse("1/t").unwrap().domain(), ProfileDomain::Open);
    }

    #[test]
    fn preset_closed_forms_match_differentiator() {
        for p in all_presets() {
            let auto1 = differentiate(p.expr());
            let auto2 = differentiate(&auto1);
            for k in 1..=40 {
                let t = 0.1 * k as f64;
                let (a, b) = (p.derivative(t).unwrap(), auto1.eval(t).unwrap());
                assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "{p} d1 at {t}");
                let (a, b) = (p.second_derivative(t).unwrap(), auto2.eval(t).unwrap());
                assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "{p} d2 at {t}");
            }
        }
    }

    #[test]
    fn preset_derivatives_match_central_differences() {
        for p in all_presets() {
            for k in 1..=20 {
                let t = 0.2 + 0.15 * k as f64;
                let h = 1e-4;
                let fd = |g: &dyn Fn(f64) -> f64| {
                    let d = |h: f64| (g(t + h) - g(t - h)) / (2.0 * h);
                    (4.0 * d(h / 2.0) - d(h)) / 3.0
                };
                let v = |x: f64| p.value(x).unwrap();
                let d1 = |x: f64| p.derivative(x).unwrap();
                let exact = p.derivative(t).unwrap();
                assert!(
                    (fd(&v) - exact).abs() < 1e-6 * (1.0 + exact.abs()),
                    "{p} at {t}"
                );
                let exact = p.second_derivative(t).unwrap();
                assert!(
                    (fd(&d1) - exact).abs() < 1e-6 * (1.0 + exact.abs()),
                    "{p} at {t}"
                );
            }
        }
    }

    #[test]
    fn log_forms_agree_with_direct_evaluation() {
        for p in all_presets() {
            for k in 1..=30 {
                let t = 0.1 * k as f64;
                let v = p.value(t).unwrap();
                assert!((p.log_value(t).unwrap() - v.ln()).abs() < 1e-12 * (1.0 + v.ln().abs()));
                let ratio = p.derivative(t).unwrap() / v;
                assert!((p.log_derivative(t).unwrap() - ratio).abs() < 1e-11 * (1.0 + ratio.abs()));
                let ratio2 = p.second_derivative(t).unwrap() / v;
                let got = p.second_derivative_ratio(t).unwrap();
                assert!(
                    (got - ratio2).abs() < 1e-9 * (1.0 + ratio2.abs()),
                    "{p} at {t}"
                );
            }
        }
    }

    #[test]
    fn resolve_prefers_presets() {
        assert_eq!(
            Profile::resolve("baider_base").unwrap().source(),
            "baider_base"
        );
        assert_eq!(
            Profile::resolve("hyperbolic:-4").unwrap().source(),
            "hyperbolic:-4"
        );
        assert_eq!(Profile::resolve("t^2").unwrap().source(), "t^2");
        assert!(Profile::resolve("hyperbolic:2").is_err());
        assert!(Profile::resolve("euclidean:3").is_err());
        assert!(Profile::resolve("nonsense(t)").is_err());
    }

    #[test]
    fn hyperbolic_log_derivative_is_scaled_coth() {
        let p = hyperbolic(-4.0);
        let v = p.log_derivative(0.7).unwrap();
        assert!((v - 2.0 / (1.4f64).tanh()).abs() < 1e-13);
    }
}
