//! The Jacobi-type Cauchy problem `J″ = G J`, `J(0) = 0`, `J′(0) = 1`, the
//! comparison function `ℓ = (n−1) J′/J`, and the Laplacian comparison
//! `Δρ ≥ ℓ` under a radial curvature bound `K_rad ≤ −G`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certificate::{Certificate, CertificateKind};
use crate::models::{BaseModel, ModelError, SubmersionModel};
use crate::profiles::{EvalError, Profile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComparisonError {
    #[error("J vanishes at t ≈ {t}: conjugate point before the horizon")]
    ConjugatePoint { t: f64 },
    #[error("t = {t} lies outside (0, {horizon}]")]
    OutOfRange { t: f64, horizon: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("G: {0}")]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_HORIZON: f64 = 20.0;

// rescale (J, J′) before they can overflow
const RESCALE_ABOVE: f64 = 1e150;

/// Samples of `(J, J′)` on a uniform grid, stored as `scale · (j, dj)` with
/// `log scale` accumulated separately.
#[derive(Clone, Debug)]
pub struct JacobiSolution {
    g: Profile,
    step: f64,
    horizon: f64,
    dim: usize,
    t: Vec<f64>,
    j: Vec<f64>,
    dj: Vec<f64>,
    log_scale: Vec<f64>,
}

fn rk4_step(g: &Profile, t: f64, h: f64, y: (f64, f64)) -> Result<(f64, f64), EvalError> {
    let rhs =
        |t: f64, y: (f64, f64)| -> Result<(f64, f64), EvalError> { Ok((y.1, g.value(t)? * y.0)) };
    let k1 = rhs(t, y)?;
    let k2 = rhs(t + 0.5 * h, (y.0 + 0.5 * h * k1.0, y.1 + 0.5 * h * k1.1))?;
    let k3 = rhs(t + 0.5 * h, (y.0 + 0.5 * h * k2.0, y.1 + 0.5 * h * k2.1))?;
    let k4 = rhs(t + h, (y.0 + h * k3.0, y.1 + h * k3.1))?;
    Ok((
        y.0 + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        y.1 + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    ))
}

/// Integrates `J″ = G J` from `J(0) = 0`, `J′(0) = 1` to `horizon` with the
/// classical fourth-order Runge–Kutta method. `dim` is the `n` in `ℓ`.
pub fn solve_jacobi(
    g: &Profile,
    horizon: f64,
    step: f64,
    dim: usize,
) -> Result<JacobiSolution, ComparisonError> {
    if !(horizon > 0.0 && horizon.is_finite() && step > 0.0 && step <= horizon) {
        return Err(ComparisonError::InvalidParameters(format!(
            "need 0 < step <= horizon, got step {step}, horizon {horizon}"
        )));
    }
    if dim < 2 {
        return Err(ComparisonError::InvalidParameters(format!(
            "dimension {dim} < 2"
        )));
    }
    let steps = (horizon / step).round().max(1.0) as usize;
    let h = horizon / steps as f64;
    let mut sol = JacobiSolution {
        g: g.clone(),
        step: h,
        horizon,
        dim,
        t: Vec::with_capacity(steps + 1),
        j: Vec::with_capacity(steps + 1),
        dj: Vec::with_capacity(steps + 1),
        log_scale: Vec::with_capacity(steps + 1),
    };
    let mut y = (0.0, 1.0);
    let mut log_scale = 0.0;
    sol.push(0.0, y, log_scale);
    for i in 0..steps {
        let t = i as f64 * h;
        let next = rk4_step(g, t, h, y)?;
        let t_next = (i + 1) as f64 * h;
        if !(next.0 > 0.0) {
            // linear interpolation of the zero crossing
            let frac = y.0 / (y.0 - next.0);
            return Err(ComparisonError::ConjugatePoint { t: t + frac * h });
        }
        y = next;
        let size = y.0.abs().max(y.1.abs());
        if size > RESCALE_ABOVE {
            y = (y.0 / size, y.1 / size);
            log_scale += size.ln();
        }
        sol.push(t_next, y, log_scale);
    }
    Ok(sol)
}

impl JacobiSolution {
    fn push(&mut self, t: f64, y: (f64, f64), log_scale: f64) {
        self.t.push(t);
        self.j.push(y.0);
        self.dj.push(y.1);
        self.log_scale.push(log_scale);
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn g(&self) -> &Profile {
        &self.g
    }

    /// Grid points `t_i`.
    pub fn nodes(&self) -> &[f64] {
        &self.t
    }

    /// `(J, J′)` at `t`, relative to the scale at the preceding sample,
    /// together with `log` of that scale. Between samples a partial RK4 step
    /// keeps fourth-order accuracy.
    fn state(&self, t: f64) -> Result<((f64, f64), f64), ComparisonError> {
        if !(t >= 0.0 && t <= self.horizon * (1.0 + 1e-12)) {
            return Err(ComparisonError::OutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        let i = ((t / self.step).floor() as usize).min(self.t.len() - 1);
        let y = (self.j[i], self.dj[i]);
        let dt = t - self.t[i];
        let y = if dt > 0.0 {
            rk4_step(&self.g, self.t[i], dt, y)?
        } else {
            y
        };
        Ok((y, self.log_scale[i]))
    }

    pub fn value(&self, t: f64) -> Result<f64, ComparisonError> {
        let ((j, _), ls) = self.state(t)?;
        Ok(j * ls.exp())
    }

    pub fn derivative(&self, t: f64) -> Result<f64, ComparisonError> {
        let ((_, dj), ls) = self.state(t)?;
        Ok(dj * ls.exp())
    }

    /// `log J(t)`, finite past the overflow of `J` itself.
    pub fn log_value(&self, t: f64) -> Result<f64, ComparisonError> {
        let ((j, _), ls) = self.state(t)?;
        Ok(j.ln() + ls)
    }

    /// `ℓ(t) = (n−1) J′(t)/J(t)` for `0 < t ≤ horizon`.
    pub fn ell(&self, t: f64) -> Result<f64, ComparisonError> {
        if !(t > 0.0) {
            return Err(ComparisonError::OutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        let ((j, dj), _) = self.state(t)?;
        if !(j > 0.0) {
            return Err(ComparisonError::ConjugatePoint { t });
        }
        Ok((self.dim - 1) as f64 * dj / j)
    }
}

/// `ℓ` for a given solution; see [`JacobiSolution::ell`].
pub fn ell(sol: &JacobiSolution, t: f64) -> Result<f64, ComparisonError> {
    sol.ell(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonOptions {
    pub step: f64,
    /// Sample points on `(0, horizon]`.
    pub samples: usize,
    /// Allowed violation of `Δρ ≥ ℓ`.
    pub tolerance: f64,
    /// Relative slack in the hypothesis `−f″/f ≤ −G`.
    pub hypothesis_tolerance: f64,
}

impl Default for ComparisonOptions {
    fn default() -> Self {
        ComparisonOptions {
            step: DEFAULT_STEP,
            samples: 1000,
            tolerance: 1e-6,
            hypothesis_tolerance: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub horizon: f64,
    pub samples: usize,
    pub hypothesis_met: bool,
    /// `max (K_rad + G)` over the samples; positive where the hypothesis fails.
    #[serde(with = "crate::nonfinite")]
    pub max_hypothesis_violation: f64,
    #[serde(with = "crate::nonfinite")]
    pub hypothesis_argmax_t: f64,
    /// `max (ℓ − Δρ)`, positive where the comparison fails.
    #[serde(with = "crate::nonfinite")]
    pub max_violation: f64,
    #[serde(with = "crate::nonfinite")]
    pub argmax_t: f64,
    /// `max |Δρ − ℓ| / (1 + |Δρ|)`, small in the equality case.
    pub max_relative_gap: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Checks `Δρ(t) ≥ ℓ(t) − tolerance` on `(0, horizon]`, and reports whether
/// the hypothesis `K_rad ≤ −G` held at the same samples.
pub fn comparison_check(
    base: &BaseModel,
    g: &Profile,
    horizon: f64,
    opts: &ComparisonOptions,
) -> Result<ComparisonReport, ComparisonError> {
    let sol = solve_jacobi(g, horizon, opts.step, base.dim())?;
    let mut report = ComparisonReport {
        horizon,
        samples: opts.samples,
        hypothesis_met: true,
        max_hypothesis_violation: f64::NEG_INFINITY,
        hypothesis_argmax_t: f64::NAN,
        max_violation: f64::NEG_INFINITY,
        argmax_t: f64::NAN,
        max_relative_gap: 0.0,
        tolerance: opts.tolerance,
        passed: true,
    };
    for i in 1..=opts.samples {
        let t = horizon * i as f64 / opts.samples as f64;
        let k = base.radial_curvature(t)?;
        let gt = g.value(t)?;
        let excess = k + gt;
        if excess > report.max_hypothesis_violation {
            report.max_hypothesis_violation = excess;
            report.hypothesis_argmax_t = t;
        }
        if excess > opts.hypothesis_tolerance * (1.0 + gt.abs()) {
            report.hypothesis_met = false;
        }
        let lap = base.radial_laplacian(t)?;
        let l = sol.ell(t)?;
        let violation = l - lap;
        if violation > report.max_violation {
            report.max_violation = violation;
            report.argmax_t = t;
        }
        report.max_relative_gap = report
            .max_relative_gap
            .max((lap - l).abs() / (1.0 + lap.abs()));
    }
    report.passed = report.max_violation <= opts.tolerance;
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialCertificateOptions {
    pub comparison: ComparisonOptions,
    /// Start of the tail as a fraction of the horizon.
    pub tail_start: f64,
    pub tail_samples: usize,
}

impl Default for RadialCertificateOptions {
    fn default() -> Self {
        RadialCertificateOptions {
            comparison: ComparisonOptions::default(),
            tail_start: 0.5,
            tail_samples: 200,
        }
    }
}

/// Discreteness via radial curvature: with `K_rad ≤ −G`, the function
/// `c = ℓ + H` bounds `Δρ + ⟨∇ρ, dπH⟩` from below; a tail on which `c`
/// keeps growing certifies the bound `(1/4)(inf c)²` up to the horizon.
pub fn radial_discreteness_certificate(
    model: &SubmersionModel,
    g: &Profile,
    horizon: f64,
    opts: &RadialCertificateOptions,
) -> Result<Certificate, ComparisonError> {
    let kind = CertificateKind::RadialCurvature;
    let r_star = opts.tail_start * horizon;
    let check = comparison_check(model.base(), g, horizon, &opts.comparison)?;
    if !check.hypothesis_met {
        return Ok(Certificate::hypothesis_failed(
            kind,
            r_star,
            horizon,
            format!(
                "K_rad + G = {:e} > 0 at t = {}",
                check.max_hypothesis_violation, check.hypothesis_argmax_t
            ),
        ));
    }
    let sol = solve_jacobi(g, horizon, opts.comparison.step, model.base().dim())?;
    let n = opts.tail_samples.max(3);
    let mut nodes = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let t = r_star + (horizon - r_star) * i as f64 / n as f64;
        let mut c = sol.ell(t)?;
        if model.fiber().is_some() {
            c += model.mean_curvature_radial(t)?;
        }
        nodes.push(t);
        values.push(c);
    }
    Ok(Certificate::from_tail(
        kind,
        &nodes,
        &values,
        horizon,
        format!("driving function ell + H with G = {}", g),
    ))
}
