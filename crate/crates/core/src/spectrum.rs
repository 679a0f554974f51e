//! Bottom of the essential spectrum through exterior tones `λ*([R, ∞))`,
//! discreteness certificates from the growth of `h` or `l`, the transfer of
//! spectral information from base to total space, and the volume-growth
//! exponent of geodesic balls.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certificate::{Certificate, CertificateKind, Verdict};
use crate::models::{ModelError, RadialWeight, SubmersionModel};
use crate::sturm_liouville::RadialDomain;
use crate::tone::{weighted_tone, Mode, ToneError, ToneOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("R sequence must be nonempty, positive and strictly increasing")]
    BadSequence,
    #[error("invalid truncation policy: {0}")]
    BadPolicy(String),
    #[error(
        "truncation budget exhausted before the stop tolerance was met for R = {unconverged:?}"
    )]
    BudgetExhausted {
        unconverged: Vec<f64>,
        partial: Box<EssEstimate>,
    },
    #[error("tone at R = {r}, R_cut = {r_cut}: {source}")]
    Tone {
        r: f64,
        r_cut: f64,
        #[source]
        source: ToneError,
    },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// How each exterior `[R, ∞)` is truncated: `[R, R + L]` with `L` doubling
/// from `initial_length` up to `max_length`, stopping once consecutive tones
/// differ by less than `max(rel_tol·λ, abs_tol)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationPolicy {
    pub initial_length: f64,
    pub max_length: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Exterior tones above this, increasing over three consecutive `R`,
    /// declare the spectrum discrete.
    pub divergence_threshold: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            initial_length: 8.0,
            max_length: 1024.0,
            rel_tol: 5e-3,
            abs_tol: 5e-4,
            divergence_threshold: 1e3,
        }
    }
}

impl TruncationPolicy {
    fn validate(&self) -> Result<(), SpectrumError> {
        let ok = self.initial_length > 0.0
            && self.max_length >= self.initial_length
            && self.max_length.is_finite()
            && self.rel_tol >= 0.0
            && self.abs_tol >= 0.0
            && (self.rel_tol > 0.0 || self.abs_tol > 0.0)
            && self.divergence_threshold > 0.0;
        if ok {
            Ok(())
        } else {
            Err(SpectrumError::BadPolicy(format!("{self:?}")))
        }
    }

    /// Truncation lengths `L₀, 2L₀, …` up to `max_length`.
    pub fn lengths(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut l = self.initial_length;
        while l <= self.max_length * (1.0 + 1e-12) {
            out.push(l);
            l *= 2.0;
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub r_cut: f64,
    pub lambda: f64,
    pub err: f64,
}

/// `λ*([R, ∞))` approximated from above by Dirichlet truncations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExteriorTone {
    pub r: f64,
    pub sweep: Vec<SweepPoint>,
    /// Last truncation value.
    pub lambda: f64,
    /// Last Cauchy residual of the sweep plus the tone's own error estimate.
    #[serde(with = "crate::nonfinite")]
    pub error: f64,
    pub converged: bool,
    pub above_threshold: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EssOutcome {
    /// Estimate of `inf σ_ess` from the largest `R`.
    Bottom {
        value: f64,
        #[serde(with = "crate::nonfinite")]
        error: f64,
    },
    Discrete {
        threshold: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EssEstimate {
    pub points: Vec<ExteriorTone>,
    pub outcome: EssOutcome,
    pub policy: TruncationPolicy,
}

impl EssEstimate {
    pub fn is_discrete(&self) -> bool {
        matches!(self.outcome, EssOutcome::Discrete { .. })
    }

    pub fn bottom(&self) -> Option<f64> {
        match self.outcome {
            EssOutcome::Bottom { value, .. } => Some(value),
            EssOutcome::Discrete { .. } => None,
        }
    }

    /// Exterior tones in order of `R`.
    pub fn lambdas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lambda).collect()
    }
}

fn exterior_tone(
    weight: &dyn RadialWeight,
    r: f64,
    policy: &TruncationPolicy,
    opts: &ToneOptions,
) -> Result<ExteriorTone, SpectrumError> {
    let mut sweep: Vec<SweepPoint> = Vec::new();
    let mut converged = false;
    let mut residual = f64::INFINITY;
    for l in policy.lengths() {
        let r_cut = r + l;
        let domain = RadialDomain::annulus(r, r_cut).map_err(|e| SpectrumError::Tone {
            r,
            r_cut,
            source: e.into(),
        })?;
        let tone = weighted_tone(weight, &|_| Ok(None), domain, Mode::INVARIANT, opts)
            .map_err(|source| SpectrumError::Tone { r, r_cut, source })?;
        if let Some(prev) = sweep.last() {
            residual = (prev.lambda - tone.lambda).abs();
            converged = residual < (policy.rel_tol * tone.lambda).max(policy.abs_tol);
        }
        sweep.push(SweepPoint {
            r_cut,
            lambda: tone.lambda,
            err: tone.error_estimate,
        });
        if converged {
            break;
        }
    }
    let last = *sweep.last().expect("at least one truncation");
    Ok(ExteriorTone {
        r,
        lambda: last.lambda,
        error: residual + last.err,
        converged,
        above_threshold: last.lambda > policy.divergence_threshold,
        sweep,
    })
}

/// `inf σ_ess = sup_R λ*(M ∖ B(R))` sampled along `r_sequence`. Exterior
/// tones for different `R` run in parallel and are collected in order.
///
/// The spectrum is declared discrete when the last three exterior tones
/// increase and the last one exceeds the divergence threshold. Otherwise the
/// value at the largest `R` is the bottom estimate, with the sweep residual
/// and the change from the previous `R` as error bar.
pub fn ess_bottom_estimate(
    weight: &dyn RadialWeight,
    r_sequence: &[f64],
    policy: &TruncationPolicy,
    opts: &ToneOptions,
) -> Result<EssEstimate, SpectrumError> {
    if r_sequence.is_empty()
        || r_sequence.iter().any(|r| !(r.is_finite() && *r > 0.0))
        || r_sequence.windows(2).any(|w| !(w[1] > w[0]))
    {
        return Err(SpectrumError::BadSequence);
    }
    policy.validate()?;
    let points = r_sequence
        .par_iter()
        .map(|&r| exterior_tone(weight, r, policy, opts))
        .collect::<Result<Vec<_>, _>>()?;

    let n = points.len();
    let rising = n >= 3
        && points[n - 3].lambda < points[n - 2].lambda
        && points[n - 2].lambda < points[n - 1].lambda;
    let last = &points[n - 1];
    let outcome = if rising && last.above_threshold {
        EssOutcome::Discrete {
            threshold: policy.divergence_threshold,
        }
    } else {
        let trend = if n >= 2 {
            (last.lambda - points[n - 2].lambda).abs()
        } else {
            0.0
        };
        EssOutcome::Bottom {
            value: last.lambda,
            error: last.error + trend,
        }
    };
    let estimate = EssEstimate {
        points,
        outcome,
        policy: *policy,
    };
    let unconverged: Vec<f64> = estimate
        .points
        .iter()
        .filter(|p| !p.converged)
        .map(|p| p.r)
        .collect();
    if !unconverged.is_empty() {
        return Err(SpectrumError::BudgetExhausted {
            unconverged,
            partial: Box::new(estimate),
        });
    }
    Ok(estimate)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DrivingFunction {
    /// `h = Δρ + ⟨∇ρ, dπH⟩`
    H,
    /// `l = Δρ − |H|`
    L,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateOptions {
    pub r_star: f64,
    pub horizon: f64,
    pub samples: usize,
}

impl CertificateOptions {
    pub fn new(r_star: f64, horizon: f64) -> CertificateOptions {
        CertificateOptions {
            r_star,
            horizon,
            samples: 1000,
        }
    }
}

/// Discreteness via properness of `h` (or `l`): applying the divergence
/// bound to `X = ∇ρ` on `[R*, ∞)` gives `λ*(M ∖ B(R*)) ≥ (1/4)(inf h)²`,
/// which grows without bound when `h` does. Growth is checked on
/// `[R*, horizon]` only.
pub fn discreteness_certificate(
    model: &SubmersionModel,
    mode: DrivingFunction,
    opts: &CertificateOptions,
) -> Result<Certificate, SpectrumError> {
    let CertificateOptions {
        r_star,
        horizon,
        samples,
    } = *opts;
    if !(r_star > 0.0 && horizon > r_star && horizon.is_finite() && samples >= 3) {
        return Err(SpectrumError::InvalidParameters(format!(
            "need 0 < R* < horizon, got R* = {r_star}, horizon = {horizon}"
        )));
    }
    let mut nodes = Vec::with_capacity(samples + 1);
    let mut values = Vec::with_capacity(samples + 1);
    for i in 0..=samples {
        let t = r_star + (horizon - r_star) * i as f64 / samples as f64;
        let v = match mode {
            DrivingFunction::H => model.h_function(t)?,
            DrivingFunction::L => model.l_function(t)?,
        };
        nodes.push(t);
        values.push(v);
    }
    let (kind, name) = match mode {
        DrivingFunction::H => (CertificateKind::HProper, "h"),
        DrivingFunction::L => (CertificateKind::LProper, "l"),
    };
    Ok(Certificate::from_tail(
        kind,
        &nodes,
        &values,
        horizon,
        format!("driving function {name} on [{r_star}, {horizon}]"),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransferKind {
    /// Minimal fibers: `inf σ_ess(M) = inf σ_ess(N)`.
    Equality,
    /// Bounded fiber volume: `inf vol · inf σ_ess(M) ≤ sup vol · inf σ_ess(N)`.
    Inequality,
    NoTransfer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub kind: TransferKind,
    pub base_discrete: bool,
    pub base_bottom: Option<f64>,
    /// Total-space bottom under equality.
    pub total_bottom: Option<f64>,
    /// Upper bound on the total-space bottom from the inequality.
    pub total_upper_bound: Option<f64>,
    pub total_discrete: Option<bool>,
    /// `log` of the fiber-volume extrema on the sampled exterior.
    pub log_inf_volume: Option<f64>,
    pub log_sup_volume: Option<f64>,
    /// Volume ratio too large (or volumes too small) for a useful inequality.
    pub degenerate: bool,
    pub statement: String,
}

/// Volume ratios beyond this are reported as degenerate.
pub const DEGENERATE_RATIO: f64 = 1e12;

/// Carries the base estimate to the total space. Fiber volumes are sampled
/// on `[R_min, horizon]`, `R_min` the smallest radius of the estimate.
pub fn submersion_transfer(
    base_est: &EssEstimate,
    model: &SubmersionModel,
    horizon: f64,
) -> Result<TransferReport, SpectrumError> {
    let base_bottom = base_est.bottom();
    let base_discrete = base_est.is_discrete();
    let mut report = TransferReport {
        kind: TransferKind::NoTransfer,
        base_discrete,
        base_bottom,
        total_bottom: None,
        total_upper_bound: None,
        total_discrete: None,
        log_inf_volume: None,
        log_sup_volume: None,
        degenerate: false,
        statement: String::new(),
    };
    let Some(fiber) = model.fiber() else {
        report.statement = "no fiber: nothing to transfer".into();
        return Ok(report);
    };
    if fiber.is_minimal() {
        report.kind = TransferKind::Equality;
        report.total_discrete = Some(base_discrete);
        report.total_bottom = base_bottom;
        report.statement = match base_bottom {
            Some(v) => format!("minimal fibers: inf σ_ess(M) = inf σ_ess(N) ≈ {v}"),
            None => "minimal fibers: N discrete, hence M discrete".into(),
        };
        return Ok(report);
    }

    let r0 = base_est.points.first().map(|p| p.r).unwrap_or(0.0);
    if !(horizon > r0) {
        return Err(SpectrumError::InvalidParameters(format!(
            "horizon {horizon} must exceed the smallest radius {r0}"
        )));
    }
    let samples = 10_000;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..=samples {
        let t = r0 + (horizon - r0) * i as f64 / samples as f64;
        let lv = model.log_fiber_volume(t)?;
        lo = lo.min(lv);
        hi = hi.max(lv);
    }
    report.kind = TransferKind::Inequality;
    report.log_inf_volume = Some(lo);
    report.log_sup_volume = Some(hi);
    let log_ratio = hi - lo;
    report.degenerate = !(log_ratio < DEGENERATE_RATIO.ln());
    let ratio = log_ratio.exp();
    report.total_upper_bound = match base_bottom {
        Some(v) if !report.degenerate => Some(ratio * v),
        _ => None,
    };
    report.statement = if report.degenerate {
        format!(
            "fiber volume ratio e^{log_ratio:.1} on [{r0}, {horizon}]: volumes not bounded away from 0 and ∞, transfer degenerate"
        )
    } else {
        match base_bottom {
            Some(v) => format!(
                "inf σ_ess(M) ≤ {:.6} (volume ratio {ratio:.6} × {v})",
                ratio * v
            ),
            None => "N discrete: the inequality gives no bound on inf σ_ess(M)".into(),
        }
    };
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BrooksVerdict {
    /// Infinite volume with finite exponential growth rate.
    EssentialSpectrumNonempty,
    Inconclusive,
}

impl BrooksVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            BrooksVerdict::EssentialSpectrumNonempty => "σ_ess nonempty (Brooks)",
            BrooksVerdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthSample {
    pub r: f64,
    pub log_volume: f64,
    /// `log vol(B(r)) / r`
    pub mu_hat: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrooksReport {
    pub r_max: f64,
    /// `log` of `vol(S^{n−1}) · vol(F)`.
    pub log_angular_constant: f64,
    pub tail: Vec<GrowthSample>,
    /// `(log V(r_max) − log V(0.8 r_max)) / (0.2 r_max)`
    #[serde(with = "crate::nonfinite")]
    pub mu_estimate: f64,
    /// Same slope over `[0.4, 0.6]·r_max`, to judge the trend.
    #[serde(with = "crate::nonfinite")]
    pub mu_earlier: f64,
    pub volume_diverges: bool,
    pub finite_growth: bool,
    pub verdict: BrooksVerdict,
    /// `μ²/4`, an upper bound for `inf σ_ess` when the verdict is positive.
    pub ess_upper_bound: Option<f64>,
    /// Radius where the quadrature stopped early, if it did.
    pub truncated_at: Option<f64>,
}

impl BrooksReport {
    pub fn certificate(&self) -> Certificate {
        let positive = self.verdict == BrooksVerdict::EssentialSpectrumNonempty;
        let nodes: Vec<f64> = self.tail.iter().map(|s| s.r).collect();
        let values: Vec<f64> = self.tail.iter().map(|s| s.mu_hat).collect();
        let mut c = Certificate::from_tail(
            CertificateKind::Brooks,
            &nodes,
            &values,
            self.r_max,
            format!(
                "{}; bound is the upper estimate μ²/4 for inf σ_ess",
                self.verdict.as_str()
            ),
        );
        c.verdict = if positive {
            Verdict::CertifiedToHorizon
        } else {
            Verdict::NotCertified
        };
        c.bound = self.ess_upper_bound;
        c
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Volume growth of balls about the pole, `vol(B(r)) = c ∫₀^r w(t) dt` with
/// `w` the volume density and `c = vol(S^{n−1})·vol(F)`. The integral is
/// accumulated in log space by the trapezoid rule.
pub fn brooks_growth(
    model: &SubmersionModel,
    r_max: f64,
    steps: usize,
) -> Result<BrooksReport, SpectrumError> {
    if !(r_max > 1.0 && r_max.is_finite() && steps >= 100) {
        return Err(SpectrumError::InvalidParameters(format!(
            "need r_max > 1 and at least 100 steps, got {r_max}, {steps}"
        )));
    }
    let mut log_c = model.base().sphere_volume().ln();
    if let Some(fiber) = model.fiber() {
        log_c += fiber.unit_fiber_volume().ln();
    }
    let h = r_max / steps as f64;
    let mut log_int = vec![f64::NEG_INFINITY; steps + 1];
    let mut prev = f64::NEG_INFINITY;
    let mut truncated_at = None;
    let mut last = steps;
    for i in 1..=steps {
        let t = i as f64 * h;
        let lw = match model.log_volume_density(t) {
            Ok(v) if v.is_finite() => v,
            _ => {
                truncated_at = Some(t);
                last = i - 1;
                break;
            }
        };
        let trapezoid = log_add(prev, lw) + (0.5 * h).ln();
        log_int[i] = log_add(log_int[i - 1], trapezoid);
        prev = lw;
    }
    if last < steps / 10 {
        return Err(SpectrumError::InvalidParameters(format!(
            "volume density undefined from t = {}",
            truncated_at.unwrap_or(0.0)
        )));
    }
    let r_end = last as f64 * h;
    let log_v = |r: f64| -> f64 {
        let i = ((r / h).round() as usize).min(last);
        log_c + log_int[i]
    };
    let tail: Vec<GrowthSample> = (0..=10)
        .map(|k| {
            let r = r_end * (0.5 + 0.05 * k as f64);
            let lv = log_v(r);
            GrowthSample {
                r,
                log_volume: lv,
                mu_hat: lv / r,
            }
        })
        .collect();
    let slope = |a: f64, b: f64| (log_v(b * r_end) - log_v(a * r_end)) / ((b - a) * r_end);
    let mu_estimate = slope(0.8, 1.0);
    let mu_earlier = slope(0.4, 0.6);
    let volume_diverges = log_v(r_end) - log_v(0.5 * r_end) > 0.5;
    let finite_growth = mu_estimate.is_finite() && mu_estimate <= 1.5 * mu_earlier + 0.1;
    let verdict = if volume_diverges && finite_growth && truncated_at.is_none() {
        BrooksVerdict::EssentialSpectrumNonempty
    } else {
        BrooksVerdict::Inconclusive
    };
    Ok(BrooksReport {
        r_max,
        log_angular_constant: log_c,
        tail,
        mu_estimate,
        mu_earlier,
        volume_diverges,
        finite_growth,
        verdict,
        ess_upper_bound: (verdict == BrooksVerdict::EssentialSpectrumNonempty)
            .then(|| 0.25 * mu_estimate * mu_estimate),
        truncated_at,
    })
}
