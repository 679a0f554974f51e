//! Lower bounds for fundamental tones from radial vector fields
//! `X = a(t) ∂_t`, and the fiber-volume transfer inequality between base and
//! total-space tones.
//!
//! Both estimators sit behind [`LowerBoundEstimator`] and can be looked up
//! by name.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{ModelError, RadialWeight, SubmersionModel};
use crate::profiles::Profile;
use crate::sturm_liouville::{InnerBoundary, RadialDomain};
use crate::tone::{Sampled, ToneResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("hypothesis failed: {0}")]
    HypothesisFailed(String),
    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error("field is not finite at t = {t}")]
    FieldNotFinite { t: f64 },
    #[error("eigenfunction changes sign near t = {t}")]
    SignChange { t: f64 },
    #[error("no samples of the field fall inside the interval")]
    NoSamples,
    #[error("cutoff must lie in (0, 1), got {0}")]
    BadCutoff(f64),
    #[error("unknown estimator `{0}`")]
    UnknownEstimator(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `[a, b]` with `b = ∞` allowed for exterior domains.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub a: f64,
    #[serde(with = "crate::nonfinite")]
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Interval, BoundError> {
        if !(a.is_finite() && a >= 0.0 && b > a) {
            return Err(BoundError::InvalidInterval { a, b });
        }
        Ok(Interval { a, b })
    }

    pub fn exterior(a: f64) -> Result<Interval, BoundError> {
        Interval::new(a, f64::INFINITY)
    }

    pub fn is_exterior(&self) -> bool {
        self.b.is_infinite()
    }

    /// Interval shrunk by `fraction` of its length, half on each side.
    pub fn shrink(&self, fraction: f64) -> Interval {
        let cut = 0.5 * fraction * (self.b - self.a);
        Interval {
            a: self.a + cut,
            b: self.b - cut,
        }
    }
}

impl From<RadialDomain> for Interval {
    fn from(d: RadialDomain) -> Interval {
        Interval { a: d.a, b: d.b }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundOptions {
    /// Uniform samples per interval.
    pub samples: usize,
    /// Length sampled on an exterior interval before limit analysis.
    pub exterior_span: f64,
    /// Fraction of the samples at the far end used for limit analysis.
    pub tail_fraction: f64,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions {
            samples: 10_000,
            exterior_span: 50.0,
            tail_fraction: 0.1,
        }
    }
}

/// Coefficient `a(t)` of a radial field `X = a(t) ∂_t`.
#[derive(Clone, Debug)]
pub enum RadialField {
    Profile(Profile),
    /// Values on increasing nodes; derivatives by finite differences.
    Sampled(Sampled),
}

impl RadialField {
    /// `X = ∂_t`
    pub fn radial() -> RadialField {
        RadialField::Profile(crate::profiles::constant(1.0))
    }

    pub fn zero() -> RadialField {
        RadialField::Profile(Profile::parse("0").expect("constant parses"))
    }

    pub fn parse(src: &str) -> Result<RadialField, crate::profiles::ProfileError> {
        Ok(RadialField::Profile(Profile::parse(src)?))
    }

    /// `(t, a(t), a′(t))` at the sample points inside `[a, b]`.
    fn samples(
        &self,
        a: f64,
        b: f64,
        count: usize,
        interior_only: bool,
    ) -> Result<Vec<(f64, f64, f64)>, BoundError> {
        match self {
            RadialField::Profile(p) => {
                let mut out = Vec::with_capacity(count + 1);
                let points: Vec<f64> = if interior_only {
                    (0..count)
                        .map(|i| a + (b - a) * (i as f64 + 0.5) / count as f64)
                        .collect()
                } else {
                    (0..=count)
                        .map(|i| a + (b - a) * i as f64 / count as f64)
                        .collect()
                };
                let last = points.len() - 1;
                for (i, &t) in points.iter().enumerate() {
                    let v = p.value(t);
                    let d = p.derivative(t);
                    match (v, d) {
                        (Ok(v), Ok(d)) if v.is_finite() && d.is_finite() => out.push((t, v, d)),
                        // endpoint singularities only enter as limits
                        _ if !interior_only && (i == 0 || i == last) => {}
                        _ => return Err(BoundError::FieldNotFinite { t }),
                    }
                }
                Ok(out)
            }
            RadialField::Sampled(s) => {
                let n = s.len();
                let mut out = Vec::new();
                for i in 0..n {
                    let t = s.nodes[i];
                    if t < a || t > b {
                        continue;
                    }
                    out.push((t, s.values[i], sampled_derivative(s, i)));
                }
                if out.is_empty() {
                    return Err(BoundError::NoSamples);
                }
                Ok(out)
            }
        }
    }
}

/// Second-order difference on possibly nonuniform nodes.
fn sampled_derivative(s: &Sampled, i: usize) -> f64 {
    let n = s.len();
    let (x, y) = (&s.nodes, &s.values);
    let (l, m, r) = if i == 0 {
        (0, 1, 2)
    } else if i == n - 1 {
        (n - 3, n - 2, n - 1)
    } else {
        (i - 1, i, i + 1)
    };
    // derivative of the interpolating parabola through l, m, r at x[i]
    let t = x[i];
    let dl = ((t - x[m]) + (t - x[r])) / ((x[l] - x[m]) * (x[l] - x[r]));
    let dm = ((t - x[l]) + (t - x[r])) / ((x[m] - x[l]) * (x[m] - x[r]));
    let dr = ((t - x[l]) + (t - x[m])) / ((x[r] - x[l]) * (x[r] - x[m]));
    dl * y[l] + dm * y[m] + dr * y[r]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Witnesses {
    Divergence { inf_div: f64, sup_norm: f64 },
    LogDerivative { inf_value: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub estimator: String,
    pub bound: f64,
    pub witnesses: Witnesses,
    pub samples: usize,
    pub interval: Interval,
    /// The infimum (or supremum) came from the limit analysis at the far end.
    pub tail_limit_used: bool,
}

/// Extremum of a sampled sequence, refined on exterior intervals by a limit
/// estimate when the tail is monotone toward the extremum.
struct Extremum {
    value: f64,
    from_tail: bool,
}

/// Limit of the last `tail` samples at the far end: Aitken Δ² for
/// geometric convergence, quadratic extrapolation in `1/t` for algebraic
/// convergence. `None` if the tail is not monotone, `Some(±∞)` if it is
/// monotone without slowing down.
fn tail_limit(nodes: &[f64], values: &[f64], tail: usize) -> Option<f64> {
    let n = values.len();
    let tail = tail.clamp(3, n);
    let seg = &values[n - tail..];
    let ts = &nodes[n - tail..];
    let slack = 64.0 * f64::EPSILON * seg.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let decreasing = seg.windows(2).all(|w| w[1] <= w[0] + slack);
    let increasing = seg.windows(2).all(|w| w[1] >= w[0] - slack);
    if !(decreasing || increasing) {
        return None;
    }
    let k = (tail - 1) / 2;
    let idx = [tail - 1 - 2 * k, tail - 1 - k, tail - 1];
    let (x0, x1, x2) = (seg[idx[0]], seg[idx[1]], seg[idx[2]]);
    let (d1, d2) = (x1 - x0, x2 - x1);
    if d2.abs() <= slack {
        return Some(x2);
    }
    let ratio = d2 / d1;
    if ratio > 0.0 && ratio < 0.5 {
        return Some(x2 + d2 * ratio / (1.0 - ratio));
    }
    // ratios near 1 mean no visible slowdown
    if !(ratio > 0.0 && ratio < 0.95) {
        return Some(if decreasing {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        });
    }
    // Lagrange extrapolation to 1/t = 0
    let s: Vec<f64> = idx.iter().map(|&i| 1.0 / ts[i]).collect();
    let y = [x0, x1, x2];
    let mut limit = 0.0;
    for i in 0..3 {
        let mut basis = 1.0;
        for j in 0..3 {
            if i != j {
                basis *= s[j] / (s[j] - s[i]);
            }
        }
        limit += y[i] * basis;
    }
    Some(limit)
}

fn infimum(nodes: &[f64], values: &[f64], exterior: bool, tail: usize) -> Extremum {
    let sampled = values.iter().copied().fold(f64::INFINITY, f64::min);
    if exterior {
        if let Some(limit) = tail_limit(nodes, values, tail) {
            if limit < sampled {
                return Extremum {
                    value: limit,
                    from_tail: true,
                };
            }
        }
    }
    Extremum {
        value: sampled,
        from_tail: false,
    }
}

fn supremum(nodes: &[f64], values: &[f64], exterior: bool, tail: usize) -> Extremum {
    let negated: Vec<f64> = values.iter().map(|v| -v).collect();
    let e = infimum(nodes, &negated, exterior, tail);
    Extremum {
        value: -e.value,
        from_tail: e.from_tail,
    }
}

struct Evaluated {
    t: Vec<f64>,
    a: Vec<f64>,
    div: Vec<f64>,
}

fn evaluate(
    weight: &dyn RadialWeight,
    interval: Interval,
    field: &RadialField,
    opts: &BoundOptions,
    interior_only: bool,
) -> Result<Evaluated, BoundError> {
    let b = if interval.is_exterior() {
        interval.a + opts.exterior_span
    } else {
        interval.b
    };
    let samples = field.samples(interval.a, b, opts.samples, interior_only)?;
    let mut out = Evaluated {
        t: Vec::with_capacity(samples.len()),
        a: Vec::with_capacity(samples.len()),
        div: Vec::with_capacity(samples.len()),
    };
    for (t, a, da) in samples {
        // (w a)′/w = a′ + a (log w)′
        let div = match weight.log_weight_derivative(t) {
            Ok(g) if g.is_finite() => da + a * g,
            _ if a == 0.0 && da.is_finite() => da,
            _ if !interior_only && (t == interval.a || t == b) => continue,
            Ok(_) => return Err(BoundError::FieldNotFinite { t }),
            Err(e) => return Err(e.into()),
        };
        out.t.push(t);
        out.a.push(a);
        out.div.push(div);
    }
    if out.t.is_empty() {
        return Err(BoundError::NoSamples);
    }
    Ok(out)
}

fn tail_len(n: usize, opts: &BoundOptions) -> usize {
    ((n as f64 * opts.tail_fraction) as usize).max(3)
}

/// `λ*(Ω) ≥ (1/4)·(inf div X / sup |X|)²`, valid when `inf div X > 0` and
/// `sup |X| < ∞`. `div X = a′ + a (log w)′` for the weight of the space the
/// tone lives on.
pub fn divergence_bound(
    weight: &dyn RadialWeight,
    interval: Interval,
    field: &RadialField,
    opts: &BoundOptions,
) -> Result<BoundReport, BoundError> {
    let ev = evaluate(weight, interval, field, opts, false)?;
    let tail = tail_len(ev.t.len(), opts);
    let exterior = interval.is_exterior();
    let inf_div = infimum(&ev.t, &ev.div, exterior, tail);
    let norms: Vec<f64> = ev.a.iter().map(|a| a.abs()).collect();
    let sup_norm = supremum(&ev.t, &norms, exterior, tail);
    if !(inf_div.value > 0.0) {
        return Err(BoundError::HypothesisFailed(format!(
            "inf div X = {} is not positive",
            inf_div.value
        )));
    }
    if !sup_norm.value.is_finite() {
        return Err(BoundError::HypothesisFailed("sup |X| is not finite".into()));
    }
    let ratio = inf_div.value / sup_norm.value;
    Ok(BoundReport {
        estimator: DivergenceEstimator.name().into(),
        bound: 0.25 * ratio * ratio,
        witnesses: Witnesses::Divergence {
            inf_div: inf_div.value,
            sup_norm: sup_norm.value,
        },
        samples: ev.t.len(),
        interval,
        tail_limit_used: inf_div.from_tail || sup_norm.from_tail,
    })
}

/// `λ*(Ω) ≥ inf (div X − |X|²)`, sampled at interior points.
pub fn logderivative_bound(
    weight: &dyn RadialWeight,
    interval: Interval,
    field: &RadialField,
    opts: &BoundOptions,
) -> Result<BoundReport, BoundError> {
    let ev = evaluate(weight, interval, field, opts, true)?;
    let values: Vec<f64> = ev.div.iter().zip(&ev.a).map(|(d, a)| d - a * a).collect();
    let inf = infimum(
        &ev.t,
        &values,
        interval.is_exterior(),
        tail_len(values.len(), opts),
    );
    Ok(BoundReport {
        estimator: LogDerivativeEstimator.name().into(),
        bound: inf.value,
        witnesses: Witnesses::LogDerivative {
            inf_value: inf.value,
        },
        samples: values.len(),
        interval,
        tail_limit_used: inf.from_tail,
    })
}

pub trait LowerBoundEstimator: Send + Sync {
    fn name(&self) -> &'static str;

    fn estimate(
        &self,
        weight: &dyn RadialWeight,
        interval: Interval,
        field: &RadialField,
        opts: &BoundOptions,
    ) -> Result<BoundReport, BoundError>;
}

pub struct DivergenceEstimator;

impl LowerBoundEstimator for DivergenceEstimator {
    fn name(&self) -> &'static str {
        "divergence"
    }

    fn estimate(
        &self,
        weight: &dyn RadialWeight,
        interval: Interval,
        field: &RadialField,
        opts: &BoundOptions,
    ) -> Result<BoundReport, BoundError> {
        divergence_bound(weight, interval, field, opts)
    }
}

pub struct LogDerivativeEstimator;

impl LowerBoundEstimator for LogDerivativeEstimator {
    fn name(&self) -> &'static str {
        "log-derivative"
    }

    fn estimate(
        &self,
        weight: &dyn RadialWeight,
        interval: Interval,
        field: &RadialField,
        opts: &BoundOptions,
    ) -> Result<BoundReport, BoundError> {
        logderivative_bound(weight, interval, field, opts)
    }
}

pub fn estimators() -> Vec<Box<dyn LowerBoundEstimator>> {
    vec![
        Box::new(DivergenceEstimator),
        Box::new(LogDerivativeEstimator),
    ]
}

pub fn estimator(name: &str) -> Result<Box<dyn LowerBoundEstimator>, BoundError> {
    estimators()
        .into_iter()
        .find(|e| e.name() == name)
        .ok_or_else(|| BoundError::UnknownEstimator(name.to_string()))
}

pub const DEFAULT_CUTOFF: f64 = 0.05;

/// `a = −u′/u` from a computed eigenfunction, kept where `u > cutoff·max u`.
/// Derivatives use a five-point stencil; a regular pole is handled by even
/// reflection.
pub fn eigenfield_from_tone(result: &ToneResult, cutoff: f64) -> Result<RadialField, BoundError> {
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(BoundError::BadCutoff(cutoff));
    }
    let u = &result.eigenfunction;
    let n = u.len();
    let max = u.values.iter().copied().fold(0.0f64, f64::max);
    let min = u.values.iter().copied().fold(0.0f64, f64::min);
    if !(max > 0.0) || min < -1e-12 * max {
        let i = u.values.iter().position(|&v| v < -1e-12 * max).unwrap_or(0);
        return Err(BoundError::SignChange { t: u.nodes[i] });
    }
    let h = (u.nodes[n - 1] - u.nodes[0]) / (n - 1) as f64;
    let pole = result.domain.inner == InnerBoundary::PoleRegular;
    let at = |i: isize| -> Option<f64> {
        if i < 0 {
            // staggered nodes at ±h/2 mirror each other across the pole
            return pole.then(|| u.values[(-i - 1) as usize]);
        }
        u.values.get(i as usize).copied()
    };
    let mut nodes = Vec::new();
    let mut values = Vec::new();
    for i in 0..n {
        if !(u.values[i] > cutoff * max) {
            continue;
        }
        let k = i as isize;
        let (Some(m2), Some(m1), Some(p1), Some(p2)) = (at(k - 2), at(k - 1), at(k + 1), at(k + 2))
        else {
            continue;
        };
        let du = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h);
        nodes.push(u.nodes[i]);
        values.push(-du / u.values[i]);
    }
    if nodes.len() < 3 {
        return Err(BoundError::NoSamples);
    }
    Ok(RadialField::Sampled(Sampled { nodes, values }))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeRatioReport {
    pub inf_volume: f64,
    pub sup_volume: f64,
    pub base_tone: f64,
    pub total_tone: f64,
    /// `inf vol · λ*(Ω̃)`
    pub lhs: f64,
    /// `sup vol · λ*(Ω)`
    pub rhs: f64,
    /// `inf vol · err(Ω̃) + sup vol · err(Ω)`
    pub tolerance: f64,
    /// `rhs − lhs`, divided by `inf vol` so it survives underflow.
    pub relative_slack: f64,
    pub passed: bool,
}

/// `[inf vol 𝓕]·λ*(Ω̃) ≤ [sup vol 𝓕]·λ*(Ω)` with fiber volumes sampled on
/// the closure of `Ω`.
pub fn volume_ratio_check(
    model: &SubmersionModel,
    domain: RadialDomain,
    base: &ToneResult,
    total: &ToneResult,
    samples: usize,
) -> Result<VolumeRatioReport, BoundError> {
    let samples = samples.max(2);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..=samples {
        let t = domain.a + (domain.b - domain.a) * i as f64 / samples as f64;
        let lv = model.log_fiber_volume(t)?;
        lo = lo.min(lv);
        hi = hi.max(lv);
    }
    let ratio = (hi - lo).exp();
    let relative_slack = ratio * base.lambda - total.lambda;
    let relative_tolerance = total.error_estimate + ratio * base.error_estimate;
    let (inf_volume, sup_volume) = (lo.exp(), hi.exp());
    Ok(VolumeRatioReport {
        inf_volume,
        sup_volume,
        base_tone: base.lambda,
        total_tone: total.lambda,
        lhs: inf_volume * total.lambda,
        rhs: sup_volume * base.lambda,
        tolerance: inf_volume * relative_tolerance,
        relative_slack,
        passed: relative_slack >= -relative_tolerance,
    })
}
