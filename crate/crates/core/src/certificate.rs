//! Verdict objects for discreteness and comparison claims.
//!
//! A finite computation cannot see infinity, so every certificate is tied to
//! the horizon it was checked on.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateKind {
    HProper,
    LProper,
    RadialCurvature,
    Brooks,
}

impl CertificateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CertificateKind::HProper => "h-proper",
            CertificateKind::LProper => "l-proper",
            CertificateKind::RadialCurvature => "radial-curvature",
            CertificateKind::Brooks => "brooks",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    CertifiedToHorizon,
    NotCertified,
    HypothesisFailed,
}

impl Verdict {
    pub const ALL: [Verdict; 3] = [
        Verdict::CertifiedToHorizon,
        Verdict::NotCertified,
        Verdict::HypothesisFailed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::CertifiedToHorizon => "certified-to-horizon",
            Verdict::NotCertified => "not-certified",
            Verdict::HypothesisFailed => "hypothesis-failed",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for CertificateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Shape of a sampled driving function on a tail `[r_star, horizon]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailTrend {
    /// Nondecreasing at every sample, up to rounding.
    pub monotone_increasing: bool,
    pub first_half_increase: f64,
    pub second_half_increase: f64,
    /// Still growing at a fixed fraction of its earlier rate.
    pub unbounded_trend: bool,
}

/// Growth in the second half of the tail must be at least this fraction of
/// the growth in the first half for a trend to count as unbounded.
pub const SATURATION_RATIO: f64 = 0.25;

impl TailTrend {
    pub fn of(values: &[f64]) -> TailTrend {
        let n = values.len();
        if n < 3 {
            return TailTrend {
                monotone_increasing: false,
                first_half_increase: 0.0,
                second_half_increase: 0.0,
                unbounded_trend: false,
            };
        }
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let slack = 64.0 * f64::EPSILON * scale.max(1.0);
        let monotone_increasing = values.windows(2).all(|w| w[1] >= w[0] - slack);
        let mid = n / 2;
        let first = values[mid] - values[0];
        let second = values[n - 1] - values[mid];
        TailTrend {
            monotone_increasing,
            first_half_increase: first,
            second_half_increase: second,
            unbounded_trend: monotone_increasing
                && first > 0.0
                && second >= SATURATION_RATIO * first,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub verdict: Verdict,
    /// Present iff the verdict is `certified-to-horizon`.
    pub bound: Option<f64>,
    #[serde(with = "crate::nonfinite")]
    pub r_star: f64,
    pub horizon: f64,
    /// Infimum of the driving function on `[r_star, horizon]`.
    #[serde(with = "crate::nonfinite")]
    pub inf_driving: f64,
    /// Supremum of the driving function on `[r_star, horizon]`.
    #[serde(with = "crate::nonfinite")]
    pub sup_driving: f64,
    pub trend: TailTrend,
    /// `(t, driving(t))` on a coarse subsample of the tail.
    pub witness: Vec<(f64, f64)>,
    pub note: String,
}

impl Certificate {
    /// Builds a certificate from a sampled driving function on the tail,
    /// attaching `(1/4)·inf²` when the trend certifies properness.
    pub fn from_tail(
        kind: CertificateKind,
        nodes: &[f64],
        values: &[f64],
        horizon: f64,
        note: impl Into<String>,
    ) -> Certificate {
        let trend = TailTrend::of(values);
        let inf = values.iter().copied().fold(f64::INFINITY, f64::min);
        let sup = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let certified = trend.unbounded_trend && inf > 0.0;
        let stride = (values.len() / 20).max(1);
        let mut witness: Vec<(f64, f64)> = nodes
            .iter()
            .zip(values)
            .step_by(stride)
            .map(|(&t, &v)| (t, v))
            .collect();
        if let (Some(&t), Some(&v)) = (nodes.last(), values.last()) {
            if witness.last().map(|w| w.0) != Some(t) {
                witness.push((t, v));
            }
        }
        Certificate {
            kind,
            verdict: if certified {
                Verdict::CertifiedToHorizon
            } else {
                Verdict::NotCertified
            },
            bound: certified.then(|| 0.25 * inf * inf),
            r_star: nodes.first().copied().unwrap_or(f64::NAN),
            horizon,
            inf_driving: inf,
            sup_driving: sup,
            trend,
            witness,
            note: note.into(),
        }
    }

    pub fn hypothesis_failed(
        kind: CertificateKind,
        r_star: f64,
        horizon: f64,
        note: impl Into<String>,
    ) -> Certificate {
        Certificate {
            kind,
            verdict: Verdict::HypothesisFailed,
            bound: None,
            r_star,
            horizon,
            inf_driving: f64::NAN,
            sup_driving: f64::NAN,
            trend: TailTrend::of(&[]),
            witness: Vec::new(),
            note: note.into(),
        }
    }
}
