//! Scenario documents: a model plus a list of tasks, read from JSON.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tonelab::models::{ModelDescription, SubmersionModel};
use tonelab::profiles::Profile;
use tonelab::spectrum::{DrivingFunction, TruncationPolicy};
use tonelab::sturm_liouville::{InnerBoundary, RadialDomain};

/// A rejected field, addressed by its path in the document.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{path}: {message}")]
pub struct ValidationError {
    pub path: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> ValidationError {
        ValidationError {
            path: path.into(),
            message: message.into(),
        }
    }
}

type Check = Result<(), ValidationError>;

fn ensure(ok: bool, path: &str, message: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(ValidationError::new(path, message()))
    }
}

pub const MIN_GRID: usize = 16;
pub const MAX_GRID: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub model: ModelDescription,
    pub tasks: Vec<TaskSpec>,
}

impl ScenarioSpec {
    pub fn from_json(src: &str) -> Result<ScenarioSpec, ValidationError> {
        serde_json::from_str(src).map_err(|e| {
            ValidationError::new(
                format!("line {} column {}", e.line(), e.column()),
                e.to_string(),
            )
        })
    }

    /// Builds the model and checks every task, reporting the first
    /// offending field.
    pub fn validate(&self) -> Result<SubmersionModel, ValidationError> {
        ensure(!self.name.trim().is_empty(), "name", || {
            "must not be empty".into()
        })?;
        ensure(!self.tasks.is_empty(), "tasks", || {
            "at least one task is required".into()
        })?;
        let model = build_model(&self.model, "model")?;
        for (i, task) in self.tasks.iter().enumerate() {
            task.validate(&format!("tasks[{i}]"))?;
        }
        Ok(model)
    }
}

pub fn build_model(
    desc: &ModelDescription,
    path: &str,
) -> Result<SubmersionModel, ValidationError> {
    ensure((1..=64).contains(&desc.n), &format!("{path}.n"), || {
        format!("dimension must be in 1..=64, got {}", desc.n)
    })?;
    profile(&desc.f, &format!("{path}.f"))?;
    if let Some(psi) = &desc.psi {
        profile(psi, &format!("{path}.psi"))?;
    }
    desc.build()
        .map_err(|e| ValidationError::new(path, e.to_string()))
}

fn profile(src: &str, path: &str) -> Result<Profile, ValidationError> {
    Profile::resolve(src).map_err(|e| ValidationError::new(path, e.to_string()))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Space {
    /// The base `N` with weight `f^{n−1}`.
    #[default]
    Base,
    /// The total space `M` with weight `f^{n−1} ψ^m`.
    Total,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub a: f64,
    pub b: f64,
    /// Defaults to a regular pole when `a = 0`, Dirichlet otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<InnerBoundary>,
}

impl DomainSpec {
    pub fn resolve(&self, path: &str) -> Result<RadialDomain, ValidationError> {
        let inner = self.inner.unwrap_or(if self.a == 0.0 {
            InnerBoundary::PoleRegular
        } else {
            InnerBoundary::Dirichlet
        });
        ensure(
            self.a >= 0.0 && self.a.is_finite(),
            &format!("{path}.a"),
            || format!("must be finite and nonnegative, got {}", self.a),
        )?;
        ensure(
            self.b > self.a && self.b.is_finite(),
            &format!("{path}.b"),
            || format!("must be finite and exceed a = {}, got {}", self.a, self.b),
        )?;
        RadialDomain::new(self.a, self.b, inner)
            .map_err(|e| ValidationError::new(format!("{path}.inner"), e.to_string()))
    }
}

fn check_grid(grid: Option<usize>, path: &str) -> Check {
    match grid {
        Some(n) => ensure((MIN_GRID..=MAX_GRID).contains(&n), path, || {
            format!("must be in {MIN_GRID}..={MAX_GRID}, got {n}")
        }),
        None => Ok(()),
    }
}

fn check_tol(tol: Option<f64>, path: &str) -> Check {
    match tol {
        Some(t) => ensure(t > 0.0 && t <= 1e-2, path, || {
            format!("must be in (0, 1e-2], got {t}")
        }),
        None => Ok(()),
    }
}

fn check_positive(v: f64, path: &str) -> Check {
    ensure(v > 0.0 && v.is_finite(), path, || {
        format!("must be positive and finite, got {v}")
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskSpec {
    Tone(ToneParams),
    Ess(EssParams),
    Certify(CertifyParams),
    Compare(CompareParams),
    Verify(VerifyParams),
    Brooks(BrooksParams),
}

impl TaskSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TaskSpec::Tone(_) => "tone",
            TaskSpec::Ess(_) => "ess",
            TaskSpec::Certify(_) => "certify",
            TaskSpec::Compare(_) => "compare",
            TaskSpec::Verify(_) => "verify",
            TaskSpec::Brooks(_) => "brooks",
        }
    }

    pub fn validate(&self, path: &str) -> Check {
        match self {
            TaskSpec::Tone(p) => {
                p.domain.resolve(&format!("{path}.domain"))?;
                check_grid(p.grid, &format!("{path}.grid"))?;
                check_tol(p.tol, &format!("{path}.tol"))
            }
            TaskSpec::Ess(p) => {
                let rp = format!("{path}.radii");
                ensure(!p.radii.is_empty(), &rp, || "must not be empty".into())?;
                ensure(p.radii.len() <= 40, &rp, || {
                    format!("at most 40 radii, got {}", p.radii.len())
                })?;
                for (i, r) in p.radii.iter().enumerate() {
                    check_positive(*r, &format!("{rp}[{i}]"))?;
                    if i > 0 {
                        ensure(*r > p.radii[i - 1], &format!("{rp}[{i}]"), || {
                            "radii must be strictly increasing".into()
                        })?;
                    }
                }
                check_grid(p.grid, &format!("{path}.grid"))?;
                check_tol(p.tol, &format!("{path}.tol"))?;
                let pp = format!("{path}.policy");
                let pol = &p.policy;
                check_positive(pol.initial_length, &format!("{pp}.initial_length"))?;
                ensure(
                    pol.max_length >= pol.initial_length && pol.max_length.is_finite(),
                    &format!("{pp}.max_length"),
                    || "must be finite and at least initial_length".into(),
                )?;
                ensure(
                    pol.max_length / pol.initial_length <= 1e6,
                    &format!("{pp}.max_length"),
                    || "more than 20 doublings".into(),
                )?;
                ensure(
                    pol.rel_tol >= 0.0 && pol.abs_tol >= 0.0 && pol.rel_tol + pol.abs_tol > 0.0,
                    &pp,
                    || "rel_tol and abs_tol must be nonnegative, not both zero".into(),
                )?;
                check_positive(
                    pol.divergence_threshold,
                    &format!("{pp}.divergence_threshold"),
                )?;
                if let Some(h) = p.transfer_horizon {
                    ensure(
                        h > p.radii[0] && h.is_finite(),
                        &format!("{path}.transfer_horizon"),
                        || format!("must be finite and exceed the first radius, got {h}"),
                    )?;
                }
                Ok(())
            }
            TaskSpec::Certify(p) => {
                check_positive(p.r_star, &format!("{path}.r_star"))?;
                ensure(
                    p.horizon > p.r_star && p.horizon.is_finite(),
                    &format!("{path}.horizon"),
                    || {
                        format!(
                            "must be finite and exceed r_star = {}, got {}",
                            p.r_star, p.horizon
                        )
                    },
                )?;
                ensure(
                    (3..=1_000_000).contains(&p.samples),
                    &format!("{path}.samples"),
                    || format!("must be in 3..=1000000, got {}", p.samples),
                )?;
                match (&p.driving, &p.g) {
                    (Driving::Radial, None) => Err(ValidationError::new(
                        format!("{path}.g"),
                        "radial certificates need a comparison function g",
                    )),
                    (_, Some(g)) => profile(g, &format!("{path}.g")).map(|_| ()),
                    _ => Ok(()),
                }
            }
            TaskSpec::Compare(p) => {
                profile(&p.g, &format!("{path}.g"))?;
                check_positive(p.horizon, &format!("{path}.horizon"))?;
                ensure(
                    p.step > 0.0 && p.step <= p.horizon,
                    &format!("{path}.step"),
                    || format!("must be in (0, horizon], got {}", p.step),
                )?;
                ensure(p.horizon / p.step <= 1e8, &format!("{path}.step"), || {
                    "more than 1e8 steps".into()
                })?;
                check_positive(p.tolerance, &format!("{path}.tolerance"))
            }
            TaskSpec::Verify(p) => {
                profile(&p.a, &format!("{path}.a"))?;
                profile(&p.phi, &format!("{path}.phi"))?;
                let (lo, hi) = p.range;
                ensure(
                    lo > 0.0 && hi > lo && hi.is_finite(),
                    &format!("{path}.range"),
                    || format!("need 0 < start < end, got [{lo}, {hi}]"),
                )?;
                ensure(
                    (2..=1_000_000).contains(&p.samples),
                    &format!("{path}.samples"),
                    || format!("must be in 2..=1000000, got {}", p.samples),
                )?;
                check_positive(p.tolerance, &format!("{path}.tolerance"))
            }
            TaskSpec::Brooks(p) => {
                ensure(
                    p.r_max > 1.0 && p.r_max.is_finite(),
                    &format!("{path}.r_max"),
                    || format!("must be finite and exceed 1, got {}", p.r_max),
                )?;
                ensure(
                    (100..=10_000_000).contains(&p.steps),
                    &format!("{path}.steps"),
                    || format!("must be in 100..=10000000, got {}", p.steps),
                )
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToneParams {
    pub domain: DomainSpec,
    #[serde(default)]
    pub space: Space,
    #[serde(default)]
    pub k: usize,
    #[serde(default)]
    pub j: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default = "yes")]
    pub check_modes: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EssParams {
    pub radii: Vec<f64>,
    #[serde(default)]
    pub space: Space,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default)]
    pub policy: TruncationPolicy,
    /// Carry the estimate to the total space, sampling fiber volumes up to here.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer_horizon: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Driving {
    H,
    L,
    /// `ℓ + H` from the Jacobi comparison with `g`.
    Radial,
}

impl Driving {
    pub fn function(self) -> Option<DrivingFunction> {
        match self {
            Driving::H => Some(DrivingFunction::H),
            Driving::L => Some(DrivingFunction::L),
            Driving::Radial => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyParams {
    #[serde(default = "default_driving")]
    pub driving: Driving,
    pub r_star: f64,
    pub horizon: f64,
    #[serde(default = "default_certificate_samples")]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<String>,
}

fn default_driving() -> Driving {
    Driving::H
}

fn default_certificate_samples() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareParams {
    pub g: String,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_compare_tolerance")]
    pub tolerance: f64,
}

fn default_horizon() -> f64 {
    tonelab::comparison::DEFAULT_HORIZON
}

fn default_step() -> f64 {
    tonelab::comparison::DEFAULT_STEP
}

fn default_compare_tolerance() -> f64 {
    1e-6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyParams {
    #[serde(default = "default_a")]
    pub a: String,
    #[serde(default = "default_phi")]
    pub phi: String,
    #[serde(default = "default_range")]
    pub range: (f64, f64),
    #[serde(default = "default_identity_samples")]
    pub samples: usize,
    #[serde(default = "default_identity_tolerance")]
    pub tolerance: f64,
    #[serde(default = "yes")]
    pub resolve_sign: bool,
}

fn default_a() -> String {
    "1".into()
}

fn default_phi() -> String {
    "t".into()
}

fn default_range() -> (f64, f64) {
    tonelab::identities::IdentityOptions::default().range
}

fn default_identity_samples() -> usize {
    tonelab::identities::IdentityOptions::default().samples
}

fn default_identity_tolerance() -> f64 {
    tonelab::identities::IdentityOptions::default().tolerance
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrooksParams {
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    #[serde(default = "default_brooks_steps")]
    pub steps: usize,
}

fn default_r_max() -> f64 {
    30.0
}

fn default_brooks_steps() -> usize {
    30_000
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_fills_defaults() {
        let s = ScenarioSpec::from_json(
            r#"{"name":"x","model":{"n":2,"f":"hyperbolic"},
                "tasks":[{"task":"tone","domain":{"a":0,"b":4}},
                         {"task":"ess","radii":[2,4],"policy":{"max_length":64}}]}"#,
        )
        .unwrap();
        s.validate().unwrap();
        let TaskSpec::Ess(e) = &s.tasks[1] else {
            panic!()
        };
        assert_eq!(e.policy.max_length, 64.0);
        assert_eq!(
            e.policy.initial_length,
            TruncationPolicy::default().initial_length
        );
        let TaskSpec::Tone(t) = &s.tasks[0] else {
            panic!()
        };
        assert_eq!(
            t.domain.resolve("d").unwrap().inner,
            InnerBoundary::PoleRegular
        );
        assert!(t.check_modes);
    }

    #[test]
    fn errors_carry_paths() {
        let bad = |json: &str| {
            ScenarioSpec::from_json(json)
                .unwrap()
                .validate()
                .unwrap_err()
                .path
        };
        assert_eq!(
            bad(
                r#"{"name":"x","model":{"n":2,"f":"hyperbolic"},"tasks":[{"task":"tone","domain":{"a":2,"b":1}}]}"#
            ),
            "tasks[0].domain.b"
        );
        assert_eq!(
            bad(r#"{"name":"x","model":{"n":2,"f":"sinh(t"},"tasks":[{"task":"brooks"}]}"#),
            "model.f"
        );
        assert_eq!(
            bad(
                r#"{"name":"x","model":{"n":2,"f":"t"},"tasks":[{"task":"brooks"},{"task":"ess","radii":[3,2]}]}"#
            ),
            "tasks[1].radii[1]"
        );
        assert_eq!(
            bad(
                r#"{"name":"x","model":{"n":2,"f":"t"},"tasks":[{"task":"certify","driving":"radial","r_star":1,"horizon":5}]}"#
            ),
            "tasks[0].g"
        );
        let e = ScenarioSpec::from_json(
            r#"{"name":"x","model":{"n":2,"f":"t"},"tasks":[{"task":"nope"}]}"#,
        )
        .unwrap_err();
        assert!(e.path.starts_with("line 1"));
    }
}
