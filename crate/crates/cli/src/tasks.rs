//! Task runners and the run record.
//!
//! Each task kind is a [`Task`] registered by name. A scenario's tasks are
//! independent, so they run in parallel; results keep declaration order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tonelab::certificate::Certificate;
use tonelab::comparison::{
    comparison_check, radial_discreteness_certificate, ComparisonOptions, ComparisonReport,
    RadialCertificateOptions,
};
use tonelab::identities::{
    check_divergence_identity, check_grad_average, check_laplacian_lift, resolve_sign_convention,
    IdentityOptions, ResidualReport, SignResolution,
};
use tonelab::models::{RadialWeight, SubmersionModel};
use tonelab::profiles::Profile;
use tonelab::spectrum::{
    brooks_growth, discreteness_certificate, ess_bottom_estimate, submersion_transfer,
    BrooksReport, CertificateOptions, EssEstimate, SpectrumError, TransferReport,
};
use tonelab::sturm_liouville::InnerBoundary;
use tonelab::tone::{base_mode_tone, total_space_mode_tone, Mode, ModeCheck, ToneOptions};

use crate::spec::{
    BrooksParams, CertifyParams, CompareParams, EssParams, ScenarioSpec, Space, TaskSpec,
    ToneParams, ValidationError, VerifyParams,
};

/// Tone result without the eigenfunction samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToneSummary {
    pub a: f64,
    pub b: f64,
    pub inner: InnerBoundary,
    pub space: Space,
    pub mode: Mode,
    pub lambda: f64,
    pub error_estimate: f64,
    pub lambda_coarse: f64,
    pub lambda_fine: f64,
    pub grids: (usize, usize),
    pub mode_checks: Vec<ModeCheck>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EssOutput {
    pub space: Space,
    pub estimate: EssEstimate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer: Option<TransferReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutput {
    pub reports: Vec<ResidualReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign: Option<SignResolution>,
}

impl VerifyOutput {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrooksOutput {
    pub report: BrooksReport,
    pub certificate: Certificate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "kebab-case")]
pub enum TaskOutput {
    Tone(ToneSummary),
    Ess(EssOutput),
    Certify(Certificate),
    Compare(ComparisonReport),
    Verify(VerifyOutput),
    Brooks(BrooksOutput),
}

/// A task failure, with whatever was computed before it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskFailure {
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partial: Option<TaskOutput>,
}

impl<E: std::fmt::Display> From<E> for TaskFailure {
    fn from(e: E) -> TaskFailure {
        TaskFailure {
            message: e.to_string(),
            partial: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<TaskOutput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<TaskFailure>,
}

impl TaskRecord {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub tonelab: String,
    pub tonelab_cli: String,
}

impl Versions {
    pub fn current() -> Versions {
        Versions {
            tonelab: tonelab::VERSION.to_string(),
            tonelab_cli: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// Everything a run produced. Wall time is deliberately absent so that
/// records of the same scenario compare equal byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: ScenarioSpec,
    pub results: Vec<TaskRecord>,
    pub versions: Versions,
    /// Always `None`: every computation is deterministic.
    pub seed: Option<u64>,
}

impl RunRecord {
    pub fn all_succeeded(&self) -> bool {
        self.results.iter().all(TaskRecord::succeeded)
    }
}

pub trait Task: Send + Sync {
    fn name(&self) -> &'static str;

    fn run(&self, model: &SubmersionModel) -> Result<TaskOutput, TaskFailure>;
}

fn tone_options(grid: Option<usize>, tol: Option<f64>, check_modes: bool) -> ToneOptions {
    let mut opts = grid.map(ToneOptions::with_grid).unwrap_or_default();
    if let Some(t) = tol {
        opts.tol = t;
    }
    opts.check_modes = check_modes;
    opts
}

impl Task for ToneParams {
    fn name(&self) -> &'static str {
        "tone"
    }

    fn run(&self, model: &SubmersionModel) -> Result<TaskOutput, TaskFailure> {
        let domain = self.domain.resolve("domain")?;
        let opts = tone_options(self.grid, self.tol, self.check_modes);
        let mode = Mode {
            k: self.k,
            j: self.j,
        };
        let r = match self.space {
            Space::Base => {
                if self.j != 0 {
                    return Err("fiber mode j applies to the total space only".into());
                }
                base_mode_tone(model.base(), domain, self.k, &opts)?
            }
            Space::Total => total_space_mode_tone(model, domain, mode, &opts)?,
        };
        Ok(TaskOutput::Tone(ToneSummary {
            a: domain.a,
            b: domain.b,
            inner: domain.inner,
            space: self.space,
            mode: r.mode,
            lambda: r.lambda,
            error_estimate: r.error_estimate,
            lambda_coarse: r.lambda_coarse,
            lambda_fine: r.lambda_fine,
            grids: r.grids,
            mode_checks: r.mode_checks,
        }))
    }
}

impl Task for EssParams {
    fn name(&self) -> &'static str {
        "ess"
    }

    fn run(&self, model: &SubmersionModel) -> Result<TaskOutput, TaskFailure> {
        let opts = tone_options(self.grid, self.tol, false);
        let weight: &dyn RadialWeight = match self.space {
            Space::Base => model.base(),
            Space::Total => {
                if model.fiber().is_none() {
                    return Err("total space requested but the model has no fiber".into());
                }
                model
            }
        };
        let transfer = |est: &EssEstimate| -> Result<Option<TransferReport>, TaskFailure> {
            match (self.transfer_horizon, self.space) {
                (Some(h), Space::Base) => Ok(Some(submersion_transfer(est, model, h)?)),
                (Some(_), Space::Total) => Err("transfer starts from a base estimate".into()),
                (None, _) => Ok(None),
            }
        };
        match ess_bottom_estimate(weight, &self.radii, &self.policy, &opts) {
            Ok(estimate) => {
                let transfer = transfer(&estimate)?;
                Ok(TaskOutput::Ess(EssOutput {
                    space: self.space,
                    estimate,
                    transfer,
                }))
            }
            Err(e @ SpectrumError::BudgetExhausted { .. }) => {
                let message = e.to_string();
                let SpectrumError::BudgetExhausted { partial, .. } = e else {
                    unreachable!()
                };
                Err(TaskFailure {
                    message,
                    partial: Some(TaskOutput::Ess(EssOutput {
                        space: self.space,
                        estimate: *partial,
                        transfer: None,
                    })),
                })
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Task for CertifyParams {
    fn name(&self) -> &'static str {
        "certify"
    }

    fn run(&self, model: &SubmersionModel) -> Result<TaskOutput, TaskFailure> {
        let cert = match self.driving.function() {
            Some(mode) => {
                let opts = CertificateOptions {
                    r_star: self.r_star,
                    horizon: self.horizon,
                    samples: self.samples,
                };
                discreteness_certificate(model, mode, &opts)?
            }
            None => {
                let g = Profile::resolve(self.g.as_deref().unwrap_or_default())?;
                let opts = RadialCertificateOptions {
                    tail_start: self.r_star / self.horizon,
                    tail_samples: self.samples,
                    ..RadialCertificateOptions::default()
                };
                radial_discreteness_certificate(model, &g, self.horizon, &opts)?
            }
        };
        Ok(TaskOutput::Certify(cert))
    }
}

impl Task for CompareParams {
    fn name(&self) -> &'static str {
        "compare"
    }

    fn run(&self, model: &SubmersionModel) -> Result<TaskOutput, TaskFailure> {
        let g = Profile::resolve(&self.g)?;
        let opts = ComparisonOptions {
            step: self.step,
            tolerance: self.tolerance,
            ..ComparisonOptions::default()
        };
        Ok(TaskOutput::Compare(comparison_check(
            model.base(),
            &g,
            self.horizon,
            &opts,
        )?))
    }
}

impl Task for VerifyParams {
    fn name(&self) -> &'static str {
        "verify"
    }

    fn run(&self, model: &SubmersionModel) -> Result<TaskOutput, TaskFailure> {
        let a = Profile::resolve(&self.a)?;
        let phi = Profile::resolve(&self.phi)?;
        let opts = IdentityOptions {
            range: self.range,
            samples: self.samples,
            tolerance: self.tolerance,
            ..IdentityOptions::default()
        };
        let reports = vec![
            check_divergence_identity(model, &a, &opts)?,
            check_laplacian_lift(model, &phi, &opts)?,
            check_grad_average(model, &phi, &opts)?,
        ];
        let sign = if self.resolve_sign {
            Some(resolve_sign_convention(model, &opts)?)
        } else {
            None
        };
        Ok(TaskOutput::Verify(VerifyOutput { reports, sign }))
    }
}

impl Task for BrooksParams {
    fn name(&self) -> &'static str {
        "brooks"
    }

    fn run(&self, model: &SubmersionModel) -> Result<TaskOutput, TaskFailure> {
        let report = brooks_growth(model, self.r_max, self.steps)?;
        let certificate = report.certificate();
        Ok(TaskOutput::Brooks(BrooksOutput {
            report,
            certificate,
        }))
    }
}

impl TaskSpec {
    pub fn as_task(&self) -> &dyn Task {
        match self {
            TaskSpec::Tone(p) => p,
            TaskSpec::Ess(p) => p,
            TaskSpec::Certify(p) => p,
            TaskSpec::Compare(p) => p,
            TaskSpec::Verify(p) => p,
            TaskSpec::Brooks(p) => p,
        }
    }
}

/// Names accepted in the `task` field of a scenario.
pub const TASK_NAMES: [&str; 6] = ["tone", "ess", "certify", "compare", "verify", "brooks"];

/// Validates, then runs every task. Task failures are recorded in place and
/// do not stop the other tasks.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<RunRecord, ValidationError> {
    let model = spec.validate()?;
    let results = spec
        .tasks
        .par_iter()
        .map(|t| {
            let task = t.as_task();
            match task.run(&model) {
                Ok(output) => TaskRecord {
                    task: task.name().into(),
                    output: Some(output),
                    error: None,
                },
                Err(e) => TaskRecord {
                    task: task.name().into(),
                    output: None,
                    error: Some(e),
                },
            }
        })
        .collect();
    Ok(RunRecord {
        scenario: spec.clone(),
        results,
        versions: Versions::current(),
        seed: None,
    })
}
