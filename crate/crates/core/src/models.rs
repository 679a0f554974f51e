//! Rotationally symmetric bases `(N, dt² + f(t)² dθ²)` with a pole at `t = 0`,
//! and warped products `M = N ×_ψ F` over them.
//!
//! All radial quantities are evaluated through logarithmic derivatives of the
//! profiles, so they stay finite far beyond the point where `f` or `ψ`
//! themselves overflow.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profiles::{self, EvalError, Profile, ProfileError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{what}: {source}")]
    Eval {
        what: &'static str,
        #[source]
        source: EvalError,
    },
    #[error("{what} is not positive at t = {t}")]
    NotPositive { what: &'static str, t: f64 },
    #[error("base warp is not smooth at the pole: {0}")]
    PoleCondition(String),
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid fiber: {0}")]
    InvalidFiber(String),
    #[error("operation needs a fiber but the model has none")]
    FiberAbsent,
    #[error("radial coordinate must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

fn eval(what: &'static str) -> impl Fn(EvalError) -> ModelError {
    move |source| ModelError::Eval { what, source }
}

fn require_positive_radius(t: f64) -> Result<(), ModelError> {
    if t > 0.0 {
        Ok(())
    } else {
        Err(ModelError::NonPositiveRadius(t))
    }
}

/// Sampling used to validate positivity of profiles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidationOptions {
    pub horizon: f64,
    pub samples: usize,
    pub pole_tolerance: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            horizon: 50.0,
            samples: 10_000,
            pole_tolerance: 1e-8,
        }
    }
}

/// A radial volume weight `w(t)` for the weighted problem
/// `−(w u′)′ / w + V u = λ u`. Implementations work in log space.
pub trait RadialWeight: Send + Sync {
    fn log_weight(&self, t: f64) -> Result<f64, ModelError>;

    /// `w′(t) / w(t)`
    fn log_weight_derivative(&self, t: f64) -> Result<f64, ModelError>;

    fn describe(&self) -> String;
}

/// `w ≡ 1`, the flat interval.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformWeight;

impl RadialWeight for UniformWeight {
    fn log_weight(&self, _t: f64) -> Result<f64, ModelError> {
        Ok(0.0)
    }

    fn log_weight_derivative(&self, _t: f64) -> Result<f64, ModelError> {
        Ok(0.0)
    }

    fn describe(&self) -> String {
        "uniform".into()
    }
}

/// A weight given directly by a positive profile.
#[derive(Clone, Debug)]
pub struct ProfileWeight(pub Profile);

impl RadialWeight for ProfileWeight {
    fn log_weight(&self, t: f64) -> Result<f64, ModelError> {
        self.0.log_value(t).map_err(eval("weight"))
    }

    fn log_weight_derivative(&self, t: f64) -> Result<f64, ModelError> {
        self.0.log_derivative(t).map_err(eval("weight"))
    }

    fn describe(&self) -> String {
        format!("weight {}", self.0)
    }
}

#[derive(Clone, Debug)]
pub struct BaseModel {
    n: usize,
    f: Profile,
    pole_label: String,
}

impl BaseModel {
    pub fn new(n: usize, f: Profile) -> Result<BaseModel, ModelError> {
        BaseModel::with_options(n, f, "p0", ValidationOptions::default())
    }

    pub fn with_options(
        n: usize,
        f: Profile,
        pole_label: &str,
        opts: ValidationOptions,
    ) -> Result<BaseModel, ModelError> {
        if n < 2 {
            return Err(ModelError::InvalidDimension(format!(
                "base dimension must be at least 2, got {n}"
            )));
        }
        check_pole(&f, opts.pole_tolerance)?;
        for k in 1..=opts.samples {
            let t = opts.horizon * k as f64 / opts.samples as f64;
            check_positive(&f, t, "base warp f")?;
        }
        Ok(BaseModel {
            n,
            f,
            pole_label: pole_label.to_string(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn warp(&self) -> &Profile {
        &self.f
    }

    pub fn pole_label(&self) -> &str {
        &self.pole_label
    }

    /// `Δρ = (n−1) f′/f`, the mean curvature of the geodesic sphere of radius `t`.
    pub fn radial_laplacian(&self, t: f64) -> Result<f64, ModelError> {
        require_positive_radius(t)?;
        let g = self.f.log_derivative(t).map_err(eval("f'/f"))?;
        Ok((self.n - 1) as f64 * g)
    }

    /// `K_rad = −f″/f`
    pub fn radial_curvature(&self, t: f64) -> Result<f64, ModelError> {
        require_positive_radius(t)?;
        Ok(-self.f.second_derivative_ratio(t).map_err(eval("f''/f"))?)
    }

    /// First nonzero eigenvalue `k(k+n−2)` of the unit sphere `S^{n−1}` at degree `k`.
    pub fn sphere_eigenvalue(&self, k: usize) -> f64 {
        (k * (k + self.n - 2)) as f64
    }

    /// Volume of the unit sphere `S^{n−1}`.
    pub fn sphere_volume(&self) -> f64 {
        unit_sphere_volume(self.n)
    }
}

impl RadialWeight for BaseModel {
    fn log_weight(&self, t: f64) -> Result<f64, ModelError> {
        let lf = self.f.log_value(t).map_err(eval("log f"))?;
        Ok((self.n - 1) as f64 * lf)
    }

    fn log_weight_derivative(&self, t: f64) -> Result<f64, ModelError> {
        self.radial_laplacian(t)
    }

    fn describe(&self) -> String {
        format!("base n={} f={}", self.n, self.f)
    }
}

/// `vol(S^{d−1}) = 2 π^{d/2} / Γ(d/2)`
pub fn unit_sphere_volume(d: usize) -> f64 {
    use std::f64::consts::PI;
    // recurrence vol(S^{d+1}) = 2π/d · vol(S^{d−1})
    let (mut vol, mut dim) = if d % 2 == 0 { (2.0 * PI, 2) } else { (2.0, 1) };
    while dim < d {
        vol *= 2.0 * PI / dim as f64;
        dim += 2;
    }
    vol
}

fn check_pole(f: &Profile, tol: f64) -> Result<(), ModelError> {
    let eps = 1e-6;
    let f0 = match f.value(0.0) {
        Ok(v) => v,
        Err(_) => {
            let v = f.value(eps).map_err(eval("f near pole"))?;
            let d = f.derivative(eps).map_err(eval("f' near pole"))?;
            v - eps * d
        }
    };
    let d0 = match f.derivative(0.0) {
        Ok(v) => v,
        Err(_) => f.derivative(eps).map_err(eval("f' near pole"))?,
    };
    if f0.abs() > tol {
        return Err(ModelError::PoleCondition(format!(
            "f(0) = {f0}, expected 0"
        )));
    }
    if (d0 - 1.0).abs() > tol {
        return Err(ModelError::PoleCondition(format!(
            "f'(0) = {d0}, expected 1"
        )));
    }
    Ok(())
}

fn check_positive(p: &Profile, t: f64, what: &'static str) -> Result<(), ModelError> {
    match p.log_value(t) {
        Ok(v) if v.is_finite() => Ok(()),
        Ok(_) | Err(EvalError::LogDomain { .. }) => Err(ModelError::NotPositive { what, t }),
        Err(source) => Err(ModelError::Eval { what, source }),
    }
}

/// The circle of length 2π: eigenvalues `0, 1, 1, 4, 4, 9, 9, …`.
pub fn circle_modes(count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| (i.div_ceil(2) * i.div_ceil(2)) as f64)
        .collect()
}

#[derive(Clone, Debug)]
pub struct FiberModel {
    m: usize,
    psi: Profile,
    unit_fiber_volume: f64,
    fiber_mode_eigenvalues: Vec<f64>,
}

impl FiberModel {
    /// A circle fiber of length 2π warped by `psi`.
    pub fn circle(psi: Profile) -> Result<FiberModel, ModelError> {
        FiberModel::new(1, psi, 2.0 * std::f64::consts::PI, circle_modes(9))
    }

    pub fn new(
        m: usize,
        psi: Profile,
        unit_fiber_volume: f64,
        fiber_mode_eigenvalues: Vec<f64>,
    ) -> Result<FiberModel, ModelError> {
        FiberModel::with_options(
            m,
            psi,
            unit_fiber_volume,
            fiber_mode_eigenvalues,
            ValidationOptions::default(),
        )
    }

    pub fn with_options(
        m: usize,
        psi: Profile,
        unit_fiber_volume: f64,
        fiber_mode_eigenvalues: Vec<f64>,
        opts: ValidationOptions,
    ) -> Result<FiberModel, ModelError> {
        if m < 1 {
            return Err(ModelError::InvalidDimension(
                "fiber dimension must be at least 1".into(),
            ));
        }
        if !(unit_fiber_volume > 0.0 && unit_fiber_volume.is_finite()) {
            return Err(ModelError::InvalidFiber(format!(
                "unit fiber volume must be positive, got {unit_fiber_volume}"
            )));
        }
        match fiber_mode_eigenvalues.first() {
            Some(&first) if first == 0.0 => {}
            _ => {
                return Err(ModelError::InvalidFiber(
                    "fiber mode eigenvalues must start at 0".into(),
                ))
            }
        }
        if fiber_mode_eigenvalues
            .windows(2)
            .any(|w| !(w[1] >= w[0]) || !w[1].is_finite())
        {
            return Err(ModelError::InvalidFiber(
                "fiber mode eigenvalues must be finite and nondecreasing".into(),
            ));
        }
        for k in 0..=opts.samples {
            let t = opts.horizon * k as f64 / opts.samples as f64;
            check_positive(&psi, t, "fiber warp psi")?;
        }
        Ok(FiberModel {
            m,
            psi,
            unit_fiber_volume,
            fiber_mode_eigenvalues,
        })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn warp(&self) -> &Profile {
        &self.psi
    }

    pub fn unit_fiber_volume(&self) -> f64 {
        self.unit_fiber_volume
    }

    pub fn mode_eigenvalues(&self) -> &[f64] {
        &self.fiber_mode_eigenvalues
    }

    /// Whether every fiber is minimal, decided from the profile tree.
    pub fn is_minimal(&self) -> bool {
        self.psi.is_constant()
    }
}

#[derive(Clone, Debug)]
pub struct SubmersionModel {
    base: BaseModel,
    fiber: Option<FiberModel>,
}

impl SubmersionModel {
    pub fn new(base: BaseModel, fiber: Option<FiberModel>) -> SubmersionModel {
        SubmersionModel { base, fiber }
    }

    pub fn base_only(base: BaseModel) -> SubmersionModel {
        SubmersionModel { base, fiber: None }
    }

    pub fn base(&self) -> &BaseModel {
        &self.base
    }

    pub fn fiber(&self) -> Option<&FiberModel> {
        self.fiber.as_ref()
    }

    fn require_fiber(&self) -> Result<&FiberModel, ModelError> {
        self.fiber.as_ref().ok_or(ModelError::FiberAbsent)
    }

    /// Radial coefficient `c(t)` of `dπ(H) = c(t) ∂_t`, namely `m ψ′/ψ`.
    pub fn mean_curvature_radial(&self, t: f64) -> Result<f64, ModelError> {
        let fiber = self.require_fiber()?;
        let g = fiber.psi.log_derivative(t).map_err(eval("psi'/psi"))?;
        Ok(fiber.m as f64 * g)
    }

    /// `log(f^{n−1} ψ^m)`
    pub fn log_volume_density(&self, t: f64) -> Result<f64, ModelError> {
        let mut lw = self.base.log_weight(t)?;
        if let Some(fiber) = &self.fiber {
            lw += fiber.m as f64 * fiber.psi.log_value(t).map_err(eval("log psi"))?;
        }
        Ok(lw)
    }

    pub fn volume_density(&self, t: f64) -> Result<f64, ModelError> {
        require_positive_radius(t)?;
        let w = self.log_volume_density(t)?.exp();
        if w.is_finite() {
            Ok(w)
        } else {
            Err(ModelError::Eval {
                what: "volume density",
                source: EvalError::NonFinite { t },
            })
        }
    }

    /// `log vol(F_t) = log vol(F) + m log ψ(t)`
    pub fn log_fiber_volume(&self, t: f64) -> Result<f64, ModelError> {
        let fiber = self.require_fiber()?;
        let lpsi = fiber.psi.log_value(t).map_err(eval("log psi"))?;
        Ok(fiber.unit_fiber_volume.ln() + fiber.m as f64 * lpsi)
    }

    pub fn fiber_volume(&self, t: f64) -> Result<f64, ModelError> {
        let fiber = self.require_fiber()?;
        let psi = fiber.psi.value(t).map_err(eval("psi"))?;
        Ok(fiber.unit_fiber_volume * psi.powi(fiber.m as i32))
    }

    /// `h = Δρ + ⟨∇ρ, dπH⟩`, the logarithmic derivative of the volume density.
    pub fn h_function(&self, t: f64) -> Result<f64, ModelError> {
        let mut h = self.base.radial_laplacian(t)?;
        if self.fiber.is_some() {
            h += self.mean_curvature_radial(t)?;
        }
        Ok(h)
    }

    /// `l = Δρ − max_fiber |H|`
    pub fn l_function(&self, t: f64) -> Result<f64, ModelError> {
        let mut l = self.base.radial_laplacian(t)?;
        if self.fiber.is_some() {
            l -= self.mean_curvature_radial(t)?.abs();
        }
        Ok(l)
    }

    /// Potential `μ_j / ψ²` felt by fiber mode `j`, in log form; `None` for `μ_j = 0`.
    pub fn log_fiber_mode_potential(&self, j: usize, t: f64) -> Result<Option<f64>, ModelError> {
        let fiber = self.require_fiber()?;
        let mu = *fiber.fiber_mode_eigenvalues.get(j).ok_or_else(|| {
            ModelError::InvalidFiber(format!(
                "fiber mode {j} requested but only {} eigenvalues are known",
                fiber.fiber_mode_eigenvalues.len()
            ))
        })?;
        if mu == 0.0 {
            return Ok(None);
        }
        let lpsi = fiber.psi.log_value(t).map_err(eval("log psi"))?;
        Ok(Some(mu.ln() - 2.0 * lpsi))
    }
}

impl RadialWeight for SubmersionModel {
    fn log_weight(&self, t: f64) -> Result<f64, ModelError> {
        self.log_volume_density(t)
    }

    fn log_weight_derivative(&self, t: f64) -> Result<f64, ModelError> {
        self.h_function(t)
    }

    fn describe(&self) -> String {
        match &self.fiber {
            Some(fb) => format!(
                "{} x_psi F (m={}, psi={})",
                self.base.describe(),
                fb.m,
                fb.psi
            ),
            None => self.base.describe(),
        }
    }
}

/// Structured description of a model, as found in scenario files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDescription {
    pub n: usize,
    pub f: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit_fiber_volume: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiber_modes: Option<Vec<f64>>,
}

impl ModelDescription {
    pub fn base(n: usize, f: &str) -> ModelDescription {
        ModelDescription {
            n,
            f: f.into(),
            m: None,
            psi: None,
            unit_fiber_volume: None,
            fiber_modes: None,
        }
    }

    pub fn with_fiber(mut self, m: usize, psi: &str) -> ModelDescription {
        self.m = Some(m);
        self.psi = Some(psi.into());
        self
    }

    /// Resolves profile references and validates the resulting model.
    /// A fiber is present iff `psi` is given; it defaults to a circle.
    pub fn build(&self) -> Result<SubmersionModel, ModelError> {
        let base = BaseModel::new(self.n, Profile::resolve(&self.f)?)?;
        let fiber = match &self.psi {
            None => {
                if self.m.is_some()
                    || self.unit_fiber_volume.is_some()
                    || self.fiber_modes.is_some()
                {
                    return Err(ModelError::InvalidFiber(
                        "fiber parameters given without psi".into(),
                    ));
                }
                None
            }
            Some(psi) => {
                let psi = profiles::Profile::resolve(psi)?;
                Some(FiberModel::new(
                    self.m.unwrap_or(1),
                    psi,
                    self.unit_fiber_volume.unwrap_or(2.0 * std::f64::consts::PI),
                    self.fiber_modes.clone().unwrap_or_else(|| circle_modes(9)),
                )?)
            }
        };
        Ok(SubmersionModel::new(base, fiber))
    }
}
