//! Fundamental tones of rotationally invariant domains, in the base and in
//! the total space, by separation of variables into angular mode `k` and
//! fiber mode `j`.
//!
//! Each tone is solved on two grids and Richardson-extrapolated. The
//! invariant mode is checked against the next one on the coarse grid.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{BaseModel, ModelError, RadialWeight, SubmersionModel};
use crate::sturm_liouville::{
    assemble, smallest_eigenpair, Grid, InnerBoundary, RadialDomain, SolverError, DEFAULT_TOLERANCE,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToneError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid mode: {0}")]
    InvalidMode(String),
    #[error("invalid grids ({0}, {1}): the fine grid must be larger than the coarse one")]
    InvalidGrids(usize, usize),
    #[error("sampled function has {0}")]
    BadSamples(String),
    #[error("Rayleigh quotient denominator vanishes")]
    ZeroDenominator,
}

/// Angular mode `k` on `S^{n−1}` and fiber mode `j`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mode {
    pub k: usize,
    pub j: usize,
}

impl Mode {
    pub const INVARIANT: Mode = Mode { k: 0, j: 0 };
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToneOptions {
    /// Interior node counts of the coarse and fine grids.
    pub grids: (usize, usize),
    pub tol: f64,
    pub check_modes: bool,
}

impl Default for ToneOptions {
    fn default() -> Self {
        ToneOptions {
            grids: (4096, 8192),
            tol: DEFAULT_TOLERANCE,
            check_modes: true,
        }
    }
}

impl ToneOptions {
    /// Grids `(n, 2n)` with the remaining options at their defaults.
    pub fn with_grid(n: usize) -> ToneOptions {
        ToneOptions {
            grids: (n, 2 * n),
            ..ToneOptions::default()
        }
    }
}

/// A function sampled on increasing nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sampled {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
}

impl Sampled {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Sampled, ToneError> {
        if nodes.len() != values.len() {
            return Err(ToneError::BadSamples(format!(
                "{} nodes but {} values",
                nodes.len(),
                values.len()
            )));
        }
        if nodes.len() < 3 {
            return Err(ToneError::BadSamples("fewer than 3 samples".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ToneError::BadSamples(
                "nodes that are not increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ToneError::BadSamples("non-finite values".into()));
        }
        Ok(Sampled { nodes, values })
    }

    pub fn from_fn(nodes: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Sampled, ToneError> {
        let values = nodes.iter().map(|&t| f(t)).collect();
        Sampled::new(nodes, values)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Result of [`ModeCheck`]: the next mode's eigenvalue on the coarse grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeCheck {
    pub mode: Mode,
    pub lambda: f64,
    /// Coarse-grid eigenvalue of the reported mode, for comparison.
    pub reference: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToneResult {
    pub lambda: f64,
    /// `|λ(N) − λ(2N)| / 3`
    pub error_estimate: f64,
    pub grids: (usize, usize),
    pub lambda_coarse: f64,
    pub lambda_fine: f64,
    pub mode: Mode,
    pub domain: RadialDomain,
    /// Fine-grid eigenfunction, maximum 1, including Dirichlet endpoints.
    pub eigenfunction: Sampled,
    pub mode_checks: Vec<ModeCheck>,
}

impl ToneResult {
    pub fn modes_verified(&self) -> bool {
        self.mode_checks.iter().all(|c| c.passed)
    }
}

/// `log V(t)` for a separated mode, `None` where `V = 0`.
pub type LogPotential<'a> = dyn Fn(f64) -> Result<Option<f64>, ModelError> + Sync + 'a;

fn log_add(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => {
            let m = x.max(y);
            Some(m + ((x - m).exp() + (y - m).exp()).ln())
        }
    }
}

/// Angular potential `k(k+n−2)/f²` in log form.
fn log_angular_potential(base: &BaseModel, k: usize, t: f64) -> Result<Option<f64>, ModelError> {
    if k == 0 {
        return Ok(None);
    }
    let mu = base.sphere_eigenvalue(k);
    let lf = base
        .warp()
        .log_value(t)
        .map_err(|source| ModelError::Eval {
            what: "log f",
            source,
        })?;
    Ok(Some(mu.ln() - 2.0 * lf))
}

fn mode_potential(model: &SubmersionModel, mode: Mode, t: f64) -> Result<Option<f64>, ModelError> {
    let angular = log_angular_potential(model.base(), mode.k, t)?;
    let fiber = if mode.j == 0 {
        None
    } else {
        model.log_fiber_mode_potential(mode.j, t)?
    };
    Ok(log_add(angular, fiber))
}

fn solve_on(
    weight: &dyn RadialWeight,
    log_potential: &LogPotential,
    domain: RadialDomain,
    interior: usize,
    tol: f64,
) -> Result<(f64, Grid, Vec<f64>), ToneError> {
    let grid = Grid::new(domain, interior)?;
    let sys = assemble(weight, &grid, log_potential)?;
    let pair = smallest_eigenpair(&sys, tol)?;
    Ok((pair.lambda, grid, pair.u))
}

fn sample_eigenfunction(grid: &Grid, u: Vec<f64>) -> Sampled {
    let d = grid.domain;
    let mut nodes = Vec::with_capacity(u.len() + 2);
    let mut values = Vec::with_capacity(u.len() + 2);
    if d.inner == InnerBoundary::Dirichlet {
        nodes.push(d.a);
        values.push(0.0);
    }
    nodes.extend_from_slice(&grid.nodes);
    values.extend(u);
    nodes.push(d.b);
    values.push(0.0);
    Sampled { nodes, values }
}

/// Richardson extrapolation of a second-order quantity from spacings
/// `h_coarse > h_fine`.
pub fn richardson(coarse: f64, fine: f64, h_coarse: f64, h_fine: f64) -> f64 {
    let (c2, f2) = (h_coarse * h_coarse, h_fine * h_fine);
    fine + (fine - coarse) * f2 / (c2 - f2)
}

/// Tone of `−(w u′)′/w + V u` on `domain` for an arbitrary weight and
/// potential. `mode` is only recorded; no mode check is run.
pub fn weighted_tone(
    weight: &dyn RadialWeight,
    log_potential: &LogPotential,
    domain: RadialDomain,
    mode: Mode,
    opts: &ToneOptions,
) -> Result<ToneResult, ToneError> {
    let (nc, nf) = opts.grids;
    if nf <= nc {
        return Err(ToneError::InvalidGrids(nc, nf));
    }
    let (coarse, fine) = rayon::join(
        || solve_on(weight, log_potential, domain, nc, opts.tol),
        || solve_on(weight, log_potential, domain, nf, opts.tol),
    );
    let (lc, grid_c, _) = coarse?;
    let (lf, grid_f, u) = fine?;
    let lambda = richardson(lc, lf, grid_c.spacing, grid_f.spacing).max(0.0);
    Ok(ToneResult {
        lambda,
        error_estimate: (lc - lf).abs() / 3.0,
        grids: opts.grids,
        lambda_coarse: lc,
        lambda_fine: lf,
        mode,
        domain,
        eigenfunction: sample_eigenfunction(&grid_f, u),
        mode_checks: Vec::new(),
    })
}

fn mode_check(
    weight: &dyn RadialWeight,
    potential: &LogPotential,
    domain: RadialDomain,
    mode: Mode,
    reference: f64,
    opts: &ToneOptions,
) -> Result<ModeCheck, ToneError> {
    let (lambda, _, _) = solve_on(weight, potential, domain, opts.grids.0, opts.tol)?;
    Ok(ModeCheck {
        mode,
        lambda,
        reference,
        passed: lambda >= reference,
    })
}

/// `λ*(Ω)` for a rotationally invariant domain `Ω` of the base, at the
/// invariant mode with weight `f^{n−1}`. With `check_modes`, the `k = 1`
/// eigenvalue (potential `(n−1)/f²`) is computed and compared.
pub fn fundamental_tone(
    base: &BaseModel,
    domain: RadialDomain,
    opts: &ToneOptions,
) -> Result<ToneResult, ToneError> {
    base_mode_tone(base, domain, 0, opts)
}

/// Base tone at angular mode `k`.
pub fn base_mode_tone(
    base: &BaseModel,
    domain: RadialDomain,
    k: usize,
    opts: &ToneOptions,
) -> Result<ToneResult, ToneError> {
    let potential = |t: f64| log_angular_potential(base, k, t);
    let mode = Mode { k, j: 0 };
    let mut result = weighted_tone(base, &potential, domain, mode, opts)?;
    if opts.check_modes {
        let next = Mode { k: k + 1, j: 0 };
        let next_potential = |t: f64| log_angular_potential(base, k + 1, t);
        result.mode_checks.push(mode_check(
            base,
            &next_potential,
            domain,
            next,
            result.lambda_coarse,
            opts,
        )?);
    }
    Ok(result)
}

/// `λ` of the lifted domain `Ω̃ = π^{−1}(Ω)` at fiber mode `j` (angular mode
/// 0): weight `f^{n−1} ψ^m`, potential `μ_j / ψ²`. `λ*(Ω̃)` is the `j = 0`
/// value; with `check_modes` the `j + 1` value is compared against it.
pub fn total_space_tone(
    model: &SubmersionModel,
    domain: RadialDomain,
    j: usize,
    opts: &ToneOptions,
) -> Result<ToneResult, ToneError> {
    total_space_mode_tone(model, domain, Mode { k: 0, j }, opts)
}

pub fn total_space_mode_tone(
    model: &SubmersionModel,
    domain: RadialDomain,
    mode: Mode,
    opts: &ToneOptions,
) -> Result<ToneResult, ToneError> {
    let fiber = model
        .fiber()
        .ok_or_else(|| ToneError::InvalidMode("total-space tone needs a fiber".into()))?;
    let modes = fiber.mode_eigenvalues().len();
    if mode.j >= modes {
        return Err(ToneError::InvalidMode(format!(
            "fiber mode {} requested, {} known",
            mode.j, modes
        )));
    }
    let potential = |t: f64| mode_potential(model, mode, t);
    let mut result = weighted_tone(model, &potential, domain, mode, opts)?;
    if opts.check_modes && mode.j + 1 < modes {
        let next = Mode {
            k: mode.k,
            j: mode.j + 1,
        };
        let next_potential = |t: f64| mode_potential(model, next, t);
        result.mode_checks.push(mode_check(
            model,
            &next_potential,
            domain,
            next,
            result.lambda_coarse,
            opts,
        )?);
    }
    Ok(result)
}

/// `∫(u′² + V u²) w / ∫ u² w` for a sampled `u`. Derivatives are taken
/// between neighbouring samples with the weight at the midpoint; the mass
/// integrals use the trapezoid rule. On a solver grid this reproduces the
/// discrete eigenvalue of the sampled eigenvector.
///
/// On a pole-regular domain the first sample is extended to the pole with
/// zero slope.
pub fn rayleigh_quotient(
    weight: &dyn RadialWeight,
    log_potential: &LogPotential,
    domain: RadialDomain,
    u: &Sampled,
) -> Result<f64, ToneError> {
    let n = u.len();
    if n < 3 {
        return Err(ToneError::BadSamples("fewer than 3 samples".into()));
    }
    let log_w = u
        .nodes
        .iter()
        .map(|&t| weight.log_weight(t))
        .collect::<Result<Vec<_>, _>>();
    // a regular pole has zero weight; its sample carries no mass
    let log_w: Vec<f64> = match log_w {
        Ok(v) => v,
        Err(_) if u.nodes[0] == 0.0 => {
            let mut v = vec![f64::NEG_INFINITY];
            for &t in &u.nodes[1..] {
                v.push(weight.log_weight(t)?);
            }
            v
        }
        Err(e) => return Err(e.into()),
    };
    let mut log_mid = Vec::with_capacity(n - 1);
    for w in u.nodes.windows(2) {
        log_mid.push(weight.log_weight(0.5 * (w[0] + w[1]))?);
    }
    let reference = log_w
        .iter()
        .chain(&log_mid)
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);

    let mut energy = 0.0;
    for i in 0..n - 1 {
        let h = u.nodes[i + 1] - u.nodes[i];
        let du = u.values[i + 1] - u.values[i];
        energy += (log_mid[i] - reference).exp() * du * du / h;
    }
    let mut mass = 0.0;
    for i in 0..n {
        let left = if i > 0 {
            u.nodes[i] - u.nodes[i - 1]
        } else if domain.inner == InnerBoundary::PoleRegular {
            2.0 * (u.nodes[0] - domain.a)
        } else {
            0.0
        };
        let right = if i + 1 < n {
            u.nodes[i + 1] - u.nodes[i]
        } else {
            0.0
        };
        let cell = 0.5 * (left + right);
        let w = (log_w[i] - reference).exp();
        let v = match log_potential(u.nodes[i]) {
            Ok(Some(lv)) => lv.exp(),
            Ok(None) => 0.0,
            Err(_) if w == 0.0 => 0.0,
            Err(e) => return Err(e.into()),
        };
        let u2 = u.values[i] * u.values[i];
        mass += cell * w * u2;
        if u2 > 0.0 {
            energy += cell * w * v * u2;
        }
    }
    if !(mass > 0.0) {
        return Err(ToneError::ZeroDenominator);
    }
    Ok(energy / mass)
}

/// [`rayleigh_quotient`] for the invariant mode of the base.
pub fn base_rayleigh_quotient(
    base: &BaseModel,
    domain: RadialDomain,
    u: &Sampled,
) -> Result<f64, ToneError> {
    rayleigh_quotient(base, &|_| Ok(None), domain, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{FiberModel, UniformWeight};
    use crate::profiles::{constant, euclidean, hyperbolic, Profile};
    use std::f64::consts::PI;

    fn flat_tone(a: f64, b: f64, opts: &ToneOptions) -> ToneResult {
        let d = RadialDomain::annulus(a, b).unwrap();
        weighted_tone(&UniformWeight, &|_| Ok(None), d, Mode::INVARIANT, opts).unwrap()
    }

    #[test]
    fn flat_interval() {
        let r = flat_tone(0.0, PI, &ToneOptions::default());
        assert!((r.lambda - 1.0).abs() < 1e-9, "{}", r.lambda);
        assert!(r.error_estimate < 1e-7);
        // the three-point Laplacian underestimates: 4 sin²(h/2)/h² < 1
        assert!(r.lambda_coarse < r.lambda_fine && r.lambda_fine < 1.0);
    }

    #[test]
    fn richardson_ratio_is_four() {
        let opts = |n| ToneOptions::with_grid(n);
        let l1 = flat_tone(0.0, PI, &opts(200)).lambda_coarse;
        let l2 = flat_tone(0.0, PI, &opts(401)).lambda_coarse;
        let l3 = flat_tone(0.0, PI, &opts(803)).lambda_coarse;
        let ratio = (l1 - l2) / (l2 - l3);
        assert!((ratio - 4.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn euclidean_disk_bessel_zero() {
        let base = BaseModel::new(2, euclidean()).unwrap();
        let r = fundamental_tone(
            &base,
            RadialDomain::ball(1.0).unwrap(),
            &ToneOptions::default(),
        )
        .unwrap();
        assert!(
            (r.lambda - 5.783_185_962_946_784).abs() < 1e-6,
            "{}",
            r.lambda
        );
        assert!(r.modes_verified());
        let check = r.mode_checks[0];
        // j_{1,1}² = 14.68197
        assert!(
            (check.lambda - 14.681_970_642).abs() < 1e-3,
            "{}",
            check.lambda
        );
    }

    #[test]
    fn ball_in_three_dimensions() {
        // sin(πt)/t on the unit ball of R³
        let base = BaseModel::new(3, euclidean()).unwrap();
        let r = fundamental_tone(
            &base,
            RadialDomain::ball(1.0).unwrap(),
            &ToneOptions::with_grid(1024),
        )
        .unwrap();
        assert!((r.lambda - PI * PI).abs() < 1e-6, "{}", r.lambda);
    }

    #[test]
    fn minimal_fiber_tone_equality() {
        let base = BaseModel::new(2, hyperbolic(-1.0)).unwrap();
        let fiber = FiberModel::circle(constant(3.0)).unwrap();
        let model = SubmersionModel::new(base.clone(), Some(fiber));
        let d = RadialDomain::annulus(0.5, 3.0).unwrap();
        let opts = ToneOptions::with_grid(1024);
        let down = fundamental_tone(&base, d, &opts).unwrap();
        let up = total_space_tone(&model, d, 0, &opts).unwrap();
        assert!((down.lambda - up.lambda).abs() <= 1e-10);
        assert!(up.modes_verified());
        let excited = total_space_tone(&model, d, 1, &opts).unwrap();
        // μ₁/ψ² = 1/9 is a constant shift
        assert!((excited.lambda - up.lambda - 1.0 / 9.0).abs() < 1e-8);
    }

    #[test]
    fn invalid_modes() {
        let base = BaseModel::new(2, euclidean()).unwrap();
        let d = RadialDomain::annulus(1.0, 2.0).unwrap();
        let opts = ToneOptions::with_grid(64);
        let bare = SubmersionModel::base_only(base.clone());
        assert!(matches!(
            total_space_tone(&bare, d, 0, &opts),
            Err(ToneError::InvalidMode(_))
        ));
        let model = SubmersionModel::new(base, Some(FiberModel::circle(constant(1.0)).unwrap()));
        assert!(matches!(
            total_space_tone(&model, d, 40, &opts),
            Err(ToneError::InvalidMode(_))
        ));
        let bad = ToneOptions {
            grids: (64, 64),
            ..opts
        };
        assert!(matches!(
            total_space_tone(&model, d, 0, &bad),
            Err(ToneError::InvalidGrids(..))
        ));
    }

    #[test]
    fn eigenfunction_reproduces_its_eigenvalue() {
        let base = BaseModel::new(2, hyperbolic(-1.0)).unwrap();
        let d = RadialDomain::annulus(1.0, 2.0).unwrap();
        let r = fundamental_tone(&base, d, &ToneOptions::with_grid(512)).unwrap();
        let q = base_rayleigh_quotient(&base, d, &r.eigenfunction).unwrap();
        assert!(
            (q - r.lambda_fine).abs() < 1e-8 * r.lambda_fine,
            "{q} {}",
            r.lambda_fine
        );

        let d = RadialDomain::ball(2.0).unwrap();
        let ball = fundamental_tone(&base, d, &ToneOptions::with_grid(512)).unwrap();
        let q = base_rayleigh_quotient(&base, d, &ball.eigenfunction).unwrap();
        assert!((q - ball.lambda_fine).abs() < 1e-8 * ball.lambda_fine);
    }

    #[test]
    fn hat_function_quotient() {
        let d = RadialDomain::annulus(0.0, PI).unwrap();
        let nodes: Vec<f64> = (0..=2000).map(|i| PI * i as f64 / 2000.0).collect();
        let hat = Sampled::from_fn(nodes, |t| 1.0 - (2.0 * t / PI - 1.0).abs()).unwrap();
        let q = rayleigh_quotient(&UniformWeight, &|_| Ok(None), d, &hat).unwrap();
        assert!((q - 12.0 / (PI * PI)).abs() < 1e-6, "{q}");
        let scaled = Sampled::new(
            hat.nodes.clone(),
            hat.values.iter().map(|v| -3.5 * v).collect(),
        )
        .unwrap();
        let q2 = rayleigh_quotient(&UniformWeight, &|_| Ok(None), d, &scaled).unwrap();
        assert!((q - q2).abs() < 1e-14);
    }

    #[test]
    fn zero_function_is_rejected() {
        let d = RadialDomain::annulus(0.0, 2.0).unwrap();
        let zero = Sampled::from_fn(vec![0.0, 1.0, 2.0], |_| 0.0).unwrap();
        assert_eq!(
            rayleigh_quotient(&UniformWeight, &|_| Ok(None), d, &zero),
            Err(ToneError::ZeroDenominator)
        );
        assert!(Sampled::new(vec![0.0, 0.0, 1.0], vec![0.0; 3]).is_err());
    }

    #[test]
    fn domain_monotonicity() {
        let base = BaseModel::new(2, Profile::parse("t + t^3").unwrap()).unwrap();
        let opts = ToneOptions::with_grid(256);
        let tone = |a: f64, b: f64| {
            fundamental_tone(&base, RadialDomain::annulus(a, b).unwrap(), &opts)
                .unwrap()
                .lambda
        };
        assert!(tone(1.0, 2.0) > tone(1.0, 3.0));
        assert!(tone(1.0, 3.0) < tone(1.5, 3.0));
    }
}
