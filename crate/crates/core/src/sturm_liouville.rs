//! Finite-volume discretization of `−(w u′)′/w + V u = λ u` and a
//! Sturm-sequence eigensolver for its smallest eigenpair.
//!
//! Weights are carried in log space and the generalized problem
//! `A u = λ W u` is only ever formed through ratios of neighbouring weights,
//! so weights spanning hundreds of orders of magnitude are fine.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{ModelError, RadialWeight};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("grid needs at least 8 interior nodes, got {0}")]
    GridTooSmall(usize),
    #[error("weight is not positive at t = {t}")]
    NonPositiveWeight { t: f64 },
    #[error("potential is negative ({value}) at t = {t}")]
    NegativePotential { t: f64, value: f64 },
    #[error("inverse iteration did not converge in {iterations} sweeps")]
    NotConverged { iterations: usize },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerBoundary {
    Dirichlet,
    /// Zero flux through the pole at `t = 0`.
    PoleRegular,
}

/// A ball (`[0, b]` with a regular pole) or an annulus `[a, b]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialDomain {
    pub a: f64,
    pub b: f64,
    pub inner: InnerBoundary,
}

impl RadialDomain {
    pub fn ball(radius: f64) -> Result<RadialDomain, SolverError> {
        RadialDomain::new(0.0, radius, InnerBoundary::PoleRegular)
    }

    pub fn annulus(a: f64, b: f64) -> Result<RadialDomain, SolverError> {
        RadialDomain::new(a, b, InnerBoundary::Dirichlet)
    }

    pub fn new(a: f64, b: f64, inner: InnerBoundary) -> Result<RadialDomain, SolverError> {
        if !(a.is_finite() && b.is_finite() && a >= 0.0 && b > a) {
            return Err(SolverError::InvalidDomain(format!(
                "need 0 <= a < b, got [{a}, {b}]"
            )));
        }
        if inner == InnerBoundary::PoleRegular && a != 0.0 {
            return Err(SolverError::InvalidDomain(format!(
                "a regular pole needs a = 0, got a = {a}"
            )));
        }
        Ok(RadialDomain { a, b, inner })
    }

    pub fn contains(&self, other: &RadialDomain) -> bool {
        self.a <= other.a && other.b <= self.b
    }
}

/// Uniform grid of interior nodes. Dirichlet grids put nodes at `a + iΔ`,
/// pole-regular grids are staggered at `(i − ½)Δ` so that `b` is the first
/// node past the last unknown.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub domain: RadialDomain,
    pub spacing: f64,
    pub nodes: Vec<f64>,
}

impl Grid {
    pub fn new(domain: RadialDomain, interior: usize) -> Result<Grid, SolverError> {
        if interior < 8 {
            return Err(SolverError::GridTooSmall(interior));
        }
        let len = domain.b - domain.a;
        let (spacing, offset) = match domain.inner {
            InnerBoundary::Dirichlet => (len / (interior + 1) as f64, 0.0),
            InnerBoundary::PoleRegular => (len / (interior as f64 + 0.5), -0.5),
        };
        let nodes = (1..=interior)
            .map(|i| domain.a + (i as f64 + offset) * spacing)
            .collect();
        Ok(Grid {
            domain,
            spacing,
            nodes,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Cell faces: face `i` sits between node `i − 1` and node `i`
    /// (node `−1` and node `N` being the boundary). `N + 1` entries.
    pub fn faces(&self) -> Vec<f64> {
        (0..=self.len())
            .map(|i| match self.domain.inner {
                InnerBoundary::Dirichlet => self.domain.a + (i as f64 + 0.5) * self.spacing,
                InnerBoundary::PoleRegular => self.domain.a + i as f64 * self.spacing,
            })
            .collect()
    }
}

/// The assembled operator, stored as log masses at nodes, log face fluxes,
/// and the potential at nodes.
#[derive(Clone, Debug)]
pub struct TridiagonalSystem {
    pub grid: Grid,
    /// `log w(t_i)`
    pub log_mass: Vec<f64>,
    /// `log w` at faces; `-inf` marks a closed face (the pole).
    pub log_flux: Vec<f64>,
    pub potential: Vec<f64>,
}

// Larger potentials only push the eigenfunction further to zero.
const POTENTIAL_CAP: f64 = 1e250;

/// Assembles the flux scheme: row `i` couples `u_{i±1}` with `−w(t_{i±½})/Δ²`,
/// has diagonal `[w(t_{i−½}) + w(t_{i+½})]/Δ² + V(t_i) w(t_i)` and mass `w(t_i)`.
///
/// `log_potential` returns `log V(t)`, or `None` where `V = 0`.
pub fn assemble(
    weight: &dyn RadialWeight,
    grid: &Grid,
    log_potential: &dyn Fn(f64) -> Result<Option<f64>, ModelError>,
) -> Result<TridiagonalSystem, SolverError> {
    let log_at = |t: f64| -> Result<f64, SolverError> {
        match weight.log_weight(t) {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(_) | Err(ModelError::NotPositive { .. }) => {
                Err(SolverError::NonPositiveWeight { t })
            }
            Err(ModelError::Eval {
                source: crate::profiles::EvalError::LogDomain { .. },
                ..
            }) => Err(SolverError::NonPositiveWeight { t }),
            Err(e) => Err(e.into()),
        }
    };
    let log_mass = grid
        .nodes
        .iter()
        .map(|&t| log_at(t))
        .collect::<Result<Vec<_>, _>>()?;
    let faces = grid.faces();
    let mut log_flux = Vec::with_capacity(faces.len());
    for (i, &t) in faces.iter().enumerate() {
        if i == 0 && grid.domain.inner == InnerBoundary::PoleRegular {
            log_flux.push(f64::NEG_INFINITY);
        } else {
            log_flux.push(log_at(t)?);
        }
    }
    let potential = grid
        .nodes
        .iter()
        .map(|&t| match log_potential(t)? {
            None => Ok(0.0),
            Some(lv) if lv.is_nan() => Err(SolverError::NegativePotential { t, value: f64::NAN }),
            Some(lv) => Ok(lv.exp().min(POTENTIAL_CAP)),
        })
        .collect::<Result<Vec<_>, SolverError>>()?;
    Ok(TridiagonalSystem {
        grid: grid.clone(),
        log_mass,
        log_flux,
        potential,
    })
}

/// Same as [`assemble`] for a potential given directly by value.
pub fn assemble_with_potential(
    weight: &dyn RadialWeight,
    grid: &Grid,
    potential: &dyn Fn(f64) -> f64,
) -> Result<TridiagonalSystem, SolverError> {
    let mut sys = assemble(weight, grid, &|_| Ok(None))?;
    for (v, &t) in sys.potential.iter_mut().zip(&grid.nodes) {
        let value = potential(t);
        if !(value >= 0.0) {
            return Err(SolverError::NegativePotential { t, value });
        }
        *v = value.min(POTENTIAL_CAP);
    }
    Ok(sys)
}

impl TridiagonalSystem {
    pub fn len(&self) -> usize {
        self.log_mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_mass.is_empty()
    }

    fn reference(&self) -> f64 {
        self.log_mass
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Diagonal of `A`, with weights scaled so the largest mass is 1.
    pub fn diag(&self) -> Vec<f64> {
        let h2 = self.grid.spacing * self.grid.spacing;
        let r = self.reference();
        (0..self.len())
            .map(|i| {
                let flux = (self.log_flux[i] - r).exp() + (self.log_flux[i + 1] - r).exp();
                flux / h2 + self.potential[i] * (self.log_mass[i] - r).exp()
            })
            .collect()
    }

    /// Off-diagonal of `A` on the same scale as [`Self::diag`].
    pub fn offdiag(&self) -> Vec<f64> {
        let h2 = self.grid.spacing * self.grid.spacing;
        let r = self.reference();
        (1..self.len())
            .map(|i| -(self.log_flux[i] - r).exp() / h2)
            .collect()
    }

    /// Mass diagonal `W` on the same scale as [`Self::diag`].
    pub fn weight(&self) -> Vec<f64> {
        let r = self.reference();
        self.log_mass.iter().map(|&l| (l - r).exp()).collect()
    }

    /// `W^{-1/2} A W^{-1/2}` as (diagonal, off-diagonal), formed from weight ratios.
    pub fn symmetric(&self) -> (Vec<f64>, Vec<f64>) {
        let h2 = self.grid.spacing * self.grid.spacing;
        let n = self.len();
        let diag = (0..n)
            .map(|i| {
                let lm = self.log_mass[i];
                ((self.log_flux[i] - lm).exp() + (self.log_flux[i + 1] - lm).exp()) / h2
                    + self.potential[i]
            })
            .collect();
        let off = (1..n)
            .map(|i| {
                let mid = 0.5 * (self.log_mass[i - 1] + self.log_mass[i]);
                -(self.log_flux[i] - mid).exp() / h2
            })
            .collect();
        (diag, off)
    }

    /// Energy quotient `Σ w_f (Δu)²/Δ² + Σ V w u²` over `Σ w u²` for a vector
    /// given in symmetrized coordinates `y = W^{1/2} u`. Differences are
    /// taken before squaring, so no cancellation against the `1/Δ²` scale.
    pub fn energy_quotient(&self, y: &[f64]) -> f64 {
        let n = self.len();
        let h2 = self.grid.spacing * self.grid.spacing;
        let mut energy = 0.0;
        for face in 0..=n {
            let lf = self.log_flux[face];
            if lf == f64::NEG_INFINITY {
                continue;
            }
            let right = if face < n {
                y[face] * (0.5 * (lf - self.log_mass[face])).exp()
            } else {
                0.0
            };
            let left = if face > 0 {
                y[face - 1] * (0.5 * (lf - self.log_mass[face - 1])).exp()
            } else {
                0.0
            };
            let d = right - left;
            energy += d * d / h2;
        }
        let mut norm = 0.0;
        for (yi, vi) in y.iter().zip(&self.potential) {
            energy += vi * yi * yi;
            norm += yi * yi;
        }
        energy / norm
    }
}

/// Number of eigenvalues strictly below `lambda`.
pub fn sturm_count(sys: &TridiagonalSystem, lambda: f64) -> usize {
    let (d, e) = sys.symmetric();
    count_below(&d, &e, lambda)
}

fn pivot_floor(d: &[f64], e: &[f64]) -> f64 {
    let scale = d.iter().chain(e).fold(0.0f64, |m, v| m.max(v.abs()));
    f64::MIN_POSITIVE.max(scale * f64::EPSILON * 1e-3)
}

fn count_below(d: &[f64], e: &[f64], lambda: f64) -> usize {
    let floor = pivot_floor(d, e);
    let mut count = 0;
    let mut p = d[0] - lambda;
    for i in 0..d.len() {
        if i > 0 {
            p = d[i] - lambda - e[i - 1] * e[i - 1] / p;
        }
        if p.abs() < floor {
            p = floor;
        }
        if p < 0.0 {
            count += 1;
        }
    }
    count
}

#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub lambda: f64,
    /// Eigenfunction at the grid nodes, positive with maximum 1. Entries may
    /// underflow to zero where the weight is astronomically large.
    pub u: Vec<f64>,
    /// Unit eigenvector of the symmetrized operator, strictly positive.
    pub y: Vec<f64>,
    pub bisection_steps: usize,
    pub inverse_iterations: usize,
}

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
const MAX_BISECTION: usize = 4000;
const INVERSE_BUDGET: usize = 200;

/// Smallest eigenpair: bisection on the Sturm count down to relative width
/// `tol`, then inverse iteration shifted at the lower bracket end. The
/// reported eigenvalue is the energy quotient of the converged vector.
pub fn smallest_eigenpair(sys: &TridiagonalSystem, tol: f64) -> Result<Eigenpair, SolverError> {
    if !(tol > 0.0) {
        return Err(SolverError::BadTolerance(tol));
    }
    let (d, e) = sys.symmetric();
    let n = d.len();

    let gershgorin = (0..n)
        .map(|i| {
            let left = if i > 0 { e[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { e[i].abs() } else { 0.0 };
            d[i] + left + right
        })
        .fold(0.0f64, f64::max);
    let trial: Vec<f64> = (1..=n)
        .map(|i| (std::f64::consts::PI * i as f64 / (n + 1) as f64).sin())
        .collect();
    let mut hi = gershgorin.min(sys.energy_quotient(&trial) * (1.0 + 1e-12));
    let mut lo = 0.0f64;
    if count_below(&d, &e, hi) == 0 {
        // rounding put hi at the eigenvalue; widen slightly
        hi = gershgorin.max(hi * 2.0);
    }

    let mut steps = 0;
    while hi - lo > tol * hi && steps < MAX_BISECTION {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(&d, &e, mid) == 0 {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }

    let (y, iterations) = inverse_iteration(&d, &e, lo, hi)?;
    let rq = sys.energy_quotient(&y);
    // the Sturm count is only accurate to a few ulps of the matrix norm
    let slack = (hi - lo).max(1e3 * f64::EPSILON * gershgorin);
    let lambda = if rq >= lo - slack && rq <= hi + slack {
        rq
    } else {
        0.5 * (lo + hi)
    };

    let reference = sys.log_mass.iter().copied().fold(f64::INFINITY, f64::min);
    let mut u: Vec<f64> = y
        .iter()
        .zip(&sys.log_mass)
        .map(|(yi, lm)| yi * (-0.5 * (lm - reference)).exp())
        .collect();
    let max = u.iter().copied().fold(0.0f64, f64::max);
    if max > 0.0 {
        u.iter_mut().for_each(|v| *v /= max);
    }
    Ok(Eigenpair {
        lambda,
        u,
        y,
        bisection_steps: steps,
        inverse_iterations: iterations,
    })
}

/// Solves `(T − σ I) x = b` by LDLᵀ elimination. With `σ` below the
/// smallest eigenvalue every pivot is positive and, since the off-diagonal
/// is nonpositive, a positive right-hand side gives a positive solution.
fn shifted_solve(d: &[f64], e: &[f64], sigma: f64, b: &[f64]) -> Option<Vec<f64>> {
    let n = d.len();
    let mut pivots = Vec::with_capacity(n);
    let mut rhs = Vec::with_capacity(n);
    pivots.push(d[0] - sigma);
    rhs.push(b[0]);
    for i in 1..n {
        let prev = pivots[i - 1];
        if !(prev > 0.0) {
            return None;
        }
        let l = e[i - 1] / prev;
        pivots.push(d[i] - sigma - l * e[i - 1]);
        rhs.push(b[i] - l * rhs[i - 1]);
    }
    if !(pivots[n - 1] > 0.0) {
        return None;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = rhs[n - 1] / pivots[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = (rhs[i] - e[i] * x[i + 1]) / pivots[i];
    }
    Some(x)
}

fn normalize(x: &mut [f64]) -> bool {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= norm);
    true
}

fn inverse_iteration(
    d: &[f64],
    e: &[f64],
    lo: f64,
    hi: f64,
) -> Result<(Vec<f64>, usize), SolverError> {
    let n = d.len();
    let width = (hi - lo).max(hi * f64::EPSILON);
    let seeds: [Box<dyn Fn(usize) -> f64>; 2] = [
        Box::new(|_| 1.0),
        Box::new(move |i| 1.0 + 0.5 * ((i * 7 % 13) as f64 / 13.0)),
    ];
    let mut total = 0;
    for seed in &seeds {
        let mut y: Vec<f64> = (0..n).map(seed).collect();
        normalize(&mut y);
        let mut sigma = lo;
        let mut retreats = 0;
        let mut iteration = 0;
        while iteration < INVERSE_BUDGET {
            let Some(mut x) = shifted_solve(d, e, sigma, &y) else {
                // the shift touched the spectrum; back off
                retreats += 1;
                if retreats > 60 {
                    break;
                }
                sigma -= width * (1u64 << retreats.min(50)) as f64;
                continue;
            };
            iteration += 1;
            total += 1;
            if !normalize(&mut x) {
                break;
            }
            let change = x
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            y = x;
            if change < 1e-13 {
                return Ok((y, total));
            }
        }
    }
    Err(SolverError::NotConverged { iterations: total })
}
