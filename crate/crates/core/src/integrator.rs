//! The collective symplectic integrator.
//!
//! Spins are advanced with the spherical midpoint rule and the lattice with
//! Störmer–Verlet, coupled through shared stage values:
//!
//! ```text
//! P  = p − h/2 ∂H₁/∂q(q, W)
//! q̃  = q + h M⁻¹ P
//! W  = ρ₁(w + w̃)
//! w̃  = w + h/2 [g(W, q) + g(W, q̃)] × W
//! p̃  = P − h/2 ∂H₁/∂q(q̃, W)
//! ```
//!
//! [`step_reduced`] solves this system directly on `(S²)ⁿ × T*ℝᵐ`.
//! [`step_collective`] runs the equivalent implicit midpoint / Störmer–Verlet
//! scheme on the lifted space `ℂ²ⁿ × T*ℝᵐ`, where it is a plain partitioned
//! Runge–Kutta method; it exists mainly to cross-check the reduced stepper.
//!
//! The implicit stages are solved by fixed-point iteration until the max-norm
//! change of the stage unknowns drops below the tolerance.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{hopf, normalize_spins, pullback_gradient, CollectiveSpinPair, CollectiveState, LatticeState, Spin, SpinLatticeState};
use crate::model::{EnergyTerms, ExtendedHamiltonian};

/// `‖w + w̃‖` below this is treated as an antipodal breakdown.
const ANTIPODAL_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Time step `h`. Negative steps integrate backwards.
    pub step: f64,
    /// Bound on the max-norm change between successive iterates.
    pub fp_tolerance: f64,
    pub max_iterations: usize,
}

impl SolverSettings {
    pub const DEFAULT_TOLERANCE: f64 = 1e-12;
    pub const DEFAULT_MAX_ITERATIONS: usize = 200;

    pub fn new(step: f64) -> Result<Self> {
        let s = Self {
            step,
            fp_tolerance: Self::DEFAULT_TOLERANCE,
            max_iterations: Self::DEFAULT_MAX_ITERATIONS,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_tolerance(mut self, fp_tolerance: f64) -> Result<Self> {
        self.fp_tolerance = fp_tolerance;
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Result<Self> {
        self.max_iterations = max_iterations;
        self.validate()?;
        Ok(self)
    }

    /// The same settings with the step negated.
    pub fn reversed(&self) -> Self {
        Self {
            step: -self.step,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.step == 0.0 || !self.step.is_finite() {
            return Err(Error::InvalidParameter(format!("step must be nonzero, got {}", self.step)));
        }
        if !(self.fp_tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "fixed-point tolerance must be positive, got {}",
                self.fp_tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome of one accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport<S> {
    pub iterations: usize,
    pub residual: f64,
    pub state: S,
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn drift(q: &[f64], momentum: &[f64], step: f64, model: &(impl ExtendedHamiltonian + ?Sized)) -> Vec<f64> {
    let v = model.mass_matrix().apply_inverse(momentum);
    q.iter().zip(v).map(|(x, v)| x + step * v).collect()
}

fn kick(p: &[f64], grad: &[f64], half_step: f64) -> Vec<f64> {
    p.iter().zip(grad).map(|(x, g)| x - half_step * g).collect()
}

fn check_dims(model: &(impl ExtendedHamiltonian + ?Sized), spins: usize, lattice: &LatticeState) -> Result<()> {
    if spins != model.spin_count() || lattice.dim() != model.lattice_dim() || lattice.p.len() != lattice.q.len() {
        return Err(Error::Dimension(format!(
            "state has {spins} spins and {} lattice coordinates, model expects {} and {}",
            lattice.dim(),
            model.spin_count(),
            model.lattice_dim()
        )));
    }
    Ok(())
}

/// One step of the reduced scheme on `(S²)ⁿ × T*ℝᵐ`.
pub fn step_reduced<H>(model: &H, state: &SpinLatticeState, settings: &SolverSettings) -> Result<StepReport<SpinLatticeState>>
where
    H: ExtendedHamiltonian + ?Sized,
{
    settings.validate()?;
    check_dims(model, state.spins.len(), &state.lattice)?;
    let h = settings.step;
    let (w, q, p) = (&state.spins, &state.lattice.q, &state.lattice.p);

    let mut stage = w.clone();
    let mut q_new = drift(q, p, h, model);
    let mut residual = f64::INFINITY;

    for iteration in 1..=settings.max_iterations {
        let momentum = kick(p, &model.grad_q(&stage, q)?, 0.5 * h);
        let q_next = drift(q, &momentum, h, model);
        let field_start = model.effective_field(&stage, q)?;
        let field_end = model.effective_field(&stage, &q_next)?;

        let mut w_new = Vec::with_capacity(w.len());
        let mut stage_next = Vec::with_capacity(w.len());
        for (i, wi) in w.iter().enumerate() {
            let wt = wi + (field_start[i] + field_end[i]).cross(&stage[i]) * (0.5 * h);
            let sum = wi + wt;
            let r = sum.norm();
            if !(r >= ANTIPODAL_THRESHOLD) {
                return Err(Error::ZeroSpin { index: i });
            }
            w_new.push(wt);
            stage_next.push(sum / r);
        }

        residual = stage
            .iter()
            .zip(&stage_next)
            .map(|(a, b)| (a - b).amax())
            .fold(max_abs_diff(&q_new, &q_next), f64::max);

        if residual <= settings.fp_tolerance {
            // the returned values all come from the same stage `stage`
            let p_new = kick(&momentum, &model.grad_q(&stage, &q_next)?, 0.5 * h);
            return Ok(StepReport {
                iterations: iteration,
                residual,
                state: SpinLatticeState {
                    spins: w_new,
                    lattice: LatticeState { q: q_next, p: p_new },
                },
            });
        }
        stage = stage_next;
        q_new = q_next;
    }
    Err(Error::NoConvergence {
        iterations: settings.max_iterations,
        residual,
    })
}

fn hopf_stage(pairs: &[CollectiveSpinPair]) -> Result<(Vec<Spin>, Vec<Spin>)> {
    let ambient: Vec<Spin> = pairs.iter().map(hopf).collect();
    for (index, pair) in pairs.iter().enumerate() {
        if !(pair.norm_sqr() >= f64::MIN_POSITIVE) {
            return Err(Error::ZeroSpin { index });
        }
    }
    let unit = normalize_spins(&ambient)?;
    Ok((ambient, unit))
}

/// One step of the lifted scheme on `ℂ²ⁿ × T*ℝᵐ`.
///
/// The spin pairs use the implicit midpoint rule written as the reducible
/// two-stage tableau `a = [[¼, ¼], [¼, ¼]]`, `b = [½, ½]`, whose two stages
/// coincide at `Z` but see the lattice at `q` and `q̃` respectively.
pub fn step_collective<H>(model: &H, state: &CollectiveState, settings: &SolverSettings) -> Result<StepReport<CollectiveState>>
where
    H: ExtendedHamiltonian + ?Sized,
{
    settings.validate()?;
    check_dims(model, state.pairs.len(), &state.lattice)?;
    let h = settings.step;
    let (z, q, p) = (&state.pairs, &state.lattice.q, &state.lattice.p);
    let quarter = Complex64::new(0.0, 0.25 * h);

    let mut stage = z.clone();
    let mut q_new = drift(q, p, h, model);
    let mut residual = f64::INFINITY;

    for iteration in 1..=settings.max_iterations {
        let (ambient, unit) = hopf_stage(&stage)?;
        let momentum = kick(p, &model.grad_q(&unit, q)?, 0.5 * h);
        let q_next = drift(q, &momentum, h, model);
        let grad_start = model.extended_spin_gradient(&ambient, q)?;
        let grad_end = model.extended_spin_gradient(&ambient, &q_next)?;

        let stage_next: Vec<CollectiveSpinPair> = z
            .iter()
            .zip(&stage)
            .enumerate()
            .map(|(i, (zi, zs))| {
                let (g1, g2) = pullback_gradient(zs, &(grad_start[i] + grad_end[i]));
                CollectiveSpinPair::new(zi.z1 + quarter * g1, zi.z2 + quarter * g2)
            })
            .collect();

        residual = stage
            .iter()
            .zip(&stage_next)
            .map(|(a, b)| {
                let d1 = a.z1 - b.z1;
                let d2 = a.z2 - b.z2;
                d1.re.abs().max(d1.im.abs()).max(d2.re.abs()).max(d2.im.abs())
            })
            .fold(max_abs_diff(&q_new, &q_next), f64::max);

        if residual <= settings.fp_tolerance {
            let p_new = kick(&momentum, &model.grad_q(&unit, &q_next)?, 0.5 * h);
            let pairs = z
                .iter()
                .zip(&stage)
                .map(|(zi, zs)| CollectiveSpinPair::new(2.0 * zs.z1 - zi.z1, 2.0 * zs.z2 - zi.z2))
                .collect();
            return Ok(StepReport {
                iterations: iteration,
                residual,
                state: CollectiveState {
                    pairs,
                    lattice: LatticeState { q: q_next, p: p_new },
                },
            });
        }
        stage = stage_next;
        q_new = q_next;
    }
    Err(Error::NoConvergence {
        iterations: settings.max_iterations,
        residual,
    })
}

/// Number of whole steps of size `step` covering `[0, t_end]`.
pub fn step_count(t_end: f64, step: f64) -> Result<usize> {
    let ratio = t_end / step;
    let n = ratio.round();
    if !ratio.is_finite() || n < 0.0 || (ratio - n).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "t_end = {t_end} is not a whole number of steps of size {step}"
        )));
    }
    Ok(n as usize)
}

/// Aggregate statistics of a completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationSummary {
    pub state: SpinLatticeState,
    pub steps: usize,
    pub max_iterations: usize,
    pub max_residual: f64,
}

/// Applies [`step_reduced`] until `t_end`.
///
/// `observer` receives `(t, state, energies)` at step 0 and every `stride`
/// steps thereafter. Step errors are wrapped in [`Error::AtStep`] with the
/// zero-based index of the failing step.
pub fn integrate<H, F>(
    model: &H,
    initial: &SpinLatticeState,
    settings: &SolverSettings,
    t_end: f64,
    stride: usize,
    mut observer: F,
) -> Result<IntegrationSummary>
where
    H: ExtendedHamiltonian + ?Sized,
    F: FnMut(f64, &SpinLatticeState, &EnergyTerms),
{
    settings.validate()?;
    if stride == 0 {
        return Err(Error::InvalidParameter("observer stride must be at least 1".into()));
    }
    let steps = step_count(t_end, settings.step)?;
    let mut state = initial.clone();
    let mut max_iterations = 0;
    let mut max_residual: f64 = 0.0;

    observer(0.0, &state, &model.energy_terms(&state)?);
    for k in 0..steps {
        let report = step_reduced(model, &state, settings).map_err(|e| Error::AtStep {
            step: k,
            source: Box::new(e),
        })?;
        max_iterations = max_iterations.max(report.iterations);
        max_residual = max_residual.max(report.residual);
        state = report.state;
        if (k + 1) % stride == 0 {
            let energies = model.energy_terms(&state).map_err(|e| Error::AtStep {
                step: k,
                source: Box::new(e),
            })?;
            observer((k + 1) as f64 * settings.step, &state, &energies);
        }
    }
    Ok(IntegrationSummary {
        state,
        steps,
        max_iterations,
        max_residual,
    })
}
