//! Maps between the three state spaces used by the collective integrator.
//!
//! * `M = (S²)ⁿ × T*ℝᵐ`: unit spins plus lattice positions and momenta.
//! * `P = (ℝ³)ⁿ × T*ℝᵐ`: the ambient Lie–Poisson space, spins of any nonzero norm.
//! * `N = ℂ²ⁿ × T*ℝᵐ`: the canonical space, each spin lifted to a pair `(z₁, z₂)`.
//!
//! The Hopf map `J(z₁, z₂) = ¼ (2 Re z₁z̄₂, 2 Im z₁z̄₂, |z₁|² − |z₂|²)` carries
//! `N` onto `P`. Its norm is `‖J(z)‖ = (|z₁|² + |z₂|²) / 4`, so the preimage of
//! the sphere of radius `r` is `|z₁|² + |z₂|² = 4r`. Some references quote `2r`,
//! which corresponds to a prefactor of ½ instead of ¼; this crate uses ¼
//! throughout, so lifted unit spins satisfy `|z₁|² + |z₂|² = 4`.
//!
//! `ℂ² ≅ T*ℝ²` is identified with the real part of each `z` as the momentum
//! coordinate and the imaginary part as the position coordinate. Under this
//! identification `J` is a Poisson map onto the bracket
//! `{f, g}(w) = ⟨w, ∇f × ∇g⟩`, see [`verify_hopf_poisson`].

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// A spin vector, either on the unit sphere or in `ℝ³ \ {0}`.
pub type Spin = Vector3<f64>;

/// An ordered list of spins.
pub type SpinConfiguration = Vec<Spin>;

/// Lattice coordinates `(q, p) ∈ T*ℝᵐ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl LatticeState {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::Dimension(format!(
                "{} positions but {} momenta",
                q.len(),
                p.len()
            )));
        }
        Ok(Self { q, p })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }
}

/// A point of `M`: unit spins and lattice coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinLatticeState {
    pub spins: SpinConfiguration,
    pub lattice: LatticeState,
}

impl SpinLatticeState {
    /// Builds a state, rejecting spins whose norm differs from one by more than `1e-12`.
    pub fn new(spins: SpinConfiguration, lattice: LatticeState) -> Result<Self> {
        for (index, w) in spins.iter().enumerate() {
            if (w.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "spin {index} has norm {} (expected 1)",
                    w.norm()
                )));
            }
        }
        Ok(Self { spins, lattice })
    }

    /// Concatenation `(w, q, p)` as one flat vector.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.spins.len() + 2 * self.lattice.dim());
        for w in &self.spins {
            out.extend_from_slice(w.as_slice());
        }
        out.extend_from_slice(&self.lattice.q);
        out.extend_from_slice(&self.lattice.p);
        out
    }
}

/// The lifted coordinates `(z₁, z₂)` of a single spin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectiveSpinPair {
    pub z1: Complex64,
    pub z2: Complex64,
}

impl CollectiveSpinPair {
    pub fn new(z1: Complex64, z2: Complex64) -> Self {
        Self { z1, z2 }
    }

    /// `|z₁|² + |z₂|²`, four times the norm of the image spin.
    pub fn norm_sqr(&self) -> f64 {
        self.z1.norm_sqr() + self.z2.norm_sqr()
    }

    /// Multiplies both components by `e^{iθ}`. This moves along a fiber of the Hopf map.
    pub fn rotate_phase(&self, theta: f64) -> Self {
        let u = Complex64::from_polar(1.0, theta);
        Self {
            z1: u * self.z1,
            z2: u * self.z2,
        }
    }
}

/// A point of `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveState {
    pub pairs: Vec<CollectiveSpinPair>,
    pub lattice: LatticeState,
}

/// The Hopf fibration map `ℂ² → ℝ³`.
pub fn hopf(pair: &CollectiveSpinPair) -> Spin {
    let c = pair.z1 * pair.z2.conj();
    Vector3::new(
        0.5 * c.re,
        0.5 * c.im,
        0.25 * (pair.z1.norm_sqr() - pair.z2.norm_sqr()),
    )
}

/// Applies [`hopf`] to every pair; the lattice coordinates pass through.
pub fn hopf_all(state: &CollectiveState) -> (SpinConfiguration, LatticeState) {
    (
        state.pairs.iter().map(hopf).collect(),
        state.lattice.clone(),
    )
}

/// A right inverse of [`hopf`].
///
/// Picks whichever of `z₁` or `z₂` has the larger modulus to be real and
/// nonnegative, so neither pole divides by a small number.
pub fn lift(spin: &Spin) -> Result<CollectiveSpinPair> {
    let r = spin.norm();
    if r == 0.0 || !r.is_finite() {
        return Err(Error::ZeroSpin { index: 0 });
    }
    let (w1, w2, w3) = (spin.x, spin.y, spin.z);
    if r + w3 >= r - w3 {
        let z1 = (2.0 * r + 2.0 * w3).sqrt();
        let z2 = Complex64::new(2.0 * w1 / z1, -2.0 * w2 / z1);
        Ok(CollectiveSpinPair::new(Complex64::new(z1, 0.0), z2))
    } else {
        let z2 = (2.0 * r - 2.0 * w3).sqrt();
        let z1 = Complex64::new(2.0 * w1 / z2, 2.0 * w2 / z2);
        Ok(CollectiveSpinPair::new(z1, Complex64::new(z2, 0.0)))
    }
}

/// Lifts every spin of `state` into `N`.
pub fn lift_state(state: &SpinLatticeState) -> Result<CollectiveState> {
    let pairs = state
        .spins
        .iter()
        .enumerate()
        .map(|(index, w)| lift(w).map_err(|_| Error::ZeroSpin { index }))
        .collect::<Result<Vec<_>>>()?;
    Ok(CollectiveState {
        pairs,
        lattice: state.lattice.clone(),
    })
}

/// Scales each spin to unit length.
pub fn normalize_spins(spins: &[Spin]) -> Result<SpinConfiguration> {
    spins
        .iter()
        .enumerate()
        .map(|(index, w)| {
            let r = w.norm();
            if r == 0.0 || !r.is_finite() {
                Err(Error::ZeroSpin { index })
            } else {
                Ok(w / r)
            }
        })
        .collect()
}

/// Projects a point of `P` onto the leaf `M` along rays.
pub fn project(ambient_spins: &[Spin], lattice: &LatticeState) -> Result<SpinLatticeState> {
    Ok(SpinLatticeState {
        spins: normalize_spins(ambient_spins)?,
        lattice: lattice.clone(),
    })
}

/// Partial derivatives of the three Hopf components with respect to
/// `(Re z₁, Im z₁, Re z₂, Im z₂)`.
pub fn hopf_jacobian(pair: &CollectiveSpinPair) -> [[f64; 4]; 3] {
    let (x1, y1) = (pair.z1.re, pair.z1.im);
    let (x2, y2) = (pair.z2.re, pair.z2.im);
    [
        [0.5 * x2, 0.5 * y2, 0.5 * x1, 0.5 * y1],
        [-0.5 * y2, 0.5 * x2, 0.5 * y1, -0.5 * x1],
        [0.5 * x1, 0.5 * y1, -0.5 * x2, -0.5 * y2],
    ]
}

/// Pulls a gradient `∂H/∂w` back through the Hopf map.
///
/// Returns `∂H/∂(Re z_k) + i ∂H/∂(Im z_k)` for `k = 1, 2`. The Hamiltonian
/// vector field on `ℂ²` is `i` times this value.
pub fn pullback_gradient(pair: &CollectiveSpinPair, grad: &Spin) -> (Complex64, Complex64) {
    let (g1, g2, g3) = (grad.x, grad.y, grad.z);
    let (z1, z2) = (pair.z1, pair.z2);
    let gz1 = (Complex64::new(g1, g2) * z2 + g3 * z1) * 0.5;
    let gz2 = (Complex64::new(g1, -g2) * z1 - g3 * z2) * 0.5;
    (gz1, gz2)
}

/// Canonical bracket of two functions on `ℂ²` given their gradients in
/// `(Re z₁, Im z₁, Re z₂, Im z₂)` ordering.
fn canonical_bracket(df: &[f64; 4], dg: &[f64; 4]) -> f64 {
    // real parts are momenta, imaginary parts positions
    (0..2)
        .map(|k| {
            let (p, q) = (2 * k, 2 * k + 1);
            df[q] * dg[p] - df[p] * dg[q]
        })
        .sum()
}

/// Residuals `{J_a, J_b} − ⟨w, e_a × e_b⟩` at `w = hopf(pair)`.
///
/// A Poisson Hopf map gives a zero matrix.
pub fn verify_hopf_poisson(pair: &CollectiveSpinPair) -> [[f64; 3]; 3] {
    let jac = hopf_jacobian(pair);
    let w = hopf(pair);
    let mut out = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            let target = w.cross(&Vector3::ith(a, 1.0)).dot(&Vector3::ith(b, 1.0));
            out[a][b] = canonical_bracket(&jac[a], &jac[b]) - target;
        }
    }
    out
}
