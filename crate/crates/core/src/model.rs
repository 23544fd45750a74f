//! Hamiltonians of the form `H̄(w, q, p) = T_L(p) + H₁(w, q)`.
//!
//! `H₁(w, q) = U_L(q) + H_m(ρ₁(w), q)` is constant along rays in each spin,
//! so models only evaluate the magnetic energy at unit spins. The shipped
//! model is a periodic one-dimensional chain with nearest-neighbour
//! Lennard-Jones and cubic cut-off spin couplings.

use crate::error::{Error, Result};
use crate::geometry::{normalize_spins, Spin, SpinLatticeState};

/// Block-diagonal mass matrix, one mass per particle repeated over `block` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MassMatrix {
    masses: Vec<f64>,
    block: usize,
}

impl MassMatrix {
    pub fn new(masses: Vec<f64>, block: usize) -> Result<Self> {
        if block == 0 {
            return Err(Error::InvalidParameter("mass block size must be positive".into()));
        }
        if let Some(m) = masses.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidParameter(format!("mass {m} is not positive")));
        }
        Ok(Self { masses, block })
    }

    pub fn uniform(particles: usize, mass: f64, block: usize) -> Result<Self> {
        Self::new(vec![mass; particles], block)
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Number of lattice coordinates `m = d·k`.
    pub fn dim(&self) -> usize {
        self.masses.len() * self.block
    }

    /// Mass attached to lattice coordinate `j`.
    #[inline]
    pub fn mass_of(&self, j: usize) -> f64 {
        self.masses[j / self.block]
    }

    /// `M⁻¹ v`.
    pub fn apply_inverse(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(j, x)| x / self.mass_of(j))
            .collect()
    }

    /// `T_L(p) = Σ p_j² / 2m_j`.
    pub fn kinetic(&self, p: &[f64]) -> f64 {
        p.iter()
            .enumerate()
            .map(|(j, x)| x * x / (2.0 * self.mass_of(j)))
            .sum()
    }
}

/// The three energy contributions and their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyTerms {
    pub kinetic: f64,
    pub potential: f64,
    pub magnetic: f64,
    pub total: f64,
}

impl EnergyTerms {
    pub fn new(kinetic: f64, potential: f64, magnetic: f64) -> Self {
        Self {
            kinetic,
            potential,
            magnetic,
            total: magnetic + potential + kinetic,
        }
    }
}

/// A spin-lattice Hamiltonian with analytic gradients.
///
/// Spin arguments to `magnetic`, `grad_q` and `effective_field` are expected
/// to be unit vectors. The `extended_*` methods accept any nonzero spins and
/// apply the ray projection first.
pub trait ExtendedHamiltonian {
    fn spin_count(&self) -> usize;

    fn mass_matrix(&self) -> &MassMatrix;

    /// Lattice potential `U_L(q)`.
    fn potential(&self, q: &[f64]) -> Result<f64>;

    /// Magnetic energy `H_m(w, q)`.
    fn magnetic(&self, spins: &[Spin], q: &[f64]) -> Result<f64>;

    /// `∂H₁/∂q`. The force on the lattice is the negative of this.
    fn grad_q(&self, spins: &[Spin], q: &[f64]) -> Result<Vec<f64>>;

    /// `g_i = ∂H_m/∂w_i` with the spins treated as free vectors in `ℝ³`.
    fn effective_field(&self, spins: &[Spin], q: &[f64]) -> Result<Vec<Spin>>;

    fn lattice_dim(&self) -> usize {
        self.mass_matrix().dim()
    }

    fn kinetic(&self, p: &[f64]) -> f64 {
        self.mass_matrix().kinetic(p)
    }

    fn energy_terms(&self, state: &SpinLatticeState) -> Result<EnergyTerms> {
        let lattice = &state.lattice;
        Ok(EnergyTerms::new(
            self.kinetic(&lattice.p),
            self.potential(&lattice.q)?,
            self.magnetic(&state.spins, &lattice.q)?,
        ))
    }

    /// `H₁(w, q) = U_L(q) + H_m(ρ₁(w), q)` for ambient spins.
    fn extended_potential(&self, spins: &[Spin], q: &[f64]) -> Result<f64> {
        let unit = normalize_spins(spins)?;
        Ok(self.potential(q)? + self.magnetic(&unit, q)?)
    }

    /// `∂H₁/∂w` for ambient spins, i.e. `(I − ŵŵᵀ) g(ŵ) / ‖w‖`.
    fn extended_spin_gradient(&self, spins: &[Spin], q: &[f64]) -> Result<Vec<Spin>> {
        let unit = normalize_spins(spins)?;
        let field = self.effective_field(&unit, q)?;
        Ok(spins
            .iter()
            .zip(unit.iter().zip(field))
            .map(|(w, (u, g))| (g - u * u.dot(&g)) / w.norm())
            .collect())
    }
}

/// `U(r) = U₀[(r_m/r)¹² − 2(r_m/r)⁶]` and its derivative.
pub fn lennard_jones(r: f64, u0: f64, r_m: f64) -> Result<(f64, f64)> {
    if r <= 0.0 || r.is_nan() {
        return Err(Error::NonpositiveSeparation { bond: 0, gap: r });
    }
    let s6 = (r_m / r).powi(6);
    let s12 = s6 * s6;
    let u = u0 * (s12 - 2.0 * s6);
    let du = 12.0 * u0 * (s6 - s12) / r;
    Ok((u, du))
}

/// `J(r) = J₀(1 − r/r_c)³` inside the cut-off, zero beyond; with derivative.
pub fn coupling(r: f64, j0: f64, r_c: f64) -> (f64, f64) {
    if r >= r_c {
        return (0.0, 0.0);
    }
    let t = 1.0 - r / r_c;
    (j0 * t * t * t, -3.0 * j0 * t * t / r_c)
}

/// Sign and counting convention for the magnetic energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MagneticConvention {
    /// `H_m = Σ_i J(q_{i+1} − q_i) ⟨w_i, w_{i+1}⟩`, each bond counted once.
    #[default]
    Chain,
    /// `H_m = −½ Σ_{i,j} J_ij ⟨w_i, w_j⟩`, which for the chain is the negative of [`Chain`](Self::Chain).
    Pairwise,
}

impl MagneticConvention {
    fn sign(self) -> f64 {
        match self {
            MagneticConvention::Chain => 1.0,
            MagneticConvention::Pairwise => -1.0,
        }
    }
}

/// Parameters of the periodic chain. `Default` is the reference experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainParameters {
    pub n: usize,
    pub period: f64,
    pub masses: Vec<f64>,
    pub u0: f64,
    pub r_m: f64,
    pub j0: f64,
    pub r_c: f64,
    pub convention: MagneticConvention,
}

impl Default for ChainParameters {
    fn default() -> Self {
        Self {
            n: 30,
            period: 30.0,
            masses: vec![1.0; 30],
            u0: 1.0,
            r_m: 1.0,
            j0: 10.0,
            r_c: 1.5,
            convention: MagneticConvention::Chain,
        }
    }
}

/// Periodic 1-D spin-lattice chain with nearest-neighbour interactions.
///
/// Bond `i` joins particle `i` to particle `i + 1`; the last bond wraps to the
/// first particle shifted by one period. For `n = 2` both bonds join the same
/// pair of particles, so each spin sees its neighbour twice.
#[derive(Debug, Clone, PartialEq)]
pub struct SleChainModel {
    params: ChainParameters,
    masses: MassMatrix,
}

impl SleChainModel {
    pub fn new(params: ChainParameters) -> Result<Self> {
        let p = &params;
        if p.n < 2 {
            return Err(Error::InvalidParameter("chain needs at least two particles".into()));
        }
        if p.masses.len() != p.n {
            return Err(Error::Dimension(format!(
                "{} masses for {} particles",
                p.masses.len(),
                p.n
            )));
        }
        for (name, v) in [("period", p.period), ("r_m", p.r_m), ("r_c", p.r_c)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(p.u0.is_finite() && p.j0.is_finite()) {
            return Err(Error::InvalidParameter("U0 and J0 must be finite".into()));
        }
        let masses = MassMatrix::new(p.masses.clone(), 1)?;
        Ok(Self { params, masses })
    }

    pub fn params(&self) -> &ChainParameters {
        &self.params
    }

    /// Bond lengths `q_{i+1} − q_i`, with `q_{n+1} = q_1 + L`.
    pub fn gaps(&self, q: &[f64]) -> Result<Vec<f64>> {
        let n = self.params.n;
        if q.len() != n {
            return Err(Error::Dimension(format!("{} positions for {n} particles", q.len())));
        }
        (0..n)
            .map(|i| {
                let gap = if i + 1 < n {
                    q[i + 1] - q[i]
                } else {
                    q[0] + self.params.period - q[i]
                };
                if gap > 0.0 {
                    Ok(gap)
                } else {
                    Err(Error::NonpositiveSeparation { bond: i, gap })
                }
            })
            .collect()
    }

    fn check_spins(&self, spins: &[Spin]) -> Result<()> {
        if spins.len() != self.params.n {
            return Err(Error::Dimension(format!(
                "{} spins for {} particles",
                spins.len(),
                self.params.n
            )));
        }
        Ok(())
    }
}

impl ExtendedHamiltonian for SleChainModel {
    fn spin_count(&self) -> usize {
        self.params.n
    }

    fn mass_matrix(&self) -> &MassMatrix {
        &self.masses
    }

    fn potential(&self, q: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (bond, r) in self.gaps(q)?.into_iter().enumerate() {
            let (u, _) = lennard_jones(r, self.params.u0, self.params.r_m)
                .map_err(|_| Error::NonpositiveSeparation { bond, gap: r })?;
            total += u;
        }
        Ok(total)
    }

    fn magnetic(&self, spins: &[Spin], q: &[f64]) -> Result<f64> {
        self.check_spins(spins)?;
        let n = self.params.n;
        let total: f64 = self
            .gaps(q)?
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                let (j, _) = coupling(r, self.params.j0, self.params.r_c);
                j * spins[i].dot(&spins[(i + 1) % n])
            })
            .sum();
        Ok(self.params.convention.sign() * total)
    }

    fn grad_q(&self, spins: &[Spin], q: &[f64]) -> Result<Vec<f64>> {
        self.check_spins(spins)?;
        let n = self.params.n;
        let sign = self.params.convention.sign();
        let gaps = self.gaps(q)?;
        // dE/d(gap_i) for each bond
        let mut bond_force = Vec::with_capacity(n);
        for (i, &r) in gaps.iter().enumerate() {
            let (_, du) = lennard_jones(r, self.params.u0, self.params.r_m)?;
            let (_, dj) = coupling(r, self.params.j0, self.params.r_c);
            bond_force.push(du + sign * dj * spins[i].dot(&spins[(i + 1) % n]));
        }
        // gap_i = q_{i+1} - q_i
        Ok((0..n)
            .map(|j| bond_force[(j + n - 1) % n] - bond_force[j])
            .collect())
    }

    fn effective_field(&self, spins: &[Spin], q: &[f64]) -> Result<Vec<Spin>> {
        self.check_spins(spins)?;
        let n = self.params.n;
        let sign = self.params.convention.sign();
        let strength: Vec<f64> = self
            .gaps(q)?
            .into_iter()
            .map(|r| sign * coupling(r, self.params.j0, self.params.r_c).0)
            .collect();
        Ok((0..n)
            .map(|i| {
                let prev = (i + n - 1) % n;
                let next = (i + 1) % n;
                spins[prev] * strength[prev] + spins[next] * strength[i]
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LatticeState;
    use nalgebra::Vector3;

    fn chain(n: usize, period: f64, j0: f64, u0: f64) -> SleChainModel {
        SleChainModel::new(ChainParameters {
            n,
            period,
            masses: vec![1.0; n],
            u0,
            j0,
            ..ChainParameters::default()
        })
        .unwrap()
    }

    #[test]
    fn lennard_jones_examples() {
        let (u, du) = lennard_jones(1.0, 1.0, 1.0).unwrap();
        assert_eq!((u, du), (-1.0, 0.0));
        let (u, _) = lennard_jones(1e6, 1.0, 1.0).unwrap();
        assert!(u.abs() < 1e-30);
        let r = 2.5 / 2f64.powf(1.0 / 6.0);
        let (u, _) = lennard_jones(r, 3.0, 2.5).unwrap();
        assert!(u.abs() < 1e-13);
        assert!(matches!(
            lennard_jones(0.0, 1.0, 1.0),
            Err(Error::NonpositiveSeparation { .. })
        ));
        assert!(lennard_jones(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn lennard_jones_derivative_matches_difference() {
        for r in [0.8, 1.0, 1.3, 2.7] {
            let h = 1e-6;
            let fd = (lennard_jones(r + h, 1.5, 1.1).unwrap().0
                - lennard_jones(r - h, 1.5, 1.1).unwrap().0)
                / (2.0 * h);
            let (_, du) = lennard_jones(r, 1.5, 1.1).unwrap();
            assert!((fd - du).abs() <= 1e-6 * du.abs().max(1.0));
        }
    }

    #[test]
    fn coupling_examples() {
        assert_eq!(coupling(0.0, 10.0, 1.5).0, 10.0);
        assert_eq!(coupling(1.5, 10.0, 1.5), (0.0, 0.0));
        assert_eq!(coupling(2.0, 10.0, 1.5), (0.0, 0.0));
        assert!((coupling(0.75, 10.0, 1.5).0 - 1.25).abs() < 1e-15);
        // continuity approaching the cut-off
        let (j, dj) = coupling(1.5 - 1e-9, 10.0, 1.5);
        assert!(j.abs() < 1e-20 && dj.abs() < 1e-15);
    }

    #[test]
    fn mass_matrix_kinetic() {
        let m = MassMatrix::uniform(1, 1.0, 1).unwrap();
        assert_eq!(m.kinetic(&[2.0]), 2.0);
        let m = MassMatrix::new(vec![2.0, 4.0], 3).unwrap();
        assert_eq!(m.dim(), 6);
        assert_eq!(m.mass_of(4), 4.0);
        assert_eq!(m.apply_inverse(&[2.0; 6]), vec![1.0, 1.0, 1.0, 0.5, 0.5, 0.5]);
        assert!(MassMatrix::new(vec![1.0, 0.0], 1).is_err());
    }

    #[test]
    fn resting_chain_beyond_cutoff() {
        // gaps = r_m = 1 with cut-off below one: coupling vanishes
        let model = SleChainModel::new(ChainParameters {
            n: 5,
            period: 5.0,
            masses: vec![1.0; 5],
            r_c: 0.9,
            ..ChainParameters::default()
        })
        .unwrap();
        let spins = vec![Vector3::new(0.0, 0.0, 1.0); 5];
        let q: Vec<f64> = (1..=5).map(f64::from).collect();
        let state = SpinLatticeState::new(spins.clone(), LatticeState::new(q.clone(), vec![0.0; 5]).unwrap()).unwrap();
        let e = model.energy_terms(&state).unwrap();
        assert_eq!(e, EnergyTerms::new(0.0, -5.0, 0.0));
        assert_eq!(model.grad_q(&spins, &q).unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn crossing_particles_are_rejected() {
        let model = chain(3, 3.0, 10.0, 1.0);
        let spins = vec![Vector3::new(0.0, 0.0, 1.0); 3];
        let err = model.grad_q(&spins, &[1.0, 0.5, 2.0]).unwrap_err();
        assert_eq!(err, Error::NonpositiveSeparation { bond: 0, gap: -0.5 });
        let err = model.potential(&[0.0, 1.0, 3.5]).unwrap_err();
        assert!(matches!(err, Error::NonpositiveSeparation { bond: 2, .. }));
    }

    #[test]
    fn zero_coupling_gives_zero_field() {
        let model = chain(4, 4.0, 0.0, 1.0);
        let spins = vec![Vector3::new(1.0, 0.0, 0.0); 4];
        let field = model.effective_field(&spins, &[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!(field.iter().all(|g| g.norm() == 0.0));
    }

    #[test]
    fn two_spins_see_both_periodic_bonds() {
        let model = chain(2, 2.0, 10.0, 1.0);
        let w1 = Vector3::new(1.0, 0.0, 0.0);
        let w2 = Vector3::new(0.0, 1.0, 0.0);
        let (j, _) = coupling(1.0, 10.0, 1.5);
        let g = model.effective_field(&[w1, w2], &[0.0, 1.0]).unwrap();
        assert!((g[0] - w2 * 2.0 * j).norm() < 1e-15);
        assert!((g[1] - w1 * 2.0 * j).norm() < 1e-15);
        // one bond inside the cut-off, the other outside
        let g = model.effective_field(&[w1, w2], &[0.0, 0.5]).unwrap();
        let (j_in, _) = coupling(0.5, 10.0, 1.5);
        assert!((g[0] - w2 * j_in).norm() < 1e-15);
        assert!((g[1] - w1 * j_in).norm() < 1e-15);
    }

    #[test]
    fn pairwise_convention_flips_sign() {
        let mut params = ChainParameters::default();
        let chain_model = SleChainModel::new(params.clone()).unwrap();
        params.convention = MagneticConvention::Pairwise;
        let pair_model = SleChainModel::new(params).unwrap();
        let spins: Vec<Spin> = (0..30)
            .map(|k| Vector3::new((k as f64).cos(), (k as f64).sin(), 0.5).normalize())
            .collect();
        let q: Vec<f64> = (1..=30).map(|k| k as f64 + 0.1 * (k as f64).sin()).collect();
        let a = chain_model.magnetic(&spins, &q).unwrap();
        let b = pair_model.magnetic(&spins, &q).unwrap();
        assert!(a != 0.0);
        assert_eq!(a, -b);
    }

    #[test]
    fn extended_gradient_is_tangent_and_ray_scaled() {
        let model = chain(3, 3.0, 10.0, 1.0);
        let q = [0.0, 1.1, 2.0];
        let spins = vec![
            Vector3::new(0.2, 0.4, 1.0),
            Vector3::new(-1.0, 0.3, 0.2),
            Vector3::new(0.5, -0.5, 0.5),
        ];
        let grad = model.extended_spin_gradient(&spins, &q).unwrap();
        for (w, g) in spins.iter().zip(&grad) {
            assert!(w.dot(g).abs() < 1e-14);
        }
        // central differences of H1 at ambient spins
        let h = 1e-6;
        for i in 0..3 {
            for a in 0..3 {
                let mut plus = spins.clone();
                let mut minus = spins.clone();
                plus[i][a] += h;
                minus[i][a] -= h;
                let fd = (model.extended_potential(&plus, &q).unwrap()
                    - model.extended_potential(&minus, &q).unwrap())
                    / (2.0 * h);
                assert!((fd - grad[i][a]).abs() < 1e-7, "{i} {a}: {fd} vs {}", grad[i][a]);
            }
        }
    }
}
