//! Collective symplectic integration of spin-lattice systems on `(S²)ⁿ × T*ℝᵐ`.
//!
//! The crate is organised in layers:
//!
//! * [`geometry`]: Hopf lift, ray projections and the Poisson check.
//! * [`model`]: extended Hamiltonians and the periodic spin-lattice chain.
//! * [`integrator`]: the spherical-midpoint / Störmer–Verlet stepper, its lifted twin and the time loop.
//! * [`tableau`]: exact symplecticity conditions for multi-component partitioned Runge–Kutta methods.
//! * [`experiment`]: configuration, reference initial data, energy series and convergence studies.

pub mod error;
pub mod experiment;
pub mod geometry;
pub mod integrator;
pub mod model;
pub mod tableau;

pub use error::{Error, Result};
pub use experiment::{converge, reference_initial_state, simulate, ConvergenceStudy, ExperimentConfig, SimulationOutput};
pub use geometry::{
    hopf, hopf_all, lift, lift_state, normalize_spins, project, verify_hopf_poisson, CollectiveSpinPair, CollectiveState,
    LatticeState, Spin, SpinConfiguration, SpinLatticeState,
};
pub use integrator::{integrate, step_collective, step_reduced, IntegrationSummary, SolverSettings, StepReport};
pub use model::{
    coupling, lennard_jones, ChainParameters, EnergyTerms, ExtendedHamiltonian, MagneticConvention, MassMatrix,
    SleChainModel,
};
pub use tableau::{
    check_partitioned_pair, check_rk_symplectic, check_scheme, empirical_invariant_test, parse_scheme, ButcherTableau,
    InvariantTest, PartitionedScheme, SchemeComponent, Verdict, Violation,
};
