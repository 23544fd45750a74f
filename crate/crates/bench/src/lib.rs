//! Shared fixtures for the benchmarks.

use spinlattice::experiment::{reference_initial_state, ExperimentConfig};
use spinlattice::{lift_state, CollectiveState, SleChainModel, SolverSettings, SpinLatticeState};

/// Reference 30-particle chain, its initial state and the default solver settings.
pub fn reference_chain() -> (SleChainModel, SpinLatticeState, SolverSettings) {
    let config = ExperimentConfig::default();
    let model = config.model().expect("default config is valid");
    let state = reference_initial_state(config.chain.n).expect("n >= 2");
    (model, state, config.settings().expect("default settings are valid"))
}

pub fn reference_lifted() -> CollectiveState {
    let (_, state, _) = reference_chain();
    lift_state(&state).expect("unit spins lift")
}
