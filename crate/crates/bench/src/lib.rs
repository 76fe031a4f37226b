//! Shared inputs for the kernel benchmarks.

use dualkin_core::fixtures::Fixtures;
use dualkin_core::{HamiltonianSet, ObservableSequence, OneParticleState, ParticleModel};

pub struct Workload {
    pub model: ParticleModel,
    pub set: HamiltonianSet,
    pub observables: ObservableSequence,
    pub state: OneParticleState,
}

/// Seeded two-level model with a three-entry observable sequence and a
/// one-particle state of trace 0.2.
pub fn workload(seed: u64, max_particles: usize) -> Workload {
    let mut fx = Fixtures::new(seed);
    let model = fx.model(2, 1.0, 1.0);
    let set = HamiltonianSet::new(&model, max_particles).expect("valid model");
    let observables = fx.observable_sequence(2, 3);
    let state = OneParticleState::physical(fx.density_matrix(2, 0.2)).expect("density matrix");
    Workload { model, set, observables, state }
}
