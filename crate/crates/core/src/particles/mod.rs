//! The interacting particle system, the intermediate and limit
//! McKean–Vlasov systems, and their synchronous coupling.

mod drift;
mod ensemble;
mod noise;
mod triple;

pub(crate) use drift::empirical_profile;
pub use drift::{ensemble_field_drift, field_drift, limit_drift, meanfield_drift, pairwise_drift};
pub use ensemble::{em_step, sample_initial, Ensemble, SpeciesParams};
pub use noise::{NoiseStream, MAX_REPLICAS, MAX_SPECIES};
pub use triple::{
    evolve_particles, evolve_triple, field_times, step_increments, Censoring, CoupledTriple, FieldTrajectory,
    ParticleOutcome, ParticleRecord, ParticleSetup, TripleOutcome, TripleRecord, TripleSetup, MAX_FIELD_STRIDE,
};
