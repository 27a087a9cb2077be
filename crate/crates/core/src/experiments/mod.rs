//! Configuration schema, admissible exponents, scale derivation, sweep
//! drivers and output aggregation.

mod config;
mod report;
mod run;
mod scales;

pub use config::{
    parse_config, resolved_toml, validate_config, validate_plan, Coefficient, Config, ExperimentPlan, FamilyKind, GridSection, KernelKind,
    ModelSection, NonlinearitySection, ParticlesSection, PerPair, PerSpecies, RunSection, ScalingSection, System,
    DEFAULT_INITIAL_VARIANCE,
};
pub use report::{rate_table, report, RateRow, Report};
pub use run::{read_ndjson, resolve_workers, run_plan, RunOutcome, SummaryRecord, WORKERS_ENV};
pub use scales::{admissible_exponents, derive_scales, AdmissibleExponents, Scales};
