use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("quadrature did not converge: estimated relative error {estimated:.3e} exceeds {tolerance:.1e} at r = {radius}")]
    Quadrature {
        estimated: f64,
        tolerance: f64,
        radius: f64,
    },

    #[error("unsupported derivative order {0} (at most 3)")]
    UnsupportedOrder(usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("kernel tail too heavy for the box: |K(L)|/|K(0)| = {ratio:.3e} exceeds {tolerance:.1e}")]
    KernelTail { ratio: f64, tolerance: f64 },

    #[error("stability bound violated: dt = {dt:.4e} exceeds bound {bound:.4e} (ratio {ratio:.3})")]
    Stability { dt: f64, bound: f64, ratio: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite position for species {species}, particle {particle}")]
    NonFinite { species: usize, particle: usize },

    #[error("non-finite density for species {species} at t = {time}")]
    NonFiniteDensity { species: usize, time: f64 },

    #[error("numerical blow-up in replica {replica}, species {species}, particle {particle}, step {step}")]
    Blowup {
        replica: usize,
        species: usize,
        particle: usize,
        step: usize,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
