//! Periodic grids, density fields, kernel convolutions, the explicit
//! cross-diffusion solver, Sobolev distances and snapshot I/O.

mod convolution;
mod density;
mod fft;
mod grid;
mod pde;
mod snapshot;
mod sobolev;

pub use convolution::{
    convolve_field, convolve_samples, Boundary, ConvolutionFields, Convolver, DEFAULT_TAIL_TOLERANCE,
};
pub use density::{init_density, DensityField, GaussianComponent, InitialCondition, SpeciesDensity, MIN_BOX_MASS};
pub use grid::{Grid, Stencil};
pub use pde::{pde_step, solve, DriftField, KernelMode, PdeParams, PdeSolver, Rate, StepReport, CFL_SAFETY};
pub use snapshot::{load_snapshot, read_snapshot, write_snapshot, write_snapshot_series, SnapshotEntry};
pub use sobolev::sobolev_distance;
