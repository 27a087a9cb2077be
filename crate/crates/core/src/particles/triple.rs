use serde::{Deserialize, Serialize};

use super::drift::{ensemble_field_drift, pairwise_drift};
use super::ensemble::{em_step, sample_initial, Ensemble, SpeciesParams};
use super::noise::NoiseStream;
use crate::error::{Error, Result};
use crate::fields::{ConvolutionFields, DensityField, InitialCondition, PdeSolver};
use crate::kernels::PairKernels;
use crate::nonlinearity::RateFunction;

/// Largest allowed spacing between stored field snapshots, in time steps.
pub const MAX_FIELD_STRIDE: usize = 10;

/// Convolution fields of a PDE solution at increasing snapshot times,
/// read piecewise constantly: [`FieldTrajectory::at`] returns the latest
/// snapshot not after `t`.
pub struct FieldTrajectory {
    times: Vec<f64>,
    fields: Vec<ConvolutionFields>,
}

impl FieldTrajectory {
    pub fn new(times: Vec<f64>, fields: Vec<ConvolutionFields>) -> Result<Self> {
        if times.is_empty() || times.len() != fields.len() {
            return Err(Error::InsufficientData(format!(
                "{} snapshot times for {} fields",
                times.len(),
                fields.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times[0] != 0.0 {
            return Err(Error::InvalidSpec("snapshot times must start at 0 and increase".into()));
        }
        Ok(Self { times, fields })
    }

    /// Solves from `u0` and stores the convolution fields at `times`.
    pub fn from_solver(solver: &PdeSolver, u0: DensityField, times: &[f64]) -> Result<Self> {
        let mut field = u0;
        let mut fields = Vec::with_capacity(times.len());
        for &t in times {
            solver.advance(&mut field, t)?;
            fields.push(solver.convolve(&field)?);
        }
        Self::new(times.to_vec(), fields)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn at(&self, t: f64) -> &ConvolutionFields {
        let slack = 1e-9 * t.abs().max(1.0);
        let k = self.times.partition_point(|&s| s <= t + slack);
        &self.fields[k.saturating_sub(1)]
    }
}

/// Snapshot times `0, sΔt, 2sΔt, ...` covering `steps` steps of size `dt`.
pub fn field_times(dt: f64, steps: usize, stride: usize) -> Vec<f64> {
    let stride = stride.max(1);
    let mut t: Vec<f64> = (0..=steps).step_by(stride).map(|k| k as f64 * dt).collect();
    if !steps.is_multiple_of(stride) {
        t.push(steps as f64 * dt);
    }
    t
}

/// The interacting `X`, intermediate `X̄` and limit `X̂` ensembles of one
/// replica, started from identical samples.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledTriple {
    pub replica: usize,
    pub interacting: Ensemble,
    pub intermediate: Ensemble,
    pub limit: Ensemble,
}

impl CoupledTriple {
    pub fn sample(u0: &InitialCondition, particles: usize, dimension: usize, noise: &NoiseStream, replica: usize) -> Result<Self> {
        let ens = sample_initial(u0, particles, dimension, noise, replica)?;
        Ok(Self {
            replica,
            interacting: ens.clone(),
            intermediate: ens.clone(),
            limit: ens,
        })
    }
}

/// Everything shared by the replicas of a coupled run.
pub struct TripleSetup<'a> {
    pub params: &'a SpeciesParams,
    /// Kernels of the interacting system.
    pub kernels: &'a PairKernels,
    /// `f_γ`, used by `X` and `X̄`.
    pub cutoff: &'a dyn RateFunction,
    /// `f`, used by `X̂`.
    pub raw: &'a dyn RateFunction,
    pub meanfield: &'a FieldTrajectory,
    pub limit: &'a FieldTrajectory,
    pub noise: &'a NoiseStream,
    pub dt: f64,
    pub steps: usize,
    pub record_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleRecord {
    pub replica: usize,
    pub step: usize,
    pub time: f64,
    /// Per species `max_k |X - X̄|`.
    pub x_xbar: Vec<f64>,
    /// Per species `max_k |X̄ - X̂|`.
    pub xbar_xhat: Vec<f64>,
    /// Per species `max_k |X - X̂|`.
    pub x_xhat: Vec<f64>,
    /// Per-particle triangle inequality held.
    pub triangle: bool,
    /// Per-species mean of `X`.
    pub mean: Vec<Vec<f64>>,
    /// Per-species RMS of `|X|`.
    pub rms_radius: Vec<f64>,
}

impl TripleRecord {
    pub fn sum_x_xbar(&self) -> f64 {
        self.x_xbar.iter().sum()
    }

    pub fn sum_xbar_xhat(&self) -> f64 {
        self.xbar_xhat.iter().sum()
    }

    pub fn sum_x_xhat(&self) -> f64 {
        self.x_xhat.iter().sum()
    }
}

/// Where a replica blew up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Censoring {
    pub species: usize,
    pub particle: usize,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripleOutcome {
    pub records: Vec<TripleRecord>,
    pub censored: Option<Censoring>,
}

fn distances(a: &Ensemble, b: &Ensemble) -> Vec<Vec<f64>> {
    let d = a.dimension();
    (0..a.species())
        .map(|i| {
            a.species_positions(i)
                .chunks_exact(d)
                .zip(b.species_positions(i).chunks_exact(d))
                .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt())
                .collect()
        })
        .collect()
}

fn max_each(v: &[Vec<f64>]) -> Vec<f64> {
    v.iter().map(|s| s.iter().copied().fold(0.0, f64::max)).collect()
}

fn record(triple: &CoupledTriple, step: usize, time: f64) -> TripleRecord {
    let a = distances(&triple.interacting, &triple.intermediate);
    let b = distances(&triple.intermediate, &triple.limit);
    let c = distances(&triple.interacting, &triple.limit);
    let slack = 4.0 * f64::EPSILON;
    let triangle = a
        .iter()
        .flatten()
        .zip(b.iter().flatten())
        .zip(c.iter().flatten())
        .all(|((p, q), r)| *r <= (p + q) * (1.0 + slack) + f64::MIN_POSITIVE);
    TripleRecord {
        replica: triple.replica,
        step,
        time,
        x_xbar: max_each(&a),
        xbar_xhat: max_each(&b),
        x_xhat: max_each(&c),
        triangle,
        mean: triple.interacting.means(),
        rms_radius: triple.interacting.rms_radii(),
    }
}

/// Shared increments `ΔW` for every particle of one step.
pub fn step_increments(noise: &NoiseStream, replica: usize, ens: &Ensemble, step: usize, dt: f64) -> Vec<f64> {
    let d = ens.dimension();
    let np = ens.particles();
    let mut out = vec![0.0; ens.positions().len()];
    for (flat, w) in out.chunks_exact_mut(d).enumerate() {
        noise.increment(replica, flat / np, flat % np, step, dt, w);
    }
    out
}

fn censor(err: Error, step: usize) -> Result<Censoring> {
    match err {
        Error::NonFinite { species, particle } => Ok(Censoring {
            species,
            particle,
            step,
        }),
        other => Err(other),
    }
}

/// Advances all three systems with identical increments and records the
/// pathwise gaps every `record_every` steps and at the final step. A
/// blow-up ends the replica and is reported as censoring; other errors
/// propagate.
pub fn evolve_triple(triple: &mut CoupledTriple, setup: &TripleSetup<'_>) -> Result<TripleOutcome> {
    let end = setup.steps as f64 * setup.dt;
    if setup.meanfield.end() + 1e-9 < end || setup.limit.end() + 1e-9 < end {
        return Err(Error::InsufficientData(format!(
            "field snapshots end before T = {end}"
        )));
    }
    let every = setup.record_every.max(1);
    let mut records = vec![record(triple, 0, 0.0)];
    for step in 0..setup.steps {
        let t = step as f64 * setup.dt;
        let result = (|| -> Result<()> {
            let bx = pairwise_drift(&triple.interacting, setup.kernels, setup.cutoff, setup.params)?;
            let bm = ensemble_field_drift(&triple.intermediate, setup.meanfield.at(t), setup.cutoff, setup.params)?;
            let bl = ensemble_field_drift(&triple.limit, setup.limit.at(t), setup.raw, setup.params)?;
            let dw = step_increments(setup.noise, triple.replica, &triple.interacting, step, setup.dt);
            let sigma = &setup.params.sigma;
            em_step(&mut triple.interacting, &bx, sigma, setup.dt, &dw)?;
            em_step(&mut triple.intermediate, &bm, sigma, setup.dt, &dw)?;
            em_step(&mut triple.limit, &bl, sigma, setup.dt, &dw)
        })();
        if let Err(e) = result {
            return Ok(TripleOutcome {
                records,
                censored: Some(censor(e, step)?),
            });
        }
        let done = step + 1;
        if done % every == 0 || done == setup.steps {
            records.push(record(triple, done, done as f64 * setup.dt));
        }
    }
    Ok(TripleOutcome {
        records,
        censored: None,
    })
}

/// Setup of an interacting-system-only run.
pub struct ParticleSetup<'a> {
    pub params: &'a SpeciesParams,
    pub kernels: &'a PairKernels,
    pub rate: &'a dyn RateFunction,
    pub noise: &'a NoiseStream,
    pub dt: f64,
    pub steps: usize,
    pub record_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleRecord {
    pub replica: usize,
    pub step: usize,
    pub time: f64,
    pub mean: Vec<Vec<f64>>,
    pub rms_radius: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleOutcome {
    pub records: Vec<ParticleRecord>,
    pub censored: Option<Censoring>,
}

fn particle_record(ens: &Ensemble, replica: usize, step: usize, time: f64) -> ParticleRecord {
    ParticleRecord {
        replica,
        step,
        time,
        mean: ens.means(),
        rms_radius: ens.rms_radii(),
    }
}

/// Euler–Maruyama evolution of the interacting system alone.
pub fn evolve_particles(ens: &mut Ensemble, replica: usize, setup: &ParticleSetup<'_>) -> Result<ParticleOutcome> {
    let every = setup.record_every.max(1);
    let mut records = vec![particle_record(ens, replica, 0, 0.0)];
    for step in 0..setup.steps {
        let result = pairwise_drift(ens, setup.kernels, setup.rate, setup.params).and_then(|b| {
            let dw = step_increments(setup.noise, replica, ens, step, setup.dt);
            em_step(ens, &b, &setup.params.sigma, setup.dt, &dw)
        });
        if let Err(e) = result {
            return Ok(ParticleOutcome {
                records,
                censored: Some(censor(e, step)?),
            });
        }
        let done = step + 1;
        if done % every == 0 || done == setup.steps {
            records.push(particle_record(ens, replica, done, done as f64 * setup.dt));
        }
    }
    Ok(ParticleOutcome {
        records,
        censored: None,
    })
}
