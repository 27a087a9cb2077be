use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{resolved_toml, ExperimentPlan, System};
use super::scales::Scales;
use crate::diagnostics::{
    chaos_statistics, coupling_error, density_discrepancy, exceed_probability, lln_deviation, stopped_stats,
    threshold, Estimate, LlnRecord, StoppedStats,
};
use crate::error::{Error, Result};
use crate::fields::{
    init_density, sobolev_distance, write_snapshot_series, DensityField, KernelMode, PdeParams, PdeSolver, Rate,
};
use crate::kernels::{MollifierSpec, PairKernels};
use crate::nonlinearity::{cutoff_build, CutoffFunction};
use crate::particles::{
    em_step, ensemble_field_drift, evolve_particles, evolve_triple, field_times, sample_initial, step_increments,
    Censoring, CoupledTriple, Ensemble, FieldTrajectory, NoiseStream, ParticleRecord, ParticleSetup, TripleRecord,
    TripleSetup,
};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "CROSSDIFF_WORKERS";

/// Aggregated diagnostics of one particle count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub system: String,
    pub particles: usize,
    pub eta: f64,
    pub gamma: f64,
    pub replicas: usize,
    pub censored: usize,
    /// Named estimates; a `_se` suffix marks a standard error.
    pub estimands: BTreeMap<String, f64>,
    /// Every recorded coupling distance is exactly zero.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling_identity: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Window {
    theta_max: f64,
    beta_max: f64,
    alpha_max: f64,
    chaos_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    version: String,
    system: String,
    seed: u64,
    theorem_mode: bool,
    outside_theorem_scaling: bool,
    window: Window,
    scales: Vec<Scales>,
    steps: usize,
    dt: f64,
    pde_dt: f64,
    horizon: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output: PathBuf,
    pub summaries: Vec<SummaryRecord>,
}

/// Worker count from [`WORKERS_ENV`] when set, else `configured`.
pub fn resolve_workers(configured: usize) -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{WORKERS_ENV} must be a nonnegative integer, got {v:?}"))),
        Err(_) => Ok(configured),
    }
}

/// Executes a validated plan into `output` on a pool of `workers`
/// threads (`0` for all cores).
pub fn run_plan(plan: &ExperimentPlan, output: &Path, workers: usize) -> Result<RunOutcome> {
    fs::create_dir_all(output).map_err(|e| Error::io(output, e))?;
    for sub in ["replicas", "snapshots"] {
        let p = output.join(sub);
        if p.exists() {
            fs::remove_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
    }
    write_manifest(plan, output)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let summaries = pool.install(|| match plan.system() {
        System::Triple => run_triple(plan, output),
        System::ParticlesOnly => run_particles(plan, output),
        System::PdeOnly => run_pde(plan, output),
        System::Lln => run_lln(plan, output),
    })?;
    write_ndjson(&output.join("summary.ndjson"), &summaries)?;
    Ok(RunOutcome {
        output: output.to_path_buf(),
        summaries,
    })
}

fn write_manifest(plan: &ExperimentPlan, output: &Path) -> Result<()> {
    let mut config = plan.config.clone();
    config.run.output = output.display().to_string();
    let path = output.join("manifest.toml");
    fs::write(&path, resolved_toml(&config)?).map_err(|e| Error::io(&path, e))?;
    let w = &plan.window;
    let beta = config.scaling.beta;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").into(),
        system: plan.system().name().into(),
        seed: config.run.seed,
        theorem_mode: plan.theorem_mode(),
        outside_theorem_scaling: !plan.theorem_mode(),
        window: Window {
            theta_max: w.theta_max,
            beta_max: w.beta_max,
            alpha_max: w.alpha_max(beta),
            chaos_rate: w.chaos_rate(beta),
        },
        scales: plan.scales.clone(),
        steps: plan.steps,
        dt: plan.dt(),
        pde_dt: plan.pde_dt(),
        horizon: plan.horizon(),
    };
    let path = output.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

fn write_ndjson<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        let line = serde_json::to_string(row).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Concatenates per-replica files into one, in the given order.
fn merge(paths: &[PathBuf], into: &Path) -> Result<()> {
    let file = File::create(into).map_err(|e| Error::io(into, e))?;
    let mut w = BufWriter::new(file);
    for p in paths {
        let r = BufReader::new(File::open(p).map_err(|e| Error::io(p, e))?);
        for line in r.lines() {
            let line = line.map_err(|e| Error::io(p, e))?;
            writeln!(w, "{line}").map_err(|e| Error::io(into, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(into, e))
}

/// Reads every line of an NDJSON file.
pub fn read_ndjson<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    r.lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|(k, l)| {
            let l = l.map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&l).map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), k + 1)))
        })
        .collect()
}

fn replica_path(output: &Path, particles: usize, replica: usize) -> PathBuf {
    output.join("replicas").join(format!("n{particles:06}_r{replica:05}.ndjson"))
}

fn pde_params(plan: &ExperimentPlan, mode: KernelMode, rate: Rate) -> PdeParams {
    let mut p = PdeParams::new(
        plan.params.sigma.clone(),
        plan.interaction.clone(),
        mode,
        rate,
        plan.pde_dt(),
        plan.horizon(),
    );
    p.potential = plan.params.potential;
    p.boundary = plan.config.grid.boundary;
    p.tail_tolerance = plan.config.grid.tail_tolerance;
    p
}

/// Mollified kernels, `f_γ` and the mollified PDE solver of one scale.
struct Mollified {
    kernels: PairKernels,
    cutoff: CutoffFunction,
    solver: PdeSolver,
}

fn mollified(plan: &ExperimentPlan, s: &Scales) -> Result<Mollified> {
    let mollifier = MollifierSpec::bump(s.eta)?;
    let kernels = PairKernels::mollified(&plan.interaction, &mollifier)?;
    let cutoff = cutoff_build(plan.growth, s.gamma)?;
    let params = pde_params(plan, KernelMode::Mollified(mollifier), Rate::Cutoff(cutoff.clone()));
    let solver = PdeSolver::with_kernels(plan.grid, params, kernels.clone())?;
    Ok(Mollified {
        kernels,
        cutoff,
        solver,
    })
}

fn limit_solver(plan: &ExperimentPlan) -> Result<PdeSolver> {
    PdeSolver::new(plan.grid, pde_params(plan, KernelMode::Limit, Rate::Raw(plan.growth)))
}

/// Convolution fields at `times` and the density at the last time.
fn trajectory(solver: &PdeSolver, u0: &DensityField, times: &[f64]) -> Result<(FieldTrajectory, DensityField)> {
    let mut field = u0.clone();
    let mut fields = Vec::with_capacity(times.len());
    for &t in times {
        solver.advance(&mut field, t)?;
        fields.push(solver.convolve(&field)?);
    }
    Ok((FieldTrajectory::new(times.to_vec(), fields)?, field))
}

fn same_scale(a: &Scales, b: &Scales) -> bool {
    a.eta.to_bits() == b.eta.to_bits() && a.gamma.to_bits() == b.gamma.to_bits()
}

fn estimate_into(map: &mut BTreeMap<String, f64>, key: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Ok(());
    }
    let e = Estimate::from_samples(values)?;
    map.insert(key.into(), e.mean);
    if let Some(se) = e.standard_error {
        map.insert(format!("{key}_se"), se);
    }
    Ok(())
}

/// Largest tagged-pair covariance and correlation over species.
fn chaos_into(map: &mut BTreeMap<String, f64>, plan: &ExperimentPlan, finals: &[Ensemble]) -> Result<()> {
    let tags = &plan.config.particles.tags;
    if finals.len() < 2 || tags.len() < 2 {
        return Ok(());
    }
    let (mut cov, mut cor) = (0.0f64, 0.0f64);
    for i in 0..plan.interaction.species() {
        let c = chaos_statistics(finals, i, tags)?;
        cov = cov.max(c.max_cross_covariance);
        cor = cor.max(c.max_cross_correlation);
    }
    map.insert("max_cross_covariance".into(), cov);
    map.insert("max_cross_correlation".into(), cor);
    Ok(())
}

/// Mean over species of the kernel density discrepancy, one value per
/// ensemble.
fn discrepancies(plan: &ExperimentPlan, finals: &[Ensemble], field: &DensityField) -> Result<Vec<f64>> {
    let h = plan.bandwidth();
    let n = plan.interaction.species();
    finals
        .par_iter()
        .map(|ens| {
            let mut total = 0.0;
            for i in 0..n {
                total += density_discrepancy(ens, field, i, h)?;
            }
            Ok(total / n as f64)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TripleReplica {
    particles: usize,
    replica: usize,
    censored: Option<Censoring>,
    stopped: StoppedStats,
    /// `sup_t Σ_i max_k |X - X̄|`.
    max_gap: f64,
    coupling_error: f64,
}

fn run_triple(plan: &ExperimentPlan, output: &Path) -> Result<Vec<SummaryRecord>> {
    let cfg = &plan.config;
    let noise = NoiseStream::new(cfg.run.seed);
    let u0 = init_density(&plan.grid, &plan.initial)?;
    let times = field_times(plan.dt(), plan.steps, cfg.particles.field_stride);
    let (limit, _) = trajectory(&limit_solver(plan)?, &u0, &times)?;
    fs::create_dir_all(output.join("replicas")).map_err(|e| Error::io(output, e))?;

    let mut files = Vec::new();
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut cache: Option<(Scales, Mollified, FieldTrajectory, DensityField)> = None;
    for s in &plan.scales {
        if !cache.as_ref().is_some_and(|c| same_scale(&c.0, s)) {
            let m = mollified(plan, s)?;
            let (traj, end) = trajectory(&m.solver, &u0, &times)?;
            cache = Some((*s, m, traj, end));
        }
        let (_, m, meanfield, end) = cache.as_ref().unwrap();
        let setup = TripleSetup {
            params: &plan.params,
            kernels: &m.kernels,
            cutoff: &m.cutoff,
            raw: &plan.growth,
            meanfield,
            limit: &limit,
            noise: &noise,
            dt: plan.dt(),
            steps: plan.steps,
            record_every: cfg.particles.record_every,
        };
        let np = s.particles;
        let outcomes: Vec<(Vec<TripleRecord>, Option<Censoring>, Ensemble)> = (0..cfg.particles.replicas)
            .into_par_iter()
            .map(|r| {
                let mut triple = CoupledTriple::sample(&plan.initial, np, plan.grid.dimension(), &noise, r)?;
                let out = evolve_triple(&mut triple, &setup)?;
                write_ndjson(&replica_path(output, np, r), &out.records)?;
                Ok((out.records, out.censored, triple.interacting))
            })
            .collect::<Result<_>>()?;

        let mut flags = Vec::new();
        let mut errors = Vec::new();
        let mut gaps = Vec::new();
        let mut finals_moment = Vec::new();
        let mut identity = true;
        let mut finals = Vec::new();
        for (r, (records, censored, ens)) in outcomes.into_iter().enumerate() {
            files.push(replica_path(output, np, r));
            let t: Vec<f64> = records.iter().map(|x| x.time).collect();
            let per_species: Vec<Vec<f64>> = records.iter().map(|x| x.x_xbar.clone()).collect();
            let stopped = stopped_stats(&t, &per_species, cfg.scaling.alpha, cfg.scaling.kappa, np, censored.is_some())?;
            let max_gap = records.iter().map(|x| x.sum_x_xbar()).fold(0.0, f64::max);
            let ce = coupling_error(&records);
            identity &= records.iter().all(|x| {
                x.x_xbar.iter().chain(&x.xbar_xhat).chain(&x.x_xhat).all(|v| *v == 0.0)
            });
            flags.push(stopped.exceeded);
            errors.push(ce);
            gaps.push(max_gap);
            finals_moment.push(*stopped.path.last().unwrap_or(&0.0));
            if censored.is_none() {
                finals.push(ens);
            }
            rows.push(TripleReplica {
                particles: np,
                replica: r,
                censored,
                stopped,
                max_gap,
                coupling_error: ce,
            });
        }
        let mut est = BTreeMap::new();
        est.insert("exceed_probability".into(), exceed_probability(&flags)?);
        est.insert("threshold".into(), threshold(cfg.scaling.alpha, np));
        estimate_into(&mut est, "coupling_error_moment", &errors)?;
        estimate_into(&mut est, "max_gap", &gaps)?;
        estimate_into(&mut est, "stopped_moment", &finals_moment)?;
        chaos_into(&mut est, plan, &finals)?;
        let disc = discrepancies(plan, &finals, end)?;
        estimate_into(&mut est, "density_discrepancy", &disc)?;
        summaries.push(SummaryRecord {
            system: System::Triple.name().into(),
            particles: np,
            eta: s.eta,
            gamma: s.gamma,
            replicas: cfg.particles.replicas,
            censored: cfg.particles.replicas - finals.len(),
            estimands: est,
            coupling_identity: Some(identity),
        });
    }
    merge(&files, &output.join("records.ndjson"))?;
    write_ndjson(&output.join("replicas.ndjson"), &rows)?;
    Ok(summaries)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ParticleReplica {
    particles: usize,
    replica: usize,
    censored: Option<Censoring>,
    #[serde(skip_serializing_if = "Option::is_none")]
    density_discrepancy: Option<f64>,
}

fn run_particles(plan: &ExperimentPlan, output: &Path) -> Result<Vec<SummaryRecord>> {
    let cfg = &plan.config;
    let noise = NoiseStream::new(cfg.run.seed);
    let u0 = init_density(&plan.grid, &plan.initial)?;
    fs::create_dir_all(output.join("replicas")).map_err(|e| Error::io(output, e))?;
    let mut files = Vec::new();
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut cache: Option<(Scales, Mollified, DensityField)> = None;
    for s in &plan.scales {
        if !cache.as_ref().is_some_and(|c| same_scale(&c.0, s)) {
            let m = mollified(plan, s)?;
            let mut end = u0.clone();
            m.solver.advance(&mut end, plan.horizon())?;
            cache = Some((*s, m, end));
        }
        let (_, m, end) = cache.as_ref().unwrap();
        let setup = ParticleSetup {
            params: &plan.params,
            kernels: &m.kernels,
            rate: &m.cutoff,
            noise: &noise,
            dt: plan.dt(),
            steps: plan.steps,
            record_every: cfg.particles.record_every,
        };
        let np = s.particles;
        let outcomes: Vec<(Vec<ParticleRecord>, Option<Censoring>, Ensemble)> = (0..cfg.particles.replicas)
            .into_par_iter()
            .map(|r| {
                let mut ens = sample_initial(&plan.initial, np, plan.grid.dimension(), &noise, r)?;
                let out = evolve_particles(&mut ens, r, &setup)?;
                write_ndjson(&replica_path(output, np, r), &out.records)?;
                Ok((out.records, out.censored, ens))
            })
            .collect::<Result<_>>()?;
        let mut finals = Vec::new();
        let mut censored_rows = Vec::new();
        let mut radii = Vec::new();
        for (r, (records, censored, ens)) in outcomes.into_iter().enumerate() {
            files.push(replica_path(output, np, r));
            if censored.is_none() {
                if let Some(last) = records.last() {
                    radii.push(last.rms_radius.iter().sum::<f64>() / last.rms_radius.len() as f64);
                }
                finals.push((r, ens));
            } else {
                censored_rows.push((r, censored));
            }
        }
        let ensembles: Vec<Ensemble> = finals.iter().map(|(_, e)| e.clone()).collect();
        let disc = discrepancies(plan, &ensembles, end)?;
        let mut replica_rows: Vec<ParticleReplica> = finals
            .iter()
            .zip(&disc)
            .map(|((r, _), d)| ParticleReplica {
                particles: np,
                replica: *r,
                censored: None,
                density_discrepancy: Some(*d),
            })
            .chain(censored_rows.into_iter().map(|(r, c)| ParticleReplica {
                particles: np,
                replica: r,
                censored: c,
                density_discrepancy: None,
            }))
            .collect();
        replica_rows.sort_by_key(|row| row.replica);
        rows.extend(replica_rows);

        let mut est = BTreeMap::new();
        estimate_into(&mut est, "density_discrepancy", &disc)?;
        estimate_into(&mut est, "rms_radius", &radii)?;
        chaos_into(&mut est, plan, &ensembles)?;
        summaries.push(SummaryRecord {
            system: System::ParticlesOnly.name().into(),
            particles: np,
            eta: s.eta,
            gamma: s.gamma,
            replicas: cfg.particles.replicas,
            censored: cfg.particles.replicas - ensembles.len(),
            estimands: est,
            coupling_identity: None,
        });
    }
    merge(&files, &output.join("records.ndjson"))?;
    write_ndjson(&output.join("replicas.ndjson"), &rows)?;
    Ok(summaries)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PdeRecord {
    particles: usize,
    eta: f64,
    gamma: f64,
    time: f64,
    masses: Vec<f64>,
    min_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    sobolev: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sobolev_over_eta: Option<f64>,
}

fn snapshot_times(horizon: f64, count: usize) -> Vec<f64> {
    if horizon == 0.0 {
        return vec![0.0];
    }
    (0..=count).map(|k| horizon * k as f64 / count as f64).collect()
}

fn solve_at(solver: &PdeSolver, u0: &DensityField, times: &[f64]) -> Result<Vec<DensityField>> {
    let mut field = u0.clone();
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        solver.advance(&mut field, t)?;
        out.push(field.clone());
    }
    Ok(out)
}

fn run_pde(plan: &ExperimentPlan, output: &Path) -> Result<Vec<SummaryRecord>> {
    let cfg = &plan.config;
    let u0 = init_density(&plan.grid, &plan.initial)?;
    let times = snapshot_times(plan.horizon(), cfg.grid.snapshots);
    let limit = if cfg.grid.compare_limit {
        let fields = solve_at(&limit_solver(plan)?, &u0, &times)?;
        write_snapshot_series(&output.join("snapshots").join("limit"), &fields)?;
        Some(fields)
    } else {
        None
    };
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut cache: Option<(Scales, Vec<DensityField>)> = None;
    for s in &plan.scales {
        if !cache.as_ref().is_some_and(|c| same_scale(&c.0, s)) {
            let m = mollified(plan, s)?;
            cache = Some((*s, solve_at(&m.solver, &u0, &times)?));
        }
        let fields = &cache.as_ref().unwrap().1;
        write_snapshot_series(&output.join("snapshots").join(format!("n{:06}", s.particles)), fields)?;
        for (k, f) in fields.iter().enumerate() {
            let sobolev = match &limit {
                Some(l) => Some(sobolev_distance(f, &l[k], cfg.grid.sobolev_order)?),
                None => None,
            };
            let over = sobolev.as_ref().map(|v| v.iter().copied().fold(0.0, f64::max) / s.eta);
            rows.push(PdeRecord {
                particles: s.particles,
                eta: s.eta,
                gamma: s.gamma,
                time: f.time(),
                masses: f.masses(),
                min_value: f.min_value(),
                sobolev,
                sobolev_over_eta: over,
            });
        }
        let last = rows.last().unwrap();
        let mut est = BTreeMap::new();
        let drift = last.masses.iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max);
        est.insert("mass_error".into(), drift);
        est.insert("min_value".into(), last.min_value);
        if let Some(v) = last.sobolev_over_eta {
            est.insert("sobolev_over_eta".into(), v);
            est.insert("sobolev_distance".into(), v * s.eta);
        }
        summaries.push(SummaryRecord {
            system: System::PdeOnly.name().into(),
            particles: s.particles,
            eta: s.eta,
            gamma: s.gamma,
            replicas: 0,
            censored: 0,
            estimands: est,
            coupling_identity: None,
        });
    }
    write_ndjson(&output.join("pde.ndjson"), &rows)?;
    Ok(summaries)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LlnReplica {
    replica: usize,
    censored: Option<Censoring>,
    #[serde(flatten)]
    record: Option<LlnRecord>,
}

/// Evolves `X̄` alone to the end of `fields`.
fn evolve_intermediate(
    ens: &mut Ensemble,
    replica: usize,
    plan: &ExperimentPlan,
    fields: &FieldTrajectory,
    rate: &CutoffFunction,
    noise: &NoiseStream,
) -> Result<Option<Censoring>> {
    let dt = plan.dt();
    for step in 0..plan.steps {
        let result = ensemble_field_drift(ens, fields.at(step as f64 * dt), rate, &plan.params).and_then(|b| {
            let dw = step_increments(noise, replica, ens, step, dt);
            em_step(ens, &b, &plan.params.sigma, dt, &dw)
        });
        match result {
            Ok(()) => {}
            Err(Error::NonFinite { species, particle }) => {
                return Ok(Some(Censoring {
                    species,
                    particle,
                    step,
                }))
            }
            Err(e) => return Err(e),
        }
    }
    Ok(None)
}

fn run_lln(plan: &ExperimentPlan, output: &Path) -> Result<Vec<SummaryRecord>> {
    let cfg = &plan.config;
    let noise = NoiseStream::new(cfg.run.seed);
    let u0 = init_density(&plan.grid, &plan.initial)?;
    let times = field_times(plan.dt(), plan.steps, cfg.particles.field_stride);
    fs::create_dir_all(output.join("replicas")).map_err(|e| Error::io(output, e))?;
    let mut files = Vec::new();
    let mut summaries = Vec::new();
    let mut cache: Option<(Scales, Mollified, FieldTrajectory)> = None;
    for s in &plan.scales {
        if !cache.as_ref().is_some_and(|c| same_scale(&c.0, s)) {
            let m = mollified(plan, s)?;
            let (traj, _) = trajectory(&m.solver, &u0, &times)?;
            cache = Some((*s, m, traj));
        }
        let (_, m, traj) = cache.as_ref().unwrap();
        let np = s.particles;
        let end = traj.at(traj.end());
        let rows: Vec<LlnReplica> = (0..cfg.particles.replicas)
            .into_par_iter()
            .map(|r| {
                let mut ens = sample_initial(&plan.initial, np, plan.grid.dimension(), &noise, r)?;
                let censored = evolve_intermediate(&mut ens, r, plan, traj, &m.cutoff, &noise)?;
                let record = match censored {
                    None => Some(lln_deviation(&ens, end, &m.kernels, cfg.scaling.theta)?),
                    Some(_) => None,
                };
                let row = LlnReplica {
                    replica: r,
                    censored,
                    record,
                };
                write_ndjson(&replica_path(output, np, r), std::slice::from_ref(&row))?;
                Ok(row)
            })
            .collect::<Result<_>>()?;
        files.extend((0..cfg.particles.replicas).map(|r| replica_path(output, np, r)));
        let records: Vec<&LlnRecord> = rows.iter().filter_map(|r| r.record.as_ref()).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let rms: Vec<f64> = records.iter().map(|r| mean(&r.rms_deviation)).collect();
        let max: Vec<f64> = records.iter().map(|r| mean(&r.max_deviation)).collect();
        let events: Vec<bool> = rows
            .iter()
            .map(|r| r.record.as_ref().is_none_or(|x| x.event))
            .collect();
        let mut est = BTreeMap::new();
        estimate_into(&mut est, "rms_deviation", &rms)?;
        estimate_into(&mut est, "max_deviation", &max)?;
        est.insert("lln_event_probability".into(), exceed_probability(&events)?);
        summaries.push(SummaryRecord {
            system: System::Lln.name().into(),
            particles: np,
            eta: s.eta,
            gamma: s.gamma,
            replicas: cfg.particles.replicas,
            censored: rows.len() - records.len(),
            estimands: est,
            coupling_identity: None,
        });
    }
    merge(&files, &output.join("records.ndjson"))?;
    Ok(summaries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::validate_config;

    #[test]
    fn pde_plan_at_time_zero() {
        let dir = tempfile::tempdir().unwrap();
        let text = r#"
[run]
system = "pde-only"
horizon = 0.0
[model]
kernel = "gaussian"
[particles]
counts = [64]
[grid]
cells = 8
half_width = 3.0
"#;
        let plan = validate_config(text).unwrap();
        let out = run_plan(&plan, dir.path(), 1).unwrap();
        assert_eq!(out.summaries.len(), 1);
        let snaps = dir.path().join("snapshots").join("n000064");
        let index = fs::read_to_string(snaps.join("index.ndjson")).unwrap();
        assert_eq!(index.lines().count(), 1);
        assert!(dir.path().join("manifest.toml").exists());
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["window"]["theta_max"], 0.0);
    }
}
