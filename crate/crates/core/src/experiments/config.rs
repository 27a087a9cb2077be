use serde::{Deserialize, Serialize};

use super::scales::{admissible_exponents, derive_scales, AdmissibleExponents, Scales};
use crate::error::{Error, Result};
use crate::fields::{Boundary, GaussianComponent, Grid, InitialCondition, SpeciesDensity, DEFAULT_TAIL_TOLERANCE};
use crate::kernels::{GaussianKernel, InteractionMatrix, KernelFamily, RieszSpec};
use crate::nonlinearity::{GrowthFamily, GrowthSpec};
use crate::particles::{SpeciesParams, MAX_FIELD_STRIDE, MAX_REPLICAS, MAX_SPECIES};
use crate::potential::Potential;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum System {
    /// `X`, `X̄` and `X̂` driven by shared noise.
    Triple,
    ParticlesOnly,
    PdeOnly,
    /// Deviation of `X̄` from the law of large numbers.
    Lln,
}

impl System {
    pub fn name(&self) -> &'static str {
        match self {
            System::Triple => "triple",
            System::ParticlesOnly => "particles-only",
            System::PdeOnly => "pde-only",
            System::Lln => "lln",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerSpecies {
    All(f64),
    Each(Vec<f64>),
}

impl PerSpecies {
    fn resolve(&self, n: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            PerSpecies::All(v) => Ok(vec![*v; n]),
            PerSpecies::Each(v) if v.len() == n => Ok(v.clone()),
            PerSpecies::Each(v) => Err(Error::Config(format!("{what}: {} values for {n} species", v.len()))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerPair {
    All(f64),
    Matrix(Vec<Vec<f64>>),
}

impl PerPair {
    fn resolve(&self, n: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            PerPair::All(v) => Ok(vec![*v; n * n]),
            PerPair::Matrix(rows) if rows.len() == n && rows.iter().all(|r| r.len() == n) => {
                Ok(rows.iter().flatten().copied().collect())
            }
            PerPair::Matrix(_) => Err(Error::Config(format!("{what}: expected a {n} x {n} matrix"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Value(f64),
    /// `"classical"`: the Riesz-potential normalization.
    Named(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Riesz,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Identity,
    Power,
    Rational,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub system: System,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: String,
    /// `0` uses every available core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "yes")]
    pub theorem_mode: bool,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default = "one")]
    pub species: usize,
    #[serde(default = "default_sigma")]
    pub sigma: PerSpecies,
    #[serde(default)]
    pub potential: Potential,
    #[serde(default = "default_kernel")]
    pub kernel: KernelKind,
    #[serde(default = "default_exponent")]
    pub exponent: PerPair,
    #[serde(default = "default_coefficient")]
    pub coefficient: Coefficient,
    #[serde(default = "default_gaussian_amplitude")]
    pub gaussian_amplitude: f64,
    #[serde(default = "default_gaussian_width")]
    pub gaussian_width: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            dimension: default_dimension(),
            species: 1,
            sigma: default_sigma(),
            potential: Potential::default(),
            kernel: default_kernel(),
            exponent: default_exponent(),
            coefficient: default_coefficient(),
            gaussian_amplitude: default_gaussian_amplitude(),
            gaussian_width: default_gaussian_width(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySection {
    #[serde(default = "default_family")]
    pub family: FamilyKind,
    #[serde(default = "one_f")]
    pub coefficient: f64,
    #[serde(default = "two_f")]
    pub exponent: f64,
    #[serde(default)]
    pub value: f64,
    /// Growth exponent `m`; defaults to the family's own.
    pub growth: Option<f64>,
}

impl Default for NonlinearitySection {
    fn default() -> Self {
        Self {
            family: default_family(),
            coefficient: 1.0,
            exponent: 2.0,
            value: 0.0,
            growth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSection {
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "two_f")]
    pub kappa: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// Free mollification scale; only with `theorem_mode = false`.
    pub eta: Option<f64>,
    /// Free cutoff level; only with `theorem_mode = false`.
    pub gamma: Option<f64>,
}

impl Default for ScalingSection {
    fn default() -> Self {
        Self {
            beta: default_beta(),
            alpha: default_alpha(),
            kappa: 2.0,
            theta: default_theta(),
            eta: None,
            gamma: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticlesSection {
    #[serde(default = "default_counts")]
    pub counts: Vec<usize>,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "one")]
    pub record_every: usize,
    /// Time steps between stored PDE snapshots.
    #[serde(default = "one")]
    pub field_stride: usize,
    /// Tagged particles for the chaos statistics.
    #[serde(default = "default_tags")]
    pub tags: Vec<usize>,
    /// Kernel density bandwidth; defaults to two cell widths.
    pub bandwidth: Option<f64>,
}

impl Default for ParticlesSection {
    fn default() -> Self {
        Self {
            counts: default_counts(),
            replicas: default_replicas(),
            record_every: 1,
            field_stride: 1,
            tags: default_tags(),
            bandwidth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default = "default_tail")]
    pub tail_tolerance: f64,
    /// Largest PDE step; defaults to `run.dt`.
    pub pde_dt: Option<f64>,
    /// Also solve the limit PDE in `pde-only` runs and report `‖u - u_η‖_{H^s}`.
    #[serde(default)]
    pub compare_limit: bool,
    #[serde(default = "two_f")]
    pub sobolev_order: f64,
    /// Equal intervals between written snapshots in `pde-only` runs.
    #[serde(default = "one")]
    pub snapshots: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            cells: default_cells(),
            half_width: default_half_width(),
            boundary: Boundary::default(),
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
            pde_dt: None,
            compare_limit: false,
            sobolev_order: 2.0,
            snapshots: 1,
        }
    }
}

/// The configuration document. Every section but `[run]` is optional;
/// [`validate_config`] fills all defaults in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub run: RunSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub nonlinearity: NonlinearitySection,
    #[serde(default)]
    pub scaling: ScalingSection,
    #[serde(default)]
    pub particles: ParticlesSection,
    #[serde(default)]
    pub grid: GridSection,
    /// One density per species; a centered Gaussian of variance 0.25 each
    /// when absent.
    #[serde(default)]
    pub initial: Vec<SpeciesDensity>,
}

fn yes() -> bool {
    true
}
fn one() -> usize {
    1
}
fn one_f() -> f64 {
    1.0
}
fn two_f() -> f64 {
    2.0
}
fn default_output() -> String {
    "output".into()
}
fn default_horizon() -> f64 {
    0.5
}
fn default_dt() -> f64 {
    0.01
}
fn default_dimension() -> usize {
    3
}
fn default_sigma() -> PerSpecies {
    PerSpecies::All(1.0)
}
fn default_kernel() -> KernelKind {
    KernelKind::Riesz
}
fn default_exponent() -> PerPair {
    PerPair::All(1.0)
}
fn default_coefficient() -> Coefficient {
    Coefficient::Value(1.0)
}
fn default_gaussian_amplitude() -> f64 {
    1.0
}
fn default_gaussian_width() -> f64 {
    0.5
}
fn default_family() -> FamilyKind {
    FamilyKind::Identity
}
fn default_beta() -> f64 {
    0.04
}
fn default_alpha() -> f64 {
    0.3
}
fn default_theta() -> f64 {
    0.25
}
fn default_counts() -> Vec<usize> {
    vec![128, 256, 512, 1024]
}
fn default_replicas() -> usize {
    32
}
fn default_tags() -> Vec<usize> {
    vec![0, 1]
}
fn default_cells() -> usize {
    32
}
fn default_half_width() -> f64 {
    3.0
}
fn default_tail() -> f64 {
    DEFAULT_TAIL_TOLERANCE
}

pub const DEFAULT_INITIAL_VARIANCE: f64 = 0.25;

/// A validated configuration with every derived object built.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    /// The configuration with all defaults explicit.
    pub config: Config,
    pub interaction: InteractionMatrix,
    pub growth: GrowthSpec,
    pub params: SpeciesParams,
    pub initial: InitialCondition,
    pub grid: Grid,
    pub window: AdmissibleExponents,
    /// `(η, γ)` for each particle count.
    pub scales: Vec<Scales>,
    pub steps: usize,
}

impl ExperimentPlan {
    pub fn system(&self) -> System {
        self.config.run.system
    }

    pub fn dt(&self) -> f64 {
        self.config.run.dt
    }

    pub fn horizon(&self) -> f64 {
        self.config.run.horizon
    }

    pub fn pde_dt(&self) -> f64 {
        self.config.grid.pde_dt.unwrap_or(self.config.run.dt)
    }

    pub fn bandwidth(&self) -> f64 {
        self.config.particles.bandwidth.unwrap_or(2.0 * self.grid.dx())
    }

    pub fn theorem_mode(&self) -> bool {
        self.config.run.theorem_mode
    }
}

/// Parses and validates a configuration document.
pub fn validate_config(text: &str) -> Result<ExperimentPlan> {
    validate_plan(parse_config(text)?)
}

/// Parses a configuration document without validating it.
pub fn parse_config(text: &str) -> Result<Config> {
    toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
}

fn positive(v: f64, what: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} must be positive, got {v}")))
    }
}

fn interaction(model: &ModelSection) -> Result<InteractionMatrix> {
    let (n, d) = (model.species, model.dimension);
    let entries = match model.kernel {
        KernelKind::Riesz => {
            let exps = model.exponent.resolve(n, "model.exponent")?;
            exps.into_iter()
                .map(|e| {
                    let spec = match &model.coefficient {
                        Coefficient::Value(c) => RieszSpec::new(d, e, *c),
                        Coefficient::Named(s) if s == "classical" => RieszSpec::classical(d, e),
                        Coefficient::Named(s) => {
                            return Err(Error::Config(format!(
                                "model.coefficient must be a number or \"classical\", got \"{s}\""
                            )))
                        }
                    };
                    spec.map(KernelFamily::Riesz).map_err(|e| Error::Config(e.to_string()))
                })
                .collect::<Result<Vec<_>>>()?
        }
        KernelKind::Gaussian => {
            let g = GaussianKernel::new(model.gaussian_amplitude, model.gaussian_width)
                .map_err(|e| Error::Config(e.to_string()))?;
            vec![KernelFamily::Gaussian(g); n * n]
        }
    };
    InteractionMatrix::new(n, d, entries).map_err(|e| Error::Config(e.to_string()))
}

fn growth(section: &NonlinearitySection) -> Result<GrowthSpec> {
    let family = match section.family {
        FamilyKind::Identity => GrowthFamily::Identity,
        FamilyKind::Rational => GrowthFamily::Rational,
        FamilyKind::Constant => GrowthFamily::Constant(section.value),
        FamilyKind::Power => GrowthFamily::Power {
            coefficient: section.coefficient,
            exponent: section.exponent,
        },
    };
    let m = section.growth.unwrap_or_else(|| family.default_growth());
    GrowthSpec::new(family, m).map_err(|e| Error::Config(e.to_string()))
}

/// Checks every precondition of the downstream modules and resolves all
/// defaults.
pub fn validate_plan(mut config: Config) -> Result<ExperimentPlan> {
    let run = &config.run;
    positive(run.dt, "run.dt")?;
    if !(run.horizon >= 0.0 && run.horizon.is_finite()) {
        return Err(Error::Config(format!("run.horizon must be nonnegative, got {}", run.horizon)));
    }
    let ratio = run.horizon / run.dt;
    let steps = ratio.round() as usize;
    if (ratio - steps as f64).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::Config(format!(
            "run.horizon = {} is not a whole number of steps of {}",
            run.horizon, run.dt
        )));
    }

    let model = &config.model;
    let n = model.species;
    if n == 0 || n > MAX_SPECIES {
        return Err(Error::Config(format!("model.species must be in 1..={MAX_SPECIES}, got {n}")));
    }
    if !(1..=3).contains(&model.dimension) {
        return Err(Error::Config(format!("model.dimension must be 1, 2 or 3, got {}", model.dimension)));
    }
    let sigma = model.sigma.resolve(n, "model.sigma")?;
    let params = SpeciesParams::new(sigma, model.potential).map_err(|e| Error::Config(e.to_string()))?;
    let interaction = interaction(model)?;

    let growth = growth(&config.nonlinearity)?;
    config.nonlinearity.growth = Some(growth.growth());

    let theta_max = interaction.max_exponent().unwrap_or(0.0);
    let window = admissible_exponents(theta_max, model.dimension)?;

    let scaling = &config.scaling;
    positive(scaling.kappa, "scaling.kappa")?;
    positive(scaling.theta, "scaling.theta")?;
    let particles = &config.particles;
    if particles.counts.is_empty() || particles.counts.contains(&0) {
        return Err(Error::Config("particles.counts must list positive particle counts".into()));
    }
    if particles.counts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("particles.counts must be strictly increasing".into()));
    }
    if particles.replicas == 0 || particles.replicas > MAX_REPLICAS {
        return Err(Error::Config(format!(
            "particles.replicas must be in 1..={MAX_REPLICAS}, got {}",
            particles.replicas
        )));
    }
    if particles.record_every == 0 {
        return Err(Error::Config("particles.record_every must be at least 1".into()));
    }
    if !(1..=MAX_FIELD_STRIDE).contains(&particles.field_stride) {
        return Err(Error::Config(format!(
            "particles.field_stride must be in 1..={MAX_FIELD_STRIDE}, got {}",
            particles.field_stride
        )));
    }
    if let Some(&t) = particles.tags.iter().find(|&&t| t >= particles.counts[0]) {
        return Err(Error::Config(format!(
            "tag {t} exceeds the smallest particle count {}",
            particles.counts[0]
        )));
    }
    if let Some(h) = particles.bandwidth {
        positive(h, "particles.bandwidth")?;
    }

    let scales = if config.run.theorem_mode {
        if scaling.eta.is_some() || scaling.gamma.is_some() {
            return Err(Error::Config(
                "scaling.eta and scaling.gamma are derived in theorem mode; set run.theorem_mode = false".into(),
            ));
        }
        window.check_beta(scaling.beta)?;
        window.check_alpha(scaling.beta, scaling.alpha)?;
        particles
            .counts
            .iter()
            .map(|&np| derive_scales(np, scaling.beta, growth.growth(), &window))
            .collect::<Result<Vec<_>>>()?
    } else {
        let (eta, gamma) = match (scaling.eta, scaling.gamma) {
            (Some(e), Some(g)) => (e, g),
            _ => {
                return Err(Error::Config(
                    "theorem mode off requires both scaling.eta and scaling.gamma".into(),
                ))
            }
        };
        positive(eta, "scaling.eta")?;
        positive(gamma, "scaling.gamma")?;
        positive(scaling.alpha, "scaling.alpha")?;
        particles
            .counts
            .iter()
            .map(|&np| Scales {
                particles: np,
                eta,
                gamma,
            })
            .collect()
    };

    let g = &config.grid;
    if g.cells < 4 || !g.cells.is_multiple_of(2) {
        return Err(Error::Config(format!("grid.cells must be even and at least 4, got {}", g.cells)));
    }
    positive(g.tail_tolerance, "grid.tail_tolerance")?;
    positive(g.sobolev_order, "grid.sobolev_order")?;
    if let Some(dt) = g.pde_dt {
        positive(dt, "grid.pde_dt")?;
    }
    if g.snapshots == 0 {
        return Err(Error::Config("grid.snapshots must be at least 1".into()));
    }
    let grid = Grid::new(model.dimension, g.cells, g.half_width).map_err(|e| Error::Config(e.to_string()))?;
    config.grid.pde_dt = Some(config.grid.pde_dt.unwrap_or(config.run.dt));
    config.particles.bandwidth = Some(config.particles.bandwidth.unwrap_or(2.0 * grid.dx()));

    if config.initial.is_empty() {
        config.initial = (0..n)
            .map(|_| {
                SpeciesDensity::Mixture(vec![GaussianComponent {
                    weight: 1.0,
                    mean: vec![0.0; model.dimension],
                    variance: DEFAULT_INITIAL_VARIANCE,
                }])
            })
            .collect();
    }
    if config.initial.len() != n {
        return Err(Error::Config(format!(
            "{} initial densities for {n} species",
            config.initial.len()
        )));
    }
    for s in &config.initial {
        s.validate(model.dimension)?;
        if matches!(s, SpeciesDensity::Uniform) && config.run.system != System::PdeOnly {
            return Err(Error::Config("uniform initial densities are only supported by pde-only runs".into()));
        }
    }
    let initial = InitialCondition {
        species: config.initial.clone(),
    };
    // Surfaces an inadmissible box before any compute starts.
    crate::fields::init_density(&grid, &initial)?;

    Ok(ExperimentPlan {
        config,
        interaction,
        growth,
        params,
        initial,
        grid,
        window,
        scales,
        steps,
    })
}

/// The resolved configuration as a TOML document.
pub fn resolved_toml(config: &Config) -> Result<String> {
    toml::to_string(config).map_err(|e| Error::Format(e.to_string()))
}
