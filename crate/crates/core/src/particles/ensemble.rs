use rand::Rng;
use rand_distr::StandardNormal;

use super::noise::NoiseStream;
use crate::error::{Error, Result};
use crate::fields::{InitialCondition, SpeciesDensity};
use crate::potential::Potential;

/// Per-species diffusion coefficients and the environment potential.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesParams {
    pub sigma: Vec<f64>,
    pub potential: Potential,
}

impl SpeciesParams {
    pub fn new(sigma: Vec<f64>, potential: Potential) -> Result<Self> {
        if sigma.is_empty() {
            return Err(Error::InvalidSpec("at least one species is required".into()));
        }
        if let Some(s) = sigma.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidSpec(format!("diffusion must be positive, got {s}")));
        }
        Ok(Self { sigma, potential })
    }

    pub fn species(&self) -> usize {
        self.sigma.len()
    }
}

/// Positions of `n` species with `N` particles each in `R^d`, stored
/// species-major then particle-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    species: usize,
    particles: usize,
    dimension: usize,
    positions: Vec<f64>,
}

impl Ensemble {
    pub fn new(species: usize, particles: usize, dimension: usize, positions: Vec<f64>) -> Result<Self> {
        if species == 0 || particles == 0 || !(1..=3).contains(&dimension) {
            return Err(Error::InvalidSpec(format!(
                "ensemble needs n >= 1, N >= 1 and 1 <= d <= 3, got ({species}, {particles}, {dimension})"
            )));
        }
        if positions.len() != species * particles * dimension {
            return Err(Error::InvalidSpec(format!(
                "{} coordinates for {species} x {particles} particles in dimension {dimension}",
                positions.len()
            )));
        }
        let ens = Self {
            species,
            particles,
            dimension,
            positions,
        };
        ens.check_finite()?;
        Ok(ens)
    }

    pub fn species(&self) -> usize {
        self.species
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn positions_mut(&mut self) -> &mut [f64] {
        &mut self.positions
    }

    /// All particles of species `i`, flattened.
    pub fn species_positions(&self, i: usize) -> &[f64] {
        let len = self.particles * self.dimension;
        &self.positions[i * len..(i + 1) * len]
    }

    pub fn position(&self, i: usize, k: usize) -> &[f64] {
        let start = (i * self.particles + k) * self.dimension;
        &self.positions[start..start + self.dimension]
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.positions.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(p) => {
                let k = p / self.dimension;
                Err(Error::NonFinite {
                    species: k / self.particles,
                    particle: k % self.particles,
                })
            }
        }
    }

    /// Per-species coordinate means.
    pub fn means(&self) -> Vec<Vec<f64>> {
        (0..self.species)
            .map(|i| {
                let mut m = vec![0.0; self.dimension];
                for x in self.species_positions(i).chunks(self.dimension) {
                    m.iter_mut().zip(x).for_each(|(a, b)| *a += b);
                }
                m.iter_mut().for_each(|a| *a /= self.particles as f64);
                m
            })
            .collect()
    }

    /// Per-species root mean square of `|x|`.
    pub fn rms_radii(&self) -> Vec<f64> {
        (0..self.species)
            .map(|i| {
                let s: f64 = self.species_positions(i).iter().map(|v| v * v).sum();
                (s / self.particles as f64).sqrt()
            })
            .collect()
    }
}

/// Draws `N` i.i.d. particles per species from the Gaussian-mixture
/// initial densities; replica `r` uses its own sampling stream.
pub fn sample_initial(
    u0: &InitialCondition,
    particles: usize,
    dimension: usize,
    noise: &NoiseStream,
    replica: usize,
) -> Result<Ensemble> {
    let mut positions = Vec::with_capacity(u0.species.len() * particles * dimension);
    for (i, density) in u0.species.iter().enumerate() {
        density.validate(dimension)?;
        let components = match density {
            SpeciesDensity::Mixture(c) => c,
            SpeciesDensity::Uniform => {
                return Err(Error::Config(format!(
                    "species {i}: only Gaussian mixtures can be sampled"
                )))
            }
        };
        let total: f64 = components.iter().map(|c| c.weight).sum();
        let mut rng = noise.sampler(replica, i);
        for _ in 0..particles {
            let mut u = rng.random::<f64>() * total;
            let mut pick = components.len() - 1;
            for (c, comp) in components.iter().enumerate() {
                if u < comp.weight {
                    pick = c;
                    break;
                }
                u -= comp.weight;
            }
            let comp = &components[pick];
            let sd = comp.variance.sqrt();
            for a in 0..dimension {
                let z: f64 = rng.sample(StandardNormal);
                positions.push(comp.mean[a] + sd * z);
            }
        }
    }
    Ensemble::new(u0.species.len(), particles, dimension, positions)
}

/// `X ← X + drift Δt + √(2σ_i) ΔW`, species by species.
pub fn em_step(ens: &mut Ensemble, drifts: &[f64], sigma: &[f64], dt: f64, increments: &[f64]) -> Result<()> {
    let len = ens.particles * ens.dimension;
    for (i, s) in sigma.iter().enumerate().take(ens.species) {
        let coefficient = (2.0 * s).sqrt();
        let range = i * len..(i + 1) * len;
        for ((x, b), w) in ens.positions[range.clone()]
            .iter_mut()
            .zip(&drifts[range.clone()])
            .zip(&increments[range])
        {
            *x += b * dt + coefficient * w;
        }
    }
    ens.check_finite()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(variance: f64) -> InitialCondition {
        InitialCondition {
            species: vec![SpeciesDensity::gaussian(vec![0.0; 3], variance)],
        }
    }

    #[test]
    fn sample_mean_within_clt_band() {
        let n = 4000;
        let ens = sample_initial(&gaussian(0.25), n, 3, &NoiseStream::new(1), 0).unwrap();
        for m in &ens.means()[0] {
            assert!(m.abs() < 4.0 * 0.5 / (n as f64).sqrt());
        }
    }

    #[test]
    fn single_sample_is_reproducible() {
        let a = sample_initial(&gaussian(1.0), 1, 3, &NoiseStream::new(9), 4).unwrap();
        let b = sample_initial(&gaussian(1.0), 1, 3, &NoiseStream::new(9), 4).unwrap();
        assert_eq!(a, b);
        let c = sample_initial(&gaussian(1.0), 1, 3, &NoiseStream::new(9), 5).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn uniform_is_not_sampleable() {
        let u0 = InitialCondition {
            species: vec![SpeciesDensity::Uniform],
        };
        assert!(matches!(
            sample_initial(&u0, 4, 2, &NoiseStream::new(0), 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn euler_maruyama_arithmetic() {
        let mut ens = Ensemble::new(1, 1, 3, vec![0.5, -1.0, 2.0]).unwrap();
        em_step(&mut ens, &[0.0; 3], &[0.5], 0.1, &[0.0; 3]).unwrap();
        assert_eq!(ens.positions(), &[0.5, -1.0, 2.0]);
        em_step(&mut ens, &[1.0, 0.0, 0.0], &[0.5], 0.1, &[0.0; 3]).unwrap();
        assert_eq!(ens.positions(), &[0.6, -1.0, 2.0]);
        // sqrt(2 * 0.5) = 1
        em_step(&mut ens, &[0.0; 3], &[0.5], 0.1, &[0.25, 0.0, 0.0]).unwrap();
        assert!((ens.positions()[0] - 0.85).abs() < 1e-15);
        assert!(em_step(&mut ens, &[f64::NAN, 0.0, 0.0], &[0.5], 0.1, &[0.0; 3]).is_err());
    }
}
