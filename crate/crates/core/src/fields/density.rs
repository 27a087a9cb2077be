use serde::{Deserialize, Serialize};

use super::Grid;
use crate::error::{Error, Result};

/// Least box mass an initial density may have before renormalization.
pub const MIN_BOX_MASS: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Isotropic per-coordinate variance.
    pub variance: f64,
}

impl GaussianComponent {
    fn pdf(&self, x: &[f64]) -> f64 {
        let d = self.mean.len() as i32;
        let r2: f64 = x.iter().zip(&self.mean).map(|(a, m)| (a - m) * (a - m)).sum();
        (2.0 * std::f64::consts::PI * self.variance).powf(-0.5 * d as f64) * (-0.5 * r2 / self.variance).exp()
    }
}

/// Initial density of one species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "components")]
pub enum SpeciesDensity {
    Mixture(Vec<GaussianComponent>),
    /// Uniform on the box; grid-only (not sampleable).
    Uniform,
}

impl SpeciesDensity {
    pub fn gaussian(mean: Vec<f64>, variance: f64) -> Self {
        SpeciesDensity::Mixture(vec![GaussianComponent {
            weight: 1.0,
            mean,
            variance,
        }])
    }

    pub fn validate(&self, dimension: usize) -> Result<()> {
        if let SpeciesDensity::Mixture(components) = self {
            if components.is_empty() {
                return Err(Error::Config("Gaussian mixture without components".into()));
            }
            let total: f64 = components.iter().map(|c| c.weight).sum();
            for c in components {
                if c.mean.len() != dimension {
                    return Err(Error::Config(format!(
                        "mixture mean has {} coordinates, expected {dimension}",
                        c.mean.len()
                    )));
                }
                if !(c.variance > 0.0) || !(c.weight >= 0.0) {
                    return Err(Error::Config(format!(
                        "mixture component needs positive variance and nonnegative weight, got ({}, {})",
                        c.variance, c.weight
                    )));
                }
            }
            if !(total > 0.0) {
                return Err(Error::Config("mixture weights sum to zero".into()));
            }
        }
        Ok(())
    }

    pub fn pdf(&self, x: &[f64], grid: &Grid) -> f64 {
        match self {
            SpeciesDensity::Mixture(components) => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                components.iter().map(|c| c.weight * c.pdf(x)).sum::<f64>() / total
            }
            SpeciesDensity::Uniform => 1.0 / grid.volume(),
        }
    }
}

/// Initial densities `u_i^0` of all species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub species: Vec<SpeciesDensity>,
}

/// `n` nonnegative species densities on a grid at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: Grid,
    species: Vec<Vec<f64>>,
    time: f64,
}

impl DensityField {
    pub fn new(grid: Grid, species: Vec<Vec<f64>>, time: f64) -> Result<Self> {
        if species.is_empty() || species.iter().any(|s| s.len() != grid.len()) {
            return Err(Error::GridMismatch(format!(
                "{} species arrays do not match a grid of {} nodes",
                species.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, species, time })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn species_count(&self) -> usize {
        self.species.len()
    }

    pub fn species(&self, i: usize) -> &[f64] {
        &self.species[i]
    }

    pub fn species_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.species[i]
    }

    pub fn all_species(&self) -> &[Vec<f64>] {
        &self.species
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, time: f64) {
        self.time = time;
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.species[i].iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn masses(&self) -> Vec<f64> {
        (0..self.species.len()).map(|i| self.mass(i)).collect()
    }

    pub fn min_value(&self) -> f64 {
        self.species
            .iter()
            .flat_map(|s| s.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn interpolate(&self, i: usize, x: &[f64]) -> f64 {
        self.grid.interpolate(&self.species[i], x)
    }
}

/// Samples `u^0` on the grid and renormalizes each species to unit mass.
pub fn init_density(grid: &Grid, spec: &InitialCondition) -> Result<DensityField> {
    let d = grid.dimension();
    let mut species = Vec::with_capacity(spec.species.len());
    for (i, s) in spec.species.iter().enumerate() {
        s.validate(d)?;
        let mut u: Vec<f64> = (0..grid.len())
            .map(|f| s.pdf(&grid.node(f)[..d], grid))
            .collect();
        let mass = u.iter().sum::<f64>() * grid.cell_volume();
        if !(mass >= MIN_BOX_MASS) {
            return Err(Error::Config(format!(
                "species {i} has only {mass:.6} of its mass inside the box [-{L}, {L}]^{d}",
                L = grid.half_width()
            )));
        }
        let scale = 1.0 / mass;
        u.iter_mut().for_each(|v| *v *= scale);
        species.push(u);
    }
    DensityField::new(*grid, species, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_is_renormalized() {
        let grid = Grid::new(3, 32, 4.0).unwrap();
        let ic = InitialCondition {
            species: vec![SpeciesDensity::gaussian(vec![0.0; 3], 0.04)],
        };
        let u = init_density(&grid, &ic).unwrap();
        assert!((u.mass(0) - 1.0).abs() < 1e-12);
        assert!(u.min_value() >= 0.0);
    }

    #[test]
    fn two_species_have_unit_mass() {
        let grid = Grid::new(2, 64, 3.0).unwrap();
        let ic = InitialCondition {
            species: vec![
                SpeciesDensity::gaussian(vec![0.5, 0.0], 0.1),
                SpeciesDensity::gaussian(vec![-0.5, 0.3], 0.2),
            ],
        };
        let u = init_density(&grid, &ic).unwrap();
        for m in u.masses() {
            assert!((m - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_density_value() {
        let grid = Grid::new(2, 16, 1.5).unwrap();
        let ic = InitialCondition {
            species: vec![SpeciesDensity::Uniform],
        };
        let u = init_density(&grid, &ic).unwrap();
        let want = 1.0 / 9.0;
        assert!(u.species(0).iter().all(|&v| (v - want).abs() < 1e-15));
    }

    #[test]
    fn mass_outside_box_is_rejected() {
        let grid = Grid::new(1, 64, 1.0).unwrap();
        let ic = InitialCondition {
            species: vec![SpeciesDensity::gaussian(vec![0.0], 1.0)],
        };
        assert!(matches!(init_density(&grid, &ic), Err(Error::Config(_))));
    }
}
