//! Riesz kernels, their truncations, the mollifier and the tabulated
//! mollified kernels with gradients and Hessians.

mod mollifier;
mod riesz;
mod table;

use std::sync::Arc;

pub use mollifier::{MollifierProfile, MollifierSpec};
pub use riesz::{GaussianKernel, RieszSpec, TruncatedRiesz};
pub use table::{build_mollified, build_with_points, TabulatedKernel, FAR_RADIUS, INNER_RADIUS, TABLE_POINTS};

use crate::error::{Error, Result};

/// A radially symmetric kernel `K(x) = k(|x|)`.
pub trait Radial {
    /// `[k(r), k'(r), k''(r)]`.
    fn radial(&self, r: f64) -> [f64; 3];

    fn value_slope(&self, r: f64) -> (f64, f64) {
        let [v, d1, _] = self.radial(r);
        (v, d1)
    }

    fn kernel_value(&self, x: &[f64]) -> f64 {
        self.radial(norm(x))[0]
    }

    /// `k'(r) x / r`, zero at the origin.
    fn kernel_gradient(&self, x: &[f64]) -> Vec<f64> {
        let r = norm(x);
        if r == 0.0 {
            return vec![0.0; x.len()];
        }
        let d1 = self.radial(r)[1];
        x.iter().map(|&c| d1 * c / r).collect()
    }

    /// `k'' x̂ x̂ᵀ + (k'/r)(I - x̂ x̂ᵀ)`, row-major; `k''(0) I` at the origin.
    fn kernel_hessian(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        let r = norm(x);
        let [_, d1, d2] = self.radial(r);
        let mut h = vec![0.0; d * d];
        if r == 0.0 {
            for a in 0..d {
                h[a * d + a] = d2;
            }
            return h;
        }
        let tangential = d1 / r;
        for a in 0..d {
            for b in a..d {
                let outer = x[a] * x[b] / (r * r);
                let delta = if a == b { 1.0 } else { 0.0 };
                let v = d2 * outer + tangential * (delta - outer);
                h[a * d + b] = v;
                h[b * d + a] = v;
            }
        }
        h
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum::<f64>().sqrt()
}

impl Radial for GaussianKernel {
    fn radial(&self, r: f64) -> [f64; 3] {
        GaussianKernel::radial(self, r)
    }
}

impl Radial for TruncatedRiesz {
    fn radial(&self, r: f64) -> [f64; 3] {
        TruncatedRiesz::radial(self, r)
    }
}

/// Kernel family of one species pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    Riesz(RieszSpec),
    Gaussian(GaussianKernel),
}

/// Per-pair kernels `B_ij` of an `n`-species system.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    species: usize,
    dimension: usize,
    entries: Vec<KernelFamily>,
}

impl InteractionMatrix {
    /// Row-major entries, `entries[i * n + j] = B_ij`.
    pub fn new(species: usize, dimension: usize, entries: Vec<KernelFamily>) -> Result<Self> {
        if species == 0 {
            return Err(Error::InvalidSpec("at least one species is required".into()));
        }
        if entries.len() != species * species {
            return Err(Error::InvalidSpec(format!(
                "{} kernels given for {species} species, expected {}",
                entries.len(),
                species * species
            )));
        }
        for e in &entries {
            if let KernelFamily::Riesz(s) = e {
                if s.dimension() != dimension {
                    return Err(Error::InvalidSpec(format!(
                        "kernel dimension {} does not match {dimension}",
                        s.dimension()
                    )));
                }
            }
        }
        Ok(Self {
            species,
            dimension,
            entries,
        })
    }

    pub fn uniform(species: usize, dimension: usize, family: KernelFamily) -> Result<Self> {
        Self::new(species, dimension, vec![family; species * species])
    }

    pub fn species(&self) -> usize {
        self.species
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn get(&self, i: usize, j: usize) -> &KernelFamily {
        &self.entries[i * self.species + j]
    }

    /// `sup_{ij} ϑ_ij` over the Riesz pairs.
    pub fn max_exponent(&self) -> Option<f64> {
        self.entries
            .iter()
            .filter_map(|e| match e {
                KernelFamily::Riesz(s) => Some(s.exponent()),
                KernelFamily::Gaussian(_) => None,
            })
            .reduce(f64::max)
    }
}

/// An evaluable kernel: tabulated mollified Riesz, grid-regularized Riesz
/// or bounded Gaussian.
#[derive(Debug, Clone)]
pub enum KernelProfile {
    Mollified(Arc<TabulatedKernel>),
    Truncated(TruncatedRiesz),
    Gaussian(GaussianKernel),
}

impl Radial for KernelProfile {
    #[inline]
    fn radial(&self, r: f64) -> [f64; 3] {
        match self {
            KernelProfile::Mollified(t) => t.radial(r),
            KernelProfile::Truncated(t) => t.radial(r),
            KernelProfile::Gaussian(g) => g.radial(r),
        }
    }

    #[inline]
    fn value_slope(&self, r: f64) -> (f64, f64) {
        match self {
            KernelProfile::Mollified(t) => t.value_slope(r),
            KernelProfile::Truncated(t) => {
                let [v, d1, _] = t.radial(r);
                (v, d1)
            }
            KernelProfile::Gaussian(g) => {
                let [v, d1, _] = g.radial(r);
                (v, d1)
            }
        }
    }
}

/// The `n × n` evaluable kernels used by drifts and convolutions.
#[derive(Debug, Clone)]
pub struct PairKernels {
    species: usize,
    kernels: Vec<KernelProfile>,
}

impl PairKernels {
    pub fn from_profiles(species: usize, kernels: Vec<KernelProfile>) -> Result<Self> {
        if kernels.len() != species * species || species == 0 {
            return Err(Error::InvalidSpec(format!(
                "{} kernels for {species} species",
                kernels.len()
            )));
        }
        Ok(Self { species, kernels })
    }

    /// `B^η_ij`: Riesz pairs are mollified (identical specs share one
    /// table); Gaussian pairs are already bounded and used as given.
    pub fn mollified(matrix: &InteractionMatrix, mollifier: &MollifierSpec) -> Result<Self> {
        let mut built: Vec<(RieszSpec, Arc<TabulatedKernel>)> = Vec::new();
        let mut kernels = Vec::with_capacity(matrix.entries.len());
        for e in &matrix.entries {
            kernels.push(match e {
                KernelFamily::Riesz(spec) => {
                    let table = match built.iter().find(|(s, _)| s == spec) {
                        Some((_, t)) => t.clone(),
                        None => {
                            let t = Arc::new(build_mollified(spec, mollifier)?);
                            built.push((*spec, t.clone()));
                            t
                        }
                    };
                    KernelProfile::Mollified(table)
                }
                KernelFamily::Gaussian(g) => KernelProfile::Gaussian(*g),
            });
        }
        Self::from_profiles(matrix.species, kernels)
    }

    /// Unmollified kernels `B_ij`, Riesz pairs frozen below `radius`.
    pub fn limit(matrix: &InteractionMatrix, radius: f64) -> Result<Self> {
        let kernels = matrix
            .entries
            .iter()
            .map(|e| match e {
                KernelFamily::Riesz(spec) => KernelProfile::Truncated(TruncatedRiesz {
                    spec: *spec,
                    radius,
                }),
                KernelFamily::Gaussian(g) => KernelProfile::Gaussian(*g),
            })
            .collect();
        Self::from_profiles(matrix.species, kernels)
    }

    pub fn species(&self) -> usize {
        self.species
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &KernelProfile {
        &self.kernels[i * self.species + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hessian_is_symmetric() {
        let g = GaussianKernel::new(1.3, 0.4).unwrap();
        let h = g.kernel_hessian(&[0.1, -0.3, 0.25]);
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(h[a * 3 + b], h[b * 3 + a]);
            }
        }
    }

    #[test]
    fn gradient_vanishes_at_origin() {
        let g = GaussianKernel::new(1.0, 1.0).unwrap();
        assert_eq!(g.kernel_gradient(&[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn matrix_shape_is_checked() {
        let g = KernelFamily::Gaussian(GaussianKernel::new(1.0, 1.0).unwrap());
        assert!(InteractionMatrix::new(2, 1, vec![g; 3]).is_err());
        let m = InteractionMatrix::uniform(2, 1, g).unwrap();
        assert_eq!(m.max_exponent(), None);
    }
}
