use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fft::FftNd;
use super::{DensityField, Grid, Stencil};
use crate::error::{Error, Result};
use crate::kernels::{PairKernels, Radial};

/// Default bound on `|K(L)| / |K(0)|` for periodic convolutions.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Circular convolution on the torus with minimum-image kernel
    /// samples; gradients by spectral differentiation.
    Periodic,
    /// Aperiodic convolution of the box data via zero padding to twice the
    /// box; gradients by convolution with the sampled kernel gradient.
    #[default]
    FreeSpace,
}

/// `B_ij * u_j` and `∇(B_ij * u_j)` on the grid for every pair.
#[derive(Debug, Clone)]
pub struct ConvolutionFields {
    grid: Grid,
    species: usize,
    values: Vec<Vec<f64>>,
    gradients: Vec<Vec<Vec<f64>>>,
}

impl ConvolutionFields {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn species(&self) -> usize {
        self.species
    }

    pub fn value(&self, i: usize, j: usize) -> &[f64] {
        &self.values[i * self.species + j]
    }

    pub fn gradient(&self, i: usize, j: usize, axis: usize) -> &[f64] {
        &self.gradients[i * self.species + j][axis]
    }

    /// Interpolated `(B_ij * u_j)(x)` and its gradient.
    #[inline]
    pub fn sample(&self, i: usize, j: usize, stencil: &Stencil) -> (f64, [f64; 3]) {
        let p = i * self.species + j;
        let mut g = [0.0; 3];
        for (a, ga) in g.iter_mut().enumerate().take(self.grid.dimension()) {
            *ga = stencil.apply(&self.gradients[p][a]);
        }
        (stencil.apply(&self.values[p]), g)
    }
}

struct PairSpectrum {
    value: Vec<Complex64>,
    /// Empty under spectral differentiation.
    gradient: Vec<Vec<Complex64>>,
}

/// Precomputed kernel spectra for repeated convolutions on one grid.
pub struct Convolver {
    grid: Grid,
    boundary: Boundary,
    work: usize,
    fft: FftNd,
    species: usize,
    pairs: Vec<PairSpectrum>,
}

impl Convolver {
    pub fn new(grid: Grid, boundary: Boundary, kernels: &PairKernels, tail_tolerance: f64) -> Result<Self> {
        let work = match boundary {
            Boundary::Periodic => grid.cells(),
            Boundary::FreeSpace => 2 * grid.cells(),
        };
        let fft = FftNd::new(work, grid.dimension());
        let n = kernels.species();
        let mut pairs = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let k = kernels.get(i, j);
                if boundary == Boundary::Periodic {
                    let peak = k.radial(0.0)[0].abs();
                    let tail = k.radial(grid.half_width())[0].abs();
                    let ratio = if peak > 0.0 { tail / peak } else { 0.0 };
                    if ratio > tail_tolerance {
                        return Err(Error::KernelTail {
                            ratio,
                            tolerance: tail_tolerance,
                        });
                    }
                }
                let mut value = sample_lattice(&grid, boundary, work, |x| k.kernel_value(x));
                fft.forward(&mut value);
                let gradient = match boundary {
                    Boundary::Periodic => Vec::new(),
                    Boundary::FreeSpace => (0..grid.dimension())
                        .map(|a| {
                            let mut g = sample_lattice(&grid, boundary, work, |x| {
                                let r = crate::kernels::norm(x);
                                if r == 0.0 {
                                    0.0
                                } else {
                                    k.radial(r)[1] * x[a] / r
                                }
                            });
                            fft.forward(&mut g);
                            g
                        })
                        .collect(),
                };
                pairs.push(PairSpectrum { value, gradient });
            }
        }
        Ok(Self {
            grid,
            boundary,
            work,
            fft,
            species: n,
            pairs,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn convolve(&self, field: &DensityField) -> Result<ConvolutionFields> {
        if field.grid() != &self.grid {
            return Err(Error::GridMismatch("field and convolver grids differ".into()));
        }
        if field.species_count() != self.species {
            return Err(Error::GridMismatch(format!(
                "field has {} species, kernels {}",
                field.species_count(),
                self.species
            )));
        }
        let n = self.species;
        let d = self.grid.dimension();
        let spectra: Vec<Vec<Complex64>> = (0..n)
            .map(|j| {
                let mut u = self.embed(field.species(j));
                self.fft.forward(&mut u);
                u
            })
            .collect();
        let mut values = Vec::with_capacity(n * n);
        let mut gradients = Vec::with_capacity(n * n);
        for i in 0..n {
            for (j, u) in spectra.iter().enumerate() {
                let pair = &self.pairs[i * n + j];
                values.push(self.apply(u, &pair.value, None));
                let grads = (0..d)
                    .map(|a| match self.boundary {
                        Boundary::Periodic => self.apply(u, &pair.value, Some(a)),
                        Boundary::FreeSpace => self.apply(u, &pair.gradient[a], None),
                    })
                    .collect();
                gradients.push(grads);
            }
        }
        Ok(ConvolutionFields {
            grid: self.grid,
            species: n,
            values,
            gradients,
        })
    }

    fn embed(&self, data: &[f64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.fft.len()];
        for (f, &v) in data.iter().enumerate() {
            out[self.work_index(f)] = Complex64::new(v, 0.0);
        }
        out
    }

    fn work_index(&self, flat: usize) -> usize {
        let idx = self.grid.unravel(flat);
        idx[..self.grid.dimension()]
            .iter()
            .fold(0, |acc, &i| acc * self.work + i)
    }

    /// Inverse transform of `u_hat * k_hat` (times `i k_axis` when
    /// differentiating), cropped to the grid and scaled by the cell volume.
    fn apply(&self, u_hat: &[Complex64], k_hat: &[Complex64], derivative: Option<usize>) -> Vec<f64> {
        let d = self.grid.dimension();
        let work = self.work;
        let dk = std::f64::consts::PI / (0.5 * work as f64 * self.grid.dx());
        let mut prod: Vec<Complex64> = u_hat
            .par_iter()
            .zip(k_hat.par_iter())
            .enumerate()
            .map(|(f, (u, k))| {
                let z = u * k;
                match derivative {
                    None => z,
                    Some(axis) => {
                        let j = (f / work.pow((d - 1 - axis) as u32)) % work;
                        if 2 * j == work {
                            Complex64::new(0.0, 0.0)
                        } else {
                            let kk = Grid::min_image(j, work) as f64 * dk;
                            z * Complex64::new(0.0, kk)
                        }
                    }
                }
            })
            .collect();
        self.fft.inverse(&mut prod);
        let vol = self.grid.cell_volume();
        (0..self.grid.len())
            .map(|f| prod[self.work_index(f)].re * vol)
            .collect()
    }
}

/// Samples `kernel(displacement)` on the work lattice.
fn sample_lattice(
    grid: &Grid,
    boundary: Boundary,
    work: usize,
    kernel: impl Fn(&[f64]) -> f64 + Sync,
) -> Vec<Complex64> {
    let d = grid.dimension();
    let dx = grid.dx();
    let total = work.pow(d as u32);
    (0..total)
        .into_par_iter()
        .map(|f| {
            let mut x = [0.0; 3];
            let mut rest = f;
            for a in (0..d).rev() {
                let j = rest % work;
                rest /= work;
                let m = match boundary {
                    Boundary::Periodic => Grid::min_image(j, work),
                    Boundary::FreeSpace => {
                        if j < work / 2 {
                            j as isize
                        } else {
                            j as isize - work as isize
                        }
                    }
                };
                x[a] = m as f64 * dx;
            }
            Complex64::new(kernel(&x[..d]), 0.0)
        })
        .collect()
}

/// One-off convolution `Σ_j K(x_i - x_j) u_j Δx^d` of a nodal array with
/// an arbitrary kernel of the displacement.
pub fn convolve_samples(
    grid: &Grid,
    boundary: Boundary,
    kernel: impl Fn(&[f64]) -> f64 + Sync,
    data: &[f64],
) -> Result<Vec<f64>> {
    if data.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "array of {} values for a grid of {} nodes",
            data.len(),
            grid.len()
        )));
    }
    let work = match boundary {
        Boundary::Periodic => grid.cells(),
        Boundary::FreeSpace => 2 * grid.cells(),
    };
    let fft = FftNd::new(work, grid.dimension());
    let mut k_hat = sample_lattice(grid, boundary, work, kernel);
    fft.forward(&mut k_hat);
    let conv = Convolver {
        grid: *grid,
        boundary,
        work,
        fft,
        species: 1,
        pairs: Vec::new(),
    };
    let mut u = conv.embed(data);
    conv.fft.forward(&mut u);
    Ok(conv.apply(&u, &k_hat, None))
}

/// Convolution fields of every pair for one density snapshot.
pub fn convolve_field(
    field: &DensityField,
    kernels: &PairKernels,
    boundary: Boundary,
    tail_tolerance: f64,
) -> Result<ConvolutionFields> {
    Convolver::new(*field.grid(), boundary, kernels, tail_tolerance)?.convolve(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{init_density, InitialCondition, SpeciesDensity};

    fn direct(grid: &Grid, boundary: Boundary, k: impl Fn(&[f64]) -> f64, u: &[f64]) -> Vec<f64> {
        let d = grid.dimension();
        let m = grid.cells() as isize;
        (0..grid.len())
            .map(|p| {
                let ip = grid.unravel(p);
                (0..grid.len())
                    .map(|q| {
                        let iq = grid.unravel(q);
                        let mut x = [0.0; 3];
                        for a in 0..d {
                            let mut s = ip[a] as isize - iq[a] as isize;
                            if boundary == Boundary::Periodic {
                                s = s.rem_euclid(m);
                                s = Grid::min_image(s as usize, m as usize);
                            }
                            x[a] = s as f64 * grid.dx();
                        }
                        k(&x[..d]) * u[q]
                    })
                    .sum::<f64>()
                    * grid.cell_volume()
            })
            .collect()
    }

    fn gaussian(grid: &Grid) -> Vec<f64> {
        let ic = InitialCondition {
            species: vec![SpeciesDensity::gaussian(vec![0.1; grid.dimension()], 0.2)],
        };
        init_density(grid, &ic).unwrap().species(0).to_vec()
    }

    #[test]
    fn delta_kernel_is_identity() {
        let grid = Grid::new(2, 16, 2.0).unwrap();
        let u = gaussian(&grid);
        let vol = grid.cell_volume();
        let out = convolve_samples(
            &grid,
            Boundary::Periodic,
            |x| if x.iter().all(|c| *c == 0.0) { 1.0 / vol } else { 0.0 },
            &u,
        )
        .unwrap();
        for (a, b) in out.iter().zip(&u) {
            assert!((a - b).abs() < 1e-12 * u.iter().cloned().fold(0.0, f64::max));
        }
    }

    #[test]
    fn constant_field_gives_kernel_mass() {
        let grid = Grid::new(2, 16, 1.0).unwrap();
        let k = |x: &[f64]| (-(x[0] * x[0] + x[1] * x[1]) / 0.1).exp();
        let u = vec![2.5; grid.len()];
        let out = convolve_samples(&grid, Boundary::Periodic, k, &u).unwrap();
        let mass: f64 = direct(&grid, Boundary::Periodic, k, &vec![1.0; grid.len()])[0];
        for v in out {
            assert!((v - 2.5 * mass).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_matches_direct_sum_3d() {
        let grid = Grid::new(3, 16, 1.5).unwrap();
        let u = gaussian(&grid);
        let k = |x: &[f64]| (-(x.iter().map(|c| c * c).sum::<f64>()) / 0.3).exp();
        for boundary in [Boundary::Periodic, Boundary::FreeSpace] {
            let fast = convolve_samples(&grid, boundary, k, &u).unwrap();
            let slow = direct(&grid, boundary, k, &u);
            let err = fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-10, "{boundary:?}: {err}");
        }
    }

    #[test]
    fn heavy_tail_is_rejected_on_torus() {
        use crate::kernels::{InteractionMatrix, KernelFamily, RieszSpec};
        let grid = Grid::new(3, 8, 1.0).unwrap();
        let m = InteractionMatrix::uniform(1, 3, KernelFamily::Riesz(RieszSpec::classical(3, 1.0).unwrap())).unwrap();
        let k = PairKernels::limit(&m, 0.1).unwrap();
        let err = Convolver::new(grid, Boundary::Periodic, &k, DEFAULT_TAIL_TOLERANCE).err();
        assert!(matches!(err, Some(Error::KernelTail { .. })));
        assert!(Convolver::new(grid, Boundary::FreeSpace, &k, DEFAULT_TAIL_TOLERANCE).is_ok());
    }
}
