use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::convolution::{Boundary, ConvolutionFields, Convolver, DEFAULT_TAIL_TOLERANCE};
use super::{init_density, DensityField, Grid, InitialCondition};
use crate::error::{Error, Result};
use crate::kernels::{InteractionMatrix, MollifierSpec, PairKernels};
use crate::nonlinearity::{CutoffFunction, GrowthSpec, RateFunction};
use crate::potential::Potential;

/// Safety factor in the explicit stability bound.
pub const CFL_SAFETY: f64 = 0.4;

#[derive(Debug, Clone, PartialEq)]
pub enum KernelMode {
    /// `B^η_ij`.
    Mollified(MollifierSpec),
    /// `B_ij` truncated at half a cell width.
    Limit,
}

impl KernelMode {
    /// Kernels of this mode on `grid`.
    pub fn kernels(&self, matrix: &InteractionMatrix, grid: &Grid) -> Result<PairKernels> {
        match self {
            KernelMode::Mollified(m) => PairKernels::mollified(matrix, m),
            KernelMode::Limit => PairKernels::limit(matrix, 0.5 * grid.dx()),
        }
    }
}

/// The rate nonlinearity in the drift: `f_γ` or the raw `f`.
#[derive(Debug, Clone, PartialEq)]
pub enum Rate {
    Raw(GrowthSpec),
    Cutoff(CutoffFunction),
}

impl RateFunction for Rate {
    #[inline]
    fn value(&self, r: f64) -> f64 {
        match self {
            Rate::Raw(f) => f.value(r),
            Rate::Cutoff(f) => f.value(r),
        }
    }

    #[inline]
    fn slope(&self, r: f64) -> f64 {
        match self {
            Rate::Raw(f) => f.slope(r),
            Rate::Cutoff(f) => f.slope(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeParams {
    pub sigma: Vec<f64>,
    pub potential: Potential,
    pub interaction: InteractionMatrix,
    pub mode: KernelMode,
    pub rate: Rate,
    /// Largest time step; [`PdeSolver::advance`] subdivides further when
    /// the stability bound requires it.
    pub dt: f64,
    pub final_time: f64,
    pub boundary: Boundary,
    pub tail_tolerance: f64,
}

impl PdeParams {
    pub fn new(
        sigma: Vec<f64>,
        interaction: InteractionMatrix,
        mode: KernelMode,
        rate: Rate,
        dt: f64,
        final_time: f64,
    ) -> Self {
        Self {
            sigma,
            potential: Potential::default(),
            interaction,
            mode,
            rate,
            dt,
            final_time,
            boundary: Boundary::default(),
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
        }
    }

    fn validate(&self, grid: &Grid) -> Result<()> {
        let n = self.interaction.species();
        if self.sigma.len() != n {
            return Err(Error::InvalidSpec(format!(
                "{} diffusion coefficients for {n} species",
                self.sigma.len()
            )));
        }
        if let Some(s) = self.sigma.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidSpec(format!("diffusion must be nonnegative, got {s}")));
        }
        if !(self.dt > 0.0) || !(self.final_time >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "need dt > 0 and T >= 0, got dt = {}, T = {}",
                self.dt, self.final_time
            )));
        }
        if self.interaction.dimension() != grid.dimension() {
            return Err(Error::GridMismatch(format!(
                "interaction in dimension {}, grid in dimension {}",
                self.interaction.dimension(),
                grid.dimension()
            )));
        }
        Ok(())
    }
}

/// Per-species drift `w_i = ∇U_i + Σ_j f'(B_ij * u_j) ∇(B_ij * u_j)`
/// sampled on the grid nodes; `drift[i][axis][node]`.
pub type DriftField = Vec<Vec<Vec<f64>>>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub dt: f64,
    pub bound: f64,
}

/// Explicit upwind finite-volume solver for
/// `∂_t u_i = div(u_i w_i) + σ_i Δu_i` on a periodic grid.
pub struct PdeSolver {
    grid: Grid,
    params: PdeParams,
    kernels: PairKernels,
    convolver: Convolver,
}

impl PdeSolver {
    pub fn new(grid: Grid, params: PdeParams) -> Result<Self> {
        params.validate(&grid)?;
        let kernels = params.mode.kernels(&params.interaction, &grid)?;
        Self::with_kernels(grid, params, kernels)
    }

    /// Reuses prebuilt kernels.
    pub fn with_kernels(grid: Grid, params: PdeParams, kernels: PairKernels) -> Result<Self> {
        params.validate(&grid)?;
        let convolver = Convolver::new(grid, params.boundary, &kernels, params.tail_tolerance)?;
        Ok(Self {
            grid,
            params,
            kernels,
            convolver,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &PdeParams {
        &self.params
    }

    pub fn kernels(&self) -> &PairKernels {
        &self.kernels
    }

    pub fn convolve(&self, field: &DensityField) -> Result<ConvolutionFields> {
        self.convolver.convolve(field)
    }

    pub fn drift_field(&self, conv: &ConvolutionFields) -> DriftField {
        let d = self.grid.dimension();
        let n = self.params.interaction.species();
        let rate = &self.params.rate;
        (0..n)
            .map(|i| {
                (0..d)
                    .map(|a| {
                        (0..self.grid.len())
                            .into_par_iter()
                            .map(|f| {
                                let x = self.grid.node(f)[a];
                                let mut w = -self.params.potential.neg_gradient_component(x);
                                for j in 0..n {
                                    let c = conv.value(i, j)[f];
                                    w += rate.slope(c) * conv.gradient(i, j, a)[f];
                                }
                                w
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// `0.4 min(Δx² / (2d max σ), Δx / R)` where `R` is the largest total
    /// outflow speed `Σ_a (v⁺ at the right face - v⁻ at the left face)` of a
    /// cell under the velocity `v = -w`.
    pub fn stability_bound(&self, drift: &DriftField) -> f64 {
        let dx = self.grid.dx();
        let d = self.grid.dimension();
        let sigma = self.params.sigma.iter().copied().fold(0.0, f64::max);
        let diffusive = if sigma > 0.0 {
            dx * dx / (2.0 * d as f64 * sigma)
        } else {
            f64::INFINITY
        };
        let outflow = drift
            .iter()
            .map(|w| {
                (0..self.grid.len())
                    .into_par_iter()
                    .map(|f| {
                        let idx = self.grid.unravel(f);
                        let mut rate = 0.0;
                        for (a, wa) in w.iter().enumerate() {
                            let (left, right) = self.neighbours(&idx, a);
                            let v_right = -0.5 * (wa[f] + wa[right]);
                            let v_left = -0.5 * (wa[left] + wa[f]);
                            rate += v_right.max(0.0) - v_left.min(0.0);
                        }
                        rate
                    })
                    .reduce(|| 0.0, f64::max)
            })
            .fold(0.0, f64::max);
        let advective = if outflow > 0.0 { dx / outflow } else { f64::INFINITY };
        CFL_SAFETY * diffusive.min(advective)
    }

    fn neighbours(&self, idx: &[usize; 3], axis: usize) -> (usize, usize) {
        let m = self.grid.cells();
        let stride = m.pow((self.grid.dimension() - 1 - axis) as u32);
        let base = self.grid.ravel(&idx[..self.grid.dimension()]) - idx[axis] * stride;
        let left = base + ((idx[axis] + m - 1) % m) * stride;
        let right = base + ((idx[axis] + 1) % m) * stride;
        (left, right)
    }

    /// One explicit step of size `dt`; fails if `dt` exceeds the bound.
    pub fn step(&self, field: &DensityField, dt: f64) -> Result<(DensityField, StepReport)> {
        let conv = self.convolve(field)?;
        let drift = self.drift_field(&conv);
        let bound = self.stability_bound(&drift);
        if dt > bound {
            return Err(Error::Stability {
                dt,
                bound,
                ratio: dt / bound,
            });
        }
        Ok((self.apply_step(field, &drift, dt), StepReport { dt, bound }))
    }

    fn apply_step(&self, field: &DensityField, drift: &DriftField, dt: f64) -> DensityField {
        let dx = self.grid.dx();
        let species = (0..field.species_count())
            .map(|i| {
                let u = field.species(i);
                let w = &drift[i];
                let sigma = self.params.sigma[i];
                (0..self.grid.len())
                    .into_par_iter()
                    .map(|f| {
                        let idx = self.grid.unravel(f);
                        let mut div = 0.0;
                        let mut lap = 0.0;
                        for (a, wa) in w.iter().enumerate() {
                            let (left, right) = self.neighbours(&idx, a);
                            let v_right = -0.5 * (wa[f] + wa[right]);
                            let v_left = -0.5 * (wa[left] + wa[f]);
                            let flux_right = v_right.max(0.0) * u[f] + v_right.min(0.0) * u[right];
                            let flux_left = v_left.max(0.0) * u[left] + v_left.min(0.0) * u[f];
                            div += flux_right - flux_left;
                            lap += u[left] - 2.0 * u[f] + u[right];
                        }
                        u[f] - dt * div / dx + sigma * dt * lap / (dx * dx)
                    })
                    .collect()
            })
            .collect();
        let mut out = DensityField::new(self.grid, species, field.time() + dt)
            .expect("shapes preserved by the step");
        out.set_time(field.time() + dt);
        out
    }

    /// Advances to `target` with steps no larger than `params.dt` or the
    /// current stability bound. Returns the number of steps taken.
    pub fn advance(&self, field: &mut DensityField, target: f64) -> Result<usize> {
        let mut steps = 0;
        while field.time() < target {
            let remaining = target - field.time();
            if remaining <= 1e-12 * target.abs().max(1.0) {
                field.set_time(target);
                break;
            }
            let conv = self.convolve(field)?;
            let drift = self.drift_field(&conv);
            let bound = self.stability_bound(&drift);
            let dt = self.params.dt.min(bound).min(remaining);
            let mut next = self.apply_step(field, &drift, dt);
            if dt == remaining {
                next.set_time(target);
            }
            if let Some(s) = next.all_species().iter().position(|u| u.iter().any(|v| !v.is_finite())) {
                return Err(Error::NonFiniteDensity {
                    species: s,
                    time: field.time(),
                });
            }
            *field = next;
            steps += 1;
        }
        Ok(steps)
    }

    /// Snapshots at the sorted `times` (each clipped to `[0, T]`); the
    /// initial field is returned for `t = 0`.
    pub fn solve(&self, u0: DensityField, times: &[f64]) -> Result<Vec<DensityField>> {
        let mut field = u0;
        let mut out = Vec::with_capacity(times.len());
        let mut last = f64::NEG_INFINITY;
        for &t in times {
            if !(t >= last) {
                return Err(Error::InvalidSpec("snapshot times must be sorted".into()));
            }
            last = t;
            let t = t.clamp(0.0, self.params.final_time);
            self.advance(&mut field, t)?;
            out.push(field.clone());
        }
        Ok(out)
    }
}

/// One step of size `params.dt`.
pub fn pde_step(field: &DensityField, params: &PdeParams) -> Result<DensityField> {
    let solver = PdeSolver::new(*field.grid(), params.clone())?;
    Ok(solver.step(field, params.dt)?.0)
}

/// Snapshots of the solution from `u0` at `times`; `[T]` when empty.
pub fn solve(params: &PdeParams, grid: &Grid, u0: &InitialCondition, times: &[f64]) -> Result<Vec<DensityField>> {
    let solver = PdeSolver::new(*grid, params.clone())?;
    let field = init_density(grid, u0)?;
    if times.is_empty() {
        solver.solve(field, &[params.final_time])
    } else {
        solver.solve(field, times)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::SpeciesDensity;
    use crate::kernels::{GaussianKernel, KernelFamily};
    use crate::nonlinearity::{cutoff_build, GrowthFamily};

    fn params(d: usize, sigma: f64, f: GrowthFamily, potential: Potential) -> PdeParams {
        let g = KernelFamily::Gaussian(GaussianKernel::new(1.0, 0.3).unwrap());
        let m = InteractionMatrix::uniform(1, d, g).unwrap();
        let rate = Rate::Cutoff(cutoff_build(GrowthSpec::with_default_growth(f).unwrap(), 0.1).unwrap());
        let mut p = PdeParams::new(vec![sigma], m, KernelMode::Limit, rate, 1e-3, 0.1);
        p.potential = potential;
        p.boundary = Boundary::Periodic;
        p
    }

    fn field(grid: &Grid) -> DensityField {
        let ic = InitialCondition {
            species: vec![SpeciesDensity::gaussian(vec![0.0; grid.dimension()], 0.1)],
        };
        init_density(grid, &ic).unwrap()
    }

    #[test]
    fn zero_drift_zero_diffusion_is_identity() {
        let grid = Grid::new(2, 32, 2.0).unwrap();
        let p = params(2, 0.0, GrowthFamily::Constant(1.0), Potential::None);
        let u = field(&grid);
        let next = pde_step(&u, &p).unwrap();
        assert_eq!(next.species(0), u.species(0));
    }

    #[test]
    fn constant_rate_drift_is_potential_gradient() {
        let grid = Grid::new(3, 8, 2.0).unwrap();
        let p = params(3, 0.1, GrowthFamily::Constant(1.0), Potential::InvertedQuadratic);
        let solver = PdeSolver::new(grid, p).unwrap();
        let u = field(&grid);
        let w = solver.drift_field(&solver.convolve(&u).unwrap());
        let node = grid.ravel(&[6, 8 % 8, 4]);
        let x = grid.node(node);
        for a in 0..3 {
            assert_eq!(w[0][a][node], -x[a]);
        }
    }

    #[test]
    fn step_conserves_mass_and_sign() {
        let grid = Grid::new(2, 64, 2.0).unwrap();
        let p = params(2, 0.1, GrowthFamily::Identity, Potential::InvertedQuadratic);
        let solver = PdeSolver::new(grid, p).unwrap();
        let mut u = field(&grid);
        solver.advance(&mut u, 0.05).unwrap();
        assert!((u.mass(0) - 1.0).abs() < 1e-12);
        assert!(u.min_value() >= -1e-14);
        assert!((u.time() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn oversized_step_reports_ratio() {
        let grid = Grid::new(1, 256, 2.0).unwrap();
        let mut p = params(1, 1.0, GrowthFamily::Identity, Potential::None);
        p.dt = 1e-2;
        match pde_step(&field(&grid), &p) {
            Err(Error::Stability { ratio, .. }) => assert!(ratio > 1.0),
            other => panic!("{other:?}"),
        }
    }
}
