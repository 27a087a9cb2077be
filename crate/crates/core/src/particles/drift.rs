use rayon::prelude::*;

use super::ensemble::{Ensemble, SpeciesParams};
use crate::error::{Error, Result};
use crate::fields::ConvolutionFields;
use crate::kernels::{KernelProfile, PairKernels, Radial};
use crate::nonlinearity::RateFunction;

/// Targets per parallel work item in the pair loop.
const BLOCK: usize = 64;

/// `(1/N) Σ_l B(x - y_l)` and `(1/N) Σ_l ∇B(x - y_l)` over one species.
#[inline]
fn empirical<K: Radial + ?Sized>(kernel: &K, x: &[f64], ys: &[f64], d: usize) -> (f64, [f64; 3]) {
    let mut s = 0.0;
    let mut g = [0.0; 3];
    for y in ys.chunks_exact(d) {
        let mut diff = [0.0; 3];
        let mut r2 = 0.0;
        for a in 0..d {
            diff[a] = x[a] - y[a];
            r2 += diff[a] * diff[a];
        }
        let r = r2.sqrt();
        let (v, slope) = kernel.value_slope(r);
        s += v;
        if r > 0.0 {
            let c = slope / r;
            for a in 0..d {
                g[a] += c * diff[a];
            }
        }
    }
    let n = (ys.len() / d) as f64;
    for ga in g.iter_mut() {
        *ga /= n;
    }
    (s / n, g)
}

pub(crate) fn empirical_profile(kernel: &KernelProfile, x: &[f64], ys: &[f64], d: usize) -> (f64, [f64; 3]) {
    match kernel {
        KernelProfile::Mollified(t) => empirical(t.as_ref(), x, ys, d),
        KernelProfile::Truncated(t) => empirical(t, x, ys, d),
        KernelProfile::Gaussian(g) => empirical(g, x, ys, d),
    }
}

/// Interacting-system drift of every particle:
/// `-∇U_i(X^k_i) - Σ_j f'(S^k_ij) (1/N) Σ_l ∇B_ij(X^k_i - X^l_j)` with
/// `S^k_ij = (1/N) Σ_l B_ij(X^k_i - X^l_j)`, self term included. Output
/// has the ensemble's layout.
pub fn pairwise_drift(
    ens: &Ensemble,
    kernels: &PairKernels,
    rate: &dyn RateFunction,
    params: &SpeciesParams,
) -> Result<Vec<f64>> {
    ens.check_finite()?;
    check_species(ens.species(), kernels.species(), params)?;
    let n = ens.species();
    let np = ens.particles();
    let d = ens.dimension();
    let mut out = vec![0.0; ens.positions().len()];
    out.par_chunks_mut(BLOCK * d)
        .enumerate()
        .for_each(|(block, chunk)| {
            let first = block * BLOCK;
            for (t, w) in chunk.chunks_exact_mut(d).enumerate() {
                let flat = first + t;
                let (i, k) = (flat / np, flat % np);
                let x = ens.position(i, k);
                params.potential.neg_gradient(x, w);
                for j in 0..n {
                    let (s, g) = empirical_profile(kernels.get(i, j), x, ens.species_positions(j), d);
                    let slope = rate.slope(s);
                    for a in 0..d {
                        w[a] -= slope * g[a];
                    }
                }
            }
        });
    Ok(out)
}

/// `-∇U_i(x) - Σ_j f'((B_ij * u_j)(x)) ∇(B_ij * u_j)(x)` with the
/// convolutions interpolated from the grid (periodic wrap).
pub fn field_drift(
    x: &[f64],
    species: usize,
    conv: &ConvolutionFields,
    rate: &dyn RateFunction,
    params: &SpeciesParams,
    out: &mut [f64],
) {
    let d = x.len();
    params.potential.neg_gradient(x, out);
    let stencil = conv.grid().stencil(x);
    for j in 0..conv.species() {
        let (c, g) = conv.sample(species, j, &stencil);
        let slope = rate.slope(c);
        for a in 0..d {
            out[a] -= slope * g[a];
        }
    }
}

/// Intermediate-system drift at `x` from the mollified fields of `u_η`
/// and the cutoff `f_γ`.
pub fn meanfield_drift(
    x: &[f64],
    species: usize,
    conv: &ConvolutionFields,
    cutoff: &dyn RateFunction,
    params: &SpeciesParams,
) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    field_drift(x, species, conv, cutoff, params, &mut out);
    out
}

/// Limit-system drift at `x` from the limit-kernel fields of `u` and the
/// raw `f`.
pub fn limit_drift(
    x: &[f64],
    species: usize,
    conv: &ConvolutionFields,
    f: &dyn RateFunction,
    params: &SpeciesParams,
) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    field_drift(x, species, conv, f, params, &mut out);
    out
}

/// [`field_drift`] for every particle of an ensemble.
pub fn ensemble_field_drift(
    ens: &Ensemble,
    conv: &ConvolutionFields,
    rate: &dyn RateFunction,
    params: &SpeciesParams,
) -> Result<Vec<f64>> {
    ens.check_finite()?;
    check_species(ens.species(), conv.species(), params)?;
    if conv.grid().dimension() != ens.dimension() {
        return Err(Error::GridMismatch(format!(
            "fields in dimension {}, particles in dimension {}",
            conv.grid().dimension(),
            ens.dimension()
        )));
    }
    let d = ens.dimension();
    let np = ens.particles();
    let mut out = vec![0.0; ens.positions().len()];
    out.par_chunks_mut(BLOCK * d)
        .enumerate()
        .for_each(|(block, chunk)| {
            for (t, w) in chunk.chunks_exact_mut(d).enumerate() {
                let flat = block * BLOCK + t;
                let (i, k) = (flat / np, flat % np);
                field_drift(ens.position(i, k), i, conv, rate, params, w);
            }
        });
    Ok(out)
}

fn check_species(ensemble: usize, kernels: usize, params: &SpeciesParams) -> Result<()> {
    if ensemble != kernels || ensemble != params.species() {
        return Err(Error::InvalidSpec(format!(
            "species counts differ: ensemble {ensemble}, kernels {kernels}, parameters {}",
            params.species()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{GaussianKernel, InteractionMatrix, KernelFamily};
    use crate::nonlinearity::{GrowthFamily, GrowthSpec};
    use crate::potential::Potential;

    fn gaussian_kernels(d: usize) -> PairKernels {
        let g = KernelFamily::Gaussian(GaussianKernel::new(1.5, 0.7).unwrap());
        PairKernels::limit(&InteractionMatrix::uniform(1, d, g).unwrap(), 0.1).unwrap()
    }

    fn square() -> GrowthSpec {
        GrowthSpec::new(
            GrowthFamily::Power {
                coefficient: 1.0,
                exponent: 2.0,
            },
            2.0,
        )
        .unwrap()
    }

    #[test]
    fn interaction_off_leaves_potential_drift() {
        let ens = Ensemble::new(1, 3, 3, vec![0.1, 0.2, 0.3, -1.0, 0.5, 2.0, 0.0, 0.0, 0.0]).unwrap();
        let zero = GrowthSpec::with_default_growth(GrowthFamily::Constant(2.0)).unwrap();
        let params = SpeciesParams::new(vec![0.1], Potential::InvertedQuadratic).unwrap();
        let w = pairwise_drift(&ens, &gaussian_kernels(3), &zero, &params).unwrap();
        assert_eq!(w, ens.positions());
    }

    #[test]
    fn single_particle_self_term_is_neutral() {
        let ens = Ensemble::new(1, 1, 3, vec![0.4, -0.2, 0.9]).unwrap();
        let params = SpeciesParams::new(vec![0.1], Potential::None).unwrap();
        let w = pairwise_drift(&ens, &gaussian_kernels(3), &square(), &params).unwrap();
        assert_eq!(w, vec![0.0; 3]);
    }

    #[test]
    fn permutation_is_equivariant() {
        let pos = vec![0.1, 0.0, -0.3, 0.5, 0.2, 0.2, -0.4, 0.1, 0.0];
        let swapped = vec![0.5, 0.2, 0.2, 0.1, 0.0, -0.3, -0.4, 0.1, 0.0];
        let params = SpeciesParams::new(vec![0.1], Potential::InvertedQuadratic).unwrap();
        let k = gaussian_kernels(3);
        let a = pairwise_drift(&Ensemble::new(1, 3, 3, pos).unwrap(), &k, &square(), &params).unwrap();
        let b = pairwise_drift(&Ensemble::new(1, 3, 3, swapped).unwrap(), &k, &square(), &params).unwrap();
        let close = |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(p, q)| (p - q).abs() <= 1e-14);
        assert!(close(&a[0..3], &b[3..6]));
        assert!(close(&a[3..6], &b[0..3]));
        assert!(close(&a[6..9], &b[6..9]));
    }
}
