use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::ConvolutionFields;
use crate::kernels::PairKernels;
use crate::particles::{empirical_profile, Ensemble};

/// Gaps `|(1/N) Σ_l φ_ij(X̄^k_i - X̄^l_j) - (φ_ij * u_j)(X̄^k_i)|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlnRecord {
    pub theta: f64,
    pub particles: usize,
    pub species: usize,
    /// Per `(i, j)` (row-major) maximum over `k`.
    pub max_deviation: Vec<f64>,
    /// Per `(i, j)` root mean square over `k`.
    pub rms_deviation: Vec<f64>,
    /// Some maximum exceeds `N^{-θ}`.
    pub event: bool,
}

pub fn lln_deviation(
    ens: &Ensemble,
    conv: &ConvolutionFields,
    kernels: &PairKernels,
    theta: f64,
) -> Result<LlnRecord> {
    let n = ens.species();
    if conv.species() != n || kernels.species() != n {
        return Err(Error::InvalidSpec(format!(
            "species counts differ: ensemble {n}, fields {}, kernels {}",
            conv.species(),
            kernels.species()
        )));
    }
    if conv.grid().dimension() != ens.dimension() {
        return Err(Error::GridMismatch("fields and particles differ in dimension".into()));
    }
    let np = ens.particles();
    let d = ens.dimension();
    let mut max_deviation = vec![0.0; n * n];
    let mut rms_deviation = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let gaps: Vec<f64> = (0..np)
                .into_par_iter()
                .map(|k| {
                    let x = ens.position(i, k);
                    let (empirical, _) = empirical_profile(kernels.get(i, j), x, ens.species_positions(j), d);
                    let stencil = conv.grid().stencil(x);
                    let (field, _) = conv.sample(i, j, &stencil);
                    (empirical - field).abs()
                })
                .collect();
            max_deviation[i * n + j] = gaps.iter().copied().fold(0.0, f64::max);
            rms_deviation[i * n + j] = (gaps.iter().map(|g| g * g).sum::<f64>() / np as f64).sqrt();
        }
    }
    let level = (np as f64).powf(-theta);
    Ok(LlnRecord {
        theta,
        particles: np,
        species: n,
        event: max_deviation.iter().any(|&m| m > level),
        max_deviation,
        rms_deviation,
    })
}
