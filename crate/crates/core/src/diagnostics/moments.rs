use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::particles::{Ensemble, TripleRecord};

/// Monte Carlo mean with its standard error (unavailable for a single
/// sample).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub standard_error: Option<f64>,
    pub samples: usize,
}

impl Estimate {
    pub fn from_samples(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData("no samples".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let standard_error = (values.len() > 1).then(|| {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        });
        Ok(Self {
            mean,
            standard_error,
            samples: values.len(),
        })
    }
}

/// `Σ_i sup_t (max_k |X̄ - X̂|)²` of one replica, the sup taken over the
/// recorded snapshots.
pub fn coupling_error(records: &[TripleRecord]) -> f64 {
    let species = records.first().map_or(0, |r| r.xbar_xhat.len());
    (0..species)
        .map(|i| {
            records
                .iter()
                .map(|r| r.xbar_xhat[i] * r.xbar_xhat[i])
                .fold(0.0, f64::max)
        })
        .sum()
}

/// Mean over replicas of [`coupling_error`].
pub fn coupling_error_moment(replicas: &[Vec<TripleRecord>]) -> Result<Estimate> {
    let values: Vec<f64> = replicas.iter().map(|r| coupling_error(r)).collect();
    Estimate::from_samples(&values)
}

/// Across-replica dependence of tagged particles of one species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosRecord {
    pub species: usize,
    pub particles: usize,
    pub replicas: usize,
    pub tags: Vec<usize>,
    /// `l × l` covariance, averaged over coordinates, row-major.
    pub covariance: Vec<f64>,
    /// `l × l` correlation, averaged over coordinates, row-major.
    pub correlation: Vec<f64>,
    /// Largest `|correlation|` between distinct tag slots.
    pub max_cross_correlation: f64,
    /// Largest `|covariance|` between distinct tag slots.
    pub max_cross_covariance: f64,
}

/// Covariance of the tagged particles' coordinates across replicas
/// (one ensemble per replica). Tags may repeat.
pub fn chaos_statistics(samples: &[Ensemble], species: usize, tags: &[usize]) -> Result<ChaosRecord> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "chaos statistics need at least 2 replicas, got {}",
            samples.len()
        )));
    }
    let first = &samples[0];
    if tags.is_empty() || tags.iter().any(|&t| t >= first.particles()) || species >= first.species() {
        return Err(Error::InvalidSpec(format!(
            "tags {tags:?} of species {species} out of range for {} particles",
            first.particles()
        )));
    }
    let l = tags.len();
    let d = first.dimension();
    let m = samples.len() as f64;
    let mut covariance = vec![0.0; l * l];
    let mut correlation = vec![0.0; l * l];
    for a in 0..d {
        let coords: Vec<Vec<f64>> = tags
            .iter()
            .map(|&t| samples.iter().map(|e| e.position(species, t)[a]).collect())
            .collect();
        let means: Vec<f64> = coords.iter().map(|c| c.iter().sum::<f64>() / m).collect();
        let mut cov = vec![0.0; l * l];
        for p in 0..l {
            for q in p..l {
                let c = coords[p]
                    .iter()
                    .zip(&coords[q])
                    .map(|(x, y)| (x - means[p]) * (y - means[q]))
                    .sum::<f64>()
                    / (m - 1.0);
                cov[p * l + q] = c;
                cov[q * l + p] = c;
            }
        }
        for p in 0..l {
            for q in 0..l {
                covariance[p * l + q] += cov[p * l + q] / d as f64;
                let denom = (cov[p * l + p] * cov[q * l + q]).sqrt();
                let rho = if denom > 0.0 { cov[p * l + q] / denom } else { 0.0 };
                correlation[p * l + q] += rho / d as f64;
            }
        }
    }
    let cross = |v: &[f64]| {
        (0..l)
            .flat_map(|p| (0..l).filter(move |q| *q != p).map(move |q| (p, q)))
            .map(|(p, q)| v[p * l + q].abs())
            .fold(0.0, f64::max)
    };
    Ok(ChaosRecord {
        species,
        particles: first.particles(),
        replicas: samples.len(),
        tags: tags.to_vec(),
        max_cross_correlation: cross(&correlation),
        max_cross_covariance: cross(&covariance),
        covariance,
        correlation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{InitialCondition, SpeciesDensity};
    use crate::particles::{sample_initial, NoiseStream};

    fn record(gap: f64) -> TripleRecord {
        TripleRecord {
            replica: 0,
            step: 0,
            time: 0.0,
            x_xbar: vec![0.0],
            xbar_xhat: vec![gap],
            x_xhat: vec![gap],
            triangle: true,
            mean: vec![vec![0.0]],
            rms_radius: vec![0.0],
        }
    }

    #[test]
    fn moment_statistics() {
        let zero = coupling_error_moment(&[vec![record(0.0)], vec![record(0.0)]]).unwrap();
        assert_eq!(zero.mean, 0.0);
        let one = coupling_error_moment(&[vec![record(0.1), record(0.3), record(0.2)]]).unwrap();
        assert!((one.mean - 0.09).abs() < 1e-15);
        assert_eq!(one.standard_error, None);
    }

    #[test]
    fn independent_replicas_are_uncorrelated() {
        let u0 = InitialCondition {
            species: vec![SpeciesDensity::gaussian(vec![0.0; 2], 1.0)],
        };
        let noise = NoiseStream::new(3);
        let samples: Vec<Ensemble> = (0..400).map(|r| sample_initial(&u0, 4, 2, &noise, r).unwrap()).collect();
        let c = chaos_statistics(&samples, 0, &[0, 1, 2, 0]).unwrap();
        assert!((c.correlation[3] - 1.0).abs() < 1e-12);
        for p in 0..3 {
            for q in 0..3 {
                if p != q {
                    assert!(c.correlation[p * 4 + q].abs() < 3.0 / 20.0);
                }
            }
        }
        assert!(chaos_statistics(&samples[..1], 0, &[0, 1]).is_err());
    }
}
