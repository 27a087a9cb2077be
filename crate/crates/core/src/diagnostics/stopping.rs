use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `N^{-α}`.
pub fn threshold(alpha: f64, n: usize) -> f64 {
    (n as f64).powf(-alpha)
}

/// First snapshot at which the gap reaches the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum StoppingTime {
    At { index: usize, time: f64 },
    Never,
}

impl StoppingTime {
    pub fn time(&self) -> Option<f64> {
        match self {
            StoppingTime::At { time, .. } => Some(*time),
            StoppingTime::Never => None,
        }
    }
}

/// `τ_α`: first snapshot with `path ≥ N^{-α}`; no interpolation between
/// snapshots.
pub fn stopping_time(times: &[f64], path: &[f64], alpha: f64, n: usize) -> Result<StoppingTime> {
    if path.is_empty() || times.len() != path.len() {
        return Err(Error::InsufficientData(format!(
            "{} times for {} path values",
            times.len(),
            path.len()
        )));
    }
    let level = threshold(alpha, n);
    Ok(match path.iter().position(|&v| v >= level) {
        Some(index) => StoppingTime::At {
            index,
            time: times[index],
        },
        None => StoppingTime::Never,
    })
}

/// `S^κ_α(t) = N^{ακ} Σ_i (max_k |X - X̄|(t ∧ τ_α))^κ` per snapshot, from
/// per-snapshot per-species maxima. The crossing sample and everything
/// after it hold the value 1.
pub fn stopped_moment(per_species: &[Vec<f64>], alpha: f64, kappa: f64, n: usize) -> Vec<f64> {
    let level = threshold(alpha, n);
    let scale = (n as f64).powf(alpha * kappa);
    let mut out = Vec::with_capacity(per_species.len());
    let mut stopped = false;
    for gaps in per_species {
        if !stopped && gaps.iter().sum::<f64>() >= level {
            stopped = true;
        }
        out.push(if stopped {
            1.0
        } else {
            scale * gaps.iter().map(|g| g.powf(kappa)).sum::<f64>()
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppedStats {
    pub alpha: f64,
    pub kappa: f64,
    pub particles: usize,
    pub tau: StoppingTime,
    pub path: Vec<f64>,
    /// `sup_t Σ_i max_k |X - X̄| > N^{-α}`, or the replica was censored.
    pub exceeded: bool,
    pub censored: bool,
}

/// Stopping statistics of one replica from its snapshot times and
/// per-species gaps.
pub fn stopped_stats(
    times: &[f64],
    per_species: &[Vec<f64>],
    alpha: f64,
    kappa: f64,
    particles: usize,
    censored: bool,
) -> Result<StoppedStats> {
    let sums: Vec<f64> = per_species.iter().map(|g| g.iter().sum()).collect();
    let tau = stopping_time(times, &sums, alpha, particles)?;
    let level = threshold(alpha, particles);
    let exceeded = censored || sums.iter().any(|&s| s > level);
    Ok(StoppedStats {
        alpha,
        kappa,
        particles,
        tau,
        path: stopped_moment(per_species, alpha, kappa, particles),
        exceeded,
        censored,
    })
}

/// Fraction of replicas whose flag is set.
pub fn exceed_probability(flags: &[bool]) -> Result<f64> {
    if flags.is_empty() {
        return Err(Error::InsufficientData("no replicas".into()));
    }
    Ok(flags.iter().filter(|f| **f).count() as f64 / flags.len() as f64)
}
