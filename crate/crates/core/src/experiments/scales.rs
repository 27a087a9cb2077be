use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent windows of the convergence theorem for a given `sup ϑ_ij`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleExponents {
    pub theta_max: f64,
    pub dimension: usize,
    /// `β` must lie in `(0, β_max)`.
    pub beta_max: f64,
}

impl AdmissibleExponents {
    /// `α_max(β) = 1/2 - β (2ϑ_max + 2)`.
    pub fn alpha_max(&self, beta: f64) -> f64 {
        0.5 - beta * (2.0 * self.theta_max + 2.0)
    }

    /// Propagation-of-chaos rate bound `β̃_max(β) = β ϑ / (2d)`.
    pub fn chaos_rate(&self, beta: f64) -> f64 {
        beta * self.theta_max / (2.0 * self.dimension as f64)
    }

    pub fn check_beta(&self, beta: f64) -> Result<()> {
        if !(beta > 0.0 && beta < self.beta_max) {
            return Err(Error::Config(format!(
                "beta = {beta} outside the admissible window (0, {:.7}) = (0, 1/{}) for sup theta = {}",
                self.beta_max,
                fmt_reciprocal(self.beta_max),
                self.theta_max
            )));
        }
        Ok(())
    }

    pub fn check_alpha(&self, beta: f64, alpha: f64) -> Result<()> {
        let bound = self.alpha_max(beta);
        if !(alpha > 0.0 && alpha < bound) {
            return Err(Error::Config(format!(
                "alpha = {alpha} outside the admissible window (0, {bound:.7}) for beta = {beta}"
            )));
        }
        Ok(())
    }
}

fn fmt_reciprocal(x: f64) -> String {
    let r = 1.0 / x;
    if (r - r.round()).abs() < 1e-9 {
        format!("{}", r.round())
    } else {
        format!("{r:.6}")
    }
}

/// `β_max = 1/(2(5ϑ_max + 6))`; `ϑ_max = 0` describes bounded kernels.
pub fn admissible_exponents(theta_max: f64, dimension: usize) -> Result<AdmissibleExponents> {
    let bounded = theta_max == 0.0;
    if !bounded && !(theta_max > 0.0 && theta_max <= dimension as f64 - 2.0) {
        return Err(Error::Config(format!(
            "sup theta = {theta_max} outside (0, d - 2] for d = {dimension}"
        )));
    }
    Ok(AdmissibleExponents {
        theta_max,
        dimension,
        beta_max: 1.0 / (2.0 * (5.0 * theta_max + 6.0)),
    })
}

/// `η = N^{-β}` and `γ = N^{-β/m}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scales {
    pub particles: usize,
    pub eta: f64,
    pub gamma: f64,
}

pub fn derive_scales(particles: usize, beta: f64, growth: f64, window: &AdmissibleExponents) -> Result<Scales> {
    if particles == 0 {
        return Err(Error::Config("particle count must be at least 1".into()));
    }
    if !(growth > 0.0) {
        return Err(Error::Config(format!("growth exponent must be positive, got {growth}")));
    }
    window.check_beta(beta)?;
    let n = particles as f64;
    Ok(Scales {
        particles,
        eta: n.powf(-beta),
        gamma: n.powf(-beta / growth),
    })
}
