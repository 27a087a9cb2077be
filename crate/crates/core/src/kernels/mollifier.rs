use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::jet::{self, Jet};
use crate::quadrature::GaussLegendre;

use super::riesz::sphere_area;

/// Below this value of `1 - |x|^2/η^2` the bump is zero to double
/// precision and its jet is skipped.
const BUMP_FLOOR: f64 = 2e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MollifierProfile {
    /// `exp(-1 / (1 - |x|^2))` on the unit ball.
    Bump,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MollifierSpec {
    pub profile: MollifierProfile,
    pub eta: f64,
    /// Gauss–Legendre nodes per quadrature panel.
    pub quadrature_nodes: usize,
}

impl MollifierSpec {
    pub fn bump(eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidSpec(format!("mollifier scale must be positive, got {eta}")));
        }
        Ok(Self {
            profile: MollifierProfile::Bump,
            eta,
            quadrature_nodes: 16,
        })
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.quadrature_nodes = nodes.max(4);
        self
    }

    /// `V^η` in dimension `d`, normalized numerically to unit mass.
    pub(crate) fn density(&self, dimension: usize) -> ScaledBump {
        let z = bump_mass(dimension, 16, 48);
        ScaledBump {
            eta2: self.eta * self.eta,
            scale: self.eta.powi(-(dimension as i32)) / z,
        }
    }

    /// Mass of the normalized `V^η` measured with an independent panel
    /// layout. Within `1e-8` of one for the bump profile.
    pub fn mass(&self, dimension: usize) -> f64 {
        let v = self.density(dimension);
        let rule = GaussLegendre::new(31);
        let panels = 40;
        let mut total = 0.0;
        for p in 0..panels {
            let a = self.eta * p as f64 / panels as f64;
            let b = self.eta * (p + 1) as f64 / panels as f64;
            total += rule.integrate(a, b, |rho| {
                v.value(rho * rho) * rho.powi(dimension as i32 - 1)
            });
        }
        total * sphere_area(dimension)
    }
}

/// Unnormalized bump mass `|S^{d-1}| ∫_0^1 exp(-1/(1-ρ^2)) ρ^{d-1} dρ`.
fn bump_mass(dimension: usize, panels: usize, nodes: usize) -> f64 {
    let rule = GaussLegendre::new(nodes);
    let mut total = 0.0;
    for p in 0..panels {
        let a = p as f64 / panels as f64;
        let b = (p + 1) as f64 / panels as f64;
        total += rule.integrate(a, b, |rho| {
            let q = 1.0 - rho * rho;
            if q <= BUMP_FLOOR {
                0.0
            } else {
                (-1.0 / q).exp() * rho.powi(dimension as i32 - 1)
            }
        });
    }
    total * sphere_area(dimension)
}

/// The rescaled bump `V^η` as a function of the squared radius.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ScaledBump {
    eta2: f64,
    scale: f64,
}

impl ScaledBump {
    pub(crate) fn value(&self, p: f64) -> f64 {
        let q = 1.0 - p / self.eta2;
        if q <= BUMP_FLOOR {
            0.0
        } else {
            self.scale * (-1.0 / q).exp()
        }
    }

    /// Derivative jet of `V^η(p(r))` given the jet of the squared radius
    /// `p` along `r`.
    pub(crate) fn jet(&self, p: Jet) -> Jet {
        let q = 1.0 - p[0] / self.eta2;
        if q <= BUMP_FLOOR {
            return [0.0; 4];
        }
        let inv = 1.0 / q;
        let q_jet = [q, -p[1] / self.eta2, -p[2] / self.eta2, -p[3] / self.eta2];
        // -1/q and its q-derivatives
        let outer = [-inv, inv * inv, -2.0 * inv * inv * inv, 6.0 * inv * inv * inv * inv];
        let e = jet::exp(jet::compose(outer, q_jet));
        jet::scale(e, self.scale)
    }
}

/// `∫_0^π sin^{d-2} φ dφ`.
pub(crate) fn angular_weight_total(d: usize) -> f64 {
    let d = d as f64;
    PI.sqrt() * libm::tgamma((d - 1.0) / 2.0) / libm::tgamma(d / 2.0)
}
