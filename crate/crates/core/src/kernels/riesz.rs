use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Radial Riesz kernel `B(r) = C r^{-exponent}` in `dimension` space
/// dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RieszSpec {
    dimension: usize,
    exponent: f64,
    coefficient: f64,
}

impl RieszSpec {
    /// Requires `d >= 3`, `0 < exponent <= d - 2` and `coefficient > 0`.
    pub fn new(dimension: usize, exponent: f64, coefficient: f64) -> Result<Self> {
        if dimension < 3 {
            return Err(Error::InvalidSpec(format!(
                "Riesz kernels need dimension >= 3, got {dimension}"
            )));
        }
        let upper = dimension as f64 - 2.0;
        if !(exponent > 0.0 && exponent <= upper + 1e-12) {
            return Err(Error::InvalidSpec(format!(
                "Riesz exponent {exponent} outside (0, {upper}] for d = {dimension}"
            )));
        }
        if !(coefficient > 0.0 && coefficient.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "Riesz coefficient must be positive, got {coefficient}"
            )));
        }
        Ok(Self {
            dimension,
            exponent: exponent.min(upper),
            coefficient,
        })
    }

    /// Riesz-potential normalization
    /// `C = Γ(ϑ/2) / (π^{d/2} 2^{d-ϑ} Γ((d-ϑ)/2))`, so that `B` is the
    /// Green's function of `(-Δ)^{(d-ϑ)/2}`. Gives `1/(4π)` for `d = 3`,
    /// `ϑ = 1`.
    pub fn classical(dimension: usize, exponent: f64) -> Result<Self> {
        let d = dimension as f64;
        let c = libm::tgamma(exponent / 2.0)
            / (PI.powf(d / 2.0) * 2f64.powf(d - exponent) * libm::tgamma((d - exponent) / 2.0));
        Self::new(dimension, exponent, c)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    /// `ϑ = d - 2`: the mollification acts on the truncated kernel.
    pub fn is_critical(&self) -> bool {
        (self.exponent - (self.dimension as f64 - 2.0)).abs() < 1e-12
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!(
                "Riesz kernel is singular at r = {r}"
            )));
        }
        Ok(self.coefficient * r.powf(-self.exponent))
    }

    /// Value and first two radial derivatives at `r > 0`.
    pub(crate) fn radial(&self, r: f64) -> [f64; 3] {
        let v = self.coefficient * r.powf(-self.exponent);
        let t = self.exponent;
        [v, -t * v / r, t * (t + 1.0) * v / (r * r)]
    }

    /// `B̄(r) = B(max(r, η))`.
    pub fn truncated_eval(&self, eta: f64, r: f64) -> Result<f64> {
        if !(eta > 0.0) {
            return Err(Error::Domain(format!("truncation radius must be positive, got {eta}")));
        }
        self.eval(r.abs().max(eta))
    }
}

/// Riesz kernel frozen below `radius`; the limit-system kernel sampled on
/// a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedRiesz {
    pub spec: RieszSpec,
    pub radius: f64,
}

impl TruncatedRiesz {
    pub(crate) fn radial(&self, r: f64) -> [f64; 3] {
        if r < self.radius {
            let v = self.spec.coefficient * self.radius.powf(-self.spec.exponent);
            [v, 0.0, 0.0]
        } else {
            self.spec.radial(r)
        }
    }
}

/// Bounded Gaussian-shaped kernel `A exp(-r^2 / (2 w^2))`, usable in any
/// dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianKernel {
    pub amplitude: f64,
    pub width: f64,
}

impl GaussianKernel {
    pub fn new(amplitude: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) || !amplitude.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "Gaussian kernel needs finite amplitude and positive width, got ({amplitude}, {width})"
            )));
        }
        Ok(Self { amplitude, width })
    }

    pub(crate) fn radial(&self, r: f64) -> [f64; 3] {
        let w2 = self.width * self.width;
        let v = self.amplitude * (-0.5 * r * r / w2).exp();
        [v, -r / w2 * v, (r * r / w2 - 1.0) / w2 * v]
    }
}

/// Surface area of the unit sphere in `d` dimensions.
pub(crate) fn sphere_area(d: usize) -> f64 {
    let d = d as f64;
    2.0 * PI.powf(d / 2.0) / libm::tgamma(d / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn riesz_examples() {
        let unit = RieszSpec::new(3, 1.0, 1.0).unwrap();
        assert_eq!(unit.eval(2.0).unwrap(), 0.5);
        assert_eq!(unit.eval(1.0).unwrap(), 1.0);
        let s = RieszSpec::new(4, 1.5, 2.0).unwrap();
        assert!((s.eval(4.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(unit.eval(0.0), Err(Error::Domain(_))));
        assert!(matches!(unit.eval(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_out_of_range_exponent() {
        assert!(RieszSpec::new(3, 1.5, 1.0).is_err());
        assert!(RieszSpec::new(3, 0.0, 1.0).is_err());
        assert!(RieszSpec::new(2, 0.5, 1.0).is_err());
        assert!(RieszSpec::new(3, 1.0, -1.0).is_err());
    }

    #[test]
    fn truncation_examples() {
        let s = RieszSpec::new(3, 1.0, 1.0).unwrap();
        assert_eq!(s.truncated_eval(1.0, 0.5).unwrap(), 1.0);
        assert_eq!(s.truncated_eval(1.0, 2.0).unwrap(), 0.5);
        assert!((s.truncated_eval(0.1, 0.0).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn truncation_is_continuous_at_radius() {
        let s = RieszSpec::new(3, 1.0, 1.0).unwrap();
        for k in 1..12 {
            let eps = 10f64.powi(-k);
            let jump = (s.truncated_eval(0.3, 0.3 - eps).unwrap()
                - s.truncated_eval(0.3, 0.3 + eps).unwrap())
            .abs();
            assert!(jump <= 20.0 * eps, "{eps}: {jump}");
        }
    }

    #[test]
    fn classical_constant_is_newtonian_in_3d() {
        let s = RieszSpec::classical(3, 1.0).unwrap();
        assert!((s.coefficient() - 1.0 / (4.0 * PI)).abs() < 1e-14);
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-13);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
    }
}
