//! The transition-rate nonlinearity `f` and its C³ cutoff `f_γ`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::solve_dense;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrowthFamily {
    /// `a r^p`; `p` must be 1, 2 or at least 3 for `f ∈ C³[0, ∞)`.
    Power { coefficient: f64, exponent: f64 },
    /// `r / (1 + r)`.
    Rational,
    /// `r`.
    Identity,
    /// `c`; switches the interaction off.
    Constant(f64),
}

impl GrowthFamily {
    /// Default polynomial growth exponent `m` with `‖f‖_{C³[0,M]} ≤ M^m`.
    pub fn default_growth(&self) -> f64 {
        match *self {
            GrowthFamily::Power { exponent, .. } => exponent,
            GrowthFamily::Rational | GrowthFamily::Identity | GrowthFamily::Constant(_) => 1.0,
        }
    }

    fn eval(&self, r: f64, order: usize) -> f64 {
        match *self {
            GrowthFamily::Power { coefficient, exponent } => {
                let mut c = coefficient;
                for k in 0..order {
                    c *= exponent - k as f64;
                }
                if c == 0.0 {
                    0.0
                } else {
                    c * r.powf(exponent - order as f64)
                }
            }
            GrowthFamily::Rational => {
                let q = 1.0 + r;
                match order {
                    0 => r / q,
                    1 => 1.0 / (q * q),
                    2 => -2.0 / (q * q * q),
                    _ => 6.0 / (q * q * q * q),
                }
            }
            GrowthFamily::Identity => match order {
                0 => r,
                1 => 1.0,
                _ => 0.0,
            },
            GrowthFamily::Constant(c) => {
                if order == 0 {
                    c
                } else {
                    0.0
                }
            }
        }
    }
}

/// `f` together with its declared growth exponent `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthSpec {
    family: GrowthFamily,
    growth: f64,
}

/// Radii at which the declared growth bound is checked.
pub const GROWTH_CHECK_RADII: [f64; 3] = [10.0, 100.0, 1000.0];

impl GrowthSpec {
    /// Validates nonnegativity, C³ regularity and the declared growth on
    /// `M ∈ {10, 100, 1000}`.
    pub fn new(family: GrowthFamily, growth: f64) -> Result<Self> {
        if !(growth > 0.0) {
            return Err(Error::InvalidSpec(format!("growth exponent must be positive, got {growth}")));
        }
        match family {
            GrowthFamily::Power { coefficient, exponent } => {
                let smooth = exponent == 1.0 || exponent == 2.0 || exponent >= 3.0;
                if !smooth || coefficient < 0.0 {
                    return Err(Error::InvalidSpec(format!(
                        "power law {coefficient} r^{exponent} is not a nonnegative C3 function on [0, inf)"
                    )));
                }
            }
            GrowthFamily::Constant(c) if c < 0.0 => {
                return Err(Error::InvalidSpec(format!("constant rate must be nonnegative, got {c}")));
            }
            _ => {}
        }
        let spec = Self { family, growth };
        for m in GROWTH_CHECK_RADII {
            let norm = spec.c3_norm_on(m);
            if norm > m.powf(growth) * (1.0 + 1e-12) {
                return Err(Error::InvalidSpec(format!(
                    "‖f‖_C3[0,{m}] = {norm:.6e} exceeds {m}^{growth}"
                )));
            }
        }
        Ok(spec)
    }

    pub fn with_default_growth(family: GrowthFamily) -> Result<Self> {
        Self::new(family, family.default_growth())
    }

    pub fn family(&self) -> GrowthFamily {
        self.family
    }

    pub fn growth(&self) -> f64 {
        self.growth
    }

    pub fn eval(&self, r: f64, order: usize) -> Result<f64> {
        if order > 3 {
            return Err(Error::UnsupportedOrder(order));
        }
        if !(r >= 0.0) {
            return Err(Error::Domain(format!("f is defined on [0, inf), got r = {r}")));
        }
        Ok(self.family.eval(r, order))
    }

    /// Dense-grid `max_k sup_{[0,M]} |f^{(k)}|`.
    pub fn c3_norm_on(&self, m: f64) -> f64 {
        let samples = 4000;
        (0..=samples)
            .map(|i| m * i as f64 / samples as f64)
            .flat_map(|r| (0..4).map(move |k| (r, k)))
            .map(|(r, k)| self.family.eval(r, k).abs())
            .fold(0.0, f64::max)
    }
}

/// `f` or `f_γ` as used inside drifts; arguments below zero (round-off in
/// convolutions of nonnegative data) are clamped to zero.
pub trait RateFunction: Sync + Send {
    fn value(&self, r: f64) -> f64;
    fn slope(&self, r: f64) -> f64;
}

impl RateFunction for GrowthSpec {
    fn value(&self, r: f64) -> f64 {
        self.family.eval(r.max(0.0), 0)
    }

    fn slope(&self, r: f64) -> f64 {
        self.family.eval(r.max(0.0), 1)
    }
}

/// `f_γ = f` on `[0, 1/(2γ)]`, `f(1/γ)` on `[1/γ, ∞)`, and the septic
/// Hermite bridge in between matching values and three derivatives at both
/// ends.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffFunction {
    base: GrowthSpec,
    gamma: f64,
    lo: f64,
    hi: f64,
    plateau: f64,
    /// Bridge coefficients in `t = (r - lo) / (hi - lo)`.
    blend: [f64; 8],
}

pub fn cutoff_build(base: GrowthSpec, gamma: f64) -> Result<CutoffFunction> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidSpec(format!("cutoff level must be positive, got {gamma}")));
    }
    let lo = 0.5 / gamma;
    let hi = 1.0 / gamma;
    let h = hi - lo;
    let f = |k| base.family.eval(lo, k);
    let plateau = base.family.eval(hi, 0);
    let head = [f(0), h * f(1), h * h * f(2) / 2.0, h * h * h * f(3) / 6.0];

    // t^4..t^7 terms fix value and derivatives 1..3 at t = 1
    let mut rows = [[0.0; 4]; 4];
    let mut rhs = [0.0; 4];
    for (order, row) in rows.iter_mut().enumerate() {
        for (col, entry) in row.iter_mut().enumerate() {
            *entry = falling(4 + col, order);
        }
        let known: f64 = (0..4).map(|k| head[k] * falling(k, order)).sum();
        rhs[order] = if order == 0 { plateau } else { 0.0 } - known;
    }
    let tail = solve_dense(rows, rhs)
        .ok_or_else(|| Error::InvalidSpec("singular Hermite system".into()))?;
    let mut blend = [0.0; 8];
    blend[..4].copy_from_slice(&head);
    blend[4..].copy_from_slice(&tail);
    Ok(CutoffFunction {
        base,
        gamma,
        lo,
        hi,
        plateau,
        blend,
    })
}

/// `k (k-1) ... (k-order+1)`.
fn falling(k: usize, order: usize) -> f64 {
    (0..order).map(|i| k as f64 - i as f64).product()
}

impl CutoffFunction {
    pub fn base(&self) -> &GrowthSpec {
        &self.base
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `(1/(2γ), 1/γ)`.
    pub fn blend_interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn eval(&self, r: f64, order: usize) -> Result<f64> {
        if order > 3 {
            return Err(Error::UnsupportedOrder(order));
        }
        if !(r >= 0.0) {
            return Err(Error::Domain(format!("f_γ is defined on [0, inf), got r = {r}")));
        }
        Ok(self.eval_unchecked(r, order))
    }

    fn eval_unchecked(&self, r: f64, order: usize) -> f64 {
        if r <= self.lo {
            self.base.family.eval(r, order)
        } else if r >= self.hi {
            if order == 0 {
                self.plateau
            } else {
                0.0
            }
        } else {
            self.blend_eval((r - self.lo) / (self.hi - self.lo), order)
        }
    }

    fn blend_eval(&self, t: f64, order: usize) -> f64 {
        let h = self.hi - self.lo;
        let mut acc = 0.0;
        for k in (order..8).rev() {
            acc = acc * t + self.blend[k] * falling(k, order);
        }
        acc / h.powi(order as i32)
    }

    /// Third derivatives of the two pieces meeting at each junction:
    /// `[(f‴(lo), bridge‴(lo)), (bridge‴(hi), 0)]`.
    pub fn junction_third_derivatives(&self) -> [(f64, f64); 2] {
        [
            (self.base.family.eval(self.lo, 3), self.blend_eval(0.0, 3)),
            (self.blend_eval(1.0, 3), 0.0),
        ]
    }

    /// Dense-grid estimate of `max_k sup_r |f_γ^{(k)}(r)|`, `k ≤ 3`.
    pub fn c3_norm(&self) -> f64 {
        let samples = 20_000;
        let end = 1.25 * self.hi;
        (0..=samples)
            .map(|i| end * i as f64 / samples as f64)
            .chain([self.lo, self.hi])
            .flat_map(|r| (0..4).map(move |k| (r, k)))
            .map(|(r, k)| self.eval_unchecked(r, k).abs())
            .fold(0.0, f64::max)
    }

    /// CSV rows `r, f, f', f'', f'''` on `points` samples of `[0, r_max]`.
    pub fn write_csv<W: Write>(&self, mut w: W, r_max: f64, points: usize) -> std::io::Result<()> {
        writeln!(w, "r,f,d1,d2,d3")?;
        let points = points.max(2);
        for i in 0..points {
            let r = r_max * i as f64 / (points - 1) as f64;
            let v: Vec<f64> = (0..4).map(|k| self.eval_unchecked(r, k)).collect();
            writeln!(w, "{r:.17e},{:.17e},{:.17e},{:.17e},{:.17e}", v[0], v[1], v[2], v[3])?;
        }
        Ok(())
    }
}

impl RateFunction for CutoffFunction {
    fn value(&self, r: f64) -> f64 {
        self.eval_unchecked(r.max(0.0), 0)
    }

    fn slope(&self, r: f64) -> f64 {
        self.eval_unchecked(r.max(0.0), 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity() -> GrowthSpec {
        GrowthSpec::with_default_growth(GrowthFamily::Identity).unwrap()
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
    fn identity_cutoff_examples() {
        let c = cutoff_build(identity(), 0.1).unwrap();
        assert_eq!(c.eval(3.0, 0).unwrap(), 3.0);
        assert_eq!(c.eval(12.0, 0).unwrap(), 10.0);
        assert_eq!(c.eval(3.0, 1).unwrap(), 1.0);
        assert_eq!(c.eval(12.0, 1).unwrap(), 0.0);
    }

    #[test]
    fn square_below_blend() {
        let c = cutoff_build(square(), 0.1).unwrap();
        assert_eq!(c.eval(2.0, 2).unwrap(), 2.0);
    }

    #[test]
    fn order_four_is_rejected() {
        let c = cutoff_build(identity(), 0.1).unwrap();
        assert!(matches!(c.eval(1.0, 4), Err(Error::UnsupportedOrder(4))));
        assert!(matches!(c.eval(-1.0, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn exact_outside_blend() {
        let c = cutoff_build(square(), 0.05).unwrap();
        for i in 0..=1000 {
            let r = 10.0 * i as f64 / 1000.0;
            assert_eq!(c.eval(r, 0).unwrap(), square().eval(r, 0).unwrap());
        }
    }

    #[test]
    fn zero_function_has_zero_norm() {
        let zero = GrowthSpec::with_default_growth(GrowthFamily::Constant(0.0)).unwrap();
        assert_eq!(cutoff_build(zero, 0.3).unwrap().c3_norm(), 0.0);
    }

    #[test]
    fn growth_bound_is_enforced() {
        let steep = GrowthFamily::Power {
            coefficient: 2.0,
            exponent: 2.0,
        };
        assert!(GrowthSpec::new(steep, 2.0).is_err());
        assert!(GrowthSpec::new(steep, 2.5).is_ok());
        assert!(GrowthSpec::with_default_growth(GrowthFamily::Rational).is_ok());
        let rough = GrowthFamily::Power {
            coefficient: 1.0,
            exponent: 1.5,
        };
        assert!(GrowthSpec::new(rough, 2.0).is_err());
    }
}
