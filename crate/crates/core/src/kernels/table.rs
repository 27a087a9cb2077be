use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::jet::{self, Jet};
use crate::quadrature::GaussLegendre;

use super::mollifier::{angular_weight_total, MollifierSpec, ScaledBump};
use super::riesz::{sphere_area, RieszSpec};
use super::Radial;

pub const TABLE_POINTS: usize = 2048;
/// Innermost tabulated radius in units of η.
pub const INNER_RADIUS: f64 = 1e-3;
/// Outermost tabulated radius in units of η; beyond it the analytic kernel
/// is returned.
pub const FAR_RADIUS: f64 = 16.0;
pub const QUADRATURE_TOLERANCE: f64 = 1e-6;

/// Relative increase between neighbouring table values attributed to
/// round-off rather than a quadrature failure.
const MONOTONE_SLACK: f64 = 1e-9;
const ANGULAR_NODES: usize = 12;
/// Values of `1 - |x - y|² / η²` at which the angular integral is split.
const ANGULAR_LEVELS: [f64; 5] = [0.5, 0.25, 0.12, 0.06, 0.03];
const UNIFORM_PANELS: usize = 4;
const GRADED_PANELS: usize = 6;

/// Mollified Riesz kernel `B^η = V^η * B` (or `V^η * B̄` at `ϑ = d - 2`)
/// tabulated on a log-spaced radial grid, with radial derivatives up to
/// third order obtained by differentiating under the quadrature.
#[derive(Debug, Clone)]
pub struct TabulatedKernel {
    spec: RieszSpec,
    eta: f64,
    r_min: f64,
    log_step: f64,
    radii: Vec<f64>,
    values: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    d3: Vec<f64>,
    center_value: f64,
    center_curvature: f64,
}

struct Rules {
    radial: GaussLegendre,
    angular: GaussLegendre,
}

impl Rules {
    fn new(radial_nodes: usize, angular_nodes: usize) -> Self {
        Self {
            radial: GaussLegendre::new(radial_nodes),
            angular: GaussLegendre::new(angular_nodes),
        }
    }
}

/// Builds the tabulated `B^η` for one Riesz pair.
pub fn build_mollified(spec: &RieszSpec, mollifier: &MollifierSpec) -> Result<TabulatedKernel> {
    build_with_points(spec, mollifier, TABLE_POINTS)
}

pub fn build_with_points(
    spec: &RieszSpec,
    mollifier: &MollifierSpec,
    points: usize,
) -> Result<TabulatedKernel> {
    if points < 16 {
        return Err(Error::InvalidSpec(format!("kernel table needs at least 16 points, got {points}")));
    }
    let eta = mollifier.eta;
    let d = spec.dimension();
    let bump = mollifier.density(d);
    let rules = Rules::new(mollifier.quadrature_nodes, ANGULAR_NODES);
    let r_min = INNER_RADIUS * eta;
    let r_max = FAR_RADIUS * eta;
    let log_step = (r_max / r_min).ln() / (points - 1) as f64;
    let radii: Vec<f64> = (0..points)
        .map(|k| {
            if k == points - 1 {
                r_max
            } else {
                r_min * (log_step * k as f64).exp()
            }
        })
        .collect();

    let jets: Vec<Jet> = radii
        .par_iter()
        .map(|&r| convolve_at(r, spec, eta, &bump, &rules))
        .collect();
    let center = convolve_at(0.0, spec, eta, &bump, &rules);

    // error estimate: refined rules at a subsample of radii
    let fine = Rules::new(2 * mollifier.quadrature_nodes, 2 * ANGULAR_NODES);
    let stride = (points / 16).max(1);
    let worst = (0..points)
        .step_by(stride)
        .chain(std::iter::once(points - 1))
        .par_bridge()
        .map(|k| {
            let refined = convolve_at(radii[k], spec, eta, &bump, &fine);
            ((refined[0] - jets[k][0]).abs() / refined[0].abs(), radii[k])
        })
        .reduce(|| (0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a });
    if !(worst.0 <= QUADRATURE_TOLERANCE) {
        return Err(Error::Quadrature {
            estimated: worst.0,
            tolerance: QUADRATURE_TOLERANCE,
            radius: worst.1,
        });
    }

    let mut table = TabulatedKernel {
        spec: *spec,
        eta,
        r_min,
        log_step,
        radii,
        values: jets.iter().map(|j| j[0]).collect(),
        d1: jets.iter().map(|j| j[1]).collect(),
        d2: jets.iter().map(|j| j[2]).collect(),
        d3: jets.iter().map(|j| j[3]).collect(),
        center_value: center[0],
        center_curvature: center[2],
    };
    if let Some(k) = table
        .values
        .windows(2)
        .position(|w| w[1] > w[0] * (1.0 + MONOTONE_SLACK))
    {
        return Err(Error::Quadrature {
            estimated: (table.values[k + 1] - table.values[k]) / table.values[k],
            tolerance: MONOTONE_SLACK,
            radius: table.radii[k + 1],
        });
    }
    // round-off on the flat core can leave ulp-sized increases
    let mut running = table.center_value;
    for v in table.values.iter_mut() {
        running = running.min(*v);
        *v = running;
    }
    Ok(table)
}

/// `(V^η * g)(r)` and its first three radial derivatives, where `g` is the
/// Riesz kernel or its truncation at `η`. The outer integral runs over
/// spherical shells `|y| = s` of the kernel, the inner one over the angle
/// between `y` and the evaluation point; derivatives fall on the smooth
/// mollifier only.
fn convolve_at(r: f64, spec: &RieszSpec, eta: f64, bump: &ScaledBump, rules: &Rules) -> Jet {
    let d = spec.dimension();
    let lo = (r - eta).max(0.0);
    let hi = r + eta;
    let mut breaks: Vec<f64> = (0..=UNIFORM_PANELS)
        .map(|k| lo + (hi - lo) * k as f64 / UNIFORM_PANELS as f64)
        .collect();
    if spec.is_critical() && lo < eta && eta < hi {
        breaks.push(eta);
    }
    for level in ANGULAR_LEVELS {
        let offset = eta * (1.0 - level).sqrt();
        breaks.extend(
            [r - offset, r + offset, offset - r]
                .into_iter()
                .filter(|s| *s > lo && *s < hi),
        );
    }
    if lo == 0.0 {
        // graded panels towards the singular shell at the origin
        let first = breaks[1];
        breaks.extend((1..=GRADED_PANELS).map(|k| first * 0.2f64.powi(k as i32)));
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * hi);

    let critical = spec.is_critical();
    let coefficient = spec.coefficient();
    let exponent = spec.exponent();
    let mut acc = [0.0; 4];
    for w in breaks.windows(2) {
        for (s, ws) in rules.radial.mapped(w[0], w[1]) {
            let shell = if critical { s.max(eta) } else { s };
            let g = coefficient * shell.powf(-exponent) * s.powi(d as i32 - 1);
            let a = angular_mean(r, s, eta, d, bump, &rules.angular);
            jet::add_scaled(&mut acc, a, ws * g);
        }
    }
    jet::scale(acc, sphere_area(d))
}

/// Mean of `V^η(|x - y|)` over directions of `y` on the sphere `|y| = s`,
/// with `|x| = r`, as a jet in `r`.
fn angular_mean(r: f64, s: f64, eta: f64, d: usize, bump: &ScaledBump, rule: &GaussLegendre) -> Jet {
    let base = r * r + s * s;
    let eta2 = eta * eta;
    let phi_max = if r * s == 0.0 {
        if base < eta2 {
            std::f64::consts::PI
        } else {
            return [0.0; 4];
        }
    } else {
        let c = (base - eta2) / (2.0 * r * s);
        if c >= 1.0 {
            return [0.0; 4];
        }
        c.max(-1.0).acos()
    };
    // panel edges where the bump argument crosses fixed levels, so each
    // panel sees a bounded slice of its steep edge layer
    let mut breaks = vec![0.0, phi_max];
    if r * s > 0.0 {
        for level in ANGULAR_LEVELS {
            let c = (base - eta2 * (1.0 - level)) / (2.0 * r * s);
            if c > -1.0 && c < 1.0 {
                breaks.push(c.acos());
            }
        }
        breaks.sort_by(f64::total_cmp);
    }
    let mut acc = [0.0; 4];
    for panel in breaks.windows(2) {
        for (phi, w) in rule.mapped(panel[0], panel[1]) {
            let (sin, cos) = phi.sin_cos();
            let p = [base - 2.0 * r * s * cos, 2.0 * r - 2.0 * s * cos, 2.0, 0.0];
            let weight = w * sin.powi(d as i32 - 2);
            jet::add_scaled(&mut acc, bump.jet(p), weight);
        }
    }
    jet::scale(acc, 1.0 / angular_weight_total(d))
}

#[inline]
fn hermite(y0: f64, y1: f64, m0: f64, m1: f64, h: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * h * m0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * m1
}

impl TabulatedKernel {
    pub fn spec(&self) -> &RieszSpec {
        &self.spec
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn dimension(&self) -> usize {
        self.spec.dimension()
    }

    /// Radius beyond which the unmollified kernel is returned.
    pub fn far_radius(&self) -> f64 {
        *self.radii.last().unwrap()
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn center_value(&self) -> f64 {
        self.center_value
    }

    /// `(r, value, first derivative, second derivative)` rows.
    pub fn rows(&self) -> impl Iterator<Item = [f64; 4]> + '_ {
        std::iter::once([0.0, self.center_value, 0.0, self.center_curvature]).chain(
            (0..self.radii.len()).map(|k| [self.radii[k], self.values[k], self.d1[k], self.d2[k]]),
        )
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "r,value,d1,d2")?;
        for [r, v, d1, d2] in self.rows() {
            writeln!(w, "{r:.17e},{v:.17e},{d1:.17e},{d2:.17e}")?;
        }
        Ok(())
    }

    /// Sup over the table of `|B^η|`, `|∇B^η|` and the spectral norm of
    /// `D²B^η`.
    pub fn sup_norms(&self) -> [f64; 3] {
        let mut sup = [self.center_value.abs(), 0.0, self.center_curvature.abs()];
        for k in 0..self.radii.len() {
            sup[0] = sup[0].max(self.values[k].abs());
            sup[1] = sup[1].max(self.d1[k].abs());
            let hess = self.d2[k].abs().max((self.d1[k] / self.radii[k]).abs());
            sup[2] = sup[2].max(hess);
        }
        sup
    }

    #[inline]
    fn segment(&self, r: f64) -> (usize, f64, f64) {
        let n = self.radii.len();
        let k = (((r / self.r_min).ln() / self.log_step) as usize).min(n - 2);
        // log rounding can land one cell off
        let k = if r < self.radii[k] && k > 0 {
            k - 1
        } else if r >= self.radii[k + 1] && k + 2 < n {
            k + 1
        } else {
            k
        };
        let h = self.radii[k + 1] - self.radii[k];
        (k, h, (r - self.radii[k]) / h)
    }

    /// Value and first radial derivative; the pair-loop fast path.
    #[inline]
    pub fn value_slope(&self, r: f64) -> (f64, f64) {
        if r < self.r_min {
            let c = self.center_curvature;
            return (self.center_value + 0.5 * c * r * r, c * r);
        }
        if r > self.far_radius() {
            let [v, d1, _] = self.spec.radial(r);
            return (v, d1);
        }
        let (k, h, t) = self.segment(r);
        (
            hermite(self.values[k], self.values[k + 1], self.d1[k], self.d1[k + 1], h, t),
            hermite(self.d1[k], self.d1[k + 1], self.d2[k], self.d2[k + 1], h, t),
        )
    }
}

impl Radial for TabulatedKernel {
    fn radial(&self, r: f64) -> [f64; 3] {
        if r < self.r_min {
            let c = self.center_curvature;
            return [self.center_value + 0.5 * c * r * r, c * r, c];
        }
        if r > self.far_radius() {
            return self.spec.radial(r);
        }
        let (k, h, t) = self.segment(r);
        [
            hermite(self.values[k], self.values[k + 1], self.d1[k], self.d1[k + 1], h, t),
            hermite(self.d1[k], self.d1[k + 1], self.d2[k], self.d2[k + 1], h, t),
            hermite(self.d2[k], self.d2[k + 1], self.d3[k], self.d3[k + 1], h, t),
        ]
    }

    fn value_slope(&self, r: f64) -> (f64, f64) {
        TabulatedKernel::value_slope(self, r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Radial;

    fn newtonian(eta: f64) -> TabulatedKernel {
        let spec = RieszSpec::new(3, 1.0, 1.0).unwrap();
        build_mollified(&spec, &MollifierSpec::bump(eta).unwrap()).unwrap()
    }

    #[test]
    fn far_field_and_center() {
        let t = newtonian(0.1);
        assert!((t.kernel_value(&[1.0, 0.0, 0.0]) - 1.0).abs() < 1e-4);
        assert_eq!(t.radial(0.0)[1], 0.0);
        assert!(t.center_value().is_finite());
        assert_eq!(t.kernel_value(&[0.0; 3]), t.center_value());
        for (r, v) in t.radii().iter().zip(t.values()) {
            if *r >= 1.0 {
                assert!((v - 1.0 / r).abs() * r <= 1e-3);
            }
        }
        assert!(t.values().windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn table_abscissae_are_reproduced() {
        let t = newtonian(0.2);
        for k in [0, 17, 1000, TABLE_POINTS - 1] {
            assert_eq!(t.radial(t.radii()[k])[0], t.values()[k]);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let eta = 0.2;
        let t = newtonian(eta);
        for r in [eta / 2.0, eta, 2.0 * eta, 10.0 * eta] {
            let h = 1e-5 * r;
            let [_, d1, d2] = t.radial(r);
            let fd1 = (t.radial(r + h)[0] - t.radial(r - h)[0]) / (2.0 * h);
            let fd2 = (t.radial(r + h)[1] - t.radial(r - h)[1]) / (2.0 * h);
            assert!((d1 - fd1).abs() <= 1e-6 * d1.abs(), "d1 at {r}: {d1} vs {fd1}");
            assert!((d2 - fd2).abs() <= 1e-5 * d2.abs(), "d2 at {r}: {d2} vs {fd2}");
        }
    }

    #[test]
    fn subcritical_exponent_builds() {
        let spec = RieszSpec::new(3, 0.5, 1.0).unwrap();
        let t = build_mollified(&spec, &MollifierSpec::bump(0.2).unwrap()).unwrap();
        for (r, v) in t.radii().iter().zip(t.values()) {
            if *r >= 2.0 {
                assert!((v * r.sqrt() - 1.0).abs() <= 1e-3);
            }
        }
        assert!(t.values().windows(2).all(|w| w[1] <= w[0]));
    }
}
