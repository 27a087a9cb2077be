use crossdiff::kernels::{build_mollified, GaussianKernel, MollifierSpec, Radial, RieszSpec, FAR_RADIUS};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn riesz_values() {
    let unit = RieszSpec::new(3, 1.0, 1.0).unwrap();
    assert_eq!(unit.eval(2.0).unwrap(), 0.5);
    assert_eq!(unit.eval(1.0).unwrap(), 1.0);
    let s = RieszSpec::new(4, 1.5, 2.0).unwrap();
    assert!((s.eval(4.0).unwrap() - 0.25).abs() < 1e-15);
    assert!(unit.eval(0.0).is_err());
    assert!(RieszSpec::new(3, 1.5, 1.0).is_err());
    assert!(RieszSpec::new(2, 0.5, 1.0).is_err());
}

#[test]
fn truncated_values() {
    let s = RieszSpec::new(3, 1.0, 1.0).unwrap();
    assert_eq!(s.truncated_eval(1.0, 0.5).unwrap(), 1.0);
    assert_eq!(s.truncated_eval(1.0, 2.0).unwrap(), 0.5);
    assert!((s.truncated_eval(0.1, 0.0).unwrap() - 10.0).abs() < 1e-12);
}

#[test]
fn classical_constant_in_three_dimensions() {
    let s = RieszSpec::classical(3, 1.0).unwrap();
    assert!(rel(s.coefficient(), 1.0 / (4.0 * std::f64::consts::PI)) < 1e-14);
}

// Independent adaptive quadrature of V^η * B̄ (d = 3, η = 0.2, C = 1).
const CRITICAL_ORACLE: [(f64, f64); 5] = [
    (0.05, 4.996709813401724),
    (0.1, 4.925417070206926),
    (0.15, 4.697364080606722),
    (0.25, 3.8184184483640777),
    (0.3, 3.308472356735638),
];

// Same for V^η * B with ϑ = 1/2.
const SUBCRITICAL_ORACLE: [(f64, f64); 3] = [
    (0.05, 3.0770340347158127),
    (0.1, 2.8284727022540004),
    (0.3, 1.8139623051875873),
];

#[test]
fn mollified_table_matches_quadrature_oracle() {
    let m = MollifierSpec::bump(0.2).unwrap();
    let t = build_mollified(&RieszSpec::new(3, 1.0, 1.0).unwrap(), &m).unwrap();
    for (r, v) in CRITICAL_ORACLE {
        assert!(rel(t.radial(r)[0], v) < 1e-6, "r = {r}: {} vs {v}", t.radial(r)[0]);
    }
    let t = build_mollified(&RieszSpec::new(3, 0.5, 1.0).unwrap(), &m).unwrap();
    for (r, v) in SUBCRITICAL_ORACLE {
        assert!(rel(t.radial(r)[0], v) < 1e-6, "r = {r}: {} vs {v}", t.radial(r)[0]);
    }
}

#[test]
fn mollified_kernel_geometry() {
    let eta = 0.1;
    let spec = RieszSpec::new(3, 1.0, 1.0).unwrap();
    let t = build_mollified(&spec, &MollifierSpec::bump(eta).unwrap()).unwrap();
    assert!(rel(t.kernel_value(&[1.0, 0.0, 0.0]), 1.0) < 1e-4);
    assert!(t.kernel_value(&[0.0; 3]).is_finite());
    assert_eq!(t.kernel_gradient(&[0.0; 3]), vec![0.0; 3]);
    let far = [FAR_RADIUS * eta * 1.5, 0.0, 0.0];
    assert_eq!(t.kernel_value(&far), spec.eval(far[0]).unwrap());

    let x = [0.03, -0.05, 0.07];
    let g = t.kernel_gradient(&x);
    let dot: f64 = g.iter().zip(&x).map(|(a, b)| a * b).sum();
    let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(dot <= 0.0);
    assert!((dot.abs() - gn * xn).abs() <= 1e-12 * gn * xn);
    let h = t.kernel_hessian(&x);
    for a in 0..3 {
        for b in 0..3 {
            assert_eq!(h[a * 3 + b], h[b * 3 + a]);
        }
    }
}

#[test]
fn gradient_and_hessian_match_finite_differences() {
    let eta = 0.2;
    let t = build_mollified(&RieszSpec::new(3, 1.0, 1.0).unwrap(), &MollifierSpec::bump(eta).unwrap()).unwrap();
    let dir = [0.48, 0.6, 0.64];
    let at = |r: f64| dir.map(|c| c * r);
    let h = 1e-5;

    let x = at(eta);
    let g = t.kernel_gradient(&x);
    for a in 0..3 {
        let (mut p, mut m) = (x, x);
        p[a] += h;
        m[a] -= h;
        let fd = (t.kernel_value(&p) - t.kernel_value(&m)) / (2.0 * h);
        assert!((fd - g[a]).abs() <= 1e-6 * g[a].abs().max(1e-3), "axis {a}: {fd} vs {}", g[a]);
    }

    let x = at(2.0 * eta);
    let hess = t.kernel_hessian(&x);
    let scale = hess.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for a in 0..3 {
        let (mut p, mut m) = (x, x);
        p[a] += h;
        m[a] -= h;
        let (gp, gm) = (t.kernel_gradient(&p), t.kernel_gradient(&m));
        for b in 0..3 {
            let fd = (gp[b] - gm[b]) / (2.0 * h);
            assert!((fd - hess[a * 3 + b]).abs() <= 1e-5 * scale, "({a},{b}): {fd} vs {}", hess[a * 3 + b]);
        }
    }
}

#[test]
fn gaussian_kernel_profile() {
    let g = GaussianKernel::new(1.5, 0.7).unwrap();
    let [v, d1, d2] = g.radial(0.0);
    assert_eq!((v, d1), (1.5, 0.0));
    assert!((d2 + 1.5 / 0.49).abs() < 1e-12);
    assert!(GaussianKernel::new(1.0, 0.0).is_err());
}
