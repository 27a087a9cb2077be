use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crossdiff::diagnostics::{
    chaos_statistics, coupling_error_moment, exceed_probability, log_log_fit, rate_fit, stopped_moment,
    stopping_time, StoppingTime,
};
use crossdiff::fields::{InitialCondition, SpeciesDensity};
use crossdiff::particles::{sample_initial, NoiseStream, TripleRecord};

#[test]
fn first_crossing_sample() {
    let tau = stopping_time(&[0.0, 0.1, 0.2], &[0.1, 0.2, 0.4], 0.25, 100).unwrap();
    assert_eq!(tau.time(), Some(0.2));
    assert_eq!(stopping_time(&[0.0, 1.0], &[0.0, 0.0], 0.25, 100).unwrap(), StoppingTime::Never);
    assert_eq!(stopping_time(&[0.0], &[1.0], 0.25, 100).unwrap().time(), Some(0.0));
}

#[test]
fn stopped_moment_scaling_and_clamp() {
    let s = stopped_moment(&[vec![0.1], vec![0.5], vec![0.01]], 0.25, 2.0, 100);
    assert!((s[0] - 0.1).abs() < 1e-12);
    assert_eq!(&s[1..], &[1.0, 1.0]);
}

#[test]
fn exceedance_fractions() {
    assert_eq!(exceed_probability(&[true, false, false, true]).unwrap(), 0.5);
    assert_eq!(exceed_probability(&[false; 3]).unwrap(), 0.0);
    assert_eq!(exceed_probability(&[true; 3]).unwrap(), 1.0);
    assert!(exceed_probability(&[]).is_err());
}

#[test]
fn single_replica_has_no_standard_error() {
    let rec = TripleRecord {
        replica: 0,
        step: 0,
        time: 0.0,
        x_xbar: vec![0.0],
        xbar_xhat: vec![0.3],
        x_xhat: vec![0.3],
        triangle: true,
        mean: vec![vec![0.0; 3]],
        rms_radius: vec![1.0],
    };
    let e = coupling_error_moment(&[vec![rec]]).unwrap();
    assert!((e.mean - 0.09).abs() < 1e-15);
    assert_eq!(e.standard_error, None);
}

#[test]
fn regression_recovers_noisy_slope() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = 0.05;
    let points: Vec<(f64, f64)> = (0..40)
        .map(|k| {
            let x = k as f64 * 0.1;
            (x, 1.0 - 0.5 * x + noise * (rng.random::<f64>() - 0.5) * 12f64.sqrt())
        })
        .collect();
    let fit = rate_fit(&points).unwrap();
    assert!((fit.slope + 0.5).abs() <= 3.0 * fit.slope_error, "{fit:?}");
    let flat = log_log_fit(&[1.0, 2.0, 4.0], &[3.0, 3.0, 3.0]).unwrap();
    assert_eq!(flat.slope, 0.0);
}

#[test]
fn repeated_tag_is_perfectly_correlated() {
    let ic = InitialCondition {
        species: vec![SpeciesDensity::gaussian(vec![0.0; 3], 1.0)],
    };
    let noise = NoiseStream::new(1);
    let samples: Vec<_> = (0..64).map(|r| sample_initial(&ic, 4, 3, &noise, r).unwrap()).collect();
    let c = chaos_statistics(&samples, 0, &[2, 2]).unwrap();
    assert!((c.correlation[1] - 1.0).abs() < 1e-12);
    let c = chaos_statistics(&samples, 0, &[0, 1, 2]).unwrap();
    assert!(c.max_cross_covariance < 3.0 / 8.0);
}
