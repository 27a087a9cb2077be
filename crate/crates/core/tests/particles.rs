use proptest::prelude::*;

use crossdiff::fields::{InitialCondition, SpeciesDensity};
use crossdiff::kernels::{GaussianKernel, KernelProfile, PairKernels};
use crossdiff::nonlinearity::{GrowthFamily, GrowthSpec};
use crossdiff::particles::{em_step, pairwise_drift, sample_initial, Ensemble, NoiseStream, SpeciesParams};
use crossdiff::potential::Potential;

fn gaussian_kernels(species: usize) -> PairKernels {
    let g = GaussianKernel::new(1.5, 0.7).unwrap();
    PairKernels::from_profiles(species, vec![KernelProfile::Gaussian(g); species * species]).unwrap()
}

fn square() -> GrowthSpec {
    GrowthSpec::new(GrowthFamily::Power { coefficient: 1.0, exponent: 2.0 }, 2.0).unwrap()
}

// x_k - 2 S_k G_k with S, G the empirical kernel mean and gradient mean,
// evaluated independently in double precision.
const TWO_BODY: [[f64; 3]; 2] = [
    [-0.730_996_323_720_474_3, -1.030_996_323_720_474_2, 1.407_995_098_293_965_7],
    [1.230_996_323_720_474_2, 0.930_996_323_720_474_3, -1.207_995_098_293_965_8],
];

#[test]
fn two_body_drift_matches_hand_evaluation() {
    let ens = Ensemble::new(1, 2, 3, vec![0.1, -0.2, 0.3, 0.4, 0.1, -0.1]).unwrap();
    let params = SpeciesParams::new(vec![1.0], Potential::InvertedQuadratic).unwrap();
    let drift = pairwise_drift(&ens, &gaussian_kernels(1), &square(), &params).unwrap();
    for (k, expected) in TWO_BODY.iter().enumerate() {
        for a in 0..3 {
            assert!((drift[3 * k + a] - expected[a]).abs() < 1e-12, "particle {k}, axis {a}");
        }
    }
}

#[test]
fn interaction_off_leaves_the_potential() {
    let ens = Ensemble::new(1, 3, 3, vec![1.0, 2.0, 0.0, -0.5, 0.1, 0.2, 0.0, 0.0, 0.3]).unwrap();
    let params = SpeciesParams::new(vec![1.0], Potential::InvertedQuadratic).unwrap();
    let off = GrowthSpec::with_default_growth(GrowthFamily::Constant(2.0)).unwrap();
    let drift = pairwise_drift(&ens, &gaussian_kernels(1), &off, &params).unwrap();
    assert_eq!(drift, ens.positions().to_vec());
}

#[test]
fn euler_maruyama_arithmetic() {
    let mut ens = Ensemble::new(1, 1, 3, vec![0.0; 3]).unwrap();
    em_step(&mut ens, &[1.0, 0.0, 0.0], &[0.5], 0.1, &[0.0; 3]).unwrap();
    assert_eq!(ens.positions(), &[0.1, 0.0, 0.0]);
    em_step(&mut ens, &[0.0; 3], &[0.5], 0.1, &[0.25, -0.5, 1.0]).unwrap();
    assert_eq!(ens.positions(), &[0.35, -0.5, 1.0]);
}

#[test]
fn initial_samples_follow_the_density() {
    let ic = InitialCondition {
        species: vec![SpeciesDensity::gaussian(vec![0.0; 3], 0.25)],
    };
    let noise = NoiseStream::new(11);
    let n = 4096;
    let ens = sample_initial(&ic, n, 3, &noise, 0).unwrap();
    for m in &ens.means()[0] {
        assert!(m.abs() < 4.0 * 0.5 / (n as f64).sqrt());
    }
    let one = sample_initial(&ic, 1, 3, &noise, 5).unwrap();
    assert_eq!(one, sample_initial(&ic, 1, 3, &noise, 5).unwrap());
    assert_ne!(one, sample_initial(&ic, 1, 3, &NoiseStream::new(12), 5).unwrap());
}

fn cloud(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 3 * n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn drift_is_permutation_equivariant(pos in cloud(7), shift in 1usize..7) {
        let params = SpeciesParams::new(vec![1.0], Potential::InvertedQuadratic).unwrap();
        let k = gaussian_kernels(1);
        let ens = Ensemble::new(1, 7, 3, pos.clone()).unwrap();
        let rotated: Vec<f64> = (0..7).flat_map(|p| pos[3 * ((p + shift) % 7)..][..3].to_vec()).collect();
        let a = pairwise_drift(&ens, &k, &square(), &params).unwrap();
        let b = pairwise_drift(&Ensemble::new(1, 7, 3, rotated).unwrap(), &k, &square(), &params).unwrap();
        for p in 0..7 {
            for c in 0..3 {
                let x = a[3 * ((p + shift) % 7) + c];
                prop_assert!((x - b[3 * p + c]).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn drift_is_translation_invariant_without_potential(pos in cloud(6), v in prop::array::uniform3(-3.0f64..3.0)) {
        let params = SpeciesParams::new(vec![1.0, 1.0], Potential::None).unwrap();
        let k = gaussian_kernels(2);
        let moved: Vec<f64> = pos.iter().enumerate().map(|(i, x)| x + v[i % 3]).collect();
        let a = pairwise_drift(&Ensemble::new(2, 3, 3, pos).unwrap(), &k, &square(), &params).unwrap();
        let b = pairwise_drift(&Ensemble::new(2, 3, 3, moved).unwrap(), &k, &square(), &params).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
        }
    }

    #[test]
    fn noise_is_a_pure_function_of_its_indices(seed in any::<u64>(), replica in 0usize..1000, particle in 0usize..5000, step in 0usize..10_000) {
        let noise = NoiseStream::new(seed);
        let (mut a, mut b) = ([0.0; 3], [0.0; 3]);
        noise.increment(replica, 0, particle, step, 0.01, &mut a);
        NoiseStream::new(seed).increment(replica, 0, particle, step, 0.01, &mut b);
        prop_assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
        noise.increment(replica, 0, particle, step + 1, 0.01, &mut b);
        prop_assert_ne!(a, b);
    }
}
