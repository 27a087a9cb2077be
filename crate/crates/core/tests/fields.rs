use crossdiff::fields::{
    init_density, load_snapshot, sobolev_distance, solve, write_snapshot_series, Boundary, DensityField, Grid,
    InitialCondition, KernelMode, PdeParams, PdeSolver, Rate, SpeciesDensity,
};
use crossdiff::kernels::{GaussianKernel, InteractionMatrix, KernelFamily};
use crossdiff::nonlinearity::{GrowthFamily, GrowthSpec};
use crossdiff::potential::Potential;

fn gaussian_matrix(species: usize, dimension: usize) -> InteractionMatrix {
    let g = GaussianKernel::new(1.0, 0.5).unwrap();
    InteractionMatrix::uniform(species, dimension, KernelFamily::Gaussian(g)).unwrap()
}

fn no_rate() -> Rate {
    Rate::Raw(GrowthSpec::with_default_growth(GrowthFamily::Constant(0.0)).unwrap())
}

fn heat_params(sigma: Vec<f64>, dimension: usize, dt: f64, t: f64) -> PdeParams {
    let n = sigma.len();
    let mut p = PdeParams::new(sigma, gaussian_matrix(n, dimension), KernelMode::Limit, no_rate(), dt, t);
    p.potential = Potential::None;
    p.boundary = Boundary::Periodic;
    p
}

#[test]
fn uniform_density_value() {
    let grid = Grid::new(2, 8, 1.5).unwrap();
    let u = init_density(&grid, &InitialCondition { species: vec![SpeciesDensity::Uniform] }).unwrap();
    for v in u.species(0) {
        assert!((v - 1.0 / 9.0).abs() < 1e-15);
    }
}

#[test]
fn box_without_mass_is_rejected() {
    let grid = Grid::new(1, 16, 1.0).unwrap();
    let ic = InitialCondition {
        species: vec![SpeciesDensity::gaussian(vec![3.0], 0.1)],
    };
    assert!(init_density(&grid, &ic).is_err());
}

#[test]
fn time_zero_returns_initial_field() {
    let grid = Grid::new(1, 64, 4.0).unwrap();
    let ic = InitialCondition {
        species: vec![SpeciesDensity::gaussian(vec![0.0], 0.2)],
    };
    let out = solve(&heat_params(vec![1.0], 1, 0.01, 0.0), &grid, &ic, &[0.0]).unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(out[0], init_density(&grid, &ic).unwrap());
}

fn l1_error(field: &DensityField, variance: f64) -> f64 {
    let g = field.grid();
    let norm = 1.0 / (2.0 * std::f64::consts::PI * variance).sqrt();
    (0..g.len())
        .map(|f| {
            let x = g.coordinate(f);
            (field.species(0)[f] - norm * (-0.5 * x * x / variance).exp()).abs()
        })
        .sum::<f64>()
        * g.dx()
}

#[test]
fn heat_equation_converges_at_second_order() {
    let (s0, sigma, t) = (0.1, 0.5, 0.25);
    let ic = InitialCondition {
        species: vec![SpeciesDensity::gaussian(vec![0.0], s0)],
    };
    let errors: Vec<f64> = [128, 256]
        .iter()
        .map(|&m| {
            let grid = Grid::new(1, m, 4.0).unwrap();
            let dx = grid.dx();
            let out = solve(&heat_params(vec![sigma], 1, 0.2 * dx * dx, t), &grid, &ic, &[t]).unwrap();
            l1_error(&out[0], s0 + 2.0 * sigma * t)
        })
        .collect();
    let order = (errors[0] / errors[1]).log2();
    assert!((1.5..=2.5).contains(&order), "errors {errors:?}, order {order}");
}

#[test]
fn decoupled_species_evolve_independently() {
    let grid = Grid::new(1, 128, 4.0).unwrap();
    let a = SpeciesDensity::gaussian(vec![0.3], 0.1);
    let b = SpeciesDensity::gaussian(vec![-0.2], 0.15);
    let both = InitialCondition {
        species: vec![a.clone(), b.clone()],
    };
    let t = 0.1;
    let joint = solve(&heat_params(vec![0.3, 0.8], 1, 5e-4, t), &grid, &both, &[t]).unwrap();
    let only_a = solve(&heat_params(vec![0.3], 1, 5e-4, t), &grid, &InitialCondition { species: vec![a] }, &[t]).unwrap();
    let only_b = solve(&heat_params(vec![0.8], 1, 5e-4, t), &grid, &InitialCondition { species: vec![b] }, &[t]).unwrap();
    assert_eq!(joint[0].species(1).len(), only_b[0].species(0).len());
    let gap = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    assert!(gap(joint[0].species(0), only_a[0].species(0)) < 1e-12);
    assert!(gap(joint[0].species(1), only_b[0].species(0)) < 1e-12);
}

#[test]
fn interacting_solve_conserves_mass_and_sign() {
    let grid = Grid::new(2, 32, 3.0).unwrap();
    let ic = InitialCondition {
        species: vec![
            SpeciesDensity::gaussian(vec![0.3, 0.0], 0.2),
            SpeciesDensity::gaussian(vec![-0.3, 0.1], 0.15),
        ],
    };
    let rate = Rate::Raw(GrowthSpec::with_default_growth(GrowthFamily::Identity).unwrap());
    let p = PdeParams::new(vec![0.5, 0.7], gaussian_matrix(2, 2), KernelMode::Limit, rate, 0.01, 0.2);
    let out = solve(&p, &grid, &ic, &[0.1, 0.2]).unwrap();
    for f in &out {
        for m in f.masses() {
            assert!((m - 1.0).abs() < 1e-12);
        }
        assert!(f.min_value() >= 0.0);
    }
}

#[test]
fn constant_rate_drift_is_the_potential_gradient() {
    let grid = Grid::new(3, 8, 2.0).unwrap();
    let p = PdeParams::new(vec![1.0], gaussian_matrix(1, 3), KernelMode::Limit, no_rate(), 0.01, 0.1);
    let solver = PdeSolver::new(grid, p).unwrap();
    let u = init_density(&grid, &InitialCondition { species: vec![SpeciesDensity::gaussian(vec![0.0; 3], 0.3)] }).unwrap();
    let drift = solver.drift_field(&solver.convolve(&u).unwrap());
    // node (1, 1.5, 0)
    let flat = grid.ravel(&[6, 7, 4]);
    let w: Vec<f64> = (0..3).map(|a| drift[0][a][flat]).collect();
    assert_eq!(w, vec![-1.0, -1.5, 0.0]);
}

#[test]
fn sobolev_identity_and_snapshots_roundtrip() {
    let grid = Grid::new(2, 16, 2.0).unwrap();
    let u = init_density(&grid, &InitialCondition { species: vec![SpeciesDensity::gaussian(vec![0.0; 2], 0.2)] }).unwrap();
    assert_eq!(sobolev_distance(&u, &u, 2.0).unwrap(), vec![0.0]);
    let dir = tempfile::tempdir().unwrap();
    let entries = write_snapshot_series(dir.path(), std::slice::from_ref(&u)).unwrap();
    assert_eq!(entries.len(), 1);
    let back = load_snapshot(&dir.path().join(&entries[0].file)).unwrap();
    assert_eq!(back, u);
}
