use num_complex::Complex64;

use super::fft::FftNd;
use super::DensityField;
use crate::error::{Error, Result};

/// Per-species discrete `H^s` norm of `a - b`:
/// `( (2L)^d Σ_k (1 + |k|²)^s |û_k|² )^{1/2}` with `û` the normalized
/// discrete Fourier coefficients. For `s = 0` this is the grid `L²` norm.
pub fn sobolev_distance(a: &DensityField, b: &DensityField, s: f64) -> Result<Vec<f64>> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch("fields live on different grids".into()));
    }
    if a.species_count() != b.species_count() {
        return Err(Error::GridMismatch(format!(
            "{} vs {} species",
            a.species_count(),
            b.species_count()
        )));
    }
    let grid = a.grid();
    let d = grid.dimension();
    let m = grid.cells();
    let fft = FftNd::new(m, d);
    let total = grid.len() as f64;
    let weights: Vec<f64> = (0..grid.len())
        .map(|f| {
            let idx = grid.unravel(f);
            let k2: f64 = idx[..d].iter().map(|&j| grid.wavenumber(j).powi(2)).sum();
            (1.0 + k2).powf(s)
        })
        .collect();
    Ok((0..a.species_count())
        .map(|i| {
            let mut diff: Vec<Complex64> = a
                .species(i)
                .iter()
                .zip(b.species(i))
                .map(|(x, y)| Complex64::new(x - y, 0.0))
                .collect();
            fft.forward(&mut diff);
            let sum: f64 = diff
                .iter()
                .zip(&weights)
                .map(|(z, w)| w * z.norm_sqr())
                .sum();
            (grid.volume() * sum / (total * total)).sqrt()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;

    #[test]
    fn identical_fields_are_at_distance_zero() {
        let grid = Grid::new(2, 16, 1.0).unwrap();
        let u: Vec<f64> = (0..grid.len()).map(|f| (f as f64).sin()).collect();
        let a = DensityField::new(grid, vec![u], 0.0).unwrap();
        assert_eq!(sobolev_distance(&a, &a, 2.5).unwrap(), vec![0.0]);
    }

    #[test]
    fn zero_order_is_grid_l2() {
        let grid = Grid::new(2, 16, 1.5).unwrap();
        let u: Vec<f64> = (0..grid.len()).map(|f| (0.37 * f as f64).cos()).collect();
        let l2 = (u.iter().map(|v| v * v).sum::<f64>() * grid.cell_volume()).sqrt();
        let a = DensityField::new(grid, vec![u.clone()], 0.0).unwrap();
        let b = DensityField::new(grid, vec![vec![0.0; u.len()]], 0.0).unwrap();
        let h0 = sobolev_distance(&a, &b, 0.0).unwrap()[0];
        assert!((h0 - l2).abs() <= 1e-12 * l2);
    }
}
