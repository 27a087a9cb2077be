use crate::error::{Error, Result};
use crate::fields::DensityField;
use crate::particles::Ensemble;

/// Kernel support in bandwidths.
const KDE_RADIUS: f64 = 6.0;

/// `L¹` distance on the grid between the Gaussian kernel density estimate
/// of species `i` (bandwidth `h`, periodic wrap) and the field.
pub fn density_discrepancy(ens: &Ensemble, field: &DensityField, species: usize, bandwidth: f64) -> Result<f64> {
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidSpec(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let grid = field.grid();
    let d = grid.dimension();
    if ens.dimension() != d || species >= ens.species() || species >= field.species_count() {
        return Err(Error::GridMismatch("ensemble and field do not match".into()));
    }
    let m = grid.cells();
    let dx = grid.dx();
    let span = 2.0 * grid.half_width();
    let reach = ((KDE_RADIUS * bandwidth / dx).ceil() as usize).min(m / 2);
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * bandwidth);
    let mut kde = vec![0.0; grid.len()];
    let mut axis_nodes: Vec<Vec<(usize, f64)>> = vec![Vec::new(); d];
    for x in ens.species_positions(species).chunks_exact(d) {
        for a in 0..d {
            let u = (x[a] + grid.half_width()).rem_euclid(span) / dx;
            let base = u.floor() as isize;
            axis_nodes[a].clear();
            for off in -(reach as isize)..=(reach as isize + 1) {
                let j = base + off;
                let dist = (u - j as f64) * dx;
                let w = norm * (-0.5 * (dist / bandwidth).powi(2)).exp();
                axis_nodes[a].push((j.rem_euclid(m as isize) as usize, w));
            }
        }
        accumulate(&mut kde, &axis_nodes, m, 1.0, 0, 0);
    }
    let scale = 1.0 / ens.particles() as f64;
    let u = field.species(species);
    Ok(kde.iter().zip(u).map(|(k, v)| (k * scale - v).abs()).sum::<f64>() * grid.cell_volume())
}

fn accumulate(kde: &mut [f64], nodes: &[Vec<(usize, f64)>], m: usize, weight: f64, axis: usize, flat: usize) {
    if axis == nodes.len() {
        kde[flat] += weight;
        return;
    }
    for &(j, w) in &nodes[axis] {
        accumulate(kde, nodes, m, weight * w, axis + 1, flat * m + j);
    }
}
