use crate::error::{Error, Result};

/// Uniform periodic grid on `[-L, L)^d` with nodes `x_i = -L + i Δx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dimension: usize,
    cells: usize,
    half_width: f64,
}

impl Grid {
    pub fn new(dimension: usize, cells: usize, half_width: f64) -> Result<Self> {
        if !(1..=3).contains(&dimension) {
            return Err(Error::InvalidSpec(format!("grid dimension must be 1, 2 or 3, got {dimension}")));
        }
        let smooth = cells.is_power_of_two() || (cells.is_multiple_of(3) && (cells / 3).is_power_of_two());
        if cells < 2 || !smooth {
            return Err(Error::InvalidSpec(format!(
                "cells per axis must be 2^k or 3·2^k, got {cells}"
            )));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidSpec(format!("half-width must be positive, got {half_width}")));
        }
        Ok(Self {
            dimension,
            cells,
            half_width,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.cells as f64
    }

    pub fn len(&self) -> usize {
        self.cells.pow(self.dimension as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dimension as i32)
    }

    pub fn volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dimension as i32)
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.cells; self.dimension]
    }

    /// Multi-index of a flat (row-major) index.
    pub fn unravel(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        for a in (0..self.dimension).rev() {
            idx[a] = flat % self.cells;
            flat /= self.cells;
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx[..self.dimension]
            .iter()
            .fold(0, |acc, &i| acc * self.cells + i)
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.dx()
    }

    pub fn node(&self, flat: usize) -> [f64; 3] {
        let idx = self.unravel(flat);
        let mut x = [0.0; 3];
        for a in 0..self.dimension {
            x[a] = self.coordinate(idx[a]);
        }
        x
    }

    /// Signed lattice offset of index `j` under the minimum-image
    /// convention on a periodic axis of `n` cells.
    pub(crate) fn min_image(j: usize, n: usize) -> isize {
        if j < n / 2 {
            j as isize
        } else {
            j as isize - n as isize
        }
    }

    /// Angular wavenumber of Fourier index `j`.
    pub fn wavenumber(&self, j: usize) -> f64 {
        let m = Self::min_image(j, self.cells) as f64;
        std::f64::consts::PI * m / self.half_width
    }

    /// Multilinear interpolation weights at `x` (periodic wrap).
    pub fn stencil(&self, x: &[f64]) -> Stencil {
        let dx = self.dx();
        let span = 2.0 * self.half_width;
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..self.dimension {
            let u = (x[a] + self.half_width).rem_euclid(span) / dx;
            let i = u.floor();
            let mut iu = i as usize;
            let mut f = u - i;
            if iu >= self.cells {
                iu = 0;
                f = 0.0;
            }
            base[a] = iu;
            frac[a] = f;
        }
        let corners = 1 << self.dimension;
        let mut s = Stencil {
            len: corners,
            index: [0; 8],
            weight: [0.0; 8],
        };
        for c in 0..corners {
            let mut flat = 0;
            let mut w = 1.0;
            for a in 0..self.dimension {
                let bit = (c >> (self.dimension - 1 - a)) & 1;
                let i = (base[a] + bit) % self.cells;
                flat = flat * self.cells + i;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            s.index[c] = flat;
            s.weight[c] = w;
        }
        s
    }

    /// Multilinear interpolation of a nodal array at `x`; exact at nodes.
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> f64 {
        self.stencil(x).apply(values)
    }
}

/// Corner indices and weights of a multilinear interpolation.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    len: usize,
    index: [usize; 8],
    weight: [f64; 8],
}

impl Stencil {
    #[inline]
    pub fn apply(&self, values: &[f64]) -> f64 {
        (0..self.len)
            .map(|c| self.weight[c] * values[self.index[c]])
            .sum()
    }
}
