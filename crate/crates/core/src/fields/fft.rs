use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

/// Separable multi-dimensional FFT on a row-major array with the same
/// length along every axis.
pub(crate) struct FftNd {
    n: usize,
    dimension: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftNd {
    pub(crate) fn new(n: usize, dimension: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            dimension,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.n.pow(self.dimension as u32)
    }

    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Normalized inverse.
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / data.len() as f64;
        data.par_iter_mut().for_each(|z| *z *= scale);
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.len());
        let n = self.n;
        for axis in 0..self.dimension {
            let stride = n.pow((self.dimension - 1 - axis) as u32);
            if stride == 1 {
                data.par_chunks_mut(n * 64.min(data.len() / n).max(1))
                    .for_each(|chunk| fft.process(chunk));
                continue;
            }
            // transpose each (n × stride) block so the axis is contiguous
            data.par_chunks_mut(n * stride).for_each(|block| {
                let mut buf = vec![Complex64::new(0.0, 0.0); block.len()];
                for i in 0..n {
                    for j in 0..stride {
                        buf[j * n + i] = block[i * stride + j];
                    }
                }
                fft.process(&mut buf);
                for i in 0..n {
                    for j in 0..stride {
                        block[i * stride + j] = buf[j * n + i];
                    }
                }
            });
        }
    }
}
