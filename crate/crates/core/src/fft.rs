//! Thin 2-D FFT helpers over row-major complex arrays.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward and inverse plans for one axis length.
#[derive(Clone)]
pub struct AxisPlan {
    pub len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl AxisPlan {
    pub fn new(planner: &mut FftPlanner<f64>, len: usize) -> Self {
        Self {
            len,
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
        }
    }

    /// Forward transforms of every consecutive row of length `len` (unnormalized).
    pub fn forward_rows(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        let need = self.fwd.get_inplace_scratch_len();
        if scratch.len() < need {
            scratch.resize(need, Complex64::default());
        }
        self.fwd.process_with_scratch(data, &mut scratch[..need]);
    }

    /// Inverse transforms of every row (unnormalized: sums Σ c e^{+i}).
    pub fn inverse_rows(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        let need = self.inv.get_inplace_scratch_len();
        if scratch.len() < need {
            scratch.resize(need, Complex64::default());
        }
        self.inv.process_with_scratch(data, &mut scratch[..need]);
    }
}

/// Cache-blocked out-of-place transpose of a `rows × cols` array.
pub fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    debug_assert_eq!(src.len(), rows * cols);
    debug_assert_eq!(dst.len(), rows * cols);
    const B: usize = 32;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// 2-D transform engine for `mx × my` blocks stored x-major.
#[derive(Clone)]
pub struct Fft2 {
    pub mx: usize,
    pub my: usize,
    px: AxisPlan,
    py: AxisPlan,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(mx: usize, my: usize) -> Self {
        let mut planner = FftPlanner::new();
        let px = AxisPlan::new(&mut planner, mx);
        let py = AxisPlan::new(&mut planner, my);
        Self {
            mx,
            my,
            px,
            py,
            buf: vec![Complex64::default(); mx * my],
            scratch: Vec::new(),
        }
    }

    pub fn plan_x(&self) -> &AxisPlan {
        &self.px
    }

    pub fn plan_y(&self) -> &AxisPlan {
        &self.py
    }

    /// Samples → coefficients, normalized by 1/(mx·my).
    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.py.forward_rows(data, &mut self.scratch);
        transpose(data, &mut self.buf, self.mx, self.my);
        self.px.forward_rows(&mut self.buf, &mut self.scratch);
        transpose(&self.buf, data, self.my, self.mx);
        let norm = 1.0 / (self.mx * self.my) as f64;
        for v in data.iter_mut() {
            *v *= norm;
        }
    }

    /// Coefficients → samples.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.py.inverse_rows(data, &mut self.scratch);
        transpose(data, &mut self.buf, self.mx, self.my);
        self.px.inverse_rows(&mut self.buf, &mut self.scratch);
        transpose(&self.buf, data, self.my, self.mx);
    }
}

/// Signed frequency of FFT index `i` for length `n`: [0, n/2) then [−n/2, 0).
#[inline]
pub fn signed_index(i: usize, n: usize) -> i64 {
    if i < n.div_ceil(2) {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let (mx, my) = (8, 16);
        let mut f = Fft2::new(mx, my);
        let orig: Vec<Complex64> = (0..mx * my)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64).cos()))
            .collect();
        let mut d = orig.clone();
        f.forward(&mut d);
        f.inverse(&mut d);
        for (a, b) in d.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn signed_indices() {
        let v: Vec<i64> = (0..4).map(|i| signed_index(i, 4)).collect();
        assert_eq!(v, vec![0, 1, -2, -1]);
        assert_eq!(signed_index(0, 1), 0);
    }
}
