use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{GridSpec, QgError};

/// 2-D DFT pair on a square periodic grid.
///
/// The forward transform carries the `1/nx²` factor, so coefficients are
/// mode amplitudes: a constant field `c` maps to `c` at `k = 0` and
/// `mean(|f|²) = Σ_k |f̂_k|²` (Parseval). The inverse is unnormalised.
pub struct SpectralTransform {
    grid: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    transposed: Vec<Complex64>,
}

impl Clone for SpectralTransform {
    fn clone(&self) -> Self {
        Self {
            grid: self.grid,
            forward: Arc::clone(&self.forward),
            inverse: Arc::clone(&self.inverse),
            scratch: self.scratch.clone(),
            transposed: self.transposed.clone(),
        }
    }
}

impl std::fmt::Debug for SpectralTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralTransform").field("grid", &self.grid).finish()
    }
}

impl SpectralTransform {
    pub fn new(grid: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.nx());
        let inverse = planner.plan_fft_inverse(grid.nx());
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            grid,
            forward,
            inverse,
            scratch: vec![Complex64::default(); scratch_len],
            transposed: vec![Complex64::default(); grid.len()],
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// In-place normalised forward transform of one `nx × nx` block.
    pub fn forward_in_place(&mut self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.grid.len());
        let fft = Arc::clone(&self.forward);
        self.transform_2d(fft.as_ref(), data);
        let norm = 1.0 / self.grid.len() as f64;
        data.iter_mut().for_each(|c| *c *= norm);
    }

    /// In-place unnormalised inverse transform of one `nx × nx` block.
    pub fn inverse_in_place(&mut self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.grid.len());
        let fft = Arc::clone(&self.inverse);
        self.transform_2d(fft.as_ref(), data);
    }

    fn transform_2d(&mut self, fft: &dyn Fft<f64>, data: &mut [Complex64]) {
        let n = self.grid.nx();
        // rows (x direction) are contiguous
        fft.process_with_scratch(data, &mut self.scratch);
        transpose(data, &mut self.transposed, n);
        fft.process_with_scratch(&mut self.transposed, &mut self.scratch);
        transpose(&self.transposed, data, n);
    }

    /// Spectral coefficients of a real field laid out row-major `(y, x)`.
    pub fn to_spectral(&mut self, field: &[f64]) -> Result<Vec<Complex64>, QgError> {
        self.check_len(field.len())?;
        let mut data: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_in_place(&mut data);
        Ok(data)
    }

    /// Real part of the inverse transform.
    pub fn to_physical(&mut self, coeffs: &[Complex64]) -> Result<Vec<f64>, QgError> {
        self.check_len(coeffs.len())?;
        let mut data = coeffs.to_vec();
        self.inverse_in_place(&mut data);
        Ok(data.into_iter().map(|c| c.re).collect())
    }

    /// Forward transform of two real fields in one complex FFT.
    pub fn to_spectral_pair(
        &mut self,
        a: &[f64],
        b: &[f64],
        out_a: &mut [Complex64],
        out_b: &mut [Complex64],
    ) {
        let packed = out_a;
        for ((p, &x), &y) in packed.iter_mut().zip(a).zip(b) {
            *p = Complex64::new(x, y);
        }
        self.forward_in_place(packed);
        unpack_pair(self.grid, packed, out_b);
    }

    fn check_len(&self, len: usize) -> Result<(), QgError> {
        if len != self.grid.len() {
            return Err(QgError::SizeMismatch {
                expected: self.grid.len(),
                found: len,
            });
        }
        Ok(())
    }
}

/// Split the transform `F` of `a + i b` (both real) into `â` (left in
/// `packed`) and `b̂` (written to `out_b`).
pub(crate) fn unpack_pair(grid: GridSpec, packed: &mut [Complex64], out_b: &mut [Complex64]) {
    let n2 = grid.len();
    let half = Complex64::new(0.5, 0.0);
    let minus_half_i = Complex64::new(0.0, -0.5);
    for idx in 0..n2 {
        let j = grid.conjugate_index(idx);
        if j < idx {
            continue;
        }
        let f = packed[idx];
        let fc = packed[j].conj();
        let a = half * (f + fc);
        let b = minus_half_i * (f - fc);
        packed[idx] = a;
        out_b[idx] = b;
        if j != idx {
            packed[j] = a.conj();
            out_b[j] = b.conj();
        }
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const BLOCK: usize = 16;
    for bi in (0..n).step_by(BLOCK) {
        for bj in (0..n).step_by(BLOCK) {
            for i in bi..(bi + BLOCK).min(n) {
                for j in bj..(bj + BLOCK).min(n) {
                    dst[j * n + i] = src[i * n + j];
                }
            }
        }
    }
}
