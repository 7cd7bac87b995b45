use std::f64::consts::PI;

use super::QgError;

/// Square periodic grid over `[0, 2π)²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridSpec {
    nx: usize,
}

impl GridSpec {
    pub fn new(nx: usize) -> Result<Self, QgError> {
        if nx < 8 || nx % 2 != 0 {
            return Err(QgError::InvalidGrid(nx));
        }
        Ok(Self { nx })
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }

    /// Points per layer.
    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.nx
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.nx as f64
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    /// Integer wavenumber of FFT index `i`, in `[-nx/2, nx/2 - 1]`.
    #[inline]
    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.nx as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// FFT index of wavenumber `k` (taken modulo nx).
    #[inline]
    pub fn index_of(&self, k: i64) -> usize {
        k.rem_euclid(self.nx as i64) as usize
    }

    /// Flat index of the mode `-k` for flat index `idx = iy * nx + ix`.
    #[inline]
    pub fn conjugate_index(&self, idx: usize) -> usize {
        let n = self.nx;
        let (iy, ix) = (idx / n, idx % n);
        ((n - iy) % n) * n + (n - ix) % n
    }

    /// Largest retained wavenumber under the 2/3 rule: quadratic products of
    /// modes with `|k| <= K` alias only onto `|k| > K` when `3K < nx`.
    #[inline]
    pub fn dealias_cutoff(&self) -> i64 {
        (self.nx as i64 - 1) / 3
    }

    /// `(kx, ky)` of flat index `idx = iy * nx + ix`.
    #[inline]
    pub fn mode(&self, idx: usize) -> (i64, i64) {
        (self.wavenumber(idx % self.nx), self.wavenumber(idx / self.nx))
    }

    /// 1.0 on modes kept by the 2/3 rule, 0.0 elsewhere (Nyquist included).
    pub fn dealias_mask(&self) -> Vec<f64> {
        let cut = self.dealias_cutoff();
        (0..self.len())
            .map(|idx| {
                let (kx, ky) = self.mode(idx);
                if kx.abs() <= cut && ky.abs() <= cut {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Default hyperviscosity giving O(1) damping per time unit at the
    /// largest retained scale.
    pub fn default_hyperviscosity(&self) -> f64 {
        let kmax = self.nx as f64 / 3.0;
        10.0 / kmax.powi(8)
    }

    /// Default step: 1e-3 on fine grids, 4e-3 on coarse ones.
    pub fn default_dt(&self) -> f64 {
        if self.nx >= 64 {
            1e-3
        } else {
            4e-3
        }
    }
}
