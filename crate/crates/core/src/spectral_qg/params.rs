use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GridSpec, QgError};

/// Physical parameters of the two-layer model (nondimensional).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QgParams {
    /// Bottom drag, acting on the lower layer only.
    pub r: f64,
    pub beta: f64,
    /// Squared deformation wavenumber.
    pub kd2: f64,
    /// Hyperviscosity coefficient of the ∇⁸ term.
    pub nu: f64,
    /// Imposed shear: the upper layer carries `+u`, the lower `-u`.
    pub u: f64,
    pub f0: f64,
    /// Lower-layer thickness.
    pub h2: f64,
}

impl QgParams {
    /// Mid-latitude defaults with the grid-dependent hyperviscosity.
    pub fn for_grid(grid: GridSpec) -> Self {
        Self {
            r: 0.1,
            beta: 2.0,
            kd2: 4.0,
            nu: grid.default_hyperviscosity(),
            u: 0.2,
            f0: 1.0,
            h2: 1.0,
        }
    }

    /// Everything switched off except the Jacobian and the PV coupling.
    pub fn inviscid(kd2: f64) -> Self {
        Self {
            r: 0.0,
            beta: 0.0,
            kd2,
            nu: 0.0,
            u: 0.0,
            f0: 1.0,
            h2: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), QgError> {
        let finite = [self.r, self.beta, self.kd2, self.nu, self.u, self.f0, self.h2]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(QgError::InvalidParams("non-finite parameter".into()));
        }
        if self.r < 0.0 || self.nu < 0.0 || self.kd2 < 0.0 {
            return Err(QgError::InvalidParams("r, nu and kd2 must be >= 0".into()));
        }
        if self.h2 <= 0.0 {
            return Err(QgError::InvalidParams("h2 must be > 0".into()));
        }
        Ok(())
    }

    /// Imposed zonal velocity of layer `j` (0 = upper, 1 = lower).
    #[inline]
    pub fn layer_velocity(&self, j: usize) -> f64 {
        if j == 0 {
            self.u
        } else {
            -self.u
        }
    }

    /// Field order used in the trajectory header.
    pub fn to_record(&self) -> [f64; 7] {
        [self.r, self.beta, self.kd2, self.nu, self.u, self.f0, self.h2]
    }

    pub fn from_record(rec: [f64; 7]) -> Self {
        Self {
            r: rec[0],
            beta: rec[1],
            kd2: rec[2],
            nu: rec[3],
            u: rec[4],
            f0: rec[5],
            h2: rec[6],
        }
    }
}

pub const TOPOGRAPHY_CENTERS: usize = 7;

/// Bottom topography: seven Gaussian mountains with a shared width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topography {
    pub amplitude: f64,
    pub centers: [[f64; 2]; TOPOGRAPHY_CENTERS],
    pub sigma2: f64,
}

impl Topography {
    pub fn flat() -> Self {
        Self {
            amplitude: 0.0,
            centers: [[PI, PI]; TOPOGRAPHY_CENTERS],
            sigma2: 0.5,
        }
    }

    /// Default amplitude `0.4·kd2·h2/f0`, `σ² = 0.5`, and centers drawn from
    /// `seed` at least `3σ` away from the domain edges.
    pub fn seeded(params: &QgParams, seed: u64) -> Self {
        let sigma2 = 0.5;
        let margin = 3.0 * f64::sqrt(sigma2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut centers = [[0.0; 2]; TOPOGRAPHY_CENTERS];
        for c in centers.iter_mut() {
            c[0] = rng.random_range(margin..2.0 * PI - margin);
            c[1] = rng.random_range(margin..2.0 * PI - margin);
        }
        Self {
            amplitude: 0.4 * params.kd2 * params.h2 / params.f0,
            centers,
            sigma2,
        }
    }

    pub fn validate(&self) -> Result<(), QgError> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite() && self.amplitude.is_finite()) {
            return Err(QgError::InvalidParams("topography needs finite amplitude and sigma2 > 0".into()));
        }
        let inside = self
            .centers
            .iter()
            .flatten()
            .all(|&c| (0.0..2.0 * PI).contains(&c));
        if !inside {
            return Err(QgError::InvalidParams("topography centers must lie in [0, 2π)".into()));
        }
        Ok(())
    }

    /// Height at a point; distances are not wrapped around the periodic box.
    pub fn height(&self, x: f64, y: f64) -> f64 {
        self.amplitude
            * self
                .centers
                .iter()
                .map(|[a, b]| (-((x - a).powi(2) + (y - b).powi(2)) / self.sigma2).exp())
                .sum::<f64>()
    }
}

/// `h_b` sampled on the grid, row-major `(y, x)`.
pub fn topography_field(topo: &Topography, grid: GridSpec) -> Vec<f64> {
    let n = grid.nx();
    let mut out = Vec::with_capacity(grid.len());
    for iy in 0..n {
        let y = grid.coord(iy);
        for ix in 0..n {
            out.push(topo.height(grid.coord(ix), y));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_amplitude_is_flat() {
        let grid = GridSpec::new(16).unwrap();
        let mut t = Topography::seeded(&QgParams::for_grid(grid), 5);
        t.amplitude = 0.0;
        assert!(topography_field(&t, grid).iter().all(|&h| h == 0.0));
    }

    #[test]
    fn isolated_peak_hits_amplitude() {
        let grid = GridSpec::new(24).unwrap();
        let c = grid.coord(12);
        let mut centers = [[0.2, 0.2]; TOPOGRAPHY_CENTERS];
        centers[0] = [c, c];
        // the other six sit ~6σ away from the peak
        let t = Topography { amplitude: 1.3, centers, sigma2: 0.05 };
        let h = topography_field(&t, grid);
        assert!((h[12 * 24 + 12] - 1.3).abs() < 1e-6 * 1.3);
    }

    #[test]
    fn seeded_centers_respect_margin() {
        let p = QgParams::for_grid(GridSpec::new(16).unwrap());
        let t = Topography::seeded(&p, 42);
        let margin = 3.0 * t.sigma2.sqrt();
        for c in t.centers.iter().flatten() {
            assert!(*c >= margin && *c <= 2.0 * PI - margin);
        }
        assert_eq!(t, Topography::seeded(&p, 42));
        assert!((t.amplitude - 1.6).abs() < 1e-15);
        t.validate().unwrap();
    }

    #[test]
    fn default_field_matches_double_loop() {
        let grid = GridSpec::new(24).unwrap();
        let p = QgParams::for_grid(grid);
        let t = Topography::seeded(&p, 9);
        let h = topography_field(&t, grid);
        let dx = 2.0 * PI / 24.0;
        for j in 0..24 {
            for i in 0..24 {
                let (x, y) = (i as f64 * dx, j as f64 * dx);
                let mut s = 0.0;
                for m in 0..7 {
                    let (a, b) = (t.centers[m][0], t.centers[m][1]);
                    s += (-((x - a) * (x - a) + (y - b) * (y - b)) / t.sigma2).exp();
                }
                let expect = t.amplitude * s;
                assert!((h[j * 24 + i] - expect).abs() <= 1e-15 * expect.abs().max(1.0));
                assert!(h[j * 24 + i] >= 0.0);
            }
        }
    }
}
