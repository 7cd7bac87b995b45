use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::transform::unpack_pair;
use super::{topography_field, GridSpec, QgError, QgParams, SpectralTransform, Topography};

pub const LAYERS: usize = 2;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Spectral potential vorticity of both layers, layer-major, plus time.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub grid: GridSpec,
    pub qhat: Vec<Complex64>,
    pub time: f64,
}

impl SpectralState {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            qhat: vec![Complex64::default(); LAYERS * grid.len()],
            time: 0.0,
        }
    }

    pub fn layer(&self, j: usize) -> &[Complex64] {
        let n2 = self.grid.len();
        &self.qhat[j * n2..(j + 1) * n2]
    }

    /// Largest violation of `q̂(-k) = conj q̂(k)`.
    pub fn hermitian_defect(&self) -> f64 {
        hermitian_defect(self.grid, &self.qhat)
    }
}

pub(crate) fn hermitian_defect(grid: GridSpec, coeffs: &[Complex64]) -> f64 {
    let n2 = grid.len();
    coeffs
        .chunks(n2)
        .flat_map(|layer| {
            (0..n2).map(move |idx| (layer[idx] - layer[grid.conjugate_index(idx)].conj()).norm())
        })
        .fold(0.0, f64::max)
}

/// Wavenumber tables shared by the PV map and the tendency.
#[derive(Debug, Clone)]
pub(crate) struct Wavenumbers {
    pub kx: Vec<f64>,
    pub ky: Vec<f64>,
    pub k2: Vec<f64>,
    pub mask: Vec<f64>,
}

impl Wavenumbers {
    pub fn new(grid: GridSpec) -> Self {
        let n2 = grid.len();
        let mut kx = Vec::with_capacity(n2);
        let mut ky = Vec::with_capacity(n2);
        let mut k2 = Vec::with_capacity(n2);
        for idx in 0..n2 {
            let (a, b) = grid.mode(idx);
            kx.push(a as f64);
            ky.push(b as f64);
            k2.push((a * a + b * b) as f64);
        }
        Self { kx, ky, k2, mask: grid.dealias_mask() }
    }
}

/// Solve the 2×2 PV-streamfunction system of one mode with `|k|² = k2`.
///
/// `q2` must already have the topographic term removed.
pub fn invert_mode(
    k2: f64,
    kd2: f64,
    q1: Complex64,
    q2: Complex64,
) -> Result<(Complex64, Complex64), QgError> {
    if k2 == 0.0 {
        return Err(QgError::DegenerateInversion);
    }
    let a = -k2 - 0.5 * kd2;
    let b = 0.5 * kd2;
    let det = a * a - b * b;
    Ok(((a * q1 - b * q2) / det, (a * q2 - b * q1) / det))
}

/// Spectral operator of the two-layer model: PV inversion and tendency.
#[derive(Debug, Clone)]
pub struct QgModel {
    grid: GridSpec,
    params: QgParams,
    /// `(f0/h2)·ĥ_b`, dealiased, mean mode removed.
    topo_pv: Vec<Complex64>,
    wn: Wavenumbers,
    transform: SpectralTransform,
    psi: Vec<Complex64>,
    work_a: Vec<Complex64>,
    work_b: Vec<Complex64>,
    jac: [Vec<f64>; LAYERS],
    jac_hat: Vec<Complex64>,
}

impl QgModel {
    pub fn new(grid: GridSpec, params: QgParams, topo: &Topography) -> Result<Self, QgError> {
        params.validate()?;
        topo.validate()?;
        let mut transform = SpectralTransform::new(grid);
        let wn = Wavenumbers::new(grid);
        let h = topography_field(topo, grid);
        let mut topo_pv = transform.to_spectral(&h)?;
        let scale = params.f0 / params.h2;
        for (c, m) in topo_pv.iter_mut().zip(&wn.mask) {
            *c *= scale * m;
        }
        topo_pv[0] = Complex64::default();
        let n2 = grid.len();
        Ok(Self {
            grid,
            params,
            topo_pv,
            wn,
            transform,
            psi: vec![Complex64::default(); LAYERS * n2],
            work_a: vec![Complex64::default(); n2],
            work_b: vec![Complex64::default(); n2],
            jac: [vec![0.0; n2], vec![0.0; n2]],
            jac_hat: vec![Complex64::default(); n2],
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn params(&self) -> &QgParams {
        &self.params
    }

    pub fn topography_pv(&self) -> &[Complex64] {
        &self.topo_pv
    }

    pub fn transform_mut(&mut self) -> &mut SpectralTransform {
        &mut self.transform
    }

    /// Stream functions `ψ̂` from `q̂` (both layer-major); `ψ̂(0) = 0`.
    pub fn invert_pv(&self, qhat: &[Complex64], psi: &mut [Complex64]) -> Result<(), QgError> {
        let n2 = self.grid.len();
        if qhat.len() != LAYERS * n2 || psi.len() != LAYERS * n2 {
            return Err(QgError::SizeMismatch { expected: LAYERS * n2, found: qhat.len() });
        }
        psi[0] = Complex64::default();
        psi[n2] = Complex64::default();
        for idx in 1..n2 {
            let q1 = qhat[idx];
            let q2 = qhat[n2 + idx] - self.topo_pv[idx];
            let (p1, p2) = invert_mode(self.wn.k2[idx], self.params.kd2, q1, q2)?;
            psi[idx] = p1;
            psi[n2 + idx] = p2;
        }
        Ok(())
    }

    /// Forward PV map: `q̂` from `ψ̂`, including the topographic term and
    /// pinning both mean modes to zero.
    pub fn pv_from_streamfunction(&self, psi: &[Complex64], qhat: &mut [Complex64]) {
        let n2 = self.grid.len();
        let half_kd2 = 0.5 * self.params.kd2;
        for idx in 0..n2 {
            let k2 = self.wn.k2[idx];
            let (p1, p2) = (psi[idx], psi[n2 + idx]);
            qhat[idx] = -k2 * p1 + half_kd2 * (p2 - p1);
            qhat[n2 + idx] = -k2 * p2 + half_kd2 * (p1 - p2) + self.topo_pv[idx];
        }
        qhat[0] = Complex64::default();
        qhat[n2] = Complex64::default();
    }

    /// Build a dealiased state from physical stream functions `(layer, y, x)`.
    pub fn state_from_streamfunction(&mut self, psi_phys: &[f64], time: f64) -> Result<SpectralState, QgError> {
        let n2 = self.grid.len();
        if psi_phys.len() != LAYERS * n2 {
            return Err(QgError::SizeMismatch { expected: LAYERS * n2, found: psi_phys.len() });
        }
        let mut psi = vec![Complex64::default(); LAYERS * n2];
        let (p1, p2) = psi.split_at_mut(n2);
        self.transform.to_spectral_pair(&psi_phys[..n2], &psi_phys[n2..], p1, p2);
        for layer in psi.chunks_mut(n2) {
            for (c, m) in layer.iter_mut().zip(&self.wn.mask) {
                *c *= *m;
            }
        }
        let mut state = SpectralState::zeros(self.grid);
        self.pv_from_streamfunction(&psi, &mut state.qhat);
        state.time = time;
        Ok(state)
    }

    /// Physical stream functions `(layer, y, x)` of a state.
    pub fn streamfunction(&mut self, state: &SpectralState) -> Result<Vec<f64>, QgError> {
        let n2 = self.grid.len();
        let mut psi = std::mem::take(&mut self.psi);
        self.invert_pv(&state.qhat, &mut psi)?;
        // ψ̂1 + iψ̂2 inverts to ψ1 + iψ2 since both are Hermitian
        for idx in 0..n2 {
            self.work_a[idx] = psi[idx] + I * psi[n2 + idx];
        }
        self.psi = psi;
        self.transform.inverse_in_place(&mut self.work_a);
        let mut out = vec![0.0; LAYERS * n2];
        for idx in 0..n2 {
            out[idx] = self.work_a[idx].re;
            out[n2 + idx] = self.work_a[idx].im;
        }
        Ok(out)
    }

    /// Right-hand side `dq̂/dt` of the two-layer equations. Returns the
    /// largest advecting speed (mean flow included) seen on the grid.
    pub fn tendency(&mut self, time: f64, qhat: &[Complex64], dq: &mut [Complex64]) -> Result<f64, QgError> {
        let n2 = self.grid.len();
        let mut psi = std::mem::take(&mut self.psi);
        let res = self.invert_pv(qhat, &mut psi);
        if let Err(e) = res {
            self.psi = psi;
            return Err(e);
        }
        let mut max_speed: f64 = 0.0;
        for j in 0..LAYERS {
            let q = &qhat[j * n2..(j + 1) * n2];
            let p = &psi[j * n2..(j + 1) * n2];
            // u + iv with u = -ψ_y, v = ψ_x
            for idx in 0..n2 {
                let (kx, ky) = (self.wn.kx[idx], self.wn.ky[idx]);
                let u_hat = -I * ky * p[idx];
                let v_hat = I * kx * p[idx];
                self.work_a[idx] = u_hat + I * v_hat;
                let qx = I * kx * q[idx];
                let qy = I * ky * q[idx];
                self.work_b[idx] = qx + I * qy;
            }
            self.transform.inverse_in_place(&mut self.work_a);
            self.transform.inverse_in_place(&mut self.work_b);
            let ubar = self.params.layer_velocity(j);
            let jac = &mut self.jac[j];
            for idx in 0..n2 {
                let vel = self.work_a[idx];
                let grad = self.work_b[idx];
                jac[idx] = vel.re * grad.re + vel.im * grad.im;
                max_speed = max_speed.max((vel.re + ubar).abs()).max(vel.im.abs());
            }
        }
        if !max_speed.is_finite() {
            self.psi = psi;
            return Err(QgError::BlowUp { time });
        }
        // both Jacobians through one forward transform
        {
            let (j1, j2) = (&self.jac[0], &self.jac[1]);
            let packed = &mut self.work_a;
            for idx in 0..n2 {
                packed[idx] = Complex64::new(j1[idx], j2[idx]);
            }
            self.transform.forward_in_place(packed);
            unpack_pair(self.grid, packed, &mut self.jac_hat);
        }
        let p = &self.params;
        for j in 0..LAYERS {
            let ubar = p.layer_velocity(j);
            let gradient = p.beta + p.kd2 * ubar;
            let drag = if j == 1 { p.r } else { 0.0 };
            let jac_hat: &[Complex64] = if j == 0 { &self.work_a } else { &self.jac_hat };
            for idx in 0..n2 {
                let o = j * n2 + idx;
                let kx = self.wn.kx[idx];
                let k2 = self.wn.k2[idx];
                let k8 = (k2 * k2) * (k2 * k2);
                let rhs = -jac_hat[idx] - I * kx * (ubar * qhat[o] + gradient * psi[o]) + drag * k2 * psi[o]
                    - p.nu * k8 * qhat[o];
                dq[o] = rhs * self.wn.mask[idx];
            }
            dq[j * n2] = Complex64::default();
        }
        self.psi = psi;
        if dq.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(QgError::BlowUp { time });
        }
        Ok(max_speed)
    }

    /// Total energy and enstrophy (domain averages).
    pub fn energy_enstrophy(&self, state: &SpectralState) -> Result<(f64, f64), QgError> {
        let n2 = self.grid.len();
        let mut psi = vec![Complex64::default(); LAYERS * n2];
        self.invert_pv(&state.qhat, &mut psi)?;
        Ok(energy_enstrophy_from(&self.wn.k2, self.params.kd2, &psi, &state.qhat, &self.topo_pv))
    }

    /// Seeded small-amplitude noise in modes `|k| <= 4`, dealiased.
    pub fn random_state(&mut self, seed: u64, amplitude: f64) -> Result<SpectralState, QgError> {
        let n2 = self.grid.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut psi = vec![Complex64::default(); LAYERS * n2];
        for idx in 0..n2 {
            let k2 = self.wn.k2[idx];
            for j in 0..LAYERS {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                if k2 > 0.0 && k2 <= 16.0 {
                    psi[j * n2 + idx] = amplitude * Complex64::new(re, im);
                }
            }
        }
        let mut phys = vec![0.0; LAYERS * n2];
        for j in 0..LAYERS {
            let field = self.transform.to_physical(&psi[j * n2..(j + 1) * n2])?;
            phys[j * n2..(j + 1) * n2].copy_from_slice(&field);
        }
        self.state_from_streamfunction(&phys, 0.0)
    }
}

/// Energy `½Σ[|k|²(|ψ̂1|²+|ψ̂2|²) + (kd²/2)|ψ̂1−ψ̂2|²]` and enstrophy
/// `½Σ(|q̂1|²+|q̂2 − topo|²)` over the stored coefficients.
pub(crate) fn energy_enstrophy_from(
    k2: &[f64],
    kd2: f64,
    psi: &[Complex64],
    qhat: &[Complex64],
    topo_pv: &[Complex64],
) -> (f64, f64) {
    let n2 = k2.len();
    let mut energy = 0.0;
    let mut enstrophy = 0.0;
    for idx in 0..n2 {
        let (p1, p2) = (psi[idx], psi[n2 + idx]);
        energy += k2[idx] * (p1.norm_sqr() + p2.norm_sqr()) + 0.5 * kd2 * (p1 - p2).norm_sqr();
        enstrophy += qhat[idx].norm_sqr() + (qhat[n2 + idx] - topo_pv[idx]).norm_sqr();
    }
    (0.5 * energy, 0.5 * enstrophy)
}
