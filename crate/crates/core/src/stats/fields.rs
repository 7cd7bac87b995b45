use super::histogram::{padded_range, Histogram};
use super::StatsError;
use crate::par;
use crate::spectral_qg::Trajectory;

/// All snapshots of one layer, time-major.
pub fn layer_series(traj: &Trajectory, layer: usize) -> Result<Vec<f64>, StatsError> {
    if layer > 1 {
        return Err(StatsError::InvalidArgument(format!("layer {layer}")));
    }
    Ok((0..traj.len()).flat_map(|t| traj.layer(t, layer).iter().copied()).collect())
}

/// Fraction of points with `|ψ| ≥ c` (the step function is 1 at 0).
pub fn exceedance_fraction(field: &[f64], c: f64) -> f64 {
    field.iter().filter(|v| v.abs() >= c).count() as f64 / field.len() as f64
}

/// Per-snapshot exceedance fraction of one layer.
pub fn exceedance_area(traj: &Trajectory, layer: usize, c: f64) -> Result<Vec<f64>, StatsError> {
    if !(c >= 0.0) {
        return Err(StatsError::InvalidArgument(format!("threshold {c}")));
    }
    layer_series(traj, layer)?;
    Ok((0..traj.len()).map(|t| exceedance_fraction(traj.layer(t, layer), c)).collect())
}

/// Correctly rounded sum (Shewchuk's partials).
fn exact_sum(values: &[f64]) -> f64 {
    let mut partials: Vec<f64> = Vec::with_capacity(8);
    for &v in values {
        let mut x = v;
        let mut kept = 0;
        for i in 0..partials.len() {
            let mut y = partials[i];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }
    let mut hi = 0.0;
    while let Some(x) = partials.pop() {
        let y = hi;
        hi = x + y;
        let lo = y - (hi - x);
        if lo != 0.0 {
            if let Some(&next) = partials.last() {
                if (lo < 0.0) == (next < 0.0) {
                    let y2 = lo * 2.0;
                    let x2 = hi + y2;
                    if y2 == x2 - hi {
                        hi = x2;
                    }
                }
            }
            break;
        }
    }
    hi
}

/// Mean over x of each row of time-major `T × ny × nx` data; result `T × ny`.
/// Rows are summed with correct rounding, so an x-independent row returns
/// its value unchanged on power-of-two grids.
pub fn zonal_average(data: &[f64], nx: usize) -> Vec<f64> {
    data.chunks(nx).map(|row| exact_sum(row) / nx as f64).collect()
}

pub fn zonal_average_field(traj: &Trajectory, layer: usize) -> Result<Vec<f64>, StatsError> {
    Ok(zonal_average(&layer_series(traj, layer)?, traj.grid.nx()))
}

/// Centred moving average of `|ψ̄|²` along time for each of `ny` rows of a
/// time-major `T × ny` zonal average. The window spans
/// `round(window_time / sample_every)` samples and shrinks at the ends.
pub fn energy_gamma(zonal: &[f64], ny: usize, sample_every: f64, window_time: f64) -> Result<Vec<f64>, StatsError> {
    if ny == 0 || zonal.len() % ny != 0 || zonal.is_empty() {
        return Err(StatsError::InvalidArgument("zonal average shape".into()));
    }
    if !(window_time > 0.0 && sample_every > 0.0) {
        return Err(StatsError::InvalidArgument(format!("window {window_time}, sample interval {sample_every}")));
    }
    let steps = zonal.len() / ny;
    let w = ((window_time / sample_every).round() as usize).max(1);
    if w > steps {
        return Err(StatsError::TooFewSamples { needed: w, found: steps });
    }
    let left = (w - 1) / 2;
    let right = w - 1 - left;
    let cols: Vec<Vec<f64>> = par::map_range(ny, |y| {
        let e: Vec<f64> = (0..steps).map(|t| zonal[t * ny + y] * zonal[t * ny + y]).collect();
        (0..steps)
            .map(|t| {
                let a = t.saturating_sub(left);
                let b = (t + right).min(steps - 1);
                e[a..=b].iter().sum::<f64>() / (b - a + 1) as f64
            })
            .collect()
    });
    let mut out = vec![0.0; zonal.len()];
    for (y, col) in cols.iter().enumerate() {
        for (t, v) in col.iter().enumerate() {
            out[t * ny + y] = *v;
        }
    }
    Ok(out)
}

/// `(σ − σ̄)/σ̄` with `σ` the unbiased temporal standard deviation at each of
/// `points` locations of time-major data and `σ̄` its spatial mean.
pub fn normalized_variance(data: &[f64], points: usize) -> Result<Vec<f64>, StatsError> {
    if points == 0 || data.len() % points != 0 {
        return Err(StatsError::InvalidArgument("data is not time-major over the given points".into()));
    }
    let steps = data.len() / points;
    if steps < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, found: steps });
    }
    let sigma: Vec<f64> = par::map_range(points, |p| {
        let mean = (0..steps).map(|t| data[t * points + p]).sum::<f64>() / steps as f64;
        let ss = (0..steps).map(|t| (data[t * points + p] - mean).powi(2)).sum::<f64>();
        (ss / (steps - 1) as f64).sqrt()
    });
    let bar = sigma.iter().sum::<f64>() / points as f64;
    if !(bar > 0.0) {
        return Err(StatsError::Degenerate("zero mean standard deviation".into()));
    }
    Ok(sigma.iter().map(|s| (s - bar) / bar).collect())
}

pub fn normalized_variance_field(traj: &Trajectory, layer: usize) -> Result<Vec<f64>, StatsError> {
    normalized_variance(&layer_series(traj, layer)?, traj.grid.len())
}

/// Index bounds `[start, end)` of the three strips along one axis.
pub fn region_bounds(nx: usize) -> [(usize, usize); 3] {
    [(0, nx / 3), (nx / 3, 2 * nx / 3), (2 * nx / 3, nx)]
}

/// Histograms over a 3×3 partition of the domain, row-major in (y, x)
/// strips, all on shared edges. `range` defaults to the padded layer range.
pub fn regional_pdfs(
    traj: &Trajectory,
    layer: usize,
    nbins: usize,
    range: Option<(f64, f64)>,
) -> Result<Vec<Histogram>, StatsError> {
    let series = layer_series(traj, layer)?;
    let (lo, hi) = match range {
        Some(r) => r,
        None => padded_range(&series)?,
    };
    let nx = traj.grid.nx();
    let b = region_bounds(nx);
    let regions: Vec<(usize, usize)> = (0..3).flat_map(|ry| (0..3).map(move |rx| (ry, rx))).collect();
    par::map_slice(&regions, |&(ry, rx)| {
        let mut h = Histogram::empty(nbins, lo, hi)?;
        let mut buf = Vec::new();
        for t in 0..traj.len() {
            let f = traj.layer(t, layer);
            for y in b[ry].0..b[ry].1 {
                buf.extend_from_slice(&f[y * nx + b[rx].0..y * nx + b[rx].1]);
            }
        }
        h.add_samples(&buf);
        Ok(h)
    })
    .into_iter()
    .collect()
}
