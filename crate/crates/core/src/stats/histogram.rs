use std::fmt::Write as _;

use super::StatsError;

pub const DEFAULT_BINS: usize = 200;
/// Density floor in the log-domain metrics.
pub const LOG_FLOOR: f64 = 1e-12;

/// Piecewise-constant density on fixed bins. Raw counts are kept so that
/// histograms over the same edges can be merged exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub density: Vec<f64>,
    pub count: u64,
}

/// `[min, max]` of all samples padded by 5% of the span on each side; a
/// zero span is widened to a unit-scale interval around the value.
pub fn padded_range<'a, I>(samples: I) -> Result<(f64, f64), StatsError>
where
    I: IntoIterator<Item = &'a f64>,
{
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut n = 0usize;
    for &v in samples {
        if !v.is_finite() {
            return Err(StatsError::InvalidArgument(format!("non-finite sample {v}")));
        }
        lo = lo.min(v);
        hi = hi.max(v);
        n += 1;
    }
    if n == 0 {
        return Err(StatsError::TooFewSamples { needed: 1, found: 0 });
    }
    let span = hi - lo;
    if span == 0.0 {
        let pad = 0.5 * lo.abs().max(1.0);
        return Ok((lo - pad, hi + pad));
    }
    Ok((lo - 0.05 * span, hi + 0.05 * span))
}

fn uniform_edges(nbins: usize, lo: f64, hi: f64) -> Vec<f64> {
    let w = (hi - lo) / nbins as f64;
    let mut e: Vec<f64> = (0..=nbins).map(|i| lo + i as f64 * w).collect();
    e[nbins] = hi;
    e
}

impl Histogram {
    /// Empty histogram on `nbins` uniform bins over `[lo, hi]`.
    pub fn empty(nbins: usize, lo: f64, hi: f64) -> Result<Self, StatsError> {
        if nbins == 0 {
            return Err(StatsError::InvalidArgument("zero bins".into()));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(StatsError::InvalidArgument(format!("empty range [{lo}, {hi}]")));
        }
        Ok(Self { edges: uniform_edges(nbins, lo, hi), counts: vec![0; nbins], density: vec![0.0; nbins], count: 0 })
    }

    /// Density estimate; `range` defaults to the padded data range.
    /// Samples outside the range land in the edge bins.
    pub fn from_samples(samples: &[f64], nbins: usize, range: Option<(f64, f64)>) -> Result<Self, StatsError> {
        if samples.len() < 2 {
            return Err(StatsError::TooFewSamples { needed: 2, found: samples.len() });
        }
        let (lo, hi) = match range {
            Some(r) => r,
            None => padded_range(samples)?,
        };
        let mut h = Self::empty(nbins, lo, hi)?;
        h.add_samples(samples);
        Ok(h)
    }

    pub fn nbins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_of(&self, v: f64) -> usize {
        let n = self.nbins();
        let (lo, hi) = (self.edges[0], self.edges[n]);
        let pos = ((v - lo) / (hi - lo) * n as f64).floor();
        if pos.is_nan() || pos < 0.0 {
            0
        } else {
            (pos as usize).min(n - 1)
        }
    }

    pub fn add_samples(&mut self, samples: &[f64]) {
        for &v in samples {
            let b = self.bin_of(v);
            self.counts[b] += 1;
        }
        self.count += samples.len() as u64;
        self.refresh();
    }

    fn refresh(&mut self) {
        let total = self.count as f64;
        for i in 0..self.nbins() {
            let w = self.edges[i + 1] - self.edges[i];
            self.density[i] = if total > 0.0 { self.counts[i] as f64 / (total * w) } else { 0.0 };
        }
    }

    pub fn same_edges(&self, other: &Self) -> bool {
        self.edges == other.edges
    }

    /// Pool the counts of two histograms over the same edges.
    pub fn merge(&mut self, other: &Self) -> Result<(), StatsError> {
        if !self.same_edges(other) {
            return Err(StatsError::EdgeMismatch);
        }
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        self.count += other.count;
        self.refresh();
        Ok(())
    }

    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.edges.windows(2).map(|w| w[1] - w[0])
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1]))
    }

    /// `Σ density · width`, 1 for any non-empty histogram.
    pub fn integral(&self) -> f64 {
        self.density.iter().zip(self.widths()).map(|(d, w)| d * w).sum()
    }

    /// Build a histogram from given densities on given edges (count 0).
    pub fn from_density(edges: Vec<f64>, density: Vec<f64>) -> Result<Self, StatsError> {
        if edges.len() != density.len() + 1 || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(StatsError::InvalidArgument("edges must be strictly increasing, one more than bins".into()));
        }
        let n = density.len();
        Ok(Self { edges, counts: vec![0; n], density, count: 0 })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("left_edge,right_edge,density\n");
        for i in 0..self.nbins() {
            let _ = writeln!(s, "{:e},{:e},{:e}", self.edges[i], self.edges[i + 1], self.density[i]);
        }
        s
    }
}

fn check_edges(p: &Histogram, q: &Histogram) -> Result<(), StatsError> {
    if p.same_edges(q) {
        Ok(())
    } else {
        Err(StatsError::EdgeMismatch)
    }
}

/// `Σ p log(p / max(q, ε)) · width`; bins with `p = 0` contribute nothing.
pub fn kl_divergence(p: &Histogram, q: &Histogram) -> Result<f64, StatsError> {
    check_edges(p, q)?;
    Ok(p.density
        .iter()
        .zip(&q.density)
        .zip(p.widths())
        .filter(|((pi, _), _)| **pi > 0.0)
        .map(|((pi, qi), w)| pi * (pi / qi.max(LOG_FLOOR)).ln() * w)
        .sum())
}

/// `Σ |log max(p, ε) − log max(q, ε)| · width` over bins where either
/// density exceeds the floor.
pub fn l1_logpdf(p: &Histogram, q: &Histogram) -> Result<f64, StatsError> {
    check_edges(p, q)?;
    Ok(p.density
        .iter()
        .zip(&q.density)
        .zip(p.widths())
        .filter(|((pi, qi), _)| **pi > LOG_FLOOR || **qi > LOG_FLOOR)
        .map(|((pi, qi), w)| (pi.max(LOG_FLOOR).ln() - qi.max(LOG_FLOOR).ln()).abs() * w)
        .sum())
}
