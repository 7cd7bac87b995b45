use super::StatsError;

/// Episodes of a series at or above a threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcursionReport {
    pub threshold: f64,
    pub count: usize,
    /// Episode lengths in time units.
    pub durations: Vec<f64>,
    /// `None` when there are no episodes.
    pub mean: Option<f64>,
    /// Unbiased; 0 for a single episode, `None` for none.
    pub std: Option<f64>,
}

impl ExcursionReport {
    fn from_durations(threshold: f64, durations: Vec<f64>) -> Self {
        let n = durations.len();
        let mean = (n > 0).then(|| durations.iter().sum::<f64>() / n as f64);
        let std = mean.map(|m| {
            if n == 1 {
                0.0
            } else {
                (durations.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            }
        });
        Self { threshold, count: n, durations, mean, std }
    }
}

fn runs(series: impl Iterator<Item = f64>, c: f64, out: &mut Vec<usize>) {
    let mut len = 0usize;
    for v in series {
        if v >= c {
            len += 1;
        } else if len > 0 {
            out.push(len);
            len = 0;
        }
    }
    if len > 0 {
        out.push(len);
    }
}

fn check(c: f64, sample_every: f64) -> Result<(), StatsError> {
    if !(c > 0.0) {
        return Err(StatsError::InvalidArgument(format!("threshold {c} must be positive")));
    }
    if !(sample_every > 0.0) {
        return Err(StatsError::InvalidArgument(format!("sample interval {sample_every}")));
    }
    Ok(())
}

/// Maximal runs with `γ ≥ c` in one series.
pub fn excursion_stats(gamma: &[f64], sample_every: f64, c: f64) -> Result<ExcursionReport, StatsError> {
    check(c, sample_every)?;
    if gamma.is_empty() {
        return Err(StatsError::TooFewSamples { needed: 1, found: 0 });
    }
    let mut lens = Vec::new();
    runs(gamma.iter().copied(), c, &mut lens);
    Ok(ExcursionReport::from_durations(c, lens.into_iter().map(|l| l as f64 * sample_every).collect()))
}

/// Runs pooled over all rows of a time-major `T × ny` field, each row scanned
/// along time.
pub fn excursion_stats_field(gamma: &[f64], ny: usize, sample_every: f64, c: f64) -> Result<ExcursionReport, StatsError> {
    check(c, sample_every)?;
    if ny == 0 || gamma.is_empty() || gamma.len() % ny != 0 {
        return Err(StatsError::InvalidArgument("field shape".into()));
    }
    let steps = gamma.len() / ny;
    let mut lens = Vec::new();
    for y in 0..ny {
        runs((0..steps).map(|t| gamma[t * ny + y]), c, &mut lens);
    }
    Ok(ExcursionReport::from_durations(c, lens.into_iter().map(|l| l as f64 * sample_every).collect()))
}
