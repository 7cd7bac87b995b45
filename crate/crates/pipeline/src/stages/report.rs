//! Statistics of RD, CR and every architecture's ensemble, written as CSVs.
//!
//! All pdfs of one layer share edges: the padded range of RD and CR, with
//! corrected values outside it counted in the edge bins. Every other
//! threshold is fixed by RD.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use qgdebias_core::nets::{count_params, ensemble_mean, ensemble_variance, Architecture};
use qgdebias_core::par;
use qgdebias_core::spectral_qg::{read_trajectory, write_atomic, Trajectory, LAYERS};
use qgdebias_core::stats::{
    energy_gamma, exceedance_area, excursion_stats_field, fourier_cross_correlation, kl_divergence, l1_logpdf,
    layer_series, normalized_variance_field, padded_range, psd, regional_pdfs, zonal_average_field, Histogram,
    StatsError,
};

use crate::config::{ExperimentConfig, ReportConfig};
use crate::layout::{require, Layout};
use crate::manifest::{StageRun, StageStatus};
use crate::PipelineError;

pub const LAYER_NAMES: [&str; LAYERS] = ["psi1", "psi2"];

/// Binning, thresholds and axes shared by every source.
#[derive(Debug, Clone)]
pub struct ReportContext {
    pub bins: usize,
    pub ranges: [(f64, f64); LAYERS],
    pub sigmas: Vec<f64>,
    pub exceedance: [Vec<f64>; LAYERS],
    pub levels: Vec<f64>,
    pub excursion: [Vec<f64>; LAYERS],
    pub gamma_window: f64,
    pub modes: Vec<usize>,
    pub max_lag: usize,
    pub sample_every: f64,
    pub freqs: Option<Vec<f64>>,
}

/// Turn "record too short for this estimator" into `None`.
fn optional<T>(r: Result<T, StatsError>) -> Result<Option<T>, PipelineError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(StatsError::TooFewSamples { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Padded range of both trajectories, per layer.
pub fn reference_ranges(rd: &Trajectory, cr: &Trajectory) -> Result<[(f64, f64); LAYERS], PipelineError> {
    let mut out = [(0.0, 0.0); LAYERS];
    for (j, r) in out.iter_mut().enumerate() {
        let a = layer_series(rd, j)?;
        let b = layer_series(cr, j)?;
        *r = padded_range(a.iter().chain(&b))?;
    }
    Ok(out)
}

impl ReportContext {
    pub fn new(rd: &Trajectory, cr: &Trajectory, rc: &ReportConfig) -> Result<Self, PipelineError> {
        if !rd.same_shape(cr) {
            return Err(PipelineError::Other("RD and CR test runs differ in shape".into()));
        }
        let ranges = reference_ranges(rd, cr)?;
        let se = rd.sample_every;
        let mut exceedance: [Vec<f64>; LAYERS] = Default::default();
        let mut excursion: [Vec<f64>; LAYERS] = Default::default();
        for j in 0..LAYERS {
            let s = layer_series(rd, j)?;
            let m = mean(&s);
            let std = (s.iter().map(|v| (v - m).powi(2)).sum::<f64>() / s.len() as f64).sqrt();
            exceedance[j] = rc.exceedance_sigmas.iter().map(|c| c * std).collect();
            let zonal = zonal_average_field(rd, j)?;
            if let Some(g) = optional(energy_gamma(&zonal, rd.grid.nx(), se, rc.gamma_window))? {
                let gm = mean(&g);
                excursion[j] = rc.excursion_levels.iter().map(|l| l * gm).filter(|c| *c > 0.0).collect();
            }
        }
        let freqs = optional(psd(rd, 0))?.map(|p| p.freqs);
        Ok(Self {
            bins: rc.bins,
            ranges,
            sigmas: rc.exceedance_sigmas.clone(),
            exceedance,
            levels: rc.excursion_levels.clone(),
            excursion,
            gamma_window: rc.gamma_window,
            modes: rc.modes.clone(),
            max_lag: ((rc.max_lag / se).round() as usize).min(rd.len().saturating_sub(1)),
            sample_every: se,
            freqs,
        })
    }

    pub fn edges(&self, layer: usize) -> Vec<f64> {
        Histogram::empty(self.bins, self.ranges[layer].0, self.ranges[layer].1).expect("valid range").edges
    }
}

/// Every diagnostic of one trajectory, keyed `"<table>/<layer>[/<part>]"`.
pub type Diagnostics = BTreeMap<String, Vec<f64>>;

/// Global pdf of one layer on the shared edges.
pub fn global_pdf(traj: &Trajectory, layer: usize, ctx: &ReportContext) -> Result<Histogram, PipelineError> {
    let (lo, hi) = ctx.ranges[layer];
    let mut h = Histogram::empty(ctx.bins, lo, hi)?;
    for t in 0..traj.len() {
        h.add_samples(traj.layer(t, layer));
    }
    Ok(h)
}

pub fn diagnostics(traj: &Trajectory, ctx: &ReportContext) -> Result<Diagnostics, PipelineError> {
    let mut d = Diagnostics::new();
    let nx = traj.grid.nx();
    for (j, name) in LAYER_NAMES.iter().enumerate() {
        d.insert(format!("pdf/{name}"), global_pdf(traj, j, ctx)?.density);
        if let Some(p) = optional(psd(traj, j))? {
            d.insert(format!("psd/{name}"), p.power);
        }
        if traj.len() >= 2 {
            let mut acf = Vec::new();
            for &k in &ctx.modes {
                acf.extend(fourier_cross_correlation(traj, j, k as i64, k as i64, ctx.max_lag)?);
            }
            d.insert(format!("acf/{name}"), acf);
        }
        let exc = ctx.exceedance[j]
            .iter()
            .map(|&c| exceedance_area(traj, j, c).map(|a| mean(&a)))
            .collect::<Result<Vec<_>, _>>()?;
        d.insert(format!("exceedance/{name}"), exc);
        let zonal = zonal_average_field(traj, j)?;
        if let Some(g) = optional(energy_gamma(&zonal, nx, traj.sample_every, ctx.gamma_window))? {
            let mut count = Vec::new();
            let mut dur = Vec::new();
            for &c in &ctx.excursion[j] {
                let r = excursion_stats_field(&g, nx, traj.sample_every, c)?;
                count.push(r.count as f64);
                dur.push(r.mean.unwrap_or(f64::NAN));
            }
            d.insert(format!("excursion_count/{name}"), count);
            d.insert(format!("excursion_duration/{name}"), dur);
        }
        for (r, h) in regional_pdfs(traj, j, ctx.bins, Some(ctx.ranges[j]))?.into_iter().enumerate() {
            d.insert(format!("regional/{name}/r{r}"), h.density);
        }
        if traj.len() >= 2 {
            if let Ok(v) = normalized_variance_field(traj, j) {
                d.insert(format!("nvar/{name}"), v);
            }
        }
    }
    Ok(d)
}

/// Element-wise ensemble mean and unbiased variance, skipping non-finite
/// member values (an observable some members never produce). Entries with
/// no finite value are NaN, as is the variance of fewer than two.
pub fn aggregate(members: &[Diagnostics]) -> Result<(Diagnostics, Diagnostics), PipelineError> {
    let first = members.first().ok_or_else(|| PipelineError::Other("empty ensemble".into()))?;
    let mut mean_d = Diagnostics::new();
    let mut var_d = Diagnostics::new();
    for (key, v0) in first {
        let mut m = Vec::with_capacity(v0.len());
        let mut s = Vec::with_capacity(v0.len());
        for i in 0..v0.len() {
            let vals: Vec<f64> = members
                .iter()
                .filter_map(|d| d.get(key).and_then(|c| c.get(i)).copied())
                .filter(|v| v.is_finite())
                .collect();
            m.push(ensemble_mean(&vals).unwrap_or(f64::NAN));
            s.push(ensemble_variance(&vals).unwrap_or(f64::NAN));
        }
        mean_d.insert(key.clone(), m);
        var_d.insert(key.clone(), s);
    }
    Ok((mean_d, var_d))
}

/// `(D_KL(p‖q), L1(p‖q))` of two densities on the same edges.
pub fn compare(edges: &[f64], p: &[f64], q: &[f64]) -> Result<(f64, f64), PipelineError> {
    let p = Histogram::from_density(edges.to_vec(), p.to_vec())?;
    let q = Histogram::from_density(edges.to_vec(), q.to_vec())?;
    Ok((kl_divergence(&p, &q)?, l1_logpdf(&p, &q)?))
}

/// One named source in the output tables.
pub struct Source {
    pub name: String,
    pub values: Diagnostics,
    pub variance: Option<Diagnostics>,
    pub parameters: usize,
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v}")
    }
}

fn table(index_header: &str, index: &[String], key: &str, sources: &[Source]) -> Option<String> {
    if !sources.iter().all(|s| s.values.contains_key(key)) {
        return None;
    }
    let mut out = String::from(index_header);
    for s in sources {
        let _ = write!(out, ",{}", s.name);
        if s.variance.is_some() {
            let _ = write!(out, ",{}_var", s.name);
        }
    }
    out.push('\n');
    for (i, idx) in index.iter().enumerate() {
        out.push_str(idx);
        for s in sources {
            let _ = write!(out, ",{}", fmt(s.values[key][i]));
            if let Some(v) = &s.variance {
                let _ = write!(out, ",{}", fmt(v[key][i]));
            }
        }
        out.push('\n');
    }
    Some(out)
}

/// Global pdf metrics of every source against RD, per layer.
pub fn metrics(ctx: &ReportContext, rd: &Diagnostics, sources: &[Source]) -> Result<Vec<(String, usize, f64, f64)>, PipelineError> {
    let mut rows = Vec::new();
    for s in sources {
        for (j, name) in LAYER_NAMES.iter().enumerate() {
            let key = format!("pdf/{name}");
            let (kl, l1) = compare(&ctx.edges(j), &rd[&key], &s.values[&key])?;
            rows.push((s.name.clone(), j, kl, l1));
        }
    }
    Ok(rows)
}

/// Summary rows `(model, parameters, mean D_KL, mean L1)`, layer-averaged.
pub fn summarize(rows: &[(String, usize, f64, f64)], sources: &[Source]) -> Vec<(String, usize, f64, f64)> {
    sources
        .iter()
        .filter(|s| s.name != "RD")
        .map(|s| {
            let mine: Vec<_> = rows.iter().filter(|r| r.0 == s.name).collect();
            let k = mine.len() as f64;
            (
                s.name.clone(),
                s.parameters,
                mine.iter().map(|r| r.2).sum::<f64>() / k,
                mine.iter().map(|r| r.3).sum::<f64>() / k,
            )
        })
        .collect()
}

fn load_members(layout: &Layout, arch: Architecture, n: usize, ctx: &ReportContext) -> Result<Vec<Diagnostics>, PipelineError> {
    let idx: Vec<usize> = (0..n).collect();
    par::map_slice(&idx, |&m| {
        let traj = read_trajectory(layout.corrected(arch, m))?;
        diagnostics(&traj, ctx)
    })
    .into_iter()
    .collect()
}

fn write(run: &mut StageRun, dir: &Path, name: &str, text: &str) -> Result<(), PipelineError> {
    let p = dir.join(name);
    write_atomic(&p, text.as_bytes())?;
    run.output(&p)
}

/// Summary table plus per-diagnostic CSVs under `report/`.
pub fn report(cfg: &ExperimentConfig, archs: &[Architecture]) -> Result<Vec<(String, usize, f64, f64)>, PipelineError> {
    let layout = Layout::new(cfg.out_dir()?);
    require(&[layout.rd_test(), layout.cr_test()], "run `simulate` first")?;
    let corrected: Vec<_> =
        archs.iter().flat_map(|&a| (0..cfg.nets.ensemble).map(move |m| (a, m))).map(|(a, m)| layout.corrected(a, m)).collect();
    require(&corrected, "run `correct` first")?;
    let mut run = StageRun::begin(cfg, "report")?;
    let dir = layout.report_dir();

    let rd = read_trajectory(layout.rd_test())?;
    let cr = read_trajectory(layout.cr_test())?;
    let ctx = ReportContext::new(&rd, &cr, &cfg.report)?;
    let (rd_d, cr_d) = par::join(|| diagnostics(&rd, &ctx), || diagnostics(&cr, &ctx));
    let (rd_d, cr_d) = (rd_d?, cr_d?);
    drop((rd, cr));

    let mut sources = vec![
        Source { name: "RD".into(), values: rd_d.clone(), variance: None, parameters: 0 },
        Source { name: "CR".into(), values: cr_d, variance: None, parameters: 0 },
    ];
    for &arch in archs {
        let members = load_members(&layout, arch, cfg.nets.ensemble, &ctx)?;
        let (m, v) = aggregate(&members)?;
        sources.push(Source {
            name: arch.label().into(),
            values: m,
            variance: Some(v),
            parameters: count_params(&cfg.net_config(arch)),
        });
    }

    for (j, name) in LAYER_NAMES.iter().enumerate() {
        let edges = ctx.edges(j);
        let idx: Vec<String> = edges.windows(2).map(|w| format!("{},{}", w[0], w[1])).collect();
        if let Some(t) = table("left_edge,right_edge", &idx, &format!("pdf/{name}"), &sources) {
            write(&mut run, &dir, &format!("pdf_{name}.csv"), &t)?;
        }
        if let Some(f) = &ctx.freqs {
            let idx: Vec<String> = f.iter().map(|v| format!("{v}")).collect();
            if let Some(t) = table("freq", &idx, &format!("psd/{name}"), &sources) {
                write(&mut run, &dir, &format!("psd_{name}.csv"), &t)?;
            }
        }
        let idx: Vec<String> = ctx
            .modes
            .iter()
            .flat_map(|k| (0..=ctx.max_lag).map(move |l| format!("{k},{}", l as f64 * ctx.sample_every)))
            .collect();
        if let Some(t) = table("mode,lag", &idx, &format!("acf/{name}"), &sources) {
            write(&mut run, &dir, &format!("acf_{name}.csv"), &t)?;
        }
        let idx: Vec<String> = ctx.sigmas.iter().zip(&ctx.exceedance[j]).map(|(s, c)| format!("{s},{c}")).collect();
        if let Some(t) = table("c_sigma,c", &idx, &format!("exceedance/{name}"), &sources) {
            write(&mut run, &dir, &format!("exceedance_{name}.csv"), &t)?;
        }
        let idx: Vec<String> = ctx.levels.iter().zip(&ctx.excursion[j]).map(|(l, c)| format!("{l},{c}")).collect();
        for what in ["excursion_count", "excursion_duration"] {
            if let Some(t) = table("level,threshold", &idx, &format!("{what}/{name}"), &sources) {
                write(&mut run, &dir, &format!("{what}_{name}.csv"), &t)?;
            }
        }
        let nx = cfg.grid.coarse_nx;
        let idx: Vec<String> = (0..nx * nx).map(|p| format!("{},{}", p % nx, p / nx)).collect();
        if let Some(t) = table("x,y", &idx, &format!("nvar/{name}"), &sources) {
            write(&mut run, &dir, &format!("nvar_{name}.csv"), &t)?;
        }
    }

    let mut regional = String::from("source,layer,region,kl,l1\n");
    for s in &sources {
        for (j, name) in LAYER_NAMES.iter().enumerate() {
            for r in 0..9 {
                let key = format!("regional/{name}/r{r}");
                let (kl, l1) = compare(&ctx.edges(j), &rd_d[&key], &s.values[&key])?;
                let _ = writeln!(regional, "{},{name},{r},{kl},{l1}", s.name);
            }
        }
    }
    write(&mut run, &dir, "regional_metrics.csv", &regional)?;

    let rows = metrics(&ctx, &rd_d, &sources)?;
    let mut text = String::from("source,layer,kl,l1\n");
    for (s, j, kl, l1) in &rows {
        let _ = writeln!(text, "{s},{},{kl},{l1}", LAYER_NAMES[*j]);
    }
    write(&mut run, &dir, "metrics.csv", &text)?;

    let summary = summarize(&rows, &sources);
    let mut csv = String::from("model,trainable_parameters,mean_DKL,mean_L1\n");
    let mut txt = format!("{:<10} {:>22} {:>12} {:>12}\n", "Model", "Trainable parameters", "mean D_KL", "mean L1");
    for (name, p, kl, l1) in &summary {
        let _ = writeln!(csv, "{name},{p},{kl},{l1}");
        let p = if *p == 0 { "-".to_string() } else { p.to_string() };
        let _ = writeln!(txt, "{name:<10} {p:>22} {kl:>12.4e} {l1:>12.4e}");
    }
    write(&mut run, &dir, "summary.csv", &csv)?;
    write(&mut run, &dir, "summary.txt", &txt)?;
    run.note("sources", sources.iter().map(|s| s.name.as_str()).collect::<Vec<_>>().join(" "));
    run.finish(StageStatus::Complete)?;
    Ok(summary)
}
