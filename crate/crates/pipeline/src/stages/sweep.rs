//! Ensemble-size × training-length error surface.
//!
//! Each architecture trains `max(ensemble_sizes)` members once, for
//! `max(epochs)` epochs, saving a checkpoint at every requested epoch count.
//! A checkpoint at epoch `e` is the network `train` would produce with
//! `epochs = e`. The cell `(k, e)` aggregates the first `k` members at `e`.

use std::fmt::Write as _;

use qgdebias_core::nets::{correct_trajectory, ensemble_mean_curve, train_with, write_model, Architecture, Model};
use qgdebias_core::par;
use qgdebias_core::spectral_qg::{read_trajectory, write_atomic, Trajectory, LAYERS};
use qgdebias_core::stats::Histogram;

use crate::config::ExperimentConfig;
use crate::layout::{require, Layout};
use crate::manifest::{StageRun, StageStatus};
use crate::stages::correct::corrector_seed;
use crate::stages::report::{compare, reference_ranges};
use crate::stages::train::{load_training_set, member_seed};
use crate::PipelineError;

/// One cell of a surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub arch: Architecture,
    pub ensemble: usize,
    pub epochs: usize,
    pub mean_kl: f64,
    pub mean_l1: f64,
}

/// Member pdfs of both layers on the shared edges.
fn member_pdfs(model: &Model, seed: u64, cr: &Trajectory, ranges: &[(f64, f64); LAYERS], bins: usize) -> Result<Vec<Vec<f64>>, PipelineError> {
    let out = correct_trajectory(model, cr, seed)?;
    (0..LAYERS)
        .map(|j| {
            let mut h = Histogram::empty(bins, ranges[j].0, ranges[j].1)?;
            for t in 0..out.len() {
                h.add_samples(out.layer(t, j));
            }
            Ok(h.density)
        })
        .collect()
}

/// Layer-averaged metrics of the mean of `pdfs` (member → layer → density).
pub fn cell_metrics(edges: &[Vec<f64>], rd: &[Vec<f64>], pdfs: &[&Vec<Vec<f64>>]) -> Result<(f64, f64), PipelineError> {
    let (mut kl, mut l1) = (0.0, 0.0);
    for j in 0..LAYERS {
        let curves: Vec<Vec<f64>> = pdfs.iter().map(|p| p[j].clone()).collect();
        let mean = ensemble_mean_curve(&curves)?;
        let (a, b) = compare(&edges[j], &rd[j], &mean)?;
        kl += a;
        l1 += b;
    }
    Ok((kl / LAYERS as f64, l1 / LAYERS as f64))
}

pub fn surface_csv(cells: &[SweepCell]) -> String {
    let mut s = String::from("architecture,N_e,epochs,mean_DKL,mean_L1\n");
    for c in cells {
        let _ = writeln!(s, "{},{},{},{},{}", c.arch, c.ensemble, c.epochs, c.mean_kl, c.mean_l1);
    }
    s
}

pub fn sweep(cfg: &ExperimentConfig, archs: &[Architecture]) -> Result<Vec<SweepCell>, PipelineError> {
    let set = load_training_set(cfg)?;
    let layout = Layout::new(cfg.out_dir()?);
    require(&[layout.rd_test(), layout.cr_test()], "run `simulate` first")?;
    let rd = read_trajectory(layout.rd_test())?;
    let cr = read_trajectory(layout.cr_test())?;
    let ranges = reference_ranges(&rd, &cr)?;
    let bins = cfg.report.bins;
    let edges: Vec<Vec<f64>> = ranges.iter().map(|r| Histogram::empty(bins, r.0, r.1).map(|h| h.edges)).collect::<Result<_, _>>()?;
    let rd_pdf: Vec<Vec<f64>> = (0..LAYERS)
        .map(|j| {
            let mut h = Histogram::empty(bins, ranges[j].0, ranges[j].1)?;
            for t in 0..rd.len() {
                h.add_samples(rd.layer(t, j));
            }
            Ok(h.density)
        })
        .collect::<Result<_, PipelineError>>()?;

    let sizes = &cfg.sweep.ensemble_sizes;
    let epochs = &cfg.sweep.epochs;
    let pool = *sizes.last().unwrap();
    let longest = *epochs.last().unwrap();
    let mut all = Vec::new();
    for &arch in archs {
        let mut run = StageRun::begin(cfg, &format!("sweep/{arch}"))?;
        let members: Vec<usize> = (0..pool).collect();
        // member → epoch index → layer → density
        let trained = par::map_slice(&members, |&m| -> Result<Vec<Vec<Vec<f64>>>, PipelineError> {
            let mut nc = cfg.net_config(arch);
            nc.epochs = longest;
            nc.seed = member_seed(cfg, arch, m);
            let mut saved = Vec::new();
            let mut io_err = None;
            let res = train_with(nc, &set, |e, params| {
                if epochs.contains(&e) && io_err.is_none() {
                    let model = Model::new(params.clone(), set.norm);
                    let path = layout.sweep_checkpoint(arch, m, e);
                    let r = std::fs::create_dir_all(path.parent().unwrap())
                        .map_err(PipelineError::from)
                        .and_then(|_| write_model(&path, &model).map_err(PipelineError::from));
                    match r {
                        Ok(()) => saved.push(model),
                        Err(err) => io_err = Some(err),
                    }
                }
            });
            if let Some(e) = io_err {
                return Err(e);
            }
            res?;
            saved.iter().map(|model| member_pdfs(model, corrector_seed(cfg, arch, m), &cr, &ranges, bins)).collect()
        });
        let mut pdfs = Vec::with_capacity(pool);
        for (m, r) in trained.into_iter().enumerate() {
            match r {
                Ok(p) => pdfs.push(p),
                Err(e) => {
                    run.note(&format!("member-{m:02}"), &e);
                    run.finish(StageStatus::Failed)?;
                    return Err(e);
                }
            }
        }
        let mut cells = Vec::new();
        for &k in sizes {
            for (ei, &e) in epochs.iter().enumerate() {
                let chosen: Vec<&Vec<Vec<f64>>> = pdfs[..k].iter().map(|p| &p[ei]).collect();
                let (mean_kl, mean_l1) = cell_metrics(&edges, &rd_pdf, &chosen)?;
                cells.push(SweepCell { arch, ensemble: k, epochs: e, mean_kl, mean_l1 });
            }
        }
        let path = layout.sweep_surface(arch);
        write_atomic(&path, surface_csv(&cells).as_bytes())?;
        run.output(&path)?;
        for m in 0..pool {
            for &e in epochs {
                run.output(&layout.sweep_checkpoint(arch, m, e))?;
            }
        }
        run.finish(StageStatus::Complete)?;
        all.extend(cells);
    }
    Ok(all)
}
