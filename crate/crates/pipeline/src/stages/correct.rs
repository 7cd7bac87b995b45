use std::path::Path;

use qgdebias_core::nets::{read_model, Architecture, Corrector, Model};
use qgdebias_core::par;
use qgdebias_core::spectral_qg::{TrajectoryReader, TrajectoryWriter};

use crate::config::ExperimentConfig;
use crate::layout::{require, Layout};
use crate::manifest::{StageRun, StageStatus};
use crate::seeds::{derive_seed, member_role};
use crate::PipelineError;

/// Sampling seed of a member's corrector; shared by `correct` and `sweep`.
pub fn corrector_seed(cfg: &ExperimentConfig, arch: Architecture, member: usize) -> u64 {
    derive_seed(cfg.seed, &member_role("correct", arch.name(), member))
}

/// Stream `input` through `model` into `output`, one snapshot at a time.
/// Returns the number of snapshots written.
pub fn correct_file(model: &Model, seed: u64, input: &Path, output: &Path) -> Result<u64, PipelineError> {
    let mut reader = TrajectoryReader::open(input)?;
    let h = *reader.header();
    let n = h.snapshot_len();
    let want = model.params.config.input_dim;
    if want != n {
        return Err(PipelineError::Other(format!(
            "model expects {want} values per snapshot, {} holds {n} ({}² grid)",
            input.display(),
            h.grid.nx()
        )));
    }
    let mut writer = TrajectoryWriter::create(output, h.grid, h.sample_every, h.dt, h.params)?;
    let mut corrector = Corrector::new(model, seed);
    let mut snap = vec![0.0; n];
    let mut out = vec![0.0; n];
    while reader.next_into(&mut snap)? {
        corrector.step(&snap, &mut out)?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(PipelineError::Numerical(format!(
                "non-finite corrected value at snapshot {}",
                corrector.steps() - 1
            )));
        }
        writer.push(&out)?;
    }
    Ok(writer.finish()?)
}

/// Correct the free coarse test run with every ensemble member.
pub fn correct(cfg: &ExperimentConfig, archs: &[Architecture]) -> Result<(), PipelineError> {
    let layout = Layout::new(cfg.out_dir()?);
    let input = layout.cr_test();
    require(&[input.clone()], "run `simulate` first")?;
    let jobs: Vec<(Architecture, usize)> =
        archs.iter().flat_map(|&a| (0..cfg.nets.ensemble).map(move |m| (a, m))).collect();
    let models: Vec<_> = jobs.iter().map(|&(a, m)| layout.model(a, m)).collect();
    require(&models, "run `train` first")?;

    let mut runs = Vec::new();
    for arch in archs {
        runs.push(StageRun::begin(cfg, &format!("correct/{arch}"))?);
    }
    let results = par::map_slice(&jobs, |&(arch, m)| -> Result<u64, PipelineError> {
        let model = read_model(layout.model(arch, m))?;
        if model.arch() != arch {
            return Err(PipelineError::Other(format!("{} holds a {} network", layout.model(arch, m).display(), model.arch())));
        }
        let out = layout.corrected(arch, m);
        std::fs::create_dir_all(out.parent().unwrap())?;
        correct_file(&model, corrector_seed(cfg, arch, m), &input, &out)
    });

    let mut first_err = None;
    let mut failed_archs = Vec::new();
    for (&(arch, m), res) in jobs.iter().zip(results) {
        let run = &mut runs[archs.iter().position(|a| *a == arch).unwrap()];
        match res {
            Ok(count) => {
                run.output(&layout.corrected(arch, m))?;
                run.note(&format!("member-{m:02}"), format!("{count} snapshots"));
            }
            Err(e) => {
                run.note(&format!("member-{m:02}"), &e);
                failed_archs.push(arch);
                first_err.get_or_insert(e);
            }
        }
    }
    for (run, arch) in runs.into_iter().zip(archs) {
        let ok = !failed_archs.contains(arch);
        run.finish(if ok { StageStatus::Complete } else { StageStatus::Failed })?;
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
