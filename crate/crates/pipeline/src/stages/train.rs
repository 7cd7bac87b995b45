use qgdebias_core::nets::{count_params, train as train_net, write_loss_history, write_model, Architecture, Model, NetError};
use qgdebias_core::nudging::TrainingSet;
use qgdebias_core::par;

use crate::config::ExperimentConfig;
use crate::layout::{require, Layout};
use crate::manifest::{StageRun, StageStatus};
use crate::seeds::{derive_seed, member_role};
use crate::PipelineError;

/// Seed of ensemble member `member`; shared by `train` and `sweep`.
pub fn member_seed(cfg: &ExperimentConfig, arch: Architecture, member: usize) -> u64 {
    derive_seed(cfg.seed, &member_role("train", arch.name(), member))
}

pub(crate) fn load_training_set(cfg: &ExperimentConfig) -> Result<TrainingSet, PipelineError> {
    let layout = Layout::new(cfg.out_dir()?);
    let dir = layout.training_set();
    require(&[dir.join(qgdebias_core::nudging::METADATA_FILE)], "run `nudge` first")?;
    let set = TrainingSet::load(&dir)?;
    if set.u.grid != cfg.coarse_grid() {
        return Err(PipelineError::Other(format!(
            "training set is on a {}² grid, config says {}²",
            set.u.grid.nx(),
            cfg.grid.coarse_nx
        )));
    }
    Ok(set)
}

/// Train `nets.ensemble` members per architecture, all members in parallel.
/// A diverged member keeps its partial loss history and has no model file;
/// the stage then fails.
pub fn train(cfg: &ExperimentConfig, archs: &[Architecture]) -> Result<(), PipelineError> {
    let set = load_training_set(cfg)?;
    let mut runs = Vec::new();
    for arch in archs {
        let run = StageRun::begin(cfg, &format!("train/{arch}"))?;
        runs.push(run);
    }
    let layout = runs[0].layout.clone();
    let jobs: Vec<(Architecture, usize)> =
        archs.iter().flat_map(|&a| (0..cfg.nets.ensemble).map(move |m| (a, m))).collect();

    let results = par::map_slice(&jobs, |&(arch, m)| -> Result<Option<usize>, PipelineError> {
        let mut nc = cfg.net_config(arch);
        nc.seed = member_seed(cfg, arch, m);
        let model_path = layout.model(arch, m);
        if model_path.exists() {
            std::fs::remove_file(&model_path)?;
        }
        match train_net(nc, &set) {
            Ok(out) => {
                write_model(&model_path, &Model::new(out.params, set.norm))?;
                write_loss_history(layout.loss_history(arch, m), &out.history)?;
                Ok(None)
            }
            Err(NetError::Diverged { epoch, history }) => {
                write_loss_history(layout.loss_history(arch, m), &history)?;
                Ok(Some(epoch))
            }
            Err(e) => Err(e.into()),
        }
    });

    let mut failed = Vec::new();
    for (run, arch) in runs.iter_mut().zip(archs) {
        run.note("parameters", count_params(&cfg.net_config(*arch)));
        run.note("members", cfg.nets.ensemble);
    }
    let mut first_err = None;
    for (&(arch, m), res) in jobs.iter().zip(results) {
        let run = &mut runs[archs.iter().position(|a| *a == arch).unwrap()];
        match res {
            Ok(None) => {
                run.output(&layout.model(arch, m))?;
                run.output(&layout.loss_history(arch, m))?;
            }
            Ok(Some(epoch)) => {
                run.output(&layout.loss_history(arch, m))?;
                run.note(&format!("member-{m:02}"), format!("diverged at epoch {epoch}"));
                failed.push((arch, format!("{arch} member {m} (epoch {epoch})")));
            }
            Err(e) => {
                run.note(&format!("member-{m:02}"), &e);
                failed.push((arch, e.to_string()));
                first_err.get_or_insert(e);
            }
        }
    }
    for (run, arch) in runs.into_iter().zip(archs) {
        let ok = !failed.iter().any(|(a, _)| a == arch);
        run.finish(if ok { StageStatus::Complete } else { StageStatus::Failed })?;
    }
    if let Some(e) = first_err {
        return Err(e);
    }
    if !failed.is_empty() {
        let list: Vec<_> = failed.into_iter().map(|(_, m)| m).collect();
        return Err(PipelineError::Numerical(format!("training diverged: {}", list.join(", "))));
    }
    Ok(())
}
