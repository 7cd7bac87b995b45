use qgdebias_core::nudging::{
    build_training_set, integrate_nudged, project_trajectory, spectral_ratio, NudgeConfig, NudgedModel, TrainingSet,
};
use qgdebias_core::spectral_qg::{read_trajectory, write_trajectory, QgModel};

use crate::config::ExperimentConfig;
use crate::layout::require;
use crate::manifest::{StageRun, StageStatus};
use crate::PipelineError;

/// Nudged coarse run over the training window, spectral correction, and the
/// persisted training set. The nudged run starts from the projected first
/// reference snapshot. `tau_from_cli` only changes what the manifest notes;
/// the value itself is `cfg.nudge.tau`.
pub fn nudge(cfg: &ExperimentConfig, tau_from_cli: bool) -> Result<TrainingSet, PipelineError> {
    let layout = crate::layout::Layout::new(cfg.out_dir()?);
    require(&[layout.fine_train(), layout.cr_train()], "run `simulate` first")?;
    let mut run = StageRun::begin(cfg, "nudge")?;

    let fine = read_trajectory(layout.fine_train())?;
    let v = read_trajectory(layout.cr_train())?;
    let coarse = cfg.coarse_grid();
    if v.grid != coarse || fine.grid != cfg.fine_grid() {
        return Err(PipelineError::Other("stored runs do not match the configured grids".into()));
    }
    let u = project_trajectory(&fine, coarse)?;
    let tau = cfg.nudge.tau;
    let mut model = QgModel::new(coarse, cfg.coarse_params(), &cfg.topography())?;
    let state0 = model.state_from_streamfunction(u.snapshot(0), 0.0)?;
    let mut nudged = NudgedModel::new(model, &u, 0.0, NudgeConfig::new(tau)?)?;
    let v_tau = match integrate_nudged(&mut nudged, &state0, cfg.dt_coarse(), cfg.time.train_horizon) {
        Ok(t) => t,
        Err(partial) => {
            write_trajectory(layout.nudged(), &partial.trajectory)?;
            run.output(&layout.nudged())?;
            run.note("error", &partial.error);
            run.finish(StageStatus::Failed)?;
            return Err(partial.error.into());
        }
    };
    let ratio = spectral_ratio(&v, &v_tau)?;
    let set = build_training_set(&fine, &v, &v_tau, tau)?;

    write_trajectory(layout.nudged(), &v_tau)?;
    ratio.write_csv(&layout.spectral_ratio())?;
    set.save(&layout.training_set())?;
    for p in [layout.nudged(), layout.spectral_ratio()] {
        run.output(&p)?;
    }
    for name in ["u.qgtj", "v.qgtj", "v_tau_corrected.qgtj", qgdebias_core::nudging::METADATA_FILE] {
        run.output(&layout.training_set().join(name))?;
    }
    run.note("tau", tau);
    run.note("tau_source", if tau_from_cli { "command line" } else { "config" });
    run.note("initial_condition", "projected reference snapshot at t = 0");
    run.note("ratio_sha256", &set.ratio_checksum);
    run.finish(StageStatus::Complete)?;
    Ok(set)
}
