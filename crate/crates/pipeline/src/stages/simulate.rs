use qgdebias_core::nudging::Projector;
use qgdebias_core::par;
use qgdebias_core::spectral_qg::{
    advance, integrate_with, QgError, QgModel, SpectralState, TrajectoryWriter, LAYERS,
};

use crate::config::ExperimentConfig;
use crate::manifest::{StageRun, StageStatus};
use crate::seeds::derive_seed;
use crate::PipelineError;

/// Snapshot counts written by [`simulate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulateSummary {
    pub train_snapshots: u64,
    pub test_snapshots: u64,
}

/// Sink splitting one run into a training file and a test file. The
/// snapshot at the boundary goes to both.
struct Split {
    boundary: usize,
    train: Option<TrajectoryWriter>,
    test: Option<TrajectoryWriter>,
}

impl Split {
    fn push(&mut self, i: usize, psi: &[f64], project: Option<&mut Projector>) -> Result<(), QgError> {
        if i <= self.boundary {
            self.train.as_mut().expect("open").push(psi)?;
        }
        if i >= self.boundary {
            let w = self.test.as_mut().expect("open");
            match project {
                Some(p) => {
                    let n = psi.len() / LAYERS;
                    let mut out = Vec::with_capacity(w.header().snapshot_len());
                    for layer in psi.chunks(n) {
                        out.extend(p.project(layer).map_err(|e| QgError::Format(e.to_string()))?);
                    }
                    w.push(&out)?;
                }
                None => w.push(psi)?,
            }
        }
        Ok(())
    }

    /// Close both files, keeping whatever was written before a failure.
    fn finish(mut self) -> Result<(u64, u64), QgError> {
        let a = self.train.take().expect("open").finish()?;
        let b = self.test.take().expect("open").finish()?;
        Ok((a, b))
    }
}

/// Free fine (RD) and coarse (CR) runs after spin-up.
///
/// The fine model starts from seeded noise and is spun up; the coarse run
/// starts from the projection of the spun-up fine state, so both runs share
/// the time origin. Training-window files hold `train_horizon / sample_every + 1`
/// snapshots; the test files start at the last training snapshot. The fine
/// test run is stored projected onto the coarse grid.
pub fn simulate(cfg: &ExperimentConfig) -> Result<SimulateSummary, PipelineError> {
    let mut run = StageRun::begin(cfg, "simulate")?;
    let layout = run.layout.clone();
    let (fine, coarse) = (cfg.fine_grid(), cfg.coarse_grid());
    let (pf, pc) = (cfg.fine_params(), cfg.coarse_params());
    let (dtf, dtc) = (cfg.dt_fine(), cfg.dt_coarse());
    let se = cfg.time.sample_every;
    let topo = cfg.topography();
    let topo_text = toml::to_string(&topo).expect("topography serializes");
    qgdebias_core::spectral_qg::write_atomic(layout.topography(), topo_text.as_bytes())?;

    let mut fine_model = QgModel::new(fine, pf, &topo)?;
    let mut coarse_model = QgModel::new(coarse, pc, &topo)?;
    let mut state = fine_model.random_state(derive_seed(cfg.seed, "simulate/fine-init"), cfg.time.init_amplitude)?;
    advance(&mut fine_model, &mut state, cfg.time.spin_up, dtf)?;
    state.time = 0.0;
    let psi0 = fine_model.streamfunction(&state)?;
    let mut projector = Projector::new(fine, coarse)?;
    let mut cpsi0 = Vec::with_capacity(LAYERS * coarse.len());
    for layer in psi0.chunks(fine.len()) {
        cpsi0.extend(projector.project(layer)?);
    }
    let cstate = coarse_model.state_from_streamfunction(&cpsi0, 0.0)?;

    let boundary = (cfg.time.train_horizon / se).round() as usize;
    let horizon = cfg.time.train_horizon + cfg.time.test_horizon;
    let fine_split = Split {
        boundary,
        train: Some(TrajectoryWriter::create(layout.fine_train(), fine, se, dtf, pf)?),
        test: Some(TrajectoryWriter::create(layout.rd_test(), coarse, se, dtf, pf)?),
    };
    let coarse_split = Split {
        boundary,
        train: Some(TrajectoryWriter::create(layout.cr_train(), coarse, se, dtc, pc)?),
        test: Some(TrajectoryWriter::create(layout.cr_test(), coarse, se, dtc, pc)?),
    };

    let run_one = |mut model: QgModel, mut st: SpectralState, dt: f64, mut split: Split, mut proj: Option<Projector>| {
        let res = integrate_with(&mut model, &mut st, horizon, dt, se, |i, psi| split.push(i, psi, proj.as_mut()));
        let counts = split.finish();
        let energy = model.energy_enstrophy(&st).map(|(e, _)| e);
        (res, counts, energy)
    };
    let ((fres, fcounts, fenergy), (cres, ccounts, cenergy)) = par::join(
        || run_one(fine_model, state, dtf, fine_split, Some(projector)),
        || run_one(coarse_model, cstate, dtc, coarse_split, None),
    );
    let (ftrain, ftest) = fcounts?;
    let (ctrain, ctest) = ccounts?;
    for p in [layout.topography(), layout.fine_train(), layout.rd_test(), layout.cr_train(), layout.cr_test()] {
        run.output(&p)?;
    }
    run.note("initial_condition", "seeded noise on the fine grid, spun up; coarse run starts from its projection");
    run.note("fine_snapshots", format!("{ftrain} train, {ftest} test"));
    run.note("coarse_snapshots", format!("{ctrain} train, {ctest} test"));
    if let Err(e) = fres.and(cres) {
        run.note("error", &e);
        run.finish(StageStatus::Failed)?;
        return Err(e.into());
    }
    run.note("final_energy_fine", fenergy?);
    run.note("final_energy_coarse", cenergy?);
    run.finish(StageStatus::Complete)?;
    Ok(SimulateSummary { train_snapshots: ctrain, test_snapshots: ctest })
}
