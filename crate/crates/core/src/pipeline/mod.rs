//! End-to-end driver: synthesize data, reconstruct, measure, write artifacts.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod metrics;
pub mod render;

use std::sync::Arc;
use std::time::Instant;

use crate::adjoint::{sigma_degree, Objective};
use crate::error::Result;
use crate::fem::{FunctionSpace, ScalarField};
use crate::forward::{generate_data, DataSpec, PowerDensity};
use crate::mesh::generate_disk_mesh;
use crate::optimizer::{initial_guess, run_nlcg_with, NlcgConfig, ReconstructionResult};
use crate::phantom::Phantom;

pub use commands::{compare, export_mesh, generate, gradcheck, reconstruct};
pub use config::{resolve, Overrides, RunConfig, PRESETS};
pub use manifest::Manifest;
pub use metrics::Metrics;

/// Synthetic data together with the truth it came from.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub config: RunConfig,
    pub phantom: Phantom,
    pub data: PowerDensity,
}

impl Dataset {
    pub fn space(&self) -> &Arc<FunctionSpace> {
        self.data.space()
    }
}

/// Builds the reconstruction mesh of `cfg` and synthesizes power densities
/// on the finer data mesh.
pub fn synthesize(cfg: &RunConfig) -> Result<Dataset> {
    cfg.validate()?;
    let phantom = cfg.phantom()?;
    let mesh = Arc::new(generate_disk_mesh(cfg.coarse_h)?);
    let space = FunctionSpace::new(mesh, sigma_degree(cfg.nlcg.s)?);
    let spec = DataSpec {
        fine_h: cfg.fine_h,
        noise_level: cfg.noise,
        seed: cfg.seed,
        solver: cfg.nlcg.solver,
    };
    let data = generate_data(|x, y| phantom.eval(x, y), &cfg.bc_set.conditions(), &space, &spec)?;
    Ok(Dataset {
        config: cfg.clone(),
        phantom,
        data,
    })
}

/// A finished reconstruction with its metrics.
#[derive(Debug, Clone)]
pub struct Run {
    pub initial: ScalarField,
    pub result: ReconstructionResult,
    pub metrics: Metrics,
}

/// Reconstructs from `data` and scores the result against `phantom`.
pub fn reconstruct_data(data: &PowerDensity, phantom: &Phantom, nlcg: &NlcgConfig) -> Result<Run> {
    let start = Instant::now();
    let objective = Objective::new(data, nlcg.alpha, nlcg.s, nlcg.sigma_b, nlcg.solver)?;
    let result = run_nlcg_with(&objective, nlcg)?;
    let wall_time = start.elapsed().as_secs_f64();
    let initial = initial_guess(objective.sigma_space(), nlcg);
    let metrics = metrics::compute(
        phantom,
        &result,
        &initial,
        objective.gram(),
        objective.boundary_conditions(),
        nlcg.solver,
        wall_time,
    )?;
    Ok(Run {
        initial,
        result,
        metrics,
    })
}

/// [`synthesize`] followed by [`reconstruct_data`], all in memory.
pub fn run(cfg: &RunConfig) -> Result<(Dataset, Run)> {
    let ds = synthesize(cfg)?;
    let run = reconstruct_data(&ds.data, &ds.phantom, &cfg.nlcg)?;
    Ok((ds, run))
}
