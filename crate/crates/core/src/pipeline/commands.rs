//! File-producing commands behind the `aetomo` binary.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::adjoint::{finite_difference_check, sigma_degree, Objective};
use crate::error::{Error, Result};
use crate::fem::io::{write_field_csv, write_fields_vtk};
use crate::fem::{FunctionSpace, ScalarField};
use crate::forward::{check_fine_h, PowerDensity};
use crate::mesh::generate_disk_mesh;
use crate::optimizer::{NlcgConfig, Termination, HISTORY_CSV_HEADER};
use crate::phantom::Phantom;
use crate::pipeline::config::{resolve, Overrides, RunConfig};
use crate::pipeline::manifest::{config_hash, sha256_hex, Manifest, ManifestKind, MANIFEST_FILE};
use crate::pipeline::metrics::Metrics;
use crate::pipeline::{reconstruct_data, render, synthesize, Run};

pub const DATA_FILE: &str = "data.txt";
pub const METRICS_FILE: &str = "metrics.json";
pub const HISTORY_FILE: &str = "history.csv";

#[derive(Debug, Clone)]
pub struct GenerateReport {
    pub data_path: PathBuf,
    pub manifest: Manifest,
}

/// Writes `data.txt` and `manifest.json` into `out`.
pub fn generate(cfg: &RunConfig, out: &Path) -> Result<GenerateReport> {
    let ds = synthesize(cfg)?;
    std::fs::create_dir_all(out)?;
    let data_path = out.join(DATA_FILE);
    let mut bytes = Vec::new();
    ds.data.write(&mut bytes)?;
    std::fs::write(&data_path, &bytes)?;
    let h = &ds.data.header;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        kind: ManifestKind::Data,
        config: RunConfig { out: None, ..cfg.clone() },
        config_hash: config_hash(cfg)?,
        coarse_mesh_hash: h.mesh_hash.clone(),
        fine_mesh_hash: h.fine_mesh_hash.clone(),
        coarse_h: h.coarse_h,
        fine_h: h.fine_h,
        noise: h.noise_level,
        seed: h.seed,
        noise_streams: ds.data.fields.len(),
        data_file: DATA_FILE.into(),
        data_sha256: sha256_hex(&bytes),
        nlcg: None,
    };
    manifest.write(out)?;
    Ok(GenerateReport { data_path, manifest })
}

/// Reads a data file, rebuilding its reconstruction mesh from the header.
pub fn load_data(path: &Path) -> Result<PowerDensity> {
    let header = PowerDensity::read_header(path)?;
    check_fine_h(header.fine_h, header.coarse_h).map_err(|_| {
        Error::Config(format!(
            "{} was synthesized at fine_h = {} on a coarse mesh of h = {}; \
             reconstructing from it would commit an inverse crime (need fine_h <= coarse_h/2)",
            path.display(),
            header.fine_h,
            header.coarse_h
        ))
    })?;
    let mesh = Arc::new(generate_disk_mesh(header.coarse_h)?);
    let space = FunctionSpace::new(mesh, header.degree);
    PowerDensity::read(path, &space)
}

/// Configuration for reconstructing from `data_path`: the phantom and data
/// settings come from the manifest beside the data when there is one, the
/// solver settings from `config`/`preset` when given, then the flags.
pub fn reconstruction_config(
    data_path: &Path,
    config: Option<&Path>,
    preset: Option<&str>,
    overrides: &Overrides,
) -> Result<RunConfig> {
    if overrides.noise.is_some() || overrides.seed.is_some() {
        return Err(Error::Config(
            "--noise and --seed set up data synthesis; pass them to `generate`".into(),
        ));
    }
    let explicit = (config.is_some() || preset.is_some())
        .then(|| resolve(config, preset, &Overrides::default()))
        .transpose()?;
    let mut cfg = match (Manifest::beside(data_path)?, explicit) {
        (Some(m), Some(e)) => RunConfig { nlcg: e.nlcg, ..m.config },
        (Some(m), None) => m.config,
        (None, Some(e)) => e,
        (None, None) => {
            return Err(Error::Config(format!(
                "no {MANIFEST_FILE} beside {}; pass --preset or --config naming the phantom",
                data_path.display()
            )))
        }
    };
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone)]
pub struct ReconstructReport {
    pub out: PathBuf,
    pub run: Run,
}

/// Reconstructs from the data file and writes σ (CSV, VTK, PNG), the
/// iteration history, metrics and a manifest into `out`. Outputs are
/// staged and removed again if anything fails, including a line-search
/// failure of the optimizer.
pub fn reconstruct(data_path: &Path, cfg: &RunConfig, out: &Path) -> Result<ReconstructReport> {
    if let Some(m) = Manifest::beside(data_path)? {
        if m.fine_h >= m.coarse_h {
            return Err(Error::Config(format!(
                "data manifest records fine_h = coarse_h = {}; regenerate with a finer data mesh",
                m.coarse_h
            )));
        }
    }
    let data = load_data(data_path)?;
    let expected = sigma_degree(cfg.nlcg.s)?;
    if data.header.degree != expected {
        return Err(Error::Config(format!(
            "data carries {:?} fields but s = {} reconstructs in {:?}; regenerate the data with --s {}",
            data.header.degree,
            cfg.nlcg.s,
            expected,
            cfg.nlcg.s
        )));
    }
    let phantom = cfg.phantom()?;
    let run = reconstruct_data(&data, &phantom, &cfg.nlcg)?;

    let staging = staging_dir(out)?;
    let written = write_outputs(&staging, data_path, cfg, &data, &phantom, &run).and_then(|()| {
        if run.result.termination == Termination::LineSearchFailure {
            Err(Error::LineSearch { backtracks: cfg.nlcg.max_backtracks })
        } else {
            Ok(())
        }
    });
    if let Err(e) = written {
        let _ = std::fs::remove_dir_all(&staging);
        return Err(e);
    }
    if out.exists() {
        std::fs::remove_dir_all(out)?;
    }
    std::fs::rename(&staging, out)?;
    Ok(ReconstructReport { out: out.to_path_buf(), run })
}

fn staging_dir(out: &Path) -> Result<PathBuf> {
    let name = out
        .file_name()
        .ok_or_else(|| Error::Config(format!("output path {} has no final component", out.display())))?;
    let parent = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(parent)?;
    let staging = parent.join(format!(".{}.partial-{}", name.to_string_lossy(), std::process::id()));
    if staging.exists() {
        std::fs::remove_dir_all(&staging)?;
    }
    std::fs::create_dir(&staging)?;
    Ok(staging)
}

fn write_outputs(
    dir: &Path,
    data_path: &Path,
    cfg: &RunConfig,
    data: &PowerDensity,
    phantom: &Phantom,
    run: &Run,
) -> Result<()> {
    let sigma = &run.result.sigma;
    let space = sigma.space();
    let mut csv = Vec::new();
    write_field_csv(sigma, &mut csv)?;
    std::fs::write(dir.join("sigma.csv"), csv)?;

    let truth = phantom.interpolate(space);
    let mut vtk = Vec::new();
    write_fields_vtk(space, &[("sigma", sigma), ("sigma_true", &truth)], &mut vtk)?;
    std::fs::write(dir.join("sigma.vtk"), vtk)?;

    render::write_png_file(sigma, &dir.join("sigma.png"))?;

    let mut hist = String::new();
    writeln!(hist, "{HISTORY_CSV_HEADER}").unwrap();
    for r in &run.result.history {
        writeln!(hist, "{}", r.csv_row()).unwrap();
    }
    std::fs::write(dir.join(HISTORY_FILE), hist)?;

    std::fs::write(dir.join(METRICS_FILE), serde_json::to_string_pretty(&run.metrics)? + "\n")?;

    let bytes = std::fs::read(data_path)?;
    let h = &data.header;
    Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        kind: ManifestKind::Reconstruction,
        config: RunConfig { out: None, ..cfg.clone() },
        config_hash: config_hash(cfg)?,
        coarse_mesh_hash: h.mesh_hash.clone(),
        fine_mesh_hash: h.fine_mesh_hash.clone(),
        coarse_h: h.coarse_h,
        fine_h: h.fine_h,
        noise: h.noise_level,
        seed: h.seed,
        noise_streams: data.fields.len(),
        data_file: data_path.to_string_lossy().into_owned(),
        data_sha256: sha256_hex(&bytes),
        nlcg: Some(cfg.nlcg),
    }
    .write(dir)
}

/// One row of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub run: String,
    pub phantom: String,
    pub bc_set: String,
    pub s: u8,
    pub alpha: f64,
    pub noise: f64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
}

const COLUMNS: [&str; 13] = [
    "run",
    "phantom",
    "bc_set",
    "s",
    "alpha",
    "noise",
    "rel_l2_error",
    "max_in_inclusion",
    "edge_sharpness",
    "min_det",
    "iterations",
    "termination",
    "wall_time",
];

impl ComparisonRow {
    fn cells(&self) -> Vec<String> {
        let m = &self.metrics;
        vec![
            self.run.clone(),
            self.phantom.clone(),
            self.bc_set.clone(),
            self.s.to_string(),
            format!("{}", self.alpha),
            format!("{}", self.noise),
            format!("{:.6}", m.rel_l2_error),
            m.max_in_inclusion.map_or("-".into(), |v| format!("{v:.6}")),
            format!("{:.6}", m.edge_sharpness),
            format!("{:.6e}", m.min_det),
            m.iterations.to_string(),
            serde_json::to_value(m.termination)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default(),
            format!("{:.3}", m.wall_time),
        ]
    }
}

impl Comparison {
    pub fn to_csv(&self) -> String {
        let mut s = COLUMNS.join(",") + "\n";
        for r in &self.rows {
            s += &(r.cells().join(",") + "\n");
        }
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!("| {} |\n", COLUMNS.join(" | "));
        s += &format!("|{}\n", "---|".repeat(COLUMNS.len()));
        for r in &self.rows {
            s += &format!("| {} |\n", r.cells().join(" | "));
        }
        s
    }
}

/// Collects the metrics of at least two result directories.
pub fn compare(dirs: &[PathBuf]) -> Result<Comparison> {
    if dirs.len() < 2 {
        return Err(Error::Config(format!("compare needs at least 2 result directories, got {}", dirs.len())));
    }
    let rows = dirs
        .iter()
        .map(|dir| {
            let path = dir.join(METRICS_FILE);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::Config(format!("missing metrics file {}: {e}", path.display())))?;
            let metrics: Metrics =
                serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.to_string()))?;
            let manifest = Manifest::read(&dir.join(MANIFEST_FILE)).ok();
            let (phantom, bc_set, s, alpha, noise) = match &manifest {
                Some(m) => {
                    let nl = m.nlcg.unwrap_or(m.config.nlcg);
                    (m.config.phantom.clone(), m.config.bc_set.to_string(), nl.s, nl.alpha, m.noise)
                }
                None => ("?".into(), "?".into(), 0, f64::NAN, f64::NAN),
            };
            Ok(ComparisonRow {
                run: dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned()),
                phantom,
                bc_set,
                s,
                alpha,
                noise,
                metrics,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Comparison { rows })
}

/// Step sizes of the finite-difference sweep, largest first.
pub const GRADCHECK_EPSILONS: [f64; 9] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradcheckRow {
    pub s: u8,
    pub direction: usize,
    pub epsilon: f64,
    pub adjoint: f64,
    pub finite_difference: f64,
    pub relative_error: f64,
}

pub const GRADCHECK_CSV_HEADER: &str = "s,direction,epsilon,adjoint,finite_difference,relative_error";

impl GradcheckRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:e},{:.15e},{:.15e},{:.3e}",
            self.s, self.direction, self.epsilon, self.adjoint, self.finite_difference, self.relative_error
        )
    }
}

/// Error curve of one direction is V-shaped: its minimum lies strictly
/// inside the sweep and both ends exceed it at least tenfold.
pub fn is_v_shaped(errors: &[f64]) -> bool {
    let n = errors.len();
    if n < 3 {
        return false;
    }
    let (imin, &emin) = errors
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    imin > 0 && imin < n - 1 && errors[0] >= 10.0 * emin && errors[n - 1] >= 10.0 * emin
}

/// Smooth random field Σ aₖ sin(kx·x + ky·y + φₖ) with |aₖ| < amplitude.
pub fn random_smooth(rng: &mut impl Rng, amplitude: f64) -> impl Fn(f64, f64) -> f64 {
    let modes: Vec<[f64; 4]> = (0..4)
        .map(|_| {
            [
                rng.random_range(-amplitude..amplitude),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(0.0..std::f64::consts::TAU),
            ]
        })
        .collect();
    move |x, y| modes.iter().map(|m| m[0] * (m[1] * x + m[2] * y + m[3]).sin()).sum()
}

/// Central-difference checks of the adjoint gradient along `directions`
/// random smooth directions at random smooth conductivities, for each s.
pub fn gradcheck(cfg: &RunConfig, s_values: &[u8], directions: usize, seed: u64) -> Result<Vec<GradcheckRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for &s in s_values {
        let mut c = cfg.clone();
        c.nlcg = NlcgConfig { s, ..cfg.nlcg };
        let ds = synthesize(&c)?;
        let obj = Objective::new(&ds.data, c.nlcg.alpha, s, c.nlcg.sigma_b, c.nlcg.solver)?;
        let space = obj.sigma_space().clone();
        for k in 0..directions {
            let base = random_smooth(&mut rng, 0.2);
            let sigma = ScalarField::interpolate(space.clone(), |x, y| 1.2 + base(x, y));
            let dir = random_smooth(&mut rng, 1.0);
            let phi = ScalarField::interpolate(space.clone(), |x, y| (1.0 - x * x - y * y).max(0.0) * dir(x, y));
            for r in finite_difference_check(&obj, &sigma, &phi, &GRADCHECK_EPSILONS)? {
                rows.push(GradcheckRow {
                    s,
                    direction: k,
                    epsilon: r.epsilon,
                    adjoint: r.adjoint,
                    finite_difference: r.finite_difference,
                    relative_error: r.relative_error,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct MeshReport {
    pub vertices: usize,
    pub triangles: usize,
    pub boundary_vertices: usize,
    pub hash: String,
}

/// Writes `mesh.txt` (reloadable) and `mesh.vtk` for a disk mesh of size `h`.
pub fn export_mesh(h: f64, out: &Path) -> Result<MeshReport> {
    let mesh = generate_disk_mesh(h)?;
    std::fs::create_dir_all(out)?;
    mesh.write_text(&out.join("mesh.txt"))?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(out.join("mesh.vtk"))?);
    mesh.write_vtk(&mut f)?;
    f.flush()?;
    Ok(MeshReport {
        vertices: mesh.num_vertices(),
        triangles: mesh.num_triangles(),
        boundary_vertices: mesh.boundary_vertices().len(),
        hash: mesh.content_hash(),
    })
}
