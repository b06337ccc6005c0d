use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aetomo::pipeline::commands::{
    is_v_shaped, reconstruction_config, GRADCHECK_CSV_HEADER, GRADCHECK_EPSILONS,
};
use aetomo::pipeline::{self, Overrides, RunConfig};
use aetomo::{Error, Result};

/// Acousto-electric tomography: synthesize power-density data and
/// reconstruct conductivities on the unit disk.
#[derive(Parser)]
#[command(name = "aetomo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct RunFlags {
    /// Named preset, e.g. test1-bc1-clean or heart-noise10
    #[arg(long)]
    preset: Option<String>,
    /// JSON configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Regularization weight
    #[arg(long)]
    alpha: Option<f64>,
    /// Smoothness: 0 for L², 1 for H¹
    #[arg(long)]
    s: Option<u8>,
    /// Relative noise level δ
    #[arg(long)]
    noise: Option<f64>,
    /// Noise seed; field i uses stream i of the generator
    #[arg(long)]
    seed: Option<u64>,
    /// Iteration limit
    #[arg(long)]
    kmax: Option<usize>,
    /// Stop once the step norm ‖σ_{k+1} − σ_k‖ falls below this
    #[arg(long)]
    tol: Option<f64>,
    /// Reconstruction mesh size; the data mesh defaults to half of it
    #[arg(long)]
    h: Option<f64>,
    /// Data mesh size
    #[arg(long)]
    fine_h: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize power-density data on a fine mesh
    Generate {
        #[command(flatten)]
        flags: RunFlags,
        /// Output directory for data.txt and manifest.json
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct σ from a data file
    Reconstruct {
        /// Data file written by `generate`
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
        /// Result directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate the metrics of several result directories
    Compare {
        #[arg(required = true, num_args = 2..)]
        dirs: Vec<PathBuf>,
        /// Write CSV here (markdown goes to stdout)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of the adjoint gradient
    Gradcheck {
        #[command(flatten)]
        flags: RunFlags,
        /// Number of random directions per s
        #[arg(long, default_value_t = 5)]
        directions: usize,
        /// Write the table as CSV here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the disk mesh
    Mesh {
        #[arg(long)]
        h: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

impl RunFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            alpha: self.alpha,
            s: self.s,
            noise: self.noise,
            seed: self.seed,
            k_max: self.kmax,
            tol: self.tol,
            out: None,
        }
    }

    fn apply_resolution(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(h) = self.h {
            cfg.coarse_h = h;
            cfg.fine_h = h / 2.0;
        }
        if let Some(f) = self.fine_h {
            cfg.fine_h = f;
        }
        cfg.validate()
    }

    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = pipeline::resolve(self.config.as_deref(), self.preset.as_deref(), &self.overrides())?;
        self.apply_resolution(&mut cfg)?;
        Ok(cfg)
    }
}

fn write_new(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { flags, out } => {
            let cfg = flags.resolve()?;
            let report = pipeline::generate(&cfg, &out)?;
            println!(
                "wrote {} ({} fields, noise {}, seed {})",
                report.data_path.display(),
                report.manifest.noise_streams,
                report.manifest.noise,
                report.manifest.seed
            );
        }
        Command::Reconstruct { data, flags, out } => {
            if flags.h.is_some() || flags.fine_h.is_some() {
                return Err(Error::Config("the mesh sizes of a reconstruction come from the data file".into()));
            }
            let cfg = reconstruction_config(&data, flags.config.as_deref(), flags.preset.as_deref(), &flags.overrides())?;
            let report = pipeline::reconstruct(&data, &cfg, &out)?;
            let m = &report.run.metrics;
            println!(
                "{:?} after {} iterations: rel_l2_error {:.4} (initial {:.4}), max_in_inclusion {}, {:.1} s",
                m.termination,
                m.iterations,
                m.rel_l2_error,
                m.initial_rel_l2_error,
                m.max_in_inclusion.map_or("-".into(), |v| format!("{v:.4}")),
                m.wall_time
            );
            println!("results in {}", report.out.display());
        }
        Command::Compare { dirs, out } => {
            let table = pipeline::compare(&dirs)?;
            print!("{}", table.to_markdown());
            if let Some(path) = out {
                write_new(&path, &table.to_csv())?;
            }
        }
        Command::Gradcheck { flags, directions, out } => {
            let cfg = flags.resolve()?;
            let s_values: Vec<u8> = flags.s.map_or(vec![0, 1], |s| vec![s]);
            let rows = pipeline::gradcheck(&cfg, &s_values, directions, cfg.seed)?;
            let mut csv = format!("{GRADCHECK_CSV_HEADER}\n");
            for r in &rows {
                csv += &(r.csv_row() + "\n");
            }
            print!("{csv}");
            for chunk in rows.chunks(GRADCHECK_EPSILONS.len()) {
                let errors: Vec<f64> = chunk.iter().map(|r| r.relative_error).collect();
                let at_1e5 = chunk.iter().find(|r| r.epsilon == 1e-5).map_or(f64::NAN, |r| r.relative_error);
                println!(
                    "# s={} direction={} error@1e-5={:.2e} v-shaped={}",
                    chunk[0].s,
                    chunk[0].direction,
                    at_1e5,
                    is_v_shaped(&errors)
                );
            }
            if let Some(path) = out {
                write_new(&path, &csv)?;
            }
        }
        Command::Mesh { h, out } => {
            let r = pipeline::export_mesh(h, &out)?;
            println!(
                "{} vertices, {} triangles, {} boundary vertices, hash {}",
                r.vertices, r.triangles, r.boundary_vertices, r.hash
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
