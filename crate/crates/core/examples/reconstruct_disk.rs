//! Reconstructs the disk inclusion from clean data with both regularizers
//! and renders the results as PNG.
//!
//!     cargo run --release --example reconstruct_disk [h]

use aetomo::pipeline::render::write_png_file;
use aetomo::pipeline::{run, RunConfig};

fn main() -> aetomo::Result<()> {
    let h: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0.04);
    for preset in ["test1-bc1-l2", "test1-bc1-clean"] {
        let mut cfg = RunConfig::preset(preset)?;
        cfg.coarse_h = h;
        cfg.fine_h = h / 2.0;
        let (_, r) = run(&cfg)?;
        let m = &r.metrics;
        println!(
            "{preset} (s = {}): {:?} after {} iterations, rel L2 error {:.4} (initial {:.4}), peak {:.3}, {:.1}s",
            cfg.nlcg.s,
            m.termination,
            m.iterations,
            m.rel_l2_error,
            m.initial_rel_l2_error,
            m.max_in_inclusion.unwrap_or(f64::NAN),
            m.wall_time,
        );
        let path = std::env::temp_dir().join(format!("aetomo_{preset}.png"));
        write_png_file(&r.result.sigma, &path)?;
        println!("  wrote {}", path.display());
    }
    Ok(())
}
