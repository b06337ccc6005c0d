//! Heart-lung reconstructions from clean and noisy data.

use aetomo::pipeline::{run, RunConfig};

fn main() -> aetomo::Result<()> {
    for preset in ["heart-clean", "heart-noise10", "heart-noise25"] {
        let mut cfg = RunConfig::preset(preset)?;
        cfg.coarse_h = 0.04;
        cfg.fine_h = 0.02;
        cfg.nlcg.s = 0;
        let (_, r) = run(&cfg)?;
        print!("{preset:<14} δ = {:.2}  rel L2 error {:.4}", cfg.noise, r.metrics.rel_l2_error);
        for p in &r.metrics.inclusions {
            print!("  [{:.1} -> {:.3}]", p.true_value, p.peak);
        }
        println!();
    }
    Ok(())
}
