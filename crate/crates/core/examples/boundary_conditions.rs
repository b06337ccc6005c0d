//! The rotated rectangle under the three boundary-condition sets.

use aetomo::pipeline::{run, RunConfig};

fn main() -> aetomo::Result<()> {
    for preset in ["rect-bc1", "rect-bc2", "rect-bc3"] {
        let mut cfg = RunConfig::preset(preset)?;
        cfg.coarse_h = 0.04;
        cfg.fine_h = 0.02;
        cfg.nlcg.s = 0;
        let (ds, r) = run(&cfg)?;
        println!(
            "{preset}: {} fields, rel L2 error {:.4}, min det {:.3e}",
            ds.data.bc_ids().len(),
            r.metrics.rel_l2_error,
            r.metrics.min_det
        );
    }
    Ok(())
}
