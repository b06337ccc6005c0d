//! Effect of the regularization weight on contrast and edge sharpness.

use aetomo::pipeline::{run, RunConfig};

fn main() -> aetomo::Result<()> {
    println!("s  alpha  rel_l2   peak    edge");
    for s in [0u8, 1] {
        for alpha in [0.1, 0.4, 0.7] {
            let mut cfg = RunConfig::preset("test1-bc1-clean")?;
            cfg.coarse_h = 0.05;
            cfg.fine_h = 0.025;
            cfg.nlcg.s = s;
            cfg.nlcg.alpha = alpha;
            let (_, r) = run(&cfg)?;
            let m = &r.metrics;
            println!(
                "{s}  {alpha:<5}  {:.4}  {:.3}  {:.2}",
                m.rel_l2_error,
                m.max_in_inclusion.unwrap_or(f64::NAN),
                m.edge_sharpness
            );
        }
    }
    Ok(())
}
