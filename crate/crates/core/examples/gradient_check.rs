//! Finite-difference check of the adjoint gradient for both σ spaces.

use aetomo::pipeline::commands::{is_v_shaped, GRADCHECK_CSV_HEADER};
use aetomo::pipeline::{gradcheck, RunConfig};

fn main() -> aetomo::Result<()> {
    let mut cfg = RunConfig::preset("heart-clean")?;
    cfg.coarse_h = 0.08;
    cfg.fine_h = 0.04;
    let rows = gradcheck(&cfg, &[0, 1], 2, 7)?;
    println!("{GRADCHECK_CSV_HEADER}");
    for r in &rows {
        println!("{}", r.csv_row());
    }
    for s in [0u8, 1] {
        for d in 0..2 {
            let errs: Vec<f64> = rows.iter().filter(|r| r.s == s && r.direction == d).map(|r| r.relative_error).collect();
            println!("# s = {s} direction {d}: V-shaped {}", is_v_shaped(&errs));
        }
    }
    Ok(())
}
