//! The on-disk workflow: generate data, reconstruct twice with different
//! regularizers, then tabulate the runs.

use aetomo::pipeline::{compare, generate, reconstruct, RunConfig};

fn main() -> aetomo::Result<()> {
    let root = std::env::temp_dir().join("aetomo_pipeline");
    let _ = std::fs::remove_dir_all(&root);
    let mut cfg = RunConfig::preset("composite-bc3")?;
    cfg.coarse_h = 0.05;
    cfg.fine_h = 0.025;
    cfg.nlcg.s = 0;
    let data = generate(&cfg, &root.join("data"))?;
    println!("data: {} ({})", data.data_path.display(), data.manifest.data_sha256);

    let mut dirs = Vec::new();
    for alpha in [0.01, 0.1] {
        let mut c = cfg.clone();
        c.nlcg.alpha = alpha;
        let out = root.join(format!("alpha-{alpha}"));
        reconstruct(&data.data_path, &c, &out)?;
        dirs.push(out);
    }
    print!("{}", compare(&dirs)?.to_markdown());
    Ok(())
}
