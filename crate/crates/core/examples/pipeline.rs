//! End-to-end run from a JSON configuration.
//!
//! ```text
//! cargo run --release --example pipeline -- [config.json]
//! ```
//! Defaults to `examples/configs/sweep.json`.

use std::path::PathBuf;

use ktsecret::pipeline::{run, RunConfig};

fn main() -> ktsecret::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs/sweep.json")
        });
    let cfg = RunConfig::load(&path)?;
    println!("writing to {}", cfg.output_dir.display());
    println!(
        "{:<7} {:>5} {:>9} {:>7} {:>7} {:>8}",
        "method", "R", "PSNR", "SSIM", "NRMSE", "KTrans"
    );
    for c in run(&cfg)? {
        println!(
            "{:<7} {:>5} {:>9.3} {:>7.4} {:>7.4} {:>8.4}",
            c.method.name(),
            c.accel,
            c.psnr,
            c.ssim,
            c.nrmse,
            c.ktrans_nrmse
        );
    }
    Ok(())
}
