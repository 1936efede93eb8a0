//! Synthesizes a perfusion phantom and writes it as containers plus a
//! frame strip preview.
//!
//! ```text
//! cargo run --example phantom -- [output-dir]
//! ```

use std::path::PathBuf;

use ktsecret::io::Panel;
use ktsecret::phantom::{synthesize, PhantomSpec};
use ktsecret::pipeline::{write_phantom, PhantomSidecar};

fn main() -> ktsecret::Result<()> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "phantom_out".into()),
    );
    std::fs::create_dir_all(&out)?;
    let spec = PhantomSpec {
        h: 64,
        w: 64,
        t: 16,
        ..PhantomSpec::default()
    };
    let truth = synthesize(&spec)?;
    write_phantom(&out, &truth)?;

    println!(
        "AIF (mM): {:?}",
        truth
            .aif
            .iter()
            .map(|v| (v * 100.0).round() / 100.0)
            .collect::<Vec<_>>()
    );
    for r in PhantomSidecar::from_truth(&truth).regions {
        println!(
            "region {}: K^Trans {:.3} /min, v_p {:.3}",
            r.label, r.ktrans, r.vp
        );
    }
    let mut panel = Panel::new(2, spec.t / 2, spec.h, spec.w);
    for f in 0..spec.t {
        let mag: Vec<f64> = truth.ref_images.frame(f).iter().map(|z| z.norm()).collect();
        panel.set_tile(f / (spec.t / 2), f % (spec.t / 2), &mag);
    }
    panel.save(&out.join("frames.pgm"))?;
    println!("wrote {}", out.display());
    Ok(())
}
