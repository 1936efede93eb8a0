//! Supervised unrolled reconstruction: train with K=1, then compare
//! unrolling depths on a held-out phantom.
//!
//! ```text
//! cargo run --release --example modl_unrolled -- [epochs] [n_train]
//! ```

use ktsecret::encoding::{adjoint, make_radial_mask};
use ktsecret::learn::{modl_forward, modl_train, ModlConfig};
use ktsecret::metrics::psnr;
use ktsecret::phantom::{corrupt, synthesize, PhantomSpec};
use ktsecret::pipeline::{generate_pairs, supervised};

fn main() -> ktsecret::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().map_or(20, |a| a.parse().expect("epochs"));
    let n_train = args.next().map_or(6, |a| a.parse().expect("n_train"));
    let spec = PhantomSpec::default();
    let accel = 10.0;

    let train = supervised(&generate_pairs(&spec, accel, 100, 100, 100, n_train)?);
    let cfg = ModlConfig {
        epochs,
        ..ModlConfig::default()
    };
    let (theta, log) = modl_train(&train, None, &cfg)?;
    let first = log.epochs[0].train_loss;
    println!(
        "loss {first:.4e} -> {:.4e} ({:.1}% drop) in {:.1} s",
        log.final_train_loss,
        100.0 * (1.0 - log.final_train_loss / first),
        log.total_seconds()
    );

    let truth = synthesize(&spec.with_seed(999))?;
    let mask = make_radial_mask(spec.t, spec.h, spec.w, accel, 999)?;
    let d_u = corrupt(&truth, &mask, 0.0, 999)?;
    println!(
        "zero-filled PSNR {:.2} dB",
        psnr(&adjoint(&d_u), &truth.ref_images)?
    );
    for k in [1, 3, 10] {
        let out = modl_forward(&d_u, &theta, &ModlConfig { k, ..cfg.clone() })?;
        println!("K={k:<2} PSNR {:.2} dB", psnr(&out, &truth.ref_images)?);
    }
    Ok(())
}
