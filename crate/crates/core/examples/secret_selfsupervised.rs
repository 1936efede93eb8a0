//! Self-supervised training from undersampled k-space only, then inference
//! on a held-out phantom at two accelerations.
//!
//! ```text
//! cargo run --release --example secret_selfsupervised -- [epochs] [n_train]
//! ```

use ktsecret::encoding::{adjoint, make_radial_mask};
use ktsecret::learn::{secret_infer, secret_train, SecretConfig};
use ktsecret::metrics::psnr;
use ktsecret::phantom::{corrupt, synthesize, PhantomSpec};
use ktsecret::pipeline::{generate_pairs, unsupervised};

fn main() -> ktsecret::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().map_or(100, |a| a.parse().expect("epochs"));
    let n_train = args.next().map_or(6, |a| a.parse().expect("n_train"));
    let lr = args.next().map_or(1e-4, |a| a.parse().expect("lr"));
    let spec = PhantomSpec::default();
    let held_out = synthesize(&spec.with_seed(999))?;

    for accel in [6.0, 10.0] {
        let train = unsupervised(&generate_pairs(&spec, accel, 100, 100, 100, n_train)?);
        let cfg = SecretConfig {
            epochs,
            lr,
            ..SecretConfig::default()
        };
        let (theta, log) = secret_train(&train, None, &cfg)?;
        let first = log.epochs[0].train_loss;
        println!(
            "R={accel}: loss {first:.4e} -> {:.4e} ({:.1}%) in {:.1} s",
            log.final_train_loss,
            100.0 * log.final_train_loss / first,
            log.total_seconds()
        );

        let mask = make_radial_mask(spec.t, spec.h, spec.w, accel, 999)?;
        let d_u = corrupt(&held_out, &mask, 0.0, 999)?;
        let zf = psnr(&adjoint(&d_u), &held_out.ref_images)?;
        let nn = psnr(&secret_infer(&d_u, &theta)?, &held_out.ref_images)?;
        let zero = ktsecret::neural::NetworkParams::zeros(theta.config())?;
        let mean = psnr(&secret_infer(&d_u, &zero)?, &held_out.ref_images)?;
        println!("R={accel}: held-out PSNR zero-filled {zf:.2} dB, temporal mean {mean:.2} dB, network {nn:.2} dB");
    }
    Ok(())
}
