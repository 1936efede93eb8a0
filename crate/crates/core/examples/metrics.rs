//! PSNR, SSIM and NRMSE of a noisy copy of a phantom, written as CSV rows.

use ktsecret::metrics::{write_metrics_row, MetricsReport, METRICS_HEADER};
use ktsecret::numerics::C64;
use ktsecret::phantom::{synthesize, PhantomSpec};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn main() -> ktsecret::Result<()> {
    let truth = synthesize(&PhantomSpec::default())?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let mut out = std::io::stdout().lock();
    println!("{METRICS_HEADER}");
    for sigma in [0.01, 0.05, 0.1] {
        let noise = Normal::new(0.0, sigma).expect("valid sigma");
        let mut noisy = truth.ref_images.clone();
        for z in noisy.data_mut() {
            *z += C64::new(noise.sample(&mut rng), 0.0);
        }
        let rep = MetricsReport::compute(&noisy, &truth.ref_images)?;
        let label = format!("noise{sigma}");
        write_metrics_row(
            &mut out,
            &label,
            1.0,
            0,
            "mean",
            rep.psnr_mean(),
            rep.ssim_mean(),
            rep.nrmse_mean(),
        )?;
    }
    Ok(())
}
