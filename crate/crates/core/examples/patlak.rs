//! Patlak fitting on exact synthetic curves and on a phantom's reference
//! images.

use ktsecret::kinetics::{ktrans_nrmse, patlak_fit_signal, PatlakDesign};
use ktsecret::phantom::{cumulative_trapezoid_minutes, default_aif, synthesize, PhantomSpec};

fn main() -> ktsecret::Result<()> {
    let spec = PhantomSpec::default();
    let aif = default_aif(&spec)?;
    let integral = cumulative_trapezoid_minutes(&aif, spec.dt);
    let design = PatlakDesign::new(&aif, spec.dt)?.expect("non-degenerate AIF");
    for (k, v) in [(0.1, 0.02), (0.3, 0.1), (0.6, 0.15)] {
        let curve: Vec<f64> = aif
            .iter()
            .zip(&integral)
            .map(|(c, i)| k * i + v * c)
            .collect();
        let (kf, vf, r2) = design.fit(&curve);
        println!("true ({k:.2}, {v:.2})  fitted ({kf:.10}, {vf:.10})  R² {r2:.6}");
    }

    let truth = synthesize(&spec)?;
    let roi = truth.tissue_roi();
    let map = patlak_fit_signal(&truth.ref_images, &truth.signal, &truth.aif, spec.dt, &roi)?;
    println!(
        "reference-image K^Trans NRMSE {:.3e}",
        ktrans_nrmse(&map, &truth.ktrans_map, &roi)
    );
    Ok(())
}
