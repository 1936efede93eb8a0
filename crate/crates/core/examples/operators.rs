//! Encoding operator basics: forward/adjoint pairing and the normal
//! operator on a random series.

use ktsecret::encoding::{adjoint, encode, make_radial_mask, normal_op, KtData};
use ktsecret::numerics::{CTensor, C64};
use rand::{Rng, SeedableRng};

fn main() -> ktsecret::Result<()> {
    let (t, h, w) = (4, 64, 64);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let mut random = || {
        let data = (0..t * h * w)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        CTensor::from_vec(&[t, h, w], data)
    };
    let x = random()?;
    let mut y = random()?;
    let mask = make_radial_mask(t, h, w, 6.0, 0)?;
    mask.apply(&mut y);

    let ex = encode(&x, &mask)?;
    let ehy = adjoint(&KtData::new(y.clone(), mask.clone())?);
    let (lhs, rhs) = (ex.samples().inner(&y), x.inner(&ehy));
    println!("<Ex,y>   = {lhs:.12}");
    println!("<x,E^Hy> = {rhs:.12}");
    println!("relative gap {:.3e}", (lhs - rhs).norm() / lhs.norm());

    // E^H E is a projection: applying it twice changes nothing.
    let once = normal_op(&x, &mask, 0.0)?;
    let twice = normal_op(&once, &mask, 0.0)?;
    println!(
        "projection defect {:.3e}",
        twice.sub(&once).norm() / once.norm()
    );
    Ok(())
}
