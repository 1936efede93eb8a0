//! Golden-angle radial masks: achieved acceleration per requested factor
//! and an ASCII view of the first frame.
//!
//! ```text
//! cargo run --example radial_masks -- [size] [frames]
//! ```

use ktsecret::encoding::make_radial_mask;

fn main() -> ktsecret::Result<()> {
    let mut args = std::env::args().skip(1);
    let n = args.next().map_or(64, |a| a.parse().expect("size"));
    let t = args.next().map_or(8, |a| a.parse().expect("frames"));
    for accel in [1.0, 3.0, 6.0, 10.0] {
        let mask = make_radial_mask(t, n, n, accel, 0)?;
        println!("R={accel:<4} achieved {:.3}", mask.achieved_acceleration());
    }
    let mask = make_radial_mask(t, n, n, 10.0, 0)?;
    let frame = mask.frame(0);
    // Mask rows are stored with DC first; shift so DC sits in the middle.
    for y in 0..n {
        let row: String = (0..n)
            .map(|x| {
                if frame[((y + n / 2) % n) * n + (x + n / 2) % n] {
                    '#'
                } else {
                    '.'
                }
            })
            .collect();
        println!("{row}");
    }
    Ok(())
}
