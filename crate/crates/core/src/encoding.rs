//! Radial (k,t) sampling masks and the encoding operator `E = A·F`.
//!
//! Masks are stored in FFT-native order (DC at index `[t, 0, 0]`), so they
//! multiply DFT output directly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{dft2_series, is_power_of_two, CTensor, Direction, DynamicImage, C64};

/// Golden-angle increment between consecutive frames, degrees.
pub const GOLDEN_ANGLE_DEG: f64 = 111.246117975;

/// Largest relative deviation between achieved and requested acceleration.
pub const ACCEL_TOLERANCE: f64 = 0.15;

#[derive(Clone, Debug, PartialEq)]
pub struct SamplingMask {
    t: usize,
    h: usize,
    w: usize,
    bits: Vec<bool>,
    accel_nominal: f64,
}

impl SamplingMask {
    /// Builds a mask from explicit bits. Every frame must contain DC.
    pub fn new(t: usize, h: usize, w: usize, bits: Vec<bool>, accel_nominal: f64) -> Result<Self> {
        if bits.len() != t * h * w {
            return Err(Error::Dimension(format!(
                "mask needs {} bits, got {}",
                t * h * w,
                bits.len()
            )));
        }
        if (0..t).any(|f| !bits[f * h * w]) {
            return Err(Error::InvalidParameter(
                "every mask frame must sample the DC bin".into(),
            ));
        }
        Ok(Self {
            t,
            h,
            w,
            bits,
            accel_nominal,
        })
    }

    pub fn full(t: usize, h: usize, w: usize) -> Self {
        Self {
            t,
            h,
            w,
            bits: vec![true; t * h * w],
            accel_nominal: 1.0,
        }
    }

    /// Reads a mask from real values (nonzero = sampled).
    pub fn from_real(shape: &[usize], values: &[f64], accel_nominal: f64) -> Result<Self> {
        let [t, h, w] = *shape else {
            return Err(Error::Dimension(format!("mask must be 3-D, got {shape:?}")));
        };
        Self::new(
            t,
            h,
            w,
            values.iter().map(|&v| v != 0.0).collect(),
            accel_nominal,
        )
    }

    pub fn to_real(&self) -> Vec<f64> {
        self.bits
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.t, self.h, self.w)
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.t, self.h, self.w]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn frame(&self, f: usize) -> &[bool] {
        let n = self.h * self.w;
        &self.bits[f * n..(f + 1) * n]
    }

    pub fn accel_nominal(&self) -> f64 {
        self.accel_nominal
    }

    pub fn sampled_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn achieved_acceleration(&self) -> f64 {
        self.bits.len() as f64 / self.sampled_count() as f64
    }

    /// Zeroes every unsampled entry of `x` in place.
    pub fn apply(&self, x: &mut CTensor) {
        for (v, &b) in x.data_mut().iter_mut().zip(&self.bits) {
            if !b {
                *v = C64::new(0.0, 0.0);
            }
        }
    }

    fn check_shape(&self, s: &CTensor) -> Result<()> {
        if s.shape() != self.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape().to_vec(),
                got: s.shape().to_vec(),
            });
        }
        Ok(())
    }
}

/// Undersampled (k,t)-space samples; entries outside the mask are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct KtData {
    samples: CTensor,
    mask: SamplingMask,
}

impl KtData {
    /// Fails if `samples` is nonzero anywhere outside the mask.
    pub fn new(samples: CTensor, mask: SamplingMask) -> Result<Self> {
        mask.check_shape(&samples)?;
        let leak = samples
            .data()
            .iter()
            .zip(mask.bits())
            .any(|(v, &b)| !b && (v.re != 0.0 || v.im != 0.0));
        if leak {
            return Err(Error::InvalidParameter(
                "k-space samples present outside the sampling mask".into(),
            ));
        }
        Ok(Self { samples, mask })
    }

    /// Masks a fully populated k-space tensor.
    pub fn from_full(mut kspace: CTensor, mask: SamplingMask) -> Result<Self> {
        mask.check_shape(&kspace)?;
        mask.apply(&mut kspace);
        Ok(Self {
            samples: kspace,
            mask,
        })
    }

    pub fn samples(&self) -> &CTensor {
        &self.samples
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.mask.dims()
    }
}

/// Number of diametral spokes per frame suggested for a nominal acceleration.
pub fn nominal_spokes(h: usize, w: usize, accel: f64) -> usize {
    (h.max(w) as f64 * std::f64::consts::FRAC_PI_2 / accel).round() as usize
}

fn rasterize(t: usize, h: usize, w: usize, spokes: usize, offset: f64) -> Vec<bool> {
    let n = h * w;
    let mut bits = vec![false; t * n];
    let golden = GOLDEN_ANGLE_DEG.to_radians();
    let (hh, hw) = ((h / 2) as i64, (w / 2) as i64);
    let rmax = ((h * h + w * w) as f64).sqrt() / 2.0 + 1.0;
    let steps = (2.0 * rmax / 0.5).ceil() as i64;
    for f in 0..t {
        let frame = &mut bits[f * n..(f + 1) * n];
        for j in 0..spokes {
            let angle =
                offset + f as f64 * golden + j as f64 * std::f64::consts::PI / spokes as f64;
            let (sin, cos) = angle.sin_cos();
            for s in 0..=steps {
                let r = -rmax + 0.5 * s as f64;
                let ky = (r * sin).round() as i64;
                let kx = (r * cos).round() as i64;
                if ky < -hh || ky >= hh || kx < -hw || kx >= hw {
                    continue;
                }
                let iy = ky.rem_euclid(h as i64) as usize;
                let ix = kx.rem_euclid(w as i64) as usize;
                frame[iy * w + ix] = true;
            }
        }
        frame[0] = true;
    }
    bits
}

/// Golden-angle radial mask rasterized onto the Cartesian grid.
///
/// Each frame carries the same number of equally spaced diametral spokes;
/// the whole spoke set rotates by the golden angle from one frame to the
/// next, on top of a global offset drawn from `seed`. The spoke count starts
/// at `round(max(h,w)·π/2 / R)` and is then adjusted so the achieved
/// acceleration is as close as possible to `R`. `R <= 1` gives a full mask.
pub fn make_radial_mask(
    t: usize,
    h: usize,
    w: usize,
    accel: f64,
    seed: u64,
) -> Result<SamplingMask> {
    if !(accel >= 1.0) || !accel.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "acceleration must be >= 1, got {accel}"
        )));
    }
    if t == 0 || !is_power_of_two(h) || !is_power_of_two(w) {
        return Err(Error::Dimension(format!(
            "mask dims must be nonzero with power-of-two sides, got {t}x{h}x{w}"
        )));
    }
    if accel == 1.0 {
        return Ok(SamplingMask::full(t, h, w));
    }
    let start = nominal_spokes(h, w, accel);
    if start < 1 {
        return Err(Error::AccelerationUnachievable(format!(
            "R={accel} leaves fewer than one spoke per frame on {h}x{w}"
        )));
    }

    let offset = ChaCha8Rng::seed_from_u64(seed).gen_range(0.0..std::f64::consts::PI);
    let total = (t * h * w) as f64;
    let achieved = |spokes: usize| {
        let bits = rasterize(t, h, w, spokes, offset);
        let ones = bits.iter().filter(|&&b| b).count();
        (total / ones as f64, bits)
    };

    // Achieved acceleration decreases with the spoke count; walk from the
    // nominal count towards the target and keep the closest candidate.
    let (mut best_n, (mut best_r, mut best_bits)) = (start, achieved(start));
    let step: i64 = if best_r > accel { 1 } else { -1 };
    let mut n = start as i64;
    let limit = 4 * h.max(w) as i64;
    loop {
        n += step;
        if n < 1 || n > limit {
            break;
        }
        let (r, bits) = achieved(n as usize);
        if (r - accel).abs() < (best_r - accel).abs() {
            best_n = n as usize;
            best_r = r;
            best_bits = bits;
        }
        if (step > 0 && r <= accel) || (step < 0 && r >= accel) {
            break;
        }
    }
    if (best_r - accel).abs() > ACCEL_TOLERANCE * accel {
        return Err(Error::AccelerationUnachievable(format!(
            "closest radial mask ({best_n} spokes) reaches R={best_r:.2} for requested R={accel} on {h}x{w}"
        )));
    }
    SamplingMask::new(t, h, w, best_bits, accel)
}

/// `E s`: frame-wise unitary DFT followed by the mask.
pub fn encode(s: &DynamicImage, mask: &SamplingMask) -> Result<KtData> {
    mask.check_shape(s)?;
    let mut k = dft2_series(s, Direction::Forward)?;
    mask.apply(&mut k);
    Ok(KtData {
        samples: k,
        mask: mask.clone(),
    })
}

/// `Eᴴ d`: the zero-filled reconstruction.
pub fn adjoint(d: &KtData) -> DynamicImage {
    let mut k = d.samples.clone();
    d.mask.apply(&mut k);
    dft2_series(&k, Direction::Inverse).expect("KtData dims validated at construction")
}

/// Applies `EᴴE + λI`.
pub fn normal_op(s: &DynamicImage, mask: &SamplingMask, lambda: f64) -> Result<DynamicImage> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    mask.check_shape(s)?;
    let mut k = dft2_series(s, Direction::Forward)?;
    mask.apply(&mut k);
    let mut out = dft2_series(&k, Direction::Inverse)?;
    if lambda > 0.0 {
        out.axpy(C64::new(lambda, 0.0), s);
    }
    Ok(out)
}
