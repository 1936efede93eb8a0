//! Synthetic first-pass contrast phantoms with known Patlak kinetics.
//!
//! Geometry: an elliptical body, a left and right ventricle carrying the
//! arterial input function, and a myocardial ring around the left ventricle
//! split into angular sectors, each with its own `(K^Trans, v_p)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::encoding::{encode, KtData, SamplingMask};
use crate::error::{Error, Result};
use crate::numerics::{dft2_series, is_power_of_two, CTensor, Direction, DynamicImage, C64};

pub const LABEL_AIR: u32 = 0;
pub const LABEL_BODY: u32 = 1;
pub const LABEL_LV: u32 = 2;
pub const LABEL_RV: u32 = 3;
/// Tissue sector `r` is labelled `LABEL_TISSUE0 + r`.
pub const LABEL_TISSUE0: u32 = 4;

const BODY_SIGNAL: f64 = 0.35;
const HEART_BASELINE: f64 = 0.2;
// signal units per mM
const SIGNAL_PER_MM: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomSpec {
    pub h: usize,
    pub w: usize,
    pub t: usize,
    /// Seconds per frame.
    pub dt: f64,
    pub n_tissue_regions: usize,
    /// 1/min
    pub ktrans_range: [f64; 2],
    pub vp_range: [f64; 2],
    /// Relative k-space noise level used when the phantom is corrupted.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            h: 32,
            w: 32,
            t: 8,
            dt: 7.5,
            n_tissue_regions: 4,
            ktrans_range: [0.1, 0.6],
            vp_range: [0.02, 0.15],
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !is_power_of_two(self.h) || !is_power_of_two(self.w) {
            return bad(format!(
                "phantom sides must be powers of two, got {}x{}",
                self.h, self.w
            ));
        }
        if self.t < 8 {
            return bad(format!("phantom needs at least 8 frames, got {}", self.t));
        }
        if !(self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.n_tissue_regions == 0 {
            return bad("at least one tissue region is required".into());
        }
        for (name, r) in [
            ("ktrans_range", self.ktrans_range),
            ("vp_range", self.vp_range),
        ] {
            if !(r[0] > 0.0 && r[1] >= r[0]) {
                return bad(format!("{name} must be positive and ordered, got {r:?}"));
            }
        }
        if !(self.noise_sigma >= 0.0) {
            return bad(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            ));
        }
        Ok(())
    }

    pub fn time_axis(&self) -> Vec<f64> {
        (0..self.t).map(|i| i as f64 * self.dt).collect()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// Affine map between concentration (mM) and normalized heart signal:
/// `signal = offset + gain · C`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalModel {
    pub offset: f64,
    pub gain: f64,
}

impl SignalModel {
    /// `(|s| - offset) / gain`, frame by frame.
    pub fn to_concentration(&self, series: &DynamicImage) -> Vec<f64> {
        series
            .data()
            .iter()
            .map(|z| (z.norm() - self.offset) / self.gain)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhantomTruth {
    pub spec: PhantomSpec,
    /// Noiseless `[T,H,W]` series, magnitudes in `[0,1]`, zero phase.
    pub ref_images: DynamicImage,
    pub ktrans_map: Vec<f64>,
    pub vp_map: Vec<f64>,
    /// `C_p(t)` in mM, one value per frame.
    pub aif: Vec<f64>,
    pub region_labels: Vec<u32>,
    pub signal: SignalModel,
}

impl PhantomTruth {
    pub fn tissue_roi(&self) -> Vec<bool> {
        self.region_labels
            .iter()
            .map(|&l| l >= LABEL_TISSUE0)
            .collect()
    }
}

/// Gamma-variate bolus:
/// `scale · ((t−t0)/(αβ))^α · exp(α − (t−t0)/β)` after arrival, zero before.
/// The peak equals `scale` at `t0 + αβ`.
pub fn gamma_variate_aif(
    t_axis: &[f64],
    t0: f64,
    alpha: f64,
    beta: f64,
    scale: f64,
) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && beta > 0.0 && scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma variate needs positive alpha, beta, scale; got {alpha}, {beta}, {scale}"
        )));
    }
    if t_axis.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(Error::InvalidParameter(
            "time axis must be strictly increasing".into(),
        ));
    }
    Ok(t_axis
        .iter()
        .map(|&t| {
            if t <= t0 {
                0.0
            } else {
                let u = (t - t0) / beta;
                scale * (u / alpha).powf(alpha) * (alpha - u).exp()
            }
        })
        .collect())
}

/// Running trapezoidal integral of `c` sampled every `dt` seconds, in mM·min.
pub fn cumulative_trapezoid_minutes(c: &[f64], dt: f64) -> Vec<f64> {
    let step = dt / 60.0;
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(c.len());
    for i in 0..c.len() {
        if i > 0 {
            acc += 0.5 * step * (c[i - 1] + c[i]);
        }
        out.push(acc);
    }
    out
}

/// The AIF used by [`synthesize`]: bolus arrival, shape and width scale with
/// the acquisition window so that a 60 s window gives `t0 = 5 s`, `α = 2`,
/// `β = 4 s`, peak 1 mM.
pub fn default_aif(spec: &PhantomSpec) -> Result<Vec<f64>> {
    let window = spec.t as f64 * spec.dt;
    gamma_variate_aif(
        &spec.time_axis(),
        window * 5.0 / 60.0,
        2.0,
        window * 4.0 / 60.0,
        1.0,
    )
}

struct Geometry {
    cy: f64,
    cx: f64,
    body: (f64, f64),
    lv: f64,
    myo_outer: f64,
    rv_dx: f64,
    rv: (f64, f64),
    sector_phase: f64,
}

impl Geometry {
    fn sample(rng: &mut ChaCha8Rng) -> Self {
        let mut jitter = |amp: f64| 1.0 + rng.gen_range(-amp..amp);
        let lv = 0.13 * jitter(0.1);
        Self {
            cy: 0.04 * jitter(1.0),
            cx: 0.04 * jitter(1.0),
            body: (0.44 * jitter(0.05), 0.36 * jitter(0.05)),
            lv,
            myo_outer: lv + 0.08 * jitter(0.1),
            rv_dx: -0.24 * jitter(0.05),
            rv: (0.1 * jitter(0.1), 0.16 * jitter(0.1)),
            sector_phase: std::f64::consts::PI * jitter(1.0),
        }
    }

    /// Label of the pixel at normalized coordinates in `[-0.5, 0.5)`.
    fn label(&self, y: f64, x: f64, sectors: usize) -> u32 {
        let (dy, dx) = (y - self.cy, x - self.cx);
        let r = (dy * dy + dx * dx).sqrt();
        let (ry, rx) = (dy / self.rv.0, (dx - self.rv_dx) / self.rv.1);
        if (y / self.body.1).powi(2) + (x / self.body.0).powi(2) > 1.0 {
            LABEL_AIR
        } else if r < self.lv {
            LABEL_LV
        } else if r < self.myo_outer {
            let a = (dy.atan2(dx) + self.sector_phase).rem_euclid(2.0 * std::f64::consts::PI);
            let s = ((a / (2.0 * std::f64::consts::PI)) * sectors as f64) as usize;
            LABEL_TISSUE0 + s.min(sectors - 1) as u32
        } else if ry * ry + rx * rx < 1.0 {
            LABEL_RV
        } else {
            LABEL_BODY
        }
    }
}

/// Builds a noiseless phantom and its ground truth.
///
/// Tissue curves follow `C_t = K^Trans·∫C_p + v_p·C_p` with the running
/// trapezoidal integral, so a Patlak fit on the reference recovers the maps
/// to rounding error. Signal is affine in concentration and normalized to
/// `[0,1]` jointly over all frames.
pub fn synthesize(spec: &PhantomSpec) -> Result<PhantomTruth> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let geo = Geometry::sample(&mut rng);
    let n_reg = spec.n_tissue_regions;
    let params: Vec<(f64, f64)> = (0..n_reg)
        .map(|_| {
            let k = rng.gen_range(spec.ktrans_range[0]..=spec.ktrans_range[1]);
            let v = rng.gen_range(spec.vp_range[0]..=spec.vp_range[1]);
            (k, v)
        })
        .collect();

    let (t, h, w) = (spec.t, spec.h, spec.w);
    let labels: Vec<u32> = (0..h * w)
        .map(|i| {
            let y = (i / w) as f64 / h as f64 - 0.5;
            let x = (i % w) as f64 / w as f64 - 0.5;
            geo.label(y, x, n_reg)
        })
        .collect();
    for r in 0..n_reg {
        if !labels.contains(&(LABEL_TISSUE0 + r as u32)) {
            return Err(Error::RegionOverflow(format!(
                "{n_reg} tissue sectors do not all fit on a {h}x{w} grid (sector {r} is empty)"
            )));
        }
    }

    let aif = default_aif(spec)?;
    let integral = cumulative_trapezoid_minutes(&aif, spec.dt);
    let mut ktrans_map = vec![0.0; h * w];
    let mut vp_map = vec![0.0; h * w];
    for (i, &l) in labels.iter().enumerate() {
        if l >= LABEL_TISSUE0 {
            let (k, v) = params[(l - LABEL_TISSUE0) as usize];
            ktrans_map[i] = k;
            vp_map[i] = v;
        }
    }

    let mut raw = vec![0.0; t * h * w];
    for f in 0..t {
        for (i, &l) in labels.iter().enumerate() {
            let signal = match l {
                LABEL_AIR => 0.0,
                LABEL_BODY => BODY_SIGNAL,
                LABEL_LV | LABEL_RV => HEART_BASELINE + SIGNAL_PER_MM * aif[f],
                _ => {
                    let c = ktrans_map[i] * integral[f] + vp_map[i] * aif[f];
                    HEART_BASELINE + SIGNAL_PER_MM * c
                }
            };
            raw[f * h * w + i] = signal;
        }
    }
    let (lo, hi) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let span = hi - lo;
    raw.iter_mut().for_each(|v| *v = (*v - lo) / span);

    Ok(PhantomTruth {
        spec: spec.clone(),
        ref_images: CTensor::from_real(&[t, h, w], &raw)?,
        ktrans_map,
        vp_map,
        aif,
        region_labels: labels,
        signal: SignalModel {
            offset: (HEART_BASELINE - lo) / span,
            gain: SIGNAL_PER_MM / span,
        },
    })
}

/// Rescales magnitudes so the series spans `[0,1]`, keeping phase.
pub fn normalize_series(series: &mut DynamicImage) {
    let mags = series.abs();
    let (lo, hi) = mags
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let span = hi - lo;
    if !(span > 0.0) {
        return;
    }
    for (z, m) in series.data_mut().iter_mut().zip(mags) {
        let target = (m - lo) / span;
        *z = if m > 0.0 {
            *z * (target / m)
        } else {
            C64::new(target, 0.0)
        };
    }
}

/// Linear interpolation in time to `target_t` frames, zero-padding in k-space
/// to `target_hw × target_hw`, then joint magnitude normalization to `[0,1]`.
pub fn preprocess(
    series: &DynamicImage,
    target_t: usize,
    target_hw: usize,
) -> Result<DynamicImage> {
    let (t, h, w) = series.dims3()?;
    if !is_power_of_two(target_hw) || !is_power_of_two(h) || !is_power_of_two(w) {
        return Err(Error::Dimension(format!(
            "preprocess needs power-of-two sides, got {h}x{w} -> {target_hw}"
        )));
    }
    if target_t < t {
        return Err(Error::InvalidParameter(format!(
            "temporal downsampling {t} -> {target_t} is not supported"
        )));
    }
    if target_hw < h.max(w) {
        return Err(Error::InvalidParameter(format!(
            "k-space padding cannot shrink {h}x{w} to {target_hw}"
        )));
    }

    let n = h * w;
    let mut interp = CTensor::zeros(&[target_t, h, w]);
    for j in 0..target_t {
        let pos = j as f64 * t as f64 / target_t as f64;
        let i0 = (pos.floor() as usize).min(t - 1);
        let i1 = (i0 + 1).min(t - 1);
        let frac = pos - i0 as f64;
        let (a, b) = (series.frame(i0), series.frame(i1));
        let dst = interp.frame_mut(j);
        for k in 0..n {
            dst[k] = a[k] * (1.0 - frac) + b[k] * frac;
        }
    }

    let mut out = pad_kspace(&interp, target_hw)?;
    normalize_series(&mut out);
    Ok(out)
}

/// Zero-pads each frame's centered spectrum to `size × size` and returns to
/// the image domain. Unitary transforms on both sides keep the energy.
pub fn pad_kspace(series: &DynamicImage, size: usize) -> Result<DynamicImage> {
    let (t, h, w) = series.dims3()?;
    if size == h && size == w {
        return Ok(series.clone());
    }
    if !is_power_of_two(size) || size < h.max(w) {
        return Err(Error::Dimension(format!(
            "cannot pad {h}x{w} k-space to {size}"
        )));
    }
    let spec = dft2_series(series, Direction::Forward)?;
    let mut padded = CTensor::zeros(&[t, size, size]);
    let (hh, hw) = (h as i64 / 2, w as i64 / 2);
    let wrap = |k: i64, n: usize| k.rem_euclid(n as i64) as usize;
    for f in 0..t {
        let src = spec.frame(f);
        let dst = padded.frame_mut(f);
        for ky in -hh..hh {
            for kx in -hw..hw {
                dst[wrap(ky, size) * size + wrap(kx, size)] = src[wrap(ky, h) * w + wrap(kx, w)];
            }
        }
    }
    dft2_series(&padded, Direction::Inverse)
}

/// Encodes the reference with `mask` and adds complex Gaussian noise on the
/// sampled entries. The noise standard deviation is
/// `noise_sigma · max |k[t, 0, kx]|` (largest magnitude on the DC row),
/// split equally between real and imaginary parts.
pub fn corrupt(
    truth: &PhantomTruth,
    mask: &SamplingMask,
    noise_sigma: f64,
    seed: u64,
) -> Result<KtData> {
    if !(noise_sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise_sigma must be >= 0, got {noise_sigma}"
        )));
    }
    let clean = encode(&truth.ref_images, mask)?;
    if noise_sigma == 0.0 {
        return Ok(clean);
    }
    let full = dft2_series(&truth.ref_images, Direction::Forward)?;
    let (t, _h, w) = full.dims3()?;
    let dc_row_max = (0..t)
        .flat_map(|f| {
            full.frame(f)[..w]
                .iter()
                .map(|z| z.norm())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max);
    let std = noise_sigma * dc_row_max / std::f64::consts::SQRT_2;
    let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = clean.samples().clone();
    for (z, &b) in samples.data_mut().iter_mut().zip(mask.bits()) {
        if b {
            *z += C64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }
    KtData::new(samples, mask.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{adjoint, make_radial_mask};

    #[test]
    fn aif_zero_before_arrival_and_peak_at_scale() {
        let t: Vec<f64> = (0..200).map(|i| i as f64 * 0.1).collect();
        let c = gamma_variate_aif(&t, 5.0, 2.0, 4.0, 3.0).unwrap();
        for (ti, ci) in t.iter().zip(&c) {
            if *ti <= 5.0 {
                assert_eq!(*ci, 0.0);
            }
        }
        let peak = gamma_variate_aif(&[13.0], 5.0, 2.0, 4.0, 3.0).unwrap()[0];
        assert!((peak - 3.0).abs() < 1e-12);
        assert!(c.iter().all(|&v| v <= 3.0 + 1e-12));
    }

    #[test]
    fn aif_integral_against_fine_quadrature() {
        // Closed form of ∫_{t0}^{∞}: scale·β·e^α·Γ(α+1)/α^α = 4·e²·2/4 for these inputs;
        // on [0, 200] the tail beyond 200 s is negligible.
        let fine: Vec<f64> = (0..=2_000_000).map(|i| i as f64 * 1e-4).collect();
        let c = gamma_variate_aif(&fine, 5.0, 2.0, 4.0, 1.0).unwrap();
        let integral: f64 = c.windows(2).map(|p| 0.5 * 1e-4 * (p[0] + p[1])).sum();
        let closed = 2.0 * (2.0f64).exp();
        assert!(
            (integral - closed).abs() / closed < 1e-6,
            "{integral} vs {closed}"
        );
    }

    #[test]
    fn aif_rejects_bad_inputs() {
        assert!(gamma_variate_aif(&[0.0, 1.0, 1.0], 0.0, 2.0, 1.0, 1.0).is_err());
        assert!(gamma_variate_aif(&[0.0, 1.0], 0.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn synthesize_is_deterministic() {
        let spec = PhantomSpec {
            seed: 7,
            ..Default::default()
        };
        assert_eq!(synthesize(&spec).unwrap(), synthesize(&spec).unwrap());
        let other = synthesize(&spec.with_seed(8)).unwrap();
        assert_ne!(synthesize(&spec).unwrap().ktrans_map, other.ktrans_map);
    }

    #[test]
    fn reference_is_normalized_with_zero_phase() {
        let truth = synthesize(&PhantomSpec::default()).unwrap();
        let d = truth.ref_images.data();
        assert!(d.iter().all(|z| z.im == 0.0 && z.re >= 0.0 && z.re <= 1.0));
        assert!(d.iter().any(|z| z.re == 0.0));
        assert!(d.iter().any(|z| z.re == 1.0));
        for (i, &l) in truth.region_labels.iter().enumerate() {
            if l < LABEL_TISSUE0 {
                assert_eq!(truth.ktrans_map[i], 0.0);
                assert_eq!(truth.vp_map[i], 0.0);
            }
        }
        assert!(truth.aif.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn static_region_is_flat_and_blood_follows_aif() {
        let truth = synthesize(&PhantomSpec::default()).unwrap();
        let (t, h, w) = truth.ref_images.dims3().unwrap();
        let n = h * w;
        let body = truth
            .region_labels
            .iter()
            .position(|&l| l == LABEL_BODY)
            .unwrap();
        let first = truth.ref_images.data()[body];
        for f in 0..t {
            assert_eq!(truth.ref_images.data()[f * n + body], first);
        }
        // Blood carries C_p directly: signal = offset + gain · C_p.
        let lv = truth
            .region_labels
            .iter()
            .position(|&l| l == LABEL_LV)
            .unwrap();
        for f in 0..t {
            let expect = truth.signal.offset + truth.signal.gain * truth.aif[f];
            assert!((truth.ref_images.data()[f * n + lv].re - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn too_many_sectors_overflow() {
        let spec = PhantomSpec {
            h: 8,
            w: 8,
            n_tissue_regions: 40,
            ..Default::default()
        };
        assert!(matches!(synthesize(&spec), Err(Error::RegionOverflow(_))));
    }

    #[test]
    fn preprocess_identity_and_interpolation() {
        let truth = synthesize(&PhantomSpec::default()).unwrap();
        let same = preprocess(&truth.ref_images, 8, 32).unwrap();
        assert!(same.sub(&truth.ref_images).max_abs() < 1e-12);

        let doubled = preprocess(&truth.ref_images, 16, 32).unwrap();
        for f in 0..8 {
            let a = doubled.frame(2 * f);
            let b = truth.ref_images.frame(f);
            assert!(a.iter().zip(b).all(|(x, y)| (x - y).norm() < 1e-12));
        }
        assert!(preprocess(&truth.ref_images, 4, 32).is_err());
    }

    #[test]
    fn kspace_padding_preserves_energy() {
        let truth = synthesize(&PhantomSpec::default()).unwrap();
        let padded = pad_kspace(&truth.ref_images, 64).unwrap();
        assert_eq!(padded.shape(), &[8, 64, 64]);
        let (e_in, e_out) = (truth.ref_images.norm_sqr(), padded.norm_sqr());
        assert!((e_out - e_in).abs() / e_in < 1e-10);
        assert_eq!(
            preprocess(&truth.ref_images, 8, 64).unwrap().shape(),
            &[8, 64, 64]
        );
    }

    #[test]
    fn corrupt_noiseless_full_mask_round_trip() {
        let truth = synthesize(&PhantomSpec::default()).unwrap();
        let full = SamplingMask::full(8, 32, 32);
        let d = corrupt(&truth, &full, 0.0, 1).unwrap();
        assert!(adjoint(&d).sub(&truth.ref_images).max_abs() < 1e-12);
    }

    #[test]
    fn corrupt_is_reproducible_and_masked() {
        let truth = synthesize(&PhantomSpec::default()).unwrap();
        let mask = make_radial_mask(8, 32, 32, 6.0, 3).unwrap();
        let a = corrupt(&truth, &mask, 0.02, 9).unwrap();
        let b = corrupt(&truth, &mask, 0.02, 9).unwrap();
        assert_eq!(a, b);
        let c = corrupt(&truth, &mask, 0.02, 10).unwrap();
        assert_ne!(a, c);
        for (z, &bit) in a.samples().data().iter().zip(mask.bits()) {
            if !bit {
                assert_eq!(*z, C64::new(0.0, 0.0));
            }
        }
    }
}
