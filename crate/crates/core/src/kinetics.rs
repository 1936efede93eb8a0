//! Patlak graphical analysis:
//! `C_t(t) = K^Trans · ∫₀ᵗ C_p dτ + v_p · C_p(t)`,
//! fitted per pixel by ordinary least squares. Time is in seconds on input;
//! the integral is taken in minutes so `K^Trans` comes out in 1/min.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::DynamicImage;
use crate::phantom::{cumulative_trapezoid_minutes, SignalModel};

/// Frames with `C_p` at or below this fraction of its peak are left out of
/// the fit.
pub const AIF_FRACTION_THRESHOLD: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct PatlakMap {
    pub h: usize,
    pub w: usize,
    /// 1/min; NaN outside `mask_roi`.
    pub ktrans: Vec<f64>,
    pub vp: Vec<f64>,
    pub fit_r2: Vec<f64>,
    /// Pixels that were requested and produced a valid fit.
    pub mask_roi: Vec<bool>,
}

impl PatlakMap {
    pub fn roi_ktrans(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.mask_roi
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| (i, self.ktrans[i]))
    }
}

/// Least-squares design shared by every pixel.
#[derive(Clone, Debug)]
pub struct PatlakDesign {
    frames: Vec<usize>,
    integral: Vec<f64>,
    plasma: Vec<f64>,
    // inverse of the 2×2 normal matrix
    inv: [[f64; 2]; 2],
}

impl PatlakDesign {
    /// `None` when fewer than two usable frames remain or the regressors
    /// are collinear.
    pub fn new(aif: &[f64], dt: f64) -> Result<Option<Self>> {
        if aif.len() < 3 {
            return Err(Error::InvalidParameter(format!(
                "Patlak fit needs T >= 3, got {}",
                aif.len()
            )));
        }
        let peak = aif.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(peak > 0.0) {
            return Err(Error::InvalidParameter("AIF is identically zero".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {dt}"
            )));
        }
        let cum = cumulative_trapezoid_minutes(aif, dt);
        let frames: Vec<usize> = (0..aif.len())
            .filter(|&i| aif[i] > AIF_FRACTION_THRESHOLD * peak)
            .collect();
        let integral: Vec<f64> = frames.iter().map(|&i| cum[i]).collect();
        let plasma: Vec<f64> = frames.iter().map(|&i| aif[i]).collect();
        let s11: f64 = integral.iter().map(|v| v * v).sum();
        let s22: f64 = plasma.iter().map(|v| v * v).sum();
        let s12: f64 = integral.iter().zip(&plasma).map(|(a, b)| a * b).sum();
        let det = s11 * s22 - s12 * s12;
        if frames.len() < 2 || !(det.abs() > 1e-12 * s11 * s22) {
            return Ok(None);
        }
        let inv = [[s22 / det, -s12 / det], [-s12 / det, s11 / det]];
        Ok(Some(Self {
            frames,
            integral,
            plasma,
            inv,
        }))
    }

    pub fn frames(&self) -> &[usize] {
        &self.frames
    }

    /// `(K^Trans, v_p, R²)` for one concentration curve over all frames.
    pub fn fit(&self, curve: &[f64]) -> (f64, f64, f64) {
        let y: Vec<f64> = self.frames.iter().map(|&i| curve[i]).collect();
        let b1: f64 = self.integral.iter().zip(&y).map(|(a, b)| a * b).sum();
        let b2: f64 = self.plasma.iter().zip(&y).map(|(a, b)| a * b).sum();
        let k = self.inv[0][0] * b1 + self.inv[0][1] * b2;
        let v = self.inv[1][0] * b1 + self.inv[1][1] * b2;
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let (mut ss_res, mut ss_tot) = (0.0, 0.0);
        for (j, yj) in y.iter().enumerate() {
            let pred = k * self.integral[j] + v * self.plasma[j];
            ss_res += (yj - pred).powi(2);
            ss_tot += (yj - mean).powi(2);
        }
        let r2 = if ss_tot > 0.0 {
            (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
        } else if ss_res <= 1e-24 {
            1.0
        } else {
            0.0
        };
        (k, v, r2)
    }
}

fn fit_curves(
    curves: &[f64],
    t: usize,
    h: usize,
    w: usize,
    aif: &[f64],
    dt: f64,
    roi: &[bool],
) -> Result<PatlakMap> {
    if aif.len() != t {
        return Err(Error::Dimension(format!(
            "AIF has {} samples for {t} frames",
            aif.len()
        )));
    }
    if roi.len() != h * w {
        return Err(Error::Dimension(format!(
            "ROI has {} pixels, image {}",
            roi.len(),
            h * w
        )));
    }
    let n = h * w;
    let mut map = PatlakMap {
        h,
        w,
        ktrans: vec![f64::NAN; n],
        vp: vec![f64::NAN; n],
        fit_r2: vec![f64::NAN; n],
        mask_roi: vec![false; n],
    };
    let Some(design) = PatlakDesign::new(aif, dt)? else {
        log::warn!("Patlak design matrix is singular; no pixel fitted");
        return Ok(map);
    };
    let fits: Vec<Option<(f64, f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|p| {
            if !roi[p] {
                return None;
            }
            let curve: Vec<f64> = (0..t).map(|f| curves[f * n + p]).collect();
            let fit = design.fit(&curve);
            (fit.0.is_finite() && fit.1.is_finite()).then_some(fit)
        })
        .collect();
    for (p, fit) in fits.into_iter().enumerate() {
        if let Some((k, v, r2)) = fit {
            map.ktrans[p] = k;
            map.vp[p] = v;
            map.fit_r2[p] = r2;
            map.mask_roi[p] = true;
        }
    }
    Ok(map)
}

/// Fits the magnitude of `series` as tissue concentration.
pub fn patlak_fit(series: &DynamicImage, aif: &[f64], dt: f64, roi: &[bool]) -> Result<PatlakMap> {
    let (t, h, w) = series.dims3()?;
    fit_curves(&series.abs(), t, h, w, aif, dt, roi)
}

/// Converts signal to concentration with `model`, then fits.
pub fn patlak_fit_signal(
    series: &DynamicImage,
    model: &SignalModel,
    aif: &[f64],
    dt: f64,
    roi: &[bool],
) -> Result<PatlakMap> {
    let (t, h, w) = series.dims3()?;
    fit_curves(&model.to_concentration(series), t, h, w, aif, dt, roi)
}

/// `‖k_est − k_true‖ / ‖k_true‖` over pixels that are both in the map ROI
/// and in `roi`.
pub fn ktrans_nrmse(map: &PatlakMap, truth: &[f64], roi: &[bool]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, k) in map.roi_ktrans() {
        if roi[i] {
            num += (k - truth[i]).powi(2);
            den += truth[i].powi(2);
        }
    }
    (num / den).sqrt()
}
