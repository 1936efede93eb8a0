//! PSNR, SSIM and NRMSE on magnitude images.

use std::io::Write;

use crate::error::{Error, Result};
use crate::numerics::DynamicImage;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check(x: &DynamicImage, r: &DynamicImage) -> Result<(usize, usize, usize)> {
    x.check_same_shape(r)?;
    r.dims3()
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

fn psnr_from(peak: f64, mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

/// `10·log10(peak² / MSE)` on magnitudes, `peak = max |ref|` over the series.
/// Identical inputs give `+inf`.
pub fn psnr(x: &DynamicImage, reference: &DynamicImage) -> Result<f64> {
    check(x, reference)?;
    let peak = reference.max_abs();
    if !(peak > 0.0) {
        return Err(Error::InvalidParameter("reference peak must be > 0".into()));
    }
    Ok(psnr_from(peak, mse(&x.abs(), &reference.abs())))
}

/// `‖x − ref‖ / ‖ref‖` over the whole series.
pub fn nrmse(x: &DynamicImage, reference: &DynamicImage) -> Result<f64> {
    check(x, reference)?;
    let (a, b) = (x.abs(), reference.abs());
    let den: f64 = b.iter().map(|v| v * v).sum();
    if !(den > 0.0) {
        return Err(Error::InvalidParameter("reference has zero norm".into()));
    }
    let num: f64 = a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum();
    Ok((num / den).sqrt())
}

fn gaussian_kernel() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let k: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-((i as f64 - r).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

// Half-sample symmetric reflection.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Separable Gaussian filter with symmetric boundary handling.
fn blur(img: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let r = (k.len() / 2) as isize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(j, kv)| kv * img[y * w + reflect(x as isize + j as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(j, kv)| kv * tmp[reflect(y as isize + j as isize - r, h) * w + x])
                .sum();
        }
    }
    out
}

/// Mean SSIM of one magnitude frame pair with dynamic range `l`.
pub fn ssim_frame(x: &[f64], y: &[f64], h: usize, w: usize, l: f64) -> f64 {
    let k = gaussian_kernel();
    let c1 = (SSIM_K1 * l).powi(2);
    let c2 = (SSIM_K2 * l).powi(2);
    let prod = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).collect::<Vec<_>>();
    let mx = blur(x, h, w, &k);
    let my = blur(y, h, w, &k);
    let mxx = blur(&prod(x, x), h, w, &k);
    let myy = blur(&prod(y, y), h, w, &k);
    let mxy = blur(&prod(x, y), h, w, &k);
    let mut acc = 0.0;
    for i in 0..h * w {
        let vx = mxx[i] - mx[i] * mx[i];
        let vy = myy[i] - my[i] * my[i];
        let cxy = mxy[i] - mx[i] * my[i];
        acc += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2))
            / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    acc / (h * w) as f64
}

/// Mean over frames of the per-frame SSIM, `L = max |ref|`.
pub fn ssim(x: &DynamicImage, reference: &DynamicImage) -> Result<f64> {
    ssim_with_range(x, reference, reference.max_abs())
}

/// SSIM with an explicit dynamic range; symmetric in its two images.
pub fn ssim_with_range(x: &DynamicImage, reference: &DynamicImage, l: f64) -> Result<f64> {
    let (t, h, w) = check(x, reference)?;
    let (a, b) = (x.abs(), reference.abs());
    let n = h * w;
    let total: f64 = (0..t)
        .map(|f| ssim_frame(&a[f * n..(f + 1) * n], &b[f * n..(f + 1) * n], h, w, l))
        .sum();
    Ok(total / t as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub psnr: Vec<f64>,
    pub ssim: Vec<f64>,
    pub nrmse: Vec<f64>,
}

impl MetricsReport {
    /// Per-frame metrics. PSNR and SSIM use the series-wide reference peak so
    /// frames are comparable; NRMSE is normalized by each reference frame.
    pub fn compute(x: &DynamicImage, reference: &DynamicImage) -> Result<Self> {
        let (t, h, w) = check(x, reference)?;
        let peak = reference.max_abs();
        if !(peak > 0.0) {
            return Err(Error::InvalidParameter("reference peak must be > 0".into()));
        }
        let (a, b) = (x.abs(), reference.abs());
        let n = h * w;
        let mut rep = MetricsReport {
            psnr: Vec::new(),
            ssim: Vec::new(),
            nrmse: Vec::new(),
        };
        for f in 0..t {
            let (xa, rb) = (&a[f * n..(f + 1) * n], &b[f * n..(f + 1) * n]);
            rep.psnr.push(psnr_from(peak, mse(xa, rb)));
            rep.ssim.push(ssim_frame(xa, rb, h, w, peak));
            let den: f64 = rb.iter().map(|v| v * v).sum();
            let num: f64 = xa.iter().zip(rb).map(|(p, q)| (p - q).powi(2)).sum();
            rep.nrmse.push(if den > 0.0 {
                (num / den).sqrt()
            } else {
                f64::NAN
            });
        }
        Ok(rep)
    }

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    pub fn psnr_mean(&self) -> f64 {
        Self::mean(&self.psnr)
    }

    pub fn ssim_mean(&self) -> f64 {
        Self::mean(&self.ssim)
    }

    pub fn nrmse_mean(&self) -> f64 {
        Self::mean(&self.nrmse)
    }
}

pub const METRICS_HEADER: &str = "method,accel,phantom_id,frame,psnr,ssim,nrmse";

fn fmt_metric(v: f64) -> String {
    if v.is_infinite() && v > 0.0 {
        "inf".to_string()
    } else {
        format!("{v:.6}")
    }
}

#[allow(clippy::too_many_arguments)]
pub fn write_metrics_row<W: Write>(
    out: &mut W,
    method: &str,
    accel: f64,
    phantom_id: u64,
    frame: &str,
    psnr: f64,
    ssim: f64,
    nrmse: f64,
) -> std::io::Result<()> {
    writeln!(
        out,
        "{method},{accel},{phantom_id},{frame},{},{},{}",
        fmt_metric(psnr),
        fmt_metric(ssim),
        fmt_metric(nrmse)
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{CTensor, C64};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_real(shape: &[usize], seed: u64) -> CTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n: usize = shape.iter().product();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        CTensor::from_real(shape, &v).unwrap()
    }

    #[test]
    fn psnr_cases() {
        let r = random_real(&[2, 8, 8], 1);
        assert_eq!(psnr(&r, &r).unwrap(), f64::INFINITY);

        let mut rv = vec![0.5; 128];
        rv[0] = 1.0;
        let r = CTensor::from_real(&[2, 8, 8], &rv).unwrap();
        let x = CTensor::from_real(&[2, 8, 8], &rv.iter().map(|v| v + 0.1).collect::<Vec<_>>())
            .unwrap();
        assert!((psnr(&x, &r).unwrap() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn psnr_matches_direct_formula() {
        let r = random_real(&[3, 8, 8], 2);
        let x = random_real(&[3, 8, 8], 3);
        let mut peak = 0.0f64;
        let mut se = 0.0;
        for (a, b) in x.data().iter().zip(r.data()) {
            peak = peak.max(b.norm());
            se += (a.norm() - b.norm()).powi(2);
        }
        let oracle = 10.0 * (peak * peak / (se / 192.0)).log10();
        assert!((psnr(&x, &r).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn nrmse_cases() {
        let r = random_real(&[2, 8, 8], 4);
        assert_eq!(nrmse(&r, &r).unwrap(), 0.0);
        assert!((nrmse(&CTensor::zeros(&[2, 8, 8]), &r).unwrap() - 1.0).abs() < 1e-12);
        assert!((nrmse(&r.scaled(1.1), &r).unwrap() - 0.1).abs() < 1e-12);
        assert!(nrmse(&r, &CTensor::zeros(&[2, 8, 8])).is_err());
    }

    #[test]
    fn ssim_identity_and_affine_penalty() {
        let r = random_real(&[2, 16, 16], 5);
        assert!((ssim(&r, &r).unwrap() - 1.0).abs() < 1e-12);
        let mut x = r.scaled(0.7);
        x.data_mut()
            .iter_mut()
            .for_each(|z| *z += C64::new(0.1, 0.0));
        assert!(ssim(&x, &r).unwrap() < 1.0);
    }

    #[test]
    fn ssim_constant_patches_by_hand() {
        // Constant images: zero variance everywhere, so SSIM reduces to the
        // luminance term (2·a·b + C1) / (a² + b² + C1) with L = b.
        let (a, b) = (0.3, 0.8);
        let x = CTensor::from_real(&[1, 8, 8], &[a; 64]).unwrap();
        let r = CTensor::from_real(&[1, 8, 8], &[b; 64]).unwrap();
        let c1 = (0.01f64 * 0.8).powi(2);
        let expect = (2.0 * a * b + c1) / (a * a + b * b + c1);
        assert!((ssim(&x, &r).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn ssim_is_symmetric_with_shared_range() {
        let a = random_real(&[2, 16, 16], 6);
        let b = random_real(&[2, 16, 16], 7);
        let s1 = ssim_with_range(&a, &b, 1.0).unwrap();
        let s2 = ssim_with_range(&b, &a, 1.0).unwrap();
        assert!((s1 - s2).abs() < 1e-12);
    }

    #[test]
    fn report_lengths_and_inf_formatting() {
        let r = random_real(&[3, 8, 8], 8);
        let rep = MetricsReport::compute(&r, &r).unwrap();
        assert_eq!(rep.psnr.len(), 3);
        assert_eq!(rep.ssim.len(), 3);
        assert_eq!(rep.nrmse.len(), 3);
        let mut buf = Vec::new();
        write_metrics_row(
            &mut buf,
            "zf",
            6.0,
            1,
            "mean",
            rep.psnr_mean(),
            rep.ssim_mean(),
            rep.nrmse_mean(),
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "zf,6,1,mean,inf,1.000000,0.000000\n"
        );
    }
}
