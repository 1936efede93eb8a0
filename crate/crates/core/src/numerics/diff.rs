//! Forward differences with periodic wrap. The adjoints are backward
//! differences with the opposite sign (negative divergence).

use super::CTensor;
use crate::error::Result;

/// Spatial forward differences, shape `[2,T,H,W]`: component 0 along H,
/// component 1 along W.
pub fn grad_spatial(s: &CTensor) -> Result<CTensor> {
    let (t, h, w) = s.dims3()?;
    let n = t * h * w;
    let mut out = CTensor::zeros(&[2, t, h, w]);
    let src = s.data();
    let (gy, gx) = out.data_mut().split_at_mut(n);
    for f in 0..t {
        let base = f * h * w;
        for y in 0..h {
            let yn = (y + 1) % h;
            for x in 0..w {
                let xn = (x + 1) % w;
                let v = src[base + y * w + x];
                gy[base + y * w + x] = src[base + yn * w + x] - v;
                gx[base + y * w + x] = src[base + y * w + xn] - v;
            }
        }
    }
    Ok(out)
}

pub fn grad_spatial_adjoint(g: &CTensor) -> Result<CTensor> {
    let (t, h, w) = match *g.shape() {
        [2, t, h, w] => (t, h, w),
        _ => {
            return Err(crate::Error::Dimension(format!(
                "expected [2,T,H,W] gradient, got {:?}",
                g.shape()
            )))
        }
    };
    let n = t * h * w;
    let (gy, gx) = g.data().split_at(n);
    let mut out = CTensor::zeros(&[t, h, w]);
    let dst = out.data_mut();
    for f in 0..t {
        let base = f * h * w;
        for y in 0..h {
            let yp = (y + h - 1) % h;
            for x in 0..w {
                let xp = (x + w - 1) % w;
                let i = base + y * w + x;
                dst[i] = gy[base + yp * w + x] - gy[i] + gx[base + y * w + xp] - gx[i];
            }
        }
    }
    Ok(out)
}

/// Temporal forward differences with wrap from the last frame to the first.
pub fn grad_temporal(s: &CTensor) -> Result<CTensor> {
    let (t, h, w) = s.dims3()?;
    let n = h * w;
    let mut out = CTensor::zeros(&[t, h, w]);
    let src = s.data();
    let dst = out.data_mut();
    for f in 0..t {
        let fnext = (f + 1) % t;
        for i in 0..n {
            dst[f * n + i] = src[fnext * n + i] - src[f * n + i];
        }
    }
    Ok(out)
}

pub fn grad_temporal_adjoint(g: &CTensor) -> Result<CTensor> {
    let (t, h, w) = g.dims3()?;
    let n = h * w;
    let mut out = CTensor::zeros(&[t, h, w]);
    let src = g.data();
    let dst = out.data_mut();
    for f in 0..t {
        let fprev = (f + t - 1) % t;
        for i in 0..n {
            dst[f * n + i] = src[fprev * n + i] - src[f * n + i];
        }
    }
    Ok(out)
}
