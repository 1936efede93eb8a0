//! Complex tensor storage, the unitary 2-D DFT and periodic finite differences.

mod dft;
mod diff;

pub use dft::{dft2, dft2_series, fft2_in_place, Direction, Frame};
pub use diff::{grad_spatial, grad_spatial_adjoint, grad_temporal, grad_temporal_adjoint};

use crate::error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Row-major complex tensor in double precision.
///
/// Constructors reject NaN and infinite entries; arithmetic helpers do not
/// re-check.
#[derive(Clone, Debug, PartialEq)]
pub struct CTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

/// A `[T, H, W]` complex image series.
pub type DynamicImage = CTensor;

impl CTensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![C64::new(0.0, 0.0); n],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<C64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if data.len() != n {
            return Err(Error::Dimension(format!(
                "shape {:?} needs {} values, got {}",
                shape,
                n,
                data.len()
            )));
        }
        if let Some(i) = data
            .iter()
            .position(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn from_real(shape: &[usize], values: &[f64]) -> Result<Self> {
        Self::from_vec(shape, values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `(T, H, W)` for a 3-D tensor.
    pub fn dims3(&self) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [t, h, w] => Ok((t, h, w)),
            _ => Err(Error::Dimension(format!(
                "expected a [T,H,W] tensor, got shape {:?}",
                self.shape
            ))),
        }
    }

    pub fn frame(&self, t: usize) -> &[C64] {
        let n = self.shape[1..].iter().product::<usize>();
        &self.data[t * n..(t + 1) * n]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [C64] {
        let n = self.shape[1..].iter().product::<usize>();
        &mut self.data[t * n..(t + 1) * n]
    }

    pub fn check_same_shape(&self, other: &CTensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                expected: self.shape.clone(),
                got: other.shape.clone(),
            });
        }
        Ok(())
    }

    /// `⟨self, other⟩ = Σ conj(self) · other`.
    pub fn inner(&self, other: &CTensor) -> C64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Real part of the inner product; the directional derivative pairing
    /// when complex values are treated as pairs of reals.
    pub fn real_dot(&self, other: &CTensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn abs(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm()).collect()
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|z| *z *= a);
    }

    pub fn scaled(&self, a: f64) -> CTensor {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// `self += a · x`
    pub fn axpy(&mut self, a: C64, x: &CTensor) {
        debug_assert_eq!(self.shape, x.shape);
        for (y, xv) in self.data.iter_mut().zip(&x.data) {
            *y += a * xv;
        }
    }

    pub fn add(&self, other: &CTensor) -> CTensor {
        let mut out = self.clone();
        out.axpy(C64::new(1.0, 0.0), other);
        out
    }

    pub fn sub(&self, other: &CTensor) -> CTensor {
        let mut out = self.clone();
        out.axpy(C64::new(-1.0, 0.0), other);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Mean over the leading (time) axis of a `[T,H,W]` tensor, shape `[H,W]`.
    pub fn temporal_mean(&self) -> Result<CTensor> {
        let (t, h, w) = self.dims3()?;
        let mut out = CTensor::zeros(&[h, w]);
        for f in 0..t {
            for (o, v) in out.data.iter_mut().zip(self.frame(f)) {
                *o += v;
            }
        }
        out.scale(1.0 / t as f64);
        Ok(out)
    }

    /// Copies a `[H,W]` image into every frame of a `[T,H,W]` series.
    pub fn broadcast_frames(image: &CTensor, t: usize) -> CTensor {
        let mut shape = vec![t];
        shape.extend_from_slice(&image.shape);
        let mut data = Vec::with_capacity(t * image.len());
        for _ in 0..t {
            data.extend_from_slice(&image.data);
        }
        CTensor { shape, data }
    }
}

pub fn is_power_of_two(n: usize) -> bool {
    n > 0 && n & (n - 1) == 0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructor_rejects_non_finite() {
        let bad = vec![C64::new(0.0, 0.0), C64::new(f64::NAN, 0.0)];
        assert!(matches!(
            CTensor::from_vec(&[2], bad),
            Err(Error::NonFinite(1))
        ));
        assert!(CTensor::from_vec(&[3], vec![C64::new(1.0, 0.0); 2]).is_err());
    }

    #[test]
    fn temporal_mean_and_broadcast() {
        let x = CTensor::from_real(&[2, 1, 2], &[1.0, 2.0, 3.0, 6.0]).unwrap();
        let m = x.temporal_mean().unwrap();
        assert_eq!(m.data(), &[C64::new(2.0, 0.0), C64::new(4.0, 0.0)]);
        let b = CTensor::broadcast_frames(&m, 3);
        assert_eq!(b.shape(), &[3, 1, 2]);
        assert_eq!(b.frame(2), m.data());
    }
}
