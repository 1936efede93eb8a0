use std::cell::RefCell;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use super::{is_power_of_two, CTensor, C64};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// A single `h × w` frame; both sides must be powers of two.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    h: usize,
    w: usize,
    data: CTensor,
}

impl Frame {
    pub fn new(h: usize, w: usize, data: Vec<C64>) -> Result<Self> {
        check_pow2(h, w)?;
        Ok(Self {
            h,
            w,
            data: CTensor::from_vec(&[h, w], data)?,
        })
    }

    pub fn from_tensor(t: CTensor) -> Result<Self> {
        match *t.shape() {
            [h, w] => {
                check_pow2(h, w)?;
                Ok(Self { h, w, data: t })
            }
            _ => Err(Error::Dimension(format!(
                "frame must be 2-D, got {:?}",
                t.shape()
            ))),
        }
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn tensor(&self) -> &CTensor {
        &self.data
    }

    pub fn into_tensor(self) -> CTensor {
        self.data
    }
}

fn check_pow2(h: usize, w: usize) -> Result<()> {
    if !is_power_of_two(h) || !is_power_of_two(w) {
        return Err(Error::Dimension(format!(
            "DFT needs power-of-two sides, got {h}x{w}"
        )));
    }
    Ok(())
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, dir: Direction) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        match dir {
            Direction::Forward => p.plan_fft_forward(n),
            Direction::Inverse => p.plan_fft_inverse(n),
        }
    })
}

/// Unitary 2-D DFT of a row-major `h × w` buffer, in place.
///
/// Both directions scale by `1/sqrt(h·w)`. Sides are not checked here.
pub fn fft2_in_place(buf: &mut [C64], h: usize, w: usize, dir: Direction) {
    debug_assert_eq!(buf.len(), h * w);
    plan(w, dir).process(buf);

    let mut cols = vec![C64::new(0.0, 0.0); h * w];
    for y in 0..h {
        for x in 0..w {
            cols[x * h + y] = buf[y * w + x];
        }
    }
    plan(h, dir).process(&mut cols);

    let scale = 1.0 / ((h * w) as f64).sqrt();
    for x in 0..w {
        for y in 0..h {
            buf[y * w + x] = cols[x * h + y] * scale;
        }
    }
}

pub fn dft2(x: &Frame, dir: Direction) -> Frame {
    let mut out = x.clone();
    fft2_in_place(out.data.data_mut(), x.h, x.w, dir);
    out
}

/// Frame-wise unitary DFT of a `[T,H,W]` series.
pub fn dft2_series(s: &CTensor, dir: Direction) -> Result<CTensor> {
    let (t, h, w) = s.dims3()?;
    check_pow2(h, w)?;
    let mut out = s.clone();
    for f in 0..t {
        fft2_in_place(out.frame_mut(f), h, w, dir);
    }
    Ok(out)
}
