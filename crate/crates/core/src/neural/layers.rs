//! Dense `[C,H,W]` activations and the primitive layers with their adjoints.

use rayon::prelude::*;

#[derive(Clone, Debug, PartialEq)]
pub struct Act {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Act {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self {
            c,
            h,
            w,
            data: vec![0.0; c * h * w],
        }
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.h * self.w;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn concat(a: &Act, b: &Act) -> Act {
        debug_assert_eq!((a.h, a.w), (b.h, b.w));
        let mut data = Vec::with_capacity(a.data.len() + b.data.len());
        data.extend_from_slice(&a.data);
        data.extend_from_slice(&b.data);
        Act {
            c: a.c + b.c,
            h: a.h,
            w: a.w,
            data,
        }
    }

    /// Splits channels `[0, c)` from the rest.
    pub fn split(self, c: usize) -> (Act, Act) {
        let n = self.h * self.w;
        let mut data = self.data;
        let rest = data.split_off(c * n);
        (
            Act {
                c,
                h: self.h,
                w: self.w,
                data,
            },
            Act {
                c: self.c - c,
                h: self.h,
                w: self.w,
                data: rest,
            },
        )
    }
}

/// Valid range of output indices `o` such that `o + d` lies in `[0, n)`.
fn valid(n: usize, d: isize) -> (usize, usize) {
    let lo = (-d).max(0) as usize;
    let hi = (n as isize - d.max(0)).max(0) as usize;
    (lo.min(n), hi.max(lo.min(n)))
}

/// Same-size convolution (cross-correlation) with zero padding.
/// Weights are laid out `[out][in][k][k]`.
pub fn conv_forward(x: &Act, weights: &[f64], bias: &[f64], out_c: usize, k: usize) -> Act {
    let (h, w, n) = (x.h, x.w, x.h * x.w);
    let r = (k / 2) as isize;
    let mut out = Act::zeros(out_c, h, w);
    out.data
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(o, plane)| {
            plane.iter_mut().for_each(|v| *v = bias[o]);
            for i in 0..x.c {
                let src = x.plane(i);
                for ky in 0..k {
                    let dy = ky as isize - r;
                    let (ylo, yhi) = valid(h, dy);
                    for kx in 0..k {
                        let dx = kx as isize - r;
                        let (xlo, xhi) = valid(w, dx);
                        let wv = weights[((o * x.c + i) * k + ky) * k + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        for y in ylo..yhi {
                            let sy = (y as isize + dy) as usize;
                            let dst = &mut plane[y * w + xlo..y * w + xhi];
                            let s = &src[sy * w + (xlo as isize + dx) as usize
                                ..sy * w + (xhi as isize + dx) as usize];
                            for (a, b) in dst.iter_mut().zip(s) {
                                *a += wv * b;
                            }
                        }
                    }
                }
            }
        });
    out
}

/// Adjoint of [`conv_forward`]: accumulates weight and bias gradients and
/// returns the gradient with respect to the input.
pub fn conv_backward(
    x: &Act,
    weights: &[f64],
    g: &Act,
    k: usize,
    grad_w: &mut [f64],
    grad_b: &mut [f64],
) -> Act {
    let (h, w, n) = (x.h, x.w, x.h * x.w);
    let r = (k / 2) as isize;
    let in_c = x.c;

    grad_w
        .par_chunks_mut(in_c * k * k)
        .zip(grad_b.par_iter_mut())
        .enumerate()
        .for_each(|(o, (gw, gb))| {
            let gp = g.plane(o);
            *gb += gp.iter().sum::<f64>();
            for i in 0..in_c {
                let src = x.plane(i);
                for ky in 0..k {
                    let dy = ky as isize - r;
                    let (ylo, yhi) = valid(h, dy);
                    for kx in 0..k {
                        let dx = kx as isize - r;
                        let (xlo, xhi) = valid(w, dx);
                        let mut acc = 0.0;
                        for y in ylo..yhi {
                            let sy = (y as isize + dy) as usize;
                            let a = &gp[y * w + xlo..y * w + xhi];
                            let s = &src[sy * w + (xlo as isize + dx) as usize
                                ..sy * w + (xhi as isize + dx) as usize];
                            acc += a.iter().zip(s).map(|(p, q)| p * q).sum::<f64>();
                        }
                        gw[(i * k + ky) * k + kx] += acc;
                    }
                }
            }
        });

    let mut gx = Act::zeros(in_c, h, w);
    gx.data
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i, plane)| {
            for o in 0..g.c {
                let gp = g.plane(o);
                for ky in 0..k {
                    let dy = ky as isize - r;
                    let (ylo, yhi) = valid(h, dy);
                    for kx in 0..k {
                        let dx = kx as isize - r;
                        let (xlo, xhi) = valid(w, dx);
                        let wv = weights[((o * in_c + i) * k + ky) * k + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        for y in ylo..yhi {
                            let sy = (y as isize + dy) as usize;
                            let src = &gp[y * w + xlo..y * w + xhi];
                            let dst = &mut plane[sy * w + (xlo as isize + dx) as usize
                                ..sy * w + (xhi as isize + dx) as usize];
                            for (a, b) in dst.iter_mut().zip(src) {
                                *a += wv * b;
                            }
                        }
                    }
                }
            }
        });
    gx
}

pub fn relu_in_place(x: &mut Act) {
    x.data.iter_mut().for_each(|v| *v = v.max(0.0));
}

/// Masks `g` by the sign pattern of the pre-activation.
pub fn relu_backward(pre: &Act, g: &mut Act) {
    for (gv, &p) in g.data.iter_mut().zip(&pre.data) {
        if p <= 0.0 {
            *gv = 0.0;
        }
    }
}

/// 2×2 average pooling.
pub fn avg_pool(x: &Act) -> Act {
    let (h2, w2) = (x.h / 2, x.w / 2);
    let mut out = Act::zeros(x.c, h2, w2);
    for c in 0..x.c {
        let src = x.plane(c);
        for y in 0..h2 {
            for xx in 0..w2 {
                let i = 2 * y * x.w + 2 * xx;
                out.data[(c * h2 + y) * w2 + xx] =
                    0.25 * (src[i] + src[i + 1] + src[i + x.w] + src[i + x.w + 1]);
            }
        }
    }
    out
}

pub fn avg_pool_backward(g: &Act) -> Act {
    let (h, w) = (g.h * 2, g.w * 2);
    let mut out = Act::zeros(g.c, h, w);
    for c in 0..g.c {
        for y in 0..h {
            for x in 0..w {
                out.data[(c * h + y) * w + x] = 0.25 * g.data[(c * g.h + y / 2) * g.w + x / 2];
            }
        }
    }
    out
}

/// Nearest-neighbour 2× upsampling.
pub fn upsample(x: &Act) -> Act {
    let (h, w) = (x.h * 2, x.w * 2);
    let mut out = Act::zeros(x.c, h, w);
    for c in 0..x.c {
        for y in 0..h {
            for xx in 0..w {
                out.data[(c * h + y) * w + xx] = x.data[(c * x.h + y / 2) * x.w + xx / 2];
            }
        }
    }
    out
}

pub fn upsample_backward(g: &Act) -> Act {
    let (h2, w2) = (g.h / 2, g.w / 2);
    let mut out = Act::zeros(g.c, h2, w2);
    for c in 0..g.c {
        for y in 0..g.h {
            for x in 0..g.w {
                out.data[(c * h2 + y / 2) * w2 + x / 2] += g.data[(c * g.h + y) * g.w + x];
            }
        }
    }
    out
}
