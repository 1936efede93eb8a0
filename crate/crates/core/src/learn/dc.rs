//! Data consistency `(EᴴE + λI)⁻¹ (Eᴴ d_u + λ z)` by conjugate gradient.

use crate::encoding::{adjoint, normal_op, KtData, SamplingMask};
use crate::error::{Error, Result};
use crate::numerics::{CTensor, DynamicImage, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgOptions {
    pub max_iters: usize,
    /// Relative residual `‖A x − b‖ / ‖b‖` at which iteration stops.
    pub tol: f64,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            max_iters: 10,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: CTensor,
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
}

/// Conjugate gradient for a Hermitian positive-definite operator, from zero.
pub fn conjugate_gradient<F>(apply: F, rhs: &CTensor, opts: &CgOptions) -> Result<CgOutcome>
where
    F: Fn(&CTensor) -> Result<CTensor>,
{
    let b_norm = rhs.norm();
    let mut x = CTensor::zeros(rhs.shape());
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            rel_residual: 0.0,
            converged: true,
        });
    }
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rr = r.norm_sqr();
    let mut iterations = 0;
    while iterations < opts.max_iters && rr.sqrt() / b_norm > opts.tol {
        let ap = apply(&p)?;
        let pap = p.real_dot(&ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rr / pap;
        x.axpy(C64::new(alpha, 0.0), &p);
        r.axpy(C64::new(-alpha, 0.0), &ap);
        let rr_new = r.norm_sqr();
        let beta = rr_new / rr;
        let mut p_new = r.clone();
        p_new.axpy(C64::new(beta, 0.0), &p);
        p = p_new;
        rr = rr_new;
        iterations += 1;
    }
    // recompute the true residual rather than trusting the recursion
    let rel_residual = apply(&x)?.sub(rhs).norm() / b_norm;
    Ok(CgOutcome {
        x,
        iterations,
        rel_residual,
        converged: rel_residual <= opts.tol,
    })
}

/// Solves `(EᴴE + λI) s = rhs` for the given mask.
pub fn solve_normal(
    rhs: &CTensor,
    mask: &SamplingMask,
    lambda: f64,
    opts: &CgOptions,
) -> Result<CgOutcome> {
    conjugate_gradient(|v| normal_op(v, mask, lambda), rhs, opts)
}

/// Data-consistency step of the unrolled reconstruction. When CG stops
/// before reaching `opts.tol`, the best iterate is returned with
/// `converged == false` and a warning is logged.
pub fn dc_solve(
    z: &DynamicImage,
    d_u: &KtData,
    lambda: f64,
    opts: &CgOptions,
) -> Result<CgOutcome> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "data-consistency lambda must be > 0, got {lambda}"
        )));
    }
    z.check_same_shape(d_u.samples())?;
    let mut rhs = adjoint(d_u);
    rhs.axpy(C64::new(lambda, 0.0), z);
    let out = solve_normal(&rhs, d_u.mask(), lambda, opts)?;
    if !out.converged {
        log::warn!(
            "data-consistency CG stopped after {} iterations at relative residual {:.3e}",
            out.iterations,
            out.rel_residual
        );
    }
    Ok(out)
}
