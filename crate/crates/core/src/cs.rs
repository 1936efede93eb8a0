//! Compressed-sensing baseline: least-squares data fit plus smoothed ℓ1
//! penalties on spatial and temporal finite differences, minimized with
//! Fletcher–Reeves nonlinear conjugate gradient.

use serde::{Deserialize, Serialize};

use crate::encoding::{adjoint, encode, KtData};
use crate::error::{Error, Result};
use crate::numerics::{
    grad_spatial, grad_spatial_adjoint, grad_temporal, grad_temporal_adjoint, CTensor,
    DynamicImage, C64,
};

const ARMIJO_C: f64 = 1e-4;
const BACKTRACK_SHRINK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CsConfig {
    /// Spatial TV weight.
    pub lambda1: f64,
    /// Temporal TV weight.
    pub lambda2: f64,
    pub max_iters: usize,
    pub smooth_eps: f64,
    /// Relative objective change that ends the iteration.
    pub tol: f64,
}

impl Default for CsConfig {
    fn default() -> Self {
        Self {
            lambda1: 1e-3,
            lambda2: 5e-3,
            max_iters: 100,
            smooth_eps: 1e-6,
            tol: 1e-6,
        }
    }
}

impl CsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return Err(Error::InvalidParameter("CS weights must be >= 0".into()));
        }
        if !(self.smooth_eps > 0.0) || !(self.tol >= 0.0) {
            return Err(Error::InvalidParameter(
                "smooth_eps must be > 0 and tol >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceLog {
    /// Objective at the initial point followed by one entry per accepted step.
    pub objective: Vec<f64>,
    /// Step length of each accepted step.
    pub step: Vec<f64>,
    /// Set when the line search gave up; the returned image is the last
    /// accepted iterate.
    pub line_search_failed: bool,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct IterationInfo {
    pub iteration: usize,
    pub objective: f64,
    pub step: f64,
}

fn smoothed_l1(g: &CTensor, eps: f64) -> f64 {
    g.data().iter().map(|z| (z.norm_sqr() + eps).sqrt()).sum()
}

fn smoothed_l1_grad(g: &CTensor, eps: f64) -> CTensor {
    let mut out = g.clone();
    out.data_mut()
        .iter_mut()
        .for_each(|z| *z /= (z.norm_sqr() + eps).sqrt());
    out
}

/// `‖d_u − Es‖² + λ1 Σ √(|∇_s s|²+ε) + λ2 Σ √(|∇_t s|²+ε)`.
pub fn cs_objective(s: &DynamicImage, d_u: &KtData, cfg: &CsConfig) -> Result<f64> {
    let resid = encode(s, d_u.mask())?.samples().sub(d_u.samples());
    let mut f = resid.norm_sqr();
    if cfg.lambda1 > 0.0 {
        f += cfg.lambda1 * smoothed_l1(&grad_spatial(s)?, cfg.smooth_eps);
    }
    if cfg.lambda2 > 0.0 {
        f += cfg.lambda2 * smoothed_l1(&grad_temporal(s)?, cfg.smooth_eps);
    }
    Ok(f)
}

/// Gradient of [`cs_objective`] with real and imaginary parts packed as one
/// complex value, so `Re⟨grad, p⟩` is the directional derivative along `p`.
pub fn cs_gradient(s: &DynamicImage, d_u: &KtData, cfg: &CsConfig) -> Result<DynamicImage> {
    let enc = encode(s, d_u.mask())?;
    let resid = KtData::new(enc.samples().sub(d_u.samples()), d_u.mask().clone())?;
    let mut g = adjoint(&resid);
    g.scale(2.0);
    if cfg.lambda1 > 0.0 {
        let w = smoothed_l1_grad(&grad_spatial(s)?, cfg.smooth_eps);
        g.axpy(C64::new(cfg.lambda1, 0.0), &grad_spatial_adjoint(&w)?);
    }
    if cfg.lambda2 > 0.0 {
        let w = smoothed_l1_grad(&grad_temporal(s)?, cfg.smooth_eps);
        g.axpy(C64::new(cfg.lambda2, 0.0), &grad_temporal_adjoint(&w)?);
    }
    Ok(g)
}

#[derive(Clone, Debug)]
pub struct CsResult {
    pub image: DynamicImage,
    pub log: ConvergenceLog,
}

/// Runs nonlinear CG from the zero-filled image. Every accepted step
/// satisfies the Armijo condition, so the logged objective never increases.
pub fn cs_reconstruct(
    d_u: &KtData,
    cfg: &CsConfig,
    mut callback: Option<&mut dyn FnMut(&IterationInfo)>,
) -> Result<CsResult> {
    cfg.validate()?;
    let mut x = adjoint(d_u);
    let mut f = cs_objective(&x, d_u, cfg)?;
    let mut g = cs_gradient(&x, d_u, cfg)?;
    let mut p = g.scaled(-1.0);
    let mut gg = g.norm_sqr();
    let mut log = ConvergenceLog {
        objective: vec![f],
        ..Default::default()
    };
    let mut t0 = 1.0;

    for it in 0..cfg.max_iters {
        if gg == 0.0 {
            log.converged = true;
            break;
        }
        let mut slope = g.real_dot(&p);
        if slope >= 0.0 {
            p = g.scaled(-1.0);
            slope = -gg;
        }

        let mut t = t0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut trial = x.clone();
            trial.axpy(C64::new(t, 0.0), &p);
            let ft = cs_objective(&trial, d_u, cfg)?;
            if ft <= f + ARMIJO_C * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            t *= BACKTRACK_SHRINK;
        }
        let Some((x_new, f_new)) = accepted else {
            log::warn!("CS line search failed at iteration {it}; returning last iterate");
            log.line_search_failed = true;
            break;
        };

        let g_new = cs_gradient(&x_new, d_u, cfg)?;
        let gg_new = g_new.norm_sqr();
        let beta = gg_new / gg;
        let mut p_new = g_new.scaled(-1.0);
        p_new.axpy(C64::new(beta, 0.0), &p);

        let rel = (f - f_new).abs() / f.abs().max(f64::MIN_POSITIVE);
        x = x_new;
        f = f_new;
        g = g_new;
        gg = gg_new;
        p = p_new;
        t0 = (2.0 * t).min(1e3);
        log.objective.push(f);
        log.step.push(t);
        if let Some(cb) = callback.as_mut() {
            cb(&IterationInfo {
                iteration: it + 1,
                objective: f,
                step: t,
            });
        }
        if rel < cfg.tol {
            log.converged = true;
            break;
        }
    }
    Ok(CsResult { image: x, log })
}
