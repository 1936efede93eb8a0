//! Supervised unrolled reconstruction: `K` rounds of network denoising
//! followed by conjugate-gradient data consistency, with one set of weights
//! shared by every round.

use serde::{Deserialize, Serialize};

use super::dc::{dc_solve, solve_normal, CgOptions};
use super::{train_loop, SupervisedSample, SupervisedSet, TrainLog, TrainSettings};
use crate::encoding::{adjoint, KtData};
use crate::error::{Error, Result};
use crate::neural::{net_backward, net_forward, NetCache, NetConfig, NetworkParams};
use crate::numerics::DynamicImage;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModlConfig {
    /// Unrolled iterations.
    pub k: usize,
    /// Data-consistency weight.
    pub lambda: f64,
    pub cg_iters: usize,
    pub cg_tol: f64,
    pub epochs: usize,
    /// Samples per Adam step; 0 means the whole training set.
    pub batch: usize,
    pub seed: u64,
    pub lr: f64,
    pub depth_levels: usize,
    pub base_channels: usize,
}

impl Default for ModlConfig {
    fn default() -> Self {
        Self {
            k: 1,
            lambda: 0.05,
            cg_iters: 10,
            cg_tol: 1e-6,
            epochs: 20,
            batch: 0,
            seed: 0,
            lr: 1e-3,
            depth_levels: 2,
            base_channels: 16,
        }
    }
}

impl ModlConfig {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("K must be >= 1".into()));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be > 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    pub fn cg(&self) -> CgOptions {
        CgOptions {
            max_iters: self.cg_iters,
            tol: self.cg_tol,
        }
    }

    pub fn net_config(&self, frames: usize) -> NetConfig {
        NetConfig::new(frames, self.depth_levels, self.base_channels)
    }
}

struct Unrolled {
    output: DynamicImage,
    caches: Vec<NetCache>,
}

fn unroll(d_u: &KtData, params: &NetworkParams, cfg: &ModlConfig) -> Result<Unrolled> {
    cfg.validate()?;
    let mut s = adjoint(d_u);
    let mut caches = Vec::with_capacity(cfg.k);
    for _ in 0..cfg.k {
        let (z, cache) = net_forward(&s, params)?;
        caches.push(cache);
        s = dc_solve(&z, d_u, cfg.lambda, &cfg.cg())?.x;
    }
    Ok(Unrolled { output: s, caches })
}

/// `s_0 = Eᴴ d_u`, then `K` times `z = C(s|θ)`, `s = (EᴴE + λI)⁻¹(Eᴴd_u + λz)`.
pub fn modl_forward(
    d_u: &KtData,
    params: &NetworkParams,
    cfg: &ModlConfig,
) -> Result<DynamicImage> {
    Ok(unroll(d_u, params, cfg)?.output)
}

/// `‖s_K − t‖²` and its gradient with respect to θ.
///
/// The data-consistency block is differentiated implicitly: with
/// `M = EᴴE + λI` self-adjoint, `∂L/∂z = λ M⁻¹ ∂L/∂s`.
pub fn modl_loss_and_grad(
    sample: &SupervisedSample,
    params: &NetworkParams,
    cfg: &ModlConfig,
) -> Result<(f64, Vec<f64>)> {
    let run = unroll(&sample.data, params, cfg)?;
    let resid = run.output.sub(&sample.target);
    let loss = resid.norm_sqr();
    let mut g_s = resid.scaled(2.0);
    let mut grad = vec![0.0; params.len()];
    for cache in run.caches.iter().rev() {
        let mut g_z = solve_normal(&g_s, sample.data.mask(), cfg.lambda, &cfg.cg())?.x;
        g_z.scale(cfg.lambda);
        let (g_theta, g_in) = net_backward(&g_z, cache, params)?;
        grad.iter_mut().zip(&g_theta).for_each(|(a, b)| *a += b);
        g_s = g_in;
    }
    Ok((loss, grad))
}

pub fn modl_loss(
    sample: &SupervisedSample,
    params: &NetworkParams,
    cfg: &ModlConfig,
) -> Result<f64> {
    Ok(modl_forward(&sample.data, params, cfg)?
        .sub(&sample.target)
        .norm_sqr())
}

/// Minimizes `Σ ‖s_K(i) − t(i)‖²` with Adam. With a validation set, the
/// parameters with the lowest validation loss are returned.
pub fn modl_train(
    train: &SupervisedSet,
    val: Option<&SupervisedSet>,
    cfg: &ModlConfig,
) -> Result<(NetworkParams, TrainLog)> {
    cfg.validate()?;
    let first = train
        .samples
        .first()
        .ok_or_else(|| Error::InvalidParameter("training set is empty".into()))?;
    let (t, _, _) = first.data.dims();
    let params = NetworkParams::init(&cfg.net_config(t), cfg.seed)?;
    let settings = TrainSettings {
        epochs: cfg.epochs,
        batch: cfg.batch,
        seed: cfg.seed,
        lr: cfg.lr,
    };
    train_loop(
        params,
        train.len(),
        &settings,
        |i, p| modl_loss_and_grad(&train.samples[i], p, cfg),
        |p| match val {
            Some(v) if !v.is_empty() => {
                let total = v
                    .samples
                    .iter()
                    .map(|s| modl_loss(s, p, cfg))
                    .sum::<Result<f64>>()?;
                Ok(Some(total / v.len() as f64))
            }
            _ => Ok(None),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{encode, make_radial_mask, SamplingMask};
    use crate::numerics::{CTensor, C64};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], seed: u64) -> CTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.iter().product();
        let data = (0..n)
            .map(|_| C64::new(rng.gen_range(0.0..1.0), rng.gen_range(-0.2..0.2)))
            .collect();
        CTensor::from_vec(shape, data).unwrap()
    }

    fn micro() -> (SupervisedSample, ModlConfig) {
        let target = random(&[2, 8, 8], 1);
        let mask = make_radial_mask(2, 8, 8, 2.0, 1).unwrap();
        let data = encode(&target, &mask).unwrap();
        let cfg = ModlConfig {
            k: 2,
            lambda: 0.5,
            cg_iters: 50,
            cg_tol: 1e-14,
            depth_levels: 2,
            base_channels: 2,
            ..Default::default()
        };
        (SupervisedSample { data, target }, cfg)
    }

    #[test]
    fn zero_network_single_round() {
        let (sample, mut cfg) = micro();
        cfg.k = 1;
        let p = NetworkParams::zeros(&cfg.net_config(2)).unwrap();
        let out = modl_forward(&sample.data, &p, &cfg).unwrap();
        let s_u = adjoint(&sample.data);
        let avg = CTensor::broadcast_frames(&s_u.temporal_mean().unwrap(), 2);
        let expect = dc_solve(&avg, &sample.data, cfg.lambda, &cfg.cg())
            .unwrap()
            .x;
        assert!(out.sub(&expect).max_abs() < 1e-15);
    }

    #[test]
    fn full_mask_reproduces_reference() {
        let target = random(&[2, 8, 8], 3);
        let data = encode(&target, &SamplingMask::full(2, 8, 8)).unwrap();
        let cfg = ModlConfig {
            lambda: 1e-8,
            base_channels: 2,
            ..Default::default()
        };
        let p = NetworkParams::init(&cfg.net_config(2), 4).unwrap();
        let out = modl_forward(&data, &p, &cfg).unwrap();
        assert!(out.sub(&target).norm() / target.norm() < 1e-6);
    }

    #[test]
    fn implicit_gradient_matches_central_differences() {
        let (sample, cfg) = micro();
        let mut p = NetworkParams::init(&cfg.net_config(2), 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for v in p.flat_mut().iter_mut() {
            *v += rng.gen_range(-0.01..0.01);
        }
        let (_, grad) = modl_loss_and_grad(&sample, &p, &cfg).unwrap();
        let dir: Vec<f64> = (0..p.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h = 1e-5;
        let shifted = |sgn: f64| {
            let mut q = p.clone();
            q.flat_mut()
                .iter_mut()
                .zip(&dir)
                .for_each(|(a, d)| *a += sgn * h * d);
            modl_loss(&sample, &q, &cfg).unwrap()
        };
        let fd = (shifted(1.0) - shifted(-1.0)) / (2.0 * h);
        let an: f64 = grad.iter().zip(&dir).map(|(a, b)| a * b).sum();
        assert!((fd - an).abs() / an.abs() < 1e-4, "{fd} vs {an}");
    }

    #[test]
    fn weights_are_shared_across_rounds() {
        let (sample, cfg) = micro();
        let p = NetworkParams::init(&cfg.net_config(2), 7).unwrap();
        let before = p.clone();
        let _ = modl_forward(&sample.data, &p, &cfg).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn smoke_train_one_epoch() {
        let (sample, mut cfg) = micro();
        cfg.epochs = 1;
        let set = SupervisedSet::new(vec![sample]);
        let (p, log) = modl_train(&set, None, &cfg).unwrap();
        assert_eq!(log.epochs.len(), 1);
        assert!(log.epochs[0].train_loss.is_finite());
        assert!(p.flat().iter().all(|v| v.is_finite()));
    }
}
