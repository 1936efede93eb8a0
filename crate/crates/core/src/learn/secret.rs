//! Self-supervised training through the acquisition model.
//!
//! The loss compares the network output, re-encoded with the same sampling
//! mask, against the acquired samples:
//! `‖d_u − A·F·C(Eᴴd_u | θ)‖²`. Nothing here can see a reference image;
//! [`UnsupervisedSet`] carries only k-space data and masks.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{train_loop, TrainLog, TrainSettings, UnsupervisedSet};
use crate::encoding::{adjoint, encode, KtData};
use crate::error::{Error, Result};
use crate::neural::{net_backward, net_forward, NetConfig, NetworkParams};
use crate::numerics::DynamicImage;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SecretConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Samples per Adam step; 0 means the whole training set.
    pub batch: usize,
    pub seed: u64,
    pub depth_levels: usize,
    pub base_channels: usize,
}

impl Default for SecretConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            lr: 1e-4,
            batch: 0,
            seed: 0,
            depth_levels: 2,
            base_channels: 16,
        }
    }
}

impl SecretConfig {
    pub fn net_config(&self, frames: usize) -> NetConfig {
        NetConfig::new(frames, self.depth_levels, self.base_channels)
    }
}

fn kspace_residual(
    d_u: &KtData,
    params: &NetworkParams,
) -> Result<(KtData, crate::neural::NetCache)> {
    let s_u = adjoint(d_u);
    let (y, cache) = net_forward(&s_u, params)?;
    let pred = encode(&y, d_u.mask())?;
    let resid = KtData::new(pred.samples().sub(d_u.samples()), d_u.mask().clone())?;
    Ok((resid, cache))
}

/// Squared k-space residual on the sampled entries.
pub fn secret_loss(d_u: &KtData, params: &NetworkParams) -> Result<f64> {
    Ok(kspace_residual(d_u, params)?.0.samples().norm_sqr())
}

/// Loss and θ-gradient; the cotangent `2·Eᴴ(E ŝ − d_u)` is pulled back
/// through the network.
pub fn secret_loss_and_grad(d_u: &KtData, params: &NetworkParams) -> Result<(f64, Vec<f64>)> {
    let (resid, cache) = kspace_residual(d_u, params)?;
    let loss = resid.samples().norm_sqr();
    let mut g = adjoint(&resid);
    g.scale(2.0);
    let (grad, _) = net_backward(&g, &cache, params)?;
    Ok((loss, grad))
}

pub fn secret_train(
    train: &UnsupervisedSet,
    val: Option<&UnsupervisedSet>,
    cfg: &SecretConfig,
) -> Result<(NetworkParams, TrainLog)> {
    let first = train
        .samples
        .first()
        .ok_or_else(|| Error::InvalidParameter("training set is empty".into()))?;
    let (t, _, _) = first.dims();
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
        |i, p| secret_loss_and_grad(&train.samples[i], p),
        |p| match val {
            Some(v) if !v.is_empty() => {
                let total = v
                    .samples
                    .iter()
                    .map(|d| secret_loss(d, p))
                    .sum::<Result<f64>>()?;
                Ok(Some(total / v.len() as f64))
            }
            _ => Ok(None),
        },
    )
}

/// Zero-filled image through the trained network, single pass.
pub fn secret_infer(d_u: &KtData, params: &NetworkParams) -> Result<DynamicImage> {
    let start = Instant::now();
    let (out, _) = net_forward(&adjoint(d_u), params)?;
    log::info!("inference took {:.3} s", start.elapsed().as_secs_f64());
    Ok(out)
}
