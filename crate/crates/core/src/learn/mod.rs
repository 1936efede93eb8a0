//! Learned reconstructions sharing one network definition.
//!
//! [`modl`] unrolls network denoising and conjugate-gradient data
//! consistency and is trained against reference images. [`secret`] is
//! trained only from the acquired samples: the network output is pushed
//! back through `A·F` and compared with `d_u`.

pub mod dc;
pub mod modl;
pub mod secret;

use std::io::Write;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use dc::{conjugate_gradient, dc_solve, CgOptions, CgOutcome};
pub use modl::{modl_forward, modl_loss, modl_loss_and_grad, modl_train, ModlConfig};
pub use secret::{secret_infer, secret_loss, secret_loss_and_grad, secret_train, SecretConfig};

use crate::encoding::KtData;
use crate::error::{Error, Result};
use crate::neural::{adam_step, AdamConfig, AdamState, NetworkParams};
use crate::numerics::DynamicImage;

/// Training data for the self-supervised path: undersampled k-space and its
/// mask only. There is no field for reference images.
#[derive(Clone, Debug, Default)]
pub struct UnsupervisedSet {
    pub samples: Vec<KtData>,
}

impl UnsupervisedSet {
    pub fn new(samples: Vec<KtData>) -> Self {
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// One supervised training pair.
#[derive(Clone, Debug)]
pub struct SupervisedSample {
    pub data: KtData,
    pub target: DynamicImage,
}

#[derive(Clone, Debug, Default)]
pub struct SupervisedSet {
    pub samples: Vec<SupervisedSample>,
}

impl SupervisedSet {
    pub fn new(samples: Vec<SupervisedSample>) -> Self {
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-sample training loss at the start of the epoch.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose starting parameters were returned (`epochs.len()` means
    /// the parameters after the last update).
    pub selected_epoch: usize,
    pub final_train_loss: f64,
    pub final_val_loss: Option<f64>,
}

impl TrainLog {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "epoch,train_loss,val_loss,seconds")?;
        for e in &self.epochs {
            let val = e.val_loss.map(|v| format!("{v:.10e}")).unwrap_or_default();
            writeln!(
                out,
                "{},{:.10e},{},{:.6}",
                e.epoch, e.train_loss, val, e.seconds
            )?;
        }
        Ok(())
    }

    pub fn total_seconds(&self) -> f64 {
        self.epochs.iter().map(|e| e.seconds).sum()
    }
}

/// Batches of sample indices for one epoch. `batch == 0` or a batch at least
/// as large as the set yields a single full batch in natural order.
fn epoch_batches(n: usize, batch: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    if batch == 0 || batch >= n {
        return vec![idx];
    }
    idx.shuffle(rng);
    idx.chunks(batch).map(<[usize]>::to_vec).collect()
}

/// Element-wise sum of per-sample gradients, in sample order.
fn sum_gradients(parts: Vec<(f64, Vec<f64>)>) -> Result<(f64, Vec<f64>)> {
    let mut it = parts.into_iter();
    let (mut loss, mut grad) = it.next().unwrap_or((0.0, Vec::new()));
    for (l, g) in it {
        loss += l;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    Ok((loss, grad))
}

/// Shared optimisation loop: Adam over mini-batches, per-epoch logging and
/// validation-based selection of the returned parameters.
pub(crate) struct TrainSettings {
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    pub lr: f64,
}

pub(crate) fn train_loop<G, V>(
    mut params: NetworkParams,
    n_train: usize,
    settings: &TrainSettings,
    loss_grad: G,
    val_loss: V,
) -> Result<(NetworkParams, TrainLog)>
where
    G: Fn(usize, &NetworkParams) -> Result<(f64, Vec<f64>)> + Sync,
    V: Fn(&NetworkParams) -> Result<Option<f64>>,
{
    if n_train == 0 {
        return Err(Error::InvalidParameter("training set is empty".into()));
    }
    let adam = AdamConfig::with_lr(settings.lr);
    let mut state = AdamState::new(params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut log = TrainLog::default();
    let mut best: Option<(f64, usize, NetworkParams)> = None;

    for epoch in 0..settings.epochs {
        let start = Instant::now();
        let val = val_loss(&params)?;
        if let Some(v) = val {
            if best.as_ref().is_none_or(|b| v < b.0) {
                best = Some((v, epoch, params.clone()));
            }
        }
        let mut epoch_loss = 0.0;
        for batch in epoch_batches(n_train, settings.batch, &mut rng) {
            let parts = batch
                .par_iter()
                .map(|&i| loss_grad(i, &params))
                .collect::<Result<Vec<_>>>()?;
            let (loss, mut grad) = sum_gradients(parts)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch, loss });
            }
            epoch_loss += loss;
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            adam_step(params.flat_mut(), &grad, &mut state, &adam);
        }
        let train_loss = epoch_loss / n_train as f64;
        log::debug!("epoch {epoch}: train {train_loss:.6e} val {val:?}");
        log.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss: val,
            seconds: start.elapsed().as_secs_f64(),
        });
    }

    let final_parts = (0..n_train)
        .into_par_iter()
        .map(|i| loss_grad(i, &params).map(|(l, _)| l))
        .collect::<Result<Vec<_>>>()?;
    log.final_train_loss = final_parts.iter().sum::<f64>() / n_train as f64;
    log.final_val_loss = val_loss(&params)?;
    log.selected_epoch = settings.epochs;
    if let (Some(fv), Some((bv, be, bp))) = (log.final_val_loss, best) {
        if bv < fv {
            log.selected_epoch = be;
            params = bp;
        }
    }
    Ok((params, log))
}
