//! Reconstruction of undersampled dynamic (k,t)-space data.
//!
//! The crate bundles four reconstruction routes that share one encoding
//! operator `E = A·F` (binary sampling after a frame-wise unitary DFT):
//!
//! - zero-filled: `Eᴴ d_u`
//! - compressed sensing with spatial and temporal total variation ([`cs`])
//! - supervised unrolled reconstruction with conjugate-gradient data
//!   consistency ([`learn::modl`])
//! - self-supervised training that only ever sees the acquired samples
//!   ([`learn::secret`])
//!
//! Around them sit a synthetic contrast-enhanced phantom generator
//! ([`phantom`]), Patlak quantification ([`kinetics`]), image-quality
//! metrics ([`metrics`]), a small binary tensor container ([`io`]) and the
//! end-to-end [`pipeline`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cs;
pub mod encoding;
pub mod error;
pub mod io;
pub mod kinetics;
pub mod learn;
pub mod metrics;
pub mod neural;
pub mod numerics;
pub mod phantom;
pub mod pipeline;

pub use error::{Error, Result};
pub use numerics::{CTensor, DynamicImage, C64};
