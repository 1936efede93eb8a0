//! On-disk formats: the `KTSR` tensor container, PGM previews and the JSON
//! descriptor stored next to network parameters.

mod container;
mod pgm;

pub use container::{
    load, load_complex, load_mask, load_real, read_container, save_complex, save_real, to_bytes,
    write_container, Tensor, DTYPE_C128, DTYPE_F64, MAGIC, VERSION,
};
pub use pgm::{write_pgm, Panel};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::ModlConfig;
use crate::neural::{NetConfig, NetworkParams, PARAMS_FORMAT_VERSION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDescriptor {
    pub version: u32,
    /// `secret` or `modl`.
    pub method: String,
    pub net: NetConfig,
    pub param_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modl: Option<ModlConfig>,
}

/// Writes `<stem>.ktsr` (flat parameters) and `<stem>.json` (descriptor).
pub fn save_model(
    stem: &Path,
    params: &NetworkParams,
    method: &str,
    modl: Option<&ModlConfig>,
) -> Result<()> {
    save_real(&stem.with_extension("ktsr"), &[params.len()], params.flat())?;
    let desc = ModelDescriptor {
        version: PARAMS_FORMAT_VERSION,
        method: method.to_string(),
        net: params.config().clone(),
        param_count: params.len(),
        modl: modl.cloned(),
    };
    fs::write(
        stem.with_extension("json"),
        serde_json::to_string_pretty(&desc)? + "\n",
    )?;
    Ok(())
}

pub fn load_model(stem: &Path) -> Result<(NetworkParams, ModelDescriptor)> {
    let desc: ModelDescriptor =
        serde_json::from_str(&fs::read_to_string(stem.with_extension("json"))?)?;
    if desc.version != PARAMS_FORMAT_VERSION {
        return Err(Error::Architecture(format!(
            "unsupported parameter format version {}",
            desc.version
        )));
    }
    let (shape, flat) = load_real(&stem.with_extension("ktsr"))?;
    if shape != [desc.param_count] {
        return Err(Error::Architecture(format!(
            "descriptor lists {} parameters, container has shape {shape:?}",
            desc.param_count
        )));
    }
    Ok((NetworkParams::from_flat(&desc.net, flat)?, desc))
}
