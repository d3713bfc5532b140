//! Text snapshots of network parameters.
//!
//! One line per tensor: `name shape values...`, where `shape` is the
//! comma-separated dimension list and every value is written with 17
//! significant digits so parsing reproduces the bits exactly.
//!
//! ```text
//! layer0.weight 5,1 -4.3921337640712965e-1 ...
//! layer0.bias 5 0.0000000000000000e0 ...
//! ```

use sha2::{Digest, Sha256};

use super::{DenseLayer, MlpConfig, MlpParams, NnError};
use crate::autodiff::Array;

pub fn to_text(params: &MlpParams) -> String {
    let mut out = String::new();
    for (name, tensor) in params.tensor_names().iter().zip(params.tensors()) {
        let shape: Vec<String> = tensor.shape().iter().map(|d| d.to_string()).collect();
        out.push_str(name);
        out.push(' ');
        out.push_str(&shape.join(","));
        for v in tensor.values() {
            out.push(' ');
            out.push_str(&format!("{v:.16e}"));
        }
        out.push('\n');
    }
    out
}

/// Parses a snapshot for a network with the given layout.
pub fn from_text(config: &MlpConfig, text: &str) -> Result<MlpParams, NnError> {
    let template = MlpParams::zeros(config)?;
    let names = template.tensor_names();
    let mut tensors = Vec::with_capacity(names.len());
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    for (name, expected) in names.iter().zip(template.tensors()) {
        let line = lines
            .next()
            .ok_or_else(|| NnError::Snapshot(format!("missing tensor `{name}`")))?;
        let mut fields = line.split_whitespace();
        let found = fields.next().unwrap_or_default();
        if found != name {
            return Err(NnError::Snapshot(format!("expected tensor `{name}`, found `{found}`")));
        }
        let shape: Vec<usize> = fields
            .next()
            .ok_or_else(|| NnError::Snapshot(format!("`{name}`: missing shape")))?
            .split(',')
            .map(|d| d.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| NnError::Snapshot(format!("`{name}`: bad shape: {e}")))?;
        if shape != expected.shape() {
            return Err(NnError::Snapshot(format!(
                "`{name}`: shape {shape:?} does not match layout {:?}",
                expected.shape()
            )));
        }
        let values: Vec<f64> = fields
            .map(str::parse::<f64>)
            .collect::<Result<_, _>>()
            .map_err(|e| NnError::Snapshot(format!("`{name}`: bad value: {e}")))?;
        let array = Array::new(shape, values).map_err(|e| NnError::Snapshot(format!("`{name}`: {e}")))?;
        tensors.push(array);
    }
    if let Some(extra) = lines.next() {
        return Err(NnError::Snapshot(format!("unexpected trailing line: {extra}")));
    }
    let mut it = tensors.into_iter();
    let layers = template
        .layers
        .iter()
        .map(|_| DenseLayer {
            weight: it.next().unwrap(),
            bias: it.next().unwrap(),
        })
        .collect();
    Ok(MlpParams {
        config: config.clone(),
        layers,
    })
}

/// SHA-256 of the snapshot text, hex encoded.
pub fn hash(params: &MlpParams) -> String {
    sha256_hex(to_text(params).as_bytes())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
