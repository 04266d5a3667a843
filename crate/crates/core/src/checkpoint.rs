//! Model checkpoints: flattened parameters as little-endian f64 values,
//! preceded by a JSON header describing the net, the iteration the model was
//! saved at, and the damping parameter in effect.
//!
//! Layout: 8-byte little-endian header length, the JSON header bytes, then
//! `num_params` doubles.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::net::{NetConfig, Theta};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CheckpointHeader {
    pub net: NetConfig,
    pub iteration: usize,
    pub lambda: f64,
    /// Label classes the model was trained against, ascending. Present so
    /// evaluation can rebuild the exact label mapping even when the scored
    /// set is missing a class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub theta: Theta,
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    if ckpt.theta.len() != ckpt.header.net.num_params() {
        return Err(CoreError::Checkpoint(format!(
            "theta has {} entries but the net needs {}",
            ckpt.theta.len(),
            ckpt.header.net.num_params()
        )));
    }
    let header = serde_json::to_vec(&ckpt.header)
        .map_err(|e| CoreError::Checkpoint(format!("header serialization failed: {e}")))?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(header.len() as u64).to_le_bytes())?;
    w.write_all(&header)?;
    for &t in &ckpt.theta {
        w.write_all(&t.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut r = BufReader::new(File::open(path)?);
    let mut len_bytes = [0u8; 8];
    r.read_exact(&mut len_bytes)?;
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)?;
    let header: CheckpointHeader = serde_json::from_slice(&header_bytes)
        .map_err(|e| CoreError::Checkpoint(format!("bad header: {e}")))?;
    header.net.validate()?;
    let n = header.net.num_params();
    let mut theta = Vec::with_capacity(n);
    let mut buf = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut buf).map_err(|_| {
            CoreError::Checkpoint(format!("payload truncated: expected {n} parameters"))
        })?;
        theta.push(f64::from_le_bytes(buf));
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(CoreError::Checkpoint(
            "trailing bytes after the parameter payload".into(),
        ));
    }
    Ok(Checkpoint { header, theta })
}
