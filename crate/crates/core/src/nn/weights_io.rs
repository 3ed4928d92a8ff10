//! Versioned binary weight files.
//!
//! Layout: magic `SMW1`, a u32 format version, the architecture JSON
//! (u32 length prefix) and its SHA-256, then every weight tensor in
//! network order as a u32 rank, u32 dimensions, and little-endian f32
//! values. The embedded digest doubles as the architecture fingerprint:
//! loading into a network whose own architecture hashes differently is
//! refused.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{ArchDescriptor, Network, NnError};
use crate::corpus::io::write_atomic;
use crate::num::{fl, Scalar};

pub const MAGIC: &[u8; 4] = b"SMW1";
pub const VERSION: u32 = 1;

pub fn save_weights<F: Scalar>(net: &Network<F>, path: &Path) -> Result<(), NnError> {
    let json = serde_json::to_vec(&net.arch())?;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    let digest: [u8; 32] = Sha256::digest(&json).into();
    buf.extend_from_slice(&digest);
    for p in net.params() {
        buf.extend_from_slice(&(p.shape().len() as u32).to_le_bytes());
        for &d in p.shape() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in p.values() {
            buf.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
        }
    }
    write_atomic(path, &buf)?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        if self.pos + n > self.buf.len() {
            return Err(NnError::WeightFormat("unexpected end of file".into()));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Parses the header, returning the architecture, its digest, and a
/// reader positioned at the first tensor.
fn parse_header(bytes: &[u8]) -> Result<(ArchDescriptor, [u8; 32], Reader<'_>), NnError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(NnError::WeightFormat("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(NnError::WeightFormat(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let json_len = r.u32()? as usize;
    let json = r.take(json_len)?;
    let stored: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
    let digest: [u8; 32] = Sha256::digest(json).into();
    if digest != stored {
        return Err(NnError::WeightFormat(
            "architecture digest does not match its serialization".into(),
        ));
    }
    let arch: ArchDescriptor = serde_json::from_slice(json)?;
    Ok((arch, digest, r))
}

fn read_params<F: Scalar>(net: &mut Network<F>, mut r: Reader<'_>) -> Result<(), NnError> {
    for p in net.params_mut() {
        let rank = r.u32()? as usize;
        if rank != p.shape().len() {
            return Err(NnError::WeightFormat(format!(
                "tensor rank {rank} where the architecture requires {:?}",
                p.shape()
            )));
        }
        for &want in p.shape() {
            let got = r.u32()? as usize;
            if got != want {
                return Err(NnError::WeightFormat(format!(
                    "tensor dimension {got} where the architecture requires {want}"
                )));
            }
        }
        let raw = r.take(p.len() * 4)?;
        for (v, b) in p.values_mut().iter_mut().zip(raw.chunks_exact(4)) {
            *v = fl(f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64);
        }
    }
    if r.pos != r.buf.len() {
        return Err(NnError::WeightFormat("trailing data after tensors".into()));
    }
    Ok(())
}

/// Reconstructs a network from the architecture embedded in the file.
pub fn load_weights(path: &Path) -> Result<Network<f32>, NnError> {
    let bytes = fs::read(path)?;
    let (arch, _, r) = parse_header(&bytes)?;
    let mut net = Network::new(arch.input_shape, arch.class_count, arch.layers, 0)?;
    read_params(&mut net, r)?;
    Ok(net)
}

/// Loads weights into an existing network; the file's architecture
/// fingerprint must match the network's.
pub fn load_weights_into<F: Scalar>(path: &Path, net: &mut Network<F>) -> Result<(), NnError> {
    let bytes = fs::read(path)?;
    let (_, digest, r) = parse_header(&bytes)?;
    if digest != net.fingerprint() {
        return Err(NnError::FingerprintMismatch);
    }
    read_params(net, r)
}
