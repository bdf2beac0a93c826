//! `GATW` weight files.
//!
//! Layout (little-endian): magic `GATW`, `u32` version, `u32` N, `u32` M_p, `u8` edge mode,
//! then the twelve parameter matrices of [`GatModel::params`], each as `u32` rows, `u32` cols
//! and a row-major `f64` payload.

use std::fs;
use std::path::Path;

use risgat_core::gat::{EdgeMode, GatDims, GatModel};
use risgat_core::Matrix;

use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"GATW";
/// Weight format version written by this build.
pub const VERSION: u32 = 1;

/// Serializes a model.
pub fn encode_weights(model: &GatModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(model.dims.n_ris as u32).to_le_bytes());
    out.extend_from_slice(&(model.dims.m_p as u32).to_le_bytes());
    out.push(model.dims.edge_mode.code());
    for p in model.params() {
        p.value.write_le_bytes(&mut out);
    }
    out
}

/// Parses a weight file image; `path` is only used in error messages.
pub fn decode_weights(bytes: &[u8], path: &Path) -> Result<GatModel> {
    let bad = |reason: &str| Error::format(path, reason);
    if bytes.len() < 17 || &bytes[..4] != MAGIC {
        return Err(bad("missing GATW header"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = word(4);
    if version != VERSION {
        return Err(Error::Version { path: path.into(), found: version, expected: VERSION });
    }
    let n_ris = word(8) as usize;
    let m_p = word(12) as usize;
    let edge_mode = EdgeMode::from_code(bytes[16]).ok_or_else(|| bad("unknown edge mode"))?;

    let mut at = 17;
    let mut mats = Vec::with_capacity(12);
    for _ in 0..12 {
        let (m, used) = Matrix::read_le_bytes(&bytes[at..]).map_err(|e| bad(&e.to_string()))?;
        mats.push(m);
        at += used;
    }
    if at != bytes.len() {
        return Err(bad("trailing bytes after the last matrix"));
    }
    let dims = GatDims {
        n_ris,
        m_p,
        hidden1: mats[0].cols(),
        hidden2: mats[3].cols(),
        pooled: mats[6].cols(),
        edge_mode,
    };
    let mut model = GatModel::zeros(dims);
    for (p, m) in model.params_mut().into_iter().zip(mats) {
        if p.shape() != m.shape() {
            return Err(bad("matrix shapes do not chain"));
        }
        p.value = m;
    }
    Ok(model)
}

/// Writes `model` to `path`.
pub fn save_weights(model: &GatModel, path: &Path) -> Result<()> {
    fs::write(path, encode_weights(model)).map_err(|e| Error::io(path, e))
}

/// Reads a model from `path`.
pub fn load_weights(path: &Path) -> Result<GatModel> {
    if !path.exists() {
        return Err(Error::Missing(path.into()));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_weights(&bytes, path)
}

/// Reads a model and checks that it serves `n_ris` elements with `m_p` pilots.
pub fn load_weights_for(path: &Path, n_ris: usize, m_p: usize) -> Result<GatModel> {
    let model = load_weights(path)?;
    if model.dims.n_ris != n_ris {
        return Err(Error::Mismatch { what: "N", found: model.dims.n_ris, expected: n_ris });
    }
    if model.dims.m_p != m_p {
        return Err(Error::Mismatch { what: "M_p", found: model.dims.m_p, expected: m_p });
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use risgat_core::rng;

    #[test]
    fn header_layout() {
        let model = GatModel::zeros(GatDims::reference(16, 16));
        let bytes = encode_weights(&model);
        assert_eq!(&bytes[..4], b"GATW");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &16u32.to_le_bytes());
        assert_eq!(bytes[16], 1);
        let payload: usize = model.params().iter().map(|p| 8 + 8 * p.value.len()).sum();
        assert_eq!(bytes.len(), 17 + payload);
    }

    #[test]
    fn rejects_corruption() {
        let model = GatModel::init(GatDims::reference(2, 4), &mut rng::stream(0));
        let bytes = encode_weights(&model);
        let p = Path::new("w.gatw");
        assert!(matches!(decode_weights(&bytes[..bytes.len() - 3], p), Err(Error::Format { .. })));
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(decode_weights(&v2, p), Err(Error::Version { found: 2, .. })));
        let mut bad_mode = bytes.clone();
        bad_mode[16] = 9;
        assert!(decode_weights(&bad_mode, p).is_err());
        assert_eq!(decode_weights(&bytes, p).unwrap(), model);
    }
}
