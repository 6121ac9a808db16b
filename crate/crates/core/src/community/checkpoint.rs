//! Binary mixture checkpoint: magic, version, K, dim and user count, then
//! weights, means, variances and memberships as little-endian `f64`.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

use super::gmm::CommunityModel;
use super::select::Selection;

const MAGIC: &[u8; 8] = b"FRSCGMM\0";
const VERSION: u32 = 1;

#[derive(Serialize)]
struct Manifest<'a> {
    format_version: u32,
    k: usize,
    dim: usize,
    users: usize,
    log_likelihood: f64,
    bic: f64,
    selection: Option<&'a Selection>,
}

/// Writes `path` and a JSON manifest with the extension replaced by `json`.
pub fn write_model(model: &CommunityModel, selection: Option<&Selection>, path: &Path) -> Result<()> {
    let (k, d, n) = (model.k(), model.dim(), model.memberships.len());
    let mut buf = Vec::with_capacity(32 + 8 * (k + 2 * k * d + n * k));
    buf.extend_from_slice(MAGIC);
    for v in [VERSION, k as u32, d as u32, n as u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let values = model
        .weights
        .iter()
        .chain(model.means.iter().flatten())
        .chain(model.variances.iter().flatten())
        .chain(model.memberships.iter().flatten())
        .chain(std::iter::once(&model.log_likelihood));
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, &buf).map_err(|e| Error::io(path, e))?;
    let manifest = Manifest {
        format_version: VERSION,
        k,
        dim: d,
        users: n,
        log_likelihood: model.log_likelihood,
        bic: model.bic(),
        selection,
    };
    let mpath = path.with_extension("json");
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(&mpath, json).map_err(|e| Error::io(&mpath, e))
}

/// Reads a model written by [`write_model`]; the EM trace is not stored.
pub fn read_model(path: &Path) -> Result<CommunityModel> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: &str| Error::Checkpoint(format!("{}: {m}", path.display()));
    if buf.len() < 24 || &buf[..8] != MAGIC {
        return Err(bad("not a mixture checkpoint"));
    }
    let word = |i: usize| u32::from_le_bytes(buf[8 + 4 * i..12 + 4 * i].try_into().unwrap()) as usize;
    if word(0) != VERSION as usize {
        return Err(bad("unsupported version"));
    }
    let (k, d, n) = (word(1), word(2), word(3));
    let expected = 24 + 8 * (k + 2 * k * d + n * k + 1);
    if buf.len() != expected {
        return Err(bad(&format!("expected {expected} bytes, found {}", buf.len())));
    }
    let mut vals = buf[24..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut take = |rows: usize, cols: usize| -> Vec<Vec<f64>> {
        (0..rows).map(|_| (0..cols).map(|_| vals.next().unwrap()).collect()).collect()
    };
    let weights = take(1, k).remove(0);
    let means = take(k, d);
    let variances = take(k, d);
    let memberships = take(n, k);
    let log_likelihood = take(1, 1)[0][0];
    Ok(CommunityModel {
        means,
        variances,
        weights,
        memberships,
        log_likelihood,
        trace: Vec::new(),
    })
}
