//! On-disk cache of dense decompositions.
//!
//! Layout: `SCDC`, a little-endian `u32` header length, the JSON header, then
//! the eigenvalues and the column-major basis as little-endian `f64`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Discretization, OperatorSpec, SpectralDecomposition};
use crate::domain::GridDomain;
use crate::error::{Error, Result};
use crate::hash::content_hash;
use crate::scalar::Real;

pub const CACHE_DIR_ENV: &str = "STABCERT_CACHE_DIR";
const MAGIC: &[u8; 4] = b"SCDC";

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct Key<T> {
    spec: OperatorSpec<T>,
    domain: GridDomain<T>,
    discretization: Discretization,
    scalar: String,
}

#[derive(Serialize, Deserialize)]
struct Header {
    key: String,
    len: usize,
}

/// Directory named by the cache environment variable, if set.
pub fn cache_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(CACHE_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

pub fn cache_key<T: Real>(spec: &OperatorSpec<T>, domain: &GridDomain<T>, discretization: Discretization) -> Result<String> {
    content_hash(&Key { spec: spec.clone(), domain: *domain, discretization, scalar: T::NAME.to_string() })
}

/// Like [`SpectralDecomposition::new`], reusing a cached basis from `dir`
/// when present. Fourier decompositions are cheap and never cached.
pub fn diagonalize_cached<T: Real>(
    spec: &OperatorSpec<T>,
    domain: &GridDomain<T>,
    discretization: Discretization,
    dir: Option<&Path>,
) -> Result<SpectralDecomposition<T>> {
    let Some(dir) = dir.filter(|_| !spec.is_fourier()) else {
        return SpectralDecomposition::new(spec, domain, discretization);
    };
    spec.validate(domain)?;
    let key = cache_key(spec, domain, discretization)?;
    let path = dir.join(format!("{key}.scdc"));
    if let Ok(bytes) = fs::read(&path) {
        if let Ok((values, q)) = decode::<T>(&bytes, &key, domain.cells()) {
            return Ok(SpectralDecomposition::from_parts(spec.clone(), *domain, discretization, values, q));
        }
    }
    let dec = SpectralDecomposition::new(spec, domain, discretization)?;
    fs::create_dir_all(dir)?;
    let bytes = encode(&dec, &key)?;
    let tmp = dir.join(format!("{key}.scdc.tmp{}", std::process::id()));
    fs::File::create(&tmp)?.write_all(&bytes)?;
    fs::rename(&tmp, &path)?;
    Ok(dec)
}

fn encode<T: Real>(dec: &SpectralDecomposition<T>, key: &str) -> Result<Vec<u8>> {
    let q = dec.dense_basis().ok_or_else(|| Error::Cache("only dense bases are cached".into()))?;
    let header = serde_json::to_vec(&Header { key: key.to_string(), len: dec.len() })?;
    let mut out = Vec::with_capacity(8 + header.len() + 8 * (dec.len() + q.len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for v in dec.eigenvalues().iter().chain(q.iter()) {
        out.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    Ok(out)
}

fn decode<T: Real>(bytes: &[u8], key: &str, cells: usize) -> Result<(Vec<T>, DMatrix<T>)> {
    let bad = |msg: &str| Error::Cache(msg.to_string());
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(bad("bad magic"));
    }
    let hlen = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let body = bytes.get(8 + hlen..).ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(&bytes[8..8 + hlen])?;
    if header.key != key || header.len != cells {
        return Err(bad("key mismatch"));
    }
    if body.len() != 8 * (cells + cells * cells) {
        return Err(bad("truncated body"));
    }
    let mut floats = body.chunks_exact(8).map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8 bytes"))));
    let values: Vec<T> = floats.by_ref().take(cells).collect();
    let q = DMatrix::from_iterator(cells, cells, floats);
    Ok((values, q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_disk() {
        let dir = tempfile_dir();
        let d = GridDomain::<f64>::new(1, 5.0, 32, false).unwrap();
        let spec = OperatorSpec::hermite(0.5);
        let first = diagonalize_cached(&spec, &d, Discretization::default(), Some(&dir)).unwrap();
        let second = diagonalize_cached(&spec, &d, Discretization::default(), Some(&dir)).unwrap();
        assert_eq!(first.eigenvalues(), second.eigenvalues());
        assert_eq!(first.dense_basis(), second.dense_basis());
        assert_eq!(fs::read_dir(&dir).unwrap().count(), 1);
        fs::remove_dir_all(&dir).unwrap();
    }

    fn tempfile_dir() -> PathBuf {
        let dir = std::env::temp_dir().join(format!("stabcert-cache-test-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        dir
    }
}
