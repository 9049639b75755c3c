//! On-disk matrix cache: binary payloads keyed by a content hash of the
//! producing configuration, with a JSON sidecar describing provenance.
//! Corrupted payloads are detected by hash and silently rebuilt by callers.

use boltzspec::linalg::CMat;
use faer::complex_native::c64;
use faer::Mat;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{self, Read};
use std::path::{Path, PathBuf};

const MAGIC: &[u8; 4] = b"BSPM";
const FORMAT_VERSION: u8 = 1;

/// Provenance sidecar written next to every cached matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub key: String,
    pub kind: String,
    pub rows: usize,
    pub cols: usize,
    pub payload_sha256: String,
    pub wall_time_s: f64,
    pub config: serde_json::Value,
}

pub struct MatrixCache {
    dir: PathBuf,
}

impl MatrixCache {
    pub fn new(dir: &Path) -> io::Result<MatrixCache> {
        std::fs::create_dir_all(dir)?;
        Ok(MatrixCache {
            dir: dir.to_path_buf(),
        })
    }

    /// Content key of an arbitrary serializable description.
    pub fn key_of<T: Serialize>(kind: &str, desc: &T) -> String {
        let mut h = Sha256::new();
        h.update(kind.as_bytes());
        h.update(serde_json::to_vec(desc).expect("descriptor serializes"));
        hex(&h.finalize())
    }

    pub fn bin_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.bin"))
    }

    pub fn sidecar_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Loads a cached matrix, verifying the payload hash recorded in the
    /// sidecar; any mismatch or parse failure is reported as a miss.
    pub fn load(&self, key: &str) -> Option<CMat> {
        let sidecar: Sidecar =
            serde_json::from_str(&std::fs::read_to_string(self.sidecar_path(key)).ok()?).ok()?;
        let bytes = std::fs::read(self.bin_path(key)).ok()?;
        let mut h = Sha256::new();
        h.update(&bytes);
        if hex(&h.finalize()) != sidecar.payload_sha256 {
            return None;
        }
        decode_matrix(&bytes).ok()
    }

    /// Stores a matrix and its sidecar; returns the payload bytes' hash.
    pub fn store<T: Serialize>(
        &self,
        key: &str,
        kind: &str,
        m: &CMat,
        wall_time_s: f64,
        config: &T,
    ) -> io::Result<String> {
        let bytes = encode_matrix(m);
        let mut h = Sha256::new();
        h.update(&bytes);
        let digest = hex(&h.finalize());
        std::fs::write(self.bin_path(key), &bytes)?;
        let sidecar = Sidecar {
            key: key.to_string(),
            kind: kind.to_string(),
            rows: m.nrows(),
            cols: m.ncols(),
            payload_sha256: digest.clone(),
            wall_time_s,
            config: serde_json::to_value(config)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?,
        };
        std::fs::write(
            self.sidecar_path(key),
            crate::output::to_json_string(&sidecar)?,
        )?;
        Ok(digest)
    }
}

pub fn encode_matrix(m: &CMat) -> Vec<u8> {
    let rows = m.nrows();
    let cols = m.ncols();
    let mut out = Vec::with_capacity(21 + rows * cols * 16);
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    out.extend_from_slice(&(cols as u64).to_le_bytes());
    for j in 0..cols {
        for i in 0..rows {
            let z = m[(i, j)];
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    out
}

pub fn decode_matrix(bytes: &[u8]) -> io::Result<CMat> {
    let mut cur = io::Cursor::new(bytes);
    let mut magic = [0u8; 4];
    cur.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "bad magic"));
    }
    let mut ver = [0u8; 1];
    cur.read_exact(&mut ver)?;
    if ver[0] != FORMAT_VERSION {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "bad version"));
    }
    let mut b8 = [0u8; 8];
    cur.read_exact(&mut b8)?;
    let rows = u64::from_le_bytes(b8) as usize;
    cur.read_exact(&mut b8)?;
    let cols = u64::from_le_bytes(b8) as usize;
    if bytes.len() != 21 + rows * cols * 16 {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "truncated payload"));
    }
    let mut m = Mat::<c64>::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            cur.read_exact(&mut b8)?;
            let re = f64::from_le_bytes(b8);
            cur.read_exact(&mut b8)?;
            let im = f64::from_le_bytes(b8);
            m[(i, j)] = c64::new(re, im);
        }
    }
    Ok(m)
}

fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_corruption_detection() {
        let dir = std::env::temp_dir().join(format!("boltzspec-cache-test-{}", std::process::id()));
        let cache = MatrixCache::new(&dir).unwrap();
        let m = Mat::from_fn(3, 2, |i, j| c64::new(i as f64, j as f64 + 0.5));
        let key = MatrixCache::key_of("test", &serde_json::json!({"n": 3}));
        cache.store(&key, "test", &m, 0.1, &serde_json::json!({"n": 3})).unwrap();
        let back = cache.load(&key).unwrap();
        for j in 0..2 {
            for i in 0..3 {
                assert_eq!(back[(i, j)].re, m[(i, j)].re);
                assert_eq!(back[(i, j)].im, m[(i, j)].im);
            }
        }
        // corrupt one byte: load must miss
        let path = cache.bin_path(&key);
        let mut bytes = std::fs::read(&path).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0xff;
        std::fs::write(&path, &bytes).unwrap();
        assert!(cache.load(&key).is_none());
        std::fs::remove_dir_all(&dir).ok();
    }
}
