//! `CVF1` feature cache records: magic, `u32` T, `u32` D, then `T*D`
//! little-endian `f64` values row-major.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use super::{FeatureSequence, FrameMeta};
use crate::error::{Error, Result};

pub const CVF_MAGIC: &[u8; 4] = b"CVF1";

pub fn write_cvf(path: impl AsRef<Path>, seq: &FeatureSequence) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(12 + seq.as_slice().len() * 8);
    buf.extend_from_slice(CVF_MAGIC);
    buf.extend_from_slice(&(seq.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(seq.dim() as u32).to_le_bytes());
    for v in seq.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_cvf(path: impl AsRef<Path>, meta: FrameMeta) -> Result<FeatureSequence> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let corrupt = |reason: &str| Error::Integrity {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if bytes.len() < 12 || &bytes[..4] != CVF_MAGIC {
        return Err(corrupt("missing CVF1 header"));
    }
    let t = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if bytes.len() != 12 + t * d * 8 {
        return Err(corrupt("payload length does not match header"));
    }
    let data = bytes[12..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureSequence::new(data, d, meta).map_err(|e| corrupt(&e.to_string()))
}

/// Directory of CVF1 records keyed by a caller-supplied content hash.
#[derive(Debug, Clone)]
pub struct FeatureCache {
    dir: PathBuf,
}

impl FeatureCache {
    pub const ENV_VAR: &'static str = "CASCADE_VERIFY_CACHE";

    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { dir })
    }

    /// Cache rooted at `$CASCADE_VERIFY_CACHE`, if set and non-empty.
    pub fn from_env() -> Result<Option<Self>> {
        match std::env::var_os(Self::ENV_VAR) {
            Some(dir) if !dir.is_empty() => Self::new(PathBuf::from(dir)).map(Some),
            _ => Ok(None),
        }
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.cvf"))
    }

    /// Returns `None` on a miss or an unreadable record.
    pub fn get(&self, key: &str, meta: FrameMeta) -> Option<FeatureSequence> {
        let p = self.path_for(key);
        if !p.exists() {
            return None;
        }
        match read_cvf(&p, meta) {
            Ok(seq) => Some(seq),
            Err(e) => {
                log::warn!("ignoring bad cache record: {e}");
                None
            }
        }
    }

    pub fn put(&self, key: &str, seq: &FeatureSequence) -> Result<()> {
        // Write-then-rename so concurrent readers never observe a partial file.
        static SEQ: AtomicU64 = AtomicU64::new(0);
        let n = SEQ.fetch_add(1, Ordering::Relaxed);
        let tmp = self.dir.join(format!("{key}.cvf.tmp{}-{n}", std::process::id()));
        write_cvf(&tmp, seq)?;
        let dst = self.path_for(key);
        fs::rename(&tmp, &dst).map_err(|e| Error::io(dst, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn cvf_round_trip(t in 1usize..20, d in 1usize..8, seed in any::<u64>()) {
            let data: Vec<f64> = (0..t * d)
                .map(|i| ((i as u64 ^ seed) as f64).sin() * 1e3)
                .collect();
            let seq = FeatureSequence::new(data, d, FrameMeta::default()).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("x.cvf");
            write_cvf(&p, &seq).unwrap();
            prop_assert_eq!(read_cvf(&p, FrameMeta::default()).unwrap(), seq);
        }
    }

    #[test]
    fn layout_is_bit_exact() {
        let seq = FeatureSequence::new(vec![1.0, -2.5], 2, FrameMeta::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.cvf");
        write_cvf(&p, &seq).unwrap();
        let bytes = fs::read(&p).unwrap();
        let mut expect = b"CVF1".to_vec();
        expect.extend_from_slice(&1u32.to_le_bytes());
        expect.extend_from_slice(&2u32.to_le_bytes());
        expect.extend_from_slice(&1.0f64.to_le_bytes());
        expect.extend_from_slice(&(-2.5f64).to_le_bytes());
        assert_eq!(bytes, expect);
    }

    #[test]
    fn corrupt_record_is_an_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.cvf");
        fs::write(&p, b"CVF1\x02\0\0\0\x01\0\0\0short").unwrap();
        assert!(matches!(read_cvf(&p, FrameMeta::default()), Err(Error::Integrity { .. })));
        let cache = FeatureCache::new(dir.path()).unwrap();
        assert!(cache.get("x", FrameMeta::default()).is_none());
    }
}
