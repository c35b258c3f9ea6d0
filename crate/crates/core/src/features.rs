//! Manifest-wide feature extraction with an optional on-disk cache.

use std::collections::HashMap;

use crate::audio::{decode_wav, FeatureCache, FeatureSequence, Frontend, FrontendConfig};
use crate::corpus::{DatasetManifest, ManifestEntry};
use crate::error::{Error, Result};
use crate::math::sha256_hex;
use crate::par::Parallelism;

/// Feature sequences keyed by manifest entry path.
#[derive(Debug, Clone, Default)]
pub struct FeatureTable {
    by_path: HashMap<String, FeatureSequence>,
    sample_rate_hz: Option<u32>,
}

impl FeatureTable {
    pub fn get(&self, entry: &ManifestEntry) -> Result<&FeatureSequence> {
        self.by_path
            .get(&entry.path)
            .ok_or_else(|| Error::InsufficientData(format!("no features extracted for {}", entry.path)))
    }

    pub fn len(&self) -> usize {
        self.by_path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_path.is_empty()
    }

    /// Sample rate shared by every extracted utterance.
    pub fn sample_rate_hz(&self) -> Option<u32> {
        self.sample_rate_hz
    }

    pub fn insert(&mut self, path: impl Into<String>, seq: FeatureSequence) {
        self.by_path.insert(path.into(), seq);
    }
}

/// Extract features for `entries`. All files must share one sample rate.
/// With a cache, records are keyed by a hash of the WAV bytes and the
/// frontend configuration.
pub fn extract_features<'a>(
    manifest: &DatasetManifest,
    entries: impl IntoIterator<Item = &'a ManifestEntry>,
    cfg: &FrontendConfig,
    cache: Option<&FeatureCache>,
    par: &Parallelism,
) -> Result<FeatureTable> {
    let entries: Vec<&ManifestEntry> = entries.into_iter().collect();
    let cfg_key = toml::to_string(cfg).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
    let loaded = par.try_map(&entries, |e| -> Result<(u32, FeatureSequence)> {
        let path = manifest.resolve(e);
        let bytes = std::fs::read(&path).map_err(|err| Error::io(&path, err))?;
        let wave = decode_wav(&bytes, &path)?;
        let rate = wave.sample_rate_hz;
        let frontend = Frontend::new(cfg, rate)?;
        let key = cache.map(|_| {
            let mut buf = bytes;
            buf.extend_from_slice(cfg_key.as_bytes());
            sha256_hex(&buf)
        });
        if let (Some(c), Some(k)) = (cache, &key) {
            if let Some(seq) = c.get(k, frontend.meta()) {
                return Ok((rate, seq));
            }
        }
        let seq = frontend.extract(&wave)?;
        if let (Some(c), Some(k)) = (cache, &key) {
            c.put(k, &seq)?;
        }
        Ok((rate, seq))
    })?;
    let mut table = FeatureTable::default();
    for (e, (rate, seq)) in entries.iter().zip(loaded) {
        match table.sample_rate_hz {
            Some(r) if r != rate => {
                return Err(Error::ConfigInvalid(format!(
                    "{} is {rate} Hz but earlier files are {r} Hz",
                    e.path
                )))
            }
            _ => table.sample_rate_hz = Some(rate),
        }
        table.insert(e.path.clone(), seq);
    }
    Ok(table)
}
