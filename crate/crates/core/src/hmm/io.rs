//! Versioned text model files.
//!
//! Floats are written in Rust's shortest round-trip decimal form, so a
//! decode of an encoded model reproduces every field exactly. `-inf` marks
//! forbidden transitions.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Gmm, Hmm, Topology};
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "cascade-verify-hmm";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    label: String,
    n_states: usize,
    feature_dim: usize,
    topology: Topology,
    log_pi: Vec<f64>,
    #[serde(rename = "log_A")]
    log_a: Vec<Vec<f64>>,
    emissions: Vec<Gmm>,
}

pub fn encode_model(model: &Hmm) -> Result<String> {
    let file = ModelFile {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        label: model.label().to_string(),
        n_states: model.n_states(),
        feature_dim: model.feature_dim(),
        topology: model.topology(),
        log_pi: model.log_pi().to_vec(),
        log_a: model.log_trans().to_vec(),
        emissions: model.states().to_vec(),
    };
    toml::to_string(&file).map_err(|e| Error::InvalidModel(format!("encode: {e}")))
}

pub fn decode_model(text: &str) -> Result<Hmm> {
    let file: ModelFile =
        toml::from_str(text).map_err(|e| Error::InvalidModel(format!("decode: {e}")))?;
    if file.format != MODEL_FORMAT {
        return Err(Error::InvalidModel(format!("unknown format tag {:?}", file.format)));
    }
    if file.version != MODEL_VERSION {
        return Err(Error::InvalidModel(format!("unsupported model version {}", file.version)));
    }
    let model = Hmm::new(file.label, file.topology, file.log_pi, file.log_a, file.emissions)?;
    if model.n_states() != file.n_states || model.feature_dim() != file.feature_dim {
        return Err(Error::InvalidModel("header shape disagrees with parameters".into()));
    }
    Ok(model)
}

pub fn save_model(path: impl AsRef<Path>, model: &Hmm) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, encode_model(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Hmm> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_model(&text).map_err(|e| Error::Integrity {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_model() -> impl Strategy<Value = Hmm> {
        (1usize..=4, 1usize..=3, 1usize..=4, any::<u64>()).prop_map(|(n, m, d, seed)| {
            let mut x = seed;
            let mut next = move || {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (x >> 11) as f64 / (1u64 << 53) as f64
            };
            let simplex = |k: usize, next: &mut dyn FnMut() -> f64| {
                let v: Vec<f64> = (0..k).map(|_| next() + 1e-3).collect();
                let s: f64 = v.iter().sum();
                v.into_iter().map(|p| p / s).collect::<Vec<_>>()
            };
            let pi = simplex(n, &mut next);
            let mut trans = vec![vec![0.0; n]; n];
            for (i, row) in trans.iter_mut().enumerate() {
                if i + 1 < n {
                    let s = simplex(2, &mut next);
                    row[i] = s[0];
                    row[i + 1] = s[1];
                } else {
                    row[i] = 1.0;
                }
            }
            let mut lpi: Vec<f64> = pi.iter().map(|p| p.ln()).collect();
            lpi.iter_mut().skip(1).for_each(|p| *p = f64::NEG_INFINITY);
            lpi[0] = 0.0;
            let mut states = Vec::with_capacity(n);
            for _ in 0..n {
                let weights = simplex(m, &mut next);
                let means = (0..m).map(|_| (0..d).map(|_| next() * 200.0 - 100.0).collect()).collect();
                let vars = (0..m).map(|_| (0..d).map(|_| next() * 5.0 + 1e-6).collect()).collect();
                states.push(Gmm { weights, means, vars });
            }
            let ltrans = trans
                .iter()
                .map(|r| r.iter().map(|&p| crate::math::ln_or_neg_inf(p)).collect())
                .collect();
            Hmm::new("rt/model", Topology::LeftToRight { max_skip: 1 }, lpi, ltrans, states).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn round_trip_is_exact(model in arb_model()) {
            let text = encode_model(&model).unwrap();
            let back = decode_model(&text).unwrap();
            prop_assert_eq!(&back, &model);
            prop_assert_eq!(encode_model(&back).unwrap(), text);
        }
    }

    #[test]
    fn rejects_wrong_version_and_garbage() {
        let model = Hmm::from_probs("a", Topology::Ergodic, &[1.0], &[vec![1.0]], vec![Gmm::single(vec![0.0], vec![1.0])]).unwrap();
        let text = encode_model(&model).unwrap().replace("version = 1", "version = 9");
        assert!(decode_model(&text).is_err());
        assert!(decode_model("not a model").is_err());
    }

    #[test]
    fn corrupted_file_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.model");
        std::fs::write(&p, "format = \"cascade-verify-hmm\"\nversion = 1\n").unwrap();
        match load_model(&p) {
            Err(Error::Integrity { path, .. }) => assert_eq!(path, p),
            other => panic!("expected integrity error, got {other:?}"),
        }
    }
}
