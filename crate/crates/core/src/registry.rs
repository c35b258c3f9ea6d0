//! The trained model hierarchy: per-gender models, gender-dependent emotion
//! models, per-(gender, emotion, claimant) speaker models, and the pooled
//! models scored by the baseline frameworks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio::{FeatureSequence, FrontendConfig};
use crate::corpus::{validate_manifest, DatasetManifest, Gender, ManifestEntry, Role, Split};
use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::hmm::{decode_model, encode_model, train_baum_welch, Hmm, TrainConfig, TrainOutcome};
use crate::math::sha256_hex;
use crate::par::Parallelism;

pub const REGISTRY_INDEX: &str = "registry.toml";
pub const TRAINING_LOG: &str = "training_log.toml";
const REGISTRY_FORMAT: &str = "cascade-verify-registry";
const REGISTRY_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKey {
    Gender(Gender),
    Emotion(Gender, String),
    /// Emotion model over both genders, used by the emotion-dependent
    /// two-stage baseline.
    PooledEmotion(String),
    Speaker { gender: Gender, emotion: String, speaker: String },
    GenderPooledSpeaker { gender: Gender, speaker: String },
    PooledSpeaker(String),
}

impl ModelKey {
    pub fn speaker(gender: Gender, emotion: &str, speaker: &str) -> Self {
        ModelKey::Speaker {
            gender,
            emotion: emotion.to_owned(),
            speaker: speaker.to_owned(),
        }
    }

    /// Relative model file path inside a model directory.
    pub fn rel_path(&self) -> PathBuf {
        PathBuf::from(format!("{self}.toml"))
    }

    pub fn parse(name: &str) -> Result<Self> {
        let bad = || Error::ManifestParse(format!("bad model key {name:?}"));
        let parts: Vec<&str> = name.split('/').collect();
        let g = |s: &str| s.parse::<Gender>().map_err(|_| bad());
        Ok(match parts.as_slice() {
            ["gender", gn] => ModelKey::Gender(g(gn)?),
            ["emotion", gn, e] => ModelKey::Emotion(g(gn)?, (*e).to_owned()),
            ["emotion_pooled", e] => ModelKey::PooledEmotion((*e).to_owned()),
            ["speaker", gn, e, s] => ModelKey::speaker(g(gn)?, e, s),
            ["speaker_gender_pooled", gn, s] => ModelKey::GenderPooledSpeaker {
                gender: g(gn)?,
                speaker: (*s).to_owned(),
            },
            ["speaker_pooled", s] => ModelKey::PooledSpeaker((*s).to_owned()),
            _ => return Err(bad()),
        })
    }
}

impl fmt::Display for ModelKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKey::Gender(g) => write!(f, "gender/{g}"),
            ModelKey::Emotion(g, e) => write!(f, "emotion/{g}/{e}"),
            ModelKey::PooledEmotion(e) => write!(f, "emotion_pooled/{e}"),
            ModelKey::Speaker { gender, emotion, speaker } => write!(f, "speaker/{gender}/{emotion}/{speaker}"),
            ModelKey::GenderPooledSpeaker { gender, speaker } => write!(f, "speaker_gender_pooled/{gender}/{speaker}"),
            ModelKey::PooledSpeaker(s) => write!(f, "speaker_pooled/{s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claimant {
    pub id: String,
    pub gender: Gender,
}

/// Model counts by family.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RegistryCounts {
    pub gender: usize,
    pub emotion: usize,
    pub pooled_emotion: usize,
    pub speaker: usize,
    pub gender_pooled_speaker: usize,
    pub pooled_speaker: usize,
}

impl RegistryCounts {
    pub fn total(&self) -> usize {
        self.gender + self.emotion + self.pooled_emotion + self.speaker + self.gender_pooled_speaker + self.pooled_speaker
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRegistry {
    /// Emotion labels in tie-break order.
    pub emotions: Vec<String>,
    pub claimants: Vec<Claimant>,
    pub sample_rate_hz: u32,
    pub frontend: FrontendConfig,
    pub training: TrainConfig,
    models: BTreeMap<ModelKey, Hmm>,
}

impl ModelRegistry {
    pub fn new(
        emotions: Vec<String>,
        claimants: Vec<Claimant>,
        sample_rate_hz: u32,
        frontend: FrontendConfig,
        training: TrainConfig,
    ) -> Self {
        Self {
            emotions,
            claimants,
            sample_rate_hz,
            frontend,
            training,
            models: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, key: ModelKey, model: Hmm) {
        self.models.insert(key, model);
    }

    pub fn remove(&mut self, key: &ModelKey) -> Option<Hmm> {
        self.models.remove(key)
    }

    pub fn get(&self, key: &ModelKey) -> Result<&Hmm> {
        self.models.get(key).ok_or_else(|| Error::MissingModel(key.to_string()))
    }

    pub fn contains(&self, key: &ModelKey) -> bool {
        self.models.contains_key(key)
    }

    pub fn models(&self) -> impl Iterator<Item = (&ModelKey, &Hmm)> {
        self.models.iter()
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn counts(&self) -> RegistryCounts {
        let mut c = RegistryCounts::default();
        for k in self.models.keys() {
            match k {
                ModelKey::Gender(_) => c.gender += 1,
                ModelKey::Emotion(..) => c.emotion += 1,
                ModelKey::PooledEmotion(_) => c.pooled_emotion += 1,
                ModelKey::Speaker { .. } => c.speaker += 1,
                ModelKey::GenderPooledSpeaker { .. } => c.gender_pooled_speaker += 1,
                ModelKey::PooledSpeaker(_) => c.pooled_speaker += 1,
            }
        }
        c
    }

    pub fn claimant_gender(&self, id: &str) -> Result<Gender> {
        self.claimants
            .iter()
            .find(|c| c.id == id)
            .map(|c| c.gender)
            .ok_or_else(|| Error::UnknownClaimant(id.to_owned()))
    }

    pub fn claimants_of(&self, g: Gender) -> impl Iterator<Item = &Claimant> {
        self.claimants.iter().filter(move |c| c.gender == g)
    }

    pub fn feature_dim(&self) -> usize {
        self.frontend.feature_dim()
    }

    /// Every model key some scoring mode may touch.
    pub fn required_keys(&self) -> Vec<ModelKey> {
        let mut keys = Vec::new();
        for g in Gender::ALL {
            keys.push(ModelKey::Gender(g));
            for e in &self.emotions {
                keys.push(ModelKey::Emotion(g, e.clone()));
            }
        }
        for e in &self.emotions {
            keys.push(ModelKey::PooledEmotion(e.clone()));
        }
        for c in &self.claimants {
            for e in &self.emotions {
                keys.push(ModelKey::speaker(c.gender, e, &c.id));
            }
            keys.push(ModelKey::GenderPooledSpeaker {
                gender: c.gender,
                speaker: c.id.clone(),
            });
            keys.push(ModelKey::PooledSpeaker(c.id.clone()));
        }
        keys
    }

    /// Problems that would make some test-split trial fail: missing models,
    /// test claimants without models, unknown test emotions.
    pub fn audit(&self, manifest: &DatasetManifest) -> Vec<String> {
        let mut problems: Vec<String> = self
            .required_keys()
            .into_iter()
            .filter(|k| !self.contains(k))
            .map(|k| format!("missing model {k}"))
            .collect();
        let mut seen = BTreeSet::new();
        for e in manifest.split(Split::Test) {
            if e.role == Role::Claimant && seen.insert(&e.speaker_id) && self.claimant_gender(&e.speaker_id).is_err() {
                problems.push(format!("test claimant {} has no models", e.speaker_id));
            }
            if !self.emotions.contains(&e.emotion) && seen.insert(&e.emotion) {
                problems.push(format!("test emotion {} has no models", e.emotion));
            }
        }
        if self.claimants.is_empty() {
            problems.push("registry has no claimants".into());
        }
        problems
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let mut index = RegistryIndex {
            format: REGISTRY_FORMAT.into(),
            version: REGISTRY_VERSION,
            sample_rate_hz: self.sample_rate_hz,
            emotions: self.emotions.clone(),
            claimants: self.claimants.clone(),
            frontend: self.frontend.clone(),
            training: self.training.clone(),
            models: Vec::with_capacity(self.models.len()),
        };
        for (key, model) in &self.models {
            let text = encode_model(model)?;
            let rel = key.rel_path();
            write_file(&dir.join(&rel), text.as_bytes())?;
            index.models.push(IndexEntry {
                key: key.to_string(),
                path: rel.to_string_lossy().replace('\\', "/"),
                sha256: sha256_hex(text.as_bytes()),
            });
        }
        let text = toml::to_string(&index).map_err(|e| Error::InvalidModel(e.to_string()))?;
        write_file(&dir.join(REGISTRY_INDEX), text.as_bytes())
    }

    /// Load and verify a registry; any unreadable, altered or mislabeled
    /// model file is an `Integrity` error naming that file.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let index_path = dir.join(REGISTRY_INDEX);
        let text = std::fs::read_to_string(&index_path).map_err(|e| Error::io(&index_path, e))?;
        let integrity = |path: &Path, reason: String| Error::Integrity {
            path: path.to_path_buf(),
            reason,
        };
        let index: RegistryIndex = toml::from_str(&text).map_err(|e| integrity(&index_path, e.to_string()))?;
        if index.format != REGISTRY_FORMAT || index.version != REGISTRY_VERSION {
            return Err(integrity(
                &index_path,
                format!("unsupported registry format {} v{}", index.format, index.version),
            ));
        }
        let mut reg = ModelRegistry::new(
            index.emotions,
            index.claimants,
            index.sample_rate_hz,
            index.frontend,
            index.training,
        );
        let dim = reg.feature_dim();
        for entry in index.models {
            let path = dir.join(&entry.path);
            let key = ModelKey::parse(&entry.key).map_err(|e| integrity(&index_path, e.to_string()))?;
            let bytes = std::fs::read(&path).map_err(|e| integrity(&path, e.to_string()))?;
            let digest = sha256_hex(&bytes);
            if digest != entry.sha256 {
                return Err(integrity(&path, format!("sha256 {digest} does not match index {}", entry.sha256)));
            }
            let text = String::from_utf8(bytes).map_err(|e| integrity(&path, e.to_string()))?;
            let model = decode_model(&text).map_err(|e| integrity(&path, e.to_string()))?;
            if model.label() != entry.key {
                return Err(integrity(&path, format!("model label {} under key {}", model.label(), entry.key)));
            }
            if model.feature_dim() != dim {
                return Err(integrity(&path, format!("feature dim {} != {dim}", model.feature_dim())));
            }
            reg.insert(key, model);
        }
        Ok(reg)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct RegistryIndex {
    format: String,
    version: u32,
    sample_rate_hz: u32,
    emotions: Vec<String>,
    claimants: Vec<Claimant>,
    frontend: FrontendConfig,
    training: TrainConfig,
    models: Vec<IndexEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexEntry {
    key: String,
    path: String,
    sha256: String,
}

/// EM record of one trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelLog {
    pub key: String,
    pub n_sequences: usize,
    pub n_frames: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
    pub warnings: Vec<String>,
    /// Manifest paths of the training utterances.
    pub utterances: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub models: Vec<ModelLog>,
}

impl TrainingLog {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::InvalidModel(e.to_string()))?;
        write_file(path.as_ref(), text.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Integrity {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

/// One model to train and the utterances it sees.
#[derive(Debug, Clone)]
struct Job<'a> {
    key: ModelKey,
    entries: Vec<&'a ManifestEntry>,
    /// Extra keys that receive a copy of the trained model.
    aliases: Vec<ModelKey>,
}

fn train_entries(m: &DatasetManifest) -> Vec<&ManifestEntry> {
    m.split(Split::Train).collect()
}

fn gender_jobs(m: &DatasetManifest) -> Result<Vec<Job<'_>>> {
    let train = train_entries(m);
    Gender::ALL
        .iter()
        .map(|&g| {
            let entries: Vec<_> = train.iter().copied().filter(|e| e.gender == g).collect();
            if entries.is_empty() {
                return Err(Error::InsufficientData(format!("{g}: no training utterances")));
            }
            Ok(Job {
                key: ModelKey::Gender(g),
                entries,
                aliases: vec![],
            })
        })
        .collect()
}

fn emotion_jobs(m: &DatasetManifest) -> Result<Vec<Job<'_>>> {
    let train = train_entries(m);
    let mut jobs = Vec::new();
    for g in Gender::ALL {
        for emo in &m.emotions {
            let entries: Vec<_> = train
                .iter()
                .copied()
                .filter(|e| e.gender == g && &e.emotion == emo)
                .collect();
            if entries.is_empty() {
                return Err(Error::InsufficientData(format!("({g}, {emo}): no training utterances")));
            }
            jobs.push(Job {
                key: ModelKey::Emotion(g, emo.clone()),
                entries,
                aliases: vec![],
            });
        }
    }
    for emo in &m.emotions {
        let entries: Vec<_> = train.iter().copied().filter(|e| &e.emotion == emo).collect();
        jobs.push(Job {
            key: ModelKey::PooledEmotion(emo.clone()),
            entries,
            aliases: vec![],
        });
    }
    Ok(jobs)
}

fn speaker_jobs(m: &DatasetManifest) -> Result<Vec<Job<'_>>> {
    let train = train_entries(m);
    let mut jobs = Vec::new();
    for (speaker, g) in m.claimants() {
        let own: Vec<_> = train.iter().copied().filter(|e| e.speaker_id == speaker).collect();
        for emo in &m.emotions {
            let entries: Vec<_> = own.iter().copied().filter(|e| &e.emotion == emo).collect();
            if entries.is_empty() {
                return Err(Error::InsufficientData(format!("({speaker}, {emo}): no training utterances")));
            }
            jobs.push(Job {
                key: ModelKey::speaker(g, emo, &speaker),
                entries,
                aliases: vec![],
            });
        }
        // A claimant has one gender, so the gender-pooled and fully pooled
        // models see the same data; train once and store both.
        jobs.push(Job {
            key: ModelKey::PooledSpeaker(speaker.clone()),
            entries: own,
            aliases: vec![ModelKey::GenderPooledSpeaker { gender: g, speaker }],
        });
    }
    Ok(jobs)
}

fn run_jobs(
    jobs: &[Job<'_>],
    feats: &FeatureTable,
    cfg: &TrainConfig,
    par: &Parallelism,
) -> Result<Vec<(ModelKey, TrainOutcome, Vec<String>)>> {
    let outcomes = par.try_map(jobs, |job| -> Result<TrainOutcome> {
        let seqs: Vec<&FeatureSequence> = job.entries.iter().map(|e| feats.get(e)).collect::<Result<_>>()?;
        let outcome = train_baum_welch(&job.key.to_string(), &seqs, cfg, par)?;
        for w in &outcome.warnings {
            log::warn!("{}: {w}", job.key);
        }
        Ok(outcome)
    })?;
    let mut out = Vec::new();
    for (job, outcome) in jobs.iter().zip(outcomes) {
        let paths: Vec<String> = job.entries.iter().map(|e| e.path.clone()).collect();
        for alias in &job.aliases {
            let mut copy = outcome.clone();
            copy.model = copy.model.with_label(alias.to_string());
            out.push((alias.clone(), copy, paths.clone()));
        }
        out.push((job.key.clone(), outcome, paths));
    }
    Ok(out)
}

/// One model per gender over all of that gender's training utterances.
pub fn train_gender_models(
    m: &DatasetManifest,
    feats: &FeatureTable,
    cfg: &TrainConfig,
    par: &Parallelism,
) -> Result<BTreeMap<Gender, TrainOutcome>> {
    Ok(run_jobs(&gender_jobs(m)?, feats, cfg, par)?
        .into_iter()
        .filter_map(|(k, o, _)| match k {
            ModelKey::Gender(g) => Some((g, o)),
            _ => None,
        })
        .collect())
}

/// `2*m` gender-dependent emotion models. The `m` gender-independent
/// emotion models are trained by [`build_registry`] alongside them.
pub fn train_emotion_models(
    m: &DatasetManifest,
    feats: &FeatureTable,
    cfg: &TrainConfig,
    par: &Parallelism,
) -> Result<BTreeMap<(Gender, String), TrainOutcome>> {
    let jobs: Vec<Job<'_>> = emotion_jobs(m)?
        .into_iter()
        .filter(|j| matches!(j.key, ModelKey::Emotion(..)))
        .collect();
    Ok(run_jobs(&jobs, feats, cfg, par)?
        .into_iter()
        .filter_map(|(k, o, _)| match k {
            ModelKey::Emotion(g, e) => Some(((g, e), o)),
            _ => None,
        })
        .collect())
}

/// Claimant models of all three families.
#[derive(Debug, Clone, Default)]
pub struct SpeakerModels {
    pub emotion_specific: BTreeMap<(Gender, String, String), TrainOutcome>,
    pub gender_pooled: BTreeMap<(Gender, String), TrainOutcome>,
    pub pooled: BTreeMap<String, TrainOutcome>,
}

pub fn train_speaker_models(
    m: &DatasetManifest,
    feats: &FeatureTable,
    cfg: &TrainConfig,
    par: &Parallelism,
) -> Result<SpeakerModels> {
    let mut out = SpeakerModels::default();
    for (k, o, _) in run_jobs(&speaker_jobs(m)?, feats, cfg, par)? {
        match k {
            ModelKey::Speaker { gender, emotion, speaker } => {
                out.emotion_specific.insert((gender, emotion, speaker), o);
            }
            ModelKey::GenderPooledSpeaker { gender, speaker } => {
                out.gender_pooled.insert((gender, speaker), o);
            }
            ModelKey::PooledSpeaker(s) => {
                out.pooled.insert(s, o);
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Validate the manifest, train every model family and assemble the
/// registry. Only train-split utterances are ever read.
pub fn build_registry(
    m: &DatasetManifest,
    feats: &FeatureTable,
    frontend: &FrontendConfig,
    cfg: &TrainConfig,
    par: &Parallelism,
) -> Result<(ModelRegistry, TrainingLog)> {
    validate_manifest(m, None).into_result()?;
    let sample_rate_hz = feats
        .sample_rate_hz()
        .ok_or_else(|| Error::InsufficientData("no features extracted".into()))?;
    let mut jobs = gender_jobs(m)?;
    jobs.extend(emotion_jobs(m)?);
    jobs.extend(speaker_jobs(m)?);
    let claimants = m
        .claimants()
        .into_iter()
        .map(|(id, gender)| Claimant { id, gender })
        .collect();
    let mut reg = ModelRegistry::new(m.emotions.clone(), claimants, sample_rate_hz, frontend.clone(), cfg.clone());
    let mut log = TrainingLog::default();
    for (key, outcome, utterances) in run_jobs(&jobs, feats, cfg, par)? {
        log.models.push(ModelLog {
            key: key.to_string(),
            n_sequences: outcome.n_sequences,
            n_frames: outcome.n_frames,
            converged: outcome.converged,
            trace: outcome.trace,
            warnings: outcome.warnings.iter().map(ToString::to_string).collect(),
            utterances,
        });
        reg.insert(key, outcome.model);
    }
    log.models.sort_by(|a, b| a.key.cmp(&b.key));
    Ok((reg, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_names_round_trip() {
        let keys = [
            ModelKey::Gender(Gender::Female),
            ModelKey::Emotion(Gender::Male, "anger".into()),
            ModelKey::PooledEmotion("fear".into()),
            ModelKey::speaker(Gender::Female, "sadness", "f03"),
            ModelKey::GenderPooledSpeaker {
                gender: Gender::Male,
                speaker: "m01".into(),
            },
            ModelKey::PooledSpeaker("m01".into()),
        ];
        for k in keys {
            assert_eq!(ModelKey::parse(&k.to_string()).unwrap(), k);
        }
        assert_eq!(
            ModelKey::speaker(Gender::Male, "anger", "m00").rel_path(),
            PathBuf::from("speaker/male/anger/m00.toml")
        );
        assert!(ModelKey::parse("speaker/robot/x").is_err());
    }
}
