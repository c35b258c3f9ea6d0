use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Gender, Role, Split};
use crate::error::{Error, Result};

pub const MANIFEST_HEADER: [&str; 8] = [
    "path",
    "speaker_id",
    "gender",
    "emotion",
    "sentence_id",
    "repetition",
    "split",
    "role",
];

/// One utterance row of `manifest.csv`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub speaker_id: String,
    pub gender: Gender,
    pub emotion: String,
    pub sentence_id: u32,
    pub repetition: u32,
    pub split: Split,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    /// Directory that entry paths are resolved against.
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
    /// Emotion labels in tie-break order.
    pub emotions: Vec<String>,
}

impl DatasetManifest {
    /// Build from entries, taking the emotion order from first appearance.
    pub fn new(root: impl Into<PathBuf>, entries: Vec<ManifestEntry>) -> Self {
        let mut emotions: Vec<String> = Vec::new();
        for e in &entries {
            if !emotions.contains(&e.emotion) {
                emotions.push(e.emotion.clone());
            }
        }
        Self {
            root: root.into(),
            entries,
            emotions,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::Reader::from_path(path)
            .map_err(|e| Error::ManifestParse(format!("{}: {e}", path.display())))?;
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::ManifestParse(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if header != MANIFEST_HEADER {
            return Err(Error::ManifestParse(format!(
                "{}: header must be `{}`",
                path.display(),
                MANIFEST_HEADER.join(",")
            )));
        }
        let entries = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<ManifestEntry>, _>>()
            .map_err(|e| Error::ManifestParse(format!("{}: {e}", path.display())))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self::new(root, entries))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::ManifestParse(e.to_string()))?;
        for e in &self.entries {
            w.serialize(e).map_err(|e| Error::ManifestParse(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    pub fn emotion_index(&self, emotion: &str) -> Option<usize> {
        self.emotions.iter().position(|e| e == emotion)
    }

    pub fn speaker_gender(&self, speaker: &str) -> Option<Gender> {
        self.entries
            .iter()
            .find(|e| e.speaker_id == speaker)
            .map(|e| e.gender)
    }

    /// Claimants in order of first appearance.
    pub fn claimants(&self) -> Vec<(String, Gender)> {
        let mut seen = BTreeSet::new();
        self.entries
            .iter()
            .filter(|e| e.role == Role::Claimant && seen.insert(e.speaker_id.clone()))
            .map(|e| (e.speaker_id.clone(), e.gender))
            .collect()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    MissingFile(String),
    TextDependenceLeak { speaker: String, sentence_id: u32 },
    InconsistentSpeaker { speaker: String, field: &'static str },
    TooFewEmotions(usize),
    GenderAbsent(Gender),
    NoClaimants,
    ClaimantMissingTrainData { speaker: String, emotion: String },
    SampleRateMismatch { path: String, found: u32, expected: u32 },
    UnreadableAudio { path: String, reason: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingFile(p) => write!(f, "missing file: {p}"),
            Violation::TextDependenceLeak { speaker, sentence_id } => write!(
                f,
                "text-dependence leak: speaker {speaker} has sentence {sentence_id} in both train and test"
            ),
            Violation::InconsistentSpeaker { speaker, field } => {
                write!(f, "inconsistent speaker metadata: {speaker} has more than one {field}")
            }
            Violation::TooFewEmotions(n) => write!(f, "emotion set has {n} label(s); need at least 2"),
            Violation::GenderAbsent(g) => write!(f, "singleton class: no {g} speakers"),
            Violation::NoClaimants => write!(f, "singleton class: no claimant speakers"),
            Violation::ClaimantMissingTrainData { speaker, emotion } => {
                write!(f, "claimant {speaker} has no train data for emotion {emotion}")
            }
            Violation::SampleRateMismatch { path, found, expected } => {
                write!(f, "sample rate mismatch: {path} is {found} Hz, expected {expected} Hz")
            }
            Violation::UnreadableAudio { path, reason } => write!(f, "unreadable audio {path}: {reason}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::ManifestInvalid(self.violations.iter().map(ToString::to_string).collect()))
        }
    }
}

/// Check structural rules; with `expected_rate`, also open every audio file
/// header and compare sample rates.
pub fn validate_manifest(m: &DatasetManifest, expected_rate: Option<u32>) -> ValidationReport {
    let mut v = Vec::new();

    let mut genders: HashMap<&str, BTreeSet<Gender>> = HashMap::new();
    let mut roles: HashMap<&str, BTreeSet<Role>> = HashMap::new();
    let mut sentences: BTreeMap<(&str, u32), BTreeSet<Split>> = BTreeMap::new();
    for e in &m.entries {
        genders.entry(&e.speaker_id).or_default().insert(e.gender);
        roles.entry(&e.speaker_id).or_default().insert(e.role);
        sentences.entry((&e.speaker_id, e.sentence_id)).or_default().insert(e.split);
    }
    let mut speakers: Vec<&str> = genders.keys().copied().collect();
    speakers.sort_unstable();
    for s in &speakers {
        if genders[s].len() > 1 {
            v.push(Violation::InconsistentSpeaker { speaker: s.to_string(), field: "gender" });
        }
        if roles[s].len() > 1 {
            v.push(Violation::InconsistentSpeaker { speaker: s.to_string(), field: "role" });
        }
    }
    for ((speaker, sentence_id), splits) in &sentences {
        if splits.len() > 1 {
            v.push(Violation::TextDependenceLeak {
                speaker: speaker.to_string(),
                sentence_id: *sentence_id,
            });
        }
    }

    if m.emotions.len() < 2 {
        v.push(Violation::TooFewEmotions(m.emotions.len()));
    }
    for g in Gender::ALL {
        if !m.entries.iter().any(|e| e.gender == g) {
            v.push(Violation::GenderAbsent(g));
        }
    }
    let claimants = m.claimants();
    if claimants.is_empty() {
        v.push(Violation::NoClaimants);
    }
    let train_cells: BTreeSet<(&str, &str)> = m
        .split(Split::Train)
        .map(|e| (e.speaker_id.as_str(), e.emotion.as_str()))
        .collect();
    for (s, _) in &claimants {
        for emo in &m.emotions {
            if !train_cells.contains(&(s.as_str(), emo.as_str())) {
                v.push(Violation::ClaimantMissingTrainData {
                    speaker: s.clone(),
                    emotion: emo.clone(),
                });
            }
        }
    }

    if let Some(expected) = expected_rate {
        for e in &m.entries {
            let p = m.resolve(e);
            if !p.exists() {
                v.push(Violation::MissingFile(e.path.clone()));
                continue;
            }
            match hound::WavReader::open(&p) {
                Ok(r) if r.spec().sample_rate != expected => v.push(Violation::SampleRateMismatch {
                    path: e.path.clone(),
                    found: r.spec().sample_rate,
                    expected,
                }),
                Ok(_) => {}
                Err(err) => v.push(Violation::UnreadableAudio {
                    path: e.path.clone(),
                    reason: err.to_string(),
                }),
            }
        }
    }
    ValidationReport { violations: v }
}

/// Counts per `(gender, emotion, split, role)` plus totals.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CorpusSummary {
    pub cells: BTreeMap<String, usize>,
    pub train_per_gender: BTreeMap<Gender, usize>,
    pub test_per_gender: BTreeMap<Gender, usize>,
    pub train_per_gender_emotion: BTreeMap<String, usize>,
    pub speakers_per_gender: BTreeMap<Gender, usize>,
    pub claimants_per_gender: BTreeMap<Gender, usize>,
    pub total_train: usize,
    pub total_test: usize,
    /// Summed audio duration of the files that could be opened.
    pub total_seconds: f64,
    pub unreadable_files: usize,
}

impl CorpusSummary {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "utterances: {} train, {} test ({:.1} s audio)\n",
            self.total_train, self.total_test, self.total_seconds
        ));
        for g in Gender::ALL {
            out.push_str(&format!(
                "{g}: {} speakers ({} claimants), {} train, {} test\n",
                self.speakers_per_gender.get(&g).unwrap_or(&0),
                self.claimants_per_gender.get(&g).unwrap_or(&0),
                self.train_per_gender.get(&g).unwrap_or(&0),
                self.test_per_gender.get(&g).unwrap_or(&0),
            ));
        }
        for (cell, n) in &self.cells {
            out.push_str(&format!("  {cell}: {n}\n"));
        }
        out
    }
}

pub fn describe_corpus(m: &DatasetManifest, read_durations: bool) -> CorpusSummary {
    let mut s = CorpusSummary::default();
    let mut speakers: BTreeMap<Gender, BTreeSet<&str>> = BTreeMap::new();
    let mut claimants: BTreeMap<Gender, BTreeSet<&str>> = BTreeMap::new();
    for e in &m.entries {
        *s.cells
            .entry(format!("{}/{}/{}/{}", e.gender, e.emotion, e.split, e.role))
            .or_default() += 1;
        match e.split {
            Split::Train => {
                s.total_train += 1;
                *s.train_per_gender.entry(e.gender).or_default() += 1;
                *s.train_per_gender_emotion
                    .entry(format!("{}/{}", e.gender, e.emotion))
                    .or_default() += 1;
            }
            Split::Test => {
                s.total_test += 1;
                *s.test_per_gender.entry(e.gender).or_default() += 1;
            }
        }
        speakers.entry(e.gender).or_default().insert(&e.speaker_id);
        if e.role == Role::Claimant {
            claimants.entry(e.gender).or_default().insert(&e.speaker_id);
        }
        if read_durations {
            match hound::WavReader::open(m.resolve(e)) {
                Ok(r) => s.total_seconds += f64::from(r.duration()) / f64::from(r.spec().sample_rate),
                Err(_) => s.unreadable_files += 1,
            }
        }
    }
    s.speakers_per_gender = speakers.into_iter().map(|(g, v)| (g, v.len())).collect();
    s.claimants_per_gender = claimants.into_iter().map(|(g, v)| (g, v.len())).collect();
    s
}
