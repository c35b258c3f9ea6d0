//! Dataset manifests and the synthetic emotional-speech corpus generator.

mod labels;
mod manifest;
mod synth;

pub use labels::{Gender, Role, Split};
pub use manifest::{describe_corpus, validate_manifest, CorpusSummary, DatasetManifest, ManifestEntry, ValidationReport, Violation};
pub use synth::{claimants_for, generate_corpus, plan_corpus, EmotionStyle, Separability, SynthSpec};
