use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use cascade_verify::audio::FrontendConfig;
use cascade_verify::config::RunConfig;
use cascade_verify::corpus::{plan_corpus, Gender, Split};
use cascade_verify::hmm::TrainConfig;
use cascade_verify::pipeline;
use cascade_verify::registry::{Claimant, ModelKey, ModelRegistry, RegistryCounts, TrainingLog, REGISTRY_INDEX, TRAINING_LOG};
use cascade_verify::{Error, Parallelism};

fn micro_models(dir: &Path, par: &Parallelism) -> (PathBuf, PathBuf) {
    let cfg = RunConfig::resolve(Some("micro"), None, &[]).unwrap();
    let corpus = dir.join("corpus");
    let models = dir.join("models");
    pipeline::synthesize(&cfg, &corpus, par).unwrap();
    pipeline::train(&cfg, &corpus.join("manifest.csv"), &models, par).unwrap();
    (corpus, models)
}

#[test]
fn micro_registry_round_trips_and_logs_only_train_utterances() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, models) = micro_models(dir.path(), &Parallelism::sequential());
    let reg = ModelRegistry::load(&models).unwrap();
    assert_eq!(
        reg.counts(),
        RegistryCounts {
            gender: 2,
            emotion: 4,
            pooled_emotion: 2,
            speaker: 4,
            gender_pooled_speaker: 2,
            pooled_speaker: 2,
        }
    );

    let manifest = cascade_verify::corpus::DatasetManifest::load(corpus.join("manifest.csv")).unwrap();
    let test: BTreeSet<&str> = manifest.split(Split::Test).map(|e| e.path.as_str()).collect();
    let log = TrainingLog::load(models.join(TRAINING_LOG)).unwrap();
    assert_eq!(log.models.len(), 16);
    for m in &log.models {
        assert!(!m.utterances.is_empty(), "{} saw no data", m.key);
        for u in &m.utterances {
            assert!(!test.contains(u.as_str()), "{} trained on test utterance {u}", m.key);
        }
    }
}

#[test]
fn corrupted_model_file_is_an_integrity_error() {
    let dir = tempfile::tempdir().unwrap();
    let (_, models) = micro_models(dir.path(), &Parallelism::sequential());
    let victim = models.join(ModelKey::Gender(Gender::Female).rel_path());
    let mut text = std::fs::read_to_string(&victim).unwrap();
    text.push_str("\n# tampered\n");
    std::fs::write(&victim, text).unwrap();
    match ModelRegistry::load(&models) {
        Err(Error::Integrity { path, .. }) => assert_eq!(path, victim),
        other => panic!("expected integrity error, got {other:?}"),
    }

    std::fs::write(models.join(REGISTRY_INDEX), "format = 3").unwrap();
    assert!(matches!(ModelRegistry::load(&models), Err(Error::Integrity { .. })));
}

#[cfg(feature = "parallel")]
#[test]
fn parallel_training_matches_sequential() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (_, ma) = micro_models(a.path(), &Parallelism::sequential());
    let (_, mb) = micro_models(b.path(), &Parallelism::with_jobs(4));
    let ia = std::fs::read(ma.join(REGISTRY_INDEX)).unwrap();
    let ib = std::fs::read(mb.join(REGISTRY_INDEX)).unwrap();
    assert_eq!(ia, ib, "model hashes differ between sequential and parallel training");
}

#[test]
fn paper_shaped_registry_has_the_expected_model_counts() {
    let cfg = RunConfig::resolve(Some("paper-shaped"), None, &[]).unwrap();
    let entries = plan_corpus(&cfg.synth);
    let claimants: BTreeSet<(String, Gender)> = entries
        .iter()
        .filter(|e| e.role == cascade_verify::corpus::Role::Claimant)
        .map(|e| (e.speaker_id.clone(), e.gender))
        .collect();
    assert_eq!(claimants.len(), 34);
    let reg = ModelRegistry::new(
        cfg.synth.emotion_set.clone(),
        claimants.into_iter().map(|(id, gender)| Claimant { id, gender }).collect(),
        16_000,
        FrontendConfig::default(),
        TrainConfig::default(),
    );
    let keys = reg.required_keys();
    let count = |f: fn(&ModelKey) -> bool| keys.iter().filter(|k| f(k)).count();
    assert_eq!(count(|k| matches!(k, ModelKey::Gender(_))), 2);
    assert_eq!(count(|k| matches!(k, ModelKey::Emotion(..))), 12);
    assert_eq!(count(|k| matches!(k, ModelKey::PooledEmotion(_))), 6);
    assert_eq!(count(|k| matches!(k, ModelKey::Speaker { .. })), 204);
    assert_eq!(count(|k| matches!(k, ModelKey::GenderPooledSpeaker { .. })), 34);
    assert_eq!(count(|k| matches!(k, ModelKey::PooledSpeaker(_))), 34);
}
