use std::path::Path;

use cascade_verify::config::RunConfig;
use cascade_verify::eval::{EvalReport, Framework};
use cascade_verify::pipeline;
use cascade_verify::Parallelism;

fn run(dir: &Path, sets: &[&str]) -> EvalReport {
    let mut overrides: Vec<String> = vec![
        "synth.n_speakers_per_gender=2".into(),
        "synth.n_sentences_train=4".into(),
        "synth.n_sentences_test=4".into(),
        "synth.n_repetitions=3".into(),
        "evaluation.cross_claimant_nontargets=true".into(),
    ];
    overrides.extend(sets.iter().map(|s| s.to_string()));
    let cfg = RunConfig::resolve(Some("micro"), None, &overrides).unwrap();
    let par = Parallelism::sequential();
    let corpus = dir.join("corpus");
    let models = dir.join("models");
    pipeline::synthesize(&cfg, &corpus, &par).unwrap();
    let manifest = corpus.join("manifest.csv");
    pipeline::train(&cfg, &manifest, &models, &par).unwrap();
    pipeline::evaluate(&cfg, &manifest, &models, &dir.join("report"), &par).unwrap().0
}

#[test]
fn wider_speaker_formant_spread_does_not_hurt_verification() {
    let eer = |spread: f64| {
        let dir = tempfile::tempdir().unwrap();
        let r = run(dir.path(), &[&format!("synth.separability.speaker_formant_spread_hz={spread}")]);
        r.mode(Framework::TwoStageGender).unwrap().pooled.eer_percent
    };
    let narrow = eer(0.0);
    let wide = eer(400.0);
    assert!(wide <= narrow, "EER {wide} at spread 400 vs {narrow} at spread 0");
}

#[test]
fn pure_noise_drives_gender_identification_to_chance() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(dir.path(), &["synth.separability.noise_snr_db=-inf"]);
    let acc = r.confusion.as_ref().unwrap().gender_accuracy();
    assert!((acc - 50.0).abs() <= 15.0, "gender accuracy {acc}% on pure noise");

    let clean = tempfile::tempdir().unwrap();
    let r = run(clean.path(), &[]);
    assert!(r.confusion.as_ref().unwrap().gender_accuracy() > 90.0);
}
