//! End-to-end steps: synthesize, train, evaluate, verify one file.

use std::path::Path;

use crate::audio::{load_wav, FeatureCache, Frontend};
use crate::cascade::{verify, Mode, Verdict};
use crate::config::RunConfig;
use crate::corpus::{generate_corpus, validate_manifest, DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::eval::{run_experiment_suite, write_report, write_trials, EvalReport, TrialScore};
use crate::features::{extract_features, FeatureTable};
use crate::par::Parallelism;
use crate::registry::{build_registry, ModelRegistry, TrainingLog, TRAINING_LOG};

pub const TRIALS_FILE: &str = "trials.csv";

/// Generate the configured corpus into `out` and echo the configuration.
pub fn synthesize(cfg: &RunConfig, out: &Path, par: &Parallelism) -> Result<DatasetManifest> {
    let manifest = generate_corpus(&cfg.synth, out, par)?;
    cfg.echo(out)?;
    Ok(manifest)
}

/// Load a manifest and reject it unless it passes validation, including
/// file presence and a single sample rate.
pub fn load_checked_manifest(path: &Path) -> Result<DatasetManifest> {
    let m = DatasetManifest::load(path)?;
    let rate = m
        .entries
        .first()
        .and_then(|e| hound::WavReader::open(m.resolve(e)).ok())
        .map(|r| r.spec().sample_rate);
    let report = validate_manifest(&m, Some(rate.unwrap_or(0)));
    report.into_result()?;
    Ok(m)
}

fn cache() -> Result<Option<FeatureCache>> {
    FeatureCache::from_env()
}

/// Extract features for one split of `m`.
pub fn split_features(
    m: &DatasetManifest,
    split: Split,
    frontend: &crate::audio::FrontendConfig,
    par: &Parallelism,
) -> Result<FeatureTable> {
    let cache = cache()?;
    extract_features(m, m.split(split), frontend, cache.as_ref(), par)
}

/// Train and persist the full registry plus its training log.
pub fn train(
    cfg: &RunConfig,
    manifest_path: &Path,
    model_dir: &Path,
    par: &Parallelism,
) -> Result<(ModelRegistry, TrainingLog)> {
    let m = load_checked_manifest(manifest_path)?;
    let feats = split_features(&m, Split::Train, &cfg.frontend, par)?;
    let (reg, log) = build_registry(&m, &feats, &cfg.frontend, &cfg.training, par)?;
    reg.save(model_dir)?;
    log.save(model_dir.join(TRAINING_LOG))?;
    cfg.echo(model_dir)?;
    Ok((reg, log))
}

/// Score the test split under every configured framework and write the
/// report files and trial records to `report_dir`.
pub fn evaluate(
    cfg: &RunConfig,
    manifest_path: &Path,
    model_dir: &Path,
    report_dir: &Path,
    par: &Parallelism,
) -> Result<(EvalReport, Vec<TrialScore>)> {
    let m = load_checked_manifest(manifest_path)?;
    let reg = ModelRegistry::load(model_dir)?;
    if reg.frontend != cfg.frontend {
        log::warn!("frontend settings differ from the registry's; using the registry's");
    }
    let problems = reg.audit(&m);
    if !problems.is_empty() {
        return Err(Error::MissingModel(problems.join("; ")));
    }
    let feats = split_features(&m, Split::Test, &reg.frontend, par)?;
    let (report, trials) = run_experiment_suite(&reg, &m, &feats, &cfg.cascade, &cfg.evaluation, par)?;
    write_report(&report, report_dir)?;
    write_trials(report_dir.join(TRIALS_FILE), &trials, &report)?;
    cfg.echo(report_dir)?;
    Ok((report, trials))
}

/// Verify a single WAV file against a stored registry.
pub fn verify_file(
    cfg: &RunConfig,
    model_dir: &Path,
    wav: &Path,
    claimed: &str,
    threshold: f64,
    mode: &Mode,
) -> Result<Verdict> {
    let reg = ModelRegistry::load(model_dir)?;
    reg.claimant_gender(claimed)?;
    let wave = load_wav(wav)?;
    let seq = Frontend::new(&reg.frontend, reg.sample_rate_hz)?.extract(&wave)?;
    verify(&reg, &seq, claimed, threshold, mode, &cfg.cascade)
}
