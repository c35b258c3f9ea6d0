//! Trial construction and the framework comparison.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::confusion::{confusion_matrices, ConfusionMatrices, UtteranceDecision};
use super::eer::{compute_eer, det_curve, EerResult, Scored};
use crate::cascade::{CascadeConfig, Mode, UtteranceScorer};
use crate::corpus::{DatasetManifest, Gender, ManifestEntry, Split};
use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::par::Parallelism;
use crate::registry::ModelRegistry;

/// Verification frameworks compared by the experiment suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Framework {
    OneStage,
    TwoStageGender,
    TwoStageEmotion,
    ThreeStage,
    /// Three-stage scoring with gender and emotion forced wrong.
    WorstCase,
}

impl Framework {
    pub const ALL: [Framework; 5] = [
        Framework::OneStage,
        Framework::TwoStageGender,
        Framework::TwoStageEmotion,
        Framework::ThreeStage,
        Framework::WorstCase,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Framework::OneStage => "one_stage",
            Framework::TwoStageGender => "two_stage_gender",
            Framework::TwoStageEmotion => "two_stage_emotion",
            Framework::ThreeStage => "three_stage",
            Framework::WorstCase => "worst_case",
        }
    }

    /// Scoring mode for an utterance with the given ground truth. The worst
    /// case forces the opposite gender and the next emotion in label order.
    pub fn mode_for(self, gender: Gender, emotion: &str, emotions: &[String]) -> Mode {
        match self {
            Framework::OneStage => Mode::OneStage,
            Framework::TwoStageGender => Mode::TwoStageGender,
            Framework::TwoStageEmotion => Mode::TwoStageEmotion,
            Framework::ThreeStage => Mode::ThreeStage,
            Framework::WorstCase => {
                let i = emotions.iter().position(|e| e == emotion).unwrap_or(0);
                Mode::Forced {
                    gender: gender.opposite(),
                    emotion: emotions[(i + 1) % emotions.len()].clone(),
                }
            }
        }
    }
}

impl fmt::Display for Framework {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Framework {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Framework::ALL
            .into_iter()
            .find(|f| f.as_str() == s.trim())
            .ok_or_else(|| Error::ConfigInvalid(format!("unknown mode {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub modes: Vec<Framework>,
    /// Also let every claimant's test utterances claim the other
    /// same-gender claimants as non-target trials.
    pub cross_claimant_nontargets: bool,
    /// Fail the evaluation when the framework ordering does not hold.
    pub enforce_ordering: bool,
    /// Slack for `two-stage <= one-stage`, in EER percentage points.
    pub ordering_slack_pp: f64,
    /// Allowed distance between worst-case and one-stage EER, in points.
    pub worst_case_band_pp: f64,
    pub corpus_name: String,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            modes: Framework::ALL.to_vec(),
            cross_claimant_nontargets: false,
            enforce_ordering: false,
            ordering_slack_pp: 1.0,
            worst_case_band_pp: 3.0,
            corpus_name: "synthetic".into(),
        }
    }
}

/// One scored claim.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialScore {
    pub utterance: String,
    pub claimed: String,
    pub true_speaker: String,
    pub gender_true: Gender,
    /// Gender used by the later stages (decided or forced); `None` when the
    /// framework has no gender stage.
    pub gender_decided: Option<Gender>,
    pub emotion_true: String,
    pub emotion_decided: Option<String>,
    pub mode: Framework,
    pub lambda: f64,
    pub target_term: f64,
    pub wrong_emotion_term: f64,
    pub wrong_gender_term: f64,
}

impl TrialScore {
    pub fn is_target(&self) -> bool {
        self.claimed == self.true_speaker
    }
}

impl Scored for TrialScore {
    fn score(&self) -> f64 {
        self.lambda
    }

    fn is_target(&self) -> bool {
        TrialScore::is_target(self)
    }
}

/// EER results for one framework.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeResult {
    pub mode: Framework,
    /// Per-emotion EER with a per-emotion threshold.
    pub per_emotion: Vec<(String, EerResult)>,
    /// Mean of the per-emotion EERs; the figure frameworks are ranked by.
    pub average_eer: f64,
    /// One EER over all of the framework's trials.
    pub pooled: EerResult,
    pub det: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderingCheck {
    pub description: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub corpus_name: String,
    pub modes: Vec<ModeResult>,
    pub confusion: Option<ConfusionMatrices>,
    /// Empty unless every framework was evaluated.
    pub ordering: Vec<OrderingCheck>,
}

impl EvalReport {
    pub fn mode(&self, f: Framework) -> Option<&ModeResult> {
        self.modes.iter().find(|m| m.mode == f)
    }

    pub fn ordering_holds(&self) -> bool {
        self.ordering.iter().all(|c| c.passed)
    }
}

/// Claims made by one test utterance: self if a claimant, plus every
/// same-gender claimant for imposters (and, optionally, for claimants).
pub fn claims_for(entry: &ManifestEntry, reg: &ModelRegistry, cross_claimant: bool) -> Vec<String> {
    let is_claimant = reg.claimant_gender(&entry.speaker_id).is_ok();
    let mut claims = Vec::new();
    if is_claimant {
        claims.push(entry.speaker_id.clone());
    }
    if !is_claimant || cross_claimant {
        claims.extend(
            reg.claimants_of(entry.gender)
                .filter(|c| c.id != entry.speaker_id)
                .map(|c| c.id.clone()),
        );
    }
    claims
}

/// Score every test utterance under every configured framework.
pub fn score_trials(
    reg: &ModelRegistry,
    manifest: &DatasetManifest,
    feats: &FeatureTable,
    cascade: &CascadeConfig,
    cfg: &EvalConfig,
    par: &Parallelism,
) -> Result<(Vec<TrialScore>, Vec<UtteranceDecision>)> {
    let problems = reg.audit(manifest);
    if !problems.is_empty() {
        return Err(Error::MissingModel(problems.join("; ")));
    }
    let test: Vec<&ManifestEntry> = manifest.split(Split::Test).collect();
    let per_utt = par.try_map(&test, |entry| -> Result<(Vec<TrialScore>, UtteranceDecision)> {
        let seq = feats.get(entry)?;
        let scorer = UtteranceScorer::new(reg, seq, cascade);
        let gd = scorer.identify_gender()?;
        let ed = scorer.identify_emotion(gd.chosen)?;
        let decision = UtteranceDecision {
            utterance: entry.path.clone(),
            gender_true: entry.gender,
            gender_decided: gd.chosen,
            emotion_true: entry.emotion.clone(),
            emotion_decided: ed.chosen,
        };
        let claims = claims_for(entry, reg, cfg.cross_claimant_nontargets);
        let mut trials = Vec::with_capacity(claims.len() * cfg.modes.len());
        for &fw in &cfg.modes {
            let mode = fw.mode_for(entry.gender, &entry.emotion, &reg.emotions);
            for claimed in &claims {
                let vs = scorer.score(claimed, &mode)?;
                trials.push(TrialScore {
                    utterance: entry.path.clone(),
                    claimed: claimed.clone(),
                    true_speaker: entry.speaker_id.clone(),
                    gender_true: entry.gender,
                    gender_decided: vs.trace.gender_used(),
                    emotion_true: entry.emotion.clone(),
                    emotion_decided: vs.trace.emotion_used().map(str::to_owned),
                    mode: fw,
                    lambda: vs.lambda,
                    target_term: vs.target_term,
                    wrong_emotion_term: vs.wrong_emotion_term,
                    wrong_gender_term: vs.wrong_gender_term,
                });
            }
        }
        Ok((trials, decision))
    })?;
    let mut trials = Vec::new();
    let mut decisions = Vec::with_capacity(per_utt.len());
    for (t, d) in per_utt {
        trials.extend(t);
        decisions.push(d);
    }
    Ok((trials, decisions))
}

/// Reduce trials to per-framework EER tables and the ordering checks.
pub fn summarize(
    trials: &[TrialScore],
    decisions: &[UtteranceDecision],
    emotions: &[String],
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let mut modes = Vec::new();
    for &fw in &cfg.modes {
        let mine: Vec<&TrialScore> = trials.iter().filter(|t| t.mode == fw).collect();
        if mine.is_empty() {
            continue;
        }
        let mut per_emotion = Vec::new();
        for e in emotions {
            let sub: Vec<(f64, bool)> = mine
                .iter()
                .filter(|t| &t.emotion_true == e)
                .map(|t| (t.lambda, t.is_target()))
                .collect();
            let r = compute_eer(&sub).map_err(|err| Error::DegenerateTrialSet(format!("{fw}/{e}: {err}")))?;
            per_emotion.push((e.clone(), r));
        }
        let all: Vec<(f64, bool)> = mine.iter().map(|t| (t.lambda, t.is_target())).collect();
        let average_eer = per_emotion.iter().map(|(_, r)| r.eer_percent).sum::<f64>() / per_emotion.len().max(1) as f64;
        modes.push(ModeResult {
            mode: fw,
            per_emotion,
            average_eer,
            pooled: compute_eer(&all)?,
            det: det_curve(&all)?,
        });
    }
    let confusion = (!decisions.is_empty()).then(|| confusion_matrices(decisions, emotions));
    let mut report = EvalReport {
        corpus_name: cfg.corpus_name.clone(),
        modes,
        confusion,
        ordering: Vec::new(),
    };
    report.ordering = ordering_checks(&report, cfg);
    Ok(report)
}

fn ordering_checks(report: &EvalReport, cfg: &EvalConfig) -> Vec<OrderingCheck> {
    let eer = |f| report.mode(f).map(|m| m.average_eer);
    let (Some(one), Some(tsg), Some(tse), Some(three), Some(worst)) = (
        eer(Framework::OneStage),
        eer(Framework::TwoStageGender),
        eer(Framework::TwoStageEmotion),
        eer(Framework::ThreeStage),
        eer(Framework::WorstCase),
    ) else {
        return Vec::new();
    };
    let slack = cfg.ordering_slack_pp;
    let band = cfg.worst_case_band_pp;
    let check = |description: String, passed: bool| OrderingCheck { description, passed };
    vec![
        check(format!("three_stage {three:.2} <= two_stage_gender {tsg:.2}"), three <= tsg),
        check(format!("three_stage {three:.2} <= two_stage_emotion {tse:.2}"), three <= tse),
        check(format!("two_stage_gender {tsg:.2} <= one_stage {one:.2} + {slack}"), tsg <= one + slack),
        check(format!("two_stage_emotion {tse:.2} <= one_stage {one:.2} + {slack}"), tse <= one + slack),
        check(format!("worst_case {worst:.2} >= three_stage {three:.2}"), worst >= three),
        check(
            format!("|worst_case {worst:.2} - one_stage {one:.2}| <= {band}"),
            (worst - one).abs() <= band,
        ),
    ]
}

/// Score all trials and summarize them.
pub fn run_experiment_suite(
    reg: &ModelRegistry,
    manifest: &DatasetManifest,
    feats: &FeatureTable,
    cascade: &CascadeConfig,
    cfg: &EvalConfig,
    par: &Parallelism,
) -> Result<(EvalReport, Vec<TrialScore>)> {
    let (trials, decisions) = score_trials(reg, manifest, feats, cascade, cfg, par)?;
    let report = summarize(&trials, &decisions, &reg.emotions, cfg)?;
    Ok((report, trials))
}
