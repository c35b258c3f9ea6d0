//! Gender -> emotion -> speaker decision chain and the baseline scorers.
//!
//! Every stage compares per-frame average log-likelihoods. Stage decisions
//! are hard and use only the registry and the features, never the claim.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::audio::FeatureSequence;
use crate::corpus::Gender;
use crate::error::{Error, Result};
use crate::math::argmax;
use crate::registry::{ModelKey, ModelRegistry};

/// Models averaged in the wrong-emotion term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WrongEmotionModels {
    /// The claimed speaker's own models under the other emotions.
    #[default]
    ClaimedSpeaker,
    /// The recognized gender's emotion models for the other emotions.
    GenderEmotion,
}

/// Models averaged in the wrong-gender term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WrongGenderModels {
    /// Opposite-gender emotion models for the other emotions.
    #[default]
    EmotionModels,
    /// Gender-pooled models of the opposite gender's claimants.
    PooledSpeakers,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermCombination {
    /// `target - wrong_emotion - wrong_gender`.
    #[default]
    Printed,
    /// `target - (wrong_emotion + wrong_gender) / 2`.
    Mean,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CascadeConfig {
    pub wrong_emotion_models: WrongEmotionModels,
    pub wrong_gender_models: WrongGenderModels,
    pub eq3_variant: TermCombination,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mode {
    ThreeStage,
    TwoStageGender,
    TwoStageEmotion,
    OneStage,
    /// Skip stages 1 and 2 and score with the given labels.
    Forced { gender: Gender, emotion: String },
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::ThreeStage => f.write_str("three_stage"),
            Mode::TwoStageGender => f.write_str("two_stage_gender"),
            Mode::TwoStageEmotion => f.write_str("two_stage_emotion"),
            Mode::OneStage => f.write_str("one_stage"),
            Mode::Forced { gender, emotion } => write!(f, "forced({gender},{emotion})"),
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    /// Accepts the four framework names and `forced(<gender>,<emotion>)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "three_stage" => Mode::ThreeStage,
            "two_stage_gender" => Mode::TwoStageGender,
            "two_stage_emotion" => Mode::TwoStageEmotion,
            "one_stage" => Mode::OneStage,
            _ => {
                let inner = s
                    .strip_prefix("forced(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| Error::ConfigInvalid(format!("unknown mode {s:?}")))?;
                let (g, e) = inner
                    .split_once(',')
                    .ok_or_else(|| Error::ConfigInvalid(format!("forced mode needs (gender,emotion): {s:?}")))?;
                Mode::Forced {
                    gender: g.trim().parse()?,
                    emotion: e.trim().to_owned(),
                }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenderDecision {
    pub chosen: Gender,
    /// Average log-likelihood per gender in fixed label order.
    pub scores: Vec<(Gender, f64)>,
    pub tie: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmotionDecision {
    pub chosen: String,
    /// Average log-likelihood per emotion in registry order.
    pub scores: Vec<(String, f64)>,
    pub tie: bool,
    /// Gender whose emotion models were used; `None` for the
    /// gender-independent emotion models.
    pub gender: Option<Gender>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Override {
    pub gender: Gender,
    pub emotion: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageTrace {
    pub gender: Option<GenderDecision>,
    pub emotion: Option<EmotionDecision>,
    /// Present when stages were bypassed and labels injected.
    pub overrides: Option<Override>,
}

impl StageTrace {
    /// Gender that conditioned the later stages, decided or forced.
    pub fn gender_used(&self) -> Option<Gender> {
        self.overrides
            .as_ref()
            .map(|o| o.gender)
            .or_else(|| self.gender.as_ref().map(|d| d.chosen))
    }

    pub fn emotion_used(&self) -> Option<&str> {
        self.overrides
            .as_ref()
            .map(|o| o.emotion.as_str())
            .or_else(|| self.emotion.as_ref().map(|d| d.chosen.as_str()))
    }
}

/// Verification score with its components.
///
/// For the cascade modes the components are the target, wrong-emotion and
/// wrong-gender terms and `b_used = m - 1`. The baselines have a single
/// cohort term, stored as `wrong_emotion_term`, with `wrong_gender_term = 0`
/// and `b_used` the cohort size.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationScore {
    pub lambda: f64,
    pub target_term: f64,
    pub wrong_emotion_term: f64,
    pub wrong_gender_term: f64,
    pub b_used: usize,
    pub trace: StageTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub accept: bool,
    pub score: VerificationScore,
}

/// Scores one utterance against registry models, memoizing each model's
/// average log-likelihood so repeated claims reuse work.
pub struct UtteranceScorer<'a> {
    reg: &'a ModelRegistry,
    seq: &'a FeatureSequence,
    cfg: CascadeConfig,
    memo: RefCell<HashMap<ModelKey, f64>>,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

impl<'a> UtteranceScorer<'a> {
    pub fn new(reg: &'a ModelRegistry, seq: &'a FeatureSequence, cfg: &CascadeConfig) -> Self {
        Self {
            reg,
            seq,
            cfg: cfg.clone(),
            memo: RefCell::new(HashMap::new()),
        }
    }

    /// Average per-frame log-likelihood of the utterance under one model.
    pub fn avg(&self, key: &ModelKey) -> Result<f64> {
        if let Some(&v) = self.memo.borrow().get(key) {
            return Ok(v);
        }
        let v = self.reg.get(key)?.avg_log_likelihood(self.seq)?;
        self.memo.borrow_mut().insert(key.clone(), v);
        Ok(v)
    }

    fn mean_of(&self, keys: impl IntoIterator<Item = ModelKey>) -> Result<(f64, usize)> {
        let vals = keys.into_iter().map(|k| self.avg(&k)).collect::<Result<Vec<_>>>()?;
        Ok((mean(&vals), vals.len()))
    }

    pub fn identify_gender(&self) -> Result<GenderDecision> {
        let scores = Gender::ALL
            .iter()
            .map(|&g| Ok((g, self.avg(&ModelKey::Gender(g))?)))
            .collect::<Result<Vec<_>>>()?;
        let vals: Vec<f64> = scores.iter().map(|s| s.1).collect();
        let best = argmax(&vals).unwrap_or(0);
        let tie = vals.iter().filter(|&&v| v == vals[best]).count() > 1;
        Ok(GenderDecision {
            chosen: scores[best].0,
            scores,
            tie,
        })
    }

    fn decide_emotion(&self, gender: Option<Gender>) -> Result<EmotionDecision> {
        let emotions = &self.reg.emotions;
        if emotions.is_empty() {
            return Err(Error::MissingModel("registry has no emotions".into()));
        }
        let scores = emotions
            .iter()
            .map(|e| {
                let key = match gender {
                    Some(g) => ModelKey::Emotion(g, e.clone()),
                    None => ModelKey::PooledEmotion(e.clone()),
                };
                Ok((e.clone(), self.avg(&key)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let vals: Vec<f64> = scores.iter().map(|s| s.1).collect();
        let best = argmax(&vals).unwrap_or(0);
        let tie = vals.iter().filter(|&&v| v == vals[best]).count() > 1;
        Ok(EmotionDecision {
            chosen: scores[best].0.clone(),
            scores,
            tie,
            gender,
        })
    }

    /// Emotion argmax over the emotion models of gender `g`.
    pub fn identify_emotion(&self, g: Gender) -> Result<EmotionDecision> {
        self.decide_emotion(Some(g))
    }

    /// Emotion argmax over the gender-independent emotion models.
    pub fn identify_emotion_pooled(&self) -> Result<EmotionDecision> {
        self.decide_emotion(None)
    }

    /// Three-term score for `claimed` given recognized gender `g` and
    /// emotion `e`. Speaker models are those enrolled under the claimant's
    /// own gender; `g` selects the wrong-gender cohort.
    pub fn verification_score(&self, claimed: &str, g: Gender, e: &str, trace: StageTrace) -> Result<VerificationScore> {
        let sg = self.reg.claimant_gender(claimed)?;
        if !self.reg.emotions.iter().any(|x| x == e) {
            return Err(Error::MissingModel(ModelKey::speaker(sg, e, claimed).to_string()));
        }
        let target_term = self.avg(&ModelKey::speaker(sg, e, claimed))?;
        let others: Vec<&String> = self.reg.emotions.iter().filter(|x| *x != e).collect();
        let (wrong_emotion_term, b_used) = match self.cfg.wrong_emotion_models {
            WrongEmotionModels::ClaimedSpeaker => {
                self.mean_of(others.iter().map(|b| ModelKey::speaker(sg, b, claimed)))?
            }
            WrongEmotionModels::GenderEmotion => self.mean_of(others.iter().map(|b| ModelKey::Emotion(g, (*b).clone())))?,
        };
        let gbar = g.opposite();
        let wrong_gender_term = match self.cfg.wrong_gender_models {
            WrongGenderModels::EmotionModels => self.mean_of(others.iter().map(|b| ModelKey::Emotion(gbar, (*b).clone())))?.0,
            WrongGenderModels::PooledSpeakers => {
                let keys: Vec<ModelKey> = self
                    .reg
                    .claimants_of(gbar)
                    .map(|c| ModelKey::GenderPooledSpeaker {
                        gender: gbar,
                        speaker: c.id.clone(),
                    })
                    .collect();
                if keys.is_empty() {
                    return Err(Error::MissingModel(format!("speaker_gender_pooled/{gbar}/*")));
                }
                self.mean_of(keys)?.0
            }
        };
        let lambda = match self.cfg.eq3_variant {
            TermCombination::Printed => target_term - wrong_emotion_term - wrong_gender_term,
            TermCombination::Mean => target_term - 0.5 * (wrong_emotion_term + wrong_gender_term),
        };
        Ok(VerificationScore {
            lambda,
            target_term,
            wrong_emotion_term,
            wrong_gender_term,
            b_used,
            trace,
        })
    }

    fn cohort_score(&self, target: ModelKey, cohort: Vec<ModelKey>, trace: StageTrace) -> Result<VerificationScore> {
        let target_term = self.avg(&target)?;
        let (cohort_term, n) = self.mean_of(cohort)?;
        Ok(VerificationScore {
            lambda: target_term - cohort_term,
            target_term,
            wrong_emotion_term: cohort_term,
            wrong_gender_term: 0.0,
            b_used: n,
            trace,
        })
    }

    pub fn score(&self, claimed: &str, mode: &Mode) -> Result<VerificationScore> {
        let sg = self.reg.claimant_gender(claimed)?;
        let others = || self.reg.claimants.iter().filter(move |c| c.id != claimed);
        match mode {
            Mode::ThreeStage => {
                let gd = self.identify_gender()?;
                let ed = self.identify_emotion(gd.chosen)?;
                let (g, e) = (gd.chosen, ed.chosen.clone());
                let trace = StageTrace {
                    gender: Some(gd),
                    emotion: Some(ed),
                    overrides: None,
                };
                self.verification_score(claimed, g, &e, trace)
            }
            Mode::Forced { gender, emotion } => {
                let trace = StageTrace {
                    gender: None,
                    emotion: None,
                    overrides: Some(Override {
                        gender: *gender,
                        emotion: emotion.clone(),
                        reason: "forced".into(),
                    }),
                };
                self.verification_score(claimed, *gender, emotion, trace)
            }
            Mode::OneStage => {
                let cohort = others().map(|c| ModelKey::PooledSpeaker(c.id.clone())).collect();
                self.cohort_score(ModelKey::PooledSpeaker(claimed.to_owned()), cohort, StageTrace::default())
            }
            Mode::TwoStageGender => {
                let gd = self.identify_gender()?;
                let g = gd.chosen;
                let cohort = others()
                    .filter(|c| c.gender == g)
                    .map(|c| ModelKey::GenderPooledSpeaker {
                        gender: g,
                        speaker: c.id.clone(),
                    })
                    .collect();
                let target = ModelKey::GenderPooledSpeaker {
                    gender: sg,
                    speaker: claimed.to_owned(),
                };
                let trace = StageTrace {
                    gender: Some(gd),
                    ..StageTrace::default()
                };
                self.cohort_score(target, cohort, trace)
            }
            Mode::TwoStageEmotion => {
                let ed = self.identify_emotion_pooled()?;
                let e = ed.chosen.clone();
                let cohort = others().map(|c| ModelKey::speaker(c.gender, &e, &c.id)).collect();
                let trace = StageTrace {
                    emotion: Some(ed),
                    ..StageTrace::default()
                };
                self.cohort_score(ModelKey::speaker(sg, &e, claimed), cohort, trace)
            }
        }
    }
}

pub fn identify_gender(reg: &ModelRegistry, seq: &FeatureSequence) -> Result<GenderDecision> {
    UtteranceScorer::new(reg, seq, &CascadeConfig::default()).identify_gender()
}

pub fn identify_emotion(reg: &ModelRegistry, seq: &FeatureSequence, g: Gender) -> Result<EmotionDecision> {
    UtteranceScorer::new(reg, seq, &CascadeConfig::default()).identify_emotion(g)
}

pub fn verification_score(
    reg: &ModelRegistry,
    seq: &FeatureSequence,
    claimed: &str,
    g: Gender,
    e: &str,
    cfg: &CascadeConfig,
) -> Result<VerificationScore> {
    UtteranceScorer::new(reg, seq, cfg).verification_score(claimed, g, e, StageTrace::default())
}

/// Accept iff the mode's score reaches `threshold`.
pub fn verify(
    reg: &ModelRegistry,
    seq: &FeatureSequence,
    claimed: &str,
    threshold: f64,
    mode: &Mode,
    cfg: &CascadeConfig,
) -> Result<Verdict> {
    let score = UtteranceScorer::new(reg, seq, cfg).score(claimed, mode)?;
    Ok(Verdict {
        accept: score.lambda >= threshold,
        score,
    })
}
