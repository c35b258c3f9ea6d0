//! Deterministic source-filter synthesis of an emotional speech corpus.
//!
//! Every utterance is a glottal pulse train (with aspiration noise) driven
//! through three time-varying formant resonators. Speaker identity lives in
//! the vocal-tract scale, per-formant offsets, F0 and voice-quality tilt;
//! emotion modulates F0, intonation, speaking rate, breathiness, formant
//! bandwidth, energy and spectral tilt, plus a per-speaker idiosyncratic
//! deviation. Sentences are fixed sequences of phone-like resonance targets
//! shared by all speakers.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DatasetManifest, Gender, ManifestEntry, Role, Split};
use crate::audio::{write_wav, Waveform};
use crate::error::{Error, Result};
use crate::math::derive_seed;
use crate::par::Parallelism;

/// Acoustic realization of one emotion. `neutral` is the identity style.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmotionStyle {
    pub f0_scale: f64,
    /// Multiplier on the depth of the intonation contour.
    pub f0_range: f64,
    pub rate_scale: f64,
    /// Aspiration noise mixed into the voiced source, 0..1.
    pub breathiness: f64,
    pub bandwidth_scale: f64,
    pub energy_db: f64,
    /// Positive values flatten the source spectrum (tense voice).
    pub tilt: f64,
    /// Multiplier on all formant frequencies.
    pub formant_scale: f64,
    /// Multiplier on per-utterance random variation.
    pub variability: f64,
    /// Scale of the speaker-specific deviation from this style.
    pub idiosyncrasy: f64,
}

impl EmotionStyle {
    pub fn neutral() -> Self {
        Self {
            f0_scale: 1.0,
            f0_range: 1.0,
            rate_scale: 1.0,
            breathiness: 0.0,
            bandwidth_scale: 1.0,
            energy_db: 0.0,
            tilt: 0.0,
            formant_scale: 1.0,
            variability: 0.7,
            idiosyncrasy: 0.0,
        }
    }

    /// Built-in style for the six default emotion labels.
    pub fn preset(label: &str) -> Option<Self> {
        let s = |f0_scale, f0_range, rate_scale, breathiness, bandwidth_scale, energy_db, tilt, formant_scale, variability| EmotionStyle {
            f0_scale,
            f0_range,
            rate_scale,
            breathiness,
            bandwidth_scale,
            energy_db,
            tilt,
            formant_scale,
            variability,
            idiosyncrasy: 1.0,
        };
        Some(match label {
            "neutral" => Self::neutral(),
            "anger" => s(1.35, 1.5, 1.15, 0.05, 1.30, 6.0, 0.6, 1.02, 1.8),
            "sadness" => s(0.90, 0.5, 0.80, 0.30, 0.90, -6.0, -0.6, 0.98, 1.5),
            "happiness" => s(1.30, 1.6, 1.10, 0.05, 1.15, 4.5, 0.5, 1.08, 1.7),
            "disgust" => s(0.95, 0.8, 0.85, 0.20, 1.40, -2.0, -0.2, 0.97, 1.6),
            "fear" => s(1.50, 1.2, 1.25, 0.50, 0.80, -2.0, -0.3, 1.03, 1.7),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Separability {
    /// Spread of the per-speaker formant offsets (Hz, scaled up for F2/F3).
    pub speaker_formant_spread_hz: f64,
    /// Gain on every emotion's F0 deviation from neutral.
    pub emotion_f0_scale_range: f64,
    /// Gain on every emotion's speaking-rate deviation from neutral.
    pub emotion_rate_range: f64,
    /// Additive white noise level; `-inf` yields pure noise.
    pub noise_snr_db: f64,
    /// Gain on the speaker-specific emotional deviations.
    pub emotion_idiosyncrasy: f64,
}

impl Default for Separability {
    fn default() -> Self {
        Self {
            speaker_formant_spread_hz: 120.0,
            emotion_f0_scale_range: 1.0,
            emotion_rate_range: 1.0,
            noise_snr_db: 30.0,
            emotion_idiosyncrasy: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseF0 {
    pub male_mean_hz: f64,
    pub female_mean_hz: f64,
    pub speaker_spread_hz: f64,
}

impl Default for BaseF0 {
    fn default() -> Self {
        Self {
            male_mean_hz: 120.0,
            female_mean_hz: 210.0,
            speaker_spread_hz: 15.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub n_speakers_per_gender: usize,
    /// Per-gender override of `n_speakers_per_gender` (asymmetric corpora).
    pub speakers_by_gender: Option<BTreeMap<Gender, usize>>,
    /// Claimants per gender; `None` applies the 17-of-20 rule proportionally.
    pub claimants_per_gender: Option<usize>,
    pub emotion_set: Vec<String>,
    pub n_sentences_train: usize,
    pub n_sentences_test: usize,
    pub n_repetitions: usize,
    pub utterance_seconds: f64,
    pub sample_rate_hz: u32,
    pub separability: Separability,
    pub base_f0: BaseF0,
    /// Styles for labels without a preset, or overrides of presets.
    pub emotion_styles: BTreeMap<String, EmotionStyle>,
    pub rng_seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_speakers_per_gender: 20,
            speakers_by_gender: None,
            claimants_per_gender: None,
            emotion_set: ["neutral", "anger", "sadness", "happiness", "disgust", "fear"]
                .map(String::from)
                .to_vec(),
            n_sentences_train: 4,
            n_sentences_test: 4,
            n_repetitions: 9,
            utterance_seconds: 1.5,
            sample_rate_hz: 16000,
            separability: Separability::default(),
            base_f0: BaseF0::default(),
            emotion_styles: BTreeMap::new(),
            rng_seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn speakers(&self, g: Gender) -> usize {
        self.speakers_by_gender
            .as_ref()
            .and_then(|m| m.get(&g).copied())
            .unwrap_or(self.n_speakers_per_gender)
    }

    pub fn style(&self, emotion: &str) -> Option<EmotionStyle> {
        self.emotion_styles
            .get(emotion)
            .cloned()
            .or_else(|| EmotionStyle::preset(emotion))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::SpecInvalid(m));
        for g in Gender::ALL {
            if self.speakers(g) == 0 {
                return bad(format!("{g} speaker count must be >= 1"));
            }
        }
        if self.n_sentences_train == 0 || self.n_sentences_test == 0 || self.n_repetitions == 0 {
            return bad("sentence and repetition counts must be >= 1".into());
        }
        if self.sample_rate_hz < 8000 {
            return bad(format!("sample rate {} below 8000 Hz", self.sample_rate_hz));
        }
        if !(self.utterance_seconds > 0.05) {
            return bad("utterance_seconds must exceed 50 ms".into());
        }
        if self.emotion_set.is_empty() {
            return bad("emotion_set is empty".into());
        }
        for (i, e) in self.emotion_set.iter().enumerate() {
            if self.emotion_set[..i].contains(e) {
                return bad(format!("duplicate emotion label {e:?}"));
            }
            if e.is_empty() || e.contains(['/', '\\', ',']) {
                return bad(format!("emotion label {e:?} is not path/CSV safe"));
            }
            if self.style(e).is_none() {
                return bad(format!("no style defined for emotion {e:?}"));
            }
        }
        let s = &self.separability;
        if !(s.speaker_formant_spread_hz >= 0.0) || !(s.emotion_idiosyncrasy >= 0.0) {
            return bad("spreads must be non-negative".into());
        }
        if !(s.emotion_f0_scale_range > 0.0 && s.emotion_rate_range > 0.0) {
            return bad("emotion gains must be positive".into());
        }
        if s.noise_snr_db.is_nan() || s.noise_snr_db == f64::INFINITY {
            return bad("noise_snr_db must be finite or -inf".into());
        }
        let f = &self.base_f0;
        if !(f.male_mean_hz > 0.0 && f.female_mean_hz > 0.0 && f.speaker_spread_hz >= 0.0) {
            return bad("base F0 parameters must be positive".into());
        }
        if let Some(c) = self.claimants_per_gender {
            if c == 0 || Gender::ALL.iter().any(|&g| c > self.speakers(g)) {
                return bad(format!("claimants_per_gender {c} out of range"));
            }
        }
        Ok(())
    }

    pub fn speaker_id(g: Gender, index: usize) -> String {
        let p = match g {
            Gender::Male => 'm',
            Gender::Female => 'f',
        };
        format!("{p}{index:02}")
    }
}

/// Number of claimants for a gender with `n` speakers: 17 of 20 scaled
/// proportionally, leaving at least one imposter whenever `n >= 2`.
pub fn claimants_for(n: usize, explicit: Option<usize>) -> usize {
    if let Some(c) = explicit {
        return c.min(n);
    }
    if n <= 1 {
        return n;
    }
    ((n * 17 + 10) / 20).clamp(1, n - 1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PhoneKind {
    Vowel,
    Nasal,
    Fricative,
    Closure,
}

#[derive(Debug, Clone)]
struct Phone {
    kind: PhoneKind,
    /// Neutral-tract formant targets (Hz).
    formants: [f64; 3],
    duration_s: f64,
}

/// F1/F2/F3 of a small vowel inventory for an adult male tract.
const VOWELS: [[f64; 3]; 8] = [
    [270.0, 2290.0, 3010.0],
    [390.0, 1990.0, 2550.0],
    [530.0, 1840.0, 2480.0],
    [660.0, 1720.0, 2410.0],
    [730.0, 1090.0, 2440.0],
    [570.0, 840.0, 2410.0],
    [440.0, 1020.0, 2240.0],
    [300.0, 870.0, 2240.0],
];

fn sentence(seed: u64, sentence_id: u32) -> (Vec<Phone>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("sentence/{sentence_id}")));
    let n = rng.random_range(9..=13);
    let mut phones = Vec::with_capacity(n);
    for i in 0..n {
        let roll: f64 = rng.random();
        let kind = if i == 0 || roll < 0.62 {
            PhoneKind::Vowel
        } else if roll < 0.76 {
            PhoneKind::Nasal
        } else if roll < 0.9 {
            PhoneKind::Fricative
        } else {
            PhoneKind::Closure
        };
        let formants = match kind {
            PhoneKind::Vowel => VOWELS[rng.random_range(0..VOWELS.len())],
            PhoneKind::Nasal => [250.0, 1100.0 + rng.random_range(0.0..600.0), 2400.0],
            PhoneKind::Fricative => [
                1800.0 + rng.random_range(0.0..1500.0),
                3500.0 + rng.random_range(0.0..1500.0),
                5500.0,
            ],
            PhoneKind::Closure => [300.0, 1200.0, 2500.0],
        };
        let duration_s = match kind {
            PhoneKind::Vowel => rng.random_range(0.09..0.17),
            PhoneKind::Nasal => rng.random_range(0.06..0.10),
            PhoneKind::Fricative => rng.random_range(0.07..0.12),
            PhoneKind::Closure => rng.random_range(0.03..0.06),
        };
        phones.push(Phone {
            kind,
            formants,
            duration_s,
        });
    }
    // Intonation contour: a few random breakpoints over normalized time.
    let contour = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
    (phones, contour)
}

/// Fixed acoustic traits of one speaker.
#[derive(Debug, Clone)]
struct Speaker {
    tract_scale: f64,
    formant_offsets: [f64; 3],
    f0_hz: f64,
    tilt: f64,
    bandwidth_scale: f64,
}

impl Speaker {
    fn draw(spec: &SynthSpec, g: Gender, id: &str) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.rng_seed, &format!("speaker/{id}")));
        let spread = spec.separability.speaker_formant_spread_hz;
        let (tract, f0) = match g {
            Gender::Male => (1.0, spec.base_f0.male_mean_hz),
            Gender::Female => (1.2, spec.base_f0.female_mean_hz),
        };
        let mut sym = |w: f64| rng.random_range(-1.0..=1.0) * w;
        Speaker {
            tract_scale: tract * (1.0 + sym(0.045)),
            formant_offsets: [sym(0.6 * spread), sym(1.2 * spread), sym(1.8 * spread)],
            f0_hz: f0 + sym(spec.base_f0.speaker_spread_hz),
            tilt: sym(0.5),
            bandwidth_scale: 1.0 + sym(0.15),
        }
    }
}

/// Effective style of one speaker for one emotion: the shared style bent by
/// a speaker-specific deviation.
#[derive(Debug, Clone)]
struct Expression {
    style: EmotionStyle,
    formant_shift: [f64; 3],
}

fn expression(spec: &SynthSpec, speaker_id: &str, emotion: &str) -> Expression {
    let base = spec.style(emotion).expect("validated");
    let sep = &spec.separability;
    let mut style = base.clone();
    style.f0_scale = 1.0 + (base.f0_scale - 1.0) * sep.emotion_f0_scale_range;
    style.rate_scale = 1.0 + (base.rate_scale - 1.0) * sep.emotion_rate_range;
    let k = base.idiosyncrasy * sep.emotion_idiosyncrasy;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        spec.rng_seed,
        &format!("expression/{speaker_id}/{emotion}"),
    ));
    let mut sym = |w: f64| rng.random_range(-1.0..=1.0) * w * k;
    style.f0_scale *= 1.0 + sym(0.08);
    style.tilt += sym(0.35);
    style.bandwidth_scale *= 1.0 + sym(0.15);
    style.breathiness = (style.breathiness + sym(0.08)).clamp(0.0, 1.0);
    let formant_shift = [sym(40.0), sym(90.0), sym(120.0)];
    Expression {
        style,
        formant_shift,
    }
}

/// Two-pole resonator with unity gain at its centre frequency.
#[derive(Debug, Default, Clone, Copy)]
struct Resonator {
    y1: f64,
    y2: f64,
}

impl Resonator {
    #[inline]
    fn step(&mut self, x: f64, freq: f64, bw: f64, sr: f64) -> f64 {
        let r = (-PI * bw / sr).exp();
        let theta = 2.0 * PI * freq / sr;
        let a1 = 2.0 * r * theta.cos();
        let a2 = -r * r;
        // Normalize the peak response to roughly 1.
        let gain = (1.0 - r) * (1.0 - 2.0 * r * (2.0 * theta).cos() + r * r).sqrt();
        let y = gain * x + a1 * self.y1 + a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

fn interpolate(contour: &[f64], pos: f64) -> f64 {
    let x = pos.clamp(0.0, 1.0) * (contour.len() - 1) as f64;
    let i = (x.floor() as usize).min(contour.len() - 2);
    let frac = x - i as f64;
    contour[i] * (1.0 - frac) + contour[i + 1] * frac
}

/// Synthesize one utterance.
fn synthesize(
    spec: &SynthSpec,
    speaker: &Speaker,
    expr: &Expression,
    phones: &[Phone],
    contour: &[f64],
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let sr = f64::from(spec.sample_rate_hz);
    let n = (spec.utterance_seconds * sr).round() as usize;
    let st = &expr.style;
    let var = st.variability;
    let gauss = Normal::new(0.0, 1.0).unwrap();
    let mut jitter = |scale: f64| gauss.sample(rng) * scale * var;

    // How strongly this take expresses the emotion; neutral has no offset
    // from the speaker's baseline, so it is unaffected.
    let k = (1.0 + jitter(0.15)).clamp(0.5, 1.5);
    let dev = |v: f64, base: f64| base + (v - base) * k;
    let f0 = speaker.f0_hz * dev(st.f0_scale, 1.0) * (1.0 + jitter(0.03));
    let rate = dev(st.rate_scale, 1.0) * (1.0 + jitter(0.04));
    let formant_jitter = [jitter(15.0), jitter(30.0), jitter(40.0)];
    let tilt = speaker.tilt + st.tilt * k + jitter(0.05);
    let energy = 10f64.powf((st.energy_db * k + jitter(1.0)) / 20.0);
    let breath = (st.breathiness * k + jitter(0.02)).clamp(0.0, 1.0);
    let bandwidth_scale = dev(st.bandwidth_scale, 1.0);
    let formant_scale = dev(st.formant_scale, 1.0);
    let f0_range = dev(st.f0_range, 1.0);

    // Phone timeline in samples, with a short leading silence.
    let lead = (0.04 * sr) as usize;
    let mut bounds = Vec::with_capacity(phones.len());
    let mut t = lead as f64;
    for p in phones {
        let d = p.duration_s / rate * (1.0 + jitter(0.05)).max(0.5) * sr;
        bounds.push((t as usize, (t + d) as usize));
        t += d;
    }
    let speech_end = t as usize;

    // One-pole source smoothing: larger pole = steeper spectral tilt.
    let pole = (0.92 - 0.08 * tilt).clamp(0.5, 0.985);
    let transition = (0.02 * sr) as usize;
    let mut out = vec![0.0; n];
    let mut res = [Resonator::default(); 3];
    let mut phase = 0.0;
    let mut src_lp = 0.0;
    let mut phone_idx = 0;
    let target_of = |p: &Phone| -> [f64; 3] {
        let mut f = [0.0; 3];
        for k in 0..3 {
            f[k] = p.formants[k] * speaker.tract_scale * formant_scale
                + speaker.formant_offsets[k]
                + expr.formant_shift[k]
                + formant_jitter[k];
        }
        f
    };
    for (i, sample) in out.iter_mut().enumerate() {
        if i < lead || i >= speech_end {
            continue;
        }
        while phone_idx + 1 < phones.len() && i >= bounds[phone_idx].1 {
            phone_idx += 1;
        }
        let p = &phones[phone_idx];
        let (start, end) = bounds[phone_idx];
        let mut formants = target_of(p);
        // Glide from the previous phone's targets.
        if phone_idx > 0 && i < start + transition {
            let prev = target_of(&phones[phone_idx - 1]);
            let w = (i - start) as f64 / transition as f64;
            for k in 0..3 {
                formants[k] = prev[k] * (1.0 - w) + formants[k] * w;
            }
        }
        let pos = (i - lead) as f64 / (speech_end - lead).max(1) as f64;
        let intonation = 1.0 + 0.12 * f0_range * interpolate(contour, pos) - 0.08 * pos;
        let f0_now = f0 * intonation;
        phase += f0_now / sr;
        let pulse = if phase >= 1.0 {
            phase -= 1.0;
            1.0
        } else {
            0.0
        };
        let noise: f64 = gauss.sample(rng);
        let (excitation, level) = match p.kind {
            PhoneKind::Vowel => (pulse * (1.0 - breath) + 0.15 * breath * noise, 1.0),
            PhoneKind::Nasal => (pulse * (1.0 - breath) + 0.1 * breath * noise, 0.45),
            PhoneKind::Fricative => (0.25 * noise, 0.35),
            PhoneKind::Closure => (0.05 * noise, 0.05),
        };
        src_lp = excitation + pole * src_lp;
        let mut y = src_lp;
        let bw_scale = bandwidth_scale * speaker.bandwidth_scale;
        for (k, r) in res.iter_mut().enumerate() {
            let bw = [80.0, 110.0, 160.0][k] * bw_scale * (1.0 + formants[k] / 4000.0);
            let f = formants[k].clamp(80.0, sr / 2.0 - 200.0);
            y = r.step(y, f, bw, sr) + 0.1 * y;
        }
        // 10 ms raised-cosine ramps at phone edges.
        let ramp = (0.01 * sr) as usize;
        let edge = (i - start).min(end.saturating_sub(i + 1)).min(ramp) as f64 / ramp as f64;
        let env = level * (0.3 + 0.7 * (0.5 - 0.5 * (PI * edge).cos()));
        *sample = y * env;
    }

    let peak = out.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak > 0.0 {
        let g = 0.3 * energy / peak;
        out.iter_mut().for_each(|x| *x *= g);
    }
    let snr = spec.separability.noise_snr_db;
    let rms = (out.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
    let noise_rms = if snr == f64::NEG_INFINITY {
        out.iter_mut().for_each(|x| *x = 0.0);
        0.05
    } else {
        rms / 10f64.powf(snr / 20.0)
    };
    for x in out.iter_mut() {
        *x = (*x + noise_rms * gauss.sample(rng)).clamp(-1.0, 1.0);
    }
    out
}

/// Manifest entries `generate_corpus` would write for `spec`, without
/// synthesizing audio.
pub fn plan_corpus(spec: &SynthSpec) -> Vec<ManifestEntry> {
    let mut entries = Vec::new();
    let total_sentences = (spec.n_sentences_train + spec.n_sentences_test) as u32;
    for g in Gender::ALL {
        let n = spec.speakers(g);
        let n_claim = claimants_for(n, spec.claimants_per_gender);
        for s in 0..n {
            let speaker_id = SynthSpec::speaker_id(g, s);
            let role = if s < n_claim { Role::Claimant } else { Role::Imposter };
            for emotion in &spec.emotion_set {
                for sentence_id in 0..total_sentences {
                    let split = if (sentence_id as usize) < spec.n_sentences_train {
                        Split::Train
                    } else {
                        Split::Test
                    };
                    for rep in 0..spec.n_repetitions as u32 {
                        entries.push(ManifestEntry {
                            path: format!("{g}/{speaker_id}/{emotion}/s{sentence_id}_r{rep}.wav"),
                            speaker_id: speaker_id.clone(),
                            gender: g,
                            emotion: emotion.clone(),
                            sentence_id,
                            repetition: rep,
                            split,
                            role,
                        });
                    }
                }
            }
        }
    }
    entries
}

/// Generate the corpus under `out_dir`: WAV files, `manifest.csv`, and
/// `spec.used` echoing the resolved spec.
pub fn generate_corpus(spec: &SynthSpec, out_dir: &Path, par: &Parallelism) -> Result<DatasetManifest> {
    spec.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let jobs = plan_corpus(spec);
    let total_sentences = (spec.n_sentences_train + spec.n_sentences_test) as u32;

    let sentences: BTreeMap<u32, (Vec<Phone>, Vec<f64>)> =
        (0..total_sentences).map(|i| (i, sentence(spec.rng_seed, i))).collect();
    par.try_map(&jobs, |e| -> Result<()> {
        let speaker = Speaker::draw(spec, e.gender, &e.speaker_id);
        let expr = expression(spec, &e.speaker_id, &e.emotion);
        let (phones, contour) = &sentences[&e.sentence_id];
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.rng_seed, &format!("utterance/{}", e.path)));
        let samples = synthesize(spec, &speaker, &expr, phones, contour, &mut rng);
        let path: PathBuf = out_dir.join(&e.path);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|err| Error::io(dir, err))?;
        }
        write_wav(&path, &Waveform::new(samples, spec.sample_rate_hz)?)
    })?;

    let manifest = DatasetManifest::new(out_dir, jobs);
    manifest.save(out_dir.join("manifest.csv"))?;
    let echo = toml::to_string(spec).map_err(|e| Error::SpecInvalid(e.to_string()))?;
    let echo_path = out_dir.join("spec.used");
    std::fs::write(&echo_path, echo).map_err(|e| Error::io(echo_path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn claimant_rule() {
        assert_eq!(claimants_for(20, None), 17);
        assert_eq!(claimants_for(10, None), 9);
        assert_eq!(claimants_for(2, None), 1);
        assert_eq!(claimants_for(1, None), 1);
        assert_eq!(claimants_for(5, Some(3)), 3);
    }

    #[test]
    fn presets_cover_default_emotions() {
        let spec = SynthSpec::default();
        assert!(spec.validate().is_ok());
        assert_eq!(EmotionStyle::preset("neutral").unwrap(), EmotionStyle::neutral());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = SynthSpec::default();
        s.sample_rate_hz = 4000;
        assert!(matches!(s.validate(), Err(Error::SpecInvalid(_))));
        let mut s = SynthSpec::default();
        s.emotion_set.push("neutral".into());
        assert!(s.validate().is_err());
        let mut s = SynthSpec::default();
        s.emotion_set.push("boredom".into());
        assert!(s.validate().is_err());
        let mut s = SynthSpec::default();
        s.n_repetitions = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn spec_toml_round_trip() {
        let mut s = SynthSpec::default();
        s.separability.noise_snr_db = f64::NEG_INFINITY;
        let text = toml::to_string(&s).unwrap();
        let back: SynthSpec = toml::from_str(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn synthesized_signal_is_bounded_and_voiced() {
        let spec = SynthSpec::default();
        let speaker = Speaker::draw(&spec, Gender::Female, "f00");
        let expr = expression(&spec, "f00", "anger");
        let (phones, contour) = sentence(0, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = synthesize(&spec, &speaker, &expr, &phones, &contour, &mut rng);
        assert_eq!(x.len(), 24000);
        assert!(x.iter().all(|v| v.abs() <= 1.0));
        let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
        assert!(rms > 0.01, "rms {rms}");
    }

    #[test]
    fn every_style_and_sentence_is_finite() {
        let spec = SynthSpec::default();
        for sid in 0..6u32 {
            let (phones, contour) = sentence(0, sid);
            for (g, spk) in [(Gender::Male, "m00"), (Gender::Female, "f01")] {
                let speaker = Speaker::draw(&spec, g, spk);
                for emo in &spec.emotion_set {
                    let expr = expression(&spec, spk, emo);
                    let mut rng = ChaCha8Rng::seed_from_u64(u64::from(sid));
                    let x = synthesize(&spec, &speaker, &expr, &phones, &contour, &mut rng);
                    assert!(x.iter().all(|v| v.is_finite() && v.abs() <= 1.0), "{spk} {emo} s{sid}");
                }
            }
        }
    }
}
