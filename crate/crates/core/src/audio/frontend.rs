use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mono PCM signal with amplitudes in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::ConfigInvalid("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::ConfigInvalid(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Hamming,
    Hann,
    Rect,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        use std::f64::consts::PI;
        if len == 1 {
            return vec![1.0];
        }
        let denom = (len - 1) as f64;
        (0..len)
            .map(|n| {
                let x = 2.0 * PI * n as f64 / denom;
                match self {
                    Window::Hamming => 0.54 - 0.46 * x.cos(),
                    Window::Hann => 0.5 - 0.5 * x.cos(),
                    Window::Rect => 1.0,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontendConfig {
    pub preemphasis_alpha: f64,
    pub frame_ms: f64,
    pub overlap_ms: f64,
    pub window: Window,
    pub n_fft: usize,
    pub n_mel_filters: usize,
    pub n_ceps: usize,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    pub apply_cmn: bool,
    /// Append first and second order regression deltas.
    pub deltas: bool,
    /// Floor applied to mel energies before the logarithm.
    pub log_floor: f64,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            preemphasis_alpha: 0.97,
            frame_ms: 16.0,
            overlap_ms: 9.0,
            window: Window::Hamming,
            n_fft: 256,
            n_mel_filters: 26,
            n_ceps: 13,
            fmin_hz: 0.0,
            fmax_hz: 8000.0,
            apply_cmn: false,
            deltas: false,
            log_floor: 1e-10,
        }
    }
}

impl FrontendConfig {
    pub fn frame_len_samples(&self, sample_rate_hz: u32) -> usize {
        (self.frame_ms * f64::from(sample_rate_hz) / 1000.0).round() as usize
    }

    pub fn hop_samples(&self, sample_rate_hz: u32) -> usize {
        ((self.frame_ms - self.overlap_ms) * f64::from(sample_rate_hz) / 1000.0).round() as usize
    }

    /// Output feature dimension.
    pub fn feature_dim(&self) -> usize {
        if self.deltas {
            3 * self.n_ceps
        } else {
            self.n_ceps
        }
    }

    pub fn validate(&self, sample_rate_hz: u32) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if !(0.0..1.0).contains(&self.preemphasis_alpha) {
            return bad(format!("preemphasis_alpha {} outside [0,1)", self.preemphasis_alpha));
        }
        if !(self.overlap_ms >= 0.0 && self.frame_ms > self.overlap_ms) {
            return bad(format!(
                "need frame_ms > overlap_ms >= 0, got {} / {}",
                self.frame_ms, self.overlap_ms
            ));
        }
        let frame_len = self.frame_len_samples(sample_rate_hz);
        let hop = self.hop_samples(sample_rate_hz);
        if hop == 0 || frame_len <= hop {
            return bad(format!("frame length {frame_len} / hop {hop} samples unusable"));
        }
        if self.n_fft < frame_len {
            return bad(format!("n_fft {} shorter than frame length {frame_len}", self.n_fft));
        }
        if self.n_ceps == 0 || self.n_mel_filters == 0 || self.n_ceps > self.n_mel_filters {
            return bad(format!(
                "need 0 < n_ceps <= n_mel_filters, got {} / {}",
                self.n_ceps, self.n_mel_filters
            ));
        }
        let nyquist = f64::from(sample_rate_hz) / 2.0;
        if !(self.fmin_hz >= 0.0 && self.fmin_hz < self.fmax_hz && self.fmax_hz <= nyquist) {
            return bad(format!(
                "need 0 <= fmin < fmax <= {nyquist}, got {} / {}",
                self.fmin_hz, self.fmax_hz
            ));
        }
        if !(self.log_floor > 0.0) {
            return bad("log_floor must be positive".into());
        }
        Ok(())
    }
}

/// First-order pre-emphasis `y[t] = x[t] - alpha * x[t-1]`, with `y[0] = x[0]`.
pub fn pre_emphasize(w: &Waveform, alpha: f64) -> Waveform {
    let x = &w.samples;
    let mut y = Vec::with_capacity(x.len());
    if let Some(&first) = x.first() {
        y.push(first);
    }
    y.extend(x.windows(2).map(|p| p[1] - alpha * p[0]));
    Waveform {
        samples: y,
        sample_rate_hz: w.sample_rate_hz,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSet {
    pub frames: Vec<Vec<f64>>,
    pub frame_len_samples: usize,
    pub hop_samples: usize,
    pub sample_rate_hz: u32,
}

impl FrameSet {
    pub fn expected_count(n_samples: usize, frame_len: usize, hop: usize) -> usize {
        if n_samples < frame_len {
            0
        } else {
            (n_samples - frame_len) / hop + 1
        }
    }
}

/// Slice into overlapping frames and apply the configured window. Trailing
/// samples that do not fill a frame are dropped.
pub fn frame_signal(w: &Waveform, cfg: &FrontendConfig) -> Result<FrameSet> {
    cfg.validate(w.sample_rate_hz)?;
    let frame_len = cfg.frame_len_samples(w.sample_rate_hz);
    let hop = cfg.hop_samples(w.sample_rate_hz);
    if w.len() < frame_len {
        return Err(Error::SignalTooShort {
            samples: w.len(),
            frame_len,
        });
    }
    let window = cfg.window.coefficients(frame_len);
    let count = FrameSet::expected_count(w.len(), frame_len, hop);
    let frames = (0..count)
        .map(|i| {
            let start = i * hop;
            w.samples[start..start + frame_len]
                .iter()
                .zip(&window)
                .map(|(s, c)| s * c)
                .collect()
        })
        .collect();
    Ok(FrameSet {
        frames,
        frame_len_samples: frame_len,
        hop_samples: hop,
        sample_rate_hz: w.sample_rate_hz,
    })
}
