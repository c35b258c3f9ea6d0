use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{frame_signal, pre_emphasize, FrameSet, FrontendConfig, Waveform};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FrameMeta {
    pub frame_len_samples: usize,
    pub hop_samples: usize,
    pub sample_rate_hz: u32,
}

/// A `T x D` observation sequence stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    data: Vec<f64>,
    dim: usize,
    pub meta: FrameMeta,
}

impl FeatureSequence {
    pub fn new(data: Vec<f64>, dim: usize, meta: FrameMeta) -> Result<Self> {
        if dim == 0 || data.is_empty() || data.len() % dim != 0 {
            return Err(Error::ConfigInvalid(format!(
                "feature matrix of {} values is not a non-empty multiple of dimension {dim}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::ConfigInvalid("non-finite feature value".into()));
        }
        Ok(Self { data, dim, meta })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::ConfigInvalid("ragged feature rows".into()));
        }
        Self::new(rows.concat(), dim, FrameMeta::default())
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters equally spaced on the mel scale, evaluated at the
/// exact frequency of every FFT bin up to Nyquist.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    /// `n_filters x (n_fft/2 + 1)` weights.
    pub weights: Vec<Vec<f64>>,
    pub centers_hz: Vec<f64>,
    edges_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_filters: usize, n_fft: usize, sample_rate_hz: u32, fmin: f64, fmax: f64) -> Result<Self> {
        let (lo, hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
        let edges_hz: Vec<f64> = (0..n_filters + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_filters + 1) as f64))
            .collect();
        let n_bins = n_fft / 2 + 1;
        let bin_hz = f64::from(sample_rate_hz) / n_fft as f64;
        let mut weights = Vec::with_capacity(n_filters);
        for m in 0..n_filters {
            let row: Vec<f64> = (0..n_bins)
                .map(|k| Self::triangle(&edges_hz[m..m + 3], k as f64 * bin_hz))
                .collect();
            if row.iter().sum::<f64>() <= 0.0 {
                return Err(Error::ConfigInvalid(format!(
                    "mel filter {m} ({:.1}-{:.1} Hz) covers no FFT bin; raise n_fft or lower n_mel_filters",
                    edges_hz[m],
                    edges_hz[m + 2]
                )));
            }
            weights.push(row);
        }
        let centers_hz = edges_hz[1..=n_filters].to_vec();
        Ok(Self {
            weights,
            centers_hz,
            edges_hz,
        })
    }

    fn triangle(edges: &[f64], f: f64) -> f64 {
        let (l, c, r) = (edges[0], edges[1], edges[2]);
        if f <= l || f >= r {
            0.0
        } else if f <= c {
            (f - l) / (c - l)
        } else {
            (r - f) / (r - c)
        }
    }

    /// Response of filter `m` to a pure tone at `hz`.
    pub fn response_at(&self, m: usize, hz: f64) -> f64 {
        Self::triangle(&self.edges_hz[m..m + 3], hz)
    }

    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|row| row.iter().zip(power).map(|(w, p)| w * p).sum())
            .collect()
    }
}

/// Orthonormal DCT-II basis, first `n_out` rows of the `n_in x n_in` matrix.
pub fn dct_matrix(n_out: usize, n_in: usize) -> Vec<Vec<f64>> {
    use std::f64::consts::PI;
    let n = n_in as f64;
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            (0..n_in)
                .map(|i| scale * (PI * k as f64 * (i as f64 + 0.5) / n).cos())
                .collect()
        })
        .collect()
}

/// Reusable MFCC extractor for one configuration and sample rate.
pub struct Frontend {
    cfg: FrontendConfig,
    sample_rate_hz: u32,
    filterbank: MelFilterbank,
    dct: Vec<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Frontend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Frontend")
            .field("cfg", &self.cfg)
            .field("sample_rate_hz", &self.sample_rate_hz)
            .finish_non_exhaustive()
    }
}

impl Frontend {
    pub fn new(cfg: &FrontendConfig, sample_rate_hz: u32) -> Result<Self> {
        cfg.validate(sample_rate_hz)?;
        let filterbank = MelFilterbank::new(
            cfg.n_mel_filters,
            cfg.n_fft,
            sample_rate_hz,
            cfg.fmin_hz,
            cfg.fmax_hz,
        )?;
        Ok(Self {
            cfg: cfg.clone(),
            sample_rate_hz,
            filterbank,
            dct: dct_matrix(cfg.n_ceps, cfg.n_mel_filters),
            fft: FftPlanner::new().plan_fft_forward(cfg.n_fft),
        })
    }

    pub fn config(&self) -> &FrontendConfig {
        &self.cfg
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    /// Frame geometry of sequences produced by this frontend.
    pub fn meta(&self) -> FrameMeta {
        FrameMeta {
            frame_len_samples: self.cfg.frame_len_samples(self.sample_rate_hz),
            hop_samples: self.cfg.hop_samples(self.sample_rate_hz),
            sample_rate_hz: self.sample_rate_hz,
        }
    }

    /// Full chain: pre-emphasis, framing, MFCC.
    pub fn extract(&self, wave: &Waveform) -> Result<FeatureSequence> {
        if wave.sample_rate_hz != self.sample_rate_hz {
            return Err(Error::ConfigInvalid(format!(
                "waveform is {} Hz, frontend configured for {} Hz",
                wave.sample_rate_hz, self.sample_rate_hz
            )));
        }
        let emphasized = pre_emphasize(wave, self.cfg.preemphasis_alpha);
        let frames = frame_signal(&emphasized, &self.cfg)?;
        self.cepstra(&frames)
    }

    pub fn power_spectrum(&self, frame: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = frame
            .iter()
            .map(|&x| Complex::new(x, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
            .take(self.cfg.n_fft)
            .collect();
        self.fft.process(&mut buf);
        buf[..self.cfg.n_fft / 2 + 1].iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn log_mel_energies(&self, frame: &[f64]) -> Vec<f64> {
        self.filterbank
            .apply(&self.power_spectrum(frame))
            .into_iter()
            .map(|e| e.max(self.cfg.log_floor).ln())
            .collect()
    }

    pub fn cepstra(&self, frames: &FrameSet) -> Result<FeatureSequence> {
        if frames.sample_rate_hz != self.sample_rate_hz {
            return Err(Error::ConfigInvalid("frame set sample rate mismatch".into()));
        }
        if frames.frame_len_samples > self.cfg.n_fft {
            return Err(Error::ConfigInvalid(format!(
                "n_fft {} shorter than frame length {}",
                self.cfg.n_fft, frames.frame_len_samples
            )));
        }
        if frames.frames.is_empty() {
            return Err(Error::SignalTooShort {
                samples: 0,
                frame_len: frames.frame_len_samples,
            });
        }
        let n_ceps = self.cfg.n_ceps;
        let statics: Vec<Vec<f64>> = frames
            .frames
            .iter()
            .map(|frame| {
                let logmel = self.log_mel_energies(frame);
                self.dct
                    .iter()
                    .map(|basis| basis.iter().zip(&logmel).map(|(b, e)| b * e).sum())
                    .collect()
            })
            .collect();

        let mut rows = if self.cfg.deltas {
            let d1 = deltas(&statics, 2);
            let d2 = deltas(&d1, 2);
            statics
                .iter()
                .zip(&d1)
                .zip(&d2)
                .map(|((s, a), b)| [s.as_slice(), a, b].concat())
                .collect()
        } else {
            statics
        };
        if self.cfg.apply_cmn {
            cepstral_mean_normalize(&mut rows);
        }
        debug_assert!(rows.iter().all(|r| r.len() == self.cfg.feature_dim()));
        let dim = if self.cfg.deltas { 3 * n_ceps } else { n_ceps };
        FeatureSequence::new(
            rows.concat(),
            dim,
            FrameMeta {
                frame_len_samples: frames.frame_len_samples,
                hop_samples: frames.hop_samples,
                sample_rate_hz: frames.sample_rate_hz,
            },
        )
    }
}

/// Compute MFCCs for an already framed (and windowed) signal.
pub fn mfcc(frames: &FrameSet, cfg: &FrontendConfig) -> Result<FeatureSequence> {
    Frontend::new(cfg, frames.sample_rate_hz)?.cepstra(frames)
}

/// Regression deltas over `±width` frames with edge replication.
fn deltas(rows: &[Vec<f64>], width: usize) -> Vec<Vec<f64>> {
    let t_max = rows.len() as isize - 1;
    let denom: f64 = 2.0 * (1..=width).map(|n| (n * n) as f64).sum::<f64>();
    (0..rows.len() as isize)
        .map(|t| {
            let mut out = vec![0.0; rows[0].len()];
            for n in 1..=width as isize {
                let fwd = &rows[(t + n).min(t_max) as usize];
                let back = &rows[(t - n).max(0) as usize];
                for (o, (f, b)) in out.iter_mut().zip(fwd.iter().zip(back)) {
                    *o += n as f64 * (f - b);
                }
            }
            out.iter_mut().for_each(|o| *o /= denom);
            out
        })
        .collect()
}

fn cepstral_mean_normalize(rows: &mut [Vec<f64>]) {
    let n = rows.len() as f64;
    let dim = rows[0].len();
    for d in 0..dim {
        let mean = rows.iter().map(|r| r[d]).sum::<f64>() / n;
        rows.iter_mut().for_each(|r| r[d] -= mean);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frameset(frames: Vec<Vec<f64>>) -> FrameSet {
        FrameSet {
            frame_len_samples: frames[0].len(),
            hop_samples: 112,
            sample_rate_hz: 16000,
            frames,
        }
    }

    #[test]
    fn silent_frames_hit_the_log_floor() {
        let cfg = FrontendConfig::default();
        let fe = Frontend::new(&cfg, 16000).unwrap();
        let logmel = fe.log_mel_energies(&vec![0.0; 256]);
        assert!(logmel.iter().all(|&e| e == 1e-10f64.ln()));

        let feats = mfcc(&frameset(vec![vec![0.0; 256]; 4]), &cfg).unwrap();
        let first = feats.frame(0).to_vec();
        assert!(feats.frames().all(|f| f == first.as_slice()));
    }

    #[test]
    fn dct_of_constant_has_only_dc() {
        let dct = dct_matrix(13, 26);
        let constant = vec![-3.5; 26];
        for (k, basis) in dct.iter().enumerate() {
            let c: f64 = basis.iter().zip(&constant).map(|(b, x)| b * x).sum();
            if k == 0 {
                assert!((c - (-3.5 * 26f64.sqrt())).abs() < 1e-12);
            } else {
                assert!(c.abs() < 1e-12, "coefficient {k} = {c}");
            }
        }
    }

    #[test]
    fn dct_rows_are_orthonormal() {
        for (n_out, n_in) in [(13, 26), (26, 26), (5, 40)] {
            let m = dct_matrix(n_out, n_in);
            for i in 0..n_out {
                for j in 0..n_out {
                    let dot: f64 = m[i].iter().zip(&m[j]).map(|(a, b)| a * b).sum();
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((dot - expect).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn filterbank_centers_increase_and_rows_are_positive() {
        let fb = MelFilterbank::new(26, 256, 16000, 0.0, 8000.0).unwrap();
        assert!(fb.centers_hz.windows(2).all(|w| w[1] > w[0]));
        assert!(fb.weights.iter().all(|r| r.iter().sum::<f64>() > 0.0));
    }

    #[test]
    fn too_many_filters_for_fft_is_rejected() {
        assert!(matches!(
            MelFilterbank::new(200, 64, 16000, 0.0, 8000.0),
            Err(Error::ConfigInvalid(_))
        ));
    }

    #[test]
    fn sine_peaks_in_best_responding_filter() {
        let cfg = FrontendConfig::default();
        let fe = Frontend::new(&cfg, 16000).unwrap();
        let window = cfg.window.coefficients(256);
        let frame: Vec<f64> = (0..256)
            .map(|n| (2.0 * std::f64::consts::PI * 1000.0 * n as f64 / 16000.0).sin() * window[n])
            .collect();
        let energies = fe.filterbank().apply(&fe.power_spectrum(&frame));
        let best_energy = crate::math::argmax(&energies).unwrap();

        // Oracle: evaluate every triangle at exactly 1 kHz.
        let responses: Vec<f64> = (0..26).map(|m| fe.filterbank().response_at(m, 1000.0)).collect();
        let best_response = crate::math::argmax(&responses).unwrap();
        let nearest_center = (0..26)
            .min_by(|&a, &b| {
                let da = (fe.filterbank().centers_hz[a] - 1000.0).abs();
                let db = (fe.filterbank().centers_hz[b] - 1000.0).abs();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        assert_eq!(best_energy, best_response);
        assert_eq!(best_energy, nearest_center);
    }

    #[test]
    fn cmn_zeroes_every_dimension_mean() {
        let mut cfg = FrontendConfig::default();
        cfg.apply_cmn = true;
        cfg.deltas = true;
        let fe = Frontend::new(&cfg, 16000).unwrap();
        let samples: Vec<f64> = (0..4000).map(|n| ((n * n) as f64 * 1e-5).sin() * 0.3).collect();
        let feats = fe.extract(&Waveform::new(samples, 16000).unwrap()).unwrap();
        assert_eq!(feats.dim(), 39);
        for d in 0..feats.dim() {
            let mean = feats.frames().map(|f| f[d]).sum::<f64>() / feats.len() as f64;
            assert!(mean.abs() < 1e-9, "dim {d} mean {mean}");
        }
    }

    #[test]
    fn extraction_is_deterministic() {
        let cfg = FrontendConfig::default();
        let fe = Frontend::new(&cfg, 16000).unwrap();
        let samples: Vec<f64> = (0..3000).map(|n| (n as f64 * 0.05).sin() * 0.5).collect();
        let w = Waveform::new(samples, 16000).unwrap();
        let a = fe.extract(&w).unwrap();
        let b = Frontend::new(&cfg, 16000).unwrap().extract(&w).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), (3000 - 256) / 112 + 1);
    }

    #[test]
    fn rate_mismatch_is_rejected() {
        let fe = Frontend::new(&FrontendConfig::default(), 16000).unwrap();
        let mut cfg8 = FrontendConfig::default();
        cfg8.fmax_hz = 4000.0;
        let w = Waveform::new(vec![0.0; 4000], 8000).unwrap();
        assert!(fe.extract(&w).is_err());
        assert!(Frontend::new(&cfg8, 8000).unwrap().extract(&w).is_ok());
    }
}
