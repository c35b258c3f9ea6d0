use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::Waveform;
use crate::error::{Error, Result};

/// Load a mono 16-bit PCM RIFF/WAVE file, scaling samples to `k / 32768`.
pub fn load_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes, path)
}

/// Decode an in-memory WAV file; `path` is only used in error messages.
pub fn decode_wav(bytes: &[u8], path: &Path) -> Result<Waveform> {
    let reader = WavReader::new(std::io::Cursor::new(bytes)).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedFormat(format!(
            "{}: {} channels, expected mono",
            path.display(),
            spec.channels
        )));
    }
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedFormat(format!(
            "{}: {}-bit {:?}, expected 16-bit PCM",
            path.display(),
            spec.bits_per_sample,
            spec.sample_format
        )));
    }
    let declared = reader.len() as usize;
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| map_hound(path, e))?;
    if samples.len() != declared {
        return Err(Error::MalformedWav(format!(
            "{}: data chunk declares {declared} samples, found {}",
            path.display(),
            samples.len()
        )));
    }
    Waveform::new(samples, spec.sample_rate)
}

/// Write a waveform as mono 16-bit PCM, clamping to the representable range.
pub fn write_wav(path: impl AsRef<Path>, wave: &Waveform) -> Result<()> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| write_err(path, e))?;
    for &x in &wave.samples {
        let q = (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q).map_err(|e| write_err(path, e))?;
    }
    writer.finalize().map_err(|e| write_err(path, e))
}

fn write_err(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) => Error::io(path, e),
        other => Error::UnsupportedFormat(format!("{}: {other}", path.display())),
    }
}

fn map_hound(path: &Path, err: hound::Error) -> Error {
    match err {
        // Reads come from memory, so failures mean a short or corrupt stream.
        hound::Error::IoError(e) => Error::MalformedWav(format!("{}: {e}", path.display())),
        hound::Error::Unsupported => {
            Error::UnsupportedFormat(format!("{}: unsupported wav encoding", path.display()))
        }
        hound::Error::FormatError(msg) => {
            // Compressed codecs surface as format errors from the fmt chunk.
            if msg.contains("format") && msg.contains("tag") {
                Error::UnsupportedFormat(format!("{}: {msg}", path.display()))
            } else {
                Error::MalformedWav(format!("{}: {msg}", path.display()))
            }
        }
        other => Error::MalformedWav(format!("{}: {other}", path.display())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pcm16_file(sample_rate: u32, channels: u16, samples: &[i16]) -> Vec<u8> {
        let data_len = (samples.len() * 2) as u32;
        let mut b = Vec::new();
        b.extend_from_slice(b"RIFF");
        b.extend_from_slice(&(36 + data_len).to_le_bytes());
        b.extend_from_slice(b"WAVEfmt ");
        b.extend_from_slice(&16u32.to_le_bytes());
        b.extend_from_slice(&1u16.to_le_bytes());
        b.extend_from_slice(&channels.to_le_bytes());
        b.extend_from_slice(&sample_rate.to_le_bytes());
        b.extend_from_slice(&(sample_rate * 2 * u32::from(channels)).to_le_bytes());
        b.extend_from_slice(&(2 * channels).to_le_bytes());
        b.extend_from_slice(&16u16.to_le_bytes());
        b.extend_from_slice(b"data");
        b.extend_from_slice(&data_len.to_le_bytes());
        for s in samples {
            b.extend_from_slice(&s.to_le_bytes());
        }
        b
    }

    #[test]
    fn silence_loads_as_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("silence.wav");
        std::fs::write(&p, pcm16_file(16000, 1, &vec![0; 16000])).unwrap();
        let w = load_wav(&p).unwrap();
        assert_eq!(w.sample_rate_hz, 16000);
        assert_eq!(w.samples.len(), 16000);
        assert!(w.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn full_scale_positive_sample() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("one.wav");
        std::fs::write(&p, pcm16_file(16000, 1, &[0x7FFF])).unwrap();
        let w = load_wav(&p).unwrap();
        assert_eq!(w.samples, vec![32767.0 / 32768.0]);
    }

    #[test]
    fn stereo_is_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("stereo.wav");
        std::fs::write(&p, pcm16_file(16000, 2, &[1, 2, 3, 4])).unwrap();
        assert!(matches!(load_wav(&p), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn eight_bit_is_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u8.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 8,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&p, spec).unwrap();
        w.write_sample(3i8).unwrap();
        w.finalize().unwrap();
        assert!(matches!(load_wav(&p), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn garbage_and_truncation_are_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("junk.wav");
        std::fs::write(&p, b"RIFX not a wave file at all").unwrap();
        assert!(matches!(load_wav(&p), Err(Error::MalformedWav(_))));

        let mut bytes = pcm16_file(16000, 1, &[1, 2, 3, 4, 5, 6]);
        bytes.truncate(bytes.len() - 5);
        std::fs::write(&p, bytes).unwrap();
        assert!(matches!(load_wav(&p), Err(Error::MalformedWav(_))));
    }

    #[test]
    fn write_then_load_is_quantized_identity() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rt.wav");
        let w = Waveform::new(vec![0.5, -1.0, 32767.0 / 32768.0, 0.25], 16000).unwrap();
        write_wav(&p, &w).unwrap();
        assert_eq!(load_wav(&p).unwrap(), w);
    }
}
