//! Audio frontend: 16-bit PCM WAV in, MFCC observation sequences out.

mod cache;
mod frontend;
mod mfcc;
mod wav;

pub use cache::{read_cvf, write_cvf, FeatureCache, CVF_MAGIC};
pub use frontend::{frame_signal, pre_emphasize, FrameSet, FrontendConfig, Waveform, Window};
pub use mfcc::{dct_matrix, hz_to_mel, mel_to_hz, mfcc, FeatureSequence, FrameMeta, Frontend, MelFilterbank};
pub use wav::{decode_wav, load_wav, write_wav};
