//! Speech front end: WAV input, framing, endpoint detection, cepstral pitch
//! tracking, Mel-cepstral features and vector-quantization speaker models.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! bottom of this file name the common instantiations.

pub mod audio_io;
pub mod cepstrum;
pub mod cli;
pub mod config;
pub mod digest;
pub mod error;
pub mod framing;
pub mod mel_features;
pub mod pitch;
pub mod scalar;
pub mod synth;
pub mod vad;
pub mod vq;

pub use audio_io::{
    load_wav, read_wav, render_table, save_table, save_wav, write_wav, AudioSignal, Cell, Table,
    TableFormat, WavEncoding,
};
pub use cepstrum::{quefrency_to_hz, real_cepstrum, CepstrumAnalyzer, CepstrumFrame};
pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use framing::{frame_signal, hamming_window, pre_emphasis, FrameConfig, FrameSequence, Window};
pub use mel_features::{
    build_filterbank, extract_mfcc, hz_from_mel, mel_from_hz, Dct2, FeatureMatrix, MelFilterbank,
    MfccExtractor,
};
pub use pitch::{
    detect_pitch_frame, median_smooth_to_root, track_pitch, FrameDecision, PitchConfig,
    PitchDetector, PitchEntry, PitchTrack, Voicing,
};
pub use scalar::Scalar;
pub use vad::{detect_endpoints, short_time_energy, zero_crossing_rate, EndpointResult, VadConfig};
pub use vq::{
    lbg_train, lbg_train_traced, quantize, recognize, score, Codebook, LbgOutcome, LbgParams,
    Recognition, StageTrace,
};

pub type AudioSignalF64 = AudioSignal<f64>;
pub type AudioSignalF32 = AudioSignal<f32>;
pub type FrameSequenceF64 = FrameSequence<f64>;
pub type FrameSequenceF32 = FrameSequence<f32>;
pub type CepstrumFrameF64 = CepstrumFrame<f64>;
pub type CepstrumFrameF32 = CepstrumFrame<f32>;
pub type PitchTrackF64 = PitchTrack<f64>;
pub type PitchTrackF32 = PitchTrack<f32>;
pub type MelFilterbankF64 = MelFilterbank<f64>;
pub type MelFilterbankF32 = MelFilterbank<f32>;
pub type FeatureMatrixF64 = FeatureMatrix<f64>;
pub type FeatureMatrixF32 = FeatureMatrix<f32>;
pub type CodebookF64 = Codebook<f64>;
pub type CodebookF32 = Codebook<f32>;
