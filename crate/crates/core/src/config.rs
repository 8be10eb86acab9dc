//! Flat `key = value` pipeline configuration.
//!
//! Keys are kebab-case (underscores are accepted and normalized). Lines
//! starting with `#` are comments. The same keys exist as command-line flags,
//! which take precedence over the file.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::cepstrum::DEFAULT_LOG_FLOOR;
use crate::digest::config_digest;
use crate::error::{Error, Result};
use crate::framing::{FrameConfig, Window};
use crate::pitch::PitchConfig;
use crate::vad::VadConfig;
use crate::vq::LbgParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MelConfig {
    pub num_filters: usize,
    pub num_ceps: usize,
    /// `None`: smallest power of two holding one frame (512 for 32 ms at 16 kHz).
    pub fft_size: Option<usize>,
    pub f_low_hz: f64,
    /// `None`: half the sample rate.
    pub f_high_hz: Option<f64>,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            num_filters: 26,
            num_ceps: 13,
            fft_size: None,
            f_low_hz: 0.0,
            f_high_hz: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VqConfig {
    pub target_size: usize,
    pub params: LbgParams,
}

impl Default for VqConfig {
    fn default() -> Self {
        Self {
            target_size: 16,
            params: LbgParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub frame: FrameConfig,
    pub vad: VadConfig,
    pub pitch: PitchConfig,
    pub mel: MelConfig,
    pub vq: VqConfig,
    pub apply_vad_before_features: bool,
    pub log_floor: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            frame: FrameConfig::default(),
            vad: VadConfig::default(),
            pitch: PitchConfig::default(),
            mel: MelConfig::default(),
            vq: VqConfig::default(),
            apply_vad_before_features: true,
            log_floor: DEFAULT_LOG_FLOOR,
        }
    }
}

/// Every recognised key, in canonical order.
pub const KEYS: &[&str] = &[
    "frame-len-ms",
    "hop-ms",
    "window",
    "preemph-alpha",
    "log-floor",
    "vad-energy-ratio",
    "vad-zcr-threshold",
    "vad-min-run",
    "pitch-f-min",
    "pitch-f-max",
    "pitch-peak-threshold",
    "pitch-zcr-threshold",
    "pitch-frame-len-ms",
    "pitch-hop-ms",
    "pitch-preemph-alpha",
    "pitch-median-width",
    "pitch-fft-size",
    "mel-num-filters",
    "mel-num-ceps",
    "mel-fft-size",
    "mel-f-low",
    "mel-f-high",
    "vq-size",
    "vq-epsilon",
    "vq-rel-tol",
    "vq-max-iters",
    "apply-vad",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {value:?}")))
}

fn parse_auto<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value.trim().eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::InvalidConfig(format!(
            "{key}: expected a boolean, got {value:?}"
        ))),
    }
}

fn auto<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "auto".to_string(), |x| x.to_string())
}

impl PipelineConfig {
    /// Sets one key; unknown keys and unparsable values are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('_', "-");
        let k = key.as_str();
        match k {
            "frame-len-ms" => self.frame.frame_len_ms = parse(k, value)?,
            "hop-ms" => self.frame.hop_ms = parse(k, value)?,
            "window" => self.frame.window = Window::from_str(value)?,
            "preemph-alpha" => self.frame.preemph_alpha = parse(k, value)?,
            "log-floor" => {
                self.log_floor = parse(k, value)?;
                self.pitch.log_floor = self.log_floor;
            }
            "vad-energy-ratio" => self.vad.energy_threshold_ratio = parse(k, value)?,
            "vad-zcr-threshold" => self.vad.zcr_threshold = parse(k, value)?,
            "vad-min-run" => self.vad.min_speech_run = parse(k, value)?,
            "pitch-f-min" => self.pitch.f_min_hz = parse(k, value)?,
            "pitch-f-max" => self.pitch.f_max_hz = parse(k, value)?,
            "pitch-peak-threshold" => self.pitch.cepstral_peak_threshold = parse(k, value)?,
            "pitch-zcr-threshold" => self.pitch.zcr_unvoiced_threshold = parse(k, value)?,
            "pitch-frame-len-ms" => self.pitch.frame.frame_len_ms = parse(k, value)?,
            "pitch-hop-ms" => self.pitch.frame.hop_ms = parse(k, value)?,
            "pitch-preemph-alpha" => self.pitch.frame.preemph_alpha = parse(k, value)?,
            "pitch-median-width" => self.pitch.median_smooth_width = parse(k, value)?,
            "pitch-fft-size" => self.pitch.fft_size = parse_auto(k, value)?,
            "mel-num-filters" => self.mel.num_filters = parse(k, value)?,
            "mel-num-ceps" => self.mel.num_ceps = parse(k, value)?,
            "mel-fft-size" => self.mel.fft_size = parse_auto(k, value)?,
            "mel-f-low" => self.mel.f_low_hz = parse(k, value)?,
            "mel-f-high" => self.mel.f_high_hz = parse_auto(k, value)?,
            "vq-size" => self.vq.target_size = parse(k, value)?,
            "vq-epsilon" => self.vq.params.epsilon_split = parse(k, value)?,
            "vq-rel-tol" => self.vq.params.distortion_rel_tol = parse(k, value)?,
            "vq-max-iters" => self.vq.params.max_iters = parse(k, value)?,
            "apply-vad" => self.apply_vad_before_features = parse_bool(k, value)?,
            _ => return Err(Error::InvalidConfig(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Current value of a key, rendered as it would appear in a file.
    pub fn get(&self, key: &str) -> Option<String> {
        let f = |v: f64| format!("{v:?}");
        Some(match key {
            "frame-len-ms" => f(self.frame.frame_len_ms),
            "hop-ms" => f(self.frame.hop_ms),
            "window" => self.frame.window.to_string(),
            "preemph-alpha" => f(self.frame.preemph_alpha),
            "log-floor" => f(self.log_floor),
            "vad-energy-ratio" => f(self.vad.energy_threshold_ratio),
            "vad-zcr-threshold" => f(self.vad.zcr_threshold),
            "vad-min-run" => self.vad.min_speech_run.to_string(),
            "pitch-f-min" => f(self.pitch.f_min_hz),
            "pitch-f-max" => f(self.pitch.f_max_hz),
            "pitch-peak-threshold" => f(self.pitch.cepstral_peak_threshold),
            "pitch-zcr-threshold" => f(self.pitch.zcr_unvoiced_threshold),
            "pitch-frame-len-ms" => f(self.pitch.frame.frame_len_ms),
            "pitch-hop-ms" => f(self.pitch.frame.hop_ms),
            "pitch-preemph-alpha" => f(self.pitch.frame.preemph_alpha),
            "pitch-median-width" => self.pitch.median_smooth_width.to_string(),
            "pitch-fft-size" => auto(self.pitch.fft_size),
            "mel-num-filters" => self.mel.num_filters.to_string(),
            "mel-num-ceps" => self.mel.num_ceps.to_string(),
            "mel-fft-size" => auto(self.mel.fft_size),
            "mel-f-low" => f(self.mel.f_low_hz),
            "mel-f-high" => auto(self.mel.f_high_hz.map(f)),
            "vq-size" => self.vq.target_size.to_string(),
            "vq-epsilon" => f(self.vq.params.epsilon_split),
            "vq-rel-tol" => f(self.vq.params.distortion_rel_tol),
            "vq-max-iters" => self.vq.params.max_iters.to_string(),
            "apply-vad" => self.apply_vad_before_features.to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "line {}: expected key = value, got {raw:?}",
                    lineno + 1
                ))
            })?;
            self.set(key, value)
                .map_err(|e| e.context(format!("line {}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
            .map_err(|e| e.context(path.display().to_string()))
    }

    /// All keys in canonical order, one `key=value` per line.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key}={}", self.get(key).expect("listed key"));
        }
        out
    }

    pub fn digest(&self) -> String {
        config_digest(&self.canonical())
    }

    /// Rate-independent checks.
    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        self.vad.validate()?;
        self.pitch.validate()?;
        self.vq.params.validate()?;
        if self.mel.num_filters == 0
            || self.mel.num_ceps == 0
            || self.mel.num_ceps > self.mel.num_filters
        {
            return Err(Error::InvalidConfig(format!(
                "mel-num-ceps {} must lie in 1..=mel-num-filters {}",
                self.mel.num_ceps, self.mel.num_filters
            )));
        }
        if let Some(n) = self.mel.fft_size {
            if !n.is_power_of_two() {
                return Err(Error::InvalidConfig(format!(
                    "mel-fft-size {n} is not a power of two"
                )));
            }
        }
        if !self.vq.target_size.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "vq-size {} is not a power of two",
                self.vq.target_size
            )));
        }
        if !(self.log_floor.is_finite() && self.log_floor > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "log-floor {} must be positive",
                self.log_floor
            )));
        }
        Ok(())
    }

    pub fn mel_fft_size(&self, sample_rate_hz: u32) -> usize {
        self.mel.fft_size.unwrap_or_else(|| {
            self.frame
                .frame_len_samples(sample_rate_hz)
                .max(2)
                .next_power_of_two()
        })
    }

    pub fn mel_f_high(&self, sample_rate_hz: u32) -> f64 {
        self.mel
            .f_high_hz
            .unwrap_or(f64::from(sample_rate_hz) / 2.0)
    }

    /// Checks that depend on the input file's sample rate.
    pub fn validate_for(&self, sample_rate_hz: u32) -> Result<()> {
        self.validate()?;
        let frame_len = self.frame.frame_len_samples(sample_rate_hz);
        let fft = self.mel_fft_size(sample_rate_hz);
        if fft < frame_len {
            return Err(Error::ConfigMismatch(format!(
                "mel-fft-size {fft} is smaller than the {frame_len}-sample frame"
            )));
        }
        let nyquist = f64::from(sample_rate_hz) / 2.0;
        if self.mel_f_high(sample_rate_hz) > nyquist {
            return Err(Error::ConfigMismatch(format!(
                "mel-f-high {} Hz exceeds the Nyquist frequency {nyquist} Hz",
                self.mel_f_high(sample_rate_hz)
            )));
        }
        self.pitch.quefrency_band(sample_rate_hz)?;
        Ok(())
    }
}
