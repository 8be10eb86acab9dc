//! Pre-emphasis, overlapping frames and analysis windows.

use std::fmt;
use std::str::FromStr;

use crate::audio_io::AudioSignal;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    Rectangular,
    #[default]
    Hamming,
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Window::Rectangular => "rectangular",
            Window::Hamming => "hamming",
        })
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rectangular" | "rect" => Ok(Window::Rectangular),
            "hamming" => Ok(Window::Hamming),
            other => Err(Error::InvalidConfig(format!("unknown window {other:?}"))),
        }
    }
}

impl Window {
    /// Window coefficients of length `n`.
    pub fn coefficients<T: Scalar>(self, n: usize) -> Vec<T> {
        match self {
            Window::Rectangular => vec![T::one(); n],
            Window::Hamming => hamming_window(n),
        }
    }
}

/// `w[n] = 0.54 - 0.46 cos(2πn / (N-1))`; a single-sample window is `[1]`.
pub fn hamming_window<T: Scalar>(n: usize) -> Vec<T> {
    if n == 1 {
        return vec![T::one()];
    }
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| T::lit(0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / denom).cos()))
        .collect()
}

/// Analysis geometry shared by endpoint detection, pitch and MFCC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameConfig {
    pub frame_len_ms: f64,
    pub hop_ms: f64,
    pub window: Window,
    pub preemph_alpha: f64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            frame_len_ms: 32.0,
            hop_ms: 10.0,
            window: Window::Hamming,
            preemph_alpha: 0.97,
        }
    }
}

fn ms_to_samples(ms: f64, sample_rate_hz: u32) -> usize {
    (ms * f64::from(sample_rate_hz) / 1000.0).round() as usize
}

impl FrameConfig {
    /// Checks the rate-independent constraints.
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_len_ms.is_finite() && self.frame_len_ms > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "frame length {} ms must be positive",
                self.frame_len_ms
            )));
        }
        if !(self.hop_ms.is_finite() && self.hop_ms > 0.0 && self.hop_ms <= self.frame_len_ms) {
            return Err(Error::InvalidConfig(format!(
                "hop {} ms must lie in (0, frame length {} ms]",
                self.hop_ms, self.frame_len_ms
            )));
        }
        if !(0.0..1.0).contains(&self.preemph_alpha) {
            return Err(Error::InvalidConfig(format!(
                "pre-emphasis coefficient {} must lie in [0, 1)",
                self.preemph_alpha
            )));
        }
        Ok(())
    }

    pub fn frame_len_samples(&self, sample_rate_hz: u32) -> usize {
        ms_to_samples(self.frame_len_ms, sample_rate_hz)
    }

    pub fn hop_samples(&self, sample_rate_hz: u32) -> usize {
        ms_to_samples(self.hop_ms, sample_rate_hz).max(1)
    }

    /// `(frame_len, hop)` in samples, validated at this rate.
    pub fn geometry(&self, sample_rate_hz: u32) -> Result<(usize, usize)> {
        self.validate()?;
        let len = self.frame_len_samples(sample_rate_hz);
        if len < 2 {
            return Err(Error::InvalidConfig(format!(
                "frame of {} ms is {len} samples at {sample_rate_hz} Hz (need at least 2)",
                self.frame_len_ms
            )));
        }
        Ok((len, self.hop_samples(sample_rate_hz).min(len)))
    }
}

/// Equal-length windowed frames cut from one signal.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence<T> {
    data: Vec<T>,
    frame_len: usize,
    hop_samples: usize,
    sample_rate_hz: u32,
    start_offsets: Vec<usize>,
    source_len: usize,
}

impl<T: Scalar> FrameSequence<T> {
    pub fn num_frames(&self) -> usize {
        self.start_offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.start_offsets.is_empty()
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn hop_samples(&self) -> usize {
        self.hop_samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn start_offsets(&self) -> &[usize] {
        &self.start_offsets
    }

    /// Length of the signal the frames were cut from.
    pub fn source_len(&self) -> usize {
        self.source_len
    }

    pub fn frame(&self, i: usize) -> &[T] {
        &self.data[i * self.frame_len..(i + 1) * self.frame_len]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.frame_len)
    }

    /// Whether frame `i` lies entirely inside the source (no zero padding).
    pub fn is_interior(&self, i: usize) -> bool {
        self.start_offsets[i] + self.frame_len <= self.source_len
    }
}

/// `y[0] = x[0]`, `y[n] = x[n] - alpha * x[n-1]`.
///
/// # Panics
/// If `alpha` is outside `[0, 1)`.
pub fn pre_emphasis<T: Scalar>(signal: &AudioSignal<T>, alpha: f64) -> AudioSignal<T> {
    assert!(
        (0.0..1.0).contains(&alpha),
        "pre-emphasis coefficient {alpha} outside [0, 1)"
    );
    let x = signal.samples();
    let a = T::lit(alpha);
    let y: Vec<T> = std::iter::once(x[0])
        .chain(x.windows(2).map(|w| w[1] - a * w[0]))
        .collect();
    signal
        .with_samples(y)
        .expect("pre-emphasis preserves length and finiteness")
}

/// Number of frames for a signal of `len >= frame_len` samples: `1 + ceil((len - frame_len) / hop)`.
pub fn frame_count(len: usize, frame_len: usize, hop: usize) -> usize {
    1 + (len - frame_len).div_ceil(hop)
}

/// Cuts the signal into windowed frames; the final partial frame is zero-padded.
pub fn frame_signal<T: Scalar>(
    signal: &AudioSignal<T>,
    cfg: &FrameConfig,
) -> Result<FrameSequence<T>> {
    let fs = signal.sample_rate_hz();
    let (frame_len, hop) = cfg.geometry(fs)?;
    let x = signal.samples();
    if x.len() < frame_len {
        return Err(Error::SignalTooShort {
            len: x.len(),
            frame_len,
        });
    }
    let count = frame_count(x.len(), frame_len, hop);
    let window: Vec<T> = cfg.window.coefficients(frame_len);
    let mut data = vec![T::zero(); count * frame_len];
    let mut start_offsets = Vec::with_capacity(count);
    for (i, frame) in data.chunks_exact_mut(frame_len).enumerate() {
        let start = i * hop;
        start_offsets.push(start);
        let end = (start + frame_len).min(x.len());
        for ((dst, &src), &w) in frame.iter_mut().zip(&x[start..end]).zip(&window) {
            *dst = src * w;
        }
    }
    Ok(FrameSequence {
        data,
        frame_len,
        hop_samples: hop,
        sample_rate_hz: fs,
        start_offsets,
        source_len: x.len(),
    })
}
