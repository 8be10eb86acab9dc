//! Endpoint detection by short-time energy, plus zero-crossing statistics.

use crate::error::{Error, Result};
use crate::framing::FrameSequence;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VadConfig {
    /// Keep threshold as a fraction of the mean frame energy.
    pub energy_threshold_ratio: f64,
    /// Crossings per sample transition above which a frame counts as noise-like.
    /// Reported alongside the energies; the keep decision is energy-only.
    pub zcr_threshold: f64,
    /// Kept runs shorter than this many frames are discarded.
    pub min_speech_run: usize,
}

impl Default for VadConfig {
    fn default() -> Self {
        Self {
            energy_threshold_ratio: 0.1,
            zcr_threshold: 0.25,
            min_speech_run: 3,
        }
    }
}

impl VadConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.energy_threshold_ratio.is_finite() && self.energy_threshold_ratio > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "energy threshold ratio {} must be positive",
                self.energy_threshold_ratio
            )));
        }
        if !(0.0..=1.0).contains(&self.zcr_threshold) {
            return Err(Error::InvalidConfig(format!(
                "ZCR threshold {} must lie in [0, 1]",
                self.zcr_threshold
            )));
        }
        if self.min_speech_run == 0 {
            return Err(Error::InvalidConfig(
                "minimum speech run must be at least 1 frame".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndpointResult<T> {
    pub keep_mask: Vec<bool>,
    /// Inclusive `(first_sample, last_sample)` of the kept region, clamped to the source.
    pub trimmed_range: Option<(usize, usize)>,
    pub frame_energies: Vec<T>,
    pub frame_zcrs: Vec<T>,
    pub threshold: T,
}

impl<T> EndpointResult<T> {
    pub fn kept_frames(&self) -> usize {
        self.keep_mask.iter().filter(|&&k| k).count()
    }

    /// Half-open sample range of the kept region, ready for slicing.
    pub fn trimmed_span(&self) -> Option<std::ops::Range<usize>> {
        self.trimmed_range.map(|(a, b)| a..b + 1)
    }
}

/// Mean of squared samples; zero for an empty frame.
pub fn short_time_energy<T: Scalar>(frame: &[T]) -> T {
    if frame.is_empty() {
        return T::zero();
    }
    let total: T = frame.iter().map(|&x| x * x).sum();
    total / T::from_usize_lossy(frame.len())
}

/// Fraction of adjacent pairs whose signs differ, with zero counted as non-negative.
pub fn zero_crossing_rate<T: Scalar>(frame: &[T]) -> Result<T> {
    if frame.len() < 2 {
        return Err(Error::FrameTooShort {
            len: frame.len(),
            min: 2,
        });
    }
    let crossings = frame
        .windows(2)
        .filter(|w| (w[0] >= T::zero()) != (w[1] >= T::zero()))
        .count();
    Ok(T::from_usize_lossy(crossings) / T::from_usize_lossy(frame.len() - 1))
}

/// Clears every run of `true` shorter than `min_run`.
fn drop_short_runs(mask: &mut [bool], min_run: usize) {
    let mut i = 0;
    while i < mask.len() {
        if !mask[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < mask.len() && mask[i] {
            i += 1;
        }
        if i - start < min_run {
            mask[start..i].iter_mut().for_each(|m| *m = false);
        }
    }
}

/// Classifies frames as speech (kept) or silence against `ratio * mean energy`.
///
/// An all-zero input has mean energy 0 and is classified entirely as silence.
pub fn detect_endpoints<T: Scalar>(
    frames: &FrameSequence<T>,
    cfg: &VadConfig,
) -> Result<EndpointResult<T>> {
    cfg.validate()?;
    if frames.is_empty() {
        return Err(Error::InvalidSignal("no frames to classify".into()));
    }
    let frame_energies: Vec<T> = frames.iter().map(short_time_energy).collect();
    let frame_zcrs = frames
        .iter()
        .map(zero_crossing_rate)
        .collect::<Result<Vec<T>>>()?;
    let mean =
        frame_energies.iter().copied().sum::<T>() / T::from_usize_lossy(frame_energies.len());
    let threshold = T::lit(cfg.energy_threshold_ratio) * mean;

    let mut keep_mask: Vec<bool> = if mean > T::zero() {
        frame_energies.iter().map(|&e| e >= threshold).collect()
    } else {
        vec![false; frame_energies.len()]
    };
    drop_short_runs(&mut keep_mask, cfg.min_speech_run);

    let first = keep_mask.iter().position(|&k| k);
    let last = keep_mask.iter().rposition(|&k| k);
    let trimmed_range = first.zip(last).map(|(a, b)| {
        let starts = frames.start_offsets();
        let end = (starts[b] + frames.frame_len()).min(frames.source_len()) - 1;
        (starts[a], end)
    });

    Ok(EndpointResult {
        keep_mask,
        trimmed_range,
        frame_energies,
        frame_zcrs,
        threshold,
    })
}
