//! Real cepstrum: inverse DFT of the log-magnitude spectrum.
//!
//! The forward transform is unnormalized and the inverse divides by the FFT
//! size, so a frame `[A, 0, ..., 0]` has cepstrum `c[0] = ln A` and zero
//! elsewhere. Logarithms are natural.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Magnitude floor applied before the logarithm.
pub const DEFAULT_LOG_FLOOR: f64 = 1e-10;

/// Smallest power of two at least twice the frame length.
pub fn default_fft_size(frame_len: usize) -> usize {
    (2 * frame_len).max(1).next_power_of_two()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CepstrumFrame<T> {
    pub coefficients: Vec<T>,
    pub fft_size: usize,
    pub sample_rate_hz: u32,
    pub log_floor: T,
    /// Largest imaginary magnitude discarded from the inverse transform.
    pub imag_residue: T,
}

impl<T: Scalar> CepstrumFrame<T> {
    /// Quefrency of coefficient `index` as a frequency.
    pub fn frequency_of(&self, index: usize) -> Result<T> {
        quefrency_to_hz(index, self.sample_rate_hz)
    }
}

/// FFT plans for one transform size, reusable across frames.
pub struct CepstrumAnalyzer<T: Scalar> {
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    fft_size: usize,
    log_floor: T,
}

impl<T: Scalar> std::fmt::Debug for CepstrumAnalyzer<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CepstrumAnalyzer")
            .field("fft_size", &self.fft_size)
            .field("log_floor", &self.log_floor)
            .finish()
    }
}

impl<T: Scalar> CepstrumAnalyzer<T> {
    pub fn new(fft_size: usize, log_floor: f64) -> Result<Self> {
        if fft_size == 0 || !fft_size.is_power_of_two() {
            return Err(Error::BadFftSize {
                fft_size,
                frame_len: 0,
            });
        }
        if !(log_floor.is_finite() && log_floor > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "log floor {log_floor} must be positive"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            forward: planner.plan_fft_forward(fft_size),
            inverse: planner.plan_fft_inverse(fft_size),
            fft_size,
            log_floor: T::lit(log_floor),
        })
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn analyze(&self, frame: &[T], sample_rate_hz: u32) -> Result<CepstrumFrame<T>> {
        if frame.len() > self.fft_size {
            return Err(Error::BadFftSize {
                fft_size: self.fft_size,
                frame_len: frame.len(),
            });
        }
        let mut buf: Vec<Complex<T>> = frame
            .iter()
            .map(|&x| Complex::new(x, T::zero()))
            .chain(std::iter::repeat(Complex::new(T::zero(), T::zero())))
            .take(self.fft_size)
            .collect();
        self.forward.process(&mut buf);
        for bin in buf.iter_mut() {
            *bin = Complex::new(bin.norm().max(self.log_floor).ln(), T::zero());
        }
        self.inverse.process(&mut buf);
        let scale = T::from_usize_lossy(self.fft_size).recip();
        let imag_residue = buf
            .iter()
            .map(|c| num_traits::Float::abs(c.im * scale))
            .fold(T::zero(), T::max);
        Ok(CepstrumFrame {
            coefficients: buf.iter().map(|c| c.re * scale).collect(),
            fft_size: self.fft_size,
            sample_rate_hz,
            log_floor: self.log_floor,
            imag_residue,
        })
    }
}

/// One-shot real cepstrum of a frame zero-padded to `fft_size`.
pub fn real_cepstrum<T: Scalar>(
    frame: &[T],
    fft_size: usize,
    log_floor: f64,
    sample_rate_hz: u32,
) -> Result<CepstrumFrame<T>> {
    let analyzer = CepstrumAnalyzer::new(fft_size, log_floor).map_err(|e| match e {
        Error::BadFftSize { fft_size, .. } => Error::BadFftSize {
            fft_size,
            frame_len: frame.len(),
        },
        other => other,
    })?;
    analyzer.analyze(frame, sample_rate_hz)
}

/// `sample_rate_hz / index`.
pub fn quefrency_to_hz<T: Scalar>(index: usize, sample_rate_hz: u32) -> Result<T> {
    if index == 0 {
        return Err(Error::ZeroQuefrency);
    }
    Ok(T::lit(f64::from(sample_rate_hz)) / T::from_usize_lossy(index))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    /// Direct O(N²) evaluation of the same DFT pair, independent of rustfft.
    fn brute_force_cepstrum(frame: &[f64], n: usize, floor: f64) -> Vec<f64> {
        let tau = 2.0 * std::f64::consts::PI;
        let log_mag: Vec<f64> = (0..n)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, &x) in frame.iter().enumerate() {
                    let ang = -tau * (k * t % n) as f64 / n as f64;
                    re += x * ang.cos();
                    im += x * ang.sin();
                }
                re.hypot(im).max(floor).ln()
            })
            .collect();
        (0..n)
            .map(|q| {
                log_mag
                    .iter()
                    .enumerate()
                    .map(|(k, &l)| l * (tau * (k * q % n) as f64 / n as f64).cos())
                    .sum::<f64>()
                    / n as f64
            })
            .collect()
    }

    fn argmax(v: &[f64]) -> usize {
        v.iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| {
                if x > bv {
                    (i, x)
                } else {
                    (bi, bv)
                }
            })
            .0
    }

    #[test]
    fn unit_impulse_has_zero_cepstrum() {
        let mut frame = vec![0.0f64; 64];
        frame[0] = 1.0;
        let c = real_cepstrum(&frame, 64, DEFAULT_LOG_FLOOR, 16000).unwrap();
        assert!(c.coefficients.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn scaled_impulse_has_log_dc() {
        let mut frame = vec![0.0f64; 100];
        frame[0] = 0.37;
        let c = real_cepstrum(&frame, 128, DEFAULT_LOG_FLOOR, 16000).unwrap();
        assert!((c.coefficients[0] - 0.37f64.ln()).abs() < 1e-12);
        assert!(c.coefficients[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn pulse_train_peaks_at_its_period() {
        let mut frame = vec![0.0f64; 1024];
        for i in (0..1024).step_by(80) {
            frame[i] = 1.0;
        }
        let oracle = brute_force_cepstrum(&frame, 1024, DEFAULT_LOG_FLOOR);
        let lo = 1024 / 512;
        assert_eq!(lo + argmax(&oracle[lo..=512]), 80);

        let c = real_cepstrum(&frame, 1024, DEFAULT_LOG_FLOOR, 16000).unwrap();
        assert_eq!(lo + argmax(&c.coefficients[lo..=512]), 80);
        for (a, b) in c.coefficients.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn matches_brute_force_on_random_frame() {
        let frame: Vec<f64> = (0..50)
            .map(|i| ((i * 7919) % 113) as f64 / 113.0 - 0.5)
            .collect();
        let oracle = brute_force_cepstrum(&frame, 64, DEFAULT_LOG_FLOOR);
        let c = real_cepstrum(&frame, 64, DEFAULT_LOG_FLOOR, 8000).unwrap();
        for (a, b) in c.coefficients.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(c.imag_residue <= 1e-9);
    }

    #[test]
    fn silent_frame_hits_floor_everywhere() {
        let c = real_cepstrum(&[0.0f64; 32], 64, 1e-10, 16000).unwrap();
        assert!((c.coefficients[0] - 1e-10f64.ln()).abs() < 1e-9);
        assert!(c.coefficients[1..].iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn bad_fft_sizes() {
        let frame = [0.0f64; 100];
        assert!(matches!(
            real_cepstrum(&frame, 96, DEFAULT_LOG_FLOOR, 16000),
            Err(Error::BadFftSize {
                fft_size: 96,
                frame_len: 100
            })
        ));
        assert!(matches!(
            real_cepstrum(&frame, 64, DEFAULT_LOG_FLOOR, 16000),
            Err(Error::BadFftSize {
                fft_size: 64,
                frame_len: 100
            })
        ));
        assert!(real_cepstrum(&frame, 128, 0.0, 16000).is_err());
    }

    #[test]
    fn quefrency_conversion() {
        assert_eq!(quefrency_to_hz::<f64>(80, 16000).unwrap(), 200.0);
        assert_eq!(quefrency_to_hz::<f64>(1, 8000).unwrap(), 8000.0);
        assert_eq!(quefrency_to_hz::<f64>(16000, 16000).unwrap(), 1.0);
        assert!(matches!(
            quefrency_to_hz::<f64>(0, 16000),
            Err(Error::ZeroQuefrency)
        ));
    }

    #[test]
    fn default_fft_is_double_frame() {
        assert_eq!(default_fft_size(640), 2048);
        assert_eq!(default_fft_size(512), 1024);
        assert_eq!(default_fft_size(513), 2048);
    }

    #[test]
    fn f32_instantiation_works() {
        let mut frame = vec![0.0f32; 64];
        frame[0] = 2.0;
        let c = real_cepstrum(&frame, 64, DEFAULT_LOG_FLOOR, 16000).unwrap();
        assert!((c.coefficients[0] - 2.0f32.ln()).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn cepstrum_is_even(frame in prop::collection::vec(-1.0f64..1.0, 1..128)) {
            let c = real_cepstrum(&frame, 128, DEFAULT_LOG_FLOOR, 16000).unwrap();
            for n in 1..128 {
                prop_assert!((c.coefficients[n] - c.coefficients[128 - n]).abs() <= 1e-9);
            }
            prop_assert!(c.coefficients[0].is_finite());
            prop_assert!(c.imag_residue <= 1e-9);
        }
    }
}
