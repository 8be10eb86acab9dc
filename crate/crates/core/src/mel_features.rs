//! Mel-frequency cepstral coefficients.
//!
//! Chain per frame: pre-emphasis (at signal level), Hamming window, power
//! spectrum, triangular Mel filterbank, log with floor, orthonormal DCT-II.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio_io::AudioSignal;
use crate::cepstrum::DEFAULT_LOG_FLOOR;
use crate::digest::config_digest;
use crate::error::{Error, Result};
use crate::framing::{frame_signal, pre_emphasis, FrameConfig, Window};
use crate::scalar::Scalar;

/// `2595 log10(1 + f / 700)`.
pub fn mel_from_hz<T: Scalar>(f: T) -> T {
    T::lit(2595.0) * (f / T::lit(700.0) + T::one()).log10()
}

/// `700 (10^(m / 2595) - 1)`, the inverse of [`mel_from_hz`].
pub fn hz_from_mel<T: Scalar>(m: T) -> T {
    T::lit(700.0) * (T::lit(10.0).powf(m / T::lit(2595.0)) - T::one())
}

/// Triangular filters with apexes equally spaced in Mel, apex weight 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank<T> {
    num_filters: usize,
    fft_size: usize,
    sample_rate_hz: u32,
    f_low_hz: f64,
    f_high_hz: f64,
    /// `num_filters + 2` Mel boundary points.
    boundary_mels: Vec<T>,
    /// Boundary points snapped to FFT bins.
    boundary_bins: Vec<usize>,
    /// `num_filters` rows of `fft_size / 2 + 1` weights.
    weights: Vec<Vec<T>>,
}

impl<T: Scalar> MelFilterbank<T> {
    pub fn new(
        num_filters: usize,
        fft_size: usize,
        sample_rate_hz: u32,
        f_low_hz: f64,
        f_high_hz: f64,
    ) -> Result<Self> {
        if num_filters == 0 {
            return Err(Error::InvalidConfig(
                "filterbank needs at least one filter".into(),
            ));
        }
        if fft_size < 2 || !fft_size.is_power_of_two() {
            return Err(Error::BadFftSize {
                fft_size,
                frame_len: 0,
            });
        }
        let nyquist = f64::from(sample_rate_hz) / 2.0;
        if !(f_low_hz >= 0.0 && f_low_hz < f_high_hz && f_high_hz <= nyquist) {
            return Err(Error::InvalidConfig(format!(
                "filterbank band [{f_low_hz}, {f_high_hz}] Hz must satisfy 0 <= low < high <= {nyquist}"
            )));
        }
        let mel_lo = mel_from_hz(T::lit(f_low_hz));
        let mel_hi = mel_from_hz(T::lit(f_high_hz));
        let step = (mel_hi - mel_lo) / T::from_usize_lossy(num_filters + 1);
        let boundary_mels: Vec<T> = (0..num_filters + 2)
            .map(|i| mel_lo + step * T::from_usize_lossy(i))
            .collect();
        let bin_per_hz = fft_size as f64 / f64::from(sample_rate_hz);
        let half = fft_size / 2;
        let boundary_bins: Vec<usize> = boundary_mels
            .iter()
            .map(|&m| ((hz_from_mel(m).as_f64() * bin_per_hz).round() as usize).min(half))
            .collect();
        if let Some(i) = boundary_bins.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::DegenerateBank(format!(
                "boundary points {i} and {} both snap to FFT bin {} (fft_size {fft_size} too small for {num_filters} filters)",
                i + 1,
                boundary_bins[i]
            )));
        }
        let weights = (0..num_filters)
            .map(|f| {
                let (lo, apex, hi) = (boundary_bins[f], boundary_bins[f + 1], boundary_bins[f + 2]);
                (0..=half)
                    .map(|k| {
                        if k < lo || k > hi {
                            T::zero()
                        } else if k <= apex {
                            T::from_usize_lossy(k - lo) / T::from_usize_lossy(apex - lo)
                        } else {
                            T::from_usize_lossy(hi - k) / T::from_usize_lossy(hi - apex)
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            num_filters,
            fft_size,
            sample_rate_hz,
            f_low_hz,
            f_high_hz,
            boundary_mels,
            boundary_bins,
            weights,
        })
    }

    pub fn num_filters(&self) -> usize {
        self.num_filters
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn band_hz(&self) -> (f64, f64) {
        (self.f_low_hz, self.f_high_hz)
    }

    pub fn boundary_mels(&self) -> &[T] {
        &self.boundary_mels
    }

    pub fn boundary_bins(&self) -> &[usize] {
        &self.boundary_bins
    }

    pub fn weights(&self) -> &[Vec<T>] {
        &self.weights
    }

    /// Apex bin of filter `i`.
    pub fn apex_bin(&self, i: usize) -> usize {
        self.boundary_bins[i + 1]
    }

    /// Frequency of filter `i`'s apex bin.
    pub fn center_hz(&self, i: usize) -> f64 {
        self.apex_bin(i) as f64 * f64::from(self.sample_rate_hz) / self.fft_size as f64
    }

    /// Filter energies `E_i = Σ_k w_ik P_k` of a one-sided power spectrum.
    pub fn apply(&self, power: &[T]) -> Vec<T> {
        self.weights
            .iter()
            .map(|row| row.iter().zip(power).map(|(&w, &p)| w * p).sum())
            .collect()
    }

    fn canonical(&self) -> String {
        format!(
            "filters={};fft={};fs={};band={:?}-{:?}",
            self.num_filters, self.fft_size, self.sample_rate_hz, self.f_low_hz, self.f_high_hz
        )
    }
}

/// Builds the filterbank; see [`MelFilterbank::new`].
pub fn build_filterbank<T: Scalar>(
    num_filters: usize,
    fft_size: usize,
    sample_rate_hz: u32,
    f_low_hz: f64,
    f_high_hz: f64,
) -> Result<MelFilterbank<T>> {
    MelFilterbank::new(num_filters, fft_size, sample_rate_hz, f_low_hz, f_high_hz)
}

/// Orthonormal DCT-II as a precomputed `n × n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dct2<T> {
    n: usize,
    basis: Vec<T>,
}

impl<T: Scalar> Dct2<T> {
    pub fn new(n: usize) -> Self {
        let nf = n as f64;
        let basis = (0..n)
            .flat_map(|k| {
                let scale = if k == 0 {
                    (1.0 / nf).sqrt()
                } else {
                    (2.0 / nf).sqrt()
                };
                (0..n).map(move |i| {
                    T::lit(
                        scale
                            * (std::f64::consts::PI * k as f64 * (2.0 * i as f64 + 1.0)
                                / (2.0 * nf))
                                .cos(),
                    )
                })
            })
            .collect();
        Self { n, basis }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// First `keep` coefficients of the transform of `x` (`x.len() == n`).
    pub fn transform(&self, x: &[T], keep: usize) -> Vec<T> {
        assert_eq!(x.len(), self.n, "DCT input length");
        self.basis
            .chunks_exact(self.n)
            .take(keep)
            .map(|row| row.iter().zip(x).map(|(&b, &v)| b * v).sum())
            .collect()
    }
}

/// One MFCC vector per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    pub vectors: Vec<Vec<T>>,
    pub num_ceps: usize,
    pub frame_times_s: Vec<f64>,
    pub config_digest: String,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn num_frames(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Shifts every frame time, e.g. back onto the untrimmed signal's clock.
    pub fn offset_times(mut self, seconds: f64) -> Self {
        self.frame_times_s.iter_mut().for_each(|t| *t += seconds);
        self
    }
}

/// Frame-level MFCC pipeline with a reusable FFT plan.
pub struct MfccExtractor<'a, T: Scalar> {
    bank: &'a MelFilterbank<T>,
    frame_cfg: FrameConfig,
    num_ceps: usize,
    log_floor: T,
    dct: Dct2<T>,
}

impl<'a, T: Scalar> MfccExtractor<'a, T> {
    pub fn new(
        bank: &'a MelFilterbank<T>,
        frame_cfg: &FrameConfig,
        num_ceps: usize,
        log_floor: f64,
    ) -> Result<Self> {
        frame_cfg.validate()?;
        if num_ceps == 0 || num_ceps > bank.num_filters() {
            return Err(Error::ConfigMismatch(format!(
                "num_ceps {num_ceps} must lie in 1..={} (number of filters)",
                bank.num_filters()
            )));
        }
        if !(log_floor.is_finite() && log_floor > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "log floor {log_floor} must be positive"
            )));
        }
        let (frame_len, _) = frame_cfg.geometry(bank.sample_rate_hz())?;
        if frame_len > bank.fft_size() {
            return Err(Error::ConfigMismatch(format!(
                "frame of {frame_len} samples exceeds FFT size {}",
                bank.fft_size()
            )));
        }
        Ok(Self {
            bank,
            frame_cfg: FrameConfig {
                window: Window::Hamming,
                ..*frame_cfg
            },
            num_ceps,
            log_floor: T::lit(log_floor),
            dct: Dct2::new(bank.num_filters()),
        })
    }

    pub fn digest(&self) -> String {
        config_digest(&format!(
            "mfcc;{};frame={:?}/{:?}ms;alpha={:?};ceps={};floor={:?}",
            self.bank.canonical(),
            self.frame_cfg.frame_len_ms,
            self.frame_cfg.hop_ms,
            self.frame_cfg.preemph_alpha,
            self.num_ceps,
            self.log_floor.as_f64()
        ))
    }

    /// Log filterbank energies of every frame (before the DCT).
    pub fn log_energies(&self, signal: &AudioSignal<T>) -> Result<(Vec<Vec<T>>, Vec<f64>)> {
        if signal.sample_rate_hz() != self.bank.sample_rate_hz() {
            return Err(Error::ConfigMismatch(format!(
                "signal is {} Hz, filterbank was built for {} Hz",
                signal.sample_rate_hz(),
                self.bank.sample_rate_hz()
            )));
        }
        let fs = f64::from(signal.sample_rate_hz());
        let emphasized = pre_emphasis(signal, self.frame_cfg.preemph_alpha);
        let frames = frame_signal(&emphasized, &self.frame_cfg)?;
        let n = self.bank.fft_size();
        let fft = FftPlanner::new().plan_fft_forward(n);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
        let mut power = vec![T::zero(); n / 2 + 1];
        let rows = frames
            .iter()
            .map(|frame| {
                buf.iter_mut()
                    .for_each(|c| *c = Complex::new(T::zero(), T::zero()));
                for (c, &x) in buf.iter_mut().zip(frame) {
                    c.re = x;
                }
                fft.process(&mut buf);
                for (p, c) in power.iter_mut().zip(&buf) {
                    *p = c.norm_sqr();
                }
                self.bank
                    .apply(&power)
                    .into_iter()
                    .map(|e| e.max(self.log_floor).ln())
                    .collect()
            })
            .collect();
        let times = frames
            .start_offsets()
            .iter()
            .map(|&s| s as f64 / fs)
            .collect();
        Ok((rows, times))
    }

    pub fn extract(&self, signal: &AudioSignal<T>) -> Result<FeatureMatrix<T>> {
        let (log_e, frame_times_s) = self.log_energies(signal)?;
        Ok(FeatureMatrix {
            vectors: log_e
                .iter()
                .map(|row| self.dct.transform(row, self.num_ceps))
                .collect(),
            num_ceps: self.num_ceps,
            frame_times_s,
            config_digest: self.digest(),
        })
    }
}

/// MFCC matrix of a signal with the default log floor.
pub fn extract_mfcc<T: Scalar>(
    signal: &AudioSignal<T>,
    bank: &MelFilterbank<T>,
    frame_cfg: &FrameConfig,
    num_ceps: usize,
) -> Result<FeatureMatrix<T>> {
    MfccExtractor::new(bank, frame_cfg, num_ceps, DEFAULT_LOG_FLOOR)?.extract(signal)
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn mel_reference_points() {
        assert_eq!(mel_from_hz(0.0f64), 0.0);
        assert!((mel_from_hz(700.0f64) - 2595.0 * 2f64.log10()).abs() < 1e-9);
        assert!((mel_from_hz(700.0f64) - 781.1728).abs() < 1e-3);
        assert!((mel_from_hz(1000.0f64) - 999.99).abs() < 0.01);
        assert_eq!(hz_from_mel(0.0f64), 0.0);
        assert!((hz_from_mel(781.1728f64) - 700.0).abs() < 1e-3);
        assert_relative_eq!(
            hz_from_mel(mel_from_hz(440.0f64)),
            440.0,
            max_relative = 1e-6
        );
    }

    #[test]
    fn single_filter_spans_the_band() {
        let bank: MelFilterbank<f64> = build_filterbank(1, 512, 16000, 0.0, 8000.0).unwrap();
        assert_eq!(bank.boundary_bins()[0], 0);
        assert_eq!(bank.boundary_bins()[2], 256);
        let row = &bank.weights()[0];
        assert_eq!(row[0], 0.0);
        assert_eq!(row[256], 0.0);
        assert_eq!(row[bank.apex_bin(0)], 1.0);
        assert!(row[1..256].iter().all(|&w| w > 0.0));
    }

    #[test]
    fn boundaries_are_equally_spaced_in_mel() {
        let bank: MelFilterbank<f64> = build_filterbank(26, 512, 16000, 0.0, 8000.0).unwrap();
        let m = bank.boundary_mels();
        let d0 = m[1] - m[0];
        for w in m.windows(2) {
            assert!((w[1] - w[0] - d0).abs() < 1e-9);
        }
    }

    #[test]
    fn rows_are_triangles() {
        let bank: MelFilterbank<f64> = build_filterbank(26, 512, 16000, 0.0, 8000.0).unwrap();
        for (i, row) in bank.weights().iter().enumerate() {
            let apex = bank.apex_bin(i);
            assert_eq!(row[apex], 1.0);
            assert!(row.iter().all(|&w| w >= 0.0));
            assert!(row[..=apex].windows(2).all(|w| w[0] <= w[1]));
            assert!(row[apex..].windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn one_hot_spectrum_selects_its_filter() {
        let bank: MelFilterbank<f64> = build_filterbank(26, 512, 16000, 0.0, 8000.0).unwrap();
        let target = 10;
        let mut power = vec![0.0; 257];
        power[bank.apex_bin(target)] = 1.0;
        let e = bank.apply(&power);
        assert_eq!(e[target], 1.0);
        for (i, &v) in e.iter().enumerate() {
            if i.abs_diff(target) > 1 {
                assert_eq!(v, 0.0, "filter {i}");
            } else if i != target {
                // neighbours reach zero exactly at the target's apex
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn khz_tone_peaks_in_the_nearest_filter() {
        let bank: MelFilterbank<f64> = build_filterbank(26, 512, 16000, 0.0, 8000.0).unwrap();
        let cfg = FrameConfig {
            preemph_alpha: 0.0,
            ..FrameConfig::default()
        };
        let x: Vec<f64> = (0..4000)
            .map(|n| 0.5 * (std::f64::consts::TAU * 1000.0 * n as f64 / 16000.0).sin())
            .collect();
        let sig = AudioSignal::new(x, 16000, "tone").unwrap();
        let ex = MfccExtractor::new(&bank, &cfg, 13, DEFAULT_LOG_FLOOR).unwrap();
        let (rows, _) = ex.log_energies(&sig).unwrap();

        // direct-summation DFT of the first windowed frame
        let frame = frame_signal(&sig, &cfg).unwrap();
        let f = frame.frame(0);
        let power: Vec<f64> = (0..257)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (n, &v) in f.iter().enumerate() {
                    let a = -std::f64::consts::TAU * (k * n) as f64 / 512.0;
                    re += v * a.cos();
                    im += v * a.sin();
                }
                re * re + im * im
            })
            .collect();
        let oracle: Vec<f64> = bank
            .weights()
            .iter()
            .map(|w| w.iter().zip(&power).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let peak = oracle.iter().copied().fold(0.0, f64::max);
        for (got, want) in rows[0].iter().zip(&oracle) {
            assert!(
                (got.exp() - want).abs() <= 1e-9 * peak,
                "{} vs {want}",
                got.exp()
            );
        }

        let nearest = (0..26)
            .min_by(|&a, &b| {
                let da = (bank.center_hz(a) - 1000.0).abs();
                let db = (bank.center_hz(b) - 1000.0).abs();
                da.total_cmp(&db)
            })
            .unwrap();
        for row in &rows {
            let best = (0..26).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            assert_eq!(best, nearest);
        }
    }

    #[test]
    fn too_many_filters_degenerate() {
        let err = build_filterbank::<f64>(80, 64, 16000, 0.0, 8000.0).unwrap_err();
        assert!(matches!(err, Error::DegenerateBank(_)), "{err}");
        assert!(build_filterbank::<f64>(26, 512, 16000, 0.0, 9000.0).is_err());
        assert!(build_filterbank::<f64>(0, 512, 16000, 0.0, 8000.0).is_err());
    }

    #[test]
    fn dct_of_constant_is_dc_only() {
        let dct = Dct2::<f64>::new(26);
        let out = dct.transform(&[-3.2; 26], 13);
        assert!((out[0] - (-3.2 * 26f64.sqrt())).abs() < 1e-9);
        assert!(out[1..].iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn dct_matrix_is_orthonormal() {
        let n = 13;
        let dct = Dct2::<f64>::new(n);
        for a in 0..n {
            for b in 0..n {
                let dot: f64 = (0..n)
                    .map(|i| dct.basis[a * n + i] * dct.basis[b * n + i])
                    .sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mismatched_configs() {
        let bank: MelFilterbank<f64> = build_filterbank(26, 256, 16000, 0.0, 8000.0).unwrap();
        let frame = FrameConfig::default();
        assert!(matches!(
            MfccExtractor::new(&bank, &frame, 13, DEFAULT_LOG_FLOOR),
            Err(Error::ConfigMismatch(_))
        ));
        let bank: MelFilterbank<f64> = build_filterbank(26, 512, 16000, 0.0, 8000.0).unwrap();
        assert!(matches!(
            MfccExtractor::new(&bank, &frame, 27, DEFAULT_LOG_FLOOR),
            Err(Error::ConfigMismatch(_))
        ));
        let sig = AudioSignal::new(vec![0.1f64; 8000], 8000, "x").unwrap();
        assert!(matches!(
            extract_mfcc(&sig, &bank, &frame, 13),
            Err(Error::ConfigMismatch(_))
        ));
    }

    #[test]
    fn output_shape_follows_framing() {
        let bank: MelFilterbank<f64> = build_filterbank(26, 512, 16000, 0.0, 8000.0).unwrap();
        let x: Vec<f64> = (0..16000).map(|n| (n as f64 * 0.3).sin() * 0.4).collect();
        let sig = AudioSignal::new(x, 16000, "s").unwrap();
        let m = extract_mfcc(&sig, &bank, &FrameConfig::default(), 13).unwrap();
        assert_eq!(m.num_frames(), crate::framing::frame_count(16000, 512, 160));
        assert!(m
            .vectors
            .iter()
            .all(|v| v.len() == 13 && v.iter().all(|c| c.is_finite())));
        assert_eq!(m.frame_times_s[1], 0.01);
    }

    proptest! {
        #[test]
        fn mel_round_trip(f in 0.0f64..8000.0) {
            let back = hz_from_mel(mel_from_hz(f));
            prop_assert!((back - f).abs() <= 1e-6 * f.max(1e-3));
        }

        #[test]
        fn mel_is_strictly_monotone(a in 0.0f64..8000.0, b in 0.0f64..8000.0) {
            prop_assume!(a != b);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(mel_from_hz(lo) < mel_from_hz(hi));
        }

        #[test]
        fn dct_preserves_norm(x in prop::collection::vec(-30.0f64..5.0, 26)) {
            let dct = Dct2::<f64>::new(26);
            let y = dct.transform(&x, 26);
            let nx: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ny: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((nx - ny).abs() <= 1e-9 * nx.max(1.0));
        }

        #[test]
        fn filterbank_energies_are_non_negative(power in prop::collection::vec(0.0f64..10.0, 257)) {
            let bank: MelFilterbank<f64> = MelFilterbank::new(26, 512, 16000, 0.0, 8000.0).unwrap();
            prop_assert!(bank.apply(&power).iter().all(|&e| e >= 0.0));
        }
    }
}
