//! WAV decoding, Welch power spectral density, 1-kHz band binning and
//! magnitude spectrograms.
//!
//! Everything here is a pure function of its inputs, so recordings can be
//! processed concurrently without coordination.

use std::f64::consts::PI;
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lowest sample rate that still resolves the 10-11 kHz band.
pub const MIN_SAMPLE_RATE: u32 = 22_050;

/// Number of 1-kHz bands between 1 and 11 kHz.
pub const PSD_BANDS: usize = 10;

/// Spectrogram magnitudes below this value (about -200 dBFS) are FFT
/// round-off, not signal, and are stored as exact zeros.
pub const MAGNITUDE_FLOOR: f64 = 1e-10;

/// Decoded mono PCM audio.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("audio buffer is empty".into()));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidParameter("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    pub fn is_silent(&self) -> bool {
        self.samples.iter().all(|&s| s == 0.0)
    }
}

/// Read a 16-bit mono PCM RIFF/WAVE file.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    decode_wav(&bytes, path)
}

/// Decode an in-memory WAV image. `origin` is only used in error messages.
pub fn decode_wav(bytes: &[u8], origin: &Path) -> Result<AudioBuffer> {
    let decode_err = |reason: &str| Error::Decode {
        path: origin.to_path_buf(),
        reason: reason.to_string(),
    };
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(decode_err("missing RIFF/WAVE header"));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes([bytes[pos + 4], bytes[pos + 5], bytes[pos + 6], bytes[pos + 7]])
            as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| decode_err("chunk extends past end of file"))?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(decode_err("fmt chunk too short"));
                }
                let mut tag = u16::from_le_bytes([body[0], body[1]]);
                let channels = u16::from_le_bytes([body[2], body[3]]);
                let rate = u32::from_le_bytes([body[4], body[5], body[6], body[7]]);
                let bits = u16::from_le_bytes([body[14], body[15]]);
                // WAVE_FORMAT_EXTENSIBLE carries the real tag in the sub-format GUID.
                if tag == 0xFFFE && body.len() >= 26 {
                    tag = u16::from_le_bytes([body[24], body[25]]);
                }
                fmt = Some((tag, channels, rate, bits));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        pos = body_end + (size & 1);
    }

    let (tag, channels, rate, bits) = fmt.ok_or_else(|| decode_err("no fmt chunk"))?;
    let data = data.ok_or_else(|| decode_err("no data chunk"))?;
    if channels != 1 {
        return Err(Error::Channel {
            path: origin.to_path_buf(),
            channels,
        });
    }
    if tag != 1 {
        return Err(Error::Format {
            path: origin.to_path_buf(),
            reason: format!("format tag {tag:#06x}, expected integer PCM"),
        });
    }
    if bits != 16 {
        return Err(Error::Format {
            path: origin.to_path_buf(),
            reason: format!("{bits}-bit samples, expected 16-bit"),
        });
    }
    if rate < MIN_SAMPLE_RATE {
        return Err(Error::Format {
            path: origin.to_path_buf(),
            reason: format!("sample rate {rate} Hz below {MIN_SAMPLE_RATE} Hz"),
        });
    }
    if data.len() < 2 {
        return Err(decode_err("empty data chunk"));
    }
    let samples = data
        .chunks_exact(2)
        .map(|b| f64::from(i16::from_le_bytes([b[0], b[1]])) / 32768.0)
        .collect();
    AudioBuffer::new(samples, rate)
}

/// Tapering window applied to each analysis segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Hamming,
    Hann,
    Rectangular,
}

impl Window {
    /// Periodic (DFT-even) coefficients of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        let nf = n as f64;
        (0..n)
            .map(|i| {
                let phase = 2.0 * PI * i as f64 / nf;
                match self {
                    Window::Hamming => 0.54 - 0.46 * phase.cos(),
                    Window::Hann => 0.5 - 0.5 * phase.cos(),
                    Window::Rectangular => 1.0,
                }
            })
            .collect()
    }
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hamming" => Ok(Window::Hamming),
            "hann" | "hanning" => Ok(Window::Hann),
            "rectangular" | "boxcar" => Ok(Window::Rectangular),
            other => Err(Error::InvalidParameter(format!("unknown window '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchParams {
    pub segment_length: usize,
    pub overlap_fraction: f64,
    pub window: Window,
}

impl WelchParams {
    /// One-second Hamming segments with 50% overlap.
    pub fn for_sample_rate(sample_rate: u32) -> Self {
        Self {
            segment_length: sample_rate as usize,
            overlap_fraction: 0.5,
            window: Window::Hamming,
        }
    }

    fn hop(&self) -> usize {
        ((self.segment_length as f64 * (1.0 - self.overlap_fraction)).round() as usize).max(1)
    }

    fn validate(&self, n_samples: usize) -> Result<()> {
        if self.segment_length < 2 {
            return Err(Error::InvalidParameter("segment_length must be at least 2".into()));
        }
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(Error::InvalidParameter("overlap_fraction must lie in [0, 1)".into()));
        }
        if self.segment_length > n_samples {
            return Err(Error::Window(format!(
                "segment length {} exceeds signal length {n_samples}",
                self.segment_length
            )));
        }
        Ok(())
    }
}

/// One-sided power spectral density (power per Hz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
    pub params: WelchParams,
    pub segments: usize,
}

impl PsdEstimate {
    pub fn resolution(&self) -> f64 {
        if self.freqs.len() > 1 {
            self.freqs[1] - self.freqs[0]
        } else {
            0.0
        }
    }

    /// Power integrated over the whole one-sided spectrum.
    pub fn total_power(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.resolution()
    }

    /// Power integrated over grid frequencies in `[lo, hi)`.
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        let df = self.resolution();
        self.freqs
            .iter()
            .zip(&self.power)
            .filter(|(&f, _)| f >= lo && f < hi)
            .map(|(_, &p)| p * df)
            .sum()
    }
}

/// Welch estimate: windowed periodograms of overlapping segments, averaged.
///
/// Density scaling `|X_k|^2 / (fs * sum(w^2))`, doubled on the interior of
/// the one-sided spectrum, so that integrating over frequency returns the
/// mean-square of the signal.
pub fn welch_psd(audio: &AudioBuffer, params: &WelchParams) -> Result<PsdEstimate> {
    let samples = audio.samples();
    params.validate(samples.len())?;
    if audio.is_silent() {
        return Err(Error::SilentRecording("all samples are zero".into()));
    }

    let seg = params.segment_length;
    let hop = params.hop();
    let n_segments = (samples.len() - seg) / hop + 1;
    let window = params.window.coefficients(seg);
    let fs = f64::from(audio.sample_rate());
    let scale = 1.0 / (fs * window.iter().map(|w| w * w).sum::<f64>());
    let n_freqs = seg / 2 + 1;

    let fft = FftPlanner::<f64>::new().plan_fft_forward(seg);
    let mut buf = vec![Complex::new(0.0, 0.0); seg];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut acc = vec![0.0; n_freqs];
    for s in 0..n_segments {
        let start = s * hop;
        for (b, (&x, &w)) in buf.iter_mut().zip(samples[start..start + seg].iter().zip(&window)) {
            *b = Complex::new(x * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }

    let nyquist_bin = if seg % 2 == 0 { Some(seg / 2) } else { None };
    let power = acc
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let one_sided = if k == 0 || Some(k) == nyquist_bin { 1.0 } else { 2.0 };
            one_sided * a * scale / n_segments as f64
        })
        .collect();
    let freqs = (0..n_freqs).map(|k| k as f64 * fs / seg as f64).collect();
    Ok(PsdEstimate {
        freqs,
        power,
        params: *params,
        segments: n_segments,
    })
}

/// Ten normalized PSD values, bin `i` covering `[i+1, i+2)` kHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinnedPsd {
    pub bins: [f64; PSD_BANDS],
    /// Raw power over 1-11 kHz before normalization.
    pub total_power: f64,
}

impl BinnedPsd {
    /// Build from raw band powers, normalizing by their sum.
    pub fn from_band_powers(raw: [f64; PSD_BANDS]) -> Result<Self> {
        if raw.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidParameter("band powers must be finite and nonnegative".into()));
        }
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(Error::SilentRecording("no power between 1 and 11 kHz".into()));
        }
        let mut bins = [0.0; PSD_BANDS];
        for (b, r) in bins.iter_mut().zip(raw) {
            *b = r / total;
        }
        Ok(Self {
            bins,
            total_power: total,
        })
    }

    /// Power share of the 1-2 kHz band.
    pub fn anthrophony(&self) -> f64 {
        self.bins[0]
    }

    /// Power share of the 2-11 kHz bands.
    pub fn biophony(&self) -> f64 {
        self.bins[1..].iter().sum()
    }
}

pub fn bin_psd(psd: &PsdEstimate) -> Result<BinnedPsd> {
    let top = psd.freqs.last().copied().unwrap_or(0.0);
    if top < 1000.0 * (PSD_BANDS as f64 + 1.0) - psd.resolution() {
        return Err(Error::InvalidParameter(format!(
            "PSD reaches only {top} Hz; 11 kHz required"
        )));
    }
    let mut raw = [0.0; PSD_BANDS];
    for (i, r) in raw.iter_mut().enumerate() {
        let lo = 1000.0 * (i as f64 + 1.0);
        *r = psd.band_power(lo, lo + 1000.0);
    }
    BinnedPsd::from_band_powers(raw)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StftParams {
    pub window_length: usize,
    pub hop: usize,
    pub window: Window,
}

impl Default for StftParams {
    fn default() -> Self {
        Self {
            window_length: 512,
            hop: 256,
            window: Window::Hamming,
        }
    }
}

/// Magnitude STFT, scaled so a full-scale sinusoid centred on a bin reads 1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub times: Vec<f64>,
    pub freqs: Vec<f64>,
    /// Row-major, `times.len()` rows by `freqs.len()` columns.
    pub magnitude: Vec<f64>,
    pub params: StftParams,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.times.len()
    }

    pub fn n_bins(&self) -> usize {
        self.freqs.len()
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let nb = self.n_bins();
        &self.magnitude[t * nb..(t + 1) * nb]
    }

    pub fn at(&self, t: usize, f: usize) -> f64 {
        self.magnitude[t * self.n_bins() + f]
    }

    /// Time-averaged magnitude per frequency bin.
    pub fn mean_spectrum(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.n_bins()];
        for t in 0..self.n_frames() {
            for (m, &v) in mean.iter_mut().zip(self.frame(t)) {
                *m += v;
            }
        }
        let n = self.n_frames() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }
}

pub fn spectrogram(audio: &AudioBuffer, params: &StftParams) -> Result<Spectrogram> {
    let win = params.window_length;
    let samples = audio.samples();
    if win < 2 || params.hop == 0 {
        return Err(Error::InvalidParameter("window_length >= 2 and hop >= 1 required".into()));
    }
    if win > samples.len() {
        return Err(Error::Window(format!(
            "window of {win} samples exceeds signal length {}",
            samples.len()
        )));
    }
    let n_frames = (samples.len() - win) / params.hop + 1;
    let n_bins = win / 2 + 1;
    let window = params.window.coefficients(win);
    let gain = 2.0 / window.iter().sum::<f64>();
    let fs = f64::from(audio.sample_rate());

    let fft = FftPlanner::<f64>::new().plan_fft_forward(win);
    let mut buf = vec![Complex::new(0.0, 0.0); win];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut magnitude = Vec::with_capacity(n_frames * n_bins);
    for t in 0..n_frames {
        let start = t * params.hop;
        for (b, (&x, &w)) in buf.iter_mut().zip(samples[start..start + win].iter().zip(&window)) {
            *b = Complex::new(x * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        magnitude.extend(buf[..n_bins].iter().map(|c| {
            let m = c.norm() * gain;
            if m < MAGNITUDE_FLOOR {
                0.0
            } else {
                m
            }
        }));
    }
    let times = (0..n_frames)
        .map(|t| (t * params.hop) as f64 / fs + win as f64 / (2.0 * fs))
        .collect();
    let freqs = (0..n_bins).map(|k| k as f64 * fs / win as f64).collect();
    Ok(Spectrogram {
        times,
        freqs,
        magnitude,
        params: *params,
    })
}

/// Magnitude of the analytic signal (Hilbert envelope), computed by zeroing
/// negative frequencies in the DFT.
pub fn analytic_envelope(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&x| Complex::new(x, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    for (k, c) in buf.iter_mut().enumerate() {
        let h = if k == 0 || (n % 2 == 0 && k == half) {
            1.0
        } else if k <= (n - 1) / 2 {
            2.0
        } else {
            0.0
        };
        *c *= h;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let inv = 1.0 / n as f64;
    buf.iter().map(|c| c.norm() * inv).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tone(freq: f64, amp: f64, fs: u32, secs: f64) -> AudioBuffer {
        let n = (f64::from(fs) * secs) as usize;
        let s = (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / f64::from(fs)).sin())
            .collect();
        AudioBuffer::new(s, fs).unwrap()
    }

    fn noise(sd: f64, n: usize, seed: u64) -> AudioBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = (0..n).map(|_| sd * crate::sampling::standard_normal(&mut rng)).collect::<Vec<f64>>();
        AudioBuffer::new(s, 22_050).unwrap()
    }

    /// Direct O(n^2) DFT power of one windowed segment.
    fn dft_power(x: &[f64], w: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, (&xi, &wi)) in x.iter().zip(w).enumerate() {
                    let ph = -2.0 * PI * (k * i) as f64 / n as f64;
                    re += xi * wi * ph.cos();
                    im += xi * wi * ph.sin();
                }
                re * re + im * im
            })
            .collect()
    }

    #[test]
    fn welch_single_segment_matches_direct_dft() {
        let fs = 22_050;
        let audio = tone(3000.0, 0.5, fs, 0.1);
        let n = 1024;
        let params = WelchParams {
            segment_length: n,
            overlap_fraction: 0.0,
            window: Window::Hamming,
        };
        let clipped = AudioBuffer::new(audio.samples()[..n].to_vec(), fs).unwrap();
        let psd = welch_psd(&clipped, &params).unwrap();
        let w = Window::Hamming.coefficients(n);
        let scale = 1.0 / (f64::from(fs) * w.iter().map(|v| v * v).sum::<f64>());
        let direct = dft_power(&clipped.samples()[..n], &w);
        for (k, (&p, &d)) in psd.power.iter().zip(&direct).enumerate() {
            let factor = if k == 0 || k == n / 2 { 1.0 } else { 2.0 };
            let expected = factor * d * scale;
            assert!((p - expected).abs() <= 1e-9 * expected.max(1e-12), "bin {k}: {p} vs {expected}");
        }
    }

    #[test]
    fn tone_on_band_edge_lands_in_its_band_without_taper() {
        // 3000 Hz sits exactly on the 2|3 kHz boundary; an untapered
        // one-second segment puts the whole line on the 3000 Hz grid point.
        let audio = tone(3000.0, 0.5, 22_050, 10.0);
        let params = WelchParams {
            window: Window::Rectangular,
            ..WelchParams::for_sample_rate(22_050)
        };
        let b = bin_psd(&welch_psd(&audio, &params).unwrap()).unwrap();
        assert!(b.bins[2] >= 0.99, "{:?}", b.bins);
    }

    #[test]
    fn tone_inside_band_concentrates_with_hamming() {
        let audio = tone(3500.0, 0.5, 22_050, 10.0);
        let psd = welch_psd(&audio, &WelchParams::for_sample_rate(22_050)).unwrap();
        let b = bin_psd(&psd).unwrap();
        assert!(b.bins[2] >= 0.99, "{:?}", b.bins);
    }

    #[test]
    fn edge_tones_map_to_first_and_last_band() {
        let p = WelchParams::for_sample_rate(22_050);
        let lo = bin_psd(&welch_psd(&tone(1500.0, 0.5, 22_050, 5.0), &p).unwrap()).unwrap();
        assert!(lo.bins[0] > 0.999);
        let hi = bin_psd(&welch_psd(&tone(10_500.0, 0.5, 22_050, 5.0), &p).unwrap()).unwrap();
        assert!(hi.bins[9] > 0.999);
    }

    #[test]
    fn silent_signal_is_rejected() {
        let a = AudioBuffer::new(vec![0.0; 44_100], 22_050).unwrap();
        let err = welch_psd(&a, &WelchParams::for_sample_rate(22_050)).unwrap_err();
        assert!(matches!(err, Error::SilentRecording(_)));
    }

    #[test]
    fn equal_band_powers_give_tenths() {
        let b = BinnedPsd::from_band_powers([3.0; PSD_BANDS]).unwrap();
        assert!(b.bins.iter().all(|&v| (v - 0.1).abs() < 1e-15));
        assert!(matches!(
            BinnedPsd::from_band_powers([0.0; PSD_BANDS]),
            Err(Error::SilentRecording(_))
        ));
    }

    #[test]
    fn white_noise_bands_are_flat() {
        // 100 segments of one second at 50% overlap need 50.5 s of audio.
        let a = noise(0.1, 22_050 * 101 / 2, 7);
        let psd = welch_psd(&a, &WelchParams::for_sample_rate(22_050)).unwrap();
        assert_eq!(psd.segments, 100);
        let b = bin_psd(&psd).unwrap();
        let max = b.bins.iter().cloned().fold(f64::MIN, f64::max);
        let min = b.bins.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min <= 1.5);
    }

    #[test]
    fn white_noise_total_power_matches_variance() {
        // Density scaling integrates to the mean-square; the constant is 1.
        let a = noise(0.2, 22_050 * 20, 11);
        let psd = welch_psd(&a, &WelchParams::for_sample_rate(22_050)).unwrap();
        let ms = a.samples().iter().map(|x| x * x).sum::<f64>() / a.len() as f64;
        let ratio = psd.total_power() / ms;
        assert!((ratio - 1.0).abs() < 0.02, "ratio {ratio}");
    }

    #[test]
    fn psd_scales_quadratically_and_bins_do_not() {
        let a = noise(0.1, 22_050 * 4, 3);
        let c = 3.7;
        let scaled = AudioBuffer::new(a.samples().iter().map(|x| c * x).collect(), 22_050).unwrap();
        let p = WelchParams::for_sample_rate(22_050);
        let pa = welch_psd(&a, &p).unwrap();
        let pb = welch_psd(&scaled, &p).unwrap();
        for (x, y) in pa.power.iter().zip(&pb.power) {
            assert!((y - c * c * x).abs() <= 1e-9 * (c * c * x).abs().max(1e-300));
        }
        let ba = bin_psd(&pa).unwrap();
        let bb = bin_psd(&pb).unwrap();
        for (x, y) in ba.bins.iter().zip(&bb.bins) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn welch_is_deterministic() {
        let a = noise(0.1, 22_050 * 3, 5);
        let p = WelchParams::for_sample_rate(22_050);
        assert_eq!(welch_psd(&a, &p).unwrap(), welch_psd(&a, &p).unwrap());
    }

    #[test]
    fn spectrogram_frame_count_and_zero_signal() {
        let a = AudioBuffer::new(vec![0.0; 5000], 22_050).unwrap();
        let s = spectrogram(&a, &StftParams::default()).unwrap();
        assert_eq!(s.n_frames(), (5000 - 512) / 256 + 1);
        assert_eq!(s.n_bins(), 257);
        assert!(s.magnitude.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn spectrogram_rejects_long_window() {
        let a = AudioBuffer::new(vec![0.1; 100], 22_050).unwrap();
        assert!(matches!(spectrogram(&a, &StftParams::default()), Err(Error::Window(_))));
    }

    #[test]
    fn spectrogram_tone_peaks_in_its_bin_every_frame() {
        let fs = 22_050;
        let f = 4000.0;
        let a = tone(f, 0.5, fs, 1.0);
        let s = spectrogram(&a, &StftParams::default()).unwrap();
        let expected = (f * 512.0 / f64::from(fs)).round() as usize;
        for t in 0..s.n_frames() {
            let (arg, _) = s
                .frame(t)
                .iter()
                .enumerate()
                .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
            assert_eq!(arg, expected, "frame {t}");
        }
    }

    #[test]
    fn spectrogram_full_scale_bin_centred_tone_reads_one() {
        let fs = 22_050;
        let f = 100.0 * f64::from(fs) / 512.0;
        let a = tone(f, 1.0, fs, 0.2);
        let s = spectrogram(&a, &StftParams::default()).unwrap();
        assert!((s.at(0, 100) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn impulse_energy_is_local() {
        let mut x = vec![0.0; 22_050];
        let k = 10_000;
        x[k] = 1.0;
        let a = AudioBuffer::new(x, 22_050).unwrap();
        let s = spectrogram(&a, &StftParams::default()).unwrap();
        for t in 0..s.n_frames() {
            let start = t * 256;
            let covers = start <= k && k < start + 512;
            let energy: f64 = s.frame(t).iter().map(|m| m * m).sum();
            if covers {
                assert!(energy > 0.0, "frame {t}");
            } else {
                assert_eq!(energy, 0.0, "frame {t}");
            }
        }
    }

    #[test]
    fn envelope_of_tone_is_flat() {
        let a = tone(2000.0, 0.3, 22_050, 1.0);
        let env = analytic_envelope(a.samples());
        // ignore edge effects of the circular transform
        for &e in &env[1000..env.len() - 1000] {
            assert!((e - 0.3).abs() < 1e-3, "{e}");
        }
    }

    #[test]
    fn wav_header_errors() {
        let p = Path::new("mem.wav");
        assert!(matches!(decode_wav(b"nonsense", p), Err(Error::Decode { .. })));
    }
}
