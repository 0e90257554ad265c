//! The four composite acoustic indices (H, ACI, NDSI, AEI), the ten
//! normalized PSD values, and the transforms that put them on the real line.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    analytic_envelope, bin_psd, spectrogram, welch_psd, AudioBuffer, BinnedPsd, Spectrogram,
    StftParams, WelchParams, PSD_BANDS,
};

/// Number of indices per recording.
pub const N_INDICES: usize = 4 + PSD_BANDS;

/// Response order used everywhere downstream (H, ACI, NDSI, AEI, PSD1..PSD10).
pub const INDEX_NAMES: [&str; N_INDICES] = [
    "H", "ACI", "NDSI", "AEI", "PSD1", "PSD2", "PSD3", "PSD4", "PSD5", "PSD6", "PSD7", "PSD8",
    "PSD9", "PSD10",
];

pub fn index_position(name: &str) -> Option<usize> {
    INDEX_NAMES.iter().position(|n| n.eq_ignore_ascii_case(name))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexSettings {
    /// `None` selects one-second Hamming segments at the file's sample rate.
    pub welch: Option<WelchParams>,
    pub stft: StftParams,
    pub aei_threshold_db: f64,
    pub aei_max_freq: f64,
}

impl Default for IndexSettings {
    fn default() -> Self {
        Self {
            welch: None,
            stft: StftParams::default(),
            aei_threshold_db: -50.0,
            aei_max_freq: 10_000.0,
        }
    }
}

/// Raw and transformed index values for one recording.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexRecord {
    pub h: f64,
    pub aci: f64,
    pub ndsi: f64,
    pub aei: f64,
    pub psd: [f64; PSD_BANDS],
    pub transformed: [f64; N_INDICES],
}

impl IndexRecord {
    /// Assemble a record from raw values, applying the model transforms.
    pub fn from_raw(h: f64, aci: f64, ndsi: f64, aei: f64, psd: [f64; PSD_BANDS]) -> Result<Self> {
        let mut transformed = [0.0; N_INDICES];
        transformed[0] = bounded_logit(h, 0.0, 1.0)?;
        if !(aci > 0.0 && aci.is_finite()) {
            return Err(Error::Boundary {
                x: aci,
                a: 0.0,
                b: f64::INFINITY,
            });
        }
        transformed[1] = aci.ln();
        transformed[2] = bounded_logit(ndsi, -1.0, 1.0)?;
        transformed[3] = bounded_logit(aei, 0.0, 1.0)?;
        for (t, &p) in transformed[4..].iter_mut().zip(&psd) {
            *t = bounded_logit(p, 0.0, 1.0)?;
        }
        Ok(Self {
            h,
            aci,
            ndsi,
            aei,
            psd,
            transformed,
        })
    }

    /// Raw values in `INDEX_NAMES` order.
    pub fn raw(&self) -> [f64; N_INDICES] {
        let mut out = [0.0; N_INDICES];
        out[0] = self.h;
        out[1] = self.aci;
        out[2] = self.ndsi;
        out[3] = self.aei;
        out[4..].copy_from_slice(&self.psd);
        out
    }
}

/// `(beta - alpha) / (beta + alpha)` with alpha the 1-2 kHz share and beta
/// the 2-11 kHz share.
pub fn ndsi(b: &BinnedPsd) -> f64 {
    let anthro = b.anthrophony();
    let bio = b.biophony();
    (bio - anthro) / (bio + anthro)
}

/// `ln((x - a) / (b - x))`, defined only on the open interval `(a, b)`.
pub fn bounded_logit(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(x > a && x < b) {
        return Err(Error::Boundary { x, a, b });
    }
    Ok(((x - a) / (b - x)).ln())
}

pub fn inverse_bounded_logit(y: f64, a: f64, b: f64) -> f64 {
    // a + (b - a) * sigmoid(y), arranged to stay accurate for large |y|
    if y >= 0.0 {
        let e = (-y).exp();
        (a * e + b) / (1.0 + e)
    } else {
        let e = y.exp();
        (a + b * e) / (1.0 + e)
    }
}

fn normalized_shannon(weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    if weights.len() < 2 || total <= 0.0 {
        return 0.0;
    }
    let h: f64 = weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| {
            let p = w / total;
            -p * p.ln()
        })
        .sum();
    (h / (weights.len() as f64).ln()).clamp(0.0, 1.0)
}

/// Temporal entropy of the Hilbert amplitude envelope.
pub fn temporal_entropy(samples: &[f64]) -> f64 {
    normalized_shannon(&analytic_envelope(samples))
}

/// Spectral entropy of the time-averaged magnitude spectrum.
pub fn spectral_entropy(spec: &Spectrogram) -> f64 {
    normalized_shannon(&spec.mean_spectrum())
}

/// Acoustic entropy H = Ht * Hf.
pub fn acoustic_entropy(audio: &AudioBuffer, stft: &StftParams) -> Result<f64> {
    if audio.is_silent() {
        return Err(Error::SilentRecording("all samples are zero".into()));
    }
    let spec = spectrogram(audio, stft)?;
    Ok(entropy_from_parts(audio, &spec))
}

fn entropy_from_parts(audio: &AudioBuffer, spec: &Spectrogram) -> f64 {
    temporal_entropy(audio.samples()) * spectral_entropy(spec)
}

/// Gini coefficient of nonnegative values; 0 for an all-zero input.
pub fn gini(values: &[f64]) -> f64 {
    let n = values.len();
    let total: f64 = values.iter().sum();
    if n == 0 || total <= 0.0 {
        return 0.0;
    }
    let shares: Vec<f64> = values.iter().map(|v| v / total).collect();
    let spread: f64 = shares
        .iter()
        .map(|a| shares.iter().map(|b| (a - b).abs()).sum::<f64>())
        .sum();
    spread / (2 * n) as f64
}

/// Fraction of spectrogram cells louder than `threshold_db` (dBFS) in each
/// 1-kHz band below `max_freq`.
pub fn band_occupancy(spec: &Spectrogram, threshold_db: f64, max_freq: f64) -> Result<Vec<f64>> {
    if spec.n_frames() == 0 || spec.n_bins() == 0 {
        return Err(Error::Window("empty spectrogram".into()));
    }
    let nyquist = *spec.freqs.last().unwrap_or(&0.0);
    if max_freq > nyquist || max_freq <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "max_freq {max_freq} Hz must lie in (0, {nyquist}]"
        )));
    }
    if threshold_db >= 0.0 {
        return Err(Error::InvalidParameter("threshold must be below 0 dBFS".into()));
    }
    let level = 10f64.powf(threshold_db / 20.0);
    let n_bands = (max_freq / 1000.0).ceil() as usize;
    let mut active = vec![0usize; n_bands];
    let mut cells = vec![0usize; n_bands];
    for (j, &f) in spec.freqs.iter().enumerate() {
        if f >= max_freq {
            break;
        }
        let band = (f / 1000.0) as usize;
        for t in 0..spec.n_frames() {
            cells[band] += 1;
            if spec.at(t, j) > level {
                active[band] += 1;
            }
        }
    }
    Ok(active
        .iter()
        .zip(&cells)
        .map(|(&a, &c)| if c == 0 { 0.0 } else { a as f64 / c as f64 })
        .collect())
}

/// Acoustic evenness: Gini coefficient of per-band occupancy.
pub fn aei(spec: &Spectrogram, threshold_db: f64, max_freq: f64) -> Result<f64> {
    Ok(gini(&band_occupancy(spec, threshold_db, max_freq)?))
}

/// Acoustic complexity over a single clump spanning the whole spectrogram.
pub fn aci(spec: &Spectrogram) -> Result<f64> {
    let frames = spec.n_frames();
    if frames < 2 {
        return Err(Error::InsufficientFrames { frames });
    }
    let mut total = 0.0;
    for j in 0..spec.n_bins() {
        let mut diff = 0.0;
        let mut sum = spec.at(0, j);
        for t in 1..frames {
            let cur = spec.at(t, j);
            diff += (cur - spec.at(t - 1, j)).abs();
            sum += cur;
        }
        if sum > 0.0 {
            total += diff / sum;
        }
    }
    Ok(total)
}

/// Every index for one recording, plus transforms.
pub fn compute_all(audio: &AudioBuffer, cfg: &IndexSettings) -> Result<IndexRecord> {
    let welch = cfg
        .welch
        .unwrap_or_else(|| WelchParams::for_sample_rate(audio.sample_rate()));
    let binned = bin_psd(&welch_psd(audio, &welch)?)?;
    let spec = spectrogram(audio, &cfg.stft)?;
    let h = entropy_from_parts(audio, &spec);
    let evenness = aei(&spec, cfg.aei_threshold_db, cfg.aei_max_freq)?;
    let complexity = aci(&spec)?;
    IndexRecord::from_raw(h, complexity, ndsi(&binned), evenness, binned.bins)
}
