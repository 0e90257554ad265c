#![allow(dead_code)]

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use soundscape_core::spectral::AudioBuffer;

pub const FS: u32 = 22_050;

pub fn tone(freq: f64, amp: f64, secs: f64) -> Vec<f64> {
    let n = (f64::from(FS) * secs) as usize;
    (0..n)
        .map(|i| amp * (2.0 * PI * freq * i as f64 / f64::from(FS)).sin())
        .collect()
}

pub fn noise(sd: f64, secs: f64, seed: u64) -> Vec<f64> {
    let n = (f64::from(FS) * secs) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Normal::new(0.0, sd).unwrap();
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

pub fn audio(samples: Vec<f64>) -> AudioBuffer {
    AudioBuffer::new(samples, FS).unwrap()
}

/// 16-bit mono PCM WAV written by `hound`.
pub fn wav_bytes(samples: &[f64], sample_rate: u32) -> Vec<u8> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut cursor = std::io::Cursor::new(Vec::new());
    {
        let mut w = hound::WavWriter::new(&mut cursor, spec).unwrap();
        for &s in samples {
            w.write_sample((s * 32767.0).round().clamp(-32768.0, 32767.0) as i16).unwrap();
        }
        w.finalize().unwrap();
    }
    cursor.into_inner()
}

/// Kolmogorov distribution tail `P(K > lambda)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    (d, kolmogorov_q((en + 0.12 + 0.11 / en) * d))
}

pub fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn ks_oracle() {
    // Identical samples: D = 0, p = 1.
    let a: Vec<f64> = (0..100).map(f64::from).collect();
    assert_eq!(ks_two_sample(&a, &a), (0.0, 1.0));
    // Disjoint samples: D = 1.
    let b: Vec<f64> = (200..300).map(f64::from).collect();
    let (d, p) = ks_two_sample(&a, &b);
    assert_eq!(d, 1.0);
    assert!(p < 1e-10);
    // Q(1.36) is the classical 5% critical point.
    assert!((kolmogorov_q(1.358) - 0.05).abs() < 1e-3);
}
