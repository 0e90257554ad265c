mod common;

use std::io::Cursor;
use std::path::Path;

use common::{tone, wav_bytes, FS};
use soundscape_core::spectral::{decode_wav, read_wav};
use soundscape_core::Error;

fn hound_bytes(channels: u16, bits: u16, frames: usize) -> Vec<u8> {
    let spec = hound::WavSpec {
        channels,
        sample_rate: FS,
        bits_per_sample: bits,
        sample_format: hound::SampleFormat::Int,
    };
    let mut cur = Cursor::new(Vec::new());
    {
        let mut w = hound::WavWriter::new(&mut cur, spec).unwrap();
        for i in 0..frames * channels as usize {
            w.write_sample((i % 100) as i32).unwrap();
        }
        w.finalize().unwrap();
    }
    cur.into_inner()
}

#[test]
fn one_minute_file_decodes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.wav");
    std::fs::write(&path, wav_bytes(&tone(1000.0, 0.5, 60.0), FS)).unwrap();
    let a = read_wav(&path).unwrap();
    assert_eq!(a.len(), 1_323_000);
    assert_eq!(a.sample_rate(), FS);
    assert!(a.samples().iter().all(|s| s.abs() <= 1.0));
}

#[test]
fn samples_are_scaled_from_pcm() {
    let a = decode_wav(&wav_bytes(&[0.5, -0.5, 0.0], FS), Path::new("x")).unwrap();
    assert!((a.samples()[0] - 16_384.0 / 32_768.0).abs() < 1e-3);
    assert!((a.samples()[1] + 0.5).abs() < 1e-3);
}

#[test]
fn stereo_is_rejected() {
    let r = decode_wav(&hound_bytes(2, 16, 100), Path::new("s.wav"));
    assert!(matches!(r, Err(Error::Channel { channels: 2, .. })), "{r:?}");
}

#[test]
fn twenty_four_bit_is_rejected() {
    let r = decode_wav(&hound_bytes(1, 24, 100), Path::new("d.wav"));
    assert!(matches!(r, Err(Error::Format { .. })), "{r:?}");
}

#[test]
fn empty_data_is_a_decode_error() {
    let r = decode_wav(&hound_bytes(1, 16, 0), Path::new("e.wav"));
    assert!(matches!(r, Err(Error::Decode { .. })), "{r:?}");
}

#[test]
fn low_sample_rate_is_rejected() {
    assert!(decode_wav(&wav_bytes(&[0.1; 100], 8_000), Path::new("l.wav")).is_err());
}

#[test]
fn garbage_is_a_decode_error() {
    let r = decode_wav(b"RIFF\x00\x00\x00\x00WAVEjunk", Path::new("g.wav"));
    assert!(matches!(r, Err(Error::Decode { .. })), "{r:?}");
    let r = read_wav("/nonexistent/file.wav");
    assert!(r.is_err());
}
