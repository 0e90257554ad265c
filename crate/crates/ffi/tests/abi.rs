use std::ffi::{CStr, CString};
use std::f64::consts::PI;
use std::ptr;

use soundscape_core::dataset::{simulate_dataset, Layout, Truth};
use soundscape_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(ss_last_error_message()) }.to_string_lossy().into_owned()
}

/// Tone over a faint deterministic hiss so no PSD band is empty.
fn tone(freq: f64, secs: f64) -> Vec<f64> {
    let mut state = 0x2545_f491_u64;
    (0..(22_050.0 * secs) as usize)
        .map(|i| {
            state = state.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1);
            let hiss = ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 1e-3;
            0.5 * (2.0 * PI * freq * i as f64 / 22_050.0).sin() + hiss
        })
        .collect()
}

#[test]
fn bounded_logit_and_boundary() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(ss_bounded_logit(0.5, 0.0, 1.0, &mut v), SsStatus::Ok);
        assert_eq!(v, 0.0);
        assert_eq!(ss_bounded_logit(1.0, 0.0, 1.0, &mut v), SsStatus::Boundary);
        assert!(!last_error().is_empty());
        assert_eq!(ss_bounded_logit(0.5, 0.0, 1.0, ptr::null_mut()), SsStatus::NullPointer);
    }
}

#[test]
fn indices_of_a_tone() {
    let s = tone(3000.0, 2.0);
    let mut audio = ptr::null_mut();
    let mut rec = SsIndexRecord {
        raw: [0.0; SS_N_INDICES],
        transformed: [0.0; SS_N_INDICES],
    };
    unsafe {
        assert_eq!(ss_audio_from_samples(s.as_ptr(), s.len(), 22_050, &mut audio), SsStatus::Ok);
        assert_eq!(ss_audio_len(audio), s.len());
        assert_eq!(ss_compute_indices(audio, &mut rec), SsStatus::Ok, "{}", last_error());
        ss_audio_free(audio);
    }
    assert!(rec.raw[2] >= 0.95);
    assert!(rec.transformed.iter().all(|v| v.is_finite()));
}

#[test]
fn silent_audio_is_reported() {
    let s = vec![0.0; 22_050];
    let mut audio = ptr::null_mut();
    let mut rec = SsIndexRecord {
        raw: [0.0; SS_N_INDICES],
        transformed: [0.0; SS_N_INDICES],
    };
    unsafe {
        assert_eq!(ss_audio_from_samples(s.as_ptr(), s.len(), 22_050, &mut audio), SsStatus::Ok);
        assert_eq!(ss_compute_indices(audio, &mut rec), SsStatus::SilentRecording);
        ss_audio_free(audio);
    }
}

#[test]
fn missing_wav_is_an_error() {
    let path = CString::new("/nonexistent/x.wav").unwrap();
    let mut audio = ptr::null_mut();
    let status = unsafe { ss_audio_read_wav(path.as_ptr(), &mut audio) };
    assert_ne!(status, SsStatus::Ok);
    assert!(audio.is_null());
}

#[test]
fn fit_from_saved_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("data.json");
    let truth = Truth::Uni {
        alpha: vec![0.2; 13],
        tau2: 0.3,
        sigma2: 1.0,
    };
    let data = simulate_dataset(&truth, &Layout::with_sites(4, 2, 2, &["05:30"]), 5).unwrap();
    data.save(&file).unwrap();
    let path = CString::new(file.to_str().unwrap()).unwrap();
    let response = CString::new("NDSI").unwrap();

    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(ss_dataset_load(path.as_ptr(), &mut ds), SsStatus::Ok);
        assert_eq!(ss_dataset_n_individuals(ds), 8);
        assert!(ss_dataset_n_recordings(ds) >= 8);

        let mut cfg = ss_sampler_config_default();
        assert_eq!(cfg.iterations, 25_000);
        cfg.iterations = 400;
        cfg.burn_in = 100;
        cfg.chains = 2;
        cfg.seed = 9;

        let mut draws = ptr::null_mut();
        assert_eq!(ss_fit_uni(ds, response.as_ptr(), SsModel::Basic, &cfg, &mut draws), SsStatus::Ok);
        assert_eq!(ss_draws_n_params(draws), 12);
        assert_eq!(ss_draws_n_draws(draws), 600);

        let mut label = ptr::null();
        assert_eq!(ss_draws_label(draws, 11, &mut label), SsStatus::Ok);
        assert_eq!(CStr::from_ptr(label).to_str().unwrap(), "sigma2");
        assert_eq!(ss_draws_label(draws, 12, &mut label), SsStatus::InvalidArgument);

        let mut col = vec![0.0; 600];
        assert_eq!(ss_draws_column(draws, 11, col.as_mut_ptr(), col.len()), SsStatus::Ok);
        assert!(col.iter().all(|&v| v > 0.0));
        assert_eq!(ss_draws_column(draws, 11, col.as_mut_ptr(), 10), SsStatus::InvalidArgument);

        let mut w = SsWaic {
            lppd: 0.0,
            p_waic: 0.0,
            waic: 0.0,
        };
        assert_eq!(ss_draws_waic(draws, &mut w), SsStatus::Ok);
        assert!((w.waic + 2.0 * (w.lppd - w.p_waic)).abs() < 1e-9);
        ss_draws_free(draws);

        let bad = CString::new("XYZ").unwrap();
        let mut none = ptr::null_mut();
        assert_eq!(ss_fit_uni(ds, bad.as_ptr(), SsModel::Full, &cfg, &mut none), SsStatus::InvalidArgument);
        assert!(none.is_null());
        ss_dataset_free(ds);
    }
}

#[test]
fn null_handles_are_tolerated() {
    unsafe {
        assert_eq!(ss_audio_len(ptr::null()), 0);
        assert_eq!(ss_draws_n_params(ptr::null()), 0);
        ss_audio_free(ptr::null_mut());
        ss_dataset_free(ptr::null_mut());
        ss_draws_free(ptr::null_mut());
        let mut draws = ptr::null_mut();
        let cfg = ss_sampler_config_default();
        assert_eq!(ss_fit_multi(ptr::null(), SsModel::Full, &cfg, &mut draws), SsStatus::NullPointer);
    }
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/soundscape.h")).unwrap();
    for name in ["ss_fit_uni", "ss_draws_column", "SS_STATUS_OK", "SsIndexRecord", "typedef struct SsDraws"] {
        assert!(h.contains(name), "{name}");
    }
}
