//! C ABI over `soundscape-core`.
//!
//! Objects are opaque handles created by `ss_*` constructors and released
//! with the matching `ss_*_free`. Every fallible call returns an
//! [`SsStatus`]; on failure [`ss_last_error_message`] describes the error
//! for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use soundscape_core::dataset::AssembledDataset;
use soundscape_core::gibbs::{CandidateModel, MultiModel, PosteriorDraws, SamplerConfig, UniModel};
use soundscape_core::indices::{self, IndexSettings, N_INDICES};
use soundscape_core::spectral::{read_wav, AudioBuffer};
use soundscape_core::Error;

/// Number of values in each half of [`SsIndexRecord`].
pub const SS_N_INDICES: usize = 14;

const _: () = assert!(SS_N_INDICES == N_INDICES);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Decode = 3,
    Channel = 4,
    Format = 5,
    SilentRecording = 6,
    Boundary = 7,
    Io = 8,
    Numerical = 9,
    ChainDivergence = 10,
    InsufficientDraws = 11,
    Data = 12,
    Panic = 13,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsModel {
    Full = 0,
    NoInherent = 1,
    NoRain = 2,
    NoRandom = 3,
    Basic = 4,
}

impl From<SsModel> for CandidateModel {
    fn from(m: SsModel) -> Self {
        match m {
            SsModel::Full => CandidateModel::Full,
            SsModel::NoInherent => CandidateModel::NoInherent,
            SsModel::NoRain => CandidateModel::NoRain,
            SsModel::NoRandom => CandidateModel::NoRandom,
            SsModel::Basic => CandidateModel::Basic,
        }
    }
}

/// Raw indices (H, ACI, NDSI, AEI, PSD1..PSD10) and their transforms.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsIndexRecord {
    pub raw: [f64; SS_N_INDICES],
    pub transformed: [f64; SS_N_INDICES],
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SsSamplerConfig {
    pub iterations: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub chains: u64,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsWaic {
    pub lppd: f64,
    pub p_waic: f64,
    pub waic: f64,
}

pub struct SsAudio {
    inner: AudioBuffer,
}

pub struct SsDataset {
    inner: AssembledDataset,
}

pub struct SsDraws {
    inner: PosteriorDraws,
    labels: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SsStatus {
    match e {
        Error::Decode { .. } => SsStatus::Decode,
        Error::Channel { .. } => SsStatus::Channel,
        Error::Format { .. } => SsStatus::Format,
        Error::SilentRecording(_) => SsStatus::SilentRecording,
        Error::Boundary { .. } => SsStatus::Boundary,
        Error::Io(_) => SsStatus::Io,
        Error::Numerical(_) | Error::Covariance(_) => SsStatus::Numerical,
        Error::ChainDivergence { .. } => SsStatus::ChainDivergence,
        Error::InsufficientDraws { .. } => SsStatus::InsufficientDraws,
        Error::InvalidParameter(_) | Error::Window(_) | Error::InsufficientFrames { .. } => {
            SsStatus::InvalidArgument
        }
        _ => SsStatus::Data,
    }
}

/// Run `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (SsStatus, String)>) -> SsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SsStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SsStatus::Panic
        }
    }
}

fn core_err(e: Error) -> (SsStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SsStatus, String) {
    (SsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (SsStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (SsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Message for the last failed call on this thread; empty after success.
/// Valid until the next `ss_*` call on the same thread.
#[no_mangle]
pub extern "C" fn ss_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// `ln((x - a) / (b - x))` for `a < x < b`.
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn ss_bounded_logit(x: f64, a: f64, b: f64, out: *mut f64) -> SsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = indices::bounded_logit(x, a, b).map_err(core_err)?;
        Ok(())
    })
}

/// Audio from samples in [-1, 1].
///
/// # Safety
/// `samples` must point to `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ss_audio_from_samples(
    samples: *const f64,
    len: usize,
    sample_rate: u32,
    out: *mut *mut SsAudio,
) -> SsStatus {
    guard(|| {
        if samples.is_null() || out.is_null() {
            return Err(null("samples or out"));
        }
        let data = std::slice::from_raw_parts(samples, len).to_vec();
        let inner = AudioBuffer::new(data, sample_rate).map_err(core_err)?;
        *out = Box::into_raw(Box::new(SsAudio { inner }));
        Ok(())
    })
}

/// Decode a 16-bit mono PCM WAV file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ss_audio_read_wav(path: *const c_char, out: *mut *mut SsAudio) -> SsStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = read_wav(path).map_err(core_err)?;
        *out = Box::into_raw(Box::new(SsAudio { inner }));
        Ok(())
    })
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `audio` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_audio_len(audio: *const SsAudio) -> usize {
    audio.as_ref().map_or(0, |a| a.inner.len())
}

/// # Safety
/// `audio` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ss_audio_free(audio: *mut SsAudio) {
    if !audio.is_null() {
        drop(Box::from_raw(audio));
    }
}

/// All fourteen indices with default settings.
///
/// # Safety
/// `audio` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ss_compute_indices(audio: *const SsAudio, out: *mut SsIndexRecord) -> SsStatus {
    guard(|| {
        let audio = audio.as_ref().ok_or_else(|| null("audio"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let rec = indices::compute_all(&audio.inner, &IndexSettings::default()).map_err(core_err)?;
        *out = SsIndexRecord {
            raw: rec.raw(),
            transformed: rec.transformed,
        };
        Ok(())
    })
}

/// Load a dataset written by `soundscape assemble` or `simulate`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ss_dataset_load(path: *const c_char, out: *mut *mut SsDataset) -> SsStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = AssembledDataset::load(path).map_err(core_err)?;
        *out = Box::into_raw(Box::new(SsDataset { inner }));
        Ok(())
    })
}

/// # Safety
/// `data` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_dataset_n_individuals(data: *const SsDataset) -> usize {
    data.as_ref().map_or(0, |d| d.inner.n_individuals())
}

/// # Safety
/// `data` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_dataset_n_recordings(data: *const SsDataset) -> usize {
    data.as_ref().map_or(0, |d| d.inner.n_recordings())
}

/// # Safety
/// `data` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ss_dataset_free(data: *mut SsDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// 25000 iterations, 5000 burn-in, thin 1, 3 chains, seed 0.
#[no_mangle]
pub extern "C" fn ss_sampler_config_default() -> SsSamplerConfig {
    let d = SamplerConfig::default();
    SsSamplerConfig {
        iterations: d.iterations as u64,
        burn_in: d.burn_in as u64,
        thin: d.thin as u64,
        chains: d.chains as u64,
        seed: d.seed,
    }
}

fn sampler(cfg: &SsSamplerConfig) -> SamplerConfig {
    SamplerConfig {
        iterations: cfg.iterations as usize,
        burn_in: cfg.burn_in as usize,
        thin: cfg.thin as usize,
        chains: cfg.chains as usize,
        seed: cfg.seed,
        keep_loglik: false,
    }
}

fn wrap_draws(inner: PosteriorDraws) -> *mut SsDraws {
    let labels = inner
        .labels
        .iter()
        .map(|l| CString::new(l.as_str()).unwrap_or_default())
        .collect();
    Box::into_raw(Box::new(SsDraws { inner, labels }))
}

/// Fit the univariate model to the index named `response`.
///
/// # Safety
/// Handles and pointers must be valid; `response` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ss_fit_uni(
    data: *const SsDataset,
    response: *const c_char,
    model: SsModel,
    config: *const SsSamplerConfig,
    out: *mut *mut SsDraws,
) -> SsStatus {
    guard(|| {
        let data = data.as_ref().ok_or_else(|| null("data"))?;
        let config = config.as_ref().ok_or_else(|| null("config"))?;
        let name = c_str(response, "response")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let idx = data
            .inner
            .index_of(name)
            .ok_or_else(|| (SsStatus::InvalidArgument, format!("no index named '{name}'")))?;
        let m = UniModel::new(&data.inner, idx, CandidateModel::from(model).toggles()).map_err(core_err)?;
        *out = wrap_draws(m.run(&sampler(config)).map_err(core_err)?);
        Ok(())
    })
}

/// Fit the multivariate model to every index in the dataset.
///
/// # Safety
/// Handles and pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ss_fit_multi(
    data: *const SsDataset,
    model: SsModel,
    config: *const SsSamplerConfig,
    out: *mut *mut SsDraws,
) -> SsStatus {
    guard(|| {
        let data = data.as_ref().ok_or_else(|| null("data"))?;
        let config = config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let m = MultiModel::new(&data.inner, CandidateModel::from(model).toggles()).map_err(core_err)?;
        *out = wrap_draws(m.run(&sampler(config)).map_err(core_err)?);
        Ok(())
    })
}

/// # Safety
/// `draws` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_draws_n_params(draws: *const SsDraws) -> usize {
    draws.as_ref().map_or(0, |d| d.inner.n_params())
}

/// Retained draws pooled over chains.
///
/// # Safety
/// `draws` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_draws_n_draws(draws: *const SsDraws) -> usize {
    draws.as_ref().map_or(0, |d| d.inner.n_draws())
}

/// Label of parameter `index`; the string lives as long as the handle.
///
/// # Safety
/// `draws` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ss_draws_label(draws: *const SsDraws, index: usize, out: *mut *const c_char) -> SsStatus {
    guard(|| {
        let d = draws.as_ref().ok_or_else(|| null("draws"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let l = d
            .labels
            .get(index)
            .ok_or_else(|| (SsStatus::InvalidArgument, format!("parameter {index} out of range")))?;
        *out = l.as_ptr();
        Ok(())
    })
}

/// Copy the pooled draws of parameter `index` into `buf`, which must hold
/// `ss_draws_n_draws` values.
///
/// # Safety
/// `draws` must be a live handle and `buf` must point to `buf_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ss_draws_column(
    draws: *const SsDraws,
    index: usize,
    buf: *mut f64,
    buf_len: usize,
) -> SsStatus {
    guard(|| {
        let d = draws.as_ref().ok_or_else(|| null("draws"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        if index >= d.inner.n_params() {
            return Err((SsStatus::InvalidArgument, format!("parameter {index} out of range")));
        }
        let col = d.inner.column(index);
        if buf_len < col.len() {
            return Err((
                SsStatus::InvalidArgument,
                format!("buffer holds {buf_len} values, {} needed", col.len()),
            ));
        }
        std::slice::from_raw_parts_mut(buf, col.len()).copy_from_slice(&col);
        Ok(())
    })
}

/// # Safety
/// `draws` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ss_draws_waic(draws: *const SsDraws, out: *mut SsWaic) -> SsStatus {
    guard(|| {
        let d = draws.as_ref().ok_or_else(|| null("draws"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let w = d.inner.waic().map_err(core_err)?;
        *out = SsWaic {
            lppd: w.lppd,
            p_waic: w.p_waic,
            waic: w.waic,
        };
        Ok(())
    })
}

/// # Safety
/// `draws` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ss_draws_free(draws: *mut SsDraws) {
    if !draws.is_null() {
        drop(Box::from_raw(draws));
    }
}
