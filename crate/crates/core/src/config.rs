//! Flat key-value run configuration. A TOML file supplies defaults and
//! command-line overrides win.

use std::path::Path;

use chrono::NaiveTime;
use serde::{Deserialize, Serialize};

use crate::dataset::{AnalysisWindow, YearConfig};
use crate::error::{Error, Result};
use crate::gibbs::{MultiPriors, SamplerConfig, UniPriors};
use crate::indices::IndexSettings;
use crate::spectral::{StftParams, Window};

pub const SCHEMA_VERSION: u32 = 1;

/// Every setting is optional; unset keys fall back to built-in defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: Option<u32>,

    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub chains: Option<usize>,
    pub keep_loglik: Option<bool>,

    /// Index modeled by the univariate fit.
    pub response: Option<String>,
    pub alpha_variance: Option<f64>,
    pub sigma2_shape: Option<f64>,
    pub sigma2_scale: Option<f64>,
    pub tau2_shape: Option<f64>,
    pub tau2_scale: Option<f64>,
    pub wishart_df: Option<f64>,
    /// Diagonal of the Wishart `R` matrix.
    pub wishart_r_diag: Option<f64>,

    pub first_year: Option<i32>,
    pub last_year: Option<i32>,
    pub treatment_start: Option<i32>,

    pub window_start: Option<String>,
    pub window_end: Option<String>,
    pub window_months: Option<Vec<u32>>,

    pub workers: Option<usize>,
    pub stft_window_length: Option<usize>,
    pub stft_hop: Option<usize>,
    pub window: Option<Window>,
    pub aei_threshold_db: Option<f64>,
    pub aei_max_freq: Option<f64>,
}

macro_rules! merge_fields {
    ($base:ident, $over:ident; $($f:ident),* $(,)?) => {
        RunConfig { $($f: $over.$f.or($base.$f)),* }
    };
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {e}")))?;
        if let Some(v) = cfg.schema_version {
            if v != SCHEMA_VERSION {
                return Err(Error::InvalidParameter(format!(
                    "config schema version {v} is not supported (expected {SCHEMA_VERSION})"
                )));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Parse `key=value` overrides. Numbers, booleans, arrays and quoted
    /// strings are TOML literals; anything else is taken as a string.
    pub fn from_assignments(pairs: &[String]) -> Result<Self> {
        let mut text = String::new();
        for pair in pairs {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("override '{pair}' is not key=value")))?;
            let (k, v) = (k.trim(), v.trim());
            let literal = v.parse::<f64>().is_ok() || v == "true" || v == "false" || v.starts_with(['[', '"']);
            let value = if literal {
                v.to_string()
            } else {
                toml::Value::String(v.to_string()).to_string()
            };
            text.push_str(&format!("{k} = {value}\n"));
        }
        Self::from_toml(&text)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merged(self, over: RunConfig) -> RunConfig {
        let base = self;
        merge_fields!(base, over;
            schema_version, seed, iterations, burn_in, thin, chains, keep_loglik,
            response, alpha_variance, sigma2_shape, sigma2_scale, tau2_shape, tau2_scale,
            wishart_df, wishart_r_diag, first_year, last_year, treatment_start,
            window_start, window_end, window_months, workers, stft_window_length, stft_hop,
            window, aei_threshold_db, aei_max_freq,
        )
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::InvalidParameter("a seed is required (--seed or seed = ...)".into()))
    }

    pub fn sampler(&self) -> Result<SamplerConfig> {
        let d = SamplerConfig::default();
        let cfg = SamplerConfig {
            iterations: self.iterations.unwrap_or(d.iterations),
            burn_in: self.burn_in.unwrap_or(d.burn_in),
            thin: self.thin.unwrap_or(d.thin),
            chains: self.chains.unwrap_or(d.chains),
            seed: self.require_seed()?,
            keep_loglik: self.keep_loglik.unwrap_or(d.keep_loglik),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn uni_priors(&self) -> UniPriors {
        let d = UniPriors::default();
        UniPriors {
            alpha_variance: self.alpha_variance.unwrap_or(d.alpha_variance),
            sigma2_shape: self.sigma2_shape.unwrap_or(d.sigma2_shape),
            sigma2_scale: self.sigma2_scale.unwrap_or(d.sigma2_scale),
            tau2_shape: self.tau2_shape.unwrap_or(d.tau2_shape),
            tau2_scale: self.tau2_scale.unwrap_or(d.tau2_scale),
        }
    }

    pub fn multi_priors(&self, d: usize) -> MultiPriors {
        let mut p = MultiPriors::for_dimension(d);
        if let Some(v) = self.alpha_variance {
            p.alpha_variance = v;
        }
        if let Some(v) = self.sigma2_shape {
            p.sigma2_shape = v;
        }
        if let Some(v) = self.sigma2_scale {
            p.sigma2_scale = v;
        }
        if let Some(v) = self.wishart_df {
            p.wishart_df = v;
        }
        if let Some(v) = self.wishart_r_diag {
            for k in 0..d {
                p.wishart_r[k * d + k] = v;
            }
        }
        p
    }

    pub fn years(&self) -> Result<YearConfig> {
        let d = YearConfig::default();
        let y = YearConfig {
            first_year: self.first_year.unwrap_or(d.first_year),
            last_year: self.last_year.unwrap_or(d.last_year),
            treatment_start: self.treatment_start.unwrap_or(d.treatment_start),
        };
        y.validate()?;
        Ok(y)
    }

    pub fn analysis_window(&self) -> Result<AnalysisWindow> {
        let d = AnalysisWindow::default();
        let time = |s: &Option<String>, fallback: NaiveTime| -> Result<NaiveTime> {
            match s {
                None => Ok(fallback),
                Some(s) => NaiveTime::parse_from_str(s, "%H:%M")
                    .map_err(|e| Error::InvalidParameter(format!("window time '{s}': {e}"))),
            }
        };
        Ok(AnalysisWindow {
            start: time(&self.window_start, d.start)?,
            end: time(&self.window_end, d.end)?,
            months: self.window_months.clone().unwrap_or(d.months),
        })
    }

    pub fn index_settings(&self) -> IndexSettings {
        let d = IndexSettings::default();
        let w = self.window.unwrap_or(d.stft.window);
        IndexSettings {
            welch: None,
            stft: StftParams {
                window_length: self.stft_window_length.unwrap_or(d.stft.window_length),
                hop: self.stft_hop.unwrap_or(d.stft.hop),
                window: w,
            },
            aei_threshold_db: self.aei_threshold_db.unwrap_or(d.aei_threshold_db),
            aei_max_freq: self.aei_max_freq.unwrap_or(d.aei_max_freq),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_win() {
        let file = RunConfig::from_toml("seed = 1\niterations = 500\nresponse = \"H\"\n").unwrap();
        let cli = RunConfig::from_assignments(&["iterations=800".into(), "response=ACI".into()]).unwrap();
        let m = file.merged(cli);
        assert_eq!(m.seed, Some(1));
        assert_eq!(m.iterations, Some(800));
        assert_eq!(m.response.as_deref(), Some("ACI"));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("sed = 1").is_err());
        assert!(RunConfig::from_toml("schema_version = 9").is_err());
        assert!(RunConfig::from_assignments(&["seed".into()]).is_err());
    }

    #[test]
    fn seed_is_mandatory() {
        assert!(RunConfig::default().sampler().is_err());
        let cfg = RunConfig {
            seed: Some(3),
            ..Default::default()
        };
        let s = cfg.sampler().unwrap();
        assert_eq!((s.iterations, s.burn_in, s.chains, s.seed), (25_000, 5_000, 3, 3));
    }

    #[test]
    fn settings_resolve() {
        let cfg = RunConfig::from_assignments(&[
            "window_start=05:00".into(),
            "window_months=[6, 7]".into(),
            "wishart_r_diag=0.5".into(),
            "window=hann".into(),
        ])
        .unwrap();
        let w = cfg.analysis_window().unwrap();
        assert_eq!(w.start, NaiveTime::from_hms_opt(5, 0, 0).unwrap());
        assert_eq!(w.months, vec![6, 7]);
        assert_eq!(cfg.multi_priors(2).wishart_r, vec![0.5, 0.0, 0.0, 0.5]);
        assert_eq!(cfg.index_settings().stft.window, Window::Hann);
    }
}
