//! Gibbs samplers for the univariate and multivariate hierarchical models.
//!
//! Both models share the fixed-effects design of [`crate::dataset`]: an
//! intercept, the inherent treatment difference, year effects, treatment by
//! year effects and rain. Candidate models switch components off.

mod multi;
mod uni;

pub use multi::{MultiModel, MultiPriors, MultiState};
pub use uni::{UniModel, UniPriors, UniState};

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::YearConfig;
use crate::error::{Error, Result};
use crate::posterior::{self, WaicAccumulator, WaicResult};

/// The five candidate models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateModel {
    Full,
    NoInherent,
    NoRain,
    NoRandom,
    Basic,
}

impl CandidateModel {
    pub const ALL: [CandidateModel; 5] = [
        CandidateModel::Full,
        CandidateModel::NoInherent,
        CandidateModel::NoRain,
        CandidateModel::NoRandom,
        CandidateModel::Basic,
    ];

    pub fn toggles(self) -> ModelToggles {
        let (inherent, rain, random) = match self {
            CandidateModel::Full => (true, true, true),
            CandidateModel::NoInherent => (false, true, true),
            CandidateModel::NoRain => (true, false, true),
            CandidateModel::NoRandom => (true, true, false),
            CandidateModel::Basic => (false, false, false),
        };
        ModelToggles {
            inherent_difference: inherent,
            rain_effect: rain,
            random_effects: random,
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            CandidateModel::Full => "full",
            CandidateModel::NoInherent => "no-inherent",
            CandidateModel::NoRain => "no-rain",
            CandidateModel::NoRandom => "no-random",
            CandidateModel::Basic => "basic",
        }
    }
}

impl fmt::Display for CandidateModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CandidateModel::Full => "Full",
            CandidateModel::NoInherent => "No Inherent Differences",
            CandidateModel::NoRain => "No Rain Effect",
            CandidateModel::NoRandom => "No Random Effects",
            CandidateModel::Basic => "Basic",
        })
    }
}

impl FromStr for CandidateModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['_', ' '], "-");
        CandidateModel::ALL
            .into_iter()
            .find(|m| m.key() == norm)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown model '{s}' (expected full, no-inherent, no-rain, no-random or basic)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelToggles {
    pub inherent_difference: bool,
    pub rain_effect: bool,
    pub random_effects: bool,
}

impl Default for ModelToggles {
    fn default() -> Self {
        CandidateModel::Full.toggles()
    }
}

impl ModelToggles {
    /// Zero-based indices of the retained design columns.
    pub fn active_columns(&self, years: &YearConfig) -> Vec<usize> {
        let p = years.n_columns();
        (0..p)
            .filter(|&c| !(c == 1 && !self.inherent_difference) && !(c == p - 1 && !self.rain_effect))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub chains: usize,
    pub seed: u64,
    /// Keep the full draws x observations log-likelihood matrix.
    pub keep_loglik: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 25_000,
            burn_in: 5_000,
            thin: 1,
            chains: 3,
            seed: 0,
            keep_loglik: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidParameter(format!(
                "burn_in {} must be below iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 || self.chains == 0 {
            return Err(Error::InvalidParameter("thin and chains must be at least 1".into()));
        }
        Ok(())
    }

    /// Retained draws per chain.
    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }

    fn keeps(&self, iteration: usize) -> bool {
        iteration >= self.burn_in && (iteration - self.burn_in + 1) % self.thin == 0
    }
}

/// Retained draws of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub chain: usize,
    /// One row per retained draw, columns in label order.
    pub draws: Vec<Vec<f64>>,
    pub waic: WaicAccumulator,
    /// Row-major draws x observations, when requested.
    pub loglik: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub labels: Vec<String>,
    pub chains: Vec<ChainOutput>,
    pub config: SamplerConfig,
    pub n_obs: usize,
}

impl PosteriorDraws {
    pub fn n_params(&self) -> usize {
        self.labels.len()
    }

    pub fn n_draws(&self) -> usize {
        self.chains.iter().map(|c| c.draws.len()).sum()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Draws of one parameter pooled over chains.
    pub fn column(&self, p: usize) -> Vec<f64> {
        self.chains
            .iter()
            .flat_map(|c| c.draws.iter().map(move |row| row[p]))
            .collect()
    }

    pub fn column_by_label(&self, label: &str) -> Option<Vec<f64>> {
        self.label_index(label).map(|p| self.column(p))
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.n_params()).map(|p| self.column(p)).collect()
    }

    /// `[chain][parameter][draw]`
    pub fn chain_columns(&self) -> Vec<Vec<Vec<f64>>> {
        self.chains
            .iter()
            .map(|c| {
                (0..self.n_params())
                    .map(|p| c.draws.iter().map(|row| row[p]).collect())
                    .collect()
            })
            .collect()
    }

    pub fn waic_accumulator(&self) -> WaicAccumulator {
        let mut acc = WaicAccumulator::new(self.n_obs);
        for c in &self.chains {
            acc.merge(&c.waic);
        }
        acc
    }

    pub fn waic(&self) -> Result<WaicResult> {
        self.waic_accumulator().result()
    }

    /// Pooled log-likelihood matrix, if every chain kept one.
    pub fn loglik_matrix(&self) -> Option<Vec<f64>> {
        let mut out = Vec::new();
        for c in &self.chains {
            out.extend_from_slice(c.loglik.as_ref()?);
        }
        Some(out)
    }

    pub fn summarize(&self) -> Result<Vec<posterior::SummaryRow>> {
        posterior::summarize(&self.labels, &self.columns())
    }

    /// Delimited text: `chain,draw,<labels...>`, one row per retained draw.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "chain,draw,{}", self.labels.join(","))?;
        for c in &self.chains {
            for (k, row) in c.draws.iter().enumerate() {
                write!(w, "{},{}", c.chain, k)?;
                for v in row {
                    write!(w, ",{v}")?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }

    /// Labels and per-chain draw rows from [`write_csv`](Self::write_csv)
    /// output. WAIC state is not part of the file.
    pub fn read_csv(r: impl Read) -> Result<(Vec<String>, Vec<Vec<Vec<f64>>>)> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        if header.len() < 2 || &header[0] != "chain" || &header[1] != "draw" {
            return Err(Error::InvalidParameter("draw file must start with chain,draw".into()));
        }
        let labels: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
        let mut chains: Vec<Vec<Vec<f64>>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::InvalidParameter(format!("bad draw value '{s}': {e}")))
            };
            let chain = parse(&rec[0])? as usize;
            if chains.len() <= chain {
                chains.resize(chain + 1, Vec::new());
            }
            chains[chain].push(rec.iter().skip(2).map(parse).collect::<Result<_>>()?);
        }
        Ok((labels, chains))
    }
}

/// Records retained draws and log-likelihoods for one chain.
pub(crate) struct ChainRecorder {
    chain: usize,
    config: SamplerConfig,
    draws: Vec<Vec<f64>>,
    waic: WaicAccumulator,
    loglik: Option<Vec<f64>>,
}

impl ChainRecorder {
    pub(crate) fn new(chain: usize, config: SamplerConfig, n_obs: usize) -> Self {
        let retained = config.retained();
        Self {
            chain,
            config,
            draws: Vec::with_capacity(retained),
            waic: WaicAccumulator::new(n_obs),
            loglik: config
                .keep_loglik
                .then(|| Vec::with_capacity(retained * n_obs)),
        }
    }

    pub(crate) fn wants(&self, iteration: usize) -> bool {
        self.config.keeps(iteration)
    }

    pub(crate) fn record(&mut self, iteration: usize, params: Vec<f64>, ll: &[f64]) -> Result<()> {
        if let Some(bad) = ll.iter().position(|v| !v.is_finite()) {
            return Err(Error::ChainDivergence {
                chain: self.chain,
                iteration,
                reason: format!("non-finite log-likelihood at observation {bad}"),
            });
        }
        self.draws.push(params);
        self.waic.push(ll);
        if let Some(m) = &mut self.loglik {
            m.extend_from_slice(ll);
        }
        Ok(())
    }

    pub(crate) fn finish(self) -> ChainOutput {
        ChainOutput {
            chain: self.chain,
            draws: self.draws,
            waic: self.waic,
            loglik: self.loglik,
        }
    }
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub(crate) fn normal_logpdf(residual: f64, variance: f64) -> f64 {
    -0.5 * (LN_2PI + variance.ln() + residual * residual / variance)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_names_round_trip() {
        for m in CandidateModel::ALL {
            assert_eq!(m.key().parse::<CandidateModel>().unwrap(), m);
        }
        assert_eq!("No_Random".parse::<CandidateModel>().unwrap(), CandidateModel::NoRandom);
        assert!("fullish".parse::<CandidateModel>().is_err());
        assert_eq!(CandidateModel::NoInherent.to_string(), "No Inherent Differences");
    }

    #[test]
    fn active_columns_per_model() {
        let years = YearConfig::default();
        let n = |m: CandidateModel| m.toggles().active_columns(&years).len();
        assert_eq!(n(CandidateModel::Full), 13);
        assert_eq!(n(CandidateModel::NoInherent), 12);
        assert_eq!(n(CandidateModel::NoRain), 12);
        assert_eq!(n(CandidateModel::NoRandom), 13);
        assert_eq!(n(CandidateModel::Basic), 11);
        let basic = CandidateModel::Basic.toggles().active_columns(&years);
        assert!(!basic.contains(&1) && !basic.contains(&12));
    }

    #[test]
    fn retained_count() {
        let cfg = SamplerConfig {
            iterations: 100,
            burn_in: 10,
            thin: 4,
            ..Default::default()
        };
        assert_eq!(cfg.retained(), 22);
        assert_eq!((0..100).filter(|&i| cfg.keeps(i)).count(), 22);
        assert!(SamplerConfig { burn_in: 100, iterations: 100, ..Default::default() }
            .validate()
            .is_err());
        assert!(SamplerConfig { thin: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn logpdf_standard() {
        assert!((normal_logpdf(0.0, 1.0) + 0.918_938_533_204_672_7).abs() < 1e-15);
        assert!((normal_logpdf(2.0, 4.0) - (-0.5 * (LN_2PI + 4f64.ln() + 1.0))).abs() < 1e-15);
    }
}
