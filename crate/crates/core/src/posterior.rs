//! Posterior summaries: medians and central 95% credible intervals, WAIC,
//! random-effect correlations and convergence diagnostics.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fewest retained draws accepted by [`summarize`].
pub const MIN_SUMMARY_DRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// The 95% interval excludes zero.
    pub significant: bool,
}

impl SummaryRow {
    pub fn from_draws(label: &str, draws: &[f64]) -> Self {
        let mut sorted = draws.to_vec();
        sorted.sort_by(f64::total_cmp);
        let ci_low = quantile_sorted(&sorted, 0.025);
        let ci_high = quantile_sorted(&sorted, 0.975);
        Self {
            label: label.to_string(),
            median: quantile_sorted(&sorted, 0.5),
            ci_low,
            ci_high,
            significant: ci_low > 0.0 || ci_high < 0.0,
        }
    }

    /// `label median low high [significant]`, two decimals.
    pub fn to_line(&self) -> String {
        let mut s = format!(
            "{} {:.2} {:.2} {:.2}",
            self.label, self.median, self.ci_low, self.ci_high
        );
        if self.significant {
            s.push_str(" significant");
        }
        s
    }
}

/// Type-7 (linear interpolation) quantile of ascending data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty sample");
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// One row per parameter, in the given label order.
pub fn summarize(labels: &[String], columns: &[Vec<f64>]) -> Result<Vec<SummaryRow>> {
    let n = columns.first().map_or(0, Vec::len);
    if n < MIN_SUMMARY_DRAWS {
        return Err(Error::InsufficientDraws {
            required: MIN_SUMMARY_DRAWS,
            actual: n,
        });
    }
    Ok(labels
        .iter()
        .zip(columns)
        .map(|(l, c)| SummaryRow::from_draws(l, c))
        .collect())
}

pub fn format_summary(rows: &[SummaryRow]) -> String {
    let mut s = String::from("parameter median ci_2.5 ci_97.5\n");
    for r in rows {
        let _ = writeln!(s, "{}", r.to_line());
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaicResult {
    pub lppd: f64,
    pub p_waic: f64,
    pub waic: f64,
}

impl WaicResult {
    fn from_parts(lppd: f64, p_waic: f64) -> Result<Self> {
        let waic = -2.0 * (lppd - p_waic);
        if !waic.is_finite() {
            return Err(Error::Numerical("WAIC is not finite".into()));
        }
        Ok(Self {
            lppd,
            p_waic,
            waic,
        })
    }
}

fn log_mean_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += (v - max).exp();
        n += 1;
    }
    max + (sum / n as f64).ln()
}

/// WAIC from a row-major `n_draws x n_obs` pointwise log-likelihood matrix.
///
/// `lppd = sum_i log(mean_s exp(ll[s,i]))`, `p_waic = sum_i var_s(ll[s,i])`
/// (sample variance), `waic = -2 (lppd - p_waic)`.
pub fn waic(loglik: &[f64], n_draws: usize, n_obs: usize) -> Result<WaicResult> {
    if n_draws < 2 {
        return Err(Error::InsufficientDraws {
            required: 2,
            actual: n_draws,
        });
    }
    if loglik.len() != n_draws * n_obs {
        return Err(Error::InvalidParameter(format!(
            "log-likelihood matrix has {} entries, expected {n_draws} x {n_obs}",
            loglik.len()
        )));
    }
    if loglik.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite log-likelihood".into()));
    }
    let mut lppd = 0.0;
    let mut p_waic = 0.0;
    for i in 0..n_obs {
        let col = (0..n_draws).map(move |s| loglik[s * n_obs + i]);
        lppd += log_mean_exp(col.clone());
        let mean = col.clone().sum::<f64>() / n_draws as f64;
        p_waic += col.map(|v| (v - mean).powi(2)).sum::<f64>() / (n_draws - 1) as f64;
    }
    WaicResult::from_parts(lppd, p_waic)
}

/// Streaming per-observation WAIC state, so long chains need not keep the
/// full log-likelihood matrix. Chains combine with [`merge`](Self::merge).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaicAccumulator {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
    max: Vec<f64>,
    /// `sum exp(ll - max)`
    scaled_sum: Vec<f64>,
}

impl WaicAccumulator {
    pub fn new(n_obs: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; n_obs],
            m2: vec![0.0; n_obs],
            max: vec![f64::NEG_INFINITY; n_obs],
            scaled_sum: vec![0.0; n_obs],
        }
    }

    pub fn n_obs(&self) -> usize {
        self.mean.len()
    }

    pub fn n_draws(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, ll: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for (i, &v) in ll.iter().enumerate() {
            let delta = v - self.mean[i];
            self.mean[i] += delta / n;
            self.m2[i] += delta * (v - self.mean[i]);
            if v > self.max[i] {
                self.scaled_sum[i] = self.scaled_sum[i] * (self.max[i] - v).exp() + 1.0;
                self.max[i] = v;
            } else {
                self.scaled_sum[i] += (v - self.max[i]).exp();
            }
        }
    }

    pub fn merge(&mut self, other: &WaicAccumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * nb / n;
            self.m2[i] += other.m2[i] + delta * delta * na * nb / n;
            let m = self.max[i].max(other.max[i]);
            self.scaled_sum[i] = self.scaled_sum[i] * (self.max[i] - m).exp()
                + other.scaled_sum[i] * (other.max[i] - m).exp();
            self.max[i] = m;
        }
        self.count += other.count;
    }

    /// Per-observation `(lppd_i, p_waic_i)`.
    pub fn pointwise(&self) -> Vec<(f64, f64)> {
        let n = self.count as f64;
        (0..self.n_obs())
            .map(|i| {
                let lppd = self.max[i] + (self.scaled_sum[i] / n).ln();
                (lppd, self.m2[i] / (n - 1.0))
            })
            .collect()
    }

    pub fn result(&self) -> Result<WaicResult> {
        if self.count < 2 {
            return Err(Error::InsufficientDraws {
                required: 2,
                actual: self.count,
            });
        }
        let (lppd, p) = self
            .pointwise()
            .iter()
            .fold((0.0, 0.0), |(a, b), (l, v)| (a + l, b + v));
        WaicResult::from_parts(lppd, p)
    }
}

/// One entry of a model comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub waic: f64,
    pub delta: f64,
    pub preferred: bool,
}

/// Sort ascending by WAIC and flag the lowest.
pub fn compare_waic(entries: &[(String, f64)]) -> Vec<ComparisonRow> {
    let mut sorted: Vec<_> = entries.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
    let best = sorted.first().map_or(0.0, |e| e.1);
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, (model, waic))| ComparisonRow {
            model,
            waic,
            delta: waic - best,
            preferred: i == 0,
        })
        .collect()
}

pub fn format_comparison(rows: &[ComparisonRow]) -> String {
    let mut s = String::from("model waic delta\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{} {:.2} {:.2}{}",
            r.model,
            r.waic,
            r.delta,
            if r.preferred { " preferred" } else { "" }
        );
    }
    if let Some(best) = rows.first() {
        let _ = writeln!(s, "{} preferred", best.model);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPair {
    pub first: String,
    pub second: String,
    pub median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub significant: bool,
}

/// Posterior correlations of a random-effects covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    pub names: Vec<String>,
    pub median: DMatrix<f64>,
    pub ci_low: DMatrix<f64>,
    pub ci_high: DMatrix<f64>,
    pub significant: DMatrix<bool>,
}

impl CorrelationReport {
    /// Long format, one row per unordered pair (`i > j`).
    pub fn pairs(&self) -> Vec<CorrelationPair> {
        let d = self.names.len();
        let mut out = Vec::with_capacity(d * (d - 1) / 2);
        for i in 0..d {
            for j in 0..i {
                out.push(CorrelationPair {
                    first: self.names[i].clone(),
                    second: self.names[j].clone(),
                    median: self.median[(i, j)],
                    ci_low: self.ci_low[(i, j)],
                    ci_high: self.ci_high[(i, j)],
                    significant: self.significant[(i, j)],
                });
            }
        }
        out
    }
}

pub fn covariance_to_correlation(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let d = cov.nrows();
    DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            1.0
        } else {
            (cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt()).clamp(-1.0, 1.0)
        }
    })
}

pub fn correlations(names: &[String], lambda_draws: &[DMatrix<f64>]) -> Result<CorrelationReport> {
    let d = names.len();
    if lambda_draws.is_empty() {
        return Err(Error::InsufficientDraws {
            required: 1,
            actual: 0,
        });
    }
    if lambda_draws.iter().any(|m| m.shape() != (d, d)) {
        return Err(Error::InvalidParameter("covariance draws do not match names".into()));
    }
    let corr: Vec<DMatrix<f64>> = lambda_draws.iter().map(covariance_to_correlation).collect();
    let mut median = DMatrix::identity(d, d);
    let mut ci_low = DMatrix::identity(d, d);
    let mut ci_high = DMatrix::identity(d, d);
    let mut significant = DMatrix::from_element(d, d, false);
    for i in 0..d {
        for j in 0..i {
            let draws: Vec<f64> = corr.iter().map(|c| c[(i, j)]).collect();
            let row = SummaryRow::from_draws("", &draws);
            for (a, b) in [(i, j), (j, i)] {
                median[(a, b)] = row.median;
                ci_low[(a, b)] = row.ci_low;
                ci_high[(a, b)] = row.ci_high;
                significant[(a, b)] = row.significant;
            }
        }
    }
    Ok(CorrelationReport {
        names: names.to_vec(),
        median,
        ci_low,
        ci_high,
        significant,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainStatus {
    Ok,
    /// Every draw in every chain is identical.
    Degenerate,
    /// Chains are internally constant but disagree; R-hat is infinite.
    Divergent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamDiagnostic {
    pub label: String,
    pub rhat: f64,
    pub ess: f64,
    /// Per chain: first 10% against last 50%.
    pub geweke_z: Vec<f64>,
    pub status: ChainStatus,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = if x.len() > 1 {
        x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

/// Potential scale reduction over chains split in half.
pub fn split_rhat(chains: &[&[f64]]) -> f64 {
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    let half = n / 2;
    if half < 2 {
        return f64::NAN;
    }
    let mut parts: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        parts.push(&c[..half]);
        parts.push(&c[n - half..n]);
    }
    let stats: Vec<(f64, f64)> = parts.iter().map(|p| mean_var(p)).collect();
    let means: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / stats.len() as f64;
    let b = half as f64 * mean_var(&means).1;
    if w == 0.0 {
        return if b == 0.0 { f64::NAN } else { f64::INFINITY };
    }
    let nf = half as f64;
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    (var_plus / w).sqrt()
}

fn autocovariance(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let (mean, _) = mean_var(x);
    let m = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .map(|v| Complex::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(m)
        .collect();
    planner.plan_fft_forward(m).process(&mut buf);
    for c in &mut buf {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    buf[..n].iter().map(|c| c.re / (m as f64 * n as f64)).collect()
}

/// Effective sample size across chains with Geyer's initial monotone
/// sequence on the combined autocorrelation.
pub fn effective_sample_size(chains: &[&[f64]]) -> f64 {
    let m = chains.len();
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    if m == 0 || n < 4 {
        return f64::NAN;
    }
    let acov: Vec<Vec<f64>> = chains.iter().map(|c| autocovariance(&c[..n])).collect();
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean_var(&c[..n]).0).collect();
    let w = acov.iter().map(|a| a[0] * nf / (nf - 1.0)).sum::<f64>() / m as f64;
    let mut var_plus = w * (nf - 1.0) / nf;
    if m > 1 {
        var_plus += mean_var(&means).1;
    }
    if var_plus <= 0.0 {
        return f64::NAN;
    }
    let acov_mean = |t: usize| acov.iter().map(|a| a[t]).sum::<f64>() / m as f64;
    let mut rho = vec![0.0; n];
    rho[0] = 1.0;
    let mut even = 1.0;
    let mut odd = 1.0 - (w - acov_mean(1)) / var_plus;
    rho[1] = odd;
    let mut s = 1;
    while s + 4 < n && even + odd > 0.0 {
        even = 1.0 - (w - acov_mean(s + 1)) / var_plus;
        odd = 1.0 - (w - acov_mean(s + 2)) / var_plus;
        if even + odd >= 0.0 {
            rho[s + 1] = even;
            rho[s + 2] = odd;
        }
        s += 2;
    }
    let max_s = s;
    if rho[max_s] > 0.0 && max_s + 1 < n {
        rho[max_s + 1] = rho[max_s];
    }
    let mut k = 1;
    while k + 3 <= max_s {
        if rho[k + 1] + rho[k + 2] > rho[k - 1] + rho[k] {
            rho[k + 1] = (rho[k - 1] + rho[k]) / 2.0;
            rho[k + 2] = rho[k + 1];
        }
        k += 2;
    }
    let tail = if max_s + 1 < n { rho[max_s + 1] } else { 0.0 };
    let tau = -1.0 + 2.0 * rho[..max_s].iter().sum::<f64>() + tail;
    let total = (m * n) as f64;
    (total / tau).min(total * total.log10())
}

/// Geweke z-score comparing the first 10% of a chain with its last 50%.
pub fn geweke_z(chain: &[f64]) -> f64 {
    let n = chain.len();
    let a = &chain[..n / 10];
    let b = &chain[n - n / 2..];
    if a.len() < 4 || b.len() < 4 {
        return f64::NAN;
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let se2 = va / effective_sample_size(&[a]) + vb / effective_sample_size(&[b]);
    (ma - mb) / se2.sqrt()
}

/// Per-parameter diagnostics; `chains[c][p]` is the draw column of
/// parameter `p` in chain `c`.
pub fn diagnostics(labels: &[String], chains: &[Vec<Vec<f64>>]) -> Result<Vec<ParamDiagnostic>> {
    let n = chains.first().and_then(|c| c.first()).map_or(0, Vec::len);
    if chains.iter().any(|c| c.len() != labels.len() || c.iter().any(|col| col.len() != n)) {
        return Err(Error::InvalidParameter("chains must have equal shape".into()));
    }
    Ok(labels
        .iter()
        .enumerate()
        .map(|(p, label)| {
            let cols: Vec<&[f64]> = chains.iter().map(|c| c[p].as_slice()).collect();
            let all_const = cols.iter().all(|c| c.iter().all(|&v| v == c[0]));
            let status = if all_const {
                if cols.iter().all(|c| c[0] == cols[0][0]) {
                    ChainStatus::Degenerate
                } else {
                    ChainStatus::Divergent
                }
            } else {
                ChainStatus::Ok
            };
            let rhat = match status {
                ChainStatus::Divergent => f64::INFINITY,
                ChainStatus::Degenerate => f64::NAN,
                ChainStatus::Ok => split_rhat(&cols),
            };
            let ess = if status == ChainStatus::Ok {
                effective_sample_size(&cols)
            } else {
                f64::NAN
            };
            ParamDiagnostic {
                label: label.clone(),
                rhat,
                ess,
                geweke_z: cols.iter().map(|c| geweke_z(c)).collect(),
                status,
            }
        })
        .collect())
}

/// Per-observation WAIC contributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointwiseWaic {
    pub lppd: f64,
    pub p_waic: f64,
}

/// Everything a fit reports, serialized as `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub schema_version: u32,
    /// `uni` or `multi`.
    pub kind: String,
    pub model: String,
    pub model_name: String,
    pub response: Option<String>,
    /// Hash of the fitted observations; reports are comparable only when
    /// their hashes agree.
    pub data_hash: String,
    pub n_obs: usize,
    pub n_draws: usize,
    pub summary: Vec<SummaryRow>,
    /// One row per index for the rain coefficient (multivariate fits).
    #[serde(default)]
    pub rain_effects: Vec<SummaryRow>,
    pub waic: WaicResult,
    pub pointwise: Vec<PointwiseWaic>,
    #[serde(default, skip_deserializing)]
    pub diagnostics: Vec<ParamDiagnostic>,
    #[serde(default, skip_deserializing)]
    pub correlations: Vec<CorrelationPair>,
}

impl ModelReport {
    pub fn to_text(&self) -> String {
        let mut s = format!("{} ({})\n", self.model_name, self.kind);
        if let Some(r) = &self.response {
            let _ = writeln!(s, "response {r}");
        }
        let _ = writeln!(s, "observations {} draws {}", self.n_obs, self.n_draws);
        s.push_str(&format_summary(&self.summary));
        if !self.rain_effects.is_empty() {
            s.push_str("rain effect\n");
            for r in &self.rain_effects {
                let _ = writeln!(s, "{}", r.to_line());
            }
        }
        let _ = writeln!(
            s,
            "waic {:.2} lppd {:.2} p_waic {:.2}",
            self.waic.waic, self.waic.lppd, self.waic.p_waic
        );
        s
    }

    /// Summary rows as delimited text.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("parameter,median,ci_low,ci_high,significant\n");
        for r in self.summary.iter().chain(&self.rain_effects) {
            let _ = writeln!(s, "{},{},{},{},{}", r.label, r.median, r.ci_low, r.ci_high, r.significant);
        }
        s
    }
}

pub fn correlation_csv(pairs: &[CorrelationPair]) -> String {
    let mut s = String::from("first,second,median,ci_low,ci_high,significant\n");
    for p in pairs {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            p.first, p.second, p.median, p.ci_low, p.ci_high, p.significant
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{seeded_rng, standard_normal};
    use proptest::prelude::*;

    #[test]
    fn constant_draws_summary() {
        let row = summarize(&["a".into()], &[vec![0.41; 200]]).unwrap().remove(0);
        assert_eq!((row.median, row.ci_low, row.ci_high), (0.41, 0.41, 0.41));
        assert!(row.significant);
        assert_eq!(row.to_line(), "a 0.41 0.41 0.41 significant");
    }

    #[test]
    fn symmetric_draws_not_significant() {
        let d: Vec<f64> = (0..200).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let row = SummaryRow::from_draws("b", &d);
        assert!(!row.significant);
        assert_eq!(row.to_line(), "b 0.00 -1.00 1.00");
    }

    #[test]
    fn too_few_draws() {
        assert!(matches!(
            summarize(&["a".into()], &[vec![0.0; 99]]),
            Err(Error::InsufficientDraws { .. })
        ));
    }

    #[test]
    fn type7_quantiles() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&x, 0.5), 2.5);
        assert_eq!(quantile_sorted(&x, 0.0), 1.0);
        assert_eq!(quantile_sorted(&x, 1.0), 4.0);
        assert!((quantile_sorted(&x, 0.025) - 1.075).abs() < 1e-12);
    }

    #[test]
    fn waic_zero_variance() {
        let ll = vec![-1.0, -2.0, -1.0, -2.0, -1.0, -2.0];
        let w = waic(&ll, 3, 2).unwrap();
        assert_eq!(w.p_waic, 0.0);
        assert!((w.waic - 6.0).abs() < 1e-12);
    }

    #[test]
    fn waic_rejects_non_finite() {
        assert!(waic(&[f64::NAN, 0.0], 2, 1).is_err());
        assert!(waic(&[0.0], 1, 1).is_err());
    }

    #[test]
    fn accumulator_matches_batch() {
        let mut rng = seeded_rng(1, 0);
        let (s, n) = (300, 17);
        let ll: Vec<f64> = (0..s * n).map(|_| -3.0 + 2.0 * standard_normal(&mut rng)).collect();
        let batch = waic(&ll, s, n).unwrap();
        let mut a = WaicAccumulator::new(n);
        let mut b = WaicAccumulator::new(n);
        for (k, row) in ll.chunks(n).enumerate() {
            if k < 120 {
                a.push(row);
            } else {
                b.push(row);
            }
        }
        a.merge(&b);
        let streamed = a.result().unwrap();
        assert!((batch.lppd - streamed.lppd).abs() < 1e-9);
        assert!((batch.p_waic - streamed.p_waic).abs() < 1e-9);
    }

    #[test]
    fn comparison_sorts_and_flags() {
        let rows = compare_waic(&[("Basic".into(), 46977.84), ("Full".into(), 43818.54)]);
        assert_eq!(rows[0].model, "Full");
        assert!(rows[0].preferred && !rows[1].preferred);
        assert!(format_comparison(&rows).ends_with("Full preferred\n"));
        let one = compare_waic(&[("Only".into(), 1.0)]);
        assert!(one[0].preferred);
    }

    #[test]
    fn correlation_unit_diagonal() {
        let names: Vec<String> = vec!["a".into(), "b".into()];
        let draws = vec![DMatrix::from_row_slice(2, 2, &[4.0, 1.8, 1.8, 1.0]); 5];
        let r = correlations(&names, &draws).unwrap();
        assert_eq!(r.median[(0, 0)], 1.0);
        assert!((r.median[(1, 0)] - 0.9).abs() < 1e-12);
        assert_eq!(r.median[(1, 0)], r.median[(0, 1)]);
        assert_eq!(r.pairs().len(), 1);
    }

    #[test]
    fn rhat_for_iid_normals() {
        let mut rng = seeded_rng(2, 0);
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..2000).map(|_| standard_normal(&mut rng)).collect())
            .collect();
        let refs: Vec<&[f64]> = chains.iter().map(Vec::as_slice).collect();
        let r = split_rhat(&refs);
        assert!((0.99..=1.01).contains(&r), "{r}");
        let ess = effective_sample_size(&refs);
        assert!(ess > 6000.0 && ess < 10_000.0, "{ess}");
    }

    #[test]
    fn ess_detects_autocorrelation() {
        let mut rng = seeded_rng(3, 0);
        let mut x = 0.0;
        let chain: Vec<f64> = (0..20_000)
            .map(|_| {
                x = 0.9 * x + standard_normal(&mut rng);
                x
            })
            .collect();
        // AR(1) with phi = 0.9: n (1 - phi) / (1 + phi) ~ 1053
        let ess = effective_sample_size(&[&chain]);
        assert!(ess > 700.0 && ess < 1500.0, "{ess}");
    }

    #[test]
    fn diagnostic_flags() {
        let labels = vec!["x".to_string()];
        let diverged = diagnostics(&labels, &[vec![vec![1.0; 100]], vec![vec![2.0; 100]]]).unwrap();
        assert_eq!(diverged[0].status, ChainStatus::Divergent);
        assert!(diverged[0].rhat.is_infinite());
        let constant = diagnostics(&labels, &[vec![vec![1.0; 100]], vec![vec![1.0; 100]]]).unwrap();
        assert_eq!(constant[0].status, ChainStatus::Degenerate);
    }

    proptest! {
        #[test]
        fn summary_is_permutation_invariant(mut v in proptest::collection::vec(-10.0f64..10.0, 100..200), seed in 0u64..1000) {
            let a = SummaryRow::from_draws("p", &v);
            use rand::seq::SliceRandom;
            v.shuffle(&mut seeded_rng(seed, 0));
            let b = SummaryRow::from_draws("p", &v);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn summary_is_ordered(v in proptest::collection::vec(-10.0f64..10.0, 100..200)) {
            let r = SummaryRow::from_draws("p", &v);
            prop_assert!(r.ci_low <= r.median && r.median <= r.ci_high);
            prop_assert_eq!(r.significant, r.ci_low > 0.0 || r.ci_high < 0.0);
        }

        #[test]
        fn waic_constant_shift(shift in proptest::collection::vec(-5.0f64..5.0, 3), seed in 0u64..100) {
            let mut rng = seeded_rng(seed, 0);
            let (s, n) = (50, 3);
            let ll: Vec<f64> = (0..s * n).map(|_| -2.0 + standard_normal(&mut rng)).collect();
            let shifted: Vec<f64> = ll.iter().enumerate().map(|(k, v)| v + shift[k % n]).collect();
            let a = waic(&ll, s, n).unwrap();
            let b = waic(&shifted, s, n).unwrap();
            let total: f64 = shift.iter().sum();
            prop_assert!((b.lppd - a.lppd - total).abs() < 1e-9);
            prop_assert!((b.p_waic - a.p_waic).abs() < 1e-9);
        }

        #[test]
        fn correlations_symmetric(vals in proptest::collection::vec(-1.0f64..1.0, 9)) {
            let a = DMatrix::from_row_slice(3, 3, &vals);
            let cov = &a * a.transpose() + DMatrix::identity(3, 3) * 0.1;
            let names: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
            let r = correlations(&names, &[cov]).unwrap();
            for i in 0..3 {
                prop_assert_eq!(r.median[(i, i)], 1.0);
                for j in 0..3 {
                    prop_assert_eq!(r.median[(i, j)], r.median[(j, i)]);
                    prop_assert!(r.median[(i, j)].abs() <= 1.0);
                }
            }
        }
    }
}
