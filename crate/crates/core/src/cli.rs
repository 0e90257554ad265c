//! Command-line pipeline: `indices`, `assemble`, `fit`, `compare`,
//! `simulate` and `report`.
//!
//! Exit codes: 0 success, 1 input error, 2 empty result, 3 numerical or
//! chain failure.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::dataset::{
    group_individuals, read_metadata_file, simulate_dataset, AssembledDataset, Layout, RecordingMeta, Truth,
};
use crate::error::{Error, Result};
use crate::gibbs::{CandidateModel, MultiModel, PosteriorDraws, UniModel};
use crate::indices::{compute_all, IndexRecord, IndexSettings, INDEX_NAMES, N_INDICES};
use crate::posterior::{
    compare_waic, correlation_csv, correlations, diagnostics, format_comparison, ModelReport,
    PointwiseWaic, SummaryRow,
};
use crate::spectral::decode_wav;

/// Only environment variable consulted: directory for cached index records.
pub const CACHE_DIR_ENV: &str = "SOUNDSCAPE_CACHE_DIR";

#[derive(Debug, Parser)]
#[command(name = "soundscape", version, about = "Acoustic indices and hierarchical soundscape models")]
pub struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute acoustic indices for every recording in a metadata file.
    Indices(IndicesArgs),
    /// Join metadata and an index table into a dataset of individuals.
    Assemble(AssembleArgs),
    /// Fit the univariate or multivariate model.
    Fit(FitArgs),
    /// Rank fitted models by WAIC.
    Compare(CompareArgs),
    /// Generate a synthetic dataset from known parameters.
    Simulate(SimulateArgs),
    /// Print the text report of a fit.
    Report(ReportArgs),
}

#[derive(Debug, Args, Default)]
pub struct ConfigArgs {
    /// Flat TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Args)]
pub struct IndicesArgs {
    #[arg(long)]
    pub metadata: PathBuf,
    /// Directory that `wav_path` entries are relative to.
    #[arg(long)]
    pub audio_dir: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (default: logical cores).
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct AssembleArgs {
    #[arg(long)]
    pub metadata: PathBuf,
    #[arg(long)]
    pub indices: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Uni,
    Multi,
}

impl ModelKind {
    fn key(self) -> &'static str {
        match self {
            ModelKind::Uni => "uni",
            ModelKind::Multi => "multi",
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub kind: ModelKind,
    #[arg(long)]
    pub dataset: PathBuf,
    /// full, no-inherent, no-rain, no-random or basic.
    #[arg(long, default_value = "full")]
    pub model: String,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
    /// Index modeled by `fit uni` (default NDSI).
    #[arg(long)]
    pub response: Option<String>,
    /// Also write the full log-likelihood matrix.
    #[arg(long)]
    pub keep_loglik: bool,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// `report.json` files or fit output directories.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Write the table as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML file with a `[truth]` table and an optional `[layout]` table.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub run_dir: PathBuf,
}

/// Why a command did not succeed.
#[derive(Debug)]
pub enum Failure {
    Error(Error),
    Empty(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Error(e.into())
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Empty(_) => 2,
            Failure::Error(e) => match e {
                Error::Numerical(_) | Error::Covariance(_) | Error::ChainDivergence { .. } => 3,
                _ => 1,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Error(e) => write!(f, "{e}"),
            Failure::Empty(m) => write!(f, "{m}"),
        }
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else {
        match cli.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        }
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
    match run(cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}

pub fn run(command: Command) -> CmdResult {
    match command {
        Command::Indices(a) => cmd_indices(&a),
        Command::Assemble(a) => cmd_assemble(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Report(a) => cmd_report(&a),
    }
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig> {
    let file = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    Ok(file.merged(RunConfig::from_assignments(&args.set)?))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn process_recording(path: &Path, settings: &IndexSettings, cache: Option<&Path>) -> Result<IndexRecord> {
    let bytes = std::fs::read(path).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let cache_file = cache.map(|dir| {
        let mut key = bytes.clone();
        key.extend_from_slice(&serde_json::to_vec(settings).expect("settings serialize"));
        dir.join(format!("{}.json", sha256_hex(&key)))
    });
    if let Some(f) = &cache_file {
        if let Ok(text) = std::fs::read_to_string(f) {
            if let Ok(rec) = serde_json::from_str::<IndexRecord>(&text) {
                return Ok(rec);
            }
        }
    }
    let audio = decode_wav(&bytes, path)?;
    let rec = compute_all(&audio, settings)?;
    if let Some(f) = &cache_file {
        if let Err(e) = std::fs::write(f, serde_json::to_vec(&rec)?) {
            warn!("cannot write cache entry {}: {e}", f.display());
        }
    }
    Ok(rec)
}

/// Index table header: id, site, timestamp, raw values, transformed values.
pub fn index_table_header() -> Vec<String> {
    let mut h = vec!["recording_id".to_string(), "site".into(), "timestamp".into()];
    h.extend(INDEX_NAMES.iter().map(|n| n.to_string()));
    h.extend(INDEX_NAMES.iter().map(|n| format!("t_{n}")));
    h
}

fn cmd_indices(a: &IndicesArgs) -> CmdResult {
    let cfg = load_config(&a.config)?;
    let meta = read_metadata_file(&a.metadata)?;
    let settings = cfg.index_settings();
    let workers = a
        .workers
        .or(cfg.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    let cache = std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from);
    if let Some(dir) = &cache {
        std::fs::create_dir_all(dir)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let results: Vec<Result<IndexRecord>> = pool.install(|| {
        meta.par_iter()
            .map(|m| process_recording(&a.audio_dir.join(&m.wav_path), &settings, cache.as_deref()))
            .collect()
    });
    let mut w = csv::Writer::from_path(&a.out).map_err(Error::from)?;
    w.write_record(index_table_header()).map_err(Error::from)?;
    let mut ok = 0;
    for (m, r) in meta.iter().zip(results) {
        match r {
            Ok(rec) => {
                let mut row = vec![
                    m.recording_id.clone(),
                    m.site_id.clone(),
                    m.datetime.format("%Y-%m-%dT%H:%M:%S").to_string(),
                ];
                row.extend(rec.raw().iter().map(|v| v.to_string()));
                row.extend(rec.transformed.iter().map(|v| v.to_string()));
                w.write_record(&row).map_err(Error::from)?;
                ok += 1;
            }
            Err(e) => warn!("skipping {}: {e}", m.recording_id),
        }
    }
    w.flush()?;
    info!("{ok} of {} recordings processed", meta.len());
    if ok == 0 {
        return Err(Failure::Empty("no recording could be processed".into()));
    }
    Ok(())
}

/// Transformed index values keyed by recording id.
pub fn read_index_table(path: &Path) -> Result<HashMap<String, Vec<f64>>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?.clone();
    let id_col = header
        .iter()
        .position(|h| h == "recording_id")
        .ok_or_else(|| Error::Metadata("index table has no recording_id column".into()))?;
    let cols = INDEX_NAMES
        .iter()
        .map(|n| {
            let name = format!("t_{n}");
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Metadata(format!("index table has no {name} column")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let values = cols
            .iter()
            .map(|&c| {
                rec[c]
                    .parse::<f64>()
                    .map_err(|e| Error::Metadata(format!("bad index value '{}': {e}", &rec[c])))
            })
            .collect::<Result<Vec<_>>>()?;
        out.insert(rec[id_col].to_string(), values);
    }
    Ok(out)
}

fn cmd_assemble(a: &AssembleArgs) -> CmdResult {
    let cfg = load_config(&a.config)?;
    let window = cfg.analysis_window()?;
    let years = cfg.years()?;
    let meta = read_metadata_file(&a.metadata)?;
    let table = read_index_table(&a.indices)?;
    let mut kept: Vec<RecordingMeta> = Vec::with_capacity(meta.len());
    for mut m in meta {
        if !window.accepts(&m.datetime) {
            info!("{} is outside the analysis window", m.recording_id);
            continue;
        }
        match table.get(&m.recording_id) {
            Some(v) if v.len() == N_INDICES && v.iter().all(|x| x.is_finite()) => {
                m.index_values = v.clone();
                kept.push(m);
            }
            _ => warn!("{} has no index values; dropped", m.recording_id),
        }
    }
    if kept.is_empty() {
        return Err(Failure::Empty("no recording has index values".into()));
    }
    let individuals = group_individuals(&kept)?;
    let names = INDEX_NAMES.iter().map(|s| s.to_string()).collect();
    let data = AssembledDataset::new(names, years, individuals)?;
    data.save(&a.out)?;
    info!(
        "{} individuals, {} recordings",
        data.n_individuals(),
        data.n_recordings()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    tool_version: &'static str,
    command: &'static str,
    kind: &'static str,
    model: &'static str,
    dataset: String,
    dataset_hash: String,
    data_hash: &'a str,
    response: Option<&'a str>,
    config: &'a RunConfig,
    sampler: crate::gibbs::SamplerConfig,
    seed: u64,
    fit_seconds: f64,
    labels: &'a [String],
}

fn fit_data_hash(dataset_hash: &str, kind: ModelKind, response: Option<&str>) -> String {
    sha256_hex(format!("{dataset_hash}|{}|{}", kind.key(), response.unwrap_or("*")).as_bytes())
}

fn build_report(
    draws: &PosteriorDraws,
    kind: ModelKind,
    model: CandidateModel,
    response: Option<String>,
    data_hash: String,
) -> Result<ModelReport> {
    let acc = draws.waic_accumulator();
    let waic = acc.result()?;
    let pointwise = acc
        .pointwise()
        .into_iter()
        .map(|(lppd, p_waic)| PointwiseWaic { lppd, p_waic })
        .collect();
    Ok(ModelReport {
        schema_version: SCHEMA_VERSION,
        kind: kind.key().into(),
        model: model.key().into(),
        model_name: model.to_string(),
        response,
        data_hash,
        n_obs: draws.n_obs,
        n_draws: draws.n_draws(),
        summary: draws.summarize()?,
        rain_effects: Vec::new(),
        waic,
        pointwise,
        diagnostics: diagnostics(&draws.labels, &draws.chain_columns())?,
        correlations: Vec::new(),
    })
}

fn write_loglik(path: &Path, draws: &PosteriorDraws) -> Result<()> {
    let Some(m) = draws.loglik_matrix() else {
        return Ok(());
    };
    let mut s = String::new();
    for row in m.chunks(draws.n_obs.max(1)) {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        let _ = writeln!(s, "{}", line.join(","));
    }
    std::fs::write(path, s)?;
    Ok(())
}

fn cmd_fit(a: &FitArgs) -> CmdResult {
    let over = RunConfig {
        seed: a.seed,
        iterations: a.iterations,
        burn_in: a.burn_in,
        thin: a.thin,
        chains: a.chains,
        response: a.response.clone(),
        keep_loglik: a.keep_loglik.then_some(true),
        ..Default::default()
    };
    let cfg = load_config(&a.config)?.merged(over);
    let sampler = cfg.sampler()?;
    let model: CandidateModel = a.model.parse()?;
    let data = AssembledDataset::load(&a.dataset)?;
    if data.n_recordings() == 0 {
        return Err(Failure::Error(Error::InvalidParameter("dataset has no recordings".into())));
    }
    std::fs::create_dir_all(&a.out_dir)?;
    let dataset_hash = data.data_hash();
    let start = Instant::now();
    let (draws, response, report_extra) = match a.kind {
        ModelKind::Uni => {
            let name = cfg.response.clone().unwrap_or_else(|| {
                if data.n_indices() == 1 {
                    data.index_names[0].clone()
                } else {
                    "NDSI".into()
                }
            });
            let idx = data
                .index_of(&name)
                .ok_or_else(|| Error::InvalidParameter(format!("dataset has no index '{name}'")))?;
            let m = UniModel::new(&data, idx, model.toggles())?.with_priors(cfg.uni_priors())?;
            (m.run(&sampler)?, Some(data.index_names[idx].clone()), None)
        }
        ModelKind::Multi => {
            let m = MultiModel::new(&data, model.toggles())?
                .with_priors(cfg.multi_priors(data.n_indices()))?;
            let draws = m.run(&sampler)?;
            (draws, None, Some(m))
        }
    };
    let fit_seconds = start.elapsed().as_secs_f64();
    let data_hash = fit_data_hash(&dataset_hash, a.kind, response.as_deref());
    let mut report = build_report(&draws, a.kind, model, response.clone(), data_hash.clone())?;
    if let Some(m) = &report_extra {
        let rain_col = data.years.n_columns();
        if model.toggles().rain_effect {
            report.rain_effects = m
                .index_names()
                .iter()
                .map(|n| {
                    let col = draws
                        .column_by_label(&format!("alpha2_{n}_{rain_col}"))
                        .expect("rain column present");
                    SummaryRow::from_draws(n, &col)
                })
                .collect();
        }
        let lambdas: Vec<_> = draws
            .chains
            .iter()
            .flat_map(|c| c.draws.iter())
            .filter_map(|row| m.lambda_from_params(row))
            .collect();
        if !lambdas.is_empty() {
            let corr = correlations(m.index_names(), &lambdas)?;
            report.correlations = corr.pairs();
            std::fs::write(a.out_dir.join("correlations.csv"), correlation_csv(&report.correlations))?;
        }
    }
    let mut draw_file = std::io::BufWriter::new(std::fs::File::create(a.out_dir.join("draws.csv"))?);
    draws.write_csv(&mut draw_file)?;
    std::io::Write::flush(&mut draw_file)?;
    write_loglik(&a.out_dir.join("loglik.csv"), &draws)?;
    std::fs::write(a.out_dir.join("report.json"), serde_json::to_string_pretty(&report).map_err(Error::from)?)?;
    std::fs::write(a.out_dir.join("report.txt"), report.to_text())?;
    std::fs::write(a.out_dir.join("summary.csv"), report.summary_csv())?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        command: "fit",
        kind: a.kind.key(),
        model: model.key(),
        dataset: a.dataset.display().to_string(),
        dataset_hash,
        data_hash: &data_hash,
        response: response.as_deref(),
        config: &cfg,
        sampler,
        seed: sampler.seed,
        fit_seconds,
        labels: &draws.labels,
    };
    std::fs::write(
        a.out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).map_err(Error::from)?,
    )?;
    print!("{}", report.to_text());
    Ok(())
}

fn load_report(path: &Path) -> Result<ModelReport> {
    let file = if path.is_dir() {
        path.join("report.json")
    } else {
        path.to_path_buf()
    };
    let text = std::fs::read_to_string(&file)?;
    Ok(serde_json::from_str(&text)?)
}

fn cmd_compare(a: &CompareArgs) -> CmdResult {
    let reports = a.reports.iter().map(|p| load_report(p)).collect::<Result<Vec<_>>>()?;
    let first = &reports[0].data_hash;
    if let Some(bad) = reports.iter().position(|r| &r.data_hash != first) {
        return Err(Error::HashMismatch(format!(
            "{} was fitted to different data than {}",
            a.reports[bad].display(),
            a.reports[0].display()
        ))
        .into());
    }
    let rows = compare_waic(
        &reports
            .iter()
            .map(|r| (r.model_name.clone(), r.waic.waic))
            .collect::<Vec<_>>(),
    );
    print!("{}", format_comparison(&rows));
    if let Some(out) = &a.out {
        let mut s = String::from("model,waic,delta,preferred\n");
        for r in &rows {
            let _ = writeln!(s, "{},{},{},{}", r.model, r.waic, r.delta, r.preferred);
        }
        std::fs::write(out, s)?;
    }
    Ok(())
}

/// Layout of a simulated study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutSpec {
    pub sites: usize,
    pub treatment_sites: usize,
    pub days: u32,
    pub times: Vec<String>,
    pub min_years: usize,
    pub max_years: usize,
    pub rain_probability: f64,
}

impl Default for LayoutSpec {
    fn default() -> Self {
        Self {
            sites: 10,
            treatment_sites: 5,
            days: 4,
            times: vec!["05:30".into(), "06:30".into()],
            min_years: 1,
            max_years: 6,
            rain_probability: 0.2,
        }
    }
}

impl LayoutSpec {
    pub fn layout(&self, years: crate::dataset::YearConfig) -> Layout {
        let times: Vec<&str> = self.times.iter().map(String::as_str).collect();
        let mut l = Layout::with_sites(self.sites, self.treatment_sites, self.days, &times);
        l.years = years;
        l.min_years = self.min_years;
        l.max_years = self.max_years;
        l.rain_probability = self.rain_probability;
        l
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub truth: Truth,
    #[serde(default)]
    pub layout: LayoutSpec,
}

fn cmd_simulate(a: &SimulateArgs) -> CmdResult {
    let cfg = load_config(&a.config)?.merged(RunConfig {
        seed: a.seed,
        ..Default::default()
    });
    let seed = cfg.require_seed()?;
    let text = std::fs::read_to_string(&a.truth)?;
    let spec: SimulationSpec =
        toml::from_str(&text).map_err(|e| Error::InvalidParameter(format!("truth file: {e}")))?;
    let data = simulate_dataset(&spec.truth, &spec.layout.layout(cfg.years()?), seed)?;
    data.save(&a.out)?;
    info!(
        "{} individuals, {} recordings",
        data.n_individuals(),
        data.n_recordings()
    );
    Ok(())
}

fn cmd_report(a: &ReportArgs) -> CmdResult {
    let report = load_report(&a.run_dir)?;
    print!("{}", report.to_text());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(Failure::Empty(String::new()).exit_code(), 2);
        assert_eq!(Failure::Error(Error::Numerical(String::new())).exit_code(), 3);
        assert_eq!(Failure::Error(Error::Metadata(String::new())).exit_code(), 1);
    }

    #[test]
    fn header_layout() {
        let h = index_table_header();
        assert_eq!(h.len(), 3 + 2 * N_INDICES);
        assert_eq!(h[3], "H");
        assert_eq!(h[3 + N_INDICES], "t_H");
    }

    #[test]
    fn simulation_spec_parses() {
        let spec: SimulationSpec = toml::from_str(
            "[truth]\nmodel = \"uni\"\nalpha = [1.0, 0.4, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, -0.7]\ntau2 = 0.35\nsigma2 = 2.0\n[layout]\nsites = 4\ntreatment_sites = 2\n",
        )
        .unwrap();
        assert_eq!(spec.layout.sites, 4);
        assert_eq!(spec.layout.days, 4);
        assert!(matches!(spec.truth, Truth::Uni { .. }));
    }

    #[test]
    fn data_hash_depends_on_response() {
        assert_ne!(
            fit_data_hash("abc", ModelKind::Uni, Some("NDSI")),
            fit_data_hash("abc", ModelKind::Uni, Some("H"))
        );
    }
}
