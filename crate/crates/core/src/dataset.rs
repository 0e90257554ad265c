//! Recording metadata, repeated-measures grouping, design matrices and
//! synthetic datasets.
//!
//! An *individual* is one (site, calendar day, time of day) soundscape
//! observed in one or more years. Individuals are ordered by site, day, time
//! and then year, and in the multivariate layout the index varies fastest.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use chrono::{Datelike, NaiveDateTime, NaiveTime, Timelike};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::indices::INDEX_NAMES;
use crate::sampling::{seeded_rng, standard_normal};

/// Study span and the first year with post-treatment effects.
///
/// Design columns: intercept, treatment site, one indicator per effect
/// year, one treatment-by-year interaction per effect year, rain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearConfig {
    pub first_year: i32,
    pub last_year: i32,
    pub treatment_start: i32,
}

impl Default for YearConfig {
    fn default() -> Self {
        Self {
            first_year: 2009,
            last_year: 2018,
            treatment_start: 2014,
        }
    }
}

impl YearConfig {
    pub fn validate(&self) -> Result<()> {
        if self.first_year > self.last_year
            || self.treatment_start <= self.first_year
            || self.treatment_start > self.last_year
        {
            return Err(Error::InvalidParameter(format!(
                "inconsistent year span {}..={} with treatment start {}",
                self.first_year, self.last_year, self.treatment_start
            )));
        }
        Ok(())
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.first_year..=self.last_year).contains(&year)
    }

    pub fn effect_years(&self) -> std::ops::RangeInclusive<i32> {
        self.treatment_start..=self.last_year
    }

    pub fn n_effect_years(&self) -> usize {
        (self.last_year - self.treatment_start + 1) as usize
    }

    /// Width of the univariate design matrix (13 with the default span).
    pub fn n_columns(&self) -> usize {
        3 + 2 * self.n_effect_years()
    }

    pub fn columns(&self) -> Vec<DesignColumn> {
        let mut cols = vec![DesignColumn::Intercept, DesignColumn::Inherent];
        cols.extend(self.effect_years().map(DesignColumn::Year));
        cols.extend(self.effect_years().map(DesignColumn::TreatmentYear));
        cols.push(DesignColumn::Rain);
        cols
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DesignColumn {
    Intercept,
    /// Control-versus-treatment difference not caused by the treatment.
    Inherent,
    Year(i32),
    TreatmentYear(i32),
    Rain,
}

impl DesignColumn {
    pub fn describe(&self) -> String {
        match self {
            DesignColumn::Intercept => "intercept".into(),
            DesignColumn::Inherent => "inherent difference".into(),
            DesignColumn::Year(y) => format!("year {y}"),
            DesignColumn::TreatmentYear(y) => format!("treatment effect {y}"),
            DesignColumn::Rain => "rain".into(),
        }
    }
}

/// Recording-level metadata; `index_values` holds transformed responses once
/// indices have been computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingMeta {
    pub recording_id: String,
    pub site_id: String,
    pub datetime: NaiveDateTime,
    pub treatment: bool,
    pub rain: bool,
    pub wav_path: String,
    #[serde(default)]
    pub index_values: Vec<f64>,
}

impl RecordingMeta {
    pub fn year(&self) -> i32 {
        self.datetime.year()
    }

    pub fn key(&self) -> IndividualKey {
        IndividualKey {
            site: self.site_id.clone(),
            month: self.datetime.month(),
            day: self.datetime.day(),
            time: format!("{:02}:{:02}", self.datetime.hour(), self.datetime.minute()),
        }
    }
}

/// Recording times accepted into the analysis (inclusive bounds).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisWindow {
    pub start: NaiveTime,
    pub end: NaiveTime,
    /// Calendar months; empty accepts every month.
    pub months: Vec<u32>,
}

impl Default for AnalysisWindow {
    fn default() -> Self {
        Self {
            start: NaiveTime::from_hms_opt(5, 30, 0).unwrap(),
            end: NaiveTime::from_hms_opt(7, 30, 0).unwrap(),
            months: vec![6],
        }
    }
}

impl AnalysisWindow {
    pub fn accepts(&self, dt: &NaiveDateTime) -> bool {
        let t = dt.time();
        t >= self.start
            && t <= self.end
            && (self.months.is_empty() || self.months.contains(&dt.month()))
    }
}

#[derive(Debug, Deserialize)]
struct MetadataRow {
    site_id: String,
    datetime: String,
    treatment: u8,
    rain: u8,
    wav_path: String,
}

fn parse_datetime(s: &str) -> Result<NaiveDateTime> {
    let s = s.trim();
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(dt);
        }
    }
    Err(Error::Metadata(format!("cannot parse datetime '{s}'")))
}

fn flag(v: u8, what: &str) -> Result<bool> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        _ => Err(Error::Metadata(format!("{what} must be 0 or 1, got {v}"))),
    }
}

/// Parse metadata (`site_id,datetime,treatment,rain,wav_path`, with header).
pub fn read_metadata(reader: impl Read) -> Result<Vec<RecordingMeta>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (line, row) in rdr.deserialize::<MetadataRow>().enumerate() {
        let row = row.map_err(|e| Error::Metadata(format!("row {}: {e}", line + 1)))?;
        out.push(RecordingMeta {
            recording_id: row.wav_path.clone(),
            site_id: row.site_id,
            datetime: parse_datetime(&row.datetime)?,
            treatment: flag(row.treatment, "treatment")?,
            rain: flag(row.rain, "rain")?,
            wav_path: row.wav_path,
            index_values: Vec::new(),
        });
    }
    Ok(out)
}

pub fn read_metadata_file(path: impl AsRef<Path>) -> Result<Vec<RecordingMeta>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Metadata(format!("{}: {e}", path.display())))?;
    read_metadata(file)
}

/// Identity of a repeated-measures unit. Derived ordering is the stacking
/// order: site label, month, day, then zero-padded `HH:MM`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IndividualKey {
    pub site: String,
    pub month: u32,
    pub day: u32,
    pub time: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub year: i32,
    pub rain: bool,
    pub recording_id: String,
    /// Transformed index values, in the dataset's `index_names` order.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualSoundscape {
    pub key: IndividualKey,
    pub treatment: bool,
    /// Sorted by year, years distinct.
    pub observations: Vec<Observation>,
}

impl IndividualSoundscape {
    /// Number of years this individual was recorded.
    pub fn t(&self) -> usize {
        self.observations.len()
    }

    pub fn years(&self) -> Vec<i32> {
        self.observations.iter().map(|o| o.year).collect()
    }
}

/// Group recordings into individuals, sorted into stacking order.
pub fn group_individuals(meta: &[RecordingMeta]) -> Result<Vec<IndividualSoundscape>> {
    let mut groups: BTreeMap<IndividualKey, IndividualSoundscape> = BTreeMap::new();
    for m in meta {
        let key = m.key();
        let ind = groups.entry(key.clone()).or_insert_with(|| IndividualSoundscape {
            key: key.clone(),
            treatment: m.treatment,
            observations: Vec::new(),
        });
        if ind.treatment != m.treatment {
            return Err(Error::Metadata(format!(
                "site {} is marked both treatment and control",
                m.site_id
            )));
        }
        if ind.observations.iter().any(|o| o.year == m.year()) {
            return Err(Error::DuplicateRecording(format!(
                "{} {:02}-{:02} {} {}",
                key.site,
                key.month,
                key.day,
                key.time,
                m.year()
            )));
        }
        ind.observations.push(Observation {
            year: m.year(),
            rain: m.rain,
            recording_id: m.recording_id.clone(),
            values: m.index_values.clone(),
        });
    }
    Ok(groups
        .into_values()
        .map(|mut ind| {
            ind.observations.sort_by_key(|o| o.year);
            ind
        })
        .collect())
}

/// Univariate design matrix for one individual (`t` rows, 0/1 entries).
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrixUni {
    pub matrix: DMatrix<f64>,
}

pub fn build_design_uni(ind: &IndividualSoundscape, years: &YearConfig) -> Result<DesignMatrixUni> {
    let cols = years.columns();
    let mut m = DMatrix::zeros(ind.t(), cols.len());
    for (r, obs) in ind.observations.iter().enumerate() {
        if !years.contains(obs.year) {
            return Err(Error::YearRange {
                year: obs.year,
                first: years.first_year,
                last: years.last_year,
            });
        }
        for (c, col) in cols.iter().enumerate() {
            let on = match *col {
                DesignColumn::Intercept => true,
                DesignColumn::Inherent => ind.treatment,
                DesignColumn::Year(y) => obs.year == y,
                DesignColumn::TreatmentYear(y) => ind.treatment && obs.year == y,
                DesignColumn::Rain => obs.rain,
            };
            if on {
                m[(r, c)] = 1.0;
            }
        }
    }
    Ok(DesignMatrixUni { matrix: m })
}

/// Multivariate design for one individual with `d` responses per year.
///
/// Rows run index-fastest within year. Coefficient `k * p + c` is univariate
/// column `c` for index `k`, so `x2 = X1 (kron) I_d` up to a column permutation
/// and `x2' x2` is block diagonal with one `p x p` block per index.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrixMulti {
    pub x2: DMatrix<f64>,
    /// Random-effects design: `t` stacked `d x d` identities.
    pub w: DMatrix<f64>,
    pub y: DVector<f64>,
}

pub fn build_design_multi(
    ind: &IndividualSoundscape,
    years: &YearConfig,
    d: usize,
) -> Result<DesignMatrixMulti> {
    let x1 = build_design_uni(ind, years)?.matrix;
    let p = x1.ncols();
    let t = ind.t();
    let mut x2 = DMatrix::zeros(d * t, p * d);
    let mut w = DMatrix::zeros(d * t, d);
    let mut y = DVector::zeros(d * t);
    for (s, obs) in ind.observations.iter().enumerate() {
        if obs.values.len() != d || obs.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::MissingResponse(format!(
                "{} year {}: expected {d} finite values, found {}",
                obs.recording_id,
                obs.year,
                obs.values.len()
            )));
        }
        for k in 0..d {
            let row = s * d + k;
            w[(row, k)] = 1.0;
            y[row] = obs.values[k];
            for c in 0..p {
                x2[(row, k * p + c)] = x1[(s, c)];
            }
        }
    }
    Ok(DesignMatrixMulti { x2, w, y })
}

/// Individuals in stacking order together with the study configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssembledDataset {
    pub index_names: Vec<String>,
    pub years: YearConfig,
    pub individuals: Vec<IndividualSoundscape>,
}

impl AssembledDataset {
    pub fn new(
        index_names: Vec<String>,
        years: YearConfig,
        individuals: Vec<IndividualSoundscape>,
    ) -> Result<Self> {
        years.validate()?;
        Ok(Self {
            index_names,
            years,
            individuals,
        })
    }

    pub fn n_individuals(&self) -> usize {
        self.individuals.len()
    }

    pub fn n_recordings(&self) -> usize {
        self.individuals.iter().map(IndividualSoundscape::t).sum()
    }

    pub fn n_indices(&self) -> usize {
        self.index_names.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index_names.iter().position(|n| n.eq_ignore_ascii_case(name))
    }

    /// Recordings per (site, year).
    pub fn counts(&self) -> BTreeMap<(String, i32), usize> {
        let mut out = BTreeMap::new();
        for ind in &self.individuals {
            for o in &ind.observations {
                *out.entry((ind.key.site.clone(), o.year)).or_insert(0) += 1;
            }
        }
        out
    }

    /// One response stacked site, day, time, year.
    pub fn stack_response(&self, index: usize) -> Vec<f64> {
        self.individuals
            .iter()
            .flat_map(|ind| ind.observations.iter().map(move |o| o.values[index]))
            .collect()
    }

    /// All responses stacked site, day, time, year, index.
    pub fn stack_all(&self) -> Vec<f64> {
        self.individuals
            .iter()
            .flat_map(|ind| ind.observations.iter().flat_map(|o| o.values.iter().copied()))
            .collect()
    }

    /// Inverse of [`stack_all`](Self::stack_all): per individual, per year.
    pub fn unstack_all(&self, stacked: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
        let d = self.n_indices();
        if stacked.len() != self.n_recordings() * d {
            return Err(Error::InvalidParameter(format!(
                "expected {} stacked values, got {}",
                self.n_recordings() * d,
                stacked.len()
            )));
        }
        let mut chunks = stacked.chunks(d);
        Ok(self
            .individuals
            .iter()
            .map(|ind| {
                (0..ind.t())
                    .map(|_| chunks.next().map(<[f64]>::to_vec).unwrap_or_default())
                    .collect()
            })
            .collect())
    }

    /// SHA-256 over the canonical JSON encoding.
    pub fn data_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("dataset serializes");
        hex::encode(Sha256::digest(bytes))
    }

    /// Audit export: the dataset plus each individual's design matrix.
    pub fn to_audit_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct AuditIndividual<'a> {
            #[serde(flatten)]
            individual: &'a IndividualSoundscape,
            t: usize,
            design: Vec<Vec<u8>>,
        }
        #[derive(Serialize)]
        struct Audit<'a> {
            index_names: &'a [String],
            years: &'a YearConfig,
            design_columns: Vec<String>,
            n_individuals: usize,
            n_recordings: usize,
            individuals: Vec<AuditIndividual<'a>>,
        }
        let individuals = self
            .individuals
            .iter()
            .map(|ind| {
                let m = build_design_uni(ind, &self.years)?.matrix;
                let design = (0..m.nrows())
                    .map(|r| (0..m.ncols()).map(|c| m[(r, c)] as u8).collect())
                    .collect();
                Ok(AuditIndividual {
                    individual: ind,
                    t: ind.t(),
                    design,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let audit = Audit {
            index_names: &self.index_names,
            years: &self.years,
            design_columns: self.years.columns().iter().map(DesignColumn::describe).collect(),
            n_individuals: self.n_individuals(),
            n_recordings: self.n_recordings(),
            individuals,
        };
        Ok(serde_json::to_string_pretty(&audit)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_audit_json()?)?;
        Ok(())
    }

    /// Load a dataset written by [`save`](Self::save); design matrices in the
    /// file are ignored and rebuilt on demand.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let ds: AssembledDataset = serde_json::from_str(&text)?;
        ds.years.validate()?;
        Ok(ds)
    }
}

/// Expected recordings per (site, year), with an optional stated total.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    pub cells: BTreeMap<(String, i32), usize>,
    pub stated_total: Option<usize>,
}

impl CountTable {
    /// Override a single cell, e.g. to correct a transcription error.
    pub fn set(&mut self, site: &str, year: i32, n: usize) {
        self.cells.insert((site.to_string(), year), n);
    }

    pub fn total(&self) -> usize {
        self.cells.values().sum()
    }

    /// Recording counts of the 2009-2018 Twin Lakes campaign, cell by cell,
    /// with 11,556 as the stated total. The cells do not add up to it: LA03/2018
    /// reads 590 where the 2018 total implies 150, and a few other rows and
    /// columns are off. Correct cells with [`set`](Self::set).
    pub fn twin_lakes() -> Self {
        const YEARS: [i32; 10] = [2009, 2010, 2011, 2012, 2013, 2014, 2015, 2016, 2017, 2018];
        const ROWS: [(&str, [usize; 10]); 13] = [
            ("LA00", [114, 150, 150, 150, 150, 150, 95, 150, 150, 150]),
            ("LA01", [121, 150, 150, 0, 150, 150, 150, 150, 150, 150]),
            ("LA02", [140, 150, 150, 0, 0, 0, 0, 0, 0, 0]),
            ("LA03", [150, 150, 150, 150, 150, 150, 150, 0, 150, 590]),
            ("LA04", [150, 150, 150, 150, 0, 0, 0, 0, 0, 0]),
            ("LA05", [148, 150, 150, 150, 0, 0, 0, 0, 0, 0]),
            ("LA06", [147, 150, 150, 0, 0, 0, 150, 150, 120, 150]),
            ("LA07", [0, 0, 150, 150, 150, 150, 150, 0, 0, 0]),
            ("LA08", [0, 0, 150, 150, 150, 150, 80, 0, 0, 0]),
            ("LA09", [0, 0, 0, 0, 150, 110, 150, 49, 130, 145]),
            ("LA10", [0, 0, 0, 0, 150, 110, 150, 150, 130, 145]),
            ("LA11", [0, 0, 0, 0, 150, 110, 150, 150, 130, 136]),
            ("LA12", [0, 0, 0, 0, 150, 110, 150, 150, 140, 145]),
        ];
        let mut t = CountTable {
            stated_total: Some(11_556),
            ..Default::default()
        };
        for (site, row) in ROWS {
            for (y, n) in YEARS.iter().zip(row) {
                t.set(site, *y, n);
            }
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellCheck {
    pub site: String,
    pub year: i32,
    pub expected: usize,
    pub observed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CountReport {
    pub cells: Vec<CellCheck>,
    pub observed_total: usize,
    pub expected_total: usize,
    pub stated_total: Option<usize>,
}

impl CountReport {
    pub fn mismatches(&self) -> impl Iterator<Item = &CellCheck> {
        self.cells.iter().filter(|c| c.expected != c.observed)
    }

    pub fn is_consistent(&self) -> bool {
        self.mismatches().next().is_none()
            && self.observed_total == self.expected_total
            && self.stated_total.map_or(true, |s| s == self.observed_total)
    }
}

pub fn validate_counts(data: &AssembledDataset, expected: &CountTable) -> CountReport {
    let observed = data.counts();
    let mut keys: Vec<_> = expected.cells.keys().chain(observed.keys()).cloned().collect();
    keys.sort();
    keys.dedup();
    let cells = keys
        .into_iter()
        .map(|(site, year)| {
            let key = (site.clone(), year);
            CellCheck {
                expected: expected.cells.get(&key).copied().unwrap_or(0),
                observed: observed.get(&key).copied().unwrap_or(0),
                site,
                year,
            }
        })
        .collect();
    CountReport {
        cells,
        observed_total: data.n_recordings(),
        expected_total: expected.total(),
        stated_total: expected.stated_total,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteSpec {
    pub id: String,
    pub treatment: bool,
}

/// Shape of a synthetic study: which individuals exist and when they were
/// recorded. Each individual draws `t` uniformly from
/// `min_years..=max_years` and then `t` distinct years from the span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub sites: Vec<SiteSpec>,
    pub days: u32,
    pub times: Vec<String>,
    #[serde(default)]
    pub years: YearConfig,
    pub min_years: usize,
    pub max_years: usize,
    pub rain_probability: f64,
}

impl Layout {
    /// `n_sites` sites named `LA00`, `LA01`, ..., the last `n_treatment` of
    /// which are treatment sites.
    pub fn with_sites(n_sites: usize, n_treatment: usize, days: u32, times: &[&str]) -> Self {
        let sites = (0..n_sites)
            .map(|i| SiteSpec {
                id: format!("LA{i:02}"),
                treatment: i >= n_sites.saturating_sub(n_treatment),
            })
            .collect();
        Self {
            sites,
            days,
            times: times.iter().map(|s| s.to_string()).collect(),
            years: YearConfig::default(),
            min_years: 1,
            max_years: 6,
            rain_probability: 0.2,
        }
    }

    pub fn n_individuals(&self) -> usize {
        self.sites.len() * self.days as usize * self.times.len()
    }

    fn validate(&self) -> Result<()> {
        self.years.validate()?;
        let span = (self.years.last_year - self.years.first_year + 1) as usize;
        if self.min_years == 0 || self.min_years > self.max_years || self.max_years > span {
            return Err(Error::InvalidParameter(format!(
                "years per individual must satisfy 1 <= {} <= {} <= {span}",
                self.min_years, self.max_years
            )));
        }
        if !(0.0..=1.0).contains(&self.rain_probability) {
            return Err(Error::InvalidParameter("rain_probability must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Parameter values that generate synthetic responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum Truth {
    /// `alpha` has one entry per design column.
    Uni { alpha: Vec<f64>, tau2: f64, sigma2: f64 },
    /// `alpha` is index-major (`k * p + c`); `lambda` is `d x d` row-major.
    Multi {
        alpha: Vec<f64>,
        lambda: Vec<f64>,
        sigma2: f64,
    },
}

impl Truth {
    pub fn n_indices(&self) -> usize {
        match self {
            Truth::Uni { .. } => 1,
            Truth::Multi { lambda, .. } => (lambda.len() as f64).sqrt().round() as usize,
        }
    }

    pub fn index_names(&self) -> Vec<String> {
        match self.n_indices() {
            1 => vec!["NDSI".to_string()],
            d if d == INDEX_NAMES.len() => INDEX_NAMES.iter().map(|s| s.to_string()).collect(),
            d => (1..=d).map(|k| format!("Y{k}")).collect(),
        }
    }
}

/// Realize a layout (keys, years, rain) without responses.
pub fn simulate_layout<R: Rng + ?Sized>(layout: &Layout, rng: &mut R) -> Result<AssembledDataset> {
    layout.validate()?;
    let all_years: Vec<i32> = (layout.years.first_year..=layout.years.last_year).collect();
    let mut individuals = Vec::with_capacity(layout.n_individuals());
    for site in &layout.sites {
        for day in 1..=layout.days {
            for time in &layout.times {
                let t = rng.gen_range(layout.min_years..=layout.max_years);
                let mut years: Vec<i32> = all_years.choose_multiple(rng, t).copied().collect();
                years.sort_unstable();
                let key = IndividualKey {
                    site: site.id.clone(),
                    month: 6,
                    day,
                    time: time.clone(),
                };
                let observations = years
                    .into_iter()
                    .map(|year| Observation {
                        year,
                        rain: rng.gen_bool(layout.rain_probability),
                        recording_id: format!("{}_{:02}_{}_{year}", site.id, day, time.replace(':', "")),
                        values: Vec::new(),
                    })
                    .collect();
                individuals.push(IndividualSoundscape {
                    key,
                    treatment: site.treatment,
                    observations,
                });
            }
        }
    }
    individuals.sort_by(|a, b| a.key.cmp(&b.key));
    AssembledDataset::new(Vec::new(), layout.years, individuals)
}

/// Replace every response in `data` with a draw from the model's
/// data-generating process under `truth`.
pub fn simulate_responses<R: Rng + ?Sized>(
    data: &mut AssembledDataset,
    truth: &Truth,
    rng: &mut R,
) -> Result<()> {
    let p = data.years.n_columns();
    let d = truth.n_indices();
    let (alpha, sigma2) = match truth {
        Truth::Uni { alpha, sigma2, .. } | Truth::Multi { alpha, sigma2, .. } => (alpha, *sigma2),
    };
    if alpha.len() != p * d {
        return Err(Error::InvalidParameter(format!(
            "truth has {} coefficients, layout needs {}",
            alpha.len(),
            p * d
        )));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter("sigma2 must be positive".into()));
    }
    let re_chol = match truth {
        Truth::Uni { tau2, .. } => {
            if !(*tau2 > 0.0) {
                return Err(Error::InvalidParameter("tau2 must be positive".into()));
            }
            DMatrix::from_element(1, 1, tau2.sqrt())
        }
        Truth::Multi { lambda, .. } => {
            if lambda.len() != d * d {
                return Err(Error::Covariance("lambda must be square".into()));
            }
            let m = DMatrix::from_row_slice(d, d, lambda);
            if (&m - m.transpose()).abs().max() > 1e-12 * m.abs().max().max(1.0) {
                return Err(Error::Covariance("lambda is not symmetric".into()));
            }
            m.cholesky()
                .ok_or_else(|| Error::Covariance("lambda is not positive definite".into()))?
                .l()
        }
    };
    let sd = sigma2.sqrt();
    data.index_names = truth.index_names();
    let years = data.years;
    for ind in &mut data.individuals {
        let x = build_design_uni(ind, &years)?.matrix;
        let z = DVector::from_fn(d, |_, _| standard_normal(rng));
        let beta = &re_chol * z;
        for (s, obs) in ind.observations.iter_mut().enumerate() {
            obs.values = (0..d)
                .map(|k| {
                    let mean: f64 = (0..p).map(|c| x[(s, c)] * alpha[k * p + c]).sum();
                    mean + beta[k] + sd * standard_normal(rng)
                })
                .collect();
        }
    }
    Ok(())
}

/// Layout plus responses, reproducible from `seed`.
pub fn simulate_dataset(truth: &Truth, layout: &Layout, seed: u64) -> Result<AssembledDataset> {
    let mut rng = seeded_rng(seed, 0);
    let mut data = simulate_layout(layout, &mut rng)?;
    simulate_responses(&mut data, truth, &mut rng)?;
    Ok(data)
}

/// Drop observations whose responses are incomplete or non-finite, and
/// individuals left with none. Returns the recording ids removed.
pub fn drop_incomplete(data: &mut AssembledDataset) -> Vec<String> {
    let d = data.n_indices();
    let mut dropped = Vec::new();
    for ind in &mut data.individuals {
        ind.observations.retain(|o| {
            let ok = o.values.len() == d && o.values.iter().all(|v| v.is_finite());
            if !ok {
                dropped.push(o.recording_id.clone());
            }
            ok
        });
    }
    data.individuals.retain(|i| i.t() > 0);
    dropped
}
