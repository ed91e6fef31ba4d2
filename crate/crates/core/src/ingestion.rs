//! Stimuli, reading measurements and word frequencies from CSV.
//!
//! Schemas (UTF-8, header row, comma separated):
//!
//! * stimuli: `stimulus_id,text`
//! * measurements: `stimulus_id,roi_index[,participant_id],measure,value`
//! * frequencies: `word,count`
//! * surprisal: `stimulus_id,roi_index,convention,focal_spec,focal_yield,surprisal,status`
//!
//! Row numbers in errors are file line numbers, the header being line 1.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{segment_rois, Convention, FocalSpec, RoiSequence, Stimulus, TextError};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{file}: {source}")]
    Csv { file: String, source: csv::Error },
    #[error("{file}: missing column `{column}`")]
    MissingColumn { file: String, column: String },
    #[error("{file} row {row}: {message}")]
    Row { file: String, row: u64, message: String },
    #[error(transparent)]
    Text(#[from] TextError),
}

/// The reading measures the toolkit models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Measure {
    FirstFixationDuration,
    GazeDuration,
    TotalDuration,
    SkipRate,
}

impl Measure {
    pub const ALL: [Measure; 4] =
        [Measure::FirstFixationDuration, Measure::GazeDuration, Measure::TotalDuration, Measure::SkipRate];

    pub fn name(self) -> &'static str {
        match self {
            Measure::FirstFixationDuration => "FirstFixationDuration",
            Measure::GazeDuration => "GazeDuration",
            Measure::TotalDuration => "TotalDuration",
            Measure::SkipRate => "SkipRate",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Measure::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| format!("unknown measure `{s}`"))
    }
}

/// One measurement; `participant` is `None` once averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub stimulus_id: String,
    pub roi_index: usize,
    pub participant: Option<String>,
    pub measure: Measure,
    pub value: f64,
    /// Line in the source file, for error reporting.
    pub row: u64,
    /// Excluded from regressions (first region).
    pub excluded: bool,
}

/// Word counts from a reference corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    counts: HashMap<String, u64>,
    total: u64,
}

/// Frequency-lookup key of a region yield: whitespace removed, lowercased.
pub fn normalize_word(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).flat_map(char::to_lowercase).collect()
}

impl FrequencyTable {
    /// Keys are normalized and merged. `total` defaults to the sum of counts.
    pub fn new(counts: impl IntoIterator<Item = (String, u64)>, total: Option<u64>) -> Result<Self, String> {
        let mut merged: HashMap<String, u64> = HashMap::new();
        for (w, c) in counts {
            if c == 0 {
                return Err(format!("count for `{w}` must be positive"));
            }
            *merged.entry(normalize_word(&w)).or_default() += c;
        }
        let sum: u64 = merged.values().sum();
        let total = total.unwrap_or(sum);
        if let Some(max) = merged.values().max() {
            if *max > total {
                return Err(format!("total {total} is below a single word's count {max}"));
            }
        }
        if total == 0 {
            return Err("frequency table is empty".into());
        }
        Ok(Self { counts: merged, total })
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, word: &str) -> u64 {
        self.counts.get(&normalize_word(word)).copied().unwrap_or(0)
    }

    /// `log10` of occurrences per billion words; unseen words count once.
    pub fn zipf(&self, roi_yield: &str) -> f64 {
        zipf_frequency(self, roi_yield)
    }
}

pub fn zipf_frequency(table: &FrequencyTable, roi_yield: &str) -> f64 {
    let count = table.count(roi_yield).max(1) as f64;
    (count / table.total as f64 * 1e9).log10()
}

/// Stimuli with their regions under each requested convention and the
/// participant-averaged measurements.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub stimuli: Vec<Stimulus>,
    pub rois: BTreeMap<Convention, Vec<RoiSequence>>,
    pub measurements: Vec<MeasurementRecord>,
}

impl DatasetBundle {
    pub fn stimulus_index(&self, id: &str) -> Option<usize> {
        self.stimuli.iter().position(|s| s.id() == id)
    }

    /// Measurement rows not excluded.
    pub fn analyzable(&self) -> impl Iterator<Item = &MeasurementRecord> {
        self.measurements.iter().filter(|m| !m.excluded)
    }
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })
}

struct Table {
    file: String,
    columns: HashMap<String, usize>,
    reader: csv::Reader<Box<dyn Read>>,
}

impl Table {
    fn new(file: &str, input: Box<dyn Read>) -> Result<Self, IngestError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let headers = reader.headers().map_err(|source| IngestError::Csv { file: file.into(), source })?.clone();
        let columns = headers.iter().enumerate().map(|(i, h)| (h.trim().to_string(), i)).collect();
        Ok(Self { file: file.into(), columns, reader })
    }

    fn column(&self, name: &str) -> Result<usize, IngestError> {
        self.columns
            .get(name)
            .copied()
            .ok_or_else(|| IngestError::MissingColumn { file: self.file.clone(), column: name.into() })
    }

    fn rows(&mut self) -> impl Iterator<Item = Result<(u64, csv::StringRecord), IngestError>> + '_ {
        let file = self.file.clone();
        self.reader.records().map(move |r| {
            let rec = r.map_err(|source| IngestError::Csv { file: file.clone(), source })?;
            let line = rec.position().map_or(0, |p| p.line());
            Ok((line, rec))
        })
    }

    fn row_error(&self, row: u64, message: impl Into<String>) -> IngestError {
        IngestError::Row { file: self.file.clone(), row, message: message.into() }
    }
}

pub fn read_stimuli(name: &str, input: impl Read + 'static) -> Result<Vec<Stimulus>, IngestError> {
    let mut t = Table::new(name, Box::new(input))?;
    let (id_col, text_col) = (t.column("stimulus_id")?, t.column("text")?);
    let mut out: Vec<Stimulus> = Vec::new();
    let rows: Vec<_> = t.rows().collect::<Result<_, _>>()?;
    for (row, rec) in rows {
        let id = rec.get(id_col).unwrap_or("").to_string();
        let text = rec.get(text_col).unwrap_or("").to_string();
        if out.iter().any(|s| s.id() == id) {
            return Err(t.row_error(row, format!("duplicate stimulus_id `{id}`")));
        }
        let stim = Stimulus::new(id, text).map_err(|e| t.row_error(row, e.to_string()))?;
        out.push(stim);
    }
    Ok(out)
}

/// Reads raw measurement rows and checks them against the stimuli's regions.
/// Without a participant column, repeated `(stimulus, roi, measure)` keys
/// are rejected.
pub fn read_measurements(
    name: &str,
    input: impl Read + 'static,
    region_counts: &HashMap<String, usize>,
) -> Result<Vec<MeasurementRecord>, IngestError> {
    let mut t = Table::new(name, Box::new(input))?;
    let sid = t.column("stimulus_id")?;
    let roi = t.column("roi_index")?;
    let measure_col = t.column("measure")?;
    let value_col = t.column("value")?;
    let participant_col = t.columns.get("participant_id").copied();
    let rows: Vec<_> = t.rows().collect::<Result<_, _>>()?;
    let mut seen: HashMap<(String, usize, Measure, Option<String>), u64> = HashMap::new();
    let mut out = Vec::with_capacity(rows.len());
    for (row, rec) in rows {
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let stimulus_id = field(sid).to_string();
        let Some(&count) = region_counts.get(&stimulus_id) else {
            return Err(t.row_error(row, format!("unknown stimulus_id `{stimulus_id}`")));
        };
        let roi_index: usize =
            field(roi).parse().map_err(|_| t.row_error(row, format!("roi_index `{}` is not a positive integer", field(roi))))?;
        if roi_index == 0 || roi_index > count {
            return Err(t.row_error(row, format!("roi_index {roi_index} out of range 1..={count} for `{stimulus_id}`")));
        }
        let measure: Measure = field(measure_col).parse().map_err(|e: String| t.row_error(row, e))?;
        let value: f64 =
            field(value_col).parse().map_err(|_| t.row_error(row, format!("value `{}` is not numeric", field(value_col))))?;
        if !value.is_finite() {
            return Err(t.row_error(row, format!("value {value} is not finite")));
        }
        if measure == Measure::SkipRate && !(0.0..=1.0).contains(&value) {
            return Err(t.row_error(row, format!("skip rate {value} outside [0, 1]")));
        }
        let participant = participant_col.map(|c| field(c).to_string()).filter(|p| !p.is_empty());
        let key = (stimulus_id.clone(), roi_index, measure, participant.clone());
        if let Some(first) = seen.insert(key, row) {
            return Err(t.row_error(row, format!("duplicate of row {first}")));
        }
        out.push(MeasurementRecord { stimulus_id, roi_index, participant, measure, value, row, excluded: false });
    }
    Ok(out)
}

pub fn read_frequencies(name: &str, input: impl Read + 'static) -> Result<FrequencyTable, IngestError> {
    let mut t = Table::new(name, Box::new(input))?;
    let (wc, cc) = (t.column("word")?, t.column("count")?);
    let rows: Vec<_> = t.rows().collect::<Result<_, _>>()?;
    let mut counts = Vec::with_capacity(rows.len());
    for (row, rec) in rows {
        let word = rec.get(wc).unwrap_or("").to_string();
        let raw = rec.get(cc).unwrap_or("").trim();
        let count: u64 = raw.parse().map_err(|_| t.row_error(row, format!("count `{raw}` is not a non-negative integer")))?;
        if count == 0 {
            return Err(t.row_error(row, "count must be positive"));
        }
        counts.push((word, count));
    }
    FrequencyTable::new(counts, None).map_err(|e| t.row_error(0, e))
}

/// Mean value per `(stimulus, roi, measure)`; skip indicators become
/// skip rates. Output is sorted by key; the row of the first contributing
/// record is kept.
pub fn average_participants(records: &[MeasurementRecord]) -> Vec<MeasurementRecord> {
    let mut groups: BTreeMap<(String, usize, Measure), (f64, usize, u64, bool)> = BTreeMap::new();
    for r in records {
        let g = groups.entry((r.stimulus_id.clone(), r.roi_index, r.measure)).or_insert((0.0, 0, r.row, false));
        g.0 += r.value;
        g.1 += 1;
        g.2 = g.2.min(r.row);
        g.3 |= r.excluded;
    }
    groups
        .into_iter()
        .map(|((stimulus_id, roi_index, measure), (sum, n, row, excluded))| MeasurementRecord {
            stimulus_id,
            roi_index,
            participant: None,
            measure,
            value: sum / n as f64,
            row,
            excluded,
        })
        .collect()
}

/// Marks every first-region row excluded. Warns about stimuli with a
/// single region, which have nothing left to analyze.
pub fn skip_first_roi(mut bundle: DatasetBundle) -> DatasetBundle {
    for m in &mut bundle.measurements {
        if m.roi_index == 1 {
            m.excluded = true;
        }
    }
    if let Some(seqs) = bundle.rois.values().next() {
        for seq in seqs.iter().filter(|s| s.len() == 1) {
            log::warn!("stimulus `{}` has a single region; no analyzable rows", seq.stimulus().id());
        }
    }
    bundle
}

/// Loads stimuli and measurements, segments every stimulus under each
/// convention, averages over participants and excludes first regions.
pub fn load_dataset(
    stimuli_path: &Path,
    measurements_path: &Path,
    conventions: &[Convention],
) -> Result<DatasetBundle, IngestError> {
    let stimuli = read_stimuli(&stimuli_path.display().to_string(), open(stimuli_path)?)?;
    load_dataset_with(stimuli, &measurements_path.display().to_string(), open(measurements_path)?, conventions)
}

pub fn load_dataset_with(
    stimuli: Vec<Stimulus>,
    measurements_name: &str,
    measurements: impl Read + 'static,
    conventions: &[Convention],
) -> Result<DatasetBundle, IngestError> {
    let mut rois = BTreeMap::new();
    let mut counts = HashMap::new();
    for &conv in conventions {
        let seqs = stimuli.iter().map(|s| segment_rois(s, conv)).collect::<Result<Vec<_>, _>>()?;
        for seq in &seqs {
            counts.insert(seq.stimulus().id().to_string(), seq.len());
        }
        rois.insert(conv, seqs);
    }
    if conventions.is_empty() {
        for s in &stimuli {
            counts.insert(s.id().to_string(), segment_rois(s, Convention::TrailingWhitespace)?.len());
        }
    }
    let raw = read_measurements(measurements_name, measurements, &counts)?;
    let measurements = average_participants(&raw);
    Ok(skip_first_roi(DatasetBundle { stimuli, rois, measurements }))
}

pub fn load_frequencies(path: &Path) -> Result<FrequencyTable, IngestError> {
    read_frequencies(&path.display().to_string(), open(path)?)
}

/// One row of a surprisal table file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurprisalRecord {
    pub stimulus_id: String,
    pub roi_index: usize,
    pub convention: Convention,
    pub focal_spec: FocalSpec,
    pub focal_yield: String,
    pub surprisal: Option<f64>,
    pub status: String,
}

pub const SURPRISAL_COLUMNS: [&str; 7] =
    ["stimulus_id", "roi_index", "convention", "focal_spec", "focal_yield", "surprisal", "status"];

pub fn write_surprisal<W: Write>(out: W, records: &[SurprisalRecord]) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(SURPRISAL_COLUMNS)?;
    for r in records {
        let surprisal = r.surprisal.map(|s| s.to_string()).unwrap_or_default();
        w.write_record([
            r.stimulus_id.as_str(),
            &r.roi_index.to_string(),
            r.convention.name(),
            &r.focal_spec.to_string(),
            &r.focal_yield,
            &surprisal,
            &r.status,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_surprisal(name: &str, input: impl Read + 'static) -> Result<Vec<SurprisalRecord>, IngestError> {
    let mut t = Table::new(name, Box::new(input))?;
    let cols = SURPRISAL_COLUMNS.map(|c| t.column(c));
    let [sid, roi, conv, spec, yld, surp, status] = cols;
    let (sid, roi, conv, spec, yld, surp, status) = (sid?, roi?, conv?, spec?, yld?, surp?, status?);
    let rows: Vec<_> = t.rows().collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(rows.len());
    for (row, rec) in rows {
        let field = |i: usize| rec.get(i).unwrap_or("");
        let bad = |m: String| t.row_error(row, m);
        let surprisal = match field(surp).trim() {
            "" => None,
            s => Some(s.parse::<f64>().map_err(|_| bad(format!("surprisal `{s}` is not numeric")))?),
        };
        out.push(SurprisalRecord {
            stimulus_id: field(sid).to_string(),
            roi_index: field(roi).trim().parse().map_err(|_| bad(format!("roi_index `{}`", field(roi))))?,
            convention: field(conv).trim().parse().map_err(|e: TextError| bad(e.to_string()))?,
            focal_spec: field(spec).trim().parse().map_err(|e: TextError| bad(e.to_string()))?,
            focal_yield: field(yld).to_string(),
            surprisal,
            status: field(status).trim().to_string(),
        });
    }
    Ok(out)
}

pub fn load_surprisal(path: &Path) -> Result<Vec<SurprisalRecord>, IngestError> {
    read_surprisal(&path.display().to_string(), open(path)?)
}
