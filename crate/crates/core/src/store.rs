//! Embedded file-backed dataset store.
//!
//! Layout under the store root:
//!
//! ```text
//! manifest.json          {"version":1,"datasets":{"<name>":{...meta...}}}
//! data/<file>.csv        timestamp,value   (epoch-ms, shortest round-trip float)
//! ```
//!
//! The manifest is rewritten atomically (temp file + rename) on every ingest.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{AnomalyWindow, DatasetError, TimeSeriesDataset};

pub const MANIFEST_VERSION: u32 = 1;
const MANIFEST_FILE: &str = "manifest.json";
const DATA_DIR: &str = "data";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store path {path} is not accessible: {source}")]
    PathInaccessible { path: PathBuf, source: io::Error },
    #[error("manifest is corrupt: {0}")]
    ManifestCorrupt(String),
    #[error("manifest version {found} is not supported (expected {MANIFEST_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("dataset {0:?} already exists")]
    DuplicateName(String),
    #[error("input file has no data rows")]
    EmptyFile,
    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),
    #[error("invalid range: start {start} is after end {end}")]
    InvalidRange { start: i64, end: i64 },
    #[error("labels file has no entry for {0:?}")]
    LabelsNotFound(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub n_points: usize,
    pub t_min: i64,
    pub t_max: i64,
    pub has_labels: bool,
    /// Data file path relative to the store root.
    pub source_file: String,
    #[serde(default)]
    pub windows: Vec<AnomalyWindow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    datasets: BTreeMap<String, DatasetMeta>,
}

impl Default for Manifest {
    fn default() -> Self {
        Self {
            version: MANIFEST_VERSION,
            datasets: BTreeMap::new(),
        }
    }
}

/// Handle to an opened store root.
#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
    manifest: Manifest,
}

impl Store {
    /// Opens (creating if needed) the store at `root` and loads its manifest.
    pub fn connect(root: impl AsRef<Path>) -> Result<Self, StoreError> {
        let root = root.as_ref().to_path_buf();
        let inaccessible = |source| StoreError::PathInaccessible {
            path: root.clone(),
            source,
        };
        fs::create_dir_all(&root).map_err(inaccessible)?;
        fs::read_dir(&root).map_err(inaccessible)?;

        let manifest_path = root.join(MANIFEST_FILE);
        let manifest = match fs::read_to_string(&manifest_path) {
            Ok(text) => parse_manifest(&text)?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Manifest::default(),
            Err(e) => return Err(inaccessible(e)),
        };
        for meta in manifest.datasets.values() {
            if !root.join(&meta.source_file).is_file() {
                return Err(StoreError::ManifestCorrupt(format!(
                    "data file {} for {:?} is missing",
                    meta.source_file, meta.name
                )));
            }
        }
        Ok(Self { root, manifest })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn datasets(&self) -> impl Iterator<Item = &DatasetMeta> {
        self.manifest.datasets.values()
    }

    pub fn meta(&self, name: &str) -> Option<&DatasetMeta> {
        self.manifest.datasets.get(name)
    }

    /// Reads `csv` (header `timestamp,value`) and optional NAB-style labels,
    /// persists the dataset and commits the manifest.
    pub fn ingest_csv(
        &mut self,
        name: &str,
        csv: &Path,
        labels: Option<&Path>,
    ) -> Result<DatasetMeta, StoreError> {
        if self.manifest.datasets.contains_key(name) {
            return Err(StoreError::DuplicateName(name.to_string()));
        }
        let (timestamps, values) = read_series_csv(csv)?;
        let (t_min, t_max) = (timestamps[0], timestamps[timestamps.len() - 1]);
        let windows = match labels {
            Some(path) => {
                let file_name = csv.file_name().and_then(|s| s.to_str()).unwrap_or(name);
                read_label_windows(path, name, file_name)?
                    .into_iter()
                    .filter_map(|w| w.clip(t_min, t_max))
                    .collect()
            }
            None => Vec::new(),
        };
        let ds = TimeSeriesDataset::new(name, timestamps, values, windows)?;

        let source_file = self.allocate_file_name(name);
        let data_path = self.root.join(&source_file);
        fs::create_dir_all(data_path.parent().expect("data dir"))?;
        write_atomic(&data_path, render_series_csv(&ds).as_bytes())?;

        let meta = DatasetMeta {
            name: name.to_string(),
            n_points: ds.len(),
            t_min,
            t_max,
            has_labels: ds.has_labels(),
            source_file,
            windows: ds.windows().to_vec(),
        };
        let mut next = self.manifest.clone();
        next.datasets.insert(name.to_string(), meta.clone());
        let text = serde_json::to_string_pretty(&next).expect("manifest serializes");
        write_atomic(&self.root.join(MANIFEST_FILE), text.as_bytes())?;
        self.manifest = next;
        Ok(meta)
    }

    /// Points with `t_start <= t <= t_end`; windows clipped to the range.
    pub fn query_data(
        &self,
        name: &str,
        t_start: i64,
        t_end: i64,
    ) -> Result<TimeSeriesDataset, StoreError> {
        if t_start > t_end {
            return Err(StoreError::InvalidRange {
                start: t_start,
                end: t_end,
            });
        }
        Ok(self.load(name)?.slice_time(t_start, t_end))
    }

    /// The full dataset.
    pub fn load(&self, name: &str) -> Result<TimeSeriesDataset, StoreError> {
        let meta = self
            .meta(name)
            .ok_or_else(|| StoreError::UnknownDataset(name.to_string()))?;
        let (timestamps, values) = read_series_csv(&self.root.join(&meta.source_file))?;
        Ok(TimeSeriesDataset::new(
            name,
            timestamps,
            values,
            meta.windows.clone(),
        )?)
    }

    fn allocate_file_name(&self, name: &str) -> String {
        let stem: String = name
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        let taken = |f: &str| self.manifest.datasets.values().any(|m| m.source_file == f);
        let mut candidate = format!("{DATA_DIR}/{stem}.csv");
        let mut k = 1;
        while taken(&candidate) || self.root.join(&candidate).exists() {
            candidate = format!("{DATA_DIR}/{stem}-{k}.csv");
            k += 1;
        }
        candidate
    }
}

fn parse_manifest(text: &str) -> Result<Manifest, StoreError> {
    let raw: serde_json::Value =
        serde_json::from_str(text).map_err(|e| StoreError::ManifestCorrupt(e.to_string()))?;
    let version = raw
        .get("version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| StoreError::ManifestCorrupt("missing version".into()))?;
    if version != u64::from(MANIFEST_VERSION) {
        return Err(StoreError::VersionMismatch {
            found: version as u32,
        });
    }
    serde_json::from_value(raw).map_err(|e| StoreError::ManifestCorrupt(e.to_string()))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

/// Accepts integer epoch-ms, `YYYY-MM-DD HH:MM:SS[.fff]`, the same with a `T`
/// separator, RFC 3339, or a bare date. Naive times are taken as UTC.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(ms) = s.parse::<i64>() {
        return Some(ms);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp_millis());
    }
    for fmt in ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp_millis());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp_millis())
}

/// Reads a `timestamp,value` CSV. Line numbers in errors are 1-based file lines.
pub fn read_series_csv(path: &Path) -> Result<(Vec<i64>, Vec<f64>), StoreError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(e, 1))?;
    let headers = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
    if headers.len() < 2 || &headers[0] != "timestamp" || &headers[1] != "value" {
        return Err(StoreError::ParseError {
            line: 1,
            msg: "expected header `timestamp,value`".into(),
        });
    }
    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_error(e, line))?;
        let bad = |msg: String| StoreError::ParseError { line, msg };
        let t = parse_timestamp(&rec[0]).ok_or_else(|| bad(format!("bad timestamp {:?}", &rec[0])))?;
        let v: f64 = rec[1]
            .parse()
            .map_err(|_| bad(format!("bad value {:?}", &rec[1])))?;
        if !v.is_finite() {
            return Err(bad(format!("non-finite value {:?}", &rec[1])));
        }
        if timestamps.last().is_some_and(|&prev| t <= prev) {
            return Err(bad("timestamps must be strictly increasing".into()));
        }
        timestamps.push(t);
        values.push(v);
    }
    if timestamps.is_empty() {
        return Err(StoreError::EmptyFile);
    }
    Ok((timestamps, values))
}

fn csv_error(e: csv::Error, line: usize) -> StoreError {
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => StoreError::Io(io),
            _ => unreachable!(),
        },
        _ => StoreError::ParseError {
            line: e.position().map_or(line, |p| p.line() as usize),
            msg: e.to_string(),
        },
    }
}

/// Canonical on-disk form: epoch-ms timestamps and shortest round-trip floats.
pub fn render_series_csv(ds: &TimeSeriesDataset) -> String {
    let mut out = String::from("timestamp,value\n");
    for (t, v) in ds.timestamps().iter().zip(ds.values()) {
        out.push_str(&format!("{t},{v}\n"));
    }
    out
}

/// Looks up windows in a `{"<key>": [[start, end], ...]}` labels file. The key
/// may be the dataset name or a path ending in the CSV file name (NAB layout).
pub fn read_label_windows(
    path: &Path,
    name: &str,
    file_name: &str,
) -> Result<Vec<AnomalyWindow>, StoreError> {
    let text = fs::read_to_string(path)?;
    let raw: BTreeMap<String, Vec<[serde_json::Value; 2]>> =
        serde_json::from_str(&text).map_err(|e| StoreError::ParseError {
            line: e.line(),
            msg: e.to_string(),
        })?;
    let entry = raw
        .get(name)
        .or_else(|| {
            raw.iter()
                .find(|(k, _)| k.rsplit('/').next() == Some(file_name))
                .map(|(_, v)| v)
        })
        .ok_or_else(|| StoreError::LabelsNotFound(name.to_string()))?;
    let as_ms = |v: &serde_json::Value| match v {
        serde_json::Value::String(s) => parse_timestamp(s),
        serde_json::Value::Number(n) => n.as_i64(),
        _ => None,
    };
    let mut windows = entry
        .iter()
        .map(|[a, b]| match (as_ms(a), as_ms(b)) {
            (Some(start), Some(end)) => Ok(AnomalyWindow::new(start, end)),
            _ => Err(StoreError::ParseError {
                line: 0,
                msg: format!("bad window [{a}, {b}]"),
            }),
        })
        .collect::<Result<Vec<_>, _>>()?;
    windows.sort_by_key(|w| w.start);
    Ok(windows)
}
