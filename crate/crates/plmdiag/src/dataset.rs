//! Line-oriented dataset files.
//!
//! Line 1 is a JSON header (format, version, task, record count, scenario
//! config, frequency grid). Every following line is one JSON record whose
//! spectra are base64 strings of little-endian `f64` pairs `(re, im)`. The
//! sidecar `<file>.sum` holds a 64-bit checksum per record line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use plmdiag_core::netmodel::{ChannelObservation, FrequencyGrid};
use plmdiag_core::scenario::{generate_sample, LabeledSample, Labels, Record, ScenarioConfig, TaskId};
use plmdiag_core::C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checksum::{checksum64, hex64};

pub const DATASET_FORMAT: &str = "plmdiag-dataset";
pub const DATASET_VERSION: u32 = 1;
const SUM_MAGIC: &str = "plmdiag-checksums 1 sha256-64";

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: unsupported dataset version {found} (expected {expected})", path.display())]
    Version { path: PathBuf, found: u64, expected: u32 },
    #[error("{}: bad header: {reason}", path.display())]
    Header { path: PathBuf, reason: String },
    #[error("{}: record {record} is truncated", path.display())]
    Truncated { path: PathBuf, record: usize },
    #[error("{}: checksum mismatch at record {record}", path.display())]
    Checksum { path: PathBuf, record: usize },
    #[error("{}: record {record}: {reason}", path.display())]
    Malformed {
        path: PathBuf,
        record: usize,
        reason: String,
    },
    #[error("{}: bad checksum file: {reason}", path.display())]
    Sidecar { path: PathBuf, reason: String },
    #[error("generating sample {index}: {source}")]
    Generate {
        index: u64,
        #[source]
        source: plmdiag_core::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub task: String,
    pub count: usize,
    pub config: ScenarioConfig,
    pub grid: FrequencyGrid,
}

impl DatasetHeader {
    pub fn new(task: TaskId, count: usize, config: &ScenarioConfig) -> Self {
        Self {
            format: DATASET_FORMAT.to_string(),
            version: DATASET_VERSION,
            task: task.to_string(),
            count,
            config: config.clone(),
            grid: config.grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<Record>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObsLine {
    observer: usize,
    receiver: usize,
    h_f: String,
    z_in: String,
    h_ref: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    index: u64,
    labels: Labels,
    observations: Vec<ObsLine>,
}

pub fn encode_complex(v: &[C64]) -> String {
    let mut bytes = Vec::with_capacity(16 * v.len());
    for z in v {
        bytes.extend_from_slice(&z.re.to_le_bytes());
        bytes.extend_from_slice(&z.im.to_le_bytes());
    }
    STANDARD.encode(bytes)
}

pub fn encode_f64(v: &[f64]) -> String {
    let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub fn decode_f64(s: &str) -> Result<Vec<f64>, String> {
    let bytes = STANDARD.decode(s).map_err(|e| e.to_string())?;
    if bytes.len() % 8 != 0 {
        return Err(format!("{} bytes is not a whole number of f64 values", bytes.len()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

fn decode_complex(s: &str, n: usize) -> Result<Vec<C64>, String> {
    let v = decode_f64(s)?;
    if v.len() != 2 * n {
        return Err(format!("expected {n} complex values, found {} f64", v.len()));
    }
    Ok(v.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect())
}

fn record_line(r: &Record) -> String {
    let line = RecordLine {
        index: r.index,
        labels: r.labels,
        observations: r
            .observations
            .iter()
            .map(|o| ObsLine {
                observer: o.observer,
                receiver: o.receiver,
                h_f: encode_complex(&o.h_f),
                z_in: encode_complex(&o.z_in),
                h_ref: encode_complex(&o.h_ref),
            })
            .collect(),
    };
    serde_json::to_string(&line).expect("records serialize")
}

fn parse_record(line: &str, grid: &FrequencyGrid) -> Result<Record, String> {
    let r: RecordLine = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let observations = r
        .observations
        .into_iter()
        .map(|o| {
            Ok(ChannelObservation {
                grid: *grid,
                h_f: decode_complex(&o.h_f, grid.count)?,
                z_in: decode_complex(&o.z_in, grid.count)?,
                h_ref: decode_complex(&o.h_ref, grid.count)?,
                observer: o.observer,
                receiver: o.receiver,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok(Record {
        index: r.index,
        labels: r.labels,
        observations,
    })
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".sum");
    PathBuf::from(s)
}

/// Streams records to a dataset file; the checksum file is written by
/// [`DatasetWriter::finish`].
pub struct DatasetWriter {
    path: PathBuf,
    out: BufWriter<File>,
    header: DatasetHeader,
    sums: Vec<u64>,
}

impl DatasetWriter {
    pub fn create(path: &Path, header: DatasetHeader) -> Result<Self, DatasetError> {
        let io = |e| DatasetError::Io {
            path: path.to_path_buf(),
            source: e,
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let mut out = BufWriter::new(File::create(path).map_err(io)?);
        let line = serde_json::to_string(&header).expect("header serializes");
        writeln!(out, "{line}").map_err(io)?;
        Ok(Self {
            path: path.to_path_buf(),
            out,
            header,
            sums: Vec::new(),
        })
    }

    pub fn write(&mut self, r: &Record) -> Result<(), DatasetError> {
        let record = self.sums.len();
        if record >= self.header.count {
            return Err(self.malformed(record, format!("header announces {} records", self.header.count)));
        }
        if let Some(o) = r.observations.iter().find(|o| o.grid != self.header.grid) {
            return Err(self.malformed(record, format!("observation at PLM {} uses another grid", o.observer + 1)));
        }
        let line = record_line(r);
        self.sums.push(checksum64(line.as_bytes()));
        writeln!(self.out, "{line}").map_err(|e| DatasetError::Io {
            path: self.path.clone(),
            source: e,
        })
    }

    fn malformed(&self, record: usize, reason: String) -> DatasetError {
        DatasetError::Malformed {
            path: self.path.clone(),
            record,
            reason,
        }
    }

    pub fn finish(mut self) -> Result<(), DatasetError> {
        if self.sums.len() != self.header.count {
            return Err(self.malformed(
                self.sums.len(),
                format!("{} records written, header announces {}", self.sums.len(), self.header.count),
            ));
        }
        self.out.flush().map_err(|e| DatasetError::Io {
            path: self.path.clone(),
            source: e,
        })?;
        let sum_path = sidecar_path(&self.path);
        let mut text = String::from(SUM_MAGIC);
        text.push('\n');
        for (i, s) in self.sums.iter().enumerate() {
            text.push_str(&format!("{i} {}\n", hex64(*s)));
        }
        std::fs::write(&sum_path, text).map_err(|e| DatasetError::Io {
            path: sum_path,
            source: e,
        })
    }
}

pub fn save_dataset(path: &Path, ds: &Dataset) -> Result<(), DatasetError> {
    let mut w = DatasetWriter::create(path, ds.header.clone())?;
    for r in &ds.records {
        w.write(r)?;
    }
    w.finish()
}

fn read_sidecar(path: &Path) -> Result<Vec<u64>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let bad = |reason: String| DatasetError::Sidecar {
        path: path.to_path_buf(),
        reason,
    };
    let mut lines = text.lines();
    if lines.next() != Some(SUM_MAGIC) {
        return Err(bad(format!("first line must be {SUM_MAGIC:?}")));
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let (pos, hex) = l.split_once(' ').ok_or_else(|| bad(format!("line {}: expected `index checksum`", i + 2)))?;
            if pos.parse::<usize>().ok() != Some(i) {
                return Err(bad(format!("line {}: expected record {i}", i + 2)));
            }
            u64::from_str_radix(hex, 16).map_err(|e| bad(format!("line {}: {e}", i + 2)))
        })
        .collect()
}

fn parse_header(path: &Path, line: &str) -> Result<DatasetHeader, DatasetError> {
    let bad = |reason: String| DatasetError::Header {
        path: path.to_path_buf(),
        reason,
    };
    // Check the version before the layout so newer files get a version error.
    let v: serde_json::Value = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
    if v.get("format").and_then(|f| f.as_str()) != Some(DATASET_FORMAT) {
        return Err(bad(format!("not a {DATASET_FORMAT} file")));
    }
    let version = v.get("version").and_then(|x| x.as_u64()).ok_or_else(|| bad("missing version".into()))?;
    if version != DATASET_VERSION as u64 {
        return Err(DatasetError::Version {
            path: path.to_path_buf(),
            found: version,
            expected: DATASET_VERSION,
        });
    }
    let h: DatasetHeader = serde_json::from_value(v).map_err(|e| bad(e.to_string()))?;
    h.config.validate().map_err(|e| bad(e.to_string()))?;
    if h.grid != h.config.grid() {
        return Err(bad("grid does not match the config's time grid".into()));
    }
    h.task.parse::<TaskId>().map_err(|e| bad(e.to_string()))?;
    Ok(h)
}

/// Reads a dataset and verifies every record against the checksum file.
pub fn load_dataset(path: &Path) -> Result<Dataset, DatasetError> {
    let bytes = std::fs::read(path).map_err(|e| DatasetError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let text = std::str::from_utf8(&bytes).map_err(|e| DatasetError::Header {
        path: path.to_path_buf(),
        reason: format!("not UTF-8: {e}"),
    })?;
    let Some((head, body)) = text.split_once('\n') else {
        return Err(DatasetError::Header {
            path: path.to_path_buf(),
            reason: String::from("missing header line"),
        });
    };
    let header = parse_header(path, head)?;
    let sums = read_sidecar(&sidecar_path(path))?;
    let mut records = Vec::with_capacity(header.count);
    let mut rest = body;
    while !rest.is_empty() {
        let i = records.len();
        let Some((line, tail)) = rest.split_once('\n') else {
            return Err(DatasetError::Truncated {
                path: path.to_path_buf(),
                record: i,
            });
        };
        rest = tail;
        if i >= header.count {
            return Err(DatasetError::Malformed {
                path: path.to_path_buf(),
                record: i,
                reason: format!("header announces {} records", header.count),
            });
        }
        let expected = sums.get(i).ok_or_else(|| DatasetError::Sidecar {
            path: sidecar_path(path),
            reason: format!("no checksum for record {i}"),
        })?;
        if checksum64(line.as_bytes()) != *expected {
            return Err(DatasetError::Checksum {
                path: path.to_path_buf(),
                record: i,
            });
        }
        let r = parse_record(line, &header.grid).map_err(|reason| DatasetError::Malformed {
            path: path.to_path_buf(),
            record: i,
            reason,
        })?;
        records.push(r);
    }
    if records.len() < header.count {
        return Err(DatasetError::Truncated {
            path: path.to_path_buf(),
            record: records.len(),
        });
    }
    if sums.len() != records.len() {
        return Err(DatasetError::Sidecar {
            path: sidecar_path(path),
            reason: format!("{} checksums for {} records", sums.len(), records.len()),
        });
    }
    Ok(Dataset { header, records })
}

/// Generates records `range` of `task` in parallel, in index order.
pub fn generate_records_par(
    cfg: &ScenarioConfig,
    task: TaskId,
    range: std::ops::Range<u64>,
) -> Result<Vec<Record>, DatasetError> {
    range
        .into_par_iter()
        .map(|i| {
            generate_sample(cfg, task, i)
                .map(LabeledSample::into_record)
                .map_err(|source| DatasetError::Generate { index: i, source })
        })
        .collect()
}

/// Records generated per parallel batch while streaming to disk.
const BATCH: u64 = 256;

/// Generates and writes `n` records of `task`.
pub fn generate_dataset(cfg: &ScenarioConfig, task: TaskId, n: usize, path: &Path) -> Result<(), DatasetError> {
    let mut w = DatasetWriter::create(path, DatasetHeader::new(task, n, cfg))?;
    let n = n as u64;
    let mut start = 0;
    while start < n {
        let end = (start + BATCH).min(n);
        for r in generate_records_par(cfg, task, start..end)? {
            w.write(&r)?;
        }
        start = end;
    }
    w.finish()
}
