//! Versioned line-delimited file formats.
//!
//! Every file starts with a header object carrying `format` and `version`.
//! Floats go through serde_json's shortest round-trip formatting, so a
//! written dataset reads back bit-identical.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use rootterm_core::bandits::CachedArm;
use rootterm_core::dataset::{CachedState, Dataset, GenerationParams, TreeRef};
use rootterm_core::game::TreeShape;

pub const DATASET_FORMAT: &str = "rootterm-dataset";
pub const DATASET_VERSION: u32 = 1;
pub const RUN_LOG_FORMAT: &str = "rootterm-discovery-log";
pub const RUN_LOG_VERSION: u32 = 1;
pub const GAMES_FORMAT: &str = "rootterm-games";
pub const GAMES_VERSION: u32 = 1;
pub const TABLE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Json {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: empty file")]
    Empty { path: String },
    #[error("{path}: expected format {expected} version {version}, found {found}")]
    Header {
        path: String,
        expected: &'static str,
        version: u32,
        found: String,
    },
    #[error("{path}:{line}: {msg}")]
    Invalid { path: String, line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub trace_len: usize,
    pub states: usize,
    pub skipped: usize,
    pub params: GenerationParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeRecord {
    pub seed: u64,
    pub branching: usize,
    pub depth: usize,
    pub path: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmRecord {
    #[serde(rename = "move")]
    pub mv: usize,
    pub prior: f64,
    pub evals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub state_id: String,
    pub tree: TreeRecord,
    pub label: usize,
    pub arms: Vec<ArmRecord>,
}

impl From<&CachedState> for StateRecord {
    fn from(s: &CachedState) -> Self {
        StateRecord {
            state_id: s.state_id.clone(),
            tree: TreeRecord {
                seed: s.tree.seed,
                branching: s.tree.shape.branching,
                depth: s.tree.shape.depth,
                path: s.tree.path.clone(),
            },
            label: s.label,
            arms: s
                .arms
                .iter()
                .map(|a| ArmRecord {
                    mv: a.mv,
                    prior: a.prior,
                    evals: a.evals().to_vec(),
                })
                .collect(),
        }
    }
}

impl From<StateRecord> for CachedState {
    fn from(r: StateRecord) -> Self {
        CachedState {
            state_id: r.state_id,
            tree: TreeRef {
                seed: r.tree.seed,
                shape: TreeShape::new(r.tree.branching, r.tree.depth),
                path: r.tree.path,
            },
            arms: r.arms.into_iter().map(|a| CachedArm::new(a.mv, a.prior, a.evals)).collect(),
            label: r.label,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, FormatError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_json_line<T: Serialize>(out: &mut impl Write, path: &Path, value: &T) -> Result<(), FormatError> {
    let line = serde_json::to_string(value).map_err(|source| FormatError::Json {
        path: path.display().to_string(),
        line: 0,
        source,
    })?;
    writeln!(out, "{line}").map_err(io_err(path))
}

pub fn dataset_to_writer(dataset: &Dataset, out: &mut impl Write, path: &Path) -> Result<(), FormatError> {
    let header = DatasetHeader {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        trace_len: dataset.params.trace_len,
        states: dataset.len(),
        skipped: dataset.skipped,
        params: dataset.params.clone(),
    };
    write_json_line(out, path, &header)?;
    for state in &dataset.states {
        write_json_line(out, path, &StateRecord::from(state))?;
    }
    Ok(())
}

pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<(), FormatError> {
    let mut out = create(path)?;
    dataset_to_writer(dataset, &mut out, path)?;
    out.flush().map_err(io_err(path))
}

pub fn read_dataset(path: &Path) -> Result<Dataset, FormatError> {
    let file = File::open(path).map_err(io_err(path))?;
    let shown = path.display().to_string();
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| FormatError::Empty { path: shown.clone() })?
        .map_err(io_err(path))?;
    let header: DatasetHeader = serde_json::from_str(&first).map_err(|source| FormatError::Json {
        path: shown.clone(),
        line: 1,
        source,
    })?;
    if header.format != DATASET_FORMAT || header.version != DATASET_VERSION {
        return Err(FormatError::Header {
            path: shown,
            expected: DATASET_FORMAT,
            version: DATASET_VERSION,
            found: format!("{} version {}", header.format, header.version),
        });
    }
    let mut states = Vec::with_capacity(header.states);
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 2;
        let record: StateRecord = serde_json::from_str(&line).map_err(|source| FormatError::Json {
            path: shown.clone(),
            line: lineno,
            source,
        })?;
        if record.arms.iter().any(|a| a.evals.len() < header.trace_len) {
            return Err(FormatError::Invalid {
                path: shown,
                line: lineno,
                msg: format!("arm trace shorter than {}", header.trace_len),
            });
        }
        if !record.arms.iter().any(|a| a.mv == record.label) {
            return Err(FormatError::Invalid {
                path: shown,
                line: lineno,
                msg: format!("label {} is not among the arms", record.label),
            });
        }
        states.push(CachedState::from(record));
    }
    if states.len() != header.states {
        return Err(FormatError::Invalid {
            path: shown,
            line: 1,
            msg: format!("header announces {} states, found {}", header.states, states.len()),
        });
    }
    Ok(Dataset {
        params: header.params,
        states,
        skipped: header.skipped,
    })
}

/// Writes a header line followed by one line per record.
pub fn write_jsonl<H: Serialize, R: Serialize>(path: &Path, header: &H, records: &[R]) -> Result<(), FormatError> {
    let mut out = create(path)?;
    write_json_line(&mut out, path, header)?;
    for r in records {
        write_json_line(&mut out, path, r)?;
    }
    out.flush().map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut out = create(path)?;
    let text = serde_json::to_string_pretty(value).map_err(|source| FormatError::Json {
        path: path.display().to_string(),
        line: 0,
        source,
    })?;
    writeln!(out, "{text}").map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), FormatError> {
    std::fs::write(path, text).map_err(io_err(path))
}

/// Renders a winrate matrix as TSV: rows are engine A constants, columns
/// engine B constants, cells `winrate_percent`.
pub fn winrate_table(a_label: &str, b_label: &str, a_grid: &[f64], b_grid: &[f64], winrates: &[Vec<f64>]) -> String {
    let mut s = format!("# rootterm-winrates v{TABLE_VERSION}: engine A winrate (%)\n");
    s.push_str(&format!("{a_label}/{b_label}"));
    for b in b_grid {
        s.push_str(&format!("\t{b}"));
    }
    s.push('\n');
    for (a, row) in a_grid.iter().zip(winrates) {
        s.push_str(&format!("{a}"));
        for w in row {
            s.push_str(&format!("\t{:.2}", 100.0 * w));
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rootterm_core::dataset::generate_dataset;

    fn small() -> Dataset {
        generate_dataset(&GenerationParams {
            states: 5,
            shape: TreeShape::new(4, 6),
            trace_len: 32,
            label_budget: 64,
            seed: 3,
            ..GenerationParams::default()
        })
        .unwrap()
    }

    #[test]
    fn dataset_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let ds = small();
        write_dataset(&ds, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back, ds);
        for (a, b) in ds.states.iter().zip(&back.states) {
            for (x, y) in a.arms.iter().zip(&b.arms) {
                let xs: Vec<u64> = x.evals().iter().map(|v| v.to_bits()).collect();
                let ys: Vec<u64> = y.evals().iter().map(|v| v.to_bits()).collect();
                assert_eq!(xs, ys);
                assert_eq!(x.prior.to_bits(), y.prior.to_bits());
            }
        }
    }

    #[test]
    fn record_field_names() {
        let ds = small();
        let v = serde_json::to_value(StateRecord::from(&ds.states[0])).unwrap();
        for key in ["state_id", "tree", "label", "arms"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        for key in ["seed", "branching", "depth", "path"] {
            assert!(v["tree"].get(key).is_some(), "{key}");
        }
        for key in ["move", "prior", "evals"] {
            assert!(v["arms"][0].get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        std::fs::write(&path, "{\"format\":\"other\",\"version\":1,\"trace_len\":32,\"states\":0,\"skipped\":0,\"params\":null}\n").unwrap();
        assert!(read_dataset(&path).is_err());
        std::fs::write(&path, "").unwrap();
        assert!(matches!(read_dataset(&path), Err(FormatError::Empty { .. })));
        assert!(matches!(read_dataset(&dir.path().join("missing")), Err(FormatError::Io { .. })));
    }

    #[test]
    fn truncated_dataset_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_dataset(&small(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let cut: Vec<&str> = text.lines().take(3).collect();
        std::fs::write(&path, cut.join("\n")).unwrap();
        assert!(matches!(read_dataset(&path), Err(FormatError::Invalid { .. })));
    }

    #[test]
    fn table_layout() {
        let t = winrate_table("c_p", "c_e", &[0.1, 0.2], &[0.3], &[vec![0.5], vec![0.625]]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[1], "c_p/c_e\t0.3");
        assert_eq!(lines[2], "0.1\t50.00");
        assert_eq!(lines[3], "0.2\t62.50");
    }
}
