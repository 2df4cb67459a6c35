//! Published evaluation tables shipped with the binary.
//!
//! Setting `SCALEKIT_DATA` to a directory makes every loader read the
//! same-named files from there instead.

use std::path::{Path, PathBuf};

use scalekit_core::EvalRecord;
use thiserror::Error;

use crate::records::{parse_records, RecordError, RecordFile};

/// Environment variable overriding the bundled-data directory.
pub const DATA_ENV: &str = "SCALEKIT_DATA";

/// Bundled file names with their compiled-in contents.
pub const FILES: [(&str, &str); 3] = [
    ("cerebras_gpt.csv", include_str!("../data/cerebras_gpt.csv")),
    ("pythia.csv", include_str!("../data/pythia.csv")),
    ("others.csv", include_str!("../data/others.csv")),
];

/// `--records` value selecting every bundled file.
pub const ALL: &str = "bundled";
/// Prefix selecting one bundled file, e.g. `bundled:pythia`.
pub const PREFIX: &str = "bundled:";

/// Data loading failures.
#[derive(Debug, Error)]
pub enum DataError {
    /// File could not be read.
    #[error("cannot read {path}: {source}")]
    Io {
        /// Path tried.
        path: PathBuf,
        /// Underlying error.
        source: std::io::Error,
    },
    /// File did not parse.
    #[error("{name}: {source}")]
    Parse {
        /// File name.
        name: String,
        /// Underlying error.
        source: RecordError,
    },
    /// Unknown bundled file.
    #[error("no bundled file named `{0}` (expected cerebras_gpt, pythia or others)")]
    UnknownFile(String),
    /// The same (family, label) appears in two files.
    #[error("record {family} {label} appears in more than one file")]
    Duplicate {
        /// Family.
        family: String,
        /// Label.
        label: String,
    },
}

fn read(path: &Path) -> Result<String, DataError> {
    std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_named(name: &str, text: &str) -> Result<RecordFile, DataError> {
    parse_records(text).map_err(|source| DataError::Parse {
        name: name.to_string(),
        source,
    })
}

/// Loads one bundled file by name (`pythia` or `pythia.csv`).
pub fn load(name: &str) -> Result<RecordFile, DataError> {
    let file = if name.ends_with(".csv") {
        name.to_string()
    } else {
        format!("{name}.csv")
    };
    let (file, builtin) = FILES
        .iter()
        .find(|(n, _)| *n == file)
        .ok_or_else(|| DataError::UnknownFile(name.to_string()))?;
    match std::env::var_os(DATA_ENV) {
        Some(dir) => {
            let path = Path::new(&dir).join(file);
            parse_named(file, &read(&path)?)
        }
        None => parse_named(file, builtin),
    }
}

/// Loads and concatenates all bundled files.
pub fn load_all() -> Result<Vec<EvalRecord>, DataError> {
    let mut out: Vec<EvalRecord> = Vec::new();
    for (name, _) in FILES {
        for r in load(name)?.records {
            if out.iter().any(|o| o.family == r.family && o.label == r.label) {
                return Err(DataError::Duplicate {
                    family: r.family,
                    label: r.label,
                });
            }
            out.push(r);
        }
    }
    Ok(out)
}

/// Resolves a `--records` argument: `bundled`, `bundled:NAME` or a path.
pub fn resolve(spec: &str) -> Result<Vec<EvalRecord>, DataError> {
    if spec == ALL {
        return load_all();
    }
    if let Some(name) = spec.strip_prefix(PREFIX) {
        return Ok(load(name)?.records);
    }
    let path = Path::new(spec);
    Ok(parse_named(spec, &read(path)?)?.records)
}

/// Whether a record belongs to one of the Cerebras-GPT families.
pub fn is_cerebras(record: &EvalRecord) -> bool {
    record.family.starts_with("Cerebras-GPT")
}
