//! The record-file CSV dialect.
//!
//! ```text
//! #!scalekit-records v1
//! # free-form comments start with '#'
//! family,label,params,train_flops,pile_xent,tokens,pile_dedup,d_model,...
//! Cerebras-GPT,13B,12853386240,2.3e22,1.572,257067724800,false,5120,...
//! ```
//!
//! The first non-blank line declares the schema version. The header row must
//! list [`COLUMNS`] in order. Optional fields are left empty; the six shape
//! columns are either all present or all empty.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use scalekit_core::{EvalRecord, ModelShape};
use thiserror::Error;

use crate::numfmt::{parse_count, parse_real};

/// Leading token of the schema line.
pub const SCHEMA_DIRECTIVE: &str = "#!scalekit-records";
/// Schema version this build reads and writes.
pub const SCHEMA_VERSION: u32 = 1;

/// Downstream accuracy columns, in table order.
pub const DOWNSTREAM_TASKS: [&str; 8] = [
    "hellaswag",
    "piqa",
    "winogrande",
    "lambada",
    "arc_e",
    "arc_c",
    "openbookqa",
    "downstream_avg",
];

const FIXED_COLUMNS: [&str; 13] = [
    "family",
    "label",
    "params",
    "train_flops",
    "pile_xent",
    "tokens",
    "pile_dedup",
    "d_model",
    "n_layers",
    "d_head",
    "d_ffn",
    "vocab_size",
    "seq_len",
];

/// All columns, in file order.
pub const COLUMNS: [&str; 21] = {
    let mut out = [""; 21];
    let mut i = 0;
    while i < FIXED_COLUMNS.len() {
        out[i] = FIXED_COLUMNS[i];
        i += 1;
    }
    let mut j = 0;
    while j < DOWNSTREAM_TASKS.len() {
        out[i + j] = DOWNSTREAM_TASKS[j];
        j += 1;
    }
    out
};

const SHAPE_START: usize = 7;

/// A parsed record file.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordFile {
    /// Declared schema version.
    pub version: u32,
    /// Rows in file order.
    pub records: Vec<EvalRecord>,
}

impl RecordFile {
    /// An empty file at the current schema version.
    pub fn new(records: Vec<EvalRecord>) -> Self {
        Self {
            version: SCHEMA_VERSION,
            records,
        }
    }
}

/// Parse failures. Lines and columns are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    /// Missing or unknown schema line, bad header, or wrong field count.
    #[error("line {line}, column {column}: {message}")]
    SchemaMismatch {
        /// Line number.
        line: u64,
        /// Column number.
        column: usize,
        /// What was wrong.
        message: String,
    },
    /// A (family, label) pair appears twice.
    #[error("line {line}: duplicate record {family} {label} (first defined on line {first_line})")]
    DuplicateLabel {
        /// Line of the repeated row.
        line: u64,
        /// Line of the first definition.
        first_line: u64,
        /// Family.
        family: String,
        /// Label.
        label: String,
    },
    /// A field that should hold a number does not.
    #[error("line {line}, column {column}: `{text}` is not a valid {field}")]
    MalformedNumber {
        /// Line number.
        line: u64,
        /// Column number.
        column: usize,
        /// Column name.
        field: &'static str,
        /// Offending text.
        text: String,
    },
    /// A well-formed value that breaks a record invariant.
    #[error("line {line}, column {column}: {message}")]
    InvalidValue {
        /// Line number.
        line: u64,
        /// Column number.
        column: usize,
        /// What was wrong.
        message: String,
    },
}

fn schema_line(text: &str) -> Result<u32, RecordError> {
    let mismatch = |line: u64, message: String| RecordError::SchemaMismatch {
        line,
        column: 1,
        message,
    };
    let (idx, first) = text
        .lines()
        .enumerate()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| mismatch(1, format!("missing `{SCHEMA_DIRECTIVE} v{SCHEMA_VERSION}` line")))?;
    let line = idx as u64 + 1;
    let rest = first
        .trim()
        .strip_prefix(SCHEMA_DIRECTIVE)
        .ok_or_else(|| mismatch(line, format!("expected `{SCHEMA_DIRECTIVE} v{SCHEMA_VERSION}`")))?;
    let version = rest
        .trim()
        .strip_prefix('v')
        .and_then(|v| v.parse::<u32>().ok())
        .ok_or_else(|| mismatch(line, format!("malformed schema version `{}`", rest.trim())))?;
    if version != SCHEMA_VERSION {
        return Err(mismatch(line, format!("unsupported schema version {version}")));
    }
    Ok(version)
}

struct Row<'a> {
    line: u64,
    fields: &'a csv::StringRecord,
}

impl Row<'_> {
    fn text(&self, col: usize) -> &str {
        self.fields.get(col).unwrap_or("")
    }

    fn malformed(&self, col: usize) -> RecordError {
        RecordError::MalformedNumber {
            line: self.line,
            column: col + 1,
            field: COLUMNS[col],
            text: self.text(col).to_string(),
        }
    }

    fn invalid(&self, col: usize, message: String) -> RecordError {
        RecordError::InvalidValue {
            line: self.line,
            column: col + 1,
            message,
        }
    }

    fn required_text(&self, col: usize) -> Result<String, RecordError> {
        let t = self.text(col);
        if t.is_empty() {
            return Err(self.invalid(col, format!("{} is required", COLUMNS[col])));
        }
        Ok(t.to_string())
    }

    fn opt_real(&self, col: usize) -> Result<Option<f64>, RecordError> {
        match self.text(col) {
            "" => Ok(None),
            t => parse_real(t).map(Some).ok_or_else(|| self.malformed(col)),
        }
    }

    fn opt_count(&self, col: usize) -> Result<Option<u128>, RecordError> {
        match self.text(col) {
            "" => Ok(None),
            t => parse_count(t).map(Some).ok_or_else(|| self.malformed(col)),
        }
    }

    fn positive_real(&self, col: usize) -> Result<f64, RecordError> {
        let v = self
            .opt_real(col)?
            .ok_or_else(|| self.invalid(col, format!("{} is required", COLUMNS[col])))?;
        if v <= 0.0 {
            return Err(self.invalid(col, format!("{} must be positive", COLUMNS[col])));
        }
        Ok(v)
    }
}

fn parse_row(row: &Row<'_>) -> Result<EvalRecord, RecordError> {
    let family = row.required_text(0)?;
    let label = row.required_text(1)?;
    let params = row
        .opt_count(2)?
        .filter(|p| *p > 0)
        .ok_or_else(|| row.invalid(2, "params must be a positive integer".into()))?;
    let train_flops = row.positive_real(3)?;
    let pile_xent = match row.opt_real(4)? {
        Some(v) if v <= 0.0 => return Err(row.invalid(4, "pile_xent must be positive".into())),
        v => v,
    };
    let tokens = row
        .opt_count(5)?
        .map(|t| u64::try_from(t).map_err(|_| row.malformed(5)))
        .transpose()?;
    let pile_dedup = match row.text(6) {
        "true" => true,
        "false" | "" => false,
        _ => return Err(row.invalid(6, "pile_dedup must be true or false".into())),
    };

    let mut dims = [None; 6];
    for (k, slot) in dims.iter_mut().enumerate() {
        *slot = row.opt_count(SHAPE_START + k)?;
    }
    let shape = if dims.iter().all(Option::is_none) {
        None
    } else if let Some(k) = dims.iter().position(Option::is_none) {
        return Err(row.invalid(SHAPE_START + k, "shape columns must be all set or all empty".into()));
    } else {
        let d: Vec<u64> = dims
            .iter()
            .enumerate()
            .map(|(k, v)| u64::try_from(v.unwrap()).map_err(|_| row.malformed(SHAPE_START + k)))
            .collect::<Result<_, _>>()?;
        Some(
            ModelShape::new(d[0], d[1], d[2], d[3], d[4], d[5])
                .map_err(|e| row.invalid(SHAPE_START, e.to_string()))?,
        )
    };

    let mut downstream = BTreeMap::new();
    for (k, task) in DOWNSTREAM_TASKS.iter().enumerate() {
        let col = FIXED_COLUMNS.len() + k;
        if let Some(acc) = row.opt_real(col)? {
            if !(0.0..=1.0).contains(&acc) {
                return Err(row.invalid(col, format!("{task} accuracy must lie in [0, 1]")));
            }
            downstream.insert(task.to_string(), acc);
        }
    }

    Ok(EvalRecord {
        family,
        label,
        params,
        train_flops,
        pile_xent,
        tokens,
        downstream,
        shape,
        pile_dedup,
    })
}

/// Comment and blank lines removed (outside quoted fields), with the
/// physical line number of every kept line.
struct DataText {
    text: String,
    lines: Vec<u64>,
}

impl DataText {
    fn new(raw: &str) -> Self {
        let mut text = String::with_capacity(raw.len());
        let mut lines = Vec::new();
        let mut in_quote = false;
        for (i, line) in raw.split('\n').enumerate() {
            let skip = !in_quote && (line.trim().is_empty() || line.starts_with('#'));
            if !skip {
                text.push_str(line);
                text.push('\n');
                lines.push(i as u64 + 1);
            }
            in_quote ^= line.matches('"').count() % 2 == 1;
        }
        Self { text, lines }
    }

    fn physical(&self, pos: Option<&csv::Position>) -> u64 {
        pos.and_then(|p| self.lines.get(p.line().saturating_sub(1) as usize))
            .copied()
            .unwrap_or(0)
    }

    fn error(&self, err: csv::Error) -> RecordError {
        let line = self.physical(err.position());
        let message = match err.kind() {
            csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                format!("expected {expected_len} fields, found {len}")
            }
            csv::ErrorKind::Utf8 { .. } => "invalid UTF-8".to_string(),
            _ => err.to_string(),
        };
        RecordError::SchemaMismatch {
            line,
            column: 1,
            message,
        }
    }
}

/// Parses record-file text.
pub fn parse_records(text: &str) -> Result<RecordFile, RecordError> {
    let version = schema_line(text)?;
    let data = DataText::new(text);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(data.text.as_bytes());

    let mut rows = reader.records();
    let header = match rows.next() {
        None => {
            return Err(RecordError::SchemaMismatch {
                line: text.lines().count() as u64 + 1,
                column: 1,
                message: "header row required".into(),
            })
        }
        Some(r) => r.map_err(|e| data.error(e))?,
    };
    let header_line = data.physical(header.position());
    if let Some(col) = (0..COLUMNS.len().max(header.len()))
        .find(|&i| header.get(i) != COLUMNS.get(i).copied())
    {
        let message = match (header.get(col), COLUMNS.get(col)) {
            (Some(found), Some(want)) => format!("expected column `{want}`, found `{found}`"),
            (None, Some(want)) => format!("missing column `{want}`"),
            (Some(found), None) => format!("unexpected column `{found}`"),
            (None, None) => unreachable!(),
        };
        return Err(RecordError::SchemaMismatch {
            line: header_line,
            column: col + 1,
            message,
        });
    }

    let mut seen: HashMap<(String, String), u64> = HashMap::new();
    let mut records = Vec::new();
    for result in rows {
        let fields = result.map_err(|e| data.error(e))?;
        let line = data.physical(fields.position());
        let record = parse_row(&Row {
            line,
            fields: &fields,
        })?;
        let key = (record.family.clone(), record.label.clone());
        if let Some(&first_line) = seen.get(&key) {
            return Err(RecordError::DuplicateLabel {
                line,
                first_line,
                family: record.family,
                label: record.label,
            });
        }
        seen.insert(key, line);
        records.push(record);
    }
    Ok(RecordFile { version, records })
}

fn quote(field: &str) -> String {
    let needs = field.starts_with('#')
        || field.trim() != field
        || field.contains([',', '"', '\n', '\r']);
    if needs {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes a record file. Numbers use shortest round-trip formatting, so
/// `parse_records(&emit_records(f)) == f`.
pub fn emit_records(file: &RecordFile) -> String {
    let mut out = format!("{SCHEMA_DIRECTIVE} v{}\n{}\n", file.version, COLUMNS.join(","));
    for r in &file.records {
        let shape = r.shape.map(|s| {
            [
                s.d_model(),
                s.n_layers(),
                s.d_head(),
                s.d_ffn(),
                s.vocab_size(),
                s.seq_len(),
            ]
        });
        let mut fields = vec![
            quote(&r.family),
            quote(&r.label),
            r.params.to_string(),
            format!("{:e}", r.train_flops),
            opt(r.pile_xent),
            opt(r.tokens),
            r.pile_dedup.to_string(),
        ];
        for k in 0..6 {
            fields.push(opt(shape.map(|s| s[k])));
        }
        for task in DOWNSTREAM_TASKS {
            fields.push(opt(r.downstream.get(task)));
        }
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAD: &str = "#!scalekit-records v1\n";

    fn header() -> String {
        format!("{HEAD}{}\n", COLUMNS.join(","))
    }

    fn row(family: &str, label: &str) -> String {
        format!("{family},{label},1000,1e20,2.5,,false,,,,,,,0.5,,,,,,,\n")
    }

    #[test]
    fn columns_in_order() {
        assert_eq!(COLUMNS[0], "family");
        assert_eq!(COLUMNS[13], "hellaswag");
        assert_eq!(COLUMNS[20], "downstream_avg");
    }

    #[test]
    fn empty_rows_section() {
        let f = parse_records(&header()).unwrap();
        assert_eq!(f.version, 1);
        assert!(f.records.is_empty());
    }

    #[test]
    fn duplicate_reports_second_line() {
        let text = format!("{}# comment\n{}{}", header(), row("A", "x"), row("A", "x"));
        match parse_records(&text) {
            Err(RecordError::DuplicateLabel { line, first_line, .. }) => {
                assert_eq!((line, first_line), (5, 4));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_number_location() {
        let text = format!("{}A,x,1000,1e2O,2.5,,false,,,,,,,,,,,,,,\n", header());
        match parse_records(&text) {
            Err(RecordError::MalformedNumber { line, column, field, .. }) => {
                assert_eq!((line, column, field), (3, 4, "train_flops"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_errors() {
        let no_directive = format!("{}\n", COLUMNS.join(","));
        assert!(matches!(
            parse_records(&no_directive),
            Err(RecordError::SchemaMismatch { line: 1, .. })
        ));
        let v2 = format!("#!scalekit-records v2\n{}\n", COLUMNS.join(","));
        assert!(matches!(parse_records(&v2), Err(RecordError::SchemaMismatch { .. })));
        assert!(matches!(
            parse_records(HEAD),
            Err(RecordError::SchemaMismatch { .. })
        ));
        let bad_header = format!("{HEAD}family,name\n");
        assert!(matches!(
            parse_records(&bad_header),
            Err(RecordError::SchemaMismatch { line: 2, column: 2, .. })
        ));
        let short_row = format!("{}A,x,1000\n", header());
        assert!(matches!(
            parse_records(&short_row),
            Err(RecordError::SchemaMismatch { line: 3, .. })
        ));
    }

    #[test]
    fn invariant_violations() {
        let bad_acc = format!("{}A,x,1000,1e20,2.5,,false,,,,,,,1.5,,,,,,,\n", header());
        assert!(matches!(
            parse_records(&bad_acc),
            Err(RecordError::InvalidValue { column: 14, .. })
        ));
        let zero_flops = format!("{}A,x,1000,0,2.5,,false,,,,,,,,,,,,,,\n", header());
        assert!(matches!(
            parse_records(&zero_flops),
            Err(RecordError::InvalidValue { column: 4, .. })
        ));
        let partial_shape = format!("{}A,x,1000,1e20,2.5,,false,768,,,,,,,,,,,,,\n", header());
        assert!(matches!(
            parse_records(&partial_shape),
            Err(RecordError::InvalidValue { .. })
        ));
    }

    #[test]
    fn round_trip_with_awkward_names() {
        let text = format!("{}{}", header(), row("Fam", "1.3B"));
        let mut f = parse_records(&text).unwrap();
        f.records[0].family = "#odd, \"name\"".into();
        f.records[0].label = " padded ".into();
        f.records[0].shape = Some(ModelShape::gpt(768, 10, 64).unwrap());
        f.records[0].tokens = Some(299_900_000_000);
        let back = parse_records(&emit_records(&f)).unwrap();
        assert_eq!(back, f);
    }
}
