//! Data ingestion, digests and report writers.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;
use ustat::Dataset;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("parse error at row {row}, column {col}: {reason}")]
    Parse {
        row: usize,
        col: usize,
        reason: String,
    },

    #[error("{0} contains no observations")]
    EmptyFile(PathBuf),

    #[error("{0}")]
    Data(#[from] ustat::Error),
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok()
}

/// Parses comma-separated numeric text into a dataset. A first row made up
/// entirely of non-numeric cells is treated as a header. Rows and columns in
/// errors are 1-based line and field positions in the file.
pub fn parse_csv(text: &str, origin: &Path) -> Result<Dataset, LoadError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    let mut p = None;
    let mut n = 0;
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| LoadError::Parse {
            row: e.position().map_or(1, |p| p.line() as usize),
            col: 1,
            reason: e.to_string(),
        })?;
        let row = record.position().map_or(1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if std::mem::take(&mut first) && record.iter().all(|c| parse_cell(c).is_none()) {
            continue;
        }
        let width = *p.get_or_insert(record.len());
        if record.len() != width {
            return Err(LoadError::Parse {
                row,
                col: record.len().min(width) + 1,
                reason: format!("expected {width} columns, found {}", record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            let col = j + 1;
            if cell.is_empty() {
                return Err(LoadError::Parse {
                    row,
                    col,
                    reason: "missing value".into(),
                });
            }
            let v = parse_cell(cell).ok_or_else(|| LoadError::Parse {
                row,
                col,
                reason: format!("'{cell}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(LoadError::Parse {
                    row,
                    col,
                    reason: format!("non-finite value '{cell}'"),
                });
            }
            values.push(v);
        }
        n += 1;
    }
    match p {
        Some(p) if n > 0 => Ok(Dataset::new(n, p, values)?),
        _ => Err(LoadError::EmptyFile(origin.to_path_buf())),
    }
}

/// A loaded data file with its content digest.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub dataset: Dataset,
    pub sha256: String,
}

pub fn load_csv(path: &Path) -> Result<LoadedData, LoadError> {
    let bytes = fs::read(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let sha256 = hex_digest(&bytes);
    let text = String::from_utf8(bytes).map_err(|e| LoadError::Parse {
        row: 1,
        col: 1,
        reason: format!("invalid UTF-8: {e}"),
    })?;
    Ok(LoadedData {
        dataset: parse_csv(&text, path)?,
        sha256,
    })
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Writes rows with a fixed header derived from the record type.
pub fn write_csv<T: Serialize>(
    path: &Path,
    rows: impl IntoIterator<Item = T>,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(
    path: Option<&Path>,
    value: &T,
) -> Result<(), crate::error::CliError> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => fs::write(p, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Dataset, LoadError> {
        parse_csv(s, Path::new("test.csv"))
    }

    #[test]
    fn rectangular_table() {
        let d = parse("1,2\n3,4\n5,6").unwrap();
        assert_eq!((d.n(), d.p()), (3, 2));
        assert_eq!(d.row(2), &[5.0, 6.0]);
    }

    #[test]
    fn header_is_skipped() {
        let d = parse("a,b\n1,2").unwrap();
        assert_eq!((d.n(), d.p()), (1, 2));
    }

    #[test]
    fn partly_numeric_first_row_is_data() {
        match parse("1,x") {
            Err(LoadError::Parse { row: 1, col: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn error_locations_count_the_header() {
        match parse("a,b\n1,2\n3,\n") {
            Err(LoadError::Parse {
                row: 3,
                col: 2,
                reason,
            }) => assert!(reason.contains("missing")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_non_finite_and_ragged_rows() {
        assert!(matches!(
            parse("1,NaN"),
            Err(LoadError::Parse { row: 1, col: 2, .. })
        ));
        assert!(matches!(
            parse("1,2\n3,inf"),
            Err(LoadError::Parse { row: 2, col: 2, .. })
        ));
        assert!(matches!(
            parse("1,2\n3"),
            Err(LoadError::Parse { row: 2, col: 2, .. })
        ));
        assert!(matches!(
            parse("1,2\n3,4,5"),
            Err(LoadError::Parse { row: 2, col: 3, .. })
        ));
    }

    #[test]
    fn empty_inputs() {
        assert!(matches!(parse(""), Err(LoadError::EmptyFile(_))));
        assert!(matches!(parse("a,b\n"), Err(LoadError::EmptyFile(_))));
    }

    #[test]
    fn whitespace_and_blank_lines() {
        let d = parse(" 1 , 2 \n\n3,4\n").unwrap();
        assert_eq!(d.values(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn digest_is_sha256() {
        assert_eq!(
            hex_digest(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
