//! Line-delimited JSON helpers shared by every record format in the crate.
//!
//! Records are written with `", "` / `": "` separators so files produced here
//! are byte-compatible with metadata files written by Python's `json.dumps`.

use std::fs;
use std::io::{self, BufRead};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::Formatter;
use thiserror::Error;

/// Errors raised while reading or writing a line-delimited record file.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("failed to read input: {0}")]
    Read(#[source] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("failed to serialize record: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl FormatError {
    /// Line number the error refers to, if any.
    pub fn line(&self) -> Option<usize> {
        match self {
            FormatError::Parse { line, .. } | FormatError::Invalid { line, .. } => Some(*line),
            _ => None,
        }
    }
}

/// `serde_json` formatter matching Python's default `json.dumps` separators.
#[derive(Debug, Default, Clone, Copy)]
pub struct PythonStyle;

impl Formatter for PythonStyle {
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        if first {
            Ok(())
        } else {
            writer.write_all(b", ")
        }
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        if first {
            Ok(())
        } else {
            writer.write_all(b", ")
        }
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        writer.write_all(b": ")
    }
}

/// Serialize one record as a single line (no trailing newline).
pub fn to_line<T: Serialize + ?Sized>(value: &T) -> Result<String, serde_json::Error> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PythonStyle);
    value.serialize(&mut ser)?;
    // serde_json only emits valid UTF-8
    Ok(String::from_utf8(buf).expect("serde_json produced invalid UTF-8"))
}

/// Serialize a sequence of records, one per line, each line newline-terminated.
pub fn to_lines<'a, T: Serialize + 'a>(values: impl IntoIterator<Item = &'a T>) -> Result<String, serde_json::Error> {
    let mut out = String::new();
    for value in values {
        out.push_str(&to_line(value)?);
        out.push('\n');
    }
    Ok(out)
}

/// Read all non-blank lines, paired with their 1-based line numbers.
pub fn read_lines(reader: impl BufRead) -> Result<Vec<(usize, String)>, FormatError> {
    let mut lines = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(FormatError::Read)?;
        if line.trim().is_empty() {
            continue;
        }
        lines.push((idx + 1, line));
    }
    Ok(lines)
}

/// Open a file for line-oriented reading, attaching the path to I/O errors.
pub fn open(path: &Path) -> Result<io::BufReader<fs::File>, FormatError> {
    fs::File::open(path)
        .map(io::BufReader::new)
        .map_err(|source| FormatError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Parse a JSON line into a value, mapping errors to the line number.
pub fn parse_line<T: serde::de::DeserializeOwned>(line_no: usize, line: &str) -> Result<T, FormatError> {
    serde_json::from_str(line.trim()).map_err(|e| FormatError::Parse {
        line: line_no,
        message: e.to_string(),
    })
}

/// Write `contents` to `path` via a sibling temporary file and a rename, so
/// readers never observe a partially written output.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut tmp_name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    tmp_name.push(".partial");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn python_separators() {
        let v = json!({"a": [1, 2], "b": {"c": "d"}});
        assert_eq!(to_line(&v).unwrap(), r#"{"a": [1, 2], "b": {"c": "d"}}"#);
    }

    #[test]
    fn blank_lines_skipped_with_numbering() {
        let input = "{}\n\n  \n{\"x\": 1}\n";
        let lines = read_lines(input.as_bytes()).unwrap();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1].0, 4);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nested/out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
