//! Filesystem helpers. Every artifact is written once, atomically.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::CliError;

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}", dir.display()), e))
}

/// Writes `bytes` to a temporary sibling of `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| CliError::Config(format!("invalid output path {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let ctx = |what: &str| format!("cannot {what} {}", path.display());
    {
        let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(ctx("create"), e))?;
        f.write_all(bytes).map_err(|e| CliError::io(ctx("write"), e))?;
        f.sync_all().map_err(|e| CliError::io(ctx("sync"), e))?;
    }
    fs::rename(&tmp, path).map_err(|e| CliError::io(ctx("rename into"), e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Minimal RFC 4180 CSV builder. Floats use Rust's shortest round-trip
/// formatting, which is locale independent.
#[derive(Debug, Default)]
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut c = Self::default();
        c.row(header.iter().map(|h| quote(h.as_ref())));
        c
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        for (k, f) in fields.into_iter().enumerate() {
            if k > 0 {
                self.buf.push(',');
            }
            self.buf.push_str(f.as_ref());
        }
        self.buf.push_str("\r\n");
    }

    pub fn as_str(&self) -> &str {
        &self.buf
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_atomic(path, self.buf.as_bytes())
    }
}

/// Quotes a field when it contains a separator, quote or line break.
pub fn quote(field: &str) -> String {
    if field.contains([',', '"', '\r', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Formats a float for CSV; non-finite values become `nan`/`inf`/`-inf`.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_and_terminates_rows() {
        let mut c = Csv::new(&["a", "b,c"]);
        c.row([num(0.1), quote("x\"y")]);
        assert_eq!(c.as_str(), "a,\"b,c\"\r\n0.1,\"x\"\"y\"\r\n");
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, -1.5e-300, 123456789.125, 1e22] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(f64::NAN), "nan");
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
