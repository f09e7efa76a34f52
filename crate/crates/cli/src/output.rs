//! JSON and CSV emission. Floats carry 17 significant digits and files are
//! written once through a temporary file in the target directory.

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Pretty-printing formatter that writes every float as `d.ddddddddddddddddde±x`.
struct Precise<'a>(PrettyFormatter<'a>);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $t:ty),*)),* $(,)?) => {
        $(fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $t)*) -> io::Result<()> {
            self.0.$name(w $(, $arg)*)
        })*
    };
}

impl Formatter for Precise<'_> {
    delegate!(
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        begin_object_value(),
        end_object_value(),
    );

    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String, CliError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Precise(PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(|e| CliError::Output(e.to_string()))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Top-level output document. Everything except `generated_unix` is a pure
/// function of the configuration.
#[derive(Serialize)]
pub struct Document<'a, C: Serialize, P: Serialize> {
    pub schema_version: u32,
    pub command: &'a str,
    pub status: &'a str,
    pub config: &'a C,
    pub payload: &'a P,
    pub generated_unix: u64,
}

pub fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// The document with its timestamp line removed, for byte comparison.
pub fn diffable(doc: &str) -> String {
    doc.lines()
        .filter(|l| !l.trim_start().starts_with("\"generated_unix\""))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Writes `contents` to `dir/name` via a temporary file and rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::Output(e.to_string()))?;
    tmp.write_all(contents.as_bytes())
        .and_then(|_| tmp.flush())
        .map_err(|e| CliError::Output(e.to_string()))?;
    tmp.persist(&target)
        .map_err(|e| CliError::Output(format!("{}: {}", target.display(), e.error)))?;
    Ok(target)
}

/// `v` with 17 significant digits, as in the JSON output.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_keep_seventeen_digits() {
        let s = to_json(&json!({"x": 0.1, "n": 3, "v": [1.0, -2.5]})).unwrap();
        assert!(s.contains("\"x\": 1.0000000000000001e-1"), "{s}");
        assert!(s.contains("\"n\": 3"));
        assert!(s.contains("-2.5000000000000000e0"));
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["x"].as_f64(), Some(0.1));
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_atomic(dir.path(), "a.txt", "one").unwrap();
        write_atomic(dir.path(), "a.txt", "two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn diffable_drops_only_the_timestamp() {
        let doc = "{\n  \"a\": 1,\n  \"generated_unix\": 17\n}";
        assert_eq!(diffable(doc), "{\n  \"a\": 1,\n}");
    }
}
