//! JSON experiment records and atomic file output.

use std::io::Write;
use std::path::Path;

use num_bigint::BigInt;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use serde_json::{Map, Value};
use sllift_core::IntMatrix;

pub const SCHEMA_VERSION: &str = "1";

/// Largest integer a JSON reader can hold exactly in a double.
const MAX_SAFE: u64 = 1 << 53;

#[derive(Clone, Debug)]
pub struct ExperimentRecord {
    pub command: String,
    pub params: Map<String, Value>,
    pub seed: u64,
    pub results: Value,
    pub wall_time_ms: u64,
}

impl Serialize for ExperimentRecord {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(6))?;
        m.serialize_entry("schema_version", SCHEMA_VERSION)?;
        m.serialize_entry("command", &self.command)?;
        m.serialize_entry("params", &self.params)?;
        if self.seed <= MAX_SAFE {
            m.serialize_entry("seed", &self.seed)?;
        } else {
            m.serialize_entry("seed_str", &self.seed.to_string())?;
        }
        m.serialize_entry("results", &self.results)?;
        m.serialize_entry("wall_time_ms", &self.wall_time_ms)?;
        m.end()
    }
}

impl ExperimentRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }
}

/// Object builder applying the `_str` rule to integers above 2⁵³.
#[derive(Clone, Default)]
pub struct Obj(Map<String, Value>);

impl Obj {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u(mut self, key: &str, v: u64) -> Self {
        if v <= MAX_SAFE {
            self.0.insert(key.into(), v.into());
        } else {
            self.0.insert(format!("{key}_str"), v.to_string().into());
        }
        self
    }

    pub fn big(mut self, key: &str, v: &BigInt) -> Self {
        self.0.insert(format!("{key}_str"), v.to_string().into());
        self
    }

    pub fn matrix(mut self, key: &str, m: &IntMatrix) -> Self {
        let rows: Vec<Value> = m
            .row_vecs()
            .iter()
            .map(|r| Value::Array(r.iter().map(|v| v.to_string().into()).collect()))
            .collect();
        self.0.insert(format!("{key}_str"), Value::Array(rows));
        self
    }

    pub fn v(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.0.insert(key.into(), v.into());
        self
    }

    pub fn f(mut self, key: &str, v: f64) -> Self {
        // non-finite values have no JSON form
        let v = serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number);
        self.0.insert(key.into(), v);
        self
    }

    pub fn into_map(self) -> Map<String, Value> {
        self.0
    }

    pub fn done(self) -> Value {
        Value::Object(self.0)
    }
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// CSV with a header row, one line per record, written atomically.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    write_atomic(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn str_rule() {
        let v = Obj::new().u("small", 5).u("large", u64::MAX).done();
        assert_eq!(v["small"], 5);
        assert_eq!(v["large_str"], u64::MAX.to_string());
        assert!(v.get("large").is_none());
        let r = ExperimentRecord {
            command: "x".into(),
            params: Map::new(),
            seed: u64::MAX,
            results: Value::Null,
            wall_time_ms: 1,
        };
        let j: Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(j["seed_str"], u64::MAX.to_string());
    }

    #[test]
    fn atomic_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        write_csv(&p, &["a", "b"], &[vec!["1".into(), "x,y".into()]]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "a,b\n1,\"x,y\"\n");
    }
}
