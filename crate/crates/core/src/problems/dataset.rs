//! Problem instances and their JSON-lines file format.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};

/// One training/evaluation example: problem vector `p` and target bits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemInstance {
    #[serde(rename = "type")]
    pub problem: String,
    pub p: Vec<f64>,
    pub x_hat: BitString,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub meta: serde_json::Value,
}

impl ProblemInstance {
    pub fn new(problem: &str, p: Vec<f64>, x_hat: BitString, meta: serde_json::Value) -> Self {
        ProblemInstance {
            problem: problem.to_string(),
            p,
            x_hat,
            meta,
        }
    }

    pub fn meta_field<T: serde::de::DeserializeOwned>(&self, key: &str) -> Result<T> {
        let v = self
            .meta
            .get(key)
            .ok_or_else(|| Error::Parse(format!("instance meta lacks `{key}`")))?;
        Ok(serde_json::from_value(v.clone())?)
    }
}

/// Header line preceding the instances of a dataset file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub dataset: String,
    pub seed: u64,
    pub config_hash: String,
    pub count: usize,
}

/// Checks that all instances share type, `p` width and solution width.
pub fn validate_dataset(instances: &[ProblemInstance]) -> Result<()> {
    let Some(first) = instances.first() else {
        return Err(Error::InvalidParam("dataset is empty".into()));
    };
    for (i, inst) in instances.iter().enumerate() {
        if inst.problem != first.problem {
            return Err(Error::Parse(format!(
                "instance {i} has type `{}`, expected `{}`",
                inst.problem, first.problem
            )));
        }
        if inst.p.len() != first.p.len() {
            return Err(Error::Dimension {
                what: "problem vector length",
                expected: first.p.len(),
                got: inst.p.len(),
            });
        }
        if inst.x_hat.len() != first.x_hat.len() {
            return Err(Error::Dimension {
                what: "solution width",
                expected: first.x_hat.len(),
                got: inst.x_hat.len(),
            });
        }
        if inst.p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("problem vector"));
        }
    }
    Ok(())
}

pub fn write_jsonl<W: Write>(
    mut out: W,
    header: Option<&DatasetHeader>,
    instances: &[ProblemInstance],
) -> Result<()> {
    let mut line = |v: String| -> Result<()> {
        out.write_all(v.as_bytes())
            .and_then(|_| out.write_all(b"\n"))
            .map_err(|e| Error::io("<dataset>", e))
    };
    if let Some(h) = header {
        line(serde_json::to_string(h)?)?;
    }
    for inst in instances {
        line(serde_json::to_string(inst)?)?;
    }
    Ok(())
}

/// Blank lines are skipped; an optional header must come first.
pub fn read_jsonl<R: BufRead>(input: R) -> Result<(Option<DatasetHeader>, Vec<ProblemInstance>)> {
    let mut header: Option<DatasetHeader> = None;
    let mut instances = Vec::new();
    for (no, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<dataset>", e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if no == 0 && line.contains("\"dataset\"") {
            header = Some(serde_json::from_str(line)?);
            continue;
        }
        let inst: ProblemInstance = serde_json::from_str(line)
            .map_err(|e| Error::Parse(format!("line {}: {e}", no + 1)))?;
        instances.push(inst);
    }
    if let Some(h) = &header {
        if h.count != instances.len() {
            return Err(Error::Parse(format!(
                "header declares {} instances, found {}",
                h.count,
                instances.len()
            )));
        }
    }
    Ok((header, instances))
}

pub fn save_dataset(
    path: &Path,
    header: Option<&DatasetHeader>,
    instances: &[ProblemInstance],
) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_jsonl(&mut w, header, instances)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<(Option<DatasetHeader>, Vec<ProblemInstance>)> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_jsonl(BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn inst(x: &str) -> ProblemInstance {
        ProblemInstance::new("toy", vec![0.5, -1.0], x.parse().unwrap(), json!({"k": 2}))
    }

    #[test]
    fn jsonl_round_trip() {
        let h = DatasetHeader {
            dataset: "toy".into(),
            seed: 7,
            config_hash: "abc".into(),
            count: 2,
        };
        let data = vec![inst("01"), inst("10")];
        let mut buf = Vec::new();
        write_jsonl(&mut buf, Some(&h), &data).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().nth(1).unwrap().contains("\"x_hat\":\"01\""));
        let (h2, d2) = read_jsonl(&buf[..]).unwrap();
        assert_eq!(h2.unwrap(), h);
        assert_eq!(d2, data);
        assert_eq!(d2[0].meta_field::<usize>("k").unwrap(), 2);
    }

    #[test]
    fn count_mismatch_and_garbage_rejected() {
        let h = DatasetHeader {
            dataset: "toy".into(),
            seed: 0,
            config_hash: String::new(),
            count: 3,
        };
        let mut buf = Vec::new();
        write_jsonl(&mut buf, Some(&h), &[inst("01")]).unwrap();
        assert!(read_jsonl(&buf[..]).is_err());
        assert!(read_jsonl(&b"{\"type\":\"toy\"}\n"[..]).is_err());
    }

    #[test]
    fn validation() {
        assert!(validate_dataset(&[]).is_err());
        assert!(validate_dataset(&[inst("01"), inst("10")]).is_ok());
        let mut odd = inst("011");
        odd.x_hat = "011".parse().unwrap();
        assert!(validate_dataset(&[inst("01"), odd]).is_err());
    }
}
