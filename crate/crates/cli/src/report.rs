//! Aggregation of result CSVs over seed runs.

use std::path::Path;

use crate::error::{runtime, CliResult};

/// Numeric columns that identify a row rather than measure it.
const KEY_COLUMNS: &[&str] = &["index", "epoch", "layers", "hidden", "count"];
const PROVENANCE: &[&str] = &["seed", "config_hash"];

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| runtime("empty CSV"))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let rows = lines
            .enumerate()
            .map(|(i, l)| {
                let row: Vec<String> = l.split(',').map(|s| s.trim().to_string()).collect();
                if row.len() != header.len() {
                    return Err(runtime(format!("row {} has {} fields, header has {}", i + 1, row.len(), header.len())));
                }
                Ok(row)
            })
            .collect::<CliResult<_>>()?;
        Ok(Table { header, rows })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| runtime(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| runtime(format!("{}: {e}", path.display())))
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// Sample standard deviation; zero for a single run.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub struct Aggregate {
    pub table: Table,
    pub markdown: String,
}

/// Per-row mean and standard deviation of every measured column across
/// `runs`, which must share their header and row keys.
pub fn aggregate(runs: &[Table], force: bool) -> CliResult<Aggregate> {
    let first = runs.first().ok_or_else(|| runtime("report needs at least one result file"))?;
    for (i, t) in runs.iter().enumerate() {
        if t.header != first.header {
            return Err(runtime(format!("schema mismatch: file {} has header {:?}, expected {:?}", i + 1, t.header, first.header)));
        }
        if t.rows.len() != first.rows.len() {
            return Err(runtime(format!("file {} has {} rows, expected {}", i + 1, t.rows.len(), first.rows.len())));
        }
    }
    let col = |name: &str| first.header.iter().position(|h| h == name);
    let (Some(_), Some(hash_col)) = (col("seed"), col("config_hash")) else {
        return Err(runtime("result files must carry seed and config_hash columns"));
    };
    let mut hashes: Vec<&str> = runs.iter().flat_map(|t| t.rows.iter().map(|r| r[hash_col].as_str())).collect();
    hashes.sort_unstable();
    hashes.dedup();
    if hashes.len() > 1 && !force {
        return Err(runtime(format!(
            "result files come from {} different configurations; pass --force to combine them",
            hashes.len()
        )));
    }

    let numeric = |c: usize| runs.iter().all(|t| t.rows.iter().all(|r| r[c].parse::<f64>().is_ok()));
    let mut keys = Vec::new();
    let mut values = Vec::new();
    for (c, name) in first.header.iter().enumerate() {
        if PROVENANCE.contains(&name.as_str()) {
            continue;
        }
        if KEY_COLUMNS.contains(&name.as_str()) || !numeric(c) {
            keys.push(c);
        } else {
            values.push(c);
        }
    }

    let mut header: Vec<String> = keys.iter().map(|&c| first.header[c].clone()).collect();
    header.push("runs".into());
    for &c in &values {
        header.push(format!("{}_mean", first.header[c]));
        header.push(format!("{}_std", first.header[c]));
    }
    let mut md = String::from("|");
    for &c in &keys {
        md.push_str(&format!(" {} |", first.header[c]));
    }
    md.push_str(" runs |");
    for &c in &values {
        md.push_str(&format!(" {} |", first.header[c]));
    }
    md.push('\n');
    md.push_str(&"|---".repeat(keys.len() + 1 + values.len()));
    md.push_str("|\n");

    let mut rows = Vec::with_capacity(first.rows.len());
    for (i, row) in first.rows.iter().enumerate() {
        for (f, t) in runs.iter().enumerate() {
            if keys.iter().any(|&c| t.rows[i][c] != row[c]) {
                return Err(runtime(format!("row {} of file {} does not line up with the first file", i + 1, f + 1)));
            }
        }
        let mut out: Vec<String> = keys.iter().map(|&c| row[c].clone()).collect();
        out.push(runs.len().to_string());
        md.push('|');
        for &c in &keys {
            md.push_str(&format!(" {} |", row[c]));
        }
        md.push_str(&format!(" {} |", runs.len()));
        for &c in &values {
            let v: Vec<f64> = runs.iter().map(|t| t.rows[i][c].parse().expect("checked numeric")).collect();
            let (m, s) = mean_std(&v);
            out.push(m.to_string());
            out.push(s.to_string());
            md.push_str(&format!(" {m:.2} ± {s:.2} |"));
        }
        md.push('\n');
        rows.push(out);
    }
    Ok(Aggregate {
        table: Table { header, rows },
        markdown: md,
    })
}
