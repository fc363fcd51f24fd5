//! CSV outputs. Column sets are part of the CLI contract; each header is
//! checked by the integration tests.

use std::fs::{File, OpenOptions};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::BenchError;

/// One measured quantity. Result files only ever grow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment_id: String,
    pub agent: String,
    pub seed: u64,
    pub n_stations: usize,
    pub metric: String,
    pub value: f64,
    pub sim_time_us: f64,
}

pub const RESULT_COLUMNS: [&str; 7] = ["experiment_id", "agent", "seed", "n_stations", "metric", "value", "sim_time_us"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticRow {
    pub n: u32,
    #[serde(rename = "W")]
    pub w: u32,
    pub m: u32,
    pub tau: f64,
    pub p: f64,
    pub s_model_mbps: f64,
    pub s_sim_mbps: f64,
    pub rel_err: f64,
}

pub const ANALYTIC_COLUMNS: [&str; 8] = ["n", "W", "m", "tau", "p", "s_model_mbps", "s_sim_mbps", "rel_err"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub interval: usize,
    pub throughput_mbps: f64,
    pub collision_rate: f64,
    pub idle_fraction: f64,
    pub successes: u64,
    pub collisions: u64,
}

pub const GRID_COLUMNS: [&str; 4] = ["cw_exp", "ampdu_n", "mean_mbps", "std_mbps"];

/// Append rows to `path`, writing the header only when the file is new or
/// empty.
pub fn append_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), BenchError> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new().create(true).append(true).open(path).map_err(BenchError::io(path))?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    for r in rows {
        w.serialize(r).map_err(BenchError::csv(path))?;
    }
    w.flush().map_err(BenchError::io(path))?;
    Ok(())
}

/// Replace `path` with a header and `rows`.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), BenchError> {
    let file = File::create(path).map_err(BenchError::io(path))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r).map_err(BenchError::csv(path))?;
    }
    w.flush().map_err(BenchError::io(path))?;
    Ok(())
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, BenchError> {
    let mut r = csv::Reader::from_path(path).map_err(BenchError::csv(path))?;
    r.deserialize().collect::<Result<_, _>>().map_err(BenchError::csv(path))
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf, BenchError> {
    std::fs::create_dir_all(dir).map_err(BenchError::io(dir))?;
    Ok(dir.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: f64) -> ResultRow {
        ResultRow {
            experiment_id: "e".into(),
            agent: "gdm".into(),
            seed: 1,
            n_stations: 30,
            metric: "throughput_mbps".into(),
            value: v,
            sim_time_us: 2e6,
        }
    }

    #[test]
    fn append_writes_one_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        append_rows(&path, &[row(1.0)]).unwrap();
        append_rows(&path, &[row(2.0), row(3.5)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), RESULT_COLUMNS.join(","));
        assert_eq!(text.lines().filter(|l| l.starts_with("experiment_id")).count(), 1);
        let back: Vec<ResultRow> = read_rows(&path).unwrap();
        assert_eq!(back, vec![row(1.0), row(2.0), row(3.5)]);
    }
}
