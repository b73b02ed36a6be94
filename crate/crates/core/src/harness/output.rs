//! Result files.
//!
//! * `metrics.csv`: one row per cell, without wall time, so reruns are
//!   byte-identical.
//! * `plot_<axis>.csv`: per sweep value and algorithm, the mean and standard
//!   error over seeds of the SNR boost and, when present, the squared error.
//! * `results.json`: full records including wall time.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Algorithm, MetricRecord};
use crate::Result;

#[derive(Debug, Serialize, Deserialize)]
struct MetricRow {
    algorithm: Algorithm,
    sweep_value: String,
    seed: u64,
    snr_boost_db: Option<f64>,
    squared_error: Option<f64>,
    error: Option<String>,
}

pub fn write_metrics_csv<W: std::io::Write>(records: &[MetricRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(MetricRow {
            algorithm: r.algorithm,
            sweep_value: r.sweep_value.clone(),
            seed: r.seed,
            snr_boost_db: r.snr_boost_db,
            squared_error: r.squared_error,
            error: r.error.clone(),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `metrics.csv` back; wall times are not stored there and come back as zero.
pub fn read_metrics_csv<R: std::io::Read>(input: R) -> Result<Vec<MetricRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    rdr.deserialize()
        .map(|row| {
            let row: MetricRow = row?;
            Ok(MetricRecord {
                algorithm: row.algorithm,
                sweep_value: row.sweep_value,
                seed: row.seed,
                snr_boost_db: row.snr_boost_db,
                squared_error: row.squared_error,
                wall_time_s: 0.0,
                error: row.error,
            })
        })
        .collect()
}

/// Mean and standard error (sample standard deviation over `√n`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub stderr: Option<f64>,
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let stderr = (n > 1).then(|| {
        let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    });
    Some(Summary { n, mean, stderr })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub x: String,
    pub algorithm: Algorithm,
    pub n: usize,
    pub snr_boost_mean_db: Option<f64>,
    pub snr_boost_stderr_db: Option<f64>,
    pub squared_error_mean: Option<f64>,
    pub squared_error_stderr: Option<f64>,
}

/// Aggregates successful records per (sweep value, algorithm), in first-seen order.
pub fn plot_rows(records: &[MetricRecord]) -> Vec<PlotRow> {
    let mut keys: Vec<(String, Algorithm)> = Vec::new();
    for r in records {
        let key = (r.sweep_value.clone(), r.algorithm);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.sort_by_key(|(x, _)| {
        records
            .iter()
            .position(|r| &r.sweep_value == x)
            .unwrap_or(usize::MAX)
    });
    keys.into_iter()
        .map(|(x, algorithm)| {
            let ok: Vec<&MetricRecord> = records
                .iter()
                .filter(|r| r.sweep_value == x && r.algorithm == algorithm && !r.failed())
                .collect();
            let boosts: Vec<f64> = ok.iter().filter_map(|r| r.snr_boost_db).collect();
            let errors: Vec<f64> = ok.iter().filter_map(|r| r.squared_error).collect();
            let b = summarize(&boosts);
            let e = summarize(&errors);
            PlotRow {
                x,
                algorithm,
                n: boosts.len(),
                snr_boost_mean_db: b.map(|s| s.mean),
                snr_boost_stderr_db: b.and_then(|s| s.stderr),
                squared_error_mean: e.map(|s| s.mean),
                squared_error_stderr: e.and_then(|s| s.stderr),
            }
        })
        .collect()
}

/// Writes all result files into `dir` and returns their paths.
pub fn emit_results(records: &[MetricRecord], axis: &str, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let metrics = dir.join("metrics.csv");
    write_metrics_csv(records, std::fs::File::create(&metrics)?)?;

    let plot = dir.join(format!("plot_{axis}.csv"));
    let mut w = csv::Writer::from_path(&plot)?;
    for row in plot_rows(records) {
        w.serialize(row)?;
    }
    w.flush()?;

    let json = dir.join("results.json");
    std::fs::write(&json, serde_json::to_string_pretty(records)?)?;
    Ok(vec![metrics, plot, json])
}

pub fn read_results_json(path: &Path) -> Result<Vec<MetricRecord>> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}
