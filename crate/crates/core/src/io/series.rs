//! Depth/width time series as CSV.

use std::path::Path;

use crate::error::{PitError, Result};
use crate::sim::{Sample, TimeSeries};

pub const HEADER: [&str; 3] = ["t", "depth_um", "width_um"];

pub fn write_timeseries_string(series: &TimeSeries) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    // Writing to memory cannot fail.
    let _ = w.write_record(HEADER);
    for r in &series.rows {
        let _ = w.write_record([r.t.to_string(), r.depth.to_string(), r.width.to_string()]);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}

pub fn write_timeseries(series: &TimeSeries, path: &Path) -> Result<()> {
    if series.rows.is_empty() {
        return Err(PitError::Invalid("time series is empty".into()));
    }
    std::fs::write(path, write_timeseries_string(series)).map_err(|e| PitError::io(path, e))
}

/// Reads any CSV with a header; returns the named columns as numbers.
pub fn read_columns(text: &str, source: &str, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let err = |line: usize, message: String| PitError::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let headers = reader.headers().map_err(|e| err(1, e.to_string()))?.clone();
    let index: Vec<usize> = names
        .iter()
        .map(|n| {
            headers.iter().position(|h| h == *n).ok_or_else(|| {
                let have: Vec<&str> = headers.iter().collect();
                err(1, format!("no column `{n}` (columns: {})", have.join(", ")))
            })
        })
        .collect::<Result<_>>()?;
    let mut out = vec![Vec::new(); names.len()];
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| err(line, e.to_string()))?;
        for (k, &i) in index.iter().enumerate() {
            let field = record.get(i).unwrap_or("");
            let v: f64 = field
                .parse()
                .map_err(|_| err(line, format!("column `{}`: expected a number, got `{field}`", names[k])))?;
            out[k].push(v);
        }
    }
    Ok(out)
}

pub fn read_timeseries_str(text: &str, source: &str) -> Result<TimeSeries> {
    let cols = read_columns(text, source, &HEADER)?;
    let rows = (0..cols[0].len())
        .map(|i| Sample {
            t: cols[0][i],
            depth: cols[1][i],
            width: cols[2][i],
        })
        .collect();
    Ok(TimeSeries { rows })
}

pub fn read_timeseries(path: &Path) -> Result<TimeSeries> {
    let text = std::fs::read_to_string(path).map_err(|e| PitError::io(path, e))?;
    read_timeseries_str(&text, &path.display().to_string())
}
