// SPDX-License-Identifier: Apache-2.0

//! Uniformly sampled scalar signals and their on-disk CSV form.
//!
//! A series is written as `t,re,im` rows plus a `<file>.meta.json` sidecar
//! carrying `{t0, dt, label, generator, seed}`. Sample `n` always sits at
//! `t0 + n * dt`; times are never accumulated.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum SeriesError {
    #[error("time step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("series must contain at least one sample")]
    Empty,
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed csv {path}: {msg}")]
    Csv { path: PathBuf, msg: String },
    #[error("malformed metadata {path}: {msg}")]
    Meta { path: PathBuf, msg: String },
}

/// Provenance stored next to every series file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub t0: f64,
    pub dt: f64,
    pub label: String,
    #[serde(default)]
    pub generator: serde_json::Value,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    t0: f64,
    dt: f64,
    values: Vec<C64>,
    pub label: String,
}

impl TimeSeries {
    pub fn new(t0: f64, dt: f64, values: Vec<C64>, label: impl Into<String>) -> Result<Self, SeriesError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SeriesError::BadStep(dt));
        }
        if values.is_empty() {
            return Err(SeriesError::Empty);
        }
        Ok(Self { t0, dt, values, label: label.into() })
    }

    pub fn from_real(t0: f64, dt: f64, values: &[f64], label: impl Into<String>) -> Result<Self, SeriesError> {
        Self::new(t0, dt, values.iter().map(|&v| C64::new(v, 0.0)).collect(), label)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// Time of sample `n`.
    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |n| self.time(n))
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// True when every imaginary part is exactly zero.
    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Samples `start..end` as a new series whose origin is the time of `start`.
    pub fn window(&self, start: usize, end: usize) -> Result<Self, SeriesError> {
        let end = end.min(self.len());
        if start >= end {
            return Err(SeriesError::Empty);
        }
        Ok(Self {
            t0: self.time(start),
            dt: self.dt,
            values: self.values[start..end].to_vec(),
            label: self.label.clone(),
        })
    }

    pub fn map_values(&self, f: impl Fn(C64) -> C64) -> Self {
        Self { values: self.values.iter().map(|&v| f(v)).collect(), ..self.clone() }
    }

    pub fn meta(&self, generator: serde_json::Value, seed: Option<u64>) -> SeriesMeta {
        SeriesMeta { t0: self.t0, dt: self.dt, label: self.label.clone(), generator, seed }
    }

    /// Writes `path` as CSV and `path.meta.json` beside it.
    pub fn write_csv(&self, path: &Path, meta: &SeriesMeta) -> Result<(), SeriesError> {
        let io_err = |source| SeriesError::Io { path: path.to_path_buf(), source };
        let file = File::create(path).map_err(io_err)?;
        let mut w = BufWriter::new(file);
        writeln!(w, "t,re,im").map_err(io_err)?;
        for (n, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{},{}", self.time(n), v.re, v.im).map_err(io_err)?;
        }
        w.flush().map_err(io_err)?;
        let meta_path = meta_path(path);
        let text = serde_json::to_string_pretty(meta).expect("metadata serializes");
        std::fs::write(&meta_path, text).map_err(|source| SeriesError::Io { path: meta_path, source })
    }

    /// Reads a series written by [`TimeSeries::write_csv`]. When the sidecar is
    /// missing, `t0` and `dt` are recovered from the first two time stamps.
    pub fn read_csv(path: &Path) -> Result<(Self, Option<SeriesMeta>), SeriesError> {
        let file = File::open(path).map_err(|source| SeriesError::Io { path: path.to_path_buf(), source })?;
        let csv_err = |msg: String| SeriesError::Csv { path: path.to_path_buf(), msg };
        let mut rdr = csv::Reader::from_reader(BufReader::new(file));
        let headers = rdr.headers().map_err(|e| csv_err(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "re", "im"] {
            return Err(csv_err(format!("expected header t,re,im, found {:?}", headers)));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| csv_err(e.to_string()))?;
            let field = |i: usize| -> Result<f64, SeriesError> {
                rec.get(i)
                    .ok_or_else(|| csv_err(format!("row {} too short", line + 2)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| csv_err(format!("row {}: {e}", line + 2)))
            };
            times.push(field(0)?);
            values.push(C64::new(field(1)?, field(2)?));
        }
        if values.is_empty() {
            return Err(SeriesError::Empty);
        }
        let mp = meta_path(path);
        let meta = if mp.exists() {
            let text = std::fs::read_to_string(&mp).map_err(|source| SeriesError::Io { path: mp.clone(), source })?;
            Some(serde_json::from_str::<SeriesMeta>(&text).map_err(|e| SeriesError::Meta { path: mp, msg: e.to_string() })?)
        } else {
            None
        };
        let (t0, dt, label) = match &meta {
            Some(m) => (m.t0, m.dt, m.label.clone()),
            None => {
                let dt = if times.len() > 1 { times[1] - times[0] } else { 1.0 };
                (times[0], dt, String::new())
            }
        };
        Ok((Self::new(t0, dt, values, label)?, meta))
    }
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_step_and_empty() {
        assert!(matches!(TimeSeries::from_real(0.0, 0.0, &[1.0], ""), Err(SeriesError::BadStep(_))));
        assert!(matches!(TimeSeries::from_real(0.0, -1.0, &[1.0], ""), Err(SeriesError::BadStep(_))));
        assert!(matches!(TimeSeries::from_real(0.0, 0.1, &[], ""), Err(SeriesError::Empty)));
    }

    #[test]
    fn times_do_not_drift() {
        let s = TimeSeries::from_real(3.0, 0.01, &vec![0.0; 200_001], "").unwrap();
        assert_eq!(s.time(200_000), 3.0 + 200_000.0 * 0.01);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let s = TimeSeries::new(
            200.0,
            0.05,
            vec![C64::new(0.1, -2.5e-17), C64::new(1.0 / 3.0, 0.0), C64::new(-7.25e-3, 1e-300)],
            "demo",
        )
        .unwrap();
        let meta = s.meta(serde_json::json!({"model": "test"}), Some(7));
        s.write_csv(&path, &meta).unwrap();
        let (back, m) = TimeSeries::read_csv(&path).unwrap();
        assert_eq!(back, s);
        assert_eq!(m.unwrap(), meta);
    }

    #[test]
    fn csv_without_sidecar_infers_grid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "t,re,im\n1.5,1,0\n1.75,2,0\n2,3,0\n").unwrap();
        let (s, m) = TimeSeries::read_csv(&path).unwrap();
        assert!(m.is_none());
        assert_eq!(s.t0(), 1.5);
        assert_eq!(s.dt(), 0.25);
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn csv_rejects_wrong_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "time,value\n0,1\n").unwrap();
        assert!(matches!(TimeSeries::read_csv(&path), Err(SeriesError::Csv { .. })));
    }
}
