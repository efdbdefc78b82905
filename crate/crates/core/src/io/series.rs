use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::inference::Dataset;

/// Allowed relative deviation of each time step from the first one.
pub const SPACING_TOLERANCE: f64 = 1e-6;

/// Raw contents of a series file.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesData {
    pub t: Option<Vec<f64>>,
    pub x: Vec<f64>,
}

impl SeriesData {
    /// Sampling period implied by the `t` column: mean spacing, after
    /// checking every step against the first within `SPACING_TOLERANCE`.
    pub fn spacing(&self) -> Result<Option<f64>> {
        let Some(t) = &self.t else { return Ok(None) };
        if t.len() < 2 {
            return Err(Error::Ingestion {
                index: t.len(),
                reason: "need at least two time stamps".into(),
            });
        }
        let first = t[1] - t[0];
        if !(first > 0.0) {
            return Err(Error::Ingestion {
                index: 1,
                reason: format!("time stamps must be strictly increasing ({} then {})", t[0], t[1]),
            });
        }
        for i in 2..t.len() {
            let step = t[i] - t[i - 1];
            if !(step > 0.0) {
                return Err(Error::Ingestion {
                    index: i,
                    reason: format!("time stamps must be strictly increasing ({} then {})", t[i - 1], t[i]),
                });
            }
            if (step - first).abs() > SPACING_TOLERANCE * first {
                return Err(Error::Ingestion {
                    index: i,
                    reason: format!("non-uniform spacing: step {step} differs from {first}"),
                });
            }
        }
        Ok(Some((t[t.len() - 1] - t[0]) / (t.len() - 1) as f64))
    }
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?)
}

fn parse_value(field: Option<&str>, row: usize, column: &str) -> Result<f64> {
    let raw = field.unwrap_or("");
    if raw.is_empty() {
        return Err(Error::Ingestion {
            index: row,
            reason: format!("missing value in column '{column}'"),
        });
    }
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Ingestion {
            index: row,
            reason: format!("invalid value '{raw}' in column '{column}'"),
        }),
    }
}

/// Reads one numeric column by header name, or the last column when `name` is `None`.
pub fn read_column(path: &Path, name: Option<&str>) -> Result<Vec<f64>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers()?.clone();
    let idx = match name {
        Some(n) => headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(n))
            .ok_or_else(|| Error::Ingestion {
                index: 0,
                reason: format!("no column named '{n}' in {}", path.display()),
            })?,
        None if headers.is_empty() => {
            return Err(Error::Ingestion {
                index: 0,
                reason: "file has no columns".into(),
            })
        }
        None => headers.len() - 1,
    };
    let column = headers.get(idx).unwrap_or("").to_string();
    let mut values = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Ingestion {
            index: row,
            reason: e.to_string(),
        })?;
        values.push(parse_value(rec.get(idx), row, &column)?);
    }
    Ok(values)
}

/// Reads a series file with columns `(t, x)` or just `(x)`.
pub fn read_series(path: &Path) -> Result<SeriesData> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let x_idx = find("x").ok_or_else(|| Error::Ingestion {
        index: 0,
        reason: format!("{} has no 'x' column", path.display()),
    })?;
    let t_idx = find("t");
    let mut t = Vec::new();
    let mut x = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Ingestion {
            index: row,
            reason: e.to_string(),
        })?;
        if let Some(ti) = t_idx {
            t.push(parse_value(rec.get(ti), row, "t")?);
        }
        x.push(parse_value(rec.get(x_idx), row, "x")?);
    }
    Ok(SeriesData {
        t: t_idx.map(|_| t),
        x,
    })
}

/// Loads a uniformly sampled series. A `t` column fixes `Δt`; otherwise
/// `dt_override` must be given. When both are present they must agree.
pub fn load_series(path: &Path, dt_override: Option<f64>) -> Result<Dataset> {
    let data = read_series(path)?;
    let dt = match (data.spacing()?, dt_override) {
        (Some(dt), None) => dt,
        (None, Some(dt)) => dt,
        (Some(dt), Some(given)) => {
            if (dt - given).abs() > SPACING_TOLERANCE * given.abs() {
                return Err(Error::Usage(format!("--dt {given} contradicts the time column spacing {dt}")));
            }
            dt
        }
        (None, None) => return Err(Error::Usage("series has no 't' column; pass --dt".into())),
    };
    Dataset::new(data.x, dt)
}

/// Writes `(t, x)` with `t_i = i·dt`, or only `x` when `dt` is `None`.
pub fn write_series<W: Write>(out: W, samples: &[f64], dt: Option<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    match dt {
        Some(dt) => {
            w.write_record(["t", "x"])?;
            for (i, x) in samples.iter().enumerate() {
                w.write_record([(i as f64 * dt).to_string(), x.to_string()])?;
            }
        }
        None => {
            w.write_record(["x"])?;
            for x in samples {
                w.write_record([x.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// `x_n = ln(p_{n+1}/p_n)`.
pub fn log_returns(prices: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = prices.iter().position(|p| !(*p > 0.0 && p.is_finite())) {
        return Err(Error::Preprocessing {
            index: i,
            reason: format!("price must be positive and finite, got {}", prices[i]),
        });
    }
    Ok(prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}
