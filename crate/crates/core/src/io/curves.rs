use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::predict::PosteriorCurve;

pub const CURVE_COLUMNS: [&str; 9] = ["x", "f_mean", "f_var", "s_mean", "s_var", "g_median", "g_lower", "g_upper", "g_mean"];

/// Column-wise table of coefficient estimates. Point estimators leave the
/// variance and interval columns as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    pub x: Vec<f64>,
    pub f_mean: Vec<f64>,
    pub f_var: Vec<f64>,
    pub s_mean: Vec<f64>,
    pub s_var: Vec<f64>,
    pub g_median: Vec<f64>,
    pub g_lower: Vec<f64>,
    pub g_upper: Vec<f64>,
    pub g_mean: Vec<f64>,
}

impl CurveTable {
    /// A point estimate of `f` and `g`; `g` fills both the median and mean
    /// columns and `s = ln g` where `g > 0`.
    pub fn from_point_estimates(x: Vec<f64>, f: Vec<f64>, g: Vec<f64>) -> Self {
        let n = x.len();
        let nan = vec![f64::NAN; n];
        CurveTable {
            s_mean: g.iter().map(|&v| if v > 0.0 { v.ln() } else { f64::NAN }).collect(),
            x,
            f_mean: f,
            f_var: nan.clone(),
            s_var: nan.clone(),
            g_median: g.clone(),
            g_lower: nan.clone(),
            g_upper: nan,
            g_mean: g,
        }
    }

    fn columns(&self) -> [&Vec<f64>; 9] {
        [
            &self.x,
            &self.f_mean,
            &self.f_var,
            &self.s_mean,
            &self.s_var,
            &self.g_median,
            &self.g_lower,
            &self.g_upper,
            &self.g_mean,
        ]
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

impl From<&PosteriorCurve> for CurveTable {
    fn from(c: &PosteriorCurve) -> Self {
        CurveTable {
            x: c.grid.clone(),
            f_mean: c.drift_mean.clone(),
            f_var: c.drift_var.clone(),
            s_mean: c.s_mean.clone(),
            s_var: c.s_var.clone(),
            g_median: c.g_median.clone(),
            g_lower: c.g_lower.clone(),
            g_upper: c.g_upper.clone(),
            g_mean: c.g_mean.clone(),
        }
    }
}

pub fn write_curves<W: Write>(out: W, table: &CurveTable) -> Result<()> {
    let cols = table.columns();
    if let Some(c) = cols.iter().position(|c| c.len() != table.len()) {
        return Err(Error::Usage(format!("curve column '{}' has the wrong length", CURVE_COLUMNS[c])));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CURVE_COLUMNS)?;
    for i in 0..table.len() {
        w.write_record(cols.iter().map(|c| c[i].to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curves<R: Read>(input: R) -> Result<CurveTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(CURVE_COLUMNS) {
        return Err(Error::Parse(format!(
            "curve table header must be '{}', got '{}'",
            CURVE_COLUMNS.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut cols: [Vec<f64>; 9] = Default::default();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (c, col) in cols.iter_mut().enumerate() {
            let raw = rec.get(c).unwrap_or("");
            let v = raw
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("row {row}, column '{}': invalid number '{raw}'", CURVE_COLUMNS[c])))?;
            col.push(v);
        }
    }
    let [x, f_mean, f_var, s_mean, s_var, g_median, g_lower, g_upper, g_mean] = cols;
    Ok(CurveTable {
        x,
        f_mean,
        f_var,
        s_mean,
        s_var,
        g_median,
        g_lower,
        g_upper,
        g_mean,
    })
}
