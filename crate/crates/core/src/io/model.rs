use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::line_col;
use crate::error::{Error, Result};
use crate::fit::{FitConfig, FitDiagnostics, FitResult};
use crate::inference::{Dataset, SgpState};
use crate::kernels::KernelSpec;

pub const MODEL_FORMAT_VERSION: i64 = 1;

/// A fitted model together with the facts needed to use and audit it.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub state: SgpState,
    pub elbo: f64,
    pub elbo_prime: f64,
    pub iterations: usize,
    pub converged: bool,
    pub fingerprint: String,
    /// Smallest and largest increment start point of the training data.
    pub data_range: [f64; 2],
    pub diagnostics: FitDiagnostics,
}

impl SavedModel {
    pub fn from_fit(result: &FitResult, dataset: &Dataset) -> Self {
        let (lo, hi) = dataset.min_max();
        SavedModel {
            state: result.state.clone(),
            elbo: result.elbo,
            elbo_prime: result.elbo_prime,
            iterations: result.iterations,
            converged: result.converged,
            fingerprint: result.fingerprint.clone(),
            data_range: [lo, hi],
            diagnostics: result.diagnostics.clone(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: i64,
    fingerprint: String,
    elbo: f64,
    elbo_prime: f64,
    iterations: usize,
    converged: bool,
    data_range: [f64; 2],
    v: f64,
    pseudo_inputs: Vec<f64>,
    mu_f: Vec<f64>,
    mu_s: Vec<f64>,
    /// Row-major.
    f_cov: Vec<Vec<f64>>,
    s_cov: Vec<Vec<f64>>,
    kernel_f: KernelSpec,
    kernel_s: KernelSpec,
    diagnostics: FitDiagnostics,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(name: &str, rows: &[Vec<f64>], m: usize) -> Result<DMatrix<f64>> {
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(Error::Parse(format!("{name} must be a {m}x{m} matrix")));
    }
    Ok(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
}

fn toml_error(text: &str, e: toml::de::Error) -> String {
    match e.span() {
        Some(span) => {
            let (line, col) = line_col(text, span.start);
            format!("line {line}, column {col}: {}", e.message().trim())
        }
        None => e.message().trim().to_string(),
    }
}

pub fn save_model<W: Write>(mut out: W, model: &SavedModel) -> Result<()> {
    let s = &model.state;
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        fingerprint: model.fingerprint.clone(),
        elbo: model.elbo,
        elbo_prime: model.elbo_prime,
        iterations: model.iterations,
        converged: model.converged,
        data_range: model.data_range,
        v: s.v,
        pseudo_inputs: s.pseudo_inputs.clone(),
        mu_f: s.mu_f.iter().copied().collect(),
        mu_s: s.mu_s.iter().copied().collect(),
        f_cov: rows(&s.f_cov),
        s_cov: rows(&s.s_cov),
        kernel_f: s.kernel_f.clone(),
        kernel_s: s.kernel_s.clone(),
        diagnostics: model.diagnostics.clone(),
    };
    let text = toml::to_string(&file).map_err(|e| Error::Numerical(format!("cannot encode model: {e}")))?;
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

pub fn parse_model(text: &str) -> Result<SavedModel> {
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::Parse(toml_error(text, e)))?;
    match table.get("format_version") {
        Some(toml::Value::Integer(v)) if *v > MODEL_FORMAT_VERSION || *v < 1 => {
            return Err(Error::Version {
                found: *v,
                supported: MODEL_FORMAT_VERSION,
            })
        }
        Some(toml::Value::Integer(_)) => {}
        _ => return Err(Error::Parse("missing integer format_version".into())),
    }
    let f: ModelFile = toml::from_str(text).map_err(|e| Error::Parse(toml_error(text, e)))?;
    let m = f.pseudo_inputs.len();
    if m == 0 || f.mu_f.len() != m || f.mu_s.len() != m {
        return Err(Error::Parse(format!(
            "pseudo_inputs, mu_f and mu_s must have equal nonzero length (got {}, {}, {})",
            m,
            f.mu_f.len(),
            f.mu_s.len()
        )));
    }
    f.kernel_f.validate()?;
    f.kernel_s.validate()?;
    Ok(SavedModel {
        state: SgpState {
            pseudo_inputs: f.pseudo_inputs,
            kernel_f: f.kernel_f,
            kernel_s: f.kernel_s,
            v: f.v,
            mu_f: DVector::from_vec(f.mu_f),
            f_cov: from_rows("f_cov", &f.f_cov, m)?,
            mu_s: DVector::from_vec(f.mu_s),
            s_cov: from_rows("s_cov", &f.s_cov, m)?,
        },
        elbo: f.elbo,
        elbo_prime: f.elbo_prime,
        iterations: f.iterations,
        converged: f.converged,
        fingerprint: f.fingerprint,
        data_range: f.data_range,
        diagnostics: f.diagnostics,
    })
}

pub fn load_model(path: &Path) -> Result<SavedModel> {
    let text = std::fs::read_to_string(path)?;
    parse_model(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// `key = value` lines for any subset of the fit settings; unknown keys are rejected.
pub fn parse_fit_config(text: &str) -> Result<FitConfig> {
    let cfg: FitConfig = toml::from_str(text).map_err(|e| Error::Config(toml_error(text, e)))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_fit_config(path: &Path) -> Result<FitConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_fit_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
