use crate::error::{Error, Result};

/// Central-difference gradient, one coordinate at a time.
pub fn finite_diff_gradient<F>(mut f: F, x: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let fp = f(&probe);
        probe[i] = x[i] - step;
        let fm = f(&probe);
        probe[i] = x[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite evaluation while differencing coordinate {i}"
            )));
        }
        grad.push((fp - fm) / (2.0 * step));
    }
    Ok(grad)
}

/// Central-difference Jacobian of a vector-valued map; row `i` holds ∂g/∂x_i.
pub fn finite_diff_jacobian<G>(mut g: G, x: &[f64], step: f64) -> Result<Vec<Vec<f64>>>
where
    G: FnMut(&[f64]) -> Vec<f64>,
{
    let mut probe = x.to_vec();
    let mut rows = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let gp = g(&probe);
        probe[i] = x[i] - step;
        let gm = g(&probe);
        probe[i] = x[i];
        let row: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * step)).collect();
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite evaluation while differencing coordinate {i}"
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}
