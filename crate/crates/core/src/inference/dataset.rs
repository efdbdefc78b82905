use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A uniformly sampled series `x_1..x_{N+1}` with sampling period `dt` and
/// its `N` increments.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<f64>,
    dt: f64,
    increments: Vec<f64>,
}

impl Dataset {
    pub fn new(samples: Vec<f64>, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("sampling period must be positive, got {dt}")));
        }
        if samples.len() < 3 {
            return Err(Error::Config(format!(
                "at least 3 samples (2 increments) are required, got {}",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::Config(format!("sample {i} is not finite")));
        }
        let increments = samples.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Dataset {
            samples,
            dt,
            increments,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Number of increments.
    pub fn n(&self) -> usize {
        self.increments.len()
    }

    /// States at which each increment starts, `x_1..x_N`.
    pub fn inputs(&self) -> &[f64] {
        &self.samples[..self.increments.len()]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
    }

    pub fn range(&self) -> f64 {
        let (lo, hi) = self.min_max();
        hi - lo
    }

    /// Short digest of the sample values and sampling period.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.dt.to_le_bytes());
        for x in &self.samples {
            h.update(x.to_le_bytes());
        }
        let digest = h.finalize();
        let hex: String = digest.iter().take(12).map(|b| format!("{b:02x}")).collect();
        format!("n{}-{hex}", self.samples.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn increments_and_inputs() {
        let d = Dataset::new(vec![1.0, 2.0, 4.0], 0.1).unwrap();
        assert_eq!(d.increments(), &[1.0, 2.0]);
        assert_eq!(d.inputs(), &[1.0, 2.0]);
        assert_eq!(d.n(), 2);
        assert_eq!(d.range(), 3.0);
    }

    #[test]
    fn invalid_inputs() {
        assert!(Dataset::new(vec![1.0, 2.0], 0.1).is_err());
        assert!(Dataset::new(vec![1.0, 2.0, 3.0], 0.0).is_err());
        assert!(Dataset::new(vec![1.0, f64::NAN, 3.0], 1.0).is_err());
    }

    #[test]
    fn fingerprint_changes_with_data() {
        let a = Dataset::new(vec![1.0, 2.0, 4.0], 0.1).unwrap();
        let b = Dataset::new(vec![1.0, 2.0, 4.5], 0.1).unwrap();
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
