use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn rbf(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("rbf gamma must be > 0, got {gamma}")));
        }
        Ok(KernelSpec::Rbf { gamma })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Rbf { gamma } => Self::rbf(gamma).map(|_| ()),
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        Ok(self.eval_unchecked(x, y))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
            KernelSpec::Rbf { gamma } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * d2).exp()
            }
        }
    }

    /// Dense Gram matrix, row-major.
    pub fn gram(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        let n = xs.len();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.eval_unchecked(&xs[i], &xs[j]);
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        k
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kernel_examples() {
        let rbf = KernelSpec::rbf(0.5).unwrap();
        assert_eq!(rbf.eval(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(KernelSpec::Linear.eval(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        // squared distance 2
        assert_abs_diff_eq!(
            rbf.eval(&[0.0, 0.0], &[1.0, 1.0]).unwrap(),
            (-1.0f64).exp(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(rbf.eval(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.3679, epsilon = 1e-4);
        assert!(KernelSpec::Linear.eval(&[1.0], &[1.0, 2.0]).is_err());
        assert!(KernelSpec::rbf(0.0).is_err());
    }
}
