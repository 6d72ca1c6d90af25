//! Multinomial logistic regression on frozen embeddings.
//!
//! Features are standardized with training statistics and a bias column is
//! appended. The objective is mean cross-entropy plus `l2/2·‖W‖²` (bias
//! excluded), minimized by accelerated gradient descent with step `1/L`,
//! where `L` bounds the gradient's Lipschitz constant.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub l2: f64,
    pub max_iter: usize,
    /// Stop once the largest gradient entry falls below this.
    pub tol: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            l2: 1e-3,
            max_iter: 3000,
            tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticProbe {
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// `(F+1)×C`, last row is the bias.
    weights: Matrix,
}

fn standardize(x: &Matrix, mean: &[f64], scale: &[f64]) -> Matrix {
    Matrix::from_fn(x.rows(), x.cols() + 1, |i, j| {
        if j == x.cols() {
            1.0
        } else {
            (x[(i, j)] - mean[j]) / scale[j]
        }
    })
}

/// Largest eigenvalue of `XᵀX / n` by power iteration.
fn gram_norm(x: &Matrix) -> Result<f64> {
    let n = x.rows() as f64;
    let mut v = Matrix::filled(x.cols(), 1, 1.0);
    let mut lambda = 0.0;
    for _ in 0..100 {
        let w = x.matmul_tn(&x.matmul(&v)?)?.scale(1.0 / n);
        let nw = linalg::norm(w.as_slice());
        if nw == 0.0 {
            return Ok(0.0);
        }
        lambda = nw / linalg::norm(v.as_slice());
        v = w.scale(1.0 / nw);
    }
    Ok(lambda)
}

impl LogisticProbe {
    pub fn fit(x: &Matrix, y: &[usize], num_classes: usize, cfg: &ProbeConfig) -> Result<Self> {
        if x.rows() != y.len() || x.rows() == 0 {
            return Err(Error::shape("probe", format!("{} rows, {} labels", x.rows(), y.len())));
        }
        let mut present = vec![false; num_classes];
        for &c in y {
            *present
                .get_mut(c)
                .ok_or_else(|| Error::arg(format!("label {c} >= {num_classes} classes")))? = true;
        }
        if present.iter().filter(|&&p| p).count() < 2 {
            return Err(Error::arg("probe needs at least two classes in its training set"));
        }
        let (n, f) = x.shape();
        let mean: Vec<f64> = (0..f).map(|j| (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64).collect();
        let scale: Vec<f64> = (0..f)
            .map(|j| {
                let var = (0..n).map(|i| {
                        let c = x[(i, j)] - mean[j];
                        c * c
                    }).sum::<f64>() / n as f64;
                let s = libm::sqrt(var);
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        let xs = standardize(x, &mean, &scale);
        let target = Matrix::from_fn(n, num_classes, |i, c| if y[i] == c { 1.0 } else { 0.0 });
        let lipschitz = gram_norm(&xs)? + cfg.l2;
        let step = 1.0 / lipschitz.max(1e-12);
        let reg_mask = Matrix::from_fn(f + 1, num_classes, |j, _| if j < f { 1.0 } else { 0.0 });

        let gradient = |w: &Matrix| -> Result<Matrix> {
            let p = linalg::softmax_rows(&xs.matmul(w)?);
            let mut g = xs.matmul_tn(&p.sub(&target)?)?.scale(1.0 / n as f64);
            g.add_scaled_assign(&w.hadamard(&reg_mask)?, cfg.l2);
            Ok(g)
        };
        let mut w = Matrix::zeros(f + 1, num_classes);
        let mut look = w.clone();
        let mut momentum = 1.0f64;
        for _ in 0..cfg.max_iter {
            let g = gradient(&look)?;
            if g.as_slice().iter().all(|v| v.abs() < cfg.tol) {
                w = look;
                break;
            }
            let mut next = look.clone();
            next.add_scaled_assign(&g, -step);
            let m_next = (1.0 + libm::sqrt(1.0 + 4.0 * momentum * momentum)) / 2.0;
            let beta = (momentum - 1.0) / m_next;
            look = next.clone();
            look.add_scaled_assign(&next.sub(&w)?, beta);
            w = next;
            momentum = m_next;
        }
        if !w.is_finite() {
            return Err(Error::Numeric { op: "probe fit" });
        }
        Ok(LogisticProbe {
            mean,
            scale,
            weights: w,
        })
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.mean.len() {
            return Err(Error::shape(
                "probe",
                format!("{} features, probe trained on {}", x.cols(), self.mean.len()),
            ));
        }
        Ok(linalg::softmax_rows(&standardize(x, &self.mean, &self.scale).matmul(&self.weights)?))
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        Ok(crate::losses::pseudo_labels(&self.predict_proba(x)?))
    }

    pub fn accuracy(&self, x: &Matrix, y: &[usize]) -> Result<f64> {
        accuracy(&self.predict(x)?, y)
    }
}

pub fn accuracy(pred: &[usize], y: &[usize]) -> Result<f64> {
    if pred.len() != y.len() || y.is_empty() {
        return Err(Error::arg(format!("{} predictions for {} labels", pred.len(), y.len())));
    }
    Ok(pred.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn separable_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let y: Vec<usize> = (0..60).map(|i| i % 3).collect();
        let x = Matrix::from_fn(60, 2, |i, j| {
            let c = (y[i] as f64) * 4.0;
            c * if j == 0 { 1.0 } else { -0.5 } + rng.random_range(-0.5..0.5) + 100.0
        });
        let p = LogisticProbe::fit(&x, &y, 3, &ProbeConfig::default()).unwrap();
        assert_eq!(p.accuracy(&x, &y).unwrap(), 1.0);
    }

    #[test]
    fn constant_features_give_majority() {
        let y = [0, 0, 0, 1, 0, 1, 0, 0];
        let x = Matrix::filled(8, 3, 2.0);
        let p = LogisticProbe::fit(&x, &y, 2, &ProbeConfig::default()).unwrap();
        assert_eq!(p.predict(&x).unwrap(), vec![0; 8]);
    }

    #[test]
    fn single_class_is_rejected() {
        let x = Matrix::filled(4, 1, 1.0);
        assert!(LogisticProbe::fit(&x, &[1, 1, 1, 1], 2, &ProbeConfig::default()).is_err());
    }
}
