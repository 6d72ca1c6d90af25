//! Message mixup between two graphs of different sizes.
//!
//! The partner's messages `M̄` are pulled to the size of `M` with a linear
//! cross attention: `Q = M·W_Q`, `K = M̄·W_K`,
//! `M̂ = softmax_row(Q) · (softmax_col(K)ᵀ · M̄)`. The values are `M̄` (not `M`)
//! so the product is well formed and `M̂` carries the partner's content at
//! `M`'s size. The blend is then `M' = (1 − Θ)⊙M + Θ⊙M̂`.

use alloc::format;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::augment::IndicatorMatrix;
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::message::MessageMatrix;
use crate::params::glorot;

/// Attention projections, both `(d+p)×k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixupParams {
    pub w_q: Matrix,
    pub w_k: Matrix,
}

impl MixupParams {
    pub fn new(w_q: Matrix, w_k: Matrix) -> Result<Self> {
        if w_q.shape() != w_k.shape() {
            return Err(Error::shape(
                "MixupParams::new",
                format!("W_Q {:?} vs W_K {:?}", w_q.shape(), w_k.shape()),
            ));
        }
        if w_q.cols() == 0 {
            return Err(Error::arg("attention width k must be positive"));
        }
        if !(w_q.is_finite() && w_k.is_finite()) {
            return Err(Error::arg("mixup parameters must be finite"));
        }
        Ok(MixupParams { w_q, w_k })
    }

    pub fn random<R: Rng + ?Sized>(width: usize, k: usize, rng: &mut R) -> Result<Self> {
        Self::new(glorot(width, k, rng), glorot(width, k, rng))
    }

    pub fn width(&self) -> usize {
        self.w_q.rows()
    }

    pub fn k(&self) -> usize {
        self.w_q.cols()
    }
}

/// `M̂` for message matrices; output has the rows of `m`.
pub fn cross_mix(m: &MessageMatrix, m_bar: &MessageMatrix, params: &MixupParams) -> Result<Matrix> {
    cross_mix_rows(m.rows(), m_bar.rows(), params)
}

pub fn cross_mix_rows(m: &Matrix, m_bar: &Matrix, params: &MixupParams) -> Result<Matrix> {
    if m.cols() != m_bar.cols() || m.cols() != params.width() {
        return Err(Error::shape(
            "cross_mix",
            format!(
                "message widths {} and {}, parameter width {}",
                m.cols(),
                m_bar.cols(),
                params.width()
            ),
        ));
    }
    let q = linalg::softmax_rows(&m.matmul(&params.w_q)?);
    let k = linalg::softmax_cols(&m_bar.matmul(&params.w_k)?);
    let context = k.matmul_tn(m_bar)?;
    q.matmul(&context)
}

/// Differentiable [`cross_mix_rows`].
pub fn cross_mix_tape(t: &mut Tape, m: Var, m_bar: Var, w_q: Var, w_k: Var) -> Result<Var> {
    let (w, wb) = (t.value(m).cols(), t.value(m_bar).cols());
    if w != wb {
        return Err(Error::shape("cross_mix", format!("message widths {w} and {wb}")));
    }
    let q = t.matmul(m, w_q)?;
    let q = t.softmax_rows(q)?;
    let k = t.matmul(m_bar, w_k)?;
    let k = t.softmax_cols(k)?;
    let kt = t.transpose(k)?;
    let context = t.matmul(kt, m_bar)?;
    t.matmul(q, context)
}

/// `M' = (1 − Θ)⊙M + Θ⊙M̂`, keeping the index map of `m`.
pub fn message_mixup(m: &MessageMatrix, m_hat: &Matrix, theta: &IndicatorMatrix) -> Result<MessageMatrix> {
    m.rows().expect_same_shape(m_hat, "message_mixup")?;
    if theta.shape() != m.rows().shape() {
        return Err(Error::shape(
            "message_mixup",
            format!("indicator {:?} vs messages {:?}", theta.shape(), m.rows().shape()),
        ));
    }
    let mut out = m.rows().clone();
    for ((o, &h), &b) in out.as_mut_slice().iter_mut().zip(m_hat.as_slice()).zip(theta.as_bits()) {
        if b {
            *o = h;
        }
    }
    m.with_rows(out)
}

/// Differentiable blend; `theta` may be a constant or a straight-through
/// sample.
pub fn message_mixup_tape(t: &mut Tape, m: Var, m_hat: Var, theta: Var) -> Result<Var> {
    let (r, c) = t.value(theta).shape();
    let ones = t.constant(Matrix::filled(r, c, 1.0));
    let keep = t.sub(ones, theta)?;
    let kept = t.mul(keep, m)?;
    let mixed = t.mul(theta, m_hat)?;
    t.add(kept, mixed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn output_has_size_of_m() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = MixupParams::random(3, 4, &mut rng).unwrap();
        let out = cross_mix_rows(&rand_matrix(6, 3, &mut rng), &rand_matrix(10, 3, &mut rng), &p).unwrap();
        assert_eq!(out.shape(), (6, 3));
        assert!(cross_mix_rows(&rand_matrix(6, 3, &mut rng), &rand_matrix(10, 2, &mut rng), &p).is_err());
    }

    #[test]
    fn constant_partner_rows_pass_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = MixupParams::random(3, 2, &mut rng).unwrap();
        let u = [0.3, -1.25, 2.0];
        let m_bar = Matrix::from_fn(7, 3, |_, j| u[j]);
        let out = cross_mix_rows(&rand_matrix(4, 3, &mut rng), &m_bar, &p).unwrap();
        for r in out.row_iter() {
            for (a, b) in r.iter().zip(&u) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tape_matches_plain() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = MixupParams::random(3, 5, &mut rng).unwrap();
        let (m, mb) = (rand_matrix(4, 3, &mut rng), rand_matrix(9, 3, &mut rng));
        let plain = cross_mix_rows(&m, &mb, &p).unwrap();
        let mut t = Tape::new();
        let vars = [m, mb, p.w_q.clone(), p.w_k.clone()].map(|x| t.constant(x));
        let out = cross_mix_tape(&mut t, vars[0], vars[1], vars[2], vars[3]).unwrap();
        assert!(t.value(out).max_abs_diff(&plain).unwrap() < 1e-14);
    }

    #[test]
    fn blend_gates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = crate::fixtures::triangle();
        let m = crate::message::build_messages(&g, crate::MessageFn::Concat).unwrap();
        let m_hat = rand_matrix(6, 3, &mut rng);
        assert_eq!(message_mixup(&m, &m_hat, &IndicatorMatrix::zeros(6, 3)).unwrap(), m);
        assert_eq!(message_mixup(&m, &m_hat, &IndicatorMatrix::ones(6, 3)).unwrap().rows(), &m_hat);
        let mut theta = IndicatorMatrix::zeros(6, 3);
        theta.set(4, 1, true);
        let out = message_mixup(&m, &m_hat, &theta).unwrap();
        let mut expect = m.rows().clone();
        expect[(4, 1)] = m_hat[(4, 1)];
        assert_eq!(out.rows(), &expect);
        assert!(message_mixup(&m, &Matrix::zeros(5, 3), &theta).is_err());

        let mut t = Tape::new();
        let mv = t.constant(m.rows().clone());
        let hv = t.constant(m_hat.clone());
        let ones = t.constant(IndicatorMatrix::ones(6, 3).to_matrix());
        let full = message_mixup_tape(&mut t, mv, hv, ones).unwrap();
        assert_eq!(t.value(full), &m_hat);
    }
}
