//! Named parameter storage, tape binding, and the Adam optimizer.

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Index;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(usize);

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Matrix>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Matrix::len).sum()
    }

    /// Replaces every value, checking names and shapes against the current
    /// contents.
    pub fn load(&mut self, entries: Vec<(String, Matrix)>) -> Result<()> {
        if entries.len() != self.values.len() {
            return Err(Error::Config(alloc::format!(
                "checkpoint has {} tensors, model has {}",
                entries.len(),
                self.values.len()
            )));
        }
        for (i, (name, value)) in entries.into_iter().enumerate() {
            if name != self.names[i] || value.shape() != self.values[i].shape() {
                return Err(Error::Config(alloc::format!(
                    "tensor {i}: checkpoint has '{name}' {:?}, model expects '{}' {:?}",
                    value.shape(),
                    self.names[i],
                    self.values[i].shape()
                )));
            }
            self.values[i] = value;
        }
        Ok(())
    }

    /// Registers every parameter as a gradient-tracking leaf on `tape`.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        Bound(self.values.iter().map(|m| tape.param(m.clone())).collect())
    }

    /// Registers every parameter as a constant (no gradients).
    pub fn bind_frozen(&self, tape: &mut Tape) -> Bound {
        Bound(self.values.iter().map(|m| tape.constant(m.clone())).collect())
    }
}

/// Tape handles for every parameter of a [`ParamStore`], indexed by
/// [`ParamId`].
#[derive(Clone, Debug)]
pub struct Bound(Vec<Var>);

impl Bound {
    /// Handles in store order, e.g. leaves created by a gradient check.
    pub fn from_vars(vars: Vec<Var>) -> Self {
        Bound(vars)
    }

    pub fn vars(&self) -> &[Var] {
        &self.0
    }

    /// Gradients from the last backward pass, one entry per parameter.
    pub fn grads(&self, tape: &Tape) -> Vec<Option<Matrix>> {
        self.0.iter().map(|&v| tape.grad(v).cloned()).collect()
    }
}

impl Index<ParamId> for Bound {
    type Output = Var;

    fn index(&self, id: ParamId) -> &Var {
        &self.0[id.0]
    }
}

/// Glorot-uniform initialization for a `fan_in × fan_out` weight.
pub fn glorot<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Matrix {
    let limit = libm::sqrt(6.0 / (fan_in + fan_out).max(1) as f64);
    Matrix::from_fn(fan_in, fan_out, |_, _| rng.random_range(-limit..=limit))
}

/// Dense layer handles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let weight = store.add(alloc::format!("{name}.weight"), glorot(fan_in, fan_out, rng));
        let bias = store.add(alloc::format!("{name}.bias"), Matrix::zeros(1, fan_out));
        Linear { weight, bias }
    }

    pub fn forward(&self, t: &mut Tape, b: &Bound, x: Var) -> Result<Var> {
        t.linear(x, b[self.weight], b[self.bias])
    }

    pub fn fan_in(&self, store: &ParamStore) -> usize {
        store.get(self.weight).rows()
    }

    pub fn fan_out(&self, store: &ParamStore) -> usize {
        store.get(self.weight).cols()
    }
}

/// Adaptive-moment gradient descent.
#[derive(Clone, Debug)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u32,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl Adam {
    pub fn new(store: &ParamStore, learning_rate: f64) -> Self {
        let zeros: Vec<Matrix> = store.values.iter().map(|m| Matrix::zeros(m.rows(), m.cols())).collect();
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    /// One update. Parameters without a gradient are left untouched.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Option<Matrix>]) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - libm::pow(self.beta1, t as f64);
        let c2 = 1.0 - libm::pow(self.beta2, t as f64);
        for (i, g) in grads.iter().enumerate() {
            let Some(g) = g else { continue };
            let (m, v, w) = (&mut self.first[i], &mut self.second[i], &mut store.values[i]);
            for (((mk, vk), wk), &gk) in m
                .as_mut_slice()
                .iter_mut()
                .zip(v.as_mut_slice())
                .zip(w.as_mut_slice())
                .zip(g.as_slice())
            {
                *mk = self.beta1 * *mk + (1.0 - self.beta1) * gk;
                *vk = self.beta2 * *vk + (1.0 - self.beta2) * gk * gk;
                let mhat = *mk / c1;
                let vhat = *vk / c2;
                *wk -= self.learning_rate * mhat / (libm::sqrt(vhat) + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_minimizes_quadratic() {
        let mut store = ParamStore::new();
        let id = store.add("x", Matrix::from_rows(&[[3.0, -2.0]]).unwrap());
        let mut opt = Adam::new(&store, 0.1);
        for _ in 0..500 {
            let mut t = Tape::new();
            let b = store.bind(&mut t);
            let sq = t.mul(b[id], b[id]).unwrap();
            let loss = t.sum(sq).unwrap();
            t.backward(loss).unwrap();
            opt.step(&mut store, &b.grads(&t));
        }
        assert!(store.get(id).as_slice().iter().all(|v| v.abs() < 1e-2));
    }

    #[test]
    fn load_checks_names_and_shapes() {
        let mut store = ParamStore::new();
        store.add("w", Matrix::zeros(2, 2));
        assert!(store.load(alloc::vec![("w".into(), Matrix::zeros(2, 3))]).is_err());
        assert!(store.load(alloc::vec![("v".into(), Matrix::zeros(2, 2))]).is_err());
        store.load(alloc::vec![("w".into(), Matrix::identity(2))]).unwrap();
        assert_eq!(store.iter().next().unwrap().1, &Matrix::identity(2));
    }
}
