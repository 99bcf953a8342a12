use std::collections::HashMap;

use super::{Float, Matrix};
use crate::error::{Result, SpinnError};

/// Handle to one entry of a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

#[derive(Clone, Debug, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
    pub rms: Matrix,
}

/// Named trainable tensors with their gradient accumulators and RMSProp state.
/// Iteration order is insertion order, which fixes the on-disk layout.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, value: Matrix) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(SpinnError::Config(format!("duplicate parameter name {name:?}")));
        }
        let (r, c) = value.shape();
        self.index.insert(name.to_string(), self.entries.len());
        self.entries.push(ParamEntry {
            name: name.to_string(),
            value,
            grad: Matrix::zeros(r, c),
            rms: Matrix::zeros(r, c),
        });
        Ok(ParamId(self.entries.len() - 1))
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.entries[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Matrix {
        &self.entries[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.entries[id.0].grad
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [ParamEntry] {
        &mut self.entries
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            e.grad.fill(0.0);
        }
    }

    pub fn zero_values(&mut self) {
        for e in &mut self.entries {
            e.value.fill(0.0);
        }
    }

    /// `‖θ‖²` over every stored parameter.
    pub fn sum_squares(&self) -> Float {
        self.entries.iter().map(|e| e.value.sum_squares()).sum()
    }

    /// Adds the gradient of `lambda · ‖θ‖²`.
    pub fn add_l2_grad(&mut self, lambda: Float) {
        if lambda == 0.0 {
            return;
        }
        for e in &mut self.entries {
            for (g, v) in e.grad.data_mut().iter_mut().zip(e.value.data()) {
                *g += 2.0 * lambda * v;
            }
        }
    }

    pub fn grad_norm(&self) -> Float {
        self.entries.iter().map(|e| e.grad.sum_squares()).sum::<Float>().sqrt()
    }

    /// First parameter whose value or gradient holds a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| !e.value.is_finite() || !e.grad.is_finite())
            .map(|e| e.name.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique_and_shapes_paired() {
        let mut store = ParamStore::new();
        let id = store.add("w", Matrix::filled(2, 3, 1.5)).unwrap();
        assert!(store.add("w", Matrix::zeros(1, 1)).is_err());
        assert_eq!(store.grad(id).shape(), (2, 3));
        assert_eq!(store.entries()[0].rms.shape(), (2, 3));
        assert_eq!(store.find("w"), Some(id));
        assert_eq!(store.sum_squares(), 6.0 * 2.25);
        store.add_l2_grad(0.5);
        assert!(store.grad(id).data().iter().all(|&g| g == 1.5));
        store.zero_grads();
        assert_eq!(store.grad_norm(), 0.0);
    }
}
