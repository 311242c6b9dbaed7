//! Minimal reverse-mode differentiation over dense real tensors, sized for
//! networks of at most a few thousand parameters.
//!
//! A [`Tape`] records primitive operations eagerly with cached forward
//! values; one backward pass yields gradients for every recorded input.
//! Tapes are single-use and confined to one worker. [`ParamStore`] snapshots
//! are plain values that can be shared read-only across threads.

mod gradcheck;
mod optim;
mod tape;

pub use gradcheck::{central_difference, max_relative_error};
pub use optim::{adam_step, AdamState, PlateauScheduler};
pub use tape::{elu, softplus, Gradients, Shape, Tape, Tensor, VarId};

/// Named parameter tensors with stable insertion order.
///
/// Lookup is by linear scan; stores here hold at most a handful of entries
/// and deterministic iteration order matters more than lookup speed.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }

    /// Add a named parameter. Panics on duplicate names.
    pub fn insert(&mut self, name: &str, tensor: Tensor) {
        assert!(
            !self.names.iter().any(|n| n == name),
            "duplicate parameter name {name:?}"
        );
        self.names.push(name.to_string());
        self.tensors.push(tensor);
    }

    pub fn get(&self, name: &str) -> &Tensor {
        let idx = self
            .names
            .iter()
            .position(|n| n == name)
            .unwrap_or_else(|| panic!("no parameter named {name:?}"));
        &self.tensors[idx]
    }

    pub fn entry_count(&self) -> usize {
        self.names.len()
    }

    /// Total scalar parameter count.
    pub fn total_len(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names
            .iter()
            .map(|n| n.as_str())
            .zip(self.tensors.iter())
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    /// Concatenate all entries in insertion order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.total_len());
        for t in &self.tensors {
            flat.extend_from_slice(t.data());
        }
        flat
    }

    /// Overwrite all entries from a flat vector laid out as [`to_flat`].
    pub fn set_from_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.total_len(), "flat length mismatch");
        let mut offset = 0;
        for t in &mut self.tensors {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
    }
}
