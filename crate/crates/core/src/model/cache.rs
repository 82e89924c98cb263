// SPDX-License-Identifier: MIT OR Apache-2.0

/// Per-layer key/value rows, `[filled_len, n_heads * head_dim]` row-major.
#[derive(Debug, Clone)]
pub struct KVCache {
    pub(crate) keys: Vec<Vec<f64>>,
    pub(crate) values: Vec<Vec<f64>>,
    pub(crate) filled_len: usize,
    d_model: usize,
    capacity: usize,
}

impl KVCache {
    pub(crate) fn new(n_layers: usize, d_model: usize, capacity: usize) -> Self {
        Self {
            keys: vec![Vec::new(); n_layers],
            values: vec![Vec::new(); n_layers],
            filled_len: 0,
            d_model,
            capacity,
        }
    }

    /// Number of positions whose keys and values are cached.
    pub fn filled_len(&self) -> usize {
        self.filled_len
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn is_empty(&self) -> bool {
        self.filled_len == 0
    }

    /// Cached key row for `position` at `layer`.
    pub fn key(&self, layer: usize, position: usize) -> &[f64] {
        &self.keys[layer][position * self.d_model..(position + 1) * self.d_model]
    }

    pub fn value(&self, layer: usize, position: usize) -> &[f64] {
        &self.values[layer][position * self.d_model..(position + 1) * self.d_model]
    }
}
