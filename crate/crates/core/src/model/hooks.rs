// SPDX-License-Identifier: MIT OR Apache-2.0

//! Hook points on the residual stream.
//!
//! Each block computes, per token:
//!
//! ```text
//! u  = LN1(h)                 -> PreAttnLayerNormOut (read)
//! a  = SA(u)                  -> AttnOut             (read)
//! r  = h + a                  -> PostAttnResidual    (write: add only)
//! h' = r + MLP(LN2(r))
//! ```
//!
//! Read hooks observe borrowed activations. The single write site can only
//! contribute an additive delta; the engine performs the addition itself.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HookSite {
    PreAttnLayerNormOut,
    AttnOut,
    PostAttnResidual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HookPoint {
    pub layer: usize,
    pub site: HookSite,
}

impl HookPoint {
    pub fn new(layer: usize, site: HookSite) -> Self {
        Self { layer, site }
    }
}

/// Observer/intervention interface called by the forward pass.
///
/// All methods have no-op defaults; the engine skips dispatch entirely for
/// points where `wants_read` / `wants_write` return false.
pub trait Hooks {
    fn wants_read(&self, _point: HookPoint) -> bool {
        false
    }

    /// `position` is the absolute sequence position of the token.
    fn read(&mut self, _point: HookPoint, _position: usize, _value: &[f64]) {}

    fn wants_write(&self, _layer: usize) -> bool {
        false
    }

    /// Fill `delta` (zeroed by the caller) with the vector to add to the
    /// post-attention residual and return true, or return false to leave the
    /// residual untouched.
    fn residual_add(&mut self, _layer: usize, _position: usize, _delta: &mut [f64]) -> bool {
        false
    }
}

/// Hook set that does nothing.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoHooks;

impl Hooks for NoHooks {}

/// Read-only capture of activations at a set of points.
#[derive(Debug, Clone, Default)]
pub struct CaptureHooks {
    points: Vec<HookPoint>,
    captures: BTreeMap<HookPoint, Vec<Vec<f64>>>,
}

impl CaptureHooks {
    pub fn new(points: impl IntoIterator<Item = HookPoint>) -> Self {
        let points: Vec<HookPoint> = points
            .into_iter()
            .filter(|p| p.site != HookSite::PostAttnResidual)
            .collect();
        let captures = points.iter().map(|p| (*p, Vec::new())).collect();
        Self { points, captures }
    }

    /// Captured vectors for `point`, in the order the tokens were processed.
    pub fn get(&self, point: HookPoint) -> Option<&[Vec<f64>]> {
        self.captures.get(&point).map(Vec::as_slice)
    }

    pub fn take(&mut self, point: HookPoint) -> Option<Vec<Vec<f64>>> {
        self.captures.get_mut(&point).map(std::mem::take)
    }
}

impl Hooks for CaptureHooks {
    fn wants_read(&self, point: HookPoint) -> bool {
        self.points.contains(&point)
    }

    fn read(&mut self, point: HookPoint, _position: usize, value: &[f64]) {
        if let Some(v) = self.captures.get_mut(&point) {
            v.push(value.to_vec());
        }
    }
}

/// Adds a fixed vector at one layer's post-attention residual for every token.
#[derive(Debug, Clone)]
pub struct AddVectorHook {
    pub layer: usize,
    pub vector: Vec<f64>,
}

impl Hooks for AddVectorHook {
    fn wants_write(&self, layer: usize) -> bool {
        layer == self.layer
    }

    fn residual_add(&mut self, _layer: usize, _position: usize, delta: &mut [f64]) -> bool {
        delta.copy_from_slice(&self.vector);
        true
    }
}

/// Dispatches to two hook sets in order.
pub struct Chain<'a, 'b>(pub &'a mut dyn Hooks, pub &'b mut dyn Hooks);

impl Hooks for Chain<'_, '_> {
    fn wants_read(&self, point: HookPoint) -> bool {
        self.0.wants_read(point) || self.1.wants_read(point)
    }

    fn read(&mut self, point: HookPoint, position: usize, value: &[f64]) {
        if self.0.wants_read(point) {
            self.0.read(point, position, value);
        }
        if self.1.wants_read(point) {
            self.1.read(point, position, value);
        }
    }

    fn wants_write(&self, layer: usize) -> bool {
        self.0.wants_write(layer) || self.1.wants_write(layer)
    }

    fn residual_add(&mut self, layer: usize, position: usize, delta: &mut [f64]) -> bool {
        let mut wrote = false;
        let mut scratch = vec![0.0; delta.len()];
        let pair: [&mut dyn Hooks; 2] = [&mut *self.0, &mut *self.1];
        for hooks in pair {
            if hooks.wants_write(layer) {
                scratch.iter_mut().for_each(|x| *x = 0.0);
                if hooks.residual_add(layer, position, &mut scratch) {
                    for (d, s) in delta.iter_mut().zip(&scratch) {
                        *d += s;
                    }
                    wrote = true;
                }
            }
        }
        wrote
    }
}
