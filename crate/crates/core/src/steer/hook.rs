// SPDX-License-Identifier: MIT OR Apache-2.0

use std::cell::RefCell;

use crate::gate::{gate_value, steering_scale, GateConfig, GateOutput};
use crate::model::{HookPoint, HookSite, Hooks};
use crate::numerics::{cosine_similarity, norm};

/// Per-step steering: read the pre-attention LayerNorm output at `layer`,
/// score it against the CARD direction, and add the gated vector after the
/// same layer's attention residual.
pub(crate) struct SteerHook<'a> {
    layer: usize,
    gated: bool,
    cfg: &'a GateConfig,
    direction: &'a [f64],
    dir_norm: f64,
    pub gate: Option<GateOutput>,
    pub steer_norm: f64,
}

impl<'a> SteerHook<'a> {
    pub fn new(layer: usize, gated: bool, cfg: &'a GateConfig, direction: &'a [f64], dir_norm: f64) -> Self {
        Self {
            layer,
            gated,
            cfg,
            direction,
            dir_norm,
            gate: None,
            steer_norm: 0.0,
        }
    }
}

impl Hooks for SteerHook<'_> {
    fn wants_read(&self, point: HookPoint) -> bool {
        self.gated && point == HookPoint::new(self.layer, HookSite::PreAttnLayerNormOut)
    }

    fn read(&mut self, _point: HookPoint, _position: usize, value: &[f64]) {
        // A LayerNorm output with zero norm carries no direction; score it as neutral.
        let s = cosine_similarity(value, self.direction).unwrap_or(0.0);
        self.gate = Some(gate_value(s, self.cfg));
    }

    fn wants_write(&self, layer: usize) -> bool {
        layer == self.layer
    }

    fn residual_add(&mut self, _layer: usize, _position: usize, delta: &mut [f64]) -> bool {
        let g = match (self.gated, self.gate) {
            (true, Some(out)) => out.g,
            (true, None) => return false,
            (false, _) => 1.0,
        };
        let scale = steering_scale(g, self.cfg, self.dir_norm);
        if scale == 0.0 {
            return false;
        }
        for (d, x) in delta.iter_mut().zip(self.direction) {
            *d = scale * x;
        }
        self.steer_norm = norm(delta);
        true
    }
}

/// Lets one observer be attached to several hypotheses that are advanced
/// sequentially within a batch.
pub(crate) struct SharedObserver<'a, 'b>(pub &'a RefCell<&'b mut dyn Hooks>);

impl Hooks for SharedObserver<'_, '_> {
    fn wants_read(&self, point: HookPoint) -> bool {
        self.0.borrow().wants_read(point)
    }

    fn read(&mut self, point: HookPoint, position: usize, value: &[f64]) {
        self.0.borrow_mut().read(point, position, value);
    }
}
