use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numgrad::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub base_lr: f64,
    pub proxy_lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub temperature: f64,
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr >= 0.0 && self.proxy_lr >= 0.0) {
            return Err(Error::config("learning rates must be >= 0"));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::config("temperature must be > 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum must be in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    /// Embedding head (and anything else below the proxies).
    Base,
    Proxy,
}

/// SGD with classical momentum (`v ← μv + g`, `p ← p − lr·v`) and a separate
/// learning rate for the proxy group.
#[derive(Debug, Clone)]
pub struct TwoGroupSgd {
    base_lr: f64,
    proxy_lr: f64,
    momentum: f64,
    velocity: Vec<Option<Matrix>>,
}

impl TwoGroupSgd {
    pub fn new(cfg: &OptimConfig) -> Self {
        Self {
            base_lr: cfg.base_lr,
            proxy_lr: cfg.proxy_lr,
            momentum: cfg.momentum,
            velocity: Vec::new(),
        }
    }

    pub fn lr(&self, group: ParamGroup) -> f64 {
        match group {
            ParamGroup::Base => self.base_lr,
            ParamGroup::Proxy => self.proxy_lr,
        }
    }

    /// Updates parameter block `slot` in place. Slots identify momentum buffers.
    pub fn update(&mut self, slot: usize, group: ParamGroup, param: &mut Matrix, grad: &Matrix, lr_scale: f64) -> Result<()> {
        if param.shape() != grad.shape() {
            return Err(Error::Shape {
                op: "sgd_step",
                left: param.shape(),
                right: grad.shape(),
            });
        }
        let lr = self.lr(group) * lr_scale;
        if self.momentum == 0.0 {
            param.axpy(-lr, grad);
            return Ok(());
        }
        if self.velocity.len() <= slot {
            self.velocity.resize(slot + 1, None);
        }
        let v = self.velocity[slot].get_or_insert_with(|| Matrix::zeros(grad.rows(), grad.cols()));
        for (vi, gi) in v.as_mut_slice().iter_mut().zip(grad.as_slice()) {
            *vi = self.momentum * *vi + gi;
        }
        param.axpy(-lr, v);
        Ok(())
    }
}

/// One optimizer step over `(group, parameter, gradient)` triples; the
/// position in `blocks` is the momentum slot.
pub fn sgd_step(sgd: &mut TwoGroupSgd, blocks: &mut [(ParamGroup, &mut Matrix, &Matrix)], lr_scale: f64) -> Result<()> {
    for (slot, (group, param, grad)) in blocks.iter_mut().enumerate() {
        sgd.update(slot, *group, param, grad, lr_scale)?;
    }
    Ok(())
}
