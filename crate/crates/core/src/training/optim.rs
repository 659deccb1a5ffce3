use crate::error::{Result, SppError};
use crate::numerics::Matrix;
use crate::pruning::PrunedLayer;

/// Number of warmup steps: `⌊warmup_ratio · total_steps⌋`.
pub fn warmup_steps(total_steps: usize, warmup_ratio: f64) -> usize {
    (warmup_ratio * total_steps as f64).floor() as usize
}

/// Linear warmup from 0 to `peak_lr`, then linear decay to 0 at `total_steps`.
///
/// Defined for `0 ≤ step ≤ total_steps`; the endpoint evaluates to 0.
pub fn lr_schedule(
    step: usize,
    total_steps: usize,
    peak_lr: f64,
    warmup_ratio: f64,
) -> Result<f64> {
    if total_steps == 0 || step > total_steps {
        return Err(SppError::argument(format!(
            "step {step} outside schedule of {total_steps} steps"
        )));
    }
    if !(0.0..1.0).contains(&warmup_ratio) {
        return Err(SppError::argument(format!(
            "warmup ratio must lie in [0, 1), got {warmup_ratio}"
        )));
    }
    let warmup = warmup_steps(total_steps, warmup_ratio);
    if step < warmup {
        Ok(peak_lr * (step as f64 / warmup as f64))
    } else {
        Ok(peak_lr * ((total_steps - step) as f64 / (total_steps - warmup) as f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moments for one parameter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Matrix,
    v: Matrix,
    t: u64,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize) -> Self {
        AdamState {
            m: Matrix::zeros(rows, cols),
            v: Matrix::zeros(rows, cols),
            t: 0,
        }
    }

    pub fn for_param(p: &Matrix) -> Self {
        Self::new(p.rows(), p.cols())
    }

    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// One AdamW update with decoupled weight decay: `p ← p − lr·wd·p`, then the
/// bias-corrected Adam step.
pub fn adamw_step(
    param: &mut Matrix,
    grad: &Matrix,
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
    hyper: AdamHyper,
) -> Result<()> {
    if param.shape() != grad.shape() || state.m.shape() != param.shape() {
        return Err(SppError::shape(format!(
            "adamw: param {:?}, grad {:?}, state {:?}",
            param.shape(),
            grad.shape(),
            state.m.shape()
        )));
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - hyper.beta1.powi(t);
    let bc2 = 1.0 - hyper.beta2.powi(t);
    let decay = 1.0 - lr * weight_decay;
    let g = grad.as_slice();
    let m = state.m.data_mut();
    for (mi, gi) in m.iter_mut().zip(g) {
        *mi = hyper.beta1 * *mi + (1.0 - hyper.beta1) * gi;
    }
    let v = state.v.data_mut();
    for (vi, gi) in v.iter_mut().zip(g) {
        *vi = hyper.beta2 * *vi + (1.0 - hyper.beta2) * gi * gi;
    }
    let (m, v) = (state.m.as_slice(), state.v.as_slice());
    for (idx, p) in param.data_mut().iter_mut().enumerate() {
        let m_hat = m[idx] / bc1;
        let v_hat = v[idx] / bc2;
        *p = *p * decay - lr * m_hat / (v_hat.sqrt() + hyper.eps);
    }
    if !param.is_all_finite() {
        return Err(SppError::State(
            "adamw produced a non-finite parameter".into(),
        ));
    }
    Ok(())
}

/// Plain gradient step with decoupled weight decay.
pub fn sgd_step(param: &mut Matrix, grad: &Matrix, lr: f64, weight_decay: f64) -> Result<()> {
    if param.shape() != grad.shape() {
        return Err(SppError::shape(format!(
            "sgd: param {:?}, grad {:?}",
            param.shape(),
            grad.shape()
        )));
    }
    let decay = 1.0 - lr * weight_decay;
    for (p, g) in param.data_mut().iter_mut().zip(grad.as_slice()) {
        *p = *p * decay - lr * g;
    }
    if !param.is_all_finite() {
        return Err(SppError::State(
            "sgd produced a non-finite parameter".into(),
        ));
    }
    Ok(())
}

/// Fixed-mask retraining step: `W ← W − lr·(grad ⊙ M)`.
pub fn fixed_mask_sgd_step(layer: &PrunedLayer, grad: &Matrix, lr: f64) -> Result<PrunedLayer> {
    let masked = grad.hadamard(layer.mask().matrix())?;
    let weight = layer.weight().add_scaled(&masked, -lr)?;
    PrunedLayer::new(weight, layer.mask().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pruning::{SparseMask, SparsityPattern};

    #[test]
    fn schedule_shape() {
        assert_eq!(lr_schedule(0, 100, 1.0, 0.03).unwrap(), 0.0);
        assert_eq!(lr_schedule(3, 100, 1.0, 0.03).unwrap(), 1.0);
        let v = lr_schedule(51, 100, 1.0, 0.03).unwrap();
        assert!((v - 49.0 / 97.0).abs() < 1e-15);
        assert!((v - 0.5052).abs() < 1e-4);
        assert_eq!(lr_schedule(100, 100, 1.0, 0.03).unwrap(), 0.0);
        assert!(lr_schedule(101, 100, 1.0, 0.03).is_err());
    }

    #[test]
    fn schedule_without_warmup_starts_at_peak() {
        assert_eq!(lr_schedule(0, 10, 0.5, 0.0).unwrap(), 0.5);
    }

    #[test]
    fn adamw_first_step_moves_by_lr() {
        let mut p = Matrix::ones(1, 1);
        let g = Matrix::ones(1, 1);
        let mut st = AdamState::for_param(&p);
        adamw_step(&mut p, &g, &mut st, 0.1, 0.0, AdamHyper::default()).unwrap();
        assert!((p.get(0, 0) - 0.9).abs() < 1e-8);
    }

    #[test]
    fn adamw_zero_lr_is_noop() {
        let mut p = Matrix::from_rows(&[&[0.3, -2.0]]).unwrap();
        let before = p.clone();
        let g = Matrix::from_rows(&[&[5.0, -1.0]]).unwrap();
        let mut st = AdamState::for_param(&p);
        adamw_step(&mut p, &g, &mut st, 0.0, 0.001, AdamHyper::default()).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn adamw_decay_only() {
        let mut p = Matrix::ones(1, 1);
        let g = Matrix::zeros(1, 1);
        let mut st = AdamState::for_param(&p);
        adamw_step(&mut p, &g, &mut st, 0.1, 0.001, AdamHyper::default()).unwrap();
        assert_eq!(p.get(0, 0), 1.0 - 1e-4);
    }

    #[test]
    fn fixed_mask_step_keeps_zeros() {
        let w = Matrix::from_rows(&[&[1.0, 0.0]]).unwrap();
        let mask = SparseMask::new(
            Matrix::from_rows(&[&[1.0, 0.0]]).unwrap(),
            SparsityPattern::unstructured(0.5).unwrap(),
        )
        .unwrap();
        let layer = PrunedLayer::new(w, mask).unwrap();
        let g = Matrix::from_rows(&[&[2.0, 5.0]]).unwrap();
        let out = fixed_mask_sgd_step(&layer, &g, 0.1).unwrap();
        assert_eq!(out.weight().get(0, 1), 0.0);
        assert!((out.weight().get(0, 0) - 0.8).abs() < 1e-15);
        assert_eq!(fixed_mask_sgd_step(&layer, &g, 0.0).unwrap(), layer);
    }
}
