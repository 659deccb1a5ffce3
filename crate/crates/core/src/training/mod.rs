//! Fine-tuning toy networks of pruned layers: adapters only, or the
//! fixed-mask baseline that updates surviving weights directly.

mod net;
mod optim;
mod params;
mod record;
mod teacher;

use serde::{Deserialize, Serialize};

pub use net::{Activation, Dataset, LossKind, NetLayer, ToyNet};
pub use optim::{
    adamw_step, fixed_mask_sgd_step, lr_schedule, sgd_step, warmup_steps, AdamHyper, AdamState,
};
pub use params::{count_trainable, ArchSpec, LayerShape, ParamCount};
pub use record::{RunRecord, RunSummary, StepRecord};
pub use teacher::{make_teacher_student, TeacherStudent};

use crate::error::{Result, SppError};
use crate::numerics::{Matrix, Rng};
use crate::pruning::PrunedLayer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    AdamW,
}

impl std::str::FromStr for Optimizer {
    type Err = SppError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Optimizer::Sgd),
            "adamw" => Ok(Optimizer::AdamW),
            _ => Err(SppError::argument(format!("unknown optimizer `{s}`"))),
        }
    }
}

/// What a run is allowed to update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    /// Adapter parameters only; base weights stay frozen.
    Adapters,
    /// No adapters; base weights updated with `grad ⊙ mask`.
    FixedMask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub warmup_ratio: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub mode: TrainMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 500,
            lr: Self::default_lr(Optimizer::AdamW),
            batch_size: 32,
            warmup_ratio: 0.03,
            weight_decay: 0.001,
            seed: 0,
            optimizer: Optimizer::AdamW,
            mode: TrainMode::Adapters,
        }
    }
}

impl TrainConfig {
    pub fn default_lr(opt: Optimizer) -> f64 {
        match opt {
            Optimizer::Sgd => 1e-2,
            Optimizer::AdamW => 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(SppError::argument(format!(
                "lr must be positive, got {}",
                self.lr
            )));
        }
        if self.batch_size == 0 {
            return Err(SppError::argument("batch size must be positive"));
        }
        if !(0.0..1.0).contains(&self.warmup_ratio) {
            return Err(SppError::argument(format!(
                "warmup ratio must lie in [0, 1), got {}",
                self.warmup_ratio
            )));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(SppError::argument(format!(
                "weight decay must be nonnegative, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// Draws batches from a shuffled permutation, reshuffling once exhausted.
struct Batcher {
    order: Vec<usize>,
    pos: usize,
    batch: usize,
}

impl Batcher {
    fn new(len: usize, batch: usize, rng: &mut Rng) -> Self {
        let mut order: Vec<usize> = (0..len).collect();
        rng.shuffle(&mut order);
        Batcher {
            order,
            pos: 0,
            batch: batch.min(len),
        }
    }

    fn next(&mut self, rng: &mut Rng) -> &[usize] {
        if self.pos + self.batch > self.order.len() {
            rng.shuffle(&mut self.order);
            self.pos = 0;
        }
        let start = self.pos;
        self.pos += self.batch;
        &self.order[start..self.pos]
    }
}

fn update(
    opt: Optimizer,
    param: &mut Matrix,
    grad: &Matrix,
    state: &mut AdamState,
    lr: f64,
    wd: f64,
) -> Result<()> {
    match opt {
        Optimizer::Sgd => sgd_step(param, grad, lr, wd),
        Optimizer::AdamW => adamw_step(param, grad, state, lr, wd, AdamHyper::default()),
    }
}

/// Trains a copy of `net` and returns it with the run record.
///
/// Deterministic given `cfg.seed`. In adapter mode the base weights of the
/// result are bit-identical to the input's.
pub fn train(
    net: &ToyNet,
    data: &Dataset,
    eval: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(ToyNet, RunRecord)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(SppError::argument("training data is empty"));
    }
    for d in std::iter::once(data).chain(eval) {
        if d.x.cols() != net.in_features() || d.y.cols() != net.out_features() {
            return Err(SppError::shape(format!(
                "data is {}→{} but the network maps {}→{}",
                d.x.cols(),
                d.y.cols(),
                net.in_features(),
                net.out_features()
            )));
        }
    }
    match cfg.mode {
        TrainMode::Adapters if !net.has_adapters() => {
            return Err(SppError::State(
                "adapter training needs attached adapters".into(),
            ))
        }
        TrainMode::FixedMask if net.has_adapters() => {
            return Err(SppError::State(
                "fixed-mask retraining runs on a network without adapters".into(),
            ))
        }
        _ => {}
    }

    let mut net = net.clone();
    let frozen: Vec<Matrix> = net
        .layers()
        .iter()
        .map(|l| l.base.weight().clone())
        .collect();
    let mut rng = Rng::seed_from_u64(cfg.seed);
    let mut batcher = Batcher::new(data.len(), cfg.batch_size, &mut rng);
    let mut states: Vec<Vec<AdamState>> = net
        .layers()
        .iter()
        .map(|l| match (&l.adapter, cfg.mode) {
            (Some(a), TrainMode::Adapters) => {
                a.params().iter().map(|p| AdamState::for_param(p)).collect()
            }
            (_, TrainMode::FixedMask) => vec![AdamState::for_param(l.base.weight())],
            (None, TrainMode::Adapters) => Vec::new(),
        })
        .collect();
    let mut record = RunRecord::new();

    for step in 0..cfg.steps {
        let lr = lr_schedule(step, cfg.steps, cfg.lr, cfg.warmup_ratio)?;
        let idx = batcher.next(&mut rng).to_vec();
        let (xb, yb) = data.gather(&idx);
        let (out, caches) = net.forward_cached(&xb, &mut rng, true)?;
        let (loss, d_out) = net.loss_kind().loss_and_grad(&out, &yb)?;
        if !loss.is_finite() {
            return Err(SppError::Diverged {
                step,
                last_good: step.checked_sub(1),
                detail: format!("loss is {loss}"),
            });
        }
        record.push(StepRecord { step, lr, loss })?;
        let want_weights = cfg.mode == TrainMode::FixedMask;
        let grads = net.backward(&caches, d_out, want_weights)?;
        for ((layer, g), st) in net.layers_mut().iter_mut().zip(grads).zip(&mut states) {
            let res = match cfg.mode {
                TrainMode::Adapters => match (&mut layer.adapter, g.adapter) {
                    (Some(a), Some(pg)) => a
                        .params_mut()
                        .into_iter()
                        .zip(pg.iter())
                        .zip(st.iter_mut())
                        .try_for_each(|((p, gr), s)| {
                            update(cfg.optimizer, p, gr, s, lr, cfg.weight_decay)
                        }),
                    _ => Ok(()),
                },
                TrainMode::FixedMask => {
                    let gw = g.weight.as_ref().expect("weight grads requested");
                    let masked = gw.hadamard(layer.base.mask().matrix())?;
                    update(
                        cfg.optimizer,
                        layer.base.weight_mut(),
                        &masked,
                        &mut st[0],
                        lr,
                        cfg.weight_decay,
                    )
                    .and_then(|_| {
                        check_support(&layer.base).map_err(|e| {
                            SppError::Invariant(format!("layer `{}`: {e}", layer.name))
                        })
                    })
                }
            };
            match res {
                Ok(()) => {}
                Err(SppError::State(msg)) => {
                    return Err(SppError::Diverged {
                        step,
                        last_good: step.checked_sub(1),
                        detail: format!("layer `{}`: {msg}", layer.name),
                    })
                }
                Err(e) => return Err(e),
            }
        }
    }

    if cfg.mode == TrainMode::Adapters {
        for (l, w) in net.layers().iter().zip(&frozen) {
            if l.base.weight() != w {
                return Err(SppError::Invariant(format!(
                    "frozen weight of `{}` changed during adapter training",
                    l.name
                )));
            }
        }
    }

    let train_loss = net.loss_on(data)?;
    let eval_loss = eval.map(|e| net.loss_on(e)).transpose()?;
    let nnz_after = net.merged(false)?.base_nnz();
    record.set_summary(RunSummary {
        steps: cfg.steps,
        train_loss,
        eval_loss,
        nnz_before: net.base_nnz(),
        nnz_after,
    });
    Ok((net, record))
}

fn check_support(layer: &PrunedLayer) -> Result<()> {
    let w = layer.weight();
    let m = layer.mask().matrix();
    match w
        .iter()
        .zip(m.iter())
        .position(|(w, m)| *m == 0.0 && *w != 0.0)
    {
        None => Ok(()),
        Some(pos) => Err(SppError::Invariant(format!(
            "masked position ({}, {}) became nonzero",
            pos / w.cols(),
            pos % w.cols()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pruning::SparsityPattern;

    fn setup() -> TeacherStudent {
        make_teacher_student(3, 8, 8, SparsityPattern::two_four(), 128).unwrap()
    }

    #[test]
    fn zero_steps_leave_net_unchanged() {
        let ts = setup();
        let mut net = ts.student.clone();
        net.attach_spp(4, 1.0, 0.0, &mut Rng::seed_from_u64(1))
            .unwrap();
        let cfg = TrainConfig {
            steps: 0,
            ..TrainConfig::default()
        };
        let (out, rec) = train(&net, &ts.train, None, &cfg).unwrap();
        assert_eq!(out, net);
        assert!(rec.steps().is_empty());
    }

    #[test]
    fn mode_must_match_adapters() {
        let ts = setup();
        let cfg = TrainConfig {
            steps: 1,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&ts.student, &ts.train, None, &cfg),
            Err(SppError::State(_))
        ));
        let mut net = ts.student.clone();
        net.attach_spp(4, 1.0, 0.0, &mut Rng::seed_from_u64(1))
            .unwrap();
        let cfg = TrainConfig {
            mode: TrainMode::FixedMask,
            ..cfg
        };
        assert!(matches!(
            train(&net, &ts.train, None, &cfg),
            Err(SppError::State(_))
        ));
    }

    #[test]
    fn fixed_mask_keeps_zeros_and_learns() {
        let ts = setup();
        let cfg = TrainConfig {
            steps: 200,
            mode: TrainMode::FixedMask,
            optimizer: Optimizer::Sgd,
            lr: 0.05,
            ..TrainConfig::default()
        };
        let (out, rec) = train(&ts.student, &ts.train, Some(&ts.eval), &cfg).unwrap();
        for l in out.layers() {
            check_support(&l.base).unwrap();
        }
        let s = rec.summary().unwrap();
        assert_eq!(s.nnz_after, s.nnz_before);
        assert!(s.eval_loss.unwrap() < ts.student.loss_on(&ts.eval).unwrap());
    }

    #[test]
    fn divergence_is_reported() {
        let ts = setup();
        let mut net = ts.student.clone();
        net.attach_lora(2, 1.0, 0.0, &mut Rng::seed_from_u64(1))
            .unwrap();
        let cfg = TrainConfig {
            steps: 200,
            lr: 1e200,
            warmup_ratio: 0.0,
            optimizer: Optimizer::Sgd,
            ..TrainConfig::default()
        };
        match train(&net, &ts.train, None, &cfg) {
            Err(SppError::Diverged {
                step, last_good, ..
            }) => {
                assert_eq!(last_good, step.checked_sub(1));
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
