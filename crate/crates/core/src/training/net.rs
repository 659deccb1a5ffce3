use serde::{Deserialize, Serialize};

use crate::adapters::lora_star_reprune;
use crate::adapters::{Adapter, AdapterCache, LoraAdapter, SppAdapter};
use crate::error::{Result, SppError};
use crate::numerics::{Matrix, Rng};
use crate::pruning::{verify_mask, MaskReport, PrunedLayer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: &Matrix) -> Matrix {
        match self {
            Activation::Relu => z.map(|v| v.max(0.0)),
            Activation::Identity => z.clone(),
        }
    }

    fn backward(self, z: &Matrix, grad: &Matrix) -> Result<Matrix> {
        match self {
            Activation::Relu => grad.hadamard(&z.map(|v| if v > 0.0 { 1.0 } else { 0.0 })),
            Activation::Identity => Ok(grad.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    CrossEntropy,
}

impl LossKind {
    /// Mean loss over the batch and its gradient with respect to the outputs.
    ///
    /// MSE averages over every output entry. Cross-entropy treats each target
    /// row as a probability vector over classes and averages over rows.
    pub fn loss_and_grad(self, y: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
        if y.shape() != target.shape() {
            return Err(SppError::shape(format!(
                "prediction {:?} vs target {:?}",
                y.shape(),
                target.shape()
            )));
        }
        match self {
            LossKind::Mse => {
                let count = y.len() as f64;
                let diff = y.sub(target)?;
                let loss = diff.iter().map(|d| d * d).sum::<f64>() / count;
                Ok((loss, diff.scale(2.0 / count)))
            }
            LossKind::CrossEntropy => {
                let (b, c) = y.shape();
                let mut loss = 0.0;
                let mut grad = Matrix::zeros(b, c);
                for i in 0..b {
                    let row = y.row(i);
                    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let denom: f64 = row.iter().map(|v| (v - max).exp()).sum();
                    let log_denom = denom.ln();
                    for j in 0..c {
                        let log_p = row[j] - max - log_denom;
                        let t = target.get(i, j);
                        loss -= t * log_p;
                        grad.set(i, j, (log_p.exp() - t) / b as f64);
                    }
                }
                Ok((loss / b as f64, grad))
            }
        }
    }

    pub fn loss(self, y: &Matrix, target: &Matrix) -> Result<f64> {
        Ok(self.loss_and_grad(y, target)?.0)
    }
}

/// Paired inputs and targets, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Matrix,
}

impl Dataset {
    pub fn new(x: Matrix, y: Matrix) -> Result<Self> {
        if x.rows() != y.rows() {
            return Err(SppError::shape(format!(
                "{} inputs but {} targets",
                x.rows(),
                y.rows()
            )));
        }
        Ok(Dataset { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn gather(&self, idx: &[usize]) -> (Matrix, Matrix) {
        let pick = |m: &Matrix| Matrix::from_fn(idx.len(), m.cols(), |i, j| m.get(idx[i], j));
        (pick(&self.x), pick(&self.y))
    }
}

/// One linear layer of a toy network: frozen pruned weight, optional adapter,
/// activation.
#[derive(Debug, Clone, PartialEq)]
pub struct NetLayer {
    pub name: String,
    pub base: PrunedLayer,
    pub adapter: Option<Adapter>,
    pub activation: Activation,
}

impl NetLayer {
    pub fn new(name: impl Into<String>, base: PrunedLayer, activation: Activation) -> Self {
        NetLayer {
            name: name.into(),
            base,
            adapter: None,
            activation,
        }
    }
}

pub(crate) struct LayerCache {
    input: Matrix,
    pre_activation: Matrix,
    adapter: Option<AdapterCache>,
}

/// A stack of pruned linear layers with an MSE or cross-entropy head.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyNet {
    layers: Vec<NetLayer>,
    loss: LossKind,
}

impl ToyNet {
    pub fn new(layers: Vec<NetLayer>, loss: LossKind) -> Result<Self> {
        if layers.is_empty() {
            return Err(SppError::argument("a network needs at least one layer"));
        }
        for pair in layers.windows(2) {
            let (prev, next) = (&pair[0], &pair[1]);
            if prev.base.out_features() != next.base.in_features() {
                return Err(SppError::shape(format!(
                    "layer `{}` outputs {} features but `{}` takes {}",
                    prev.name,
                    prev.base.out_features(),
                    next.name,
                    next.base.in_features()
                )));
            }
        }
        for l in &layers {
            let (m, n) = l.base.weight().shape();
            let fits = match &l.adapter {
                None => true,
                Some(Adapter::Spp(a)) => a.out_features() == m && a.in_features() == n,
                Some(Adapter::Lora(a)) => a.out_features() == m && a.in_features() == n,
            };
            if !fits {
                return Err(SppError::shape(format!(
                    "adapter on `{}` does not match its {m}x{n} weight",
                    l.name
                )));
            }
        }
        Ok(ToyNet { layers, loss })
    }

    pub fn layers(&self) -> &[NetLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [NetLayer] {
        &mut self.layers
    }

    pub fn loss_kind(&self) -> LossKind {
        self.loss
    }

    pub fn in_features(&self) -> usize {
        self.layers[0].base.in_features()
    }

    pub fn out_features(&self) -> usize {
        self.layers[self.layers.len() - 1].base.out_features()
    }

    pub fn has_adapters(&self) -> bool {
        self.layers.iter().any(|l| l.adapter.is_some())
    }

    pub fn base_nnz(&self) -> usize {
        self.layers.iter().map(|l| l.base.weight().nnz()).sum()
    }

    pub fn trainable_adapter_params(&self) -> usize {
        self.layers
            .iter()
            .filter_map(|l| l.adapter.as_ref())
            .map(Adapter::trainable_params)
            .sum()
    }

    /// Attaches a freshly initialised SPP adapter to every layer.
    pub fn attach_spp(&mut self, r: usize, s: f64, p: f64, rng: &mut Rng) -> Result<()> {
        for l in &mut self.layers {
            let (m, n) = l.base.weight().shape();
            l.adapter = Some(Adapter::Spp(SppAdapter::init(m, n, r, s, p, rng)?));
        }
        Ok(())
    }

    /// Attaches a freshly initialised LoRA adapter to every layer.
    pub fn attach_lora(&mut self, r: usize, s: f64, p: f64, rng: &mut Rng) -> Result<()> {
        for l in &mut self.layers {
            let (m, n) = l.base.weight().shape();
            l.adapter = Some(Adapter::Lora(LoraAdapter::init(m, n, r, s, p, rng)?));
        }
        Ok(())
    }

    /// Eval-mode forward (no dropout).
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        // Eval mode draws no randomness, so any generator will do.
        let mut rng = Rng::seed_from_u64(0);
        Ok(self.forward_cached(x, &mut rng, false)?.0)
    }

    pub(crate) fn forward_cached(
        &self,
        x: &Matrix,
        rng: &mut Rng,
        training: bool,
    ) -> Result<(Matrix, Vec<LayerCache>)> {
        if x.cols() != self.in_features() {
            return Err(SppError::shape(format!(
                "input has {} features, network expects {}",
                x.cols(),
                self.in_features()
            )));
        }
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for l in &self.layers {
            let (z, adapter_cache) = match &l.adapter {
                Some(a) => {
                    let (z, c) = a.forward(&h, &l.base, rng, training)?;
                    (z, Some(c))
                }
                None => (h.matmul(l.base.weight())?, None),
            };
            let out = l.activation.apply(&z);
            caches.push(LayerCache {
                input: h,
                pre_activation: z,
                adapter: adapter_cache,
            });
            h = out;
        }
        Ok((h, caches))
    }

    /// Backward pass. Returns, per layer, the adapter parameter gradients (when
    /// an adapter is present) and the dense weight gradient (when requested).
    pub(crate) fn backward(
        &self,
        caches: &[LayerCache],
        d_out: Matrix,
        want_weight_grads: bool,
    ) -> Result<Vec<LayerGrads>> {
        let mut grads: Vec<LayerGrads> = Vec::with_capacity(self.layers.len());
        let mut g = d_out;
        for (l, c) in self.layers.iter().zip(caches).rev() {
            let dz = l.activation.backward(&c.pre_activation, &g)?;
            let weight = if want_weight_grads {
                Some(dz.matmul_tn(&c.input)?)
            } else {
                None
            };
            let (adapter, d_x) = match (&l.adapter, &c.adapter) {
                (Some(a), Some(ac)) => {
                    let ag = a.backward(&l.base, ac, &dz)?;
                    let d_x = ag.d_x().clone();
                    let [g0, g1] = ag.param_grads();
                    (Some([g0.clone(), g1.clone()]), d_x)
                }
                _ => (None, dz.matmul_nn(l.base.weight())?),
            };
            grads.push(LayerGrads { adapter, weight });
            g = d_x;
        }
        grads.reverse();
        Ok(grads)
    }

    pub fn loss_on(&self, data: &Dataset) -> Result<f64> {
        let y = self.forward(&data.x)?;
        self.loss.loss(&y, &data.y)
    }

    /// Folds every adapter into its base weight.
    ///
    /// SPP layers keep their mask by construction. LoRA layers become dense
    /// unless `reprune_lora` re-applies the original mask; a densified layer
    /// keeps its old mask so [`verify`](Self::verify) reports the violation.
    pub fn merged(&self, reprune_lora: bool) -> Result<ToyNet> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let base = match &l.adapter {
                None => l.base.clone(),
                Some(Adapter::Spp(a)) => a.merge(&l.base)?,
                Some(Adapter::Lora(a)) => {
                    let dense = a.merge_dense(&l.base)?;
                    if reprune_lora {
                        lora_star_reprune(&dense, l.base.mask())?
                    } else {
                        PrunedLayer::from_parts_unverified(dense, l.base.mask().clone())?
                    }
                }
            };
            layers.push(NetLayer {
                name: l.name.clone(),
                base,
                adapter: None,
                activation: l.activation,
            });
        }
        ToyNet::new(layers, self.loss)
    }

    pub fn verify(&self) -> Vec<(String, MaskReport)> {
        self.layers
            .iter()
            .map(|l| (l.name.clone(), verify_mask(&l.base)))
            .collect()
    }
}

pub(crate) struct LayerGrads {
    pub adapter: Option<[Matrix; 2]>,
    pub weight: Option<Matrix>,
}
