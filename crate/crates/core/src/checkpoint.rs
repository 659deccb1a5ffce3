//! Saving and loading networks and datasets as tensor stores.
//!
//! Per layer `<name>`: `<name>.weight` (f64), `<name>.mask` (u8) and, when an
//! adapter is attached, its two factors (`<name>.spp.alpha`/`.spp.beta` or
//! `<name>.lora.a`/`.lora.b`). Layer order, activations and sidecars live in the
//! `__meta__` JSON tensor.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adapters::{Adapter, AdapterSidecar};
use crate::error::{Result, SppError};
use crate::numerics::store::META_TENSOR;
use crate::numerics::{Matrix, TensorStore};
use crate::pruning::{PatternSidecar, PrunedLayer, SparseMask, SparsityPattern};
use crate::training::{Activation, Dataset, LossKind, NetLayer, ToyNet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerMeta {
    pub name: String,
    pub activation: Activation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PatternSidecar>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adapter: Option<AdapterSidecar>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetMeta {
    pub layers: Vec<LayerMeta>,
    #[serde(default = "default_loss")]
    pub loss: LossKind,
}

fn default_loss() -> LossKind {
    LossKind::Mse
}

pub fn net_to_store(net: &ToyNet) -> Result<TensorStore> {
    let mut store = TensorStore::new();
    let mut metas = Vec::with_capacity(net.layers().len());
    for l in net.layers() {
        store.put_matrix(&format!("{}.weight", l.name), l.base.weight())?;
        store.put_binary(&format!("{}.mask", l.name), l.base.mask().matrix())?;
        if let Some(a) = &l.adapter {
            let suffixes = Adapter::tensor_suffixes(a.kind());
            for (suffix, p) in suffixes.iter().zip(a.params()) {
                store.put_matrix(&format!("{}.{suffix}", l.name), p)?;
            }
        }
        metas.push(LayerMeta {
            name: l.name.clone(),
            activation: l.activation,
            mask: Some(l.base.mask().pattern().sidecar()),
            adapter: l.adapter.as_ref().map(Adapter::sidecar),
        });
    }
    store.put_json(
        META_TENSOR,
        &NetMeta {
            layers: metas,
            loss: net.loss_kind(),
        },
    )?;
    Ok(store)
}

/// Rebuilds a network. Layers without a mask sidecar load as dense.
///
/// Masks are not checked against weights here, so a corrupted store still
/// loads and [`ToyNet::verify`] can say what is wrong with it.
pub fn net_from_store(store: &TensorStore) -> Result<ToyNet> {
    let meta: NetMeta = if store.contains(META_TENSOR) {
        store.json(META_TENSOR)?
    } else {
        // bare weights: every `<name>.weight` in file order
        NetMeta {
            layers: store
                .names()
                .filter_map(|n| n.strip_suffix(".weight"))
                .map(|name| LayerMeta {
                    name: name.to_string(),
                    activation: Activation::Identity,
                    mask: None,
                    adapter: None,
                })
                .collect(),
            loss: LossKind::Mse,
        }
    };
    if meta.layers.is_empty() {
        return Err(SppError::Meta("store describes no layers".into()));
    }
    let mut layers = Vec::with_capacity(meta.layers.len());
    for lm in &meta.layers {
        let weight = store.matrix(&format!("{}.weight", lm.name))?;
        let base = match &lm.mask {
            None => PrunedLayer::dense(weight),
            Some(side) => {
                let pattern = SparsityPattern::from_sidecar(side)?;
                let mask = SparseMask::new(store.matrix(&format!("{}.mask", lm.name))?, pattern)?;
                PrunedLayer::from_parts_unverified(weight, mask)?
            }
        };
        let adapter = match &lm.adapter {
            None => None,
            Some(side) => {
                let [a, b] = Adapter::tensor_suffixes(side.kind);
                let first = store.matrix(&format!("{}.{a}", lm.name))?;
                let second = store.matrix(&format!("{}.{b}", lm.name))?;
                Some(Adapter::from_parts(side, first, second)?)
            }
        };
        layers.push(NetLayer {
            name: lm.name.clone(),
            base,
            adapter,
            activation: lm.activation,
        });
    }
    ToyNet::new(layers, meta.loss)
}

pub fn save_net(net: &ToyNet, path: impl AsRef<Path>) -> Result<()> {
    net_to_store(net)?.write(path)
}

pub fn load_net(path: impl AsRef<Path>) -> Result<ToyNet> {
    net_from_store(&TensorStore::read(path)?)
}

/// Tensors `x`, `y` and optionally `x_eval`, `y_eval`.
pub fn dataset_to_store(train: &Dataset, eval: Option<&Dataset>) -> Result<TensorStore> {
    let mut store = TensorStore::new();
    store.put_matrix("x", &train.x)?;
    store.put_matrix("y", &train.y)?;
    if let Some(e) = eval {
        store.put_matrix("x_eval", &e.x)?;
        store.put_matrix("y_eval", &e.y)?;
    }
    Ok(store)
}

pub fn dataset_from_store(store: &TensorStore) -> Result<(Dataset, Option<Dataset>)> {
    let train = Dataset::new(store.matrix("x")?, store.matrix("y")?)?;
    let eval = if store.contains("x_eval") {
        Some(Dataset::new(
            store.matrix("x_eval")?,
            store.matrix("y_eval")?,
        )?)
    } else {
        None
    };
    Ok((train, eval))
}

/// Calibration inputs for one layer: `<name>.calib` if present, else `x`
/// pushed through the preceding layers.
pub fn calibration_input(
    store: &TensorStore,
    name: &str,
    propagated: Option<&Matrix>,
) -> Result<Matrix> {
    let key = format!("{name}.calib");
    if store.contains(&key) {
        return store.matrix(&key);
    }
    match propagated {
        Some(x) => Ok(x.clone()),
        None => Err(SppError::MissingTensor(key)),
    }
}
