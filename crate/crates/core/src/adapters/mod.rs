//! Trainable adapters attached to frozen pruned layers.

mod dropout;
mod lora;
mod spp;

use serde::{Deserialize, Serialize};

pub use dropout::{dropout_apply, DropoutMask};
pub use lora::{lora_star_reprune, LoraAdapter, LoraCache, LoraGrads};
pub use spp::{SppAdapter, SppCache, SppGrads, SppInit};

use crate::error::{Result, SppError};
use crate::numerics::{Matrix, Rng};
use crate::pruning::PrunedLayer;

/// Default branch scale.
pub const DEFAULT_SCALE: f64 = 1.0;
/// Default dropout probability on the adapter branch input.
pub const DEFAULT_DROPOUT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdapterKind {
    Spp,
    Lora,
}

impl std::fmt::Display for AdapterKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AdapterKind::Spp => "spp",
            AdapterKind::Lora => "lora",
        })
    }
}

/// JSON sidecar stored with adapter tensors: `{"r", "s", "p", "kind"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterSidecar {
    pub r: usize,
    pub s: f64,
    pub p: f64,
    pub kind: AdapterKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Adapter {
    Spp(SppAdapter),
    Lora(LoraAdapter),
}

/// Either adapter's forward cache.
#[derive(Debug, Clone)]
pub enum AdapterCache {
    Spp(SppCache),
    Lora(LoraCache),
}

/// Either adapter's gradients, plus the input gradient shared by both.
#[derive(Debug, Clone, PartialEq)]
pub enum AdapterGrads {
    Spp(SppGrads),
    Lora(LoraGrads),
}

impl AdapterGrads {
    pub fn d_x(&self) -> &Matrix {
        match self {
            AdapterGrads::Spp(g) => &g.d_x,
            AdapterGrads::Lora(g) => &g.d_x,
        }
    }

    /// Parameter gradients in the same order as [`Adapter::params_mut`].
    pub fn param_grads(&self) -> [&Matrix; 2] {
        match self {
            AdapterGrads::Spp(g) => [&g.d_alpha, &g.d_beta],
            AdapterGrads::Lora(g) => [&g.d_a, &g.d_b],
        }
    }
}

impl Adapter {
    pub fn kind(&self) -> AdapterKind {
        match self {
            Adapter::Spp(_) => AdapterKind::Spp,
            Adapter::Lora(_) => AdapterKind::Lora,
        }
    }

    pub fn sidecar(&self) -> AdapterSidecar {
        match self {
            Adapter::Spp(a) => AdapterSidecar {
                r: a.rank(),
                s: a.scale(),
                p: a.dropout(),
                kind: AdapterKind::Spp,
            },
            Adapter::Lora(a) => AdapterSidecar {
                r: a.rank(),
                s: a.scale(),
                p: a.dropout(),
                kind: AdapterKind::Lora,
            },
        }
    }

    pub fn trainable_params(&self) -> usize {
        match self {
            Adapter::Spp(a) => a.trainable_params(),
            Adapter::Lora(a) => a.trainable_params(),
        }
    }

    /// Tensor-name suffixes for the two parameter matrices.
    pub fn tensor_suffixes(kind: AdapterKind) -> [&'static str; 2] {
        match kind {
            AdapterKind::Spp => ["spp.alpha", "spp.beta"],
            AdapterKind::Lora => ["lora.a", "lora.b"],
        }
    }

    pub fn params(&self) -> [&Matrix; 2] {
        match self {
            Adapter::Spp(a) => [a.alpha(), a.beta()],
            Adapter::Lora(a) => [a.a(), a.b()],
        }
    }

    pub fn params_mut(&mut self) -> [&mut Matrix; 2] {
        match self {
            Adapter::Spp(a) => {
                let (alpha, beta) = a.factors_mut();
                [alpha, beta]
            }
            Adapter::Lora(a) => {
                let (first, second) = a.factors_mut();
                [first, second]
            }
        }
    }

    /// Builds an adapter from stored parameter matrices and its sidecar.
    pub fn from_parts(side: &AdapterSidecar, first: Matrix, second: Matrix) -> Result<Self> {
        let ad = match side.kind {
            AdapterKind::Spp => Adapter::Spp(SppAdapter::new(first, second, side.s, side.p)?),
            AdapterKind::Lora => Adapter::Lora(LoraAdapter::new(first, second, side.s, side.p)?),
        };
        let stored_r = match &ad {
            Adapter::Spp(a) => a.rank(),
            Adapter::Lora(a) => a.rank(),
        };
        if stored_r != side.r {
            return Err(SppError::Meta(format!(
                "sidecar says r={} but tensors have rank {stored_r}",
                side.r
            )));
        }
        Ok(ad)
    }

    /// Forward with the optimized path for SPP.
    pub fn forward(
        &self,
        x: &Matrix,
        layer: &PrunedLayer,
        rng: &mut Rng,
        training: bool,
    ) -> Result<(Matrix, AdapterCache)> {
        match self {
            Adapter::Spp(a) => {
                let (y, c) = a.forward_optimized(x, layer, rng, training)?;
                Ok((y, AdapterCache::Spp(c)))
            }
            Adapter::Lora(a) => {
                let (y, c) = a.forward(x, layer, rng, training)?;
                Ok((y, AdapterCache::Lora(c)))
            }
        }
    }

    pub fn backward(
        &self,
        layer: &PrunedLayer,
        cache: &AdapterCache,
        d_y: &Matrix,
    ) -> Result<AdapterGrads> {
        match (self, cache) {
            (Adapter::Spp(a), AdapterCache::Spp(c)) => {
                Ok(AdapterGrads::Spp(a.backward(layer, c, d_y)?))
            }
            (Adapter::Lora(a), AdapterCache::Lora(c)) => {
                Ok(AdapterGrads::Lora(a.backward(layer, c, d_y)?))
            }
            _ => Err(SppError::State("adapter and cache kinds differ".into())),
        }
    }
}
