//! Trainable-parameter accounting for SPP adapters on transformer-shaped stacks.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SppError};

/// One adapted linear layer, `m` outputs by `n` inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub name: String,
    pub m: usize,
    pub n: usize,
}

impl LayerShape {
    pub fn new(name: impl Into<String>, m: usize, n: usize) -> Self {
        LayerShape {
            name: name.into(),
            m,
            n,
        }
    }
}

/// Per-block layer shapes repeated `blocks` times, plus parameters that are
/// counted in the total but never adapted (embeddings, head, norms).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub name: String,
    pub blocks: usize,
    pub layers: Vec<LayerShape>,
    #[serde(default)]
    pub extra_params: u64,
}

const VOCAB: u64 = 32_000;

fn llama(name: &str, blocks: usize, hidden: usize, inter: usize) -> ArchSpec {
    let h = hidden as u64;
    // token embedding + output head, plus two RMSNorms per block and a final one
    let extra = 2 * VOCAB * h + h * (2 * blocks as u64 + 1);
    ArchSpec {
        name: name.into(),
        blocks,
        layers: vec![
            LayerShape::new("q_proj", hidden, hidden),
            LayerShape::new("k_proj", hidden, hidden),
            LayerShape::new("v_proj", hidden, hidden),
            LayerShape::new("o_proj", hidden, hidden),
            LayerShape::new("gate_proj", inter, hidden),
            LayerShape::new("up_proj", inter, hidden),
            LayerShape::new("down_proj", hidden, inter),
        ],
        extra_params: extra,
    }
}

impl ArchSpec {
    pub fn llama7b() -> Self {
        llama("llama7b", 32, 4096, 11008)
    }

    pub fn llama13b() -> Self {
        llama("llama13b", 40, 5120, 13824)
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "llama7b" => Some(Self::llama7b()),
            "llama13b" => Some(Self::llama13b()),
            _ => None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ArchSpec =
            serde_json::from_str(text).map_err(|e| SppError::Meta(format!("arch file: {e}")))?;
        if spec.blocks == 0 || spec.layers.is_empty() {
            return Err(SppError::Meta(
                "arch needs at least one block and one layer".into(),
            ));
        }
        if let Some(l) = spec.layers.iter().find(|l| l.m == 0 || l.n == 0) {
            return Err(SppError::Meta(format!(
                "layer `{}` has a zero dimension",
                l.name
            )));
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamCount {
    pub trainable: u64,
    pub total: u64,
    pub per_mille: f64,
}

impl ParamCount {
    /// Per-mille against an arbitrary total.
    pub fn per_mille_of(&self, total: f64) -> f64 {
        1000.0 * self.trainable as f64 / total
    }
}

impl std::fmt::Display for ParamCount {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "trainable={} total={} per_mille={:.4}",
            self.trainable, self.total, self.per_mille
        )
    }
}

/// `m + r·n` per adapted matrix. The total is `Σ m·n` plus the declared extras.
pub fn count_trainable(arch: &ArchSpec, r: usize) -> Result<ParamCount> {
    if r == 0 {
        return Err(SppError::argument("rank must be positive"));
    }
    let bad: Vec<String> = arch
        .layers
        .iter()
        .filter(|l| l.m % r != 0)
        .map(|l| format!("{} (m={})", l.name, l.m))
        .collect();
    if !bad.is_empty() {
        return Err(SppError::pattern(format!(
            "r={r} does not divide m for: {}",
            bad.join(", ")
        )));
    }
    let blocks = arch.blocks as u64;
    let per_block: u64 = arch.layers.iter().map(|l| (l.m + r * l.n) as u64).sum();
    let linear: u64 = arch.layers.iter().map(|l| (l.m * l.n) as u64).sum();
    let trainable = per_block * blocks;
    let total = linear * blocks + arch.extra_params;
    Ok(ParamCount {
        trainable,
        total,
        per_mille: 1000.0 * trainable as f64 / total as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn llama7b_rank16() {
        let c = count_trainable(&ArchSpec::llama7b(), 16).unwrap();
        assert_eq!(c.trainable, 19_578_880);
        assert_eq!(c.total, 6_738_415_616);
        assert!((c.per_mille - 2.90).abs() < 0.01);
    }

    #[test]
    fn llama13b_rank16() {
        let c = count_trainable(&ArchSpec::llama13b(), 16).unwrap();
        assert_eq!(c.trainable, 30_638_080);
        assert_eq!(c.total, 13_015_864_320);
        assert!((c.per_mille - 2.35).abs() < 0.01);
    }

    #[test]
    fn single_layer() {
        let arch = ArchSpec {
            name: "one".into(),
            blocks: 1,
            layers: vec![LayerShape::new("fc", 4, 4)],
            extra_params: 0,
        };
        assert_eq!(count_trainable(&arch, 4).unwrap().trainable, 20);
        assert!(count_trainable(&arch, 3).is_err());
    }

    #[test]
    fn custom_json() {
        let arch = ArchSpec::from_json(
            r#"{"name":"tiny","blocks":1,"layers":[{"name":"fc","m":8,"n":8}]}"#,
        )
        .unwrap();
        assert_eq!(count_trainable(&arch, 4).unwrap().trainable, 40);
        assert!(ArchSpec::from_json(r#"{"name":"x","blocks":0,"layers":[]}"#).is_err());
    }
}
