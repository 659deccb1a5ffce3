//! Additive low-rank baseline: `Y = X W~ᵀ + s · dropout(X) Aᵀ Bᵀ`.
//!
//! Merging adds the dense product `s·B·A` to the pruned weight, which fills in
//! masked positions. [`lora_star_reprune`] re-applies the original mask after
//! the merge.

use crate::adapters::dropout::DropoutMask;
use crate::error::{Result, SppError};
use crate::numerics::{Matrix, Rng};
use crate::pruning::{apply_mask, PrunedLayer, SparseMask};

#[derive(Debug, Clone, PartialEq)]
pub struct LoraAdapter {
    a: Matrix,
    b: Matrix,
    scale: f64,
    dropout: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoraGrads {
    pub d_a: Matrix,
    pub d_b: Matrix,
    pub d_x: Matrix,
}

#[derive(Debug, Clone)]
pub struct LoraCache {
    dropped: Option<(Matrix, DropoutMask, Matrix)>,
}

impl LoraAdapter {
    /// `a` is `r×n`, `b` is `m×r`.
    pub fn new(a: Matrix, b: Matrix, scale: f64, dropout: f64) -> Result<Self> {
        if a.rows() != b.cols() {
            return Err(SppError::shape(format!(
                "A is {:?} but B is {:?}; ranks differ",
                a.shape(),
                b.shape()
            )));
        }
        if !scale.is_finite() {
            return Err(SppError::argument(format!(
                "scale must be finite, got {scale}"
            )));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(SppError::argument(format!(
                "dropout probability must lie in [0, 1), got {dropout}"
            )));
        }
        Ok(LoraAdapter {
            a,
            b,
            scale,
            dropout,
        })
    }

    /// `A ~ U[-1/√n, 1/√n]`, `B = 0`.
    pub fn init(m: usize, n: usize, r: usize, s: f64, p: f64, rng: &mut Rng) -> Result<Self> {
        if r == 0 || m == 0 || n == 0 {
            return Err(SppError::argument(
                "LoRA dimensions and rank must be positive",
            ));
        }
        let bound = 1.0 / (n as f64).sqrt();
        let a = rng.uniform_matrix(-bound, bound, r, n)?;
        Self::new(a, Matrix::zeros(m, r), s, p)
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn a_mut(&mut self) -> &mut Matrix {
        &mut self.a
    }

    pub fn b_mut(&mut self) -> &mut Matrix {
        &mut self.b
    }

    pub fn factors_mut(&mut self) -> (&mut Matrix, &mut Matrix) {
        (&mut self.a, &mut self.b)
    }

    pub fn rank(&self) -> usize {
        self.a.rows()
    }

    pub fn out_features(&self) -> usize {
        self.b.rows()
    }

    pub fn in_features(&self) -> usize {
        self.a.cols()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    /// `r·(m + n)`.
    pub fn trainable_params(&self) -> usize {
        self.rank() * (self.out_features() + self.in_features())
    }

    fn check(&self, x: &Matrix, layer: &PrunedLayer) -> Result<()> {
        let (m, n) = layer.weight().shape();
        if m != self.out_features() || n != self.in_features() {
            return Err(SppError::shape(format!(
                "adapter is {}x{} but layer is {m}x{n}",
                self.out_features(),
                self.in_features()
            )));
        }
        if x.cols() != n {
            return Err(SppError::shape(format!(
                "input has {} features, layer expects {n}",
                x.cols()
            )));
        }
        Ok(())
    }

    pub fn forward(
        &self,
        x: &Matrix,
        layer: &PrunedLayer,
        rng: &mut Rng,
        training: bool,
    ) -> Result<(Matrix, LoraCache)> {
        self.check(x, layer)?;
        let (rows, cols) = x.shape();
        let mask = if training {
            DropoutMask::sample(rows, cols, self.dropout, rng)?
        } else {
            DropoutMask::identity(rows, cols)
        };
        self.forward_with(x, layer, mask, training)
    }

    pub fn forward_with(
        &self,
        x: &Matrix,
        layer: &PrunedLayer,
        mask: DropoutMask,
        training: bool,
    ) -> Result<(Matrix, LoraCache)> {
        self.check(x, layer)?;
        let dropped = mask.apply(x)?;
        let hidden = dropped.matmul(&self.a)?;
        let branch = hidden.matmul(&self.b)?;
        let y = x.matmul(layer.weight())?.add_scaled(&branch, self.scale)?;
        let cache = LoraCache {
            dropped: training.then_some((dropped, mask, hidden)),
        };
        Ok((y, cache))
    }

    pub fn backward(
        &self,
        layer: &PrunedLayer,
        cache: &LoraCache,
        d_y: &Matrix,
    ) -> Result<LoraGrads> {
        let (dropped, mask, hidden) = cache.dropped.as_ref().ok_or_else(|| {
            SppError::State("backward needs the cache of a training-mode forward".into())
        })?;
        if d_y.shape() != (dropped.rows(), self.out_features()) {
            return Err(SppError::shape(format!(
                "upstream gradient {:?}, expected {:?}",
                d_y.shape(),
                (dropped.rows(), self.out_features())
            )));
        }
        let s = self.scale;
        let d_b = d_y.matmul_tn(hidden)?.scale(s);
        let d_hidden = d_y.matmul_nn(&self.b)?.scale(s);
        let d_a = d_hidden.matmul_tn(dropped)?;
        let d_x = d_y
            .matmul_nn(layer.weight())?
            .add(&mask.backward(&d_hidden.matmul_nn(&self.a)?)?)?;
        Ok(LoraGrads { d_a, d_b, d_x })
    }

    /// `W~ + s·B·A` as a plain dense matrix.
    pub fn merge_dense(&self, layer: &PrunedLayer) -> Result<Matrix> {
        let delta = self.b.matmul_nn(&self.a)?;
        layer.weight().add_scaled(&delta, self.scale)
    }
}

/// Re-applies the original pruning mask to a dense merged weight.
pub fn lora_star_reprune(dense: &Matrix, original_mask: &SparseMask) -> Result<PrunedLayer> {
    apply_mask(dense, original_mask)
}
