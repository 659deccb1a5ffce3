//! Multiplicative sparsity-preserving adapter.
//!
//! A pruned weight `W~ (m×n)` is modulated by a trainable block-row factor
//! `α (r×n)` and a per-row factor `β (m×1)`:
//!
//! ```text
//! W~' = W~ ⊙ repeat_rows(α, m/r) ⊙ broadcast_col(β, n)
//! Y   = X W~ᵀ + s · dropout(X) W~'ᵀ
//! ```
//!
//! Every term of `W~'` carries a factor of `W~`, so zeros of the pruned weight
//! stay zero through training and after merging.

use log::warn;

use crate::adapters::dropout::DropoutMask;
use crate::error::{Result, SppError};
use crate::numerics::{dot, Matrix, Rng};
use crate::pruning::PrunedLayer;

/// Which factors start at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SppInit {
    /// `β = 0`, `α` random. Keeps the initial network identical to the pruned one.
    #[default]
    BetaZero,
    /// `α = 0`, `β` random.
    AlphaZero,
    /// Both random; the initial output differs from the pruned model.
    NoneZero,
    /// Both zero. Every gradient vanishes at this point, so nothing ever trains.
    BothZero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SppAdapter {
    w_alpha: Matrix,
    w_beta: Matrix,
    scale: f64,
    dropout: f64,
}

/// Gradients of a scalar loss with respect to the adapter factors and the input.
#[derive(Debug, Clone, PartialEq)]
pub struct SppGrads {
    pub d_alpha: Matrix,
    pub d_beta: Matrix,
    pub d_x: Matrix,
}

/// What a training-mode forward keeps for the backward pass.
#[derive(Debug, Clone)]
pub struct SppCache {
    x: Matrix,
    // Present only for training-mode forwards.
    dropped: Option<(Matrix, DropoutMask)>,
}

impl SppCache {
    pub fn input(&self) -> &Matrix {
        &self.x
    }

    pub fn dropout_mask(&self) -> Option<&DropoutMask> {
        self.dropped.as_ref().map(|(_, m)| m)
    }
}

impl SppAdapter {
    /// Assembles an adapter from explicit factors. `α` is `r×n`, `β` is `m×1`,
    /// and `r` must divide `m`.
    pub fn new(w_alpha: Matrix, w_beta: Matrix, scale: f64, dropout: f64) -> Result<Self> {
        if w_beta.cols() != 1 {
            return Err(SppError::shape(format!(
                "w_beta must be m×1, got {:?}",
                w_beta.shape()
            )));
        }
        let (r, m) = (w_alpha.rows(), w_beta.rows());
        if m % r != 0 {
            return Err(SppError::pattern(format!(
                "rank {r} does not divide {m} output rows"
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
        let ad = SppAdapter {
            w_alpha,
            w_beta,
            scale,
            dropout,
        };
        if ad.is_degenerate() {
            warn!(
                "SPP adapter with both factors zero: every adapter gradient vanishes and \
                 the adapter cannot train"
            );
        }
        Ok(ad)
    }

    /// Default initialisation: `β = 0`, `α ~ U[-1/√n, 1/√n]`.
    pub fn init(m: usize, n: usize, r: usize, s: f64, p: f64, rng: &mut Rng) -> Result<Self> {
        Self::init_with(SppInit::BetaZero, m, n, r, s, p, rng)
    }

    pub fn init_with(
        init: SppInit,
        m: usize,
        n: usize,
        r: usize,
        s: f64,
        p: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        if r == 0 || m == 0 || n == 0 || !m.is_multiple_of(r) {
            return Err(SppError::pattern(format!(
                "rank {r} must be positive and divide {m} output rows"
            )));
        }
        let bound = 1.0 / (n as f64).sqrt();
        let alpha = match init {
            SppInit::BetaZero | SppInit::NoneZero => rng.uniform_matrix(-bound, bound, r, n)?,
            SppInit::AlphaZero | SppInit::BothZero => Matrix::zeros(r, n),
        };
        let beta = match init {
            SppInit::AlphaZero | SppInit::NoneZero => rng.uniform_matrix(-bound, bound, m, 1)?,
            SppInit::BetaZero | SppInit::BothZero => Matrix::zeros(m, 1),
        };
        Self::new(alpha, beta, s, p)
    }

    pub fn alpha(&self) -> &Matrix {
        &self.w_alpha
    }

    pub fn beta(&self) -> &Matrix {
        &self.w_beta
    }

    pub fn alpha_mut(&mut self) -> &mut Matrix {
        &mut self.w_alpha
    }

    pub fn beta_mut(&mut self) -> &mut Matrix {
        &mut self.w_beta
    }

    pub fn factors_mut(&mut self) -> (&mut Matrix, &mut Matrix) {
        (&mut self.w_alpha, &mut self.w_beta)
    }

    pub fn rank(&self) -> usize {
        self.w_alpha.rows()
    }

    pub fn out_features(&self) -> usize {
        self.w_beta.rows()
    }

    pub fn in_features(&self) -> usize {
        self.w_alpha.cols()
    }

    /// Rows of `W~` sharing one row of `α`.
    pub fn block_rows(&self) -> usize {
        self.out_features() / self.rank()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    /// `r = m`: every weight gets its own factor, i.e. a full update of the sparse support.
    pub fn is_full_rank(&self) -> bool {
        self.rank() == self.out_features()
    }

    pub fn is_degenerate(&self) -> bool {
        self.w_alpha.nnz() == 0 && self.w_beta.nnz() == 0
    }

    /// `m + r·n`.
    pub fn trainable_params(&self) -> usize {
        self.out_features() + self.rank() * self.in_features()
    }

    fn check_layer(&self, layer: &PrunedLayer) -> Result<()> {
        let (m, n) = layer.weight().shape();
        if m != self.out_features() || n != self.in_features() {
            return Err(SppError::shape(format!(
                "adapter is {}x{} but layer is {m}x{n}",
                self.out_features(),
                self.in_features()
            )));
        }
        Ok(())
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.in_features() {
            return Err(SppError::shape(format!(
                "input has {} features, layer expects {}",
                x.cols(),
                self.in_features()
            )));
        }
        Ok(())
    }

    /// `W~' = W~ ⊙ repeat_rows(α, m/r) ⊙ broadcast_col(β, n)`.
    pub fn effective_weight(&self, layer: &PrunedLayer) -> Result<Matrix> {
        self.check_layer(layer)?;
        let alpha_full = self.w_alpha.repeat_rows(self.block_rows())?;
        let beta_full = self.w_beta.broadcast_col(self.in_features())?;
        layer.weight().hadamard(&alpha_full)?.hadamard(&beta_full)
    }

    pub fn sample_dropout(&self, x: &Matrix, rng: &mut Rng, training: bool) -> Result<DropoutMask> {
        let (b, n) = x.shape();
        if training {
            DropoutMask::sample(b, n, self.dropout, rng)
        } else {
            Ok(DropoutMask::identity(b, n))
        }
    }

    /// Residual forward through an explicit `m×n` effective weight.
    pub fn forward_naive(
        &self,
        x: &Matrix,
        layer: &PrunedLayer,
        rng: &mut Rng,
        training: bool,
    ) -> Result<(Matrix, SppCache)> {
        self.check_input(x)?;
        let mask = self.sample_dropout(x, rng, training)?;
        self.forward_naive_with(x, layer, mask, training)
    }

    /// [`forward_naive`](Self::forward_naive) with a caller-supplied dropout mask.
    pub fn forward_naive_with(
        &self,
        x: &Matrix,
        layer: &PrunedLayer,
        mask: DropoutMask,
        training: bool,
    ) -> Result<(Matrix, SppCache)> {
        self.check_input(x)?;
        self.check_layer(layer)?;
        let dropped = mask.apply(x)?;
        let base = x.matmul(layer.weight())?;
        let branch = dropped.matmul(&self.effective_weight(layer)?)?;
        let y = base.add_scaled(&branch, self.scale)?;
        Ok((y, self.cache(x, dropped, mask, training)))
    }

    /// Same contract as [`forward_naive`](Self::forward_naive), computed block by
    /// block: for each row `j` of `α`, `(X_d ⊙ α_j)` is multiplied against the
    /// `j`-th block of `m/r` rows of `W~`, and each output column is scaled by
    /// its `β`. Neither the repeated `α` nor `W~'` is ever built.
    pub fn forward_optimized(
        &self,
        x: &Matrix,
        layer: &PrunedLayer,
        rng: &mut Rng,
        training: bool,
    ) -> Result<(Matrix, SppCache)> {
        self.check_input(x)?;
        let mask = self.sample_dropout(x, rng, training)?;
        self.forward_optimized_with(x, layer, mask, training)
    }

    pub fn forward_optimized_with(
        &self,
        x: &Matrix,
        layer: &PrunedLayer,
        mask: DropoutMask,
        training: bool,
    ) -> Result<(Matrix, SppCache)> {
        self.check_input(x)?;
        self.check_layer(layer)?;
        let dropped = mask.apply(x)?;
        let mut y = x.matmul(layer.weight())?;
        let (b, n) = x.shape();
        let w = layer.weight();
        let k = self.block_rows();
        let mut scaled = Matrix::zeros(b, n);
        for j in 0..self.rank() {
            let alpha_j = self.w_alpha.row(j);
            {
                let buf = scaled.data_mut();
                for bi in 0..b {
                    let src = dropped.row(bi);
                    let dst = &mut buf[bi * n..(bi + 1) * n];
                    for ((d, &xv), &av) in dst.iter_mut().zip(src).zip(alpha_j) {
                        *d = xv * av;
                    }
                }
            }
            for i in j * k..(j + 1) * k {
                let beta_i = self.w_beta.get(i, 0);
                let w_row = w.row(i);
                for bi in 0..b {
                    let v = dot(scaled.row(bi), w_row) * beta_i;
                    let cur = y.get(bi, i);
                    y.set(bi, i, cur + self.scale * v);
                }
            }
        }
        Ok((y, self.cache(x, dropped, mask, training)))
    }

    fn cache(&self, x: &Matrix, dropped: Matrix, mask: DropoutMask, training: bool) -> SppCache {
        SppCache {
            x: x.clone(),
            dropped: training.then_some((dropped, mask)),
        }
    }

    /// Gradients given the upstream gradient `d_y` of a training-mode forward.
    ///
    /// With `P = s · d_yᵀ X_d`, `d_β[i] = Σ_k P[i][k] W~[i][k] α[i/(m/r)][k]`,
    /// `d_α[j][k] = Σ_{i in block j} P[i][k] W~[i][k] β[i]` and
    /// `d_x = d_y W~ + s · dropout'(d_y W~')`. Only nonzero weights contribute and
    /// no `m×n` buffer is built.
    pub fn backward(
        &self,
        layer: &PrunedLayer,
        cache: &SppCache,
        d_y: &Matrix,
    ) -> Result<SppGrads> {
        self.check_layer(layer)?;
        let (dropped, mask) = cache.dropped.as_ref().ok_or_else(|| {
            SppError::State("backward needs the cache of a training-mode forward".into())
        })?;
        let (b, n) = dropped.shape();
        let m = self.out_features();
        if d_y.shape() != (b, m) {
            return Err(SppError::shape(format!(
                "upstream gradient {:?}, expected {:?}",
                d_y.shape(),
                (b, m)
            )));
        }
        let w = layer.weight();
        let k = self.block_rows();
        let s = self.scale;

        let mut d_alpha = Matrix::zeros(self.rank(), n);
        let mut d_beta = Matrix::zeros(m, 1);
        let mut d_x_base = Matrix::zeros(b, n);
        let mut d_x_branch = Matrix::zeros(b, n);
        let dyb = d_y.as_slice();
        let xd = dropped.as_slice();

        for i in 0..m {
            let j = i / k;
            let beta_i = self.w_beta.get(i, 0);
            let alpha_j = self.w_alpha.row(j);
            let w_row = w.row(i);
            let mut acc_beta = 0.0;
            for kk in 0..n {
                let wv = w_row[kk];
                if wv == 0.0 {
                    continue;
                }
                let mut p = 0.0;
                for bi in 0..b {
                    p += dyb[bi * m + i] * xd[bi * n + kk];
                }
                p *= s;
                acc_beta += p * wv * alpha_j[kk];
                let da = d_alpha.get(j, kk) + p * wv * beta_i;
                d_alpha.set(j, kk, da);
                let eff = wv * alpha_j[kk] * beta_i;
                let base_buf = d_x_base.data_mut();
                for bi in 0..b {
                    base_buf[bi * n + kk] += dyb[bi * m + i] * wv;
                }
                let branch_buf = d_x_branch.data_mut();
                for bi in 0..b {
                    branch_buf[bi * n + kk] += dyb[bi * m + i] * eff;
                }
            }
            d_beta.set(i, 0, acc_beta);
        }
        let d_x = d_x_base.add_scaled(&mask.backward(&d_x_branch)?, s)?;
        Ok(SppGrads {
            d_alpha,
            d_beta,
            d_x,
        })
    }

    /// Folds the adapter into the base weight: `W~ + s · W~'`, keeping the
    /// original mask.
    pub fn merge(&self, layer: &PrunedLayer) -> Result<PrunedLayer> {
        let merged = layer
            .weight()
            .add_scaled(&self.effective_weight(layer)?, self.scale)?;
        PrunedLayer::new(merged, layer.mask().clone()).map_err(|e| match e {
            SppError::Invariant(msg) => {
                SppError::Invariant(format!("SPP merge broke the mask: {msg}"))
            }
            other => other,
        })
    }
}
