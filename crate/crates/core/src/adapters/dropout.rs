use crate::error::{Result, SppError};
use crate::numerics::{Matrix, Rng};

/// Inverted-dropout mask: kept entries are scaled by `1/(1-p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    keep: Matrix,
    p: f64,
    scale: f64,
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(SppError::argument(format!(
            "dropout probability must lie in [0, 1), got {p}"
        )));
    }
    Ok(())
}

impl DropoutMask {
    /// The evaluation-mode mask: keeps everything, scale 1.
    pub fn identity(rows: usize, cols: usize) -> Self {
        DropoutMask {
            keep: Matrix::ones(rows, cols),
            p: 0.0,
            scale: 1.0,
        }
    }

    pub fn sample(rows: usize, cols: usize, p: f64, rng: &mut Rng) -> Result<Self> {
        check_p(p)?;
        if p == 0.0 {
            return Ok(Self::identity(rows, cols));
        }
        let keep = Matrix::from_fn(
            rows,
            cols,
            |_, _| if rng.next_f64() < p { 0.0 } else { 1.0 },
        );
        Ok(DropoutMask {
            keep,
            p,
            scale: 1.0 / (1.0 - p),
        })
    }

    pub fn keep(&self) -> &Matrix {
        &self.keep
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_identity(&self) -> bool {
        self.scale == 1.0 && self.keep.nnz() == self.keep.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.keep.shape()
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if self.is_identity() {
            if x.shape() != self.keep.shape() {
                return Err(SppError::shape(format!(
                    "dropout mask {:?} vs input {:?}",
                    self.keep.shape(),
                    x.shape()
                )));
            }
            return Ok(x.clone());
        }
        let scale = self.scale;
        let kept = x.hadamard(&self.keep)?;
        Ok(kept.map(|v| v * scale))
    }

    /// Gradient of [`apply`](Self::apply): the same masking and scaling.
    pub fn backward(&self, grad: &Matrix) -> Result<Matrix> {
        self.apply(grad)
    }
}

/// Draws a dropout mask for `x` and applies it. Identity in eval mode or when `p = 0`.
pub fn dropout_apply(
    x: &Matrix,
    p: f64,
    rng: &mut Rng,
    training: bool,
) -> Result<(Matrix, DropoutMask)> {
    check_p(p)?;
    let (rows, cols) = x.shape();
    let mask = if training {
        DropoutMask::sample(rows, cols, p, rng)?
    } else {
        DropoutMask::identity(rows, cols)
    };
    Ok((mask.apply(x)?, mask))
}
