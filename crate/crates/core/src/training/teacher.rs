use crate::error::{Result, SppError};
use crate::numerics::{Matrix, Rng};
use crate::pruning::{apply_mask, build_mask, score_magnitude, PrunedLayer, SparsityPattern};

use super::net::{Activation, Dataset, LossKind, NetLayer, ToyNet};

/// A dense single-layer teacher, its magnitude-pruned copy and sampled data.
#[derive(Debug, Clone)]
pub struct TeacherStudent {
    pub teacher: ToyNet,
    pub student: ToyNet,
    pub train: Dataset,
    pub eval: Dataset,
}

/// Inputs drawn from a low-rank latent factor plus a little isotropic noise.
///
/// Correlated features let the surviving weights partly stand in for the
/// pruned ones; with isotropic inputs the pruned weight is already the
/// least-squares optimum on its support.
fn sample_inputs(rng: &mut Rng, mix: &Matrix, samples: usize) -> Result<Matrix> {
    let latent = rng.uniform_matrix(-1.0, 1.0, samples, mix.rows())?;
    let noise = rng.uniform_matrix(-0.1, 0.1, samples, mix.cols())?;
    latent.matmul_nn(mix)?.add(&noise)
}

/// Builds the `m×n` teacher–student task. The eval set has `samples / 4`
/// rows (at least one), drawn after the training set.
pub fn make_teacher_student(
    seed: u64,
    m: usize,
    n: usize,
    pattern: SparsityPattern,
    samples: usize,
) -> Result<TeacherStudent> {
    if m == 0 || n == 0 || samples == 0 {
        return Err(SppError::argument(
            "teacher dimensions and sample count must be positive",
        ));
    }
    pattern.validate_for(m, n)?;
    let mut rng = Rng::seed_from_u64(seed);
    let bound = 1.0 / (n as f64).sqrt();
    let w = rng.uniform_matrix(-bound, bound, m, n)?;
    let latent_dim = (n / 4).max(1);
    let mix = rng.uniform_matrix(-1.0, 1.0, latent_dim, n)?;

    let teacher_layer = PrunedLayer::dense(w.clone());
    let mask = build_mask(&score_magnitude(&w), pattern)?;
    let student_layer = apply_mask(&w, &mask)?;

    let teacher = ToyNet::new(
        vec![NetLayer::new("fc", teacher_layer, Activation::Identity)],
        LossKind::Mse,
    )?;
    let student = ToyNet::new(
        vec![NetLayer::new("fc", student_layer, Activation::Identity)],
        LossKind::Mse,
    )?;

    let x = sample_inputs(&mut rng, &mix, samples)?;
    let y = teacher.forward(&x)?;
    let x_eval = sample_inputs(&mut rng, &mix, (samples / 4).max(1))?;
    let y_eval = teacher.forward(&x_eval)?;
    Ok(TeacherStudent {
        teacher,
        student,
        train: Dataset::new(x, y)?,
        eval: Dataset::new(x_eval, y_eval)?,
    })
}
