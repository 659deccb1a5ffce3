//! Analytic adapter gradients against central finite differences.
use spp_core::adapters::{DropoutMask, SppAdapter};
use spp_core::numerics::{Matrix, Rng};
use spp_core::pruning::{apply_mask, build_mask, score_magnitude, SparsityPattern};

const H: f64 = 1e-5;

fn probe(y: &Matrix, g: &Matrix) -> f64 {
    y.iter().zip(g.iter()).map(|(a, b)| a * b).sum()
}

fn main() -> spp_core::Result<()> {
    let (b, m, n, r) = (3, 8, 8, 2);
    let mut rng = Rng::seed_from_u64(3);
    let w = rng.uniform_matrix(-1.0, 1.0, m, n)?;
    let layer = apply_mask(
        &w,
        &build_mask(&score_magnitude(&w), SparsityPattern::two_four())?,
    )?;
    let alpha = rng.uniform_matrix(-1.0, 1.0, r, n)?;
    let beta = rng.uniform_matrix(-1.0, 1.0, m, 1)?;
    let ad = SppAdapter::new(alpha.clone(), beta.clone(), 0.5, 0.1)?;
    let x = rng.uniform_matrix(-1.0, 1.0, b, n)?;
    let g = rng.uniform_matrix(-1.0, 1.0, b, m)?;
    let mask = DropoutMask::sample(b, n, 0.1, &mut rng)?;

    let (_, cache) = ad.forward_optimized_with(&x, &layer, mask.clone(), true)?;
    let grads = ad.backward(&layer, &cache, &g)?;

    let loss = |alpha: &Matrix, beta: &Matrix| -> spp_core::Result<f64> {
        let ad = SppAdapter::new(alpha.clone(), beta.clone(), 0.5, 0.1)?;
        let (y, _) = ad.forward_naive_with(&x, &layer, mask.clone(), true)?;
        Ok(probe(&y, &g))
    };

    let mut worst: f64 = 0.0;
    for i in 0..r {
        for j in 0..n {
            let mut up = alpha.clone();
            up.set(i, j, alpha.get(i, j) + H);
            let mut down = alpha.clone();
            down.set(i, j, alpha.get(i, j) - H);
            let fd = (loss(&up, &beta)? - loss(&down, &beta)?) / (2.0 * H);
            worst = worst.max((fd - grads.d_alpha.get(i, j)).abs());
        }
    }
    println!("d_alpha: max abs error {worst:.2e}");

    let mut worst: f64 = 0.0;
    for i in 0..m {
        let mut up = beta.clone();
        up.set(i, 0, beta.get(i, 0) + H);
        let mut down = beta.clone();
        down.set(i, 0, beta.get(i, 0) - H);
        let fd = (loss(&alpha, &up)? - loss(&alpha, &down)?) / (2.0 * H);
        worst = worst.max((fd - grads.d_beta.get(i, 0)).abs());
    }
    println!("d_beta:  max abs error {worst:.2e}");
    Ok(())
}
