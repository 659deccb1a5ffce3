//! Magnitude and Wanda pruning to 2:4, 2:8 and unstructured patterns.
use spp_core::numerics::Rng;
use spp_core::pruning::{
    apply_mask, build_mask, collect_calibration, score_magnitude, score_wanda, verify_mask,
    SparsityPattern,
};

fn main() -> spp_core::Result<()> {
    let mut rng = Rng::seed_from_u64(0);
    let w = rng.uniform_matrix(-1.0, 1.0, 16, 32)?;
    // calibration inputs with very uneven feature scales
    let x = rng.uniform_matrix(-1.0, 1.0, 64, 32)?;
    let x = x.hadamard(&spp_core::numerics::Matrix::from_fn(64, 32, |_, j| {
        1.0 + j as f64
    }))?;
    let stats = collect_calibration(&x);

    let patterns = [
        SparsityPattern::two_four(),
        SparsityPattern::n_of_m(2, 8)?,
        SparsityPattern::unstructured(0.5)?,
        SparsityPattern::Unstructured {
            ratio: 0.75,
            per_row: true,
        },
    ];
    for pattern in patterns {
        let by_magnitude = build_mask(&score_magnitude(&w), pattern)?;
        let by_wanda = build_mask(&score_wanda(&w, &stats)?, pattern)?;
        let agree = by_magnitude
            .matrix()
            .iter()
            .zip(by_wanda.matrix().iter())
            .filter(|(a, b)| a == b)
            .count();
        let layer = apply_mask(&w, &by_wanda)?;
        println!("{pattern:<28} {}", verify_mask(&layer));
        println!(
            "{:<28} magnitude/wanda masks agree on {agree}/{} entries",
            "",
            w.len()
        );
    }
    Ok(())
}
