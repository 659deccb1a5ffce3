//! Merging keeps SPP layers sparse; LoRA merges densify unless re-pruned.
use spp_core::adapters::{lora_star_reprune, LoraAdapter, SppAdapter};
use spp_core::numerics::Rng;
use spp_core::pruning::{apply_mask, build_mask, score_magnitude, verify_mask, SparsityPattern};

fn main() -> spp_core::Result<()> {
    let (m, n) = (32, 64);
    let mut rng = Rng::seed_from_u64(2);
    let w = rng.uniform_matrix(-1.0, 1.0, m, n)?;
    let layer = apply_mask(
        &w,
        &build_mask(&score_magnitude(&w), SparsityPattern::two_four())?,
    )?;
    println!("pruned:        {}", verify_mask(&layer));

    // stand-ins for trained factors
    let spp = SppAdapter::new(
        rng.uniform_matrix(-1.0, 1.0, 8, n)?,
        rng.uniform_matrix(-1.0, 1.0, m, 1)?,
        1.0,
        0.0,
    )?;
    let merged = spp.merge(&layer)?;
    println!("spp merge:     {}", verify_mask(&merged));

    // roughly the same number of trainable parameters
    let r = (spp.trainable_params() as f64 / (m + n) as f64).round() as usize;
    let lora = LoraAdapter::new(
        rng.uniform_matrix(-1.0, 1.0, r, n)?,
        rng.uniform_matrix(-1.0, 1.0, m, r)?,
        1.0,
        0.0,
    )?;
    let dense = lora.merge_dense(&layer)?;
    println!(
        "lora merge:    nnz={} of {} (budget {} vs spp {})",
        dense.nnz(),
        dense.len(),
        lora.trainable_params(),
        spp.trainable_params()
    );
    let star = lora_star_reprune(&dense, layer.mask())?;
    println!("lora* reprune: {}", verify_mask(&star));
    Ok(())
}
