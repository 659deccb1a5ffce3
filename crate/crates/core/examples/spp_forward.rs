//! The adapter forward pass: naive (explicit effective weight) vs block-split.
use spp_core::adapters::{DropoutMask, SppAdapter};
use spp_core::numerics::alloc_track::Tracker;
use spp_core::numerics::Rng;
use spp_core::pruning::{apply_mask, build_mask, score_magnitude, SparsityPattern};

fn main() -> spp_core::Result<()> {
    let (b, m, n, r) = (4, 256, 512, 16);
    let mut rng = Rng::seed_from_u64(1);
    let w = rng.uniform_matrix(-1.0, 1.0, m, n)?;
    let layer = apply_mask(
        &w,
        &build_mask(&score_magnitude(&w), SparsityPattern::two_four())?,
    )?;

    // random factors so the branch is not zero
    let alpha = rng.uniform_matrix(-1.0, 1.0, r, n)?;
    let beta = rng.uniform_matrix(-1.0, 1.0, m, 1)?;
    let ad = SppAdapter::new(alpha, beta, 1.0, 0.05)?;
    println!(
        "adapter: r={r}, {} trainable params for a {m}x{n} weight",
        ad.trainable_params()
    );

    let x = rng.uniform_matrix(-1.0, 1.0, b, n)?;
    let mask = DropoutMask::sample(b, n, ad.dropout(), &mut rng)?;

    let t = Tracker::start();
    let (naive, _) = ad.forward_naive_with(&x, &layer, mask.clone(), true)?;
    let naive_alloc = t.finish();
    let t = Tracker::start();
    let (fast, _) = ad.forward_optimized_with(&x, &layer, mask, true)?;
    let fast_alloc = t.finish();

    println!(
        "max relative difference: {:.2e}",
        naive.max_rel_diff(&fast)?
    );
    println!(
        "largest buffer: naive {} elements, block-split {} elements",
        naive_alloc.largest(),
        fast_alloc.largest()
    );
    println!(
        "block-split allocated an {m}x{n} matrix: {}",
        fast_alloc.allocated_shape(m, n)
    );

    Ok(())
}
