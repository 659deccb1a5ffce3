#![allow(dead_code)]

use spp_core::adapters::{DropoutMask, LoraAdapter, SppAdapter};
use spp_core::numerics::{Matrix, Rng};
use spp_core::pruning::{apply_mask, build_mask, score_magnitude, PrunedLayer, SparsityPattern};

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-6;

pub fn patterns() -> Vec<SparsityPattern> {
    vec![
        SparsityPattern::unstructured(0.5).unwrap(),
        SparsityPattern::unstructured(0.75).unwrap(),
        SparsityPattern::two_four(),
        SparsityPattern::n_of_m(2, 8).unwrap(),
    ]
}

/// Random weight, magnitude-pruned to `pattern`.
pub fn random_pruned(rng: &mut Rng, m: usize, n: usize, pattern: SparsityPattern) -> PrunedLayer {
    let w = rng.uniform_matrix(-1.0, 1.0, m, n).unwrap();
    let mask = build_mask(&score_magnitude(&w), pattern).unwrap();
    apply_mask(&w, &mask).unwrap()
}

pub fn divisors(m: usize) -> Vec<usize> {
    (1..=m).filter(|r| m.is_multiple_of(*r)).collect()
}

/// SPP adapter with every factor drawn at random, as after some training.
pub fn random_spp(rng: &mut Rng, m: usize, n: usize, r: usize, p: f64) -> SppAdapter {
    let alpha = rng.uniform_matrix(-1.0, 1.0, r, n).unwrap();
    let beta = rng.uniform_matrix(-1.0, 1.0, m, 1).unwrap();
    let s = rng.uniform(0.25, 2.0);
    SppAdapter::new(alpha, beta, s, p).unwrap()
}

pub fn random_lora(rng: &mut Rng, m: usize, n: usize, r: usize, p: f64) -> LoraAdapter {
    let a = rng.uniform_matrix(-1.0, 1.0, r, n).unwrap();
    let b = rng.uniform_matrix(-1.0, 1.0, m, r).unwrap();
    let s = rng.uniform(0.25, 2.0);
    LoraAdapter::new(a, b, s, p).unwrap()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let diff: f64 = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// `Σ Y ⊙ G`, so that `∂L/∂Y = G`.
pub fn probe(y: &Matrix, g: &Matrix) -> f64 {
    y.iter().zip(g.iter()).map(|(a, b)| a * b).sum()
}

/// Central differences of `f` with respect to every entry of `at`.
pub fn numeric_grad(at: &Matrix, mut f: impl FnMut(&Matrix) -> f64) -> Matrix {
    let (rows, cols) = at.shape();
    let mut out = Matrix::zeros(rows, cols);
    let mut probe_point = at.clone();
    for i in 0..rows {
        for j in 0..cols {
            let v = at.get(i, j);
            probe_point.set(i, j, v + FD_STEP);
            let up = f(&probe_point);
            probe_point.set(i, j, v - FD_STEP);
            let down = f(&probe_point);
            probe_point.set(i, j, v);
            out.set(i, j, (up - down) / (2.0 * FD_STEP));
        }
    }
    out
}

pub struct GradCheck {
    pub name: &'static str,
    pub err: f64,
}

/// Checks d_alpha, d_beta, d_x of one random SPP instance.
pub fn check_spp_instance(rng: &mut Rng) -> Vec<GradCheck> {
    let m = [2, 4, 6, 8][rng.below(4)];
    let n = [4, 8][rng.below(2)];
    let rs = divisors(m);
    let r = rs[rng.below(rs.len())];
    let b = 1 + rng.below(4);
    let pattern = [
        SparsityPattern::two_four(),
        SparsityPattern::unstructured(0.5).unwrap(),
    ][rng.below(2)];
    let layer = random_pruned(rng, m, n, pattern);
    let ad = random_spp(rng, m, n, r, 0.2);
    let x = rng.uniform_matrix(-1.0, 1.0, b, n).unwrap();
    let g = rng.uniform_matrix(-1.0, 1.0, b, m).unwrap();
    let mask = DropoutMask::sample(b, n, 0.2, rng).unwrap();

    let (_, cache) = ad
        .forward_optimized_with(&x, &layer, mask.clone(), true)
        .unwrap();
    let grads = ad.backward(&layer, &cache, &g).unwrap();

    let loss = |ad: &SppAdapter, x: &Matrix| {
        let (y, _) = ad
            .forward_naive_with(x, &layer, mask.clone(), true)
            .unwrap();
        probe(&y, &g)
    };
    let num_alpha = numeric_grad(ad.alpha(), |a| {
        let t = SppAdapter::new(a.clone(), ad.beta().clone(), ad.scale(), ad.dropout()).unwrap();
        loss(&t, &x)
    });
    let num_beta = numeric_grad(ad.beta(), |bt| {
        let t = SppAdapter::new(ad.alpha().clone(), bt.clone(), ad.scale(), ad.dropout()).unwrap();
        loss(&t, &x)
    });
    let num_x = numeric_grad(&x, |xp| loss(&ad, xp));
    vec![
        GradCheck {
            name: "spp d_alpha",
            err: rel_err(&grads.d_alpha, &num_alpha),
        },
        GradCheck {
            name: "spp d_beta",
            err: rel_err(&grads.d_beta, &num_beta),
        },
        GradCheck {
            name: "spp d_x",
            err: rel_err(&grads.d_x, &num_x),
        },
    ]
}

/// Checks d_A, d_B, d_x of one random LoRA instance.
pub fn check_lora_instance(rng: &mut Rng) -> Vec<GradCheck> {
    let m = [2, 4, 6, 8][rng.below(4)];
    let n = [4, 8][rng.below(2)];
    let r = 1 + rng.below(3);
    let b = 1 + rng.below(4);
    let layer = random_pruned(rng, m, n, SparsityPattern::two_four());
    let ad = random_lora(rng, m, n, r, 0.2);
    let x = rng.uniform_matrix(-1.0, 1.0, b, n).unwrap();
    let g = rng.uniform_matrix(-1.0, 1.0, b, m).unwrap();
    let mask = DropoutMask::sample(b, n, 0.2, rng).unwrap();

    let (_, cache) = ad.forward_with(&x, &layer, mask.clone(), true).unwrap();
    let grads = ad.backward(&layer, &cache, &g).unwrap();

    let loss = |ad: &LoraAdapter, x: &Matrix| {
        let (y, _) = ad.forward_with(x, &layer, mask.clone(), true).unwrap();
        probe(&y, &g)
    };
    let num_a = numeric_grad(ad.a(), |a| {
        let t = LoraAdapter::new(a.clone(), ad.b().clone(), ad.scale(), ad.dropout()).unwrap();
        loss(&t, &x)
    });
    let num_b = numeric_grad(ad.b(), |bm| {
        let t = LoraAdapter::new(ad.a().clone(), bm.clone(), ad.scale(), ad.dropout()).unwrap();
        loss(&t, &x)
    });
    let num_x = numeric_grad(&x, |xp| loss(&ad, xp));
    vec![
        GradCheck {
            name: "lora d_A",
            err: rel_err(&grads.d_a, &num_a),
        },
        GradCheck {
            name: "lora d_B",
            err: rel_err(&grads.d_b, &num_b),
        },
        GradCheck {
            name: "lora d_x",
            err: rel_err(&grads.d_x, &num_x),
        },
    ]
}
