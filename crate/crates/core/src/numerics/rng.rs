//! Seeded xoshiro256** generator.
//!
//! The 64-bit seed is expanded into the 256-bit state with splitmix64. Doubles
//! take the top 53 bits of each output, so streams are identical on every
//! platform.

use crate::error::{Result, SppError};
use crate::numerics::Matrix;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    state: [u64; 4],
}

fn splitmix64(x: &mut u64) -> u64 {
    *x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn seed_from_u64(seed: u64) -> Self {
        let mut sm = seed;
        let state = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Rng { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.state;
        let result = s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform double in `[0, 1)` with 53 bits of mantissa.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform double in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let v = lo + (hi - lo) * self.next_f64();
        // lo + (hi-lo)*u can round up to hi when the interval is tiny.
        if v >= hi {
            lo
        } else {
            v
        }
    }

    /// Uniform index in `0..n` by rejection, so it carries no modulo bias.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// Fills a `rows×cols` matrix with uniform draws in `[lo, hi)`, row-major.
    pub fn uniform_matrix(&mut self, lo: f64, hi: f64, rows: usize, cols: usize) -> Result<Matrix> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(SppError::argument(format!(
                "uniform range requires finite lo < hi, got [{lo}, {hi})"
            )));
        }
        if rows == 0 || cols == 0 {
            return Err(SppError::shape(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        Ok(Matrix::from_fn(rows, cols, |_, _| self.uniform(lo, hi)))
    }
}
