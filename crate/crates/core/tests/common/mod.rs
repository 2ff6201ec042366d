#![allow(dead_code)]

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use tbnode::model::{ModelParams, TYPICAL_RANGES};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * unit(rng)
}

/// Parameters drawn log-uniformly from the literature ranges.
pub fn draw_params(rng: &mut ChaCha8Rng) -> ModelParams {
    let mut v = [0.0; 6];
    for (slot, (_, lo, hi)) in v.iter_mut().zip(TYPICAL_RANGES) {
        *slot = uniform(rng, lo.ln(), hi.ln()).exp();
    }
    ModelParams {
        recruitment: v[0],
        natural_mortality: v[1],
        tb_mortality: v[2],
        transmission: v[3],
        progression: v[4],
        recovery: v[5],
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
