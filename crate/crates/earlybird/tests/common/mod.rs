#![allow(dead_code)]

use earlybird::{CohortEngine, Convention, ObservationModel, Prior, UtilityFunction, UtilityKind};

pub fn uniform() -> Prior {
    Prior::beta(1.0, 1.0).unwrap()
}

pub fn nels() -> Prior {
    Prior::beta(0.028, 0.35).unwrap()
}

pub fn two_point() -> Prior {
    Prior::grid(vec![0.2, 0.8], vec![0.5, 0.5]).unwrap()
}

pub fn point(p: f64) -> Prior {
    Prior::grid(vec![p], vec![1.0]).unwrap()
}

/// Midpoint grid with n equal-weight cells on [0, 1].
pub fn grid_uniform(n: usize) -> Prior {
    let pts: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let w = vec![1.0 / n as f64; n];
    Prior::grid(pts, w).unwrap()
}

pub fn model(gamma: f64) -> ObservationModel {
    ObservationModel::new(gamma).unwrap()
}

pub fn fully(horizon: u32) -> UtilityFunction {
    UtilityFunction::new(UtilityKind::FullyEffective, horizon).unwrap()
}

pub fn engine(prior: Prior, gamma: f64, horizon: u32, conv: Convention) -> CohortEngine {
    CohortEngine::new(prior, model(gamma), fully(horizon), conv).unwrap()
}

/// Small deterministic generator for test parameter sweeps.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed.wrapping_add(0x9e37_79b9_7f4a_7c15))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform draw in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in [lo, hi).
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}
