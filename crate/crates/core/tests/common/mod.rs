#![allow(dead_code)]

pub mod oracle;

use shortfall_core::{Builtin, CrrModel, MarketParams};

pub const STRIKE: f64 = 100.0;

pub fn params() -> MarketParams {
    MarketParams::new(0.0, 0.2, 0.02, 1.0, 100.0, 1.0).unwrap()
}

pub fn model(n: usize) -> CrrModel {
    CrrModel::new(params(), n).unwrap()
}

pub fn game_put(penalty: f64) -> Builtin {
    Builtin::GamePut {
        strike: STRIKE,
        penalty,
    }
}

pub fn american_put() -> Builtin {
    Builtin::AmericanPut { strike: STRIKE }
}

pub fn lookback_put() -> Builtin {
    Builtin::LookbackPut {
        strike: STRIKE,
        penalty: 2.0,
    }
}

/// Uniform draws in `[0, 1)` keyed by a node.
pub struct Noise {
    seed: u64,
}

impl Noise {
    pub fn new(seed: u64) -> Noise {
        Noise { seed }
    }

    pub fn at(&self, depth: usize, bits: u64) -> f64 {
        // splitmix64 of (seed, depth, bits)
        let mut z = self
            .seed
            .wrapping_add((depth as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
            .wrapping_add(bits.wrapping_mul(0xBF58_476D_1CE4_E5B9));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64
    }
}
