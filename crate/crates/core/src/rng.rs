//! Seed derivation and bootstrap multiplier distributions.
//!
//! Every parallel unit of work (bootstrap replicate, data split, Monte Carlo
//! repetition, CV fold) draws from its own generator, seeded from the user
//! seed plus a stream tag and an index. Results are therefore identical for
//! any worker count or scheduling order.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Stream tags for the independent sub-streams hanging off one user seed.
/// Values are arbitrary but must stay distinct and stable.
pub mod stream {
    pub const MC_REP: u64 = 1;
    pub const BOOTSTRAP: u64 = 2;
    pub const SPLIT: u64 = 3;
    pub const CV_FOLDS: u64 = 4;
    pub const NODEWISE: u64 = 5;
    pub const TUNING: u64 = 6;
    pub const GENERATE: u64 = 7;
    pub const SELECTOR: u64 = 8;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

/// Mix a user seed with a stream tag and an index into a fresh sub-seed.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(tag)) ^ splitmix64(index))
}

/// Counter-based generator for the unit of work `(tag, index)` under `seed`.
pub fn derived_rng(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag, index))
}

/// Wild bootstrap multiplier distribution. All options have mean zero, unit
/// variance, and finite fourth moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Multiplier {
    #[default]
    Rademacher,
    Gaussian,
    Mammen,
}

impl Multiplier {
    pub fn sample(self, rng: &mut impl Rng) -> f64 {
        match self {
            Multiplier::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Multiplier::Gaussian => {
                let n: f64 = rand_distr::StandardNormal.sample_from(rng);
                n
            }
            Multiplier::Mammen => {
                // Two-point law at (1-sqrt5)/2 and (1+sqrt5)/2 with
                // P(upper) = (sqrt5 - 1)/(2 sqrt5).
                let sqrt5 = 5.0_f64.sqrt();
                let p_upper = (sqrt5 - 1.0) / (2.0 * sqrt5);
                if rng.random::<f64>() < p_upper {
                    (1.0 + sqrt5) / 2.0
                } else {
                    (1.0 - sqrt5) / 2.0
                }
            }
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rademacher" => Some(Multiplier::Rademacher),
            "gaussian" | "normal" => Some(Multiplier::Gaussian),
            "mammen" => Some(Multiplier::Mammen),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Multiplier::Rademacher => "rademacher",
            Multiplier::Gaussian => "gaussian",
            Multiplier::Mammen => "mammen",
        }
    }
}

trait SampleFrom {
    fn sample_from(self, rng: &mut impl Rng) -> f64;
}

impl SampleFrom for rand_distr::StandardNormal {
    fn sample_from(self, rng: &mut impl Rng) -> f64 {
        use rand_distr::Distribution;
        self.sample(rng)
    }
}

/// Fisher-Yates shuffle of `0..n` driven by `rng`.
pub fn permutation(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    idx
}
