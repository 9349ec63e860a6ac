//! Seeded sampling helpers. Every random decision in the crate flows from
//! an explicit `u64` seed so runs are bit-reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Derives a sequence of independent child seeds from one root seed.
#[derive(Clone, Debug)]
pub struct SeedStream(ChaCha8Rng);

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        SeedStream(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn next_seed(&mut self) -> u64 {
        self.0.gen()
    }

    pub fn next_rng(&mut self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.next_seed())
    }
}

/// Standard normal variate by Box–Muller.
pub fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u: f64 = 1.0 - rng.gen::<f64>();
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// Uniformly distributed point on the Euclidean unit sphere.
pub fn random_unit_vector(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| standard_normal(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Uniformly distributed point in the Euclidean unit ball.
pub fn random_in_unit_ball(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let dir = random_unit_vector(rng, n);
    let r = rng.gen::<f64>().powf(1.0 / n as f64);
    dir.into_iter().map(|x| x * r).collect()
}
