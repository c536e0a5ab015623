//! Seeded synthetic populations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::population::Population;

/// `size` units with `dim` auxiliaries drawn independently from `U[0, 1)`.
pub fn uniform_population(size: usize, dim: usize, seed: u64) -> Result<Population> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let aux: Vec<f64> = (0..size * dim).map(|_| rng.random::<f64>()).collect();
    let ids = (1..=size).map(|i| i.to_string()).collect();
    Population::new(ids, aux, dim)
}
