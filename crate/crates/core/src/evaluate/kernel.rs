//! The distance-induced kernel behind the energy distance and the per-sample
//! MSE bound it yields for HT totals.
//!
//! With `k(x, y) = ||x - z0|| + ||y - z0|| - ||x - y||` the squared maximum
//! mean discrepancy between two empirical distributions equals their energy
//! distance, whatever the origin `z0`. For `f = k(x*, .)` Cauchy-Schwarz gives
//! `(Y_hat - Y)^2 <= N^2 k(x*, x*) E(F_s, F_U)` for every fixed sample `s`.

use crate::energy::{energy_distance, ZERO_TOLERANCE};
use crate::error::Result;
use crate::population::{euclidean, DistanceCache, Population, Sample};

use super::estimate::ht_total;

pub fn energy_kernel(x: &[f64], y: &[f64], origin: &[f64]) -> f64 {
    euclidean(x, origin) + euclidean(y, origin) - euclidean(x, y)
}

/// Squared MMD between the sample and population empirical distributions,
/// evaluated through kernel sums alone.
pub fn mmd_squared(sample: &Sample, pop: &Population, origin: &[f64]) -> f64 {
    let n = sample.len() as f64;
    let big_n = pop.len() as f64;
    let k = |a: usize, b: usize| energy_kernel(pop.row(a), pop.row(b), origin);

    let mut ss = 0.0;
    for &i in &sample.units {
        for &j in &sample.units {
            ss += k(i, j);
        }
    }
    let mut uu = 0.0;
    for i in 0..pop.len() {
        for j in 0..pop.len() {
            uu += k(i, j);
        }
    }
    let mut su = 0.0;
    for &i in &sample.units {
        for j in 0..pop.len() {
            su += k(i, j);
        }
    }
    ss / (n * n) + uu / (big_n * big_n) - 2.0 * su / (n * big_n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    /// `(Y_hat - Y)^2` for `y_i = k(x*, x_i)`.
    pub lhs: f64,
    /// `N^2 k(x*, x*) E(F_s, F_U)`.
    pub rhs: f64,
    pub holds: bool,
}

/// Checks the per-sample MSE bound for the witness function `k(x*, .)`.
///
/// Besides the `1e-9` relative slack, the comparison allows the absolute
/// rounding band of the energy statistic (`N^2 k(x*, x*)` times its zero
/// tolerance), which matters only when the sample reproduces the population.
pub fn check_rkhs_bound(
    sample: &Sample,
    pop: &Population,
    cache: &DistanceCache,
    witness: &[f64],
    origin: &[f64],
) -> Result<BoundCheck> {
    let y: Vec<f64> = (0..pop.len())
        .map(|i| energy_kernel(witness, pop.row(i), origin))
        .collect();
    let total: f64 = y.iter().sum();
    let err = ht_total(sample, &y) - total;
    let lhs = err * err;
    let norm2 = energy_kernel(witness, witness, origin);
    let big_n = pop.len() as f64;
    let rhs = big_n * big_n * norm2 * energy_distance(sample, cache, pop)?;
    let slack = big_n * big_n * norm2 * ZERO_TOLERANCE * cache.pop_self().max(1.0);
    Ok(BoundCheck {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + 1e-9) + slack,
    })
}
