//! Simulated annealing over circular orderings.
//!
//! Each iteration swaps two uniformly chosen positions and scores the move
//! with the incremental swap delta. A move that beats the best objective seen
//! so far is always kept. Otherwise a move that does not improve on the
//! previous iterate is undone unless a Metropolis draw keeps it, and a move
//! that improves on the previous iterate (without beating the best) is kept.
//! The temperature is multiplied by `alpha` after every iteration.
//!
//! Runs are reproducible: the chain draws from a ChaCha8 generator seeded
//! with [`AnnealConfig::seed`] (stream 0); the temperature probes use stream 1
//! of the same seed and random initial orders use stream 2.

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::energy::{energy_change, ObjectiveState};
use crate::error::{DbdError, Result};
use crate::population::{compute_phi, CircularSequence, DistanceCache, Population};

const PROBE_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;

/// Floor returned by [`auto_temperature`] when every probed move is neutral.
pub const MIN_TEMPERATURE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Temperature {
    /// Calibrate from random probe swaps, see [`auto_temperature`].
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cooling {
    /// `alpha = final_ratio^(1/K)`, see [`auto_alpha`].
    Auto {
        final_ratio: f64,
    },
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealConfig {
    pub iterations: u64,
    pub t0: Temperature,
    pub alpha: Cooling,
    pub seed: u64,
    /// Stride of trace points and progress lines; 0 keeps only the endpoints.
    pub report_every: u64,
    /// Number of probe swaps used by [`Temperature::Auto`].
    pub probes: usize,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self {
            iterations: 1_000_000,
            t0: Temperature::Auto,
            alpha: Cooling::Auto { final_ratio: 1e-3 },
            seed: 0,
            report_every: 10_000,
            probes: 100,
        }
    }
}

impl AnnealConfig {
    pub fn with_iterations(mut self, iterations: u64) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Temperature::Fixed(t) = self.t0 {
            if !(t > 0.0) {
                return Err(DbdError::InvalidConfig(format!(
                    "initial temperature must be positive, got {t}"
                )));
            }
        }
        match self.alpha {
            Cooling::Fixed(a) if !(a > 0.0 && a < 1.0) => Err(DbdError::InvalidConfig(format!(
                "cooling rate must lie in (0, 1), got {a}"
            ))),
            Cooling::Auto { final_ratio } if !(final_ratio > 0.0 && final_ratio < 1.0) => {
                Err(DbdError::InvalidConfig(format!(
                    "final temperature ratio must lie in (0, 1), got {final_ratio}"
                )))
            }
            _ if self.probes == 0 => Err(DbdError::InvalidConfig(
                "at least one temperature probe is required".into(),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub iteration: u64,
    pub best: f64,
}

#[derive(Debug, Clone)]
pub struct AnnealResult {
    pub best_sequence: CircularSequence,
    pub best_objective: f64,
    pub initial_objective: f64,
    pub trace: Vec<TracePoint>,
    pub accepted: u64,
    pub rejected: u64,
    /// Temperature and cooling rate actually used.
    pub t0: f64,
    pub alpha: f64,
    pub seed: u64,
}

/// Cooling rate that takes the temperature from `t0` to `final_ratio * t0`
/// in `iterations` geometric steps.
pub fn auto_alpha(iterations: u64, final_ratio: f64) -> f64 {
    if iterations == 0 {
        return final_ratio;
    }
    final_ratio.powf(1.0 / iterations as f64)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Initial temperature at which a median-sized uphill move from `initial`
/// is accepted with probability one half: `median |dE| / ln 2` over `probes`
/// random swaps, floored at [`MIN_TEMPERATURE`].
pub fn auto_temperature(
    pop: &Population,
    cache: &DistanceCache,
    initial: &CircularSequence,
    seed: u64,
    probes: usize,
) -> Result<f64> {
    let state = ObjectiveState::new(pop, cache, initial.clone())?;
    let len = initial.len();
    if len < 2 || probes == 0 {
        return Ok(MIN_TEMPERATURE);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PROBE_STREAM);
    let n = initial.block_size();
    let mut deltas: Vec<f64> = (0..probes)
        .map(|_| {
            let (a, b) = pick_pair(&mut rng, len);
            energy_change(state.swap_delta_repulsion(a, b), len, n).abs()
        })
        .collect();
    Ok((median(&mut deltas) / std::f64::consts::LN_2).max(MIN_TEMPERATURE))
}

/// First position uniform, second uniform among the remaining positions.
#[inline]
fn pick_pair<R: Rng + ?Sized>(rng: &mut R, len: usize) -> (usize, usize) {
    let a = rng.random_range(0..len);
    let mut b = rng.random_range(0..len - 1);
    if b >= a {
        b += 1;
    }
    (a, b)
}

/// Seeded uniform shuffle used as the starting order of a chain.
pub fn initial_sequence(len: usize, n: usize, seed: u64) -> Result<CircularSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SHUFFLE_STREAM);
    CircularSequence::shuffled(len, n, &mut rng)
}

/// Seed of restart `index`; restart 0 keeps the base seed.
pub fn restart_seed(seed: u64, index: u64) -> u64 {
    if index == 0 {
        return seed;
    }
    // splitmix64 finalizer over the pair
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs one annealing chain from `initial` and returns the best ordering
/// visited.
pub fn optimize(
    pop: &Population,
    cache: &DistanceCache,
    initial: CircularSequence,
    config: &AnnealConfig,
) -> Result<AnnealResult> {
    config.validate()?;
    let len = initial.len();
    let n = initial.block_size();
    let mut state = ObjectiveState::new(pop, cache, initial)?;
    let initial_objective = state.expected_energy();

    let trivial = n == 1 || n == len;
    if trivial {
        warn!("block size {n} with N = {len}: every ordering has the same objective");
    }
    if trivial || config.iterations == 0 {
        return Ok(AnnealResult {
            best_sequence: state.into_sequence(),
            best_objective: initial_objective,
            initial_objective,
            trace: vec![TracePoint {
                iteration: 0,
                best: initial_objective,
            }],
            accepted: 0,
            rejected: 0,
            t0: 0.0,
            alpha: 0.0,
            seed: config.seed,
        });
    }

    let t0 = match config.t0 {
        Temperature::Fixed(t) => t,
        Temperature::Auto => {
            auto_temperature(pop, cache, state.sequence(), config.seed, config.probes)?
        }
    };
    let alpha = match config.alpha {
        Cooling::Fixed(a) => a,
        Cooling::Auto { final_ratio } => auto_alpha(config.iterations, final_ratio),
    };
    debug!(
        "annealing N = {len}, n = {n}, K = {}, t0 = {t0:e}, alpha = {alpha}",
        config.iterations
    );

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut temperature = t0;
    let mut current = state.raw_expected_energy();
    let mut best = current;
    // The best ordering is copied lazily, when the chain first moves away from it.
    let mut best_order: Option<CircularSequence> = None;
    let mut at_best = true;
    let mut accepted = 0u64;
    let mut rejected = 0u64;
    let mut trace = vec![TracePoint {
        iteration: 0,
        best: initial_objective,
    }];

    for k in 1..=config.iterations {
        let (a, b) = pick_pair(&mut rng, len);
        let dr = state.swap_delta_repulsion(a, b);
        let proposed = state.energy_after(dr);

        if proposed < best {
            state.apply_swap(a, b, dr);
            current = proposed;
            best = proposed;
            at_best = true;
            accepted += 1;
        } else if proposed >= current
            && rng.random::<f64>() >= (-(proposed - current) / temperature).exp()
        {
            rejected += 1;
        } else {
            if at_best {
                best_order = Some(state.sequence().clone());
                at_best = false;
            }
            state.apply_swap(a, b, dr);
            current = proposed;
            accepted += 1;
        }
        temperature *= alpha;

        if config.report_every > 0 && k % config.report_every == 0 {
            debug!("iter {k}: current {current:.6e}, best {best:.6e}, T {temperature:.3e}");
            trace.push(TracePoint { iteration: k, best });
        }
    }
    if trace.last().map(|p| p.iteration) != Some(config.iterations) {
        trace.push(TracePoint {
            iteration: config.iterations,
            best,
        });
    }

    let best_sequence = if at_best {
        state.into_sequence()
    } else {
        best_order.expect("best ordering recorded when leaving it")
    };
    // Report the best objective recomputed from its ordering, free of drift.
    let best_state = ObjectiveState::new(pop, cache, best_sequence)?;
    Ok(AnnealResult {
        best_objective: best_state.expected_energy(),
        best_sequence: best_state.into_sequence(),
        initial_objective,
        trace: trace
            .into_iter()
            .map(|p| TracePoint {
                iteration: p.iteration,
                best: p.best.max(0.0),
            })
            .collect(),
        accepted,
        rejected,
        t0,
        alpha,
        seed: config.seed,
    })
}

/// Shuffles the population with the configured seed and anneals from there.
pub fn optimize_population(
    pop: &Population,
    n: usize,
    config: &AnnealConfig,
) -> Result<AnnealResult> {
    let cache = compute_phi(pop);
    let initial = initial_sequence(pop.len(), n, config.seed)?;
    optimize(pop, &cache, initial, config)
}

/// Runs `restarts` independent chains in parallel, each from its own seeded
/// shuffle, and keeps the best. Ties go to the lowest restart index.
pub fn optimize_restarts(
    pop: &Population,
    cache: &DistanceCache,
    n: usize,
    config: &AnnealConfig,
    restarts: usize,
) -> Result<AnnealResult> {
    if restarts == 0 {
        return Err(DbdError::InvalidConfig(
            "at least one restart is required".into(),
        ));
    }
    let results = (0..restarts as u64)
        .into_par_iter()
        .map(|i| {
            let mut cfg = config.clone();
            cfg.seed = restart_seed(config.seed, i);
            let initial = initial_sequence(pop.len(), n, cfg.seed)?;
            optimize(pop, cache, initial, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(results
        .into_iter()
        .reduce(|best, r| {
            if r.best_objective < best.best_objective {
                r
            } else {
                best
            }
        })
        .expect("restarts > 0"))
}
