//! Distributionally balanced sampling designs.
//!
//! A population is arranged on a circle and a sample is the block of `n`
//! consecutive units after a uniform random start. The ordering is tuned by
//! simulated annealing so that every block matches the population's auxiliary
//! distribution as closely as possible, measured by the design-expected
//! energy distance. The crate also provides the competing designs (SRS and
//! the local pivotal method), the usual spread and balance metrics, HT
//! estimation and a Monte Carlo harness.
//!
//! ```
//! use dbd_core::{anneal, population, synthetic};
//!
//! let pop = synthetic::uniform_population(60, 2, 1)?;
//! let cfg = anneal::AnnealConfig::default().with_iterations(20_000).with_seed(7);
//! let run = anneal::optimize_population(&pop, 6, &cfg)?;
//! assert!(run.best_objective < run.initial_objective);
//! let sample = run.best_sequence.window(1)?;
//! assert_eq!(sample.len(), 6);
//! # let _ = population::compute_phi(&pop);
//! # Ok::<(), dbd_core::DbdError>(())
//! ```

pub mod anneal;
pub mod designs;
pub mod energy;
pub mod error;
pub mod evaluate;
pub mod population;
pub mod synthetic;

pub use error::{DbdError, Result};
pub use population::{CircularSequence, DistanceCache, Population, Sample};
