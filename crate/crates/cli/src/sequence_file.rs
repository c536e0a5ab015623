//! On-disk form of an optimized circular ordering.
//!
//! The file is pretty-printed JSON holding the unit ids in circular order,
//! the block size and the optimizer settings that produced it. Only
//! `wall_time_secs` varies between identical runs.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use dbd_core::anneal::AnnealResult;
use dbd_core::{CircularSequence, Population};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerMeta {
    pub iterations: u64,
    pub t0: f64,
    pub alpha: f64,
    pub seed: u64,
    pub restarts: usize,
    pub initial_expected_energy: f64,
    pub accepted: u64,
    pub rejected: u64,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceFile {
    pub version: u32,
    pub population_size: usize,
    pub block_size: usize,
    /// Stratum label when the sequence covers one stratum of a Block-DBD run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stratum: Option<i64>,
    /// Unit ids in circular order.
    pub ids: Vec<String>,
    pub expected_energy: f64,
    pub optimizer: OptimizerMeta,
}

impl SequenceFile {
    pub fn from_result(
        pop: &Population,
        result: &AnnealResult,
        restarts: usize,
        iterations: u64,
        wall_time_secs: f64,
    ) -> Self {
        let seq = &result.best_sequence;
        Self {
            version: FORMAT_VERSION,
            population_size: seq.len(),
            block_size: seq.block_size(),
            stratum: None,
            ids: seq.order().iter().map(|&u| pop.ids()[u].clone()).collect(),
            expected_energy: result.best_objective,
            optimizer: OptimizerMeta {
                iterations,
                t0: result.t0,
                alpha: result.alpha,
                seed: result.seed,
                restarts,
                initial_expected_energy: result.initial_objective,
                accepted: result.accepted,
                rejected: result.rejected,
                wall_time_secs,
            },
        }
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let bad = |reason: String| CliError::SequenceFile {
            path: path.to_path_buf(),
            reason,
        };
        let file: Self = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        if file.version != FORMAT_VERSION {
            return Err(bad(format!(
                "format version {} is not supported (expected {FORMAT_VERSION})",
                file.version
            )));
        }
        if file.ids.len() != file.population_size {
            return Err(bad(format!(
                "{} ids for a population of {}",
                file.ids.len(),
                file.population_size
            )));
        }
        file.local_sequence().map_err(|e| bad(e.to_string()))?;
        Ok(file)
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(self).expect("sequence file serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| CliError::io(path, e))
    }

    /// The ordering over the stored ids themselves: position `k` holds
    /// `ids[k]`.
    pub fn local_sequence(&self) -> dbd_core::Result<CircularSequence> {
        CircularSequence::identity(self.ids.len(), self.block_size)
    }

    /// Maps the stored ids onto `pop`, which must hold exactly these units.
    pub fn resolve(&self, pop: &Population) -> CliResult<CircularSequence> {
        if pop.len() != self.ids.len() {
            return Err(CliError::Usage(format!(
                "sequence covers {} units but the population has {}",
                self.ids.len(),
                pop.len()
            )));
        }
        let index: HashMap<&str, usize> = pop
            .ids()
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let order = self
            .ids
            .iter()
            .map(|id| {
                index.get(id.as_str()).copied().ok_or_else(|| {
                    CliError::Usage(format!("sequence id `{id}` is not in the population"))
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        Ok(CircularSequence::new(order, self.block_size)?)
    }
}
