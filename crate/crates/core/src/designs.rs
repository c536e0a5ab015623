//! Sampling designs: the circular DBD draw and its full support, simple
//! random sampling, the local pivotal method (LPM1) and the stratified
//! Block-DBD mode.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use crate::anneal::{initial_sequence, optimize, AnnealConfig, AnnealResult};
use crate::error::{DbdError, Result};
use crate::population::{compute_phi, CircularSequence, Population, Sample};

/// Which design a Monte Carlo run draws from.
#[derive(Debug, Clone, PartialEq)]
pub enum DesignKind {
    /// Circular design on the given ordering; evaluated on its full support.
    Dbd(CircularSequence),
    Srs,
    Lpm,
}

impl DesignKind {
    pub fn label(&self) -> &'static str {
        match self {
            DesignKind::Dbd(_) => "dbd",
            DesignKind::Srs => "srs",
            DesignKind::Lpm => "lpm",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    pub kind: DesignKind,
    pub n: usize,
    pub seed: u64,
}

impl DesignSpec {
    pub fn dbd(sequence: CircularSequence, seed: u64) -> Self {
        let n = sequence.block_size();
        Self {
            kind: DesignKind::Dbd(sequence),
            n,
            seed,
        }
    }

    pub fn srs(n: usize, seed: u64) -> Self {
        Self {
            kind: DesignKind::Srs,
            n,
            seed,
        }
    }

    pub fn lpm(n: usize, seed: u64) -> Self {
        Self {
            kind: DesignKind::Lpm,
            n,
            seed,
        }
    }

    pub fn validate(&self, population_size: usize) -> Result<()> {
        if self.n == 0 || self.n > population_size {
            return Err(DbdError::InvalidConfig(format!(
                "sample size {} outside 1..={population_size}",
                self.n
            )));
        }
        if let DesignKind::Dbd(seq) = &self.kind {
            if seq.len() != population_size || seq.block_size() != self.n {
                return Err(DbdError::InvalidConfig(format!(
                    "sequence covers {} units with block size {}, expected {} and {}",
                    seq.len(),
                    seq.block_size(),
                    population_size,
                    self.n
                )));
            }
        }
        Ok(())
    }
}

/// Draws a uniform start `j` in `1..=N` and returns its window.
pub fn draw_dbd<R: Rng + ?Sized>(seq: &CircularSequence, rng: &mut R) -> Sample {
    let start = rng.random_range(1..=seq.len());
    seq.window(start).expect("start drawn in range")
}

/// All `N` equally likely samples of the circular design, by start `j = 1..N`.
pub fn enumerate_design(seq: &CircularSequence) -> Vec<Sample> {
    (1..=seq.len())
        .map(|j| seq.window(j).expect("start in range"))
        .collect()
}

/// Simple random sample without replacement, sorted by unit index.
pub fn draw_srs<R: Rng + ?Sized>(population_size: usize, n: usize, rng: &mut R) -> Result<Sample> {
    if n > population_size {
        return Err(DbdError::InvalidConfig(format!(
            "sample size {n} exceeds population size {population_size}"
        )));
    }
    let mut units = rand::seq::index::sample(rng, population_size, n).into_vec();
    units.sort_unstable();
    Ok(Sample::equal_probability(units, population_size))
}

const PIVOT_EPS: f64 = 1e-12;

/// Nearest undecided neighbour of `unit`, lowest index on ties.
fn nearest(pop: &Population, undecided: &[usize], unit: usize) -> usize {
    let x = pop.row(unit);
    let mut best = usize::MAX;
    let mut best_d = f64::INFINITY;
    for &j in undecided {
        if j == unit {
            continue;
        }
        let d = crate::population::euclidean(x, pop.row(j));
        if d < best_d || (d == best_d && j < best) {
            best_d = d;
            best = j;
        }
    }
    best
}

/// Local pivotal method, LPM1 variant, with equal inclusion probabilities
/// `n/N`.
///
/// A random undecided unit `i` is paired with its nearest undecided
/// neighbour `j` when `i` is also `j`'s nearest neighbour; the pair then
/// trades probability mass until one of them is decided. Neighbour searches
/// are exact linear scans.
pub fn draw_lpm<R: Rng + ?Sized>(pop: &Population, n: usize, rng: &mut R) -> Result<Sample> {
    let size = pop.len();
    if n > size {
        return Err(DbdError::InvalidConfig(format!(
            "sample size {n} exceeds population size {size}"
        )));
    }
    let mut probs = vec![n as f64 / size as f64; size];
    let mut undecided: Vec<usize> = if n == 0 || n == size {
        Vec::new()
    } else {
        (0..size).collect()
    };

    while undecided.len() > 1 {
        let i = undecided[rng.random_range(0..undecided.len())];
        let j = nearest(pop, &undecided, i);
        if nearest(pop, &undecided, j) != i {
            continue;
        }
        let (pi, pj) = (probs[i], probs[j]);
        let sum = pi + pj;
        let u = rng.random::<f64>();
        if sum < 1.0 {
            if u < pj / sum {
                probs[i] = 0.0;
                probs[j] = sum;
            } else {
                probs[i] = sum;
                probs[j] = 0.0;
            }
        } else if u < (1.0 - pj) / (2.0 - sum) {
            probs[i] = 1.0;
            probs[j] = sum - 1.0;
        } else {
            probs[i] = sum - 1.0;
            probs[j] = 1.0;
        }
        for unit in [i, j] {
            if probs[unit] < PIVOT_EPS {
                probs[unit] = 0.0;
            } else if probs[unit] > 1.0 - PIVOT_EPS {
                probs[unit] = 1.0;
            }
        }
        undecided.retain(|&k| probs[k] > 0.0 && probs[k] < 1.0);
    }
    // Only rounding can leave a single unit open.
    if let Some(&last) = undecided.first() {
        probs[last] = if rng.random::<f64>() < probs[last] {
            1.0
        } else {
            0.0
        };
    }
    if n == size {
        probs.iter_mut().for_each(|p| *p = 1.0);
    }

    let units: Vec<usize> = (0..size).filter(|&k| probs[k] == 1.0).collect();
    debug_assert_eq!(units.len(), n);
    Ok(Sample::equal_probability(units, size))
}

/// One stratum of a Block-DBD design.
#[derive(Debug, Clone)]
pub struct StratumDesign {
    pub label: i64,
    /// Population indices of the stratum's units; the optimized ordering
    /// refers to positions in this list.
    pub members: Vec<usize>,
    pub result: AnnealResult,
}

impl StratumDesign {
    pub fn sample_size(&self) -> usize {
        self.result.best_sequence.block_size()
    }

    /// Ordering of the stratum in population indices.
    pub fn global_order(&self) -> Vec<usize> {
        self.result
            .best_sequence
            .order()
            .iter()
            .map(|&local| self.members[local])
            .collect()
    }

    /// Window `j` of the stratum, in population indices.
    pub fn window(&self, start: usize) -> Result<Sample> {
        let local = self.result.best_sequence.window(start)?;
        Ok(Sample::new(
            local.units.iter().map(|&u| self.members[u]).collect(),
            local.pi,
        ))
    }
}

/// Independently optimized circular designs, one per stratum.
#[derive(Debug, Clone)]
pub struct BlockDesign {
    pub strata: BTreeMap<i64, StratumDesign>,
    pub population_size: usize,
}

/// A stratified draw: one window per stratum, each with its own `pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedSample {
    pub parts: Vec<(i64, Sample)>,
}

impl StratifiedSample {
    pub fn len(&self) -> usize {
        self.parts.iter().map(|(_, s)| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn units(&self) -> Vec<usize> {
        self.parts
            .iter()
            .flat_map(|(_, s)| s.units.iter().copied())
            .collect()
    }

    /// Stratified HT total `sum_h sum_{i in s_h} y_i / pi_h`.
    pub fn ht_total(&self, y: &[f64]) -> f64 {
        self.parts
            .iter()
            .map(|(_, s)| s.units.iter().map(|&i| y[i]).sum::<f64>() / s.pi)
            .sum()
    }
}

impl BlockDesign {
    /// One uniform start per stratum, in label order.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> StratifiedSample {
        let parts = self
            .strata
            .values()
            .map(|s| {
                let start = rng.random_range(1..=s.members.len());
                (s.label, s.window(start).expect("start drawn in range"))
            })
            .collect();
        StratifiedSample { parts }
    }

    /// Per-unit inclusion probabilities `n_h / N_h`.
    pub fn inclusion_probabilities(&self) -> Vec<f64> {
        let mut pi = vec![0.0; self.population_size];
        for s in self.strata.values() {
            let p = s.sample_size() as f64 / s.members.len() as f64;
            for &u in &s.members {
                pi[u] = p;
            }
        }
        pi
    }
}

/// Optimizes one circular ordering per stratum, in parallel. Every stratum
/// uses `config` unchanged, including its seed.
pub fn block_dbd(
    pop: &Population,
    n_per_stratum: &BTreeMap<i64, usize>,
    config: &AnnealConfig,
) -> Result<BlockDesign> {
    let labels = pop
        .strata()
        .ok_or_else(|| DbdError::InvalidConfig("Block-DBD needs stratum labels".into()))?;
    let mut members: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (unit, &h) in labels.iter().enumerate() {
        members.entry(h).or_default().push(unit);
    }
    for label in n_per_stratum.keys() {
        if !members.contains_key(label) {
            return Err(DbdError::InvalidConfig(format!(
                "no units in stratum {label}"
            )));
        }
    }
    let mut jobs = Vec::with_capacity(members.len());
    for (label, units) in members {
        let n = *n_per_stratum.get(&label).ok_or_else(|| {
            DbdError::InvalidConfig(format!("no sample size given for stratum {label}"))
        })?;
        if n == 0 || n > units.len() {
            return Err(DbdError::StratumTooSmall {
                label,
                n,
                size: units.len(),
            });
        }
        jobs.push((label, units, n));
    }

    let strata = jobs
        .into_par_iter()
        .map(|(label, units, n)| {
            let sub = pop.subset(&units)?;
            let cache = compute_phi(&sub);
            let initial = initial_sequence(sub.len(), n, config.seed)?;
            let result = optimize(&sub, &cache, initial, config)?;
            Ok((
                label,
                StratumDesign {
                    label,
                    members: units,
                    result,
                },
            ))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(BlockDesign {
        strata,
        population_size: pop.len(),
    })
}
