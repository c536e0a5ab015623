//! Population data model, ingestion, standardization and the circular-window
//! sample extractor.
//!
//! Positions inside a [`CircularSequence`] are 0-based. Window starts are
//! 1-based, `1..=N`, and follow the index rule
//! `s_j = { u[((j + k - 1) mod N) + 1] : k = 1..n }` literally, so the block
//! for start `j` begins at 1-based position `(j mod N) + 1`. Because the start
//! is uniform over all `N` values the design is the same as with any other
//! labelling of the starts.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use log::info;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{DbdError, Result};

/// Euclidean distance between two auxiliary vectors.
#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A named study variable observed on every unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub name: String,
    pub values: Vec<f64>,
}

/// A finite population with auxiliary vectors stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    ids: Vec<String>,
    aux_names: Vec<String>,
    aux: Vec<f64>,
    dim: usize,
    targets: Vec<Target>,
    strata: Option<Vec<i64>>,
}

impl Population {
    /// Builds a population from row-major auxiliary data with `dim` columns.
    pub fn new(ids: Vec<String>, aux: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(DbdError::InvalidPopulation(
                "at least one auxiliary column is required".into(),
            ));
        }
        if ids.is_empty() {
            return Err(DbdError::InvalidPopulation("population is empty".into()));
        }
        if aux.len() != ids.len() * dim {
            return Err(DbdError::InvalidPopulation(format!(
                "auxiliary matrix has {} values, expected {} x {}",
                aux.len(),
                ids.len(),
                dim
            )));
        }
        if let Some(bad) = aux.iter().position(|v| !v.is_finite()) {
            return Err(DbdError::InvalidPopulation(format!(
                "non-finite auxiliary value in unit {}",
                ids[bad / dim]
            )));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(DbdError::DuplicateId(id.clone()));
            }
        }
        let aux_names = (1..=dim).map(|c| format!("x{c}")).collect();
        Ok(Self {
            ids,
            aux_names,
            aux,
            dim,
            targets: Vec::new(),
            strata: None,
        })
    }

    /// Population whose ids are the 1-based row numbers.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(DbdError::InvalidPopulation("ragged rows".into()));
        }
        let ids = (1..=rows.len()).map(|i| i.to_string()).collect();
        Self::new(ids, rows.concat(), dim)
    }

    /// One-dimensional population, handy for small worked cases.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let ids = (1..=values.len()).map(|i| i.to_string()).collect();
        Self::new(ids, values.to_vec(), 1)
    }

    pub fn with_aux_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.dim {
            return Err(DbdError::InvalidPopulation(format!(
                "{} auxiliary names for {} columns",
                names.len(),
                self.dim
            )));
        }
        self.aux_names = names;
        Ok(self)
    }

    pub fn with_target(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.len() {
            return Err(DbdError::InvalidPopulation(format!(
                "target has {} values for {} units",
                values.len(),
                self.len()
            )));
        }
        self.targets.push(Target {
            name: name.into(),
            values,
        });
        Ok(self)
    }

    pub fn with_strata(mut self, strata: Vec<i64>) -> Result<Self> {
        if strata.len() != self.len() {
            return Err(DbdError::InvalidPopulation(format!(
                "{} stratum labels for {} units",
                strata.len(),
                self.len()
            )));
        }
        self.strata = Some(strata);
        Ok(self)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Number of auxiliary variables `p`.
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn aux_names(&self) -> &[String] {
        &self.aux_names
    }

    /// Row-major auxiliary matrix.
    pub fn aux(&self) -> &[f64] {
        &self.aux
    }

    #[inline]
    pub fn row(&self, unit: usize) -> &[f64] {
        &self.aux[unit * self.dim..(unit + 1) * self.dim]
    }

    /// Distance between two units, recomputed on demand.
    #[inline]
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        euclidean(self.row(a), self.row(b))
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn target(&self, name: &str) -> Result<&[f64]> {
        self.targets
            .iter()
            .find(|t| t.name == name)
            .map(|t| t.values.as_slice())
            .ok_or_else(|| DbdError::UnknownTarget(name.to_string()))
    }

    pub fn strata(&self) -> Option<&[i64]> {
        self.strata.as_deref()
    }

    /// Column totals `X = sum_i x_i`.
    pub fn aux_totals(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.dim];
        for unit in 0..self.len() {
            for (t, v) in totals.iter_mut().zip(self.row(unit)) {
                *t += v;
            }
        }
        totals
    }

    /// Sub-population holding `units` in the given order. Targets and strata
    /// are carried along.
    pub fn subset(&self, units: &[usize]) -> Result<Self> {
        let ids = units.iter().map(|&u| self.ids[u].clone()).collect();
        let aux = units.iter().flat_map(|&u| self.row(u)).copied().collect();
        let mut sub = Self::new(ids, aux, self.dim)?.with_aux_names(self.aux_names.clone())?;
        for t in &self.targets {
            sub = sub.with_target(t.name.clone(), units.iter().map(|&u| t.values[u]).collect())?;
        }
        if let Some(strata) = &self.strata {
            sub = sub.with_strata(units.iter().map(|&u| strata[u]).collect())?;
        }
        Ok(sub)
    }
}

/// Column selection for [`ingest`].
#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub aux_columns: Vec<String>,
    pub target_columns: Vec<String>,
    pub strata_column: Option<String>,
    /// Column holding unit ids; data row numbers (1-based) are used when absent.
    pub id_column: Option<String>,
    pub delimiter: u8,
}

impl IngestOptions {
    pub fn new<S: AsRef<str>>(aux_columns: &[S]) -> Self {
        Self {
            aux_columns: aux_columns.iter().map(|s| s.as_ref().to_string()).collect(),
            target_columns: Vec::new(),
            strata_column: None,
            id_column: None,
            delimiter: b',',
        }
    }
}

fn is_missing(cell: &str) -> bool {
    let cell = cell.trim();
    cell.is_empty()
        || cell.eq_ignore_ascii_case("na")
        || cell.eq_ignore_ascii_case("n/a")
        || cell.eq_ignore_ascii_case("nan")
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| DbdError::UnknownColumn(name.to_string()))
}

/// Reads a population from a delimited text file with a header row.
///
/// Rows with a missing value in any requested column are dropped and the
/// count is logged; the remaining rows keep their file order.
pub fn ingest(path: &Path, options: &IngestOptions) -> Result<Population> {
    let file = std::fs::File::open(path).map_err(|source| DbdError::Io {
        path: PathBuf::from(path),
        source,
    })?;
    ingest_reader(file, options)
}

pub fn ingest_reader<R: std::io::Read>(reader: R, options: &IngestOptions) -> Result<Population> {
    if options.aux_columns.is_empty() {
        return Err(DbdError::InvalidConfig(
            "at least one auxiliary column is required".into(),
        ));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();

    let aux_idx = options
        .aux_columns
        .iter()
        .map(|c| column_index(&headers, c))
        .collect::<Result<Vec<_>>>()?;
    let target_idx = options
        .target_columns
        .iter()
        .map(|c| column_index(&headers, c))
        .collect::<Result<Vec<_>>>()?;
    let strata_idx = options
        .strata_column
        .as_deref()
        .map(|c| column_index(&headers, c))
        .transpose()?;
    let id_idx = options
        .id_column
        .as_deref()
        .map(|c| column_index(&headers, c))
        .transpose()?;

    let dim = aux_idx.len();
    let mut ids = Vec::new();
    let mut aux = Vec::new();
    let mut targets: Vec<Vec<f64>> = vec![Vec::new(); target_idx.len()];
    let mut strata = Vec::new();
    let mut dropped = 0usize;

    let numeric = |record: &csv::StringRecord, col: usize, name: &str, row: usize| {
        let cell = record.get(col).unwrap_or("");
        if is_missing(cell) {
            return Ok(None);
        }
        cell.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Some)
            .ok_or_else(|| DbdError::NonNumeric {
                column: name.to_string(),
                row,
                value: cell.to_string(),
            })
    };

    for (row0, record) in rdr.records().enumerate() {
        let record = record?;
        let row = row0 + 1;

        let mut aux_row = Vec::with_capacity(dim);
        let mut missing = false;
        for (col, name) in aux_idx.iter().zip(&options.aux_columns) {
            match numeric(&record, *col, name, row)? {
                Some(v) => aux_row.push(v),
                None => missing = true,
            }
        }
        let mut target_row = Vec::with_capacity(target_idx.len());
        for (col, name) in target_idx.iter().zip(&options.target_columns) {
            match numeric(&record, *col, name, row)? {
                Some(v) => target_row.push(v),
                None => missing = true,
            }
        }
        let stratum = match (strata_idx, options.strata_column.as_deref()) {
            (Some(col), Some(name)) => {
                let cell = record.get(col).unwrap_or("");
                if is_missing(cell) {
                    missing = true;
                    None
                } else {
                    Some(
                        cell.trim()
                            .parse::<i64>()
                            .map_err(|_| DbdError::NonNumeric {
                                column: name.to_string(),
                                row,
                                value: cell.to_string(),
                            })?,
                    )
                }
            }
            _ => None,
        };
        let id = match id_idx {
            Some(col) => {
                let cell = record.get(col).unwrap_or("").trim();
                if cell.is_empty() {
                    missing = true;
                }
                cell.to_string()
            }
            None => row.to_string(),
        };

        if missing {
            dropped += 1;
            continue;
        }
        ids.push(id);
        aux.extend(aux_row);
        for (t, v) in targets.iter_mut().zip(target_row) {
            t.push(v);
        }
        if let Some(s) = stratum {
            strata.push(s);
        }
    }

    if dropped > 0 {
        info!("dropped {dropped} row(s) with missing values");
    }
    if ids.is_empty() {
        return Err(DbdError::NoUsableRows);
    }

    let mut pop = Population::new(ids, aux, dim)?.with_aux_names(options.aux_columns.clone())?;
    for (name, values) in options.target_columns.iter().zip(targets) {
        pop = pop.with_target(name.clone(), values)?;
    }
    if strata_idx.is_some() {
        pop = pop.with_strata(strata)?;
    }
    Ok(pop)
}

/// Z-scores every auxiliary column (mean 0, standard deviation 1 with the
/// `N - 1` denominator). Targets and strata are left untouched.
pub fn standardize(pop: &Population) -> Result<Population> {
    let n = pop.len();
    if n < 2 {
        return Err(DbdError::InvalidPopulation(
            "standardization needs at least two units".into(),
        ));
    }
    let dim = pop.dim();
    let mut out = pop.clone();
    for col in 0..dim {
        let mean = (0..n).map(|i| pop.aux[i * dim + col]).sum::<f64>() / n as f64;
        let ss = (0..n)
            .map(|i| {
                let d = pop.aux[i * dim + col] - mean;
                d * d
            })
            .sum::<f64>();
        let sd = (ss / (n - 1) as f64).sqrt();
        if !(sd > 0.0) || sd <= f64::EPSILON * mean.abs() {
            return Err(DbdError::ConstantColumn(pop.aux_names[col].clone()));
        }
        for i in 0..n {
            out.aux[i * dim + col] = (pop.aux[i * dim + col] - mean) / sd;
        }
    }
    Ok(out)
}

/// Per-unit mean distances to the population.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceCache {
    phi: Vec<f64>,
    pop_self: f64,
}

impl DistanceCache {
    /// `phi[i] = (1/N) sum_k ||x_i - x_k||`, including the zero self term.
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// `E||Z - Z'||` for the population, i.e. the mean of `phi`.
    pub fn pop_self(&self) -> f64 {
        self.pop_self
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub(crate) fn check(&self, pop: &Population) -> Result<()> {
        if self.len() != pop.len() {
            return Err(DbdError::CacheMismatch {
                cache: self.len(),
                population: pop.len(),
            });
        }
        Ok(())
    }
}

/// Computes the mean-distance cache in `O(N^2 p)` time without storing the
/// distance matrix. The result does not depend on the thread count.
pub fn compute_phi(pop: &Population) -> DistanceCache {
    let n = pop.len();
    let phi: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = pop.row(i);
            (0..n).map(|k| euclidean(xi, pop.row(k))).sum::<f64>() / n as f64
        })
        .collect();
    let pop_self = phi.iter().sum::<f64>() / n as f64;
    DistanceCache { phi, pop_self }
}

/// A circular ordering of the population together with the block size.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CircularSequence {
    order: Vec<usize>,
    n: usize,
}

impl CircularSequence {
    pub fn new(order: Vec<usize>, n: usize) -> Result<Self> {
        let len = order.len();
        if len == 0 {
            return Err(DbdError::InvalidSequence("empty order".into()));
        }
        if n == 0 || n > len {
            return Err(DbdError::InvalidSequence(format!(
                "block size {n} outside 1..={len}"
            )));
        }
        let mut seen = vec![false; len];
        for &u in &order {
            if u >= len || std::mem::replace(&mut seen[u], true) {
                return Err(DbdError::InvalidSequence(format!(
                    "order is not a permutation of 0..{len}"
                )));
            }
        }
        Ok(Self { order, n })
    }

    pub fn identity(len: usize, n: usize) -> Result<Self> {
        Self::new((0..len).collect(), n)
    }

    /// Uniformly shuffled ordering of `0..len`.
    pub fn shuffled<R: Rng + ?Sized>(len: usize, n: usize, rng: &mut R) -> Result<Self> {
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(rng);
        Self::new(order, n)
    }

    #[inline]
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn into_order(self) -> Vec<usize> {
        self.order
    }

    /// Block size `n`.
    #[inline]
    pub fn block_size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.order.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Swaps the units at two 0-based positions.
    pub fn swap(&mut self, a: usize, b: usize) {
        self.order.swap(a, b);
    }

    /// Same ordering read from a different starting point.
    pub fn rotated(&self, shift: usize) -> Self {
        let mut order = self.order.clone();
        order.rotate_left(shift % self.len());
        Self { order, n: self.n }
    }

    pub fn reversed(&self) -> Self {
        let mut order = self.order.clone();
        order.reverse();
        Self { order, n: self.n }
    }

    pub fn with_block_size(&self, n: usize) -> Result<Self> {
        Self::new(self.order.clone(), n)
    }

    /// The contiguous block `s_j` for the 1-based start `j`.
    pub fn window(&self, start: usize) -> Result<Sample> {
        let len = self.len();
        if start == 0 || start > len {
            return Err(DbdError::StartOutOfRange { start, len });
        }
        // 1-based position ((j + k - 1) mod N) + 1 is 0-based (j + k - 1) mod N.
        let units = (1..=self.n)
            .map(|k| self.order[(start + k - 1) % len])
            .collect();
        Ok(Sample::new(units, self.n as f64 / len as f64))
    }
}

/// A drawn sample: unit indices with their common inclusion probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub units: Vec<usize>,
    pub pi: f64,
}

impl Sample {
    pub fn new(units: Vec<usize>, pi: f64) -> Self {
        Self { units, pi }
    }

    /// Equal-probability sample from a population of `population_size` units.
    pub fn equal_probability(units: Vec<usize>, population_size: usize) -> Self {
        let pi = units.len() as f64 / population_size as f64;
        Self { units, pi }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.units.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn opts(aux: &[&str]) -> IngestOptions {
        IngestOptions::new(aux)
    }

    #[test]
    fn ingest_preserves_file_order() {
        let mut csv = String::from("a,b\n");
        for i in 0..10 {
            csv.push_str(&format!("{i},{}\n", 2 * i));
        }
        let pop = ingest_reader(csv.as_bytes(), &opts(&["a", "b"])).unwrap();
        assert_eq!(pop.len(), 10);
        assert_eq!(pop.dim(), 2);
        for i in 0..10 {
            assert_eq!(pop.row(i), &[i as f64, 2.0 * i as f64]);
            assert_eq!(pop.ids()[i], (i + 1).to_string());
        }
    }

    #[test]
    fn ingest_drops_rows_with_missing_values() {
        // 164 rows, two of them incomplete, mirrors the flood-plain preprocessing.
        let mut csv = String::from("id,x,y,zn\n");
        for i in 0..164 {
            let x = if i == 40 {
                String::new()
            } else {
                i.to_string()
            };
            let zn = if i == 100 {
                "NA".to_string()
            } else {
                (i * 3).to_string()
            };
            csv.push_str(&format!("u{i},{x},{},{zn}\n", i % 7));
        }
        let mut o = opts(&["x", "y"]);
        o.target_columns = vec!["zn".into()];
        o.id_column = Some("id".into());
        let pop = ingest_reader(csv.as_bytes(), &o).unwrap();
        assert_eq!(pop.len(), 162);
        assert!(!pop.ids().contains(&"u40".to_string()));
        assert!(!pop.ids().contains(&"u100".to_string()));
        assert_eq!(pop.target("zn").unwrap().len(), 162);
    }

    #[test]
    fn ingest_all_missing_is_an_error() {
        let csv = "a,b\n,1\nNA,2\n";
        assert!(matches!(
            ingest_reader(csv.as_bytes(), &opts(&["a", "b"])),
            Err(DbdError::NoUsableRows)
        ));
    }

    #[test]
    fn ingest_errors() {
        let csv = "a,b\n1,2\n";
        assert!(matches!(
            ingest_reader(csv.as_bytes(), &opts(&["c"])),
            Err(DbdError::UnknownColumn(c)) if c == "c"
        ));
        let csv = "a,b\n1,x\n";
        assert!(matches!(
            ingest_reader(csv.as_bytes(), &opts(&["a", "b"])),
            Err(DbdError::NonNumeric { row: 1, .. })
        ));
        assert!(matches!(
            ingest(Path::new("/nonexistent/pop.csv"), &opts(&["a"])),
            Err(DbdError::Io { .. })
        ));
    }

    #[test]
    fn ingest_tab_delimited_with_strata() {
        let csv = "x\th\n0.5\t1\n1.5\t2\n2.5\t1\n";
        let mut o = opts(&["x"]);
        o.delimiter = b'\t';
        o.strata_column = Some("h".into());
        let pop = ingest_reader(csv.as_bytes(), &o).unwrap();
        assert_eq!(pop.strata().unwrap(), &[1, 2, 1]);
    }

    #[test]
    fn standardize_two_points() {
        let pop = Population::from_values(&[0.0, 2.0]).unwrap();
        let z = standardize(&pop).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((z.row(0)[0] + h).abs() < 1e-15);
        assert!((z.row(1)[0] - h).abs() < 1e-15);
    }

    #[test]
    fn standardize_rejects_constant_column() {
        let pop = Population::from_rows(&[vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]])
            .unwrap()
            .with_aux_names(vec!["elev".into(), "flat".into()])
            .unwrap();
        match standardize(&pop) {
            Err(DbdError::ConstantColumn(c)) => assert_eq!(c, "flat"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn standardize_keeps_targets_and_strata() {
        let pop = Population::from_values(&[1.0, 4.0, 9.0])
            .unwrap()
            .with_target("y", vec![3.0, 2.0, 1.0])
            .unwrap()
            .with_strata(vec![7, 7, 8])
            .unwrap();
        let z = standardize(&pop).unwrap();
        assert_eq!(z.target("y").unwrap(), &[3.0, 2.0, 1.0]);
        assert_eq!(z.strata().unwrap(), &[7, 7, 8]);
    }

    #[test]
    fn phi_small_cases() {
        let c = compute_phi(&Population::from_values(&[0.0, 1.0]).unwrap());
        assert_eq!(c.phi(), &[0.5, 0.5]);
        assert_eq!(c.pop_self(), 0.5);

        let c = compute_phi(&Population::from_values(&[0.0, 1.0, 2.0]).unwrap());
        assert!((c.phi()[0] - 1.0).abs() < 1e-15);
        assert!((c.phi()[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.phi()[2] - 1.0).abs() < 1e-15);
        assert!((c.pop_self() - 8.0 / 9.0).abs() < 1e-15);

        let c = compute_phi(&Population::from_rows(&vec![vec![3.0, -1.0]; 5]).unwrap());
        assert!(c.phi().iter().all(|&v| v == 0.0));
        assert_eq!(c.pop_self(), 0.0);
    }

    #[test]
    fn window_index_rule() {
        let seq = CircularSequence::identity(5, 2).unwrap();
        // 1-based positions {1, 2} hold units 0 and 1.
        assert_eq!(seq.window(5).unwrap().units, vec![0, 1]);
        assert_eq!(seq.window(1).unwrap().units, vec![1, 2]);
        assert!((seq.window(1).unwrap().pi - 0.4).abs() < 1e-15);
        assert!(matches!(
            seq.window(0),
            Err(DbdError::StartOutOfRange { .. })
        ));
        assert!(matches!(
            seq.window(6),
            Err(DbdError::StartOutOfRange { .. })
        ));

        let census = CircularSequence::identity(5, 5).unwrap();
        for j in 1..=5 {
            let mut u = census.window(j).unwrap().units;
            u.sort_unstable();
            assert_eq!(u, vec![0, 1, 2, 3, 4]);
        }
    }

    #[test]
    fn sequence_validation() {
        assert!(CircularSequence::new(vec![0, 1, 1], 1).is_err());
        assert!(CircularSequence::new(vec![0, 1, 3], 1).is_err());
        assert!(CircularSequence::new(vec![0, 1, 2], 0).is_err());
        assert!(CircularSequence::new(vec![0, 1, 2], 4).is_err());
        assert!(CircularSequence::new(vec![2, 0, 1], 3).is_ok());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let r = Population::new(vec!["a".into(), "a".into()], vec![0.0, 1.0], 1);
        assert!(matches!(r, Err(DbdError::DuplicateId(_))));
    }

    fn random_pop(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Population {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        Population::from_rows(&rows).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn window_coverage(len in 1usize..40, n_frac in 0.0f64..1.0, seed in any::<u64>()) {
            let n = 1 + ((len - 1) as f64 * n_frac) as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let seq = CircularSequence::shuffled(len, n, &mut rng).unwrap();
            let mut counts = vec![0usize; len];
            for j in 1..=len {
                for u in seq.window(j).unwrap().units {
                    counts[u] += 1;
                }
            }
            prop_assert!(counts.iter().all(|&c| c == n));
        }

        #[test]
        fn phi_matches_double_loop(seed in any::<u64>(), n in 1usize..300, p in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pop = random_pop(&mut rng, n, p);
            let cache = compute_phi(&pop);
            let mut total = 0.0;
            for i in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    let mut d2 = 0.0;
                    for c in 0..p {
                        d2 += (pop.row(i)[c] - pop.row(k)[c]).powi(2);
                    }
                    s += d2.sqrt();
                }
                let naive = s / n as f64;
                total += naive;
                prop_assert!((cache.phi()[i] - naive).abs() <= 1e-12 * naive.max(1e-300));
            }
            prop_assert!((cache.pop_self() - total / n as f64).abs() <= 1e-12 * cache.pop_self().max(1e-300));
        }

        #[test]
        fn standardize_is_idempotent(seed in any::<u64>(), n in 2usize..60, p in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pop = random_pop(&mut rng, n, p);
            let once = standardize(&pop).unwrap();
            let twice = standardize(&once).unwrap();
            for (a, b) in once.aux().iter().zip(twice.aux()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            for c in 0..p {
                let col: Vec<f64> = (0..n).map(|i| once.row(i)[c]).collect();
                let mean = col.iter().sum::<f64>() / n as f64;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                prop_assert!(mean.abs() < 1e-12);
                prop_assert!((var - 1.0).abs() < 1e-12);
            }
        }
    }
}
