//! Per-sample quality metrics: Voronoi spatial balance (SB), local balance
//! (LB) and balance deviation (BD).

use nalgebra::{DMatrix, DVector};

use crate::error::{DbdError, Result};
use crate::population::{euclidean, Population, Sample};

/// Relative singular-value cutoff of the Gram-matrix pseudo-inverse.
pub const PINV_RELATIVE_CUTOFF: f64 = 1e-10;

/// Nearest sample unit of every population unit.
#[derive(Debug, Clone, PartialEq)]
pub struct VoronoiAssignment {
    /// `owner[k]` is the sample unit whose cell holds unit `k`.
    pub owner: Vec<usize>,
}

impl VoronoiAssignment {
    /// Cell sizes keyed by sample unit, in the order of `sample.units`.
    pub fn cell_sizes(&self, sample: &Sample) -> Vec<usize> {
        let mut sizes = vec![0usize; self.owner.len()];
        for &o in &self.owner {
            sizes[o] += 1;
        }
        sample.units.iter().map(|&u| sizes[u]).collect()
    }

    /// Members of each cell, in the order of `sample.units`.
    pub fn cells(&self, sample: &Sample) -> Vec<Vec<usize>> {
        let mut slot = vec![usize::MAX; self.owner.len()];
        for (i, &u) in sample.units.iter().enumerate() {
            slot[u] = i;
        }
        let mut cells = vec![Vec::new(); sample.len()];
        for (k, &o) in self.owner.iter().enumerate() {
            cells[slot[o]].push(k);
        }
        cells
    }
}

/// Assigns each population unit to its nearest sample unit. Ties go to the
/// lowest unit index, and every sample unit owns itself.
pub fn voronoi(sample: &Sample, pop: &Population) -> Result<VoronoiAssignment> {
    if sample.is_empty() {
        return Err(DbdError::EmptySample);
    }
    let mut centres = sample.units.clone();
    centres.sort_unstable();
    let mut in_sample = vec![false; pop.len()];
    for &u in &centres {
        in_sample[u] = true;
    }
    let owner = (0..pop.len())
        .map(|k| {
            if in_sample[k] {
                return k;
            }
            let x = pop.row(k);
            let mut best = centres[0];
            let mut best_d = euclidean(x, pop.row(best));
            for &c in &centres[1..] {
                let d = euclidean(x, pop.row(c));
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            best
        })
        .collect();
    Ok(VoronoiAssignment { owner })
}

/// `SB = (1/n) sum_i (v_i - 1)^2` with `v_i` the inclusion-probability mass
/// of the Voronoi cell of sample unit `i`.
pub fn spatial_balance(sample: &Sample, pop: &Population) -> Result<f64> {
    let cells = voronoi(sample, pop)?;
    Ok(spatial_balance_from(&cells, sample))
}

pub(crate) fn spatial_balance_from(cells: &VoronoiAssignment, sample: &Sample) -> f64 {
    let sizes = cells.cell_sizes(sample);
    sizes
        .iter()
        .map(|&c| {
            let v = c as f64 * sample.pi;
            (v - 1.0) * (v - 1.0)
        })
        .sum::<f64>()
        / sample.len() as f64
}

/// Moore-Penrose inverse of `Q = Z^T Z` where the rows of `Z` are `(1, x_j)`.
pub fn gram_pseudo_inverse(pop: &Population) -> DMatrix<f64> {
    let q_dim = pop.dim() + 1;
    let mut q = DMatrix::<f64>::zeros(q_dim, q_dim);
    let mut z = DVector::<f64>::zeros(q_dim);
    for unit in 0..pop.len() {
        augmented(pop, unit, &mut z);
        q.syger(1.0, &z, &z, 1.0);
    }
    // syger fills the lower triangle only.
    q.fill_upper_triangle_with_lower_triangle();
    let svd = q.svd(true, true);
    let max_sv = svd.singular_values.max();
    let cutoff = PINV_RELATIVE_CUTOFF * max_sv;
    let mut inv_sv = svd.singular_values.clone();
    inv_sv.apply(|s| *s = if *s > cutoff { 1.0 / *s } else { 0.0 });
    let u = svd.u.expect("U requested");
    let v_t = svd.v_t.expect("V^T requested");
    v_t.transpose() * DMatrix::from_diagonal(&inv_sv) * u.transpose()
}

#[inline]
fn augmented(pop: &Population, unit: usize, out: &mut DVector<f64>) {
    out[0] = 1.0;
    for (o, v) in out.iter_mut().skip(1).zip(pop.row(unit)) {
        *o = *v;
    }
}

/// Local balance with a precomputed [`gram_pseudo_inverse`].
pub fn local_balance_with(
    sample: &Sample,
    pop: &Population,
    cells: &VoronoiAssignment,
    q_pinv: &DMatrix<f64>,
) -> f64 {
    let q_dim = pop.dim() + 1;
    let mut z = DVector::<f64>::zeros(q_dim);
    let mut total = 0.0;
    for (centre, members) in sample.units.iter().zip(cells.cells(sample)) {
        augmented(pop, *centre, &mut z);
        let mut e = &z / sample.pi;
        for k in members {
            augmented(pop, k, &mut z);
            e -= &z;
        }
        total += e.dot(&(q_pinv * &e));
    }
    (total.max(0.0) / pop.len() as f64).sqrt()
}

/// `LB = sqrt((1/N) sum_{i in S} e_i^T Q^+ e_i)` with
/// `e_i = z_i / pi_i - sum_{j in V_i} z_j`.
pub fn local_balance(sample: &Sample, pop: &Population) -> Result<f64> {
    let cells = voronoi(sample, pop)?;
    Ok(local_balance_with(
        sample,
        pop,
        &cells,
        &gram_pseudo_inverse(pop),
    ))
}

/// Euclidean distance between the HT estimate of the auxiliary totals and the
/// true totals.
pub fn balance_deviation(sample: &Sample, pop: &Population) -> Result<f64> {
    balance_deviation_with(sample, pop, &pop.aux_totals())
}

pub fn balance_deviation_with(sample: &Sample, pop: &Population, totals: &[f64]) -> Result<f64> {
    if sample.is_empty() {
        return Err(DbdError::EmptySample);
    }
    let mut est = vec![0.0; pop.dim()];
    for &u in &sample.units {
        for (e, v) in est.iter_mut().zip(pop.row(u)) {
            *e += v / sample.pi;
        }
    }
    Ok(est
        .iter()
        .zip(totals)
        .map(|(e, t)| (e - t) * (e - t))
        .sum::<f64>()
        .sqrt())
}
