//! Energy-distance mathematics for circular designs.
//!
//! The design objective is the mean energy distance over the `N` windows of a
//! circular sequence. Every unit lies in exactly `n` windows, so the
//! attraction part of the objective is a constant and
//!
//! ```text
//! E(u; n) = (1/N) sum_i phi_i - 2 / (N n^2) * R(u)
//! ```
//!
//! where `R(u)` is the window-weighted sum of pairwise distances between
//! positions. A swap of two positions only touches pairs within circular
//! separation `< n` of either position, which makes its effect on `R`
//! computable with `O(n)` distance evaluations.

use crate::error::{DbdError, Result};
use crate::population::{CircularSequence, DistanceCache, Population, Sample};

/// Absolute tolerance below which rounding noise in an energy value is reported as zero.
pub const ZERO_TOLERANCE: f64 = 1e-12;

/// Snaps rounding noise around zero to zero. The tolerance grows with the
/// distance scale so that populations with large coordinates are treated alike.
#[inline]
pub(crate) fn clamp_rounding(value: f64, scale: f64) -> f64 {
    if value.abs() < ZERO_TOLERANCE * scale.max(1.0) {
        0.0
    } else {
        value
    }
}

/// Energy distance between the empirical distribution of `sample` and the
/// population.
pub fn energy_distance(sample: &Sample, cache: &DistanceCache, pop: &Population) -> Result<f64> {
    cache.check(pop)?;
    if sample.is_empty() {
        return Err(DbdError::EmptySample);
    }
    let n = sample.len() as f64;
    let phi = cache.phi();
    let attraction = sample.units.iter().map(|&i| phi[i]).sum::<f64>() / n;
    let mut within = 0.0;
    for (a, &i) in sample.units.iter().enumerate() {
        for &k in &sample.units[a + 1..] {
            within += pop.distance(i, k);
        }
    }
    let within = 2.0 * within / (n * n);
    let value = 2.0 * attraction - within - cache.pop_self();
    Ok(clamp_rounding(value, cache.pop_self()))
}

/// Mean energy distance over all `N` windows, evaluated window by window.
/// Costs `O(N n^2 p)`; this is the reference the fast path is checked against.
pub fn expected_energy_bruteforce(
    seq: &CircularSequence,
    cache: &DistanceCache,
    pop: &Population,
) -> Result<f64> {
    cache.check(pop)?;
    check_sequence(seq, pop)?;
    let len = seq.len();
    let mut total = 0.0;
    for j in 1..=len {
        total += energy_distance(&seq.window(j)?, cache, pop)?;
    }
    Ok(total / len as f64)
}

/// Number of size-`n` windows on a circle of `len` positions that contain two
/// positions `forward` steps apart (going one way round).
///
/// For `n <= len / 2` this is `n - t` when the circular separation `t` is
/// below `n` and zero otherwise. Larger blocks can reach a pair along both
/// arcs, and both contributions are counted.
#[inline]
pub fn window_weight(forward: usize, len: usize, n: usize) -> usize {
    debug_assert!(forward > 0 && forward < len);
    n.saturating_sub(forward) + n.saturating_sub(len - forward)
}

/// True when only offsets `1..n` on either side carry weight and those
/// positions are all distinct.
#[inline]
fn short_range(len: usize, n: usize) -> bool {
    2 * n <= len
}

/// Aggregated within-window distance `R(u)`, computed from the pair weights in
/// `O(N n p)`.
pub fn repulsion(seq: &CircularSequence, pop: &Population) -> Result<f64> {
    check_sequence(seq, pop)?;
    Ok(repulsion_of(seq.order(), seq.block_size(), pop))
}

fn repulsion_of(order: &[usize], n: usize, pop: &Population) -> f64 {
    let len = order.len();
    if len < 2 {
        return 0.0;
    }
    let max_offset = if short_range(len, n) { n - 1 } else { len / 2 };
    let mut total = 0.0;
    for d in 1..=max_offset {
        let w = window_weight(d, len, n);
        if w == 0 {
            continue;
        }
        // Offset len/2 on an even circle reaches each pair from both ends.
        let starts = if 2 * d == len { len / 2 } else { len };
        let mut acc = 0.0;
        for r in 0..starts {
            acc += pop.distance(order[r], order[(r + d) % len]);
        }
        total += w as f64 * acc;
    }
    total
}

/// Closed-form objective from a repulsion value.
pub fn expected_energy_fast(repulsion: f64, cache: &DistanceCache, n: usize) -> f64 {
    clamp_rounding(raw_energy(repulsion, cache, n), cache.pop_self())
}

#[inline]
fn raw_energy(repulsion: f64, cache: &DistanceCache, n: usize) -> f64 {
    let len = cache.len() as f64;
    let n = n as f64;
    cache.pop_self() - 2.0 * repulsion / (len * n * n)
}

/// Converts a change in repulsion into the change of the objective.
#[inline]
pub fn energy_change(delta_repulsion: f64, len: usize, n: usize) -> f64 {
    let n = n as f64;
    -2.0 * delta_repulsion / (len as f64 * n * n)
}

/// Change of `R(u)` if the units at 0-based positions `a` and `b` swap.
pub fn swap_delta_repulsion(
    seq: &CircularSequence,
    a: usize,
    b: usize,
    pop: &Population,
) -> Result<f64> {
    check_sequence(seq, pop)?;
    check_swap(a, b, seq.len())?;
    Ok(delta_repulsion(seq.order(), seq.block_size(), pop, a, b))
}

/// Change of the objective if the units at 0-based positions `a` and `b`
/// swap, in `O(n p)`.
pub fn swap_delta(seq: &CircularSequence, a: usize, b: usize, pop: &Population) -> Result<f64> {
    let dr = swap_delta_repulsion(seq, a, b, pop)?;
    Ok(energy_change(dr, seq.len(), seq.block_size()))
}

fn check_swap(a: usize, b: usize, len: usize) -> Result<()> {
    if a == b || a >= len || b >= len {
        return Err(DbdError::InvalidSwap { a, b, len });
    }
    Ok(())
}

fn check_sequence(seq: &CircularSequence, pop: &Population) -> Result<()> {
    if seq.len() != pop.len() {
        return Err(DbdError::InvalidSequence(format!(
            "sequence has {} units but the population has {}",
            seq.len(),
            pop.len()
        )));
    }
    Ok(())
}

/// Sum over the weighted neighbours of `at` (other than `skip`) of
/// `w * (||moved_in - x_r|| - ||moved_out - x_r||)`.
#[inline]
fn side_delta(
    order: &[usize],
    n: usize,
    pop: &Population,
    at: usize,
    skip: usize,
    moved_in: &[f64],
    moved_out: &[f64],
) -> f64 {
    use crate::population::euclidean;
    let len = order.len();
    let mut acc = 0.0;
    if short_range(len, n) {
        for d in 1..n {
            let w = (n - d) as f64;
            for r in [(at + d) % len, (at + len - d) % len] {
                if r == skip {
                    continue;
                }
                let xr = pop.row(order[r]);
                acc += w * (euclidean(moved_in, xr) - euclidean(moved_out, xr));
            }
        }
    } else {
        for r in 0..len {
            if r == at || r == skip {
                continue;
            }
            let forward = (r + len - at) % len;
            let w = window_weight(forward, len, n);
            if w == 0 {
                continue;
            }
            let xr = pop.row(order[r]);
            acc += w as f64 * (euclidean(moved_in, xr) - euclidean(moved_out, xr));
        }
    }
    acc
}

fn delta_repulsion(order: &[usize], n: usize, pop: &Population, a: usize, b: usize) -> f64 {
    let xa = pop.row(order[a]);
    let xb = pop.row(order[b]);
    // The (a, b) pair keeps its distance and is skipped on both sides.
    side_delta(order, n, pop, a, b, xb, xa) + side_delta(order, n, pop, b, a, xa, xb)
}

/// Running objective for one optimization chain: the current sequence and its
/// repulsion, updated swap by swap.
#[derive(Debug, Clone)]
pub struct ObjectiveState<'a> {
    pop: &'a Population,
    cache: &'a DistanceCache,
    seq: CircularSequence,
    repulsion: f64,
}

impl<'a> ObjectiveState<'a> {
    pub fn new(
        pop: &'a Population,
        cache: &'a DistanceCache,
        seq: CircularSequence,
    ) -> Result<Self> {
        cache.check(pop)?;
        check_sequence(&seq, pop)?;
        let repulsion = repulsion_of(seq.order(), seq.block_size(), pop);
        Ok(Self {
            pop,
            cache,
            seq,
            repulsion,
        })
    }

    pub fn sequence(&self) -> &CircularSequence {
        &self.seq
    }

    pub fn into_sequence(self) -> CircularSequence {
        self.seq
    }

    pub fn repulsion(&self) -> f64 {
        self.repulsion
    }

    pub fn block_size(&self) -> usize {
        self.seq.block_size()
    }

    /// Current objective, without the rounding clamp.
    #[inline]
    pub fn raw_expected_energy(&self) -> f64 {
        raw_energy(self.repulsion, self.cache, self.seq.block_size())
    }

    pub fn expected_energy(&self) -> f64 {
        expected_energy_fast(self.repulsion, self.cache, self.seq.block_size())
    }

    /// Change in repulsion for swapping 0-based positions `a != b`.
    #[inline]
    pub fn swap_delta_repulsion(&self, a: usize, b: usize) -> f64 {
        debug_assert!(a != b);
        delta_repulsion(self.seq.order(), self.seq.block_size(), self.pop, a, b)
    }

    /// Objective after a swap with the given repulsion change.
    #[inline]
    pub fn energy_after(&self, delta_repulsion: f64) -> f64 {
        raw_energy(
            self.repulsion + delta_repulsion,
            self.cache,
            self.seq.block_size(),
        )
    }

    #[inline]
    pub fn apply_swap(&mut self, a: usize, b: usize, delta_repulsion: f64) {
        self.seq.swap(a, b);
        self.repulsion += delta_repulsion;
    }

    /// Recomputes the repulsion from scratch, discarding accumulated drift.
    pub fn refresh(&mut self) {
        self.repulsion = repulsion_of(self.seq.order(), self.seq.block_size(), self.pop);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::compute_phi;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(values: &[f64]) -> (Population, DistanceCache) {
        let pop = Population::from_values(values).unwrap();
        let cache = compute_phi(&pop);
        (pop, cache)
    }

    fn random_pop(rng: &mut ChaCha8Rng, len: usize, p: usize) -> Population {
        let rows: Vec<Vec<f64>> = (0..len)
            .map(|_| (0..p).map(|_| rng.random::<f64>()).collect())
            .collect();
        Population::from_rows(&rows).unwrap()
    }

    /// Window-enumeration form of R: sum over windows of within-window pair distances.
    fn repulsion_by_windows(seq: &CircularSequence, pop: &Population) -> f64 {
        let mut total = 0.0;
        for j in 1..=seq.len() {
            let units = seq.window(j).unwrap().units;
            for a in 0..units.len() {
                for b in a + 1..units.len() {
                    total += pop.distance(units[a], units[b]);
                }
            }
        }
        total
    }

    #[test]
    fn energy_distance_small_cases() {
        let (pop, cache) = line(&[0.0, 1.0]);
        let e = energy_distance(&Sample::equal_probability(vec![0], 2), &cache, &pop).unwrap();
        assert!((e - 0.5).abs() < 1e-15);

        let (pop, cache) = line(&[0.0, 1.0, 2.0]);
        let e = energy_distance(&Sample::equal_probability(vec![0, 2], 3), &cache, &pop).unwrap();
        assert!((e - 1.0 / 9.0).abs() < 1e-15);

        let census = Sample::equal_probability(vec![0, 1, 2], 3);
        assert_eq!(energy_distance(&census, &cache, &pop).unwrap(), 0.0);
    }

    #[test]
    fn energy_distance_rejects_foreign_cache() {
        let (pop, _) = line(&[0.0, 1.0, 2.0]);
        let (_, other) = line(&[0.0, 1.0]);
        let s = Sample::equal_probability(vec![0], 3);
        assert!(matches!(
            energy_distance(&s, &other, &pop),
            Err(DbdError::CacheMismatch { .. })
        ));
    }

    #[test]
    fn weights() {
        for n in 1..6 {
            let len = 12;
            assert_eq!(window_weight(1, len, n), n - 1);
            for t in n..=len / 2 {
                assert_eq!(window_weight(t, len, n), 0);
                assert_eq!(window_weight(len - t, len, n), 0);
            }
        }
        // Census blocks contain every pair in every window.
        for d in 1..7 {
            assert_eq!(window_weight(d, 7, 7), 7);
        }
    }

    #[test]
    fn repulsion_small_cases() {
        let (pop, _) = line(&[0.0, 1.0, 2.0, 3.0]);
        let seq = CircularSequence::identity(4, 2).unwrap();
        assert_eq!(repulsion(&seq, &pop).unwrap(), 6.0);

        let (pop, cache) = line(&[0.0, 1.0, 3.0, 6.0]);
        let r = repulsion(&seq, &pop).unwrap();
        assert_eq!(r, 12.0);
        assert!((expected_energy_fast(r, &cache, 2) - 1.0).abs() < 1e-15);
        assert!((expected_energy_bruteforce(&seq, &cache, &pop).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn swap_example() {
        let (pop, cache) = line(&[0.0, 1.0, 3.0, 6.0]);
        let seq = CircularSequence::identity(4, 2).unwrap();
        // 1-based positions 2 and 3.
        assert_eq!(swap_delta_repulsion(&seq, 1, 2, &pop).unwrap(), 4.0);
        assert!((swap_delta(&seq, 1, 2, &pop).unwrap() + 0.5).abs() < 1e-15);

        let mut after = seq.clone();
        after.swap(1, 2);
        let before = expected_energy_bruteforce(&seq, &cache, &pop).unwrap();
        let now = expected_energy_bruteforce(&after, &cache, &pop).unwrap();
        assert!((now - before + 0.5).abs() < 1e-15);
    }

    #[test]
    fn swap_errors_and_identical_units() {
        let (pop, _) = line(&[0.0, 2.0, 5.0, 2.0, 9.0]);
        let seq = CircularSequence::identity(5, 2).unwrap();
        assert!(matches!(
            swap_delta(&seq, 2, 2, &pop),
            Err(DbdError::InvalidSwap { .. })
        ));
        assert!(swap_delta(&seq, 0, 5, &pop).is_err());
        assert_eq!(swap_delta(&seq, 1, 3, &pop).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_objectives() {
        let (pop, cache) = line(&[4.0; 6]);
        let seq = CircularSequence::identity(6, 3).unwrap();
        let r = repulsion(&seq, &pop).unwrap();
        assert_eq!(r, 0.0);
        assert_eq!(expected_energy_fast(r, &cache, 3), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pop = random_pop(&mut rng, 9, 2);
        let cache = compute_phi(&pop);
        for _ in 0..5 {
            let seq = CircularSequence::shuffled(9, 1, &mut rng).unwrap();
            assert_eq!(repulsion(&seq, &pop).unwrap(), 0.0);
            let fast = expected_energy_fast(0.0, &cache, 1);
            assert!((fast - cache.pop_self()).abs() < 1e-15);
            let brute = expected_energy_bruteforce(&seq, &cache, &pop).unwrap();
            assert!((brute - fast).abs() < 1e-12);

            let census = seq.with_block_size(9).unwrap();
            assert_eq!(
                expected_energy_bruteforce(&census, &cache, &pop).unwrap(),
                0.0
            );
            let r = repulsion(&census, &pop).unwrap();
            assert!(expected_energy_fast(r, &cache, 9).abs() < 1e-12);
        }
    }

    #[test]
    fn objective_state_tracks_swaps() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pop = random_pop(&mut rng, 30, 3);
        let cache = compute_phi(&pop);
        let seq = CircularSequence::shuffled(30, 6, &mut rng).unwrap();
        let mut state = ObjectiveState::new(&pop, &cache, seq).unwrap();
        for _ in 0..200 {
            let a = rng.random_range(0..30);
            let b = (a + rng.random_range(1..30)) % 30;
            let dr = state.swap_delta_repulsion(a, b);
            let predicted = state.energy_after(dr);
            state.apply_swap(a, b, dr);
            let brute = expected_energy_bruteforce(state.sequence(), &cache, &pop).unwrap();
            assert!((predicted - brute).abs() < 1e-10);
        }
        let tracked = state.repulsion();
        state.refresh();
        assert!((tracked - state.repulsion()).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn repulsion_weight_form_matches_windows(seed in any::<u64>(), len in 2usize..40, n_frac in 0.0f64..1.0, p in 1usize..4) {
            let n = 1 + ((len - 1) as f64 * n_frac) as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pop = random_pop(&mut rng, len, p);
            let seq = CircularSequence::shuffled(len, n, &mut rng).unwrap();
            let fast = repulsion(&seq, &pop).unwrap();
            let slow = repulsion_by_windows(&seq, &pop);
            prop_assert!((fast - slow).abs() <= 1e-10 * slow.max(1.0));
        }

        #[test]
        fn fast_matches_bruteforce(seed in any::<u64>(), len in 2usize..60, n_frac in 0.0f64..1.0, p in 1usize..5) {
            let n = 1 + ((len - 1) as f64 * n_frac) as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pop = random_pop(&mut rng, len, p);
            let cache = compute_phi(&pop);
            let seq = CircularSequence::shuffled(len, n, &mut rng).unwrap();
            let brute = expected_energy_bruteforce(&seq, &cache, &pop).unwrap();
            let fast = expected_energy_fast(repulsion(&seq, &pop).unwrap(), &cache, n);
            prop_assert!((fast - brute).abs() <= 1e-9 * brute.max(1e-12));
        }

        #[test]
        fn swap_delta_matches_recompute(seed in any::<u64>(), len in 2usize..40, n_frac in 0.0f64..1.0) {
            let n = 1 + ((len - 1) as f64 * n_frac) as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pop = random_pop(&mut rng, len, 2);
            let cache = compute_phi(&pop);
            let seq = CircularSequence::shuffled(len, n, &mut rng).unwrap();
            let a = rng.random_range(0..len);
            let b = (a + rng.random_range(1..len)) % len;
            let delta = swap_delta(&seq, a, b, &pop).unwrap();
            let mut after = seq.clone();
            after.swap(a, b);
            let before = expected_energy_bruteforce(&seq, &cache, &pop).unwrap();
            let now = expected_energy_bruteforce(&after, &cache, &pop).unwrap();
            prop_assert!((now - before - delta).abs() < 1e-10);
        }

        #[test]
        fn rotation_and_reflection_invariance(seed in any::<u64>(), len in 2usize..40, n_frac in 0.0f64..1.0, shift in 0usize..100) {
            let n = 1 + ((len - 1) as f64 * n_frac) as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pop = random_pop(&mut rng, len, 3);
            let cache = compute_phi(&pop);
            let seq = CircularSequence::shuffled(len, n, &mut rng).unwrap();
            let base = expected_energy_bruteforce(&seq, &cache, &pop).unwrap();
            let rot = expected_energy_bruteforce(&seq.rotated(shift), &cache, &pop).unwrap();
            let rev = expected_energy_bruteforce(&seq.reversed(), &cache, &pop).unwrap();
            prop_assert!((base - rot).abs() < 1e-12);
            prop_assert!((base - rev).abs() < 1e-12);
        }

        #[test]
        fn attraction_term_is_order_free(seed in any::<u64>(), len in 2usize..40, n_frac in 0.0f64..1.0) {
            let n = 1 + ((len - 1) as f64 * n_frac) as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pop = random_pop(&mut rng, len, 2);
            let cache = compute_phi(&pop);
            let seq = CircularSequence::shuffled(len, n, &mut rng).unwrap();
            let mut acc = 0.0;
            for j in 1..=len {
                let s = seq.window(j).unwrap();
                acc += 2.0 / n as f64 * s.units.iter().map(|&i| cache.phi()[i]).sum::<f64>();
            }
            let lhs = acc / len as f64;
            let rhs = 2.0 * cache.pop_self();
            prop_assert!((lhs - rhs).abs() < 1e-12 * rhs.max(1.0));
        }

        #[test]
        fn energy_is_nonnegative(seed in any::<u64>(), len in 1usize..50, n_frac in 0.0f64..1.0) {
            let n = 1 + ((len - 1) as f64 * n_frac) as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pop = random_pop(&mut rng, len, 3);
            let cache = compute_phi(&pop);
            let units = rand::seq::index::sample(&mut rng, len, n).into_vec();
            let e = energy_distance(&Sample::equal_probability(units, len), &cache, &pop).unwrap();
            prop_assert!(e >= 0.0);
            let all = Sample::equal_probability((0..len).collect(), len);
            prop_assert_eq!(energy_distance(&all, &cache, &pop).unwrap(), 0.0);
        }
    }
}
