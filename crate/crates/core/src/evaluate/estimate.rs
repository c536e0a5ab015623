//! Horvitz-Thompson totals and variance estimators for equal-probability
//! fixed-size designs.

use crate::error::{DbdError, Result};
use crate::population::{euclidean, Population, Sample};

/// `Y_hat = (N / n) sum_{i in S} y_i`, where `y` is indexed by population unit.
pub fn ht_total(sample: &Sample, y: &[f64]) -> f64 {
    sample.units.iter().map(|&i| y[i]).sum::<f64>() / sample.pi
}

/// Sample variance with the `n - 1` denominator.
fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

/// Standard variance estimator `N^2 s^2 / n` without finite-population
/// correction.
pub fn srs_variance(sample: &Sample, y: &[f64], population_size: usize) -> Result<f64> {
    if sample.len() < 2 {
        return Err(DbdError::InvalidNeighborhood {
            k: sample.len(),
            n: sample.len(),
        });
    }
    let values: Vec<f64> = sample.units.iter().map(|&i| y[i]).collect();
    let big_n = population_size as f64;
    Ok(big_n * big_n * sample_variance(&values) / sample.len() as f64)
}

/// Local mean variance estimator.
///
/// For each sample unit `i`, `G_i` holds `i` and its `k - 1` nearest other
/// sample units in auxiliary space (ties to the lowest unit index) and
/// `ybar_i` is the mean of `y` over `G_i`. Then
/// `S_k^2 = k / (n (k - 1)) sum_i (y_i - ybar_i)^2` and the estimate is
/// `N^2 S_k^2 / n`.
pub fn local_mean_variance(sample: &Sample, y: &[f64], k: usize, pop: &Population) -> Result<f64> {
    let n = sample.len();
    if k < 2 || k > n {
        return Err(DbdError::InvalidNeighborhood { k, n });
    }
    let mut others: Vec<(f64, usize)> = Vec::with_capacity(n);
    let mut ss = 0.0;
    for &i in &sample.units {
        others.clear();
        let xi = pop.row(i);
        others.extend(
            sample
                .units
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| (euclidean(xi, pop.row(j)), j)),
        );
        let by_distance =
            |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k - 1 < others.len() {
            others.select_nth_unstable_by(k - 2, by_distance);
        }
        let local = y[i] + others[..k - 1].iter().map(|&(_, j)| y[j]).sum::<f64>();
        let ybar = local / k as f64;
        ss += (y[i] - ybar) * (y[i] - ybar);
    }
    let nf = n as f64;
    let kf = k as f64;
    let s2 = kf / (nf * (kf - 1.0)) * ss;
    let big_n = pop.len() as f64;
    Ok(big_n * big_n * s2 / nf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ht_basics() {
        let y = [1.0, 2.0, 3.0, 4.0];
        let census = Sample::equal_probability(vec![0, 1, 2, 3], 4);
        assert_eq!(ht_total(&census, &y), 10.0);
        let s = Sample::equal_probability(vec![1, 3], 4);
        assert_eq!(ht_total(&s, &y), 12.0);
        let c = [2.5; 4];
        assert_eq!(ht_total(&s, &c), 10.0);
    }

    #[test]
    fn two_unit_local_variance() {
        let values: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let pop = Population::from_values(&values).unwrap();
        let mut y = vec![0.0; 10];
        y[7] = 2.0;
        let s = Sample::equal_probability(vec![3, 7], 10);
        assert!((local_mean_variance(&s, &y, 2, &pop).unwrap() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn constant_target_has_zero_variance() {
        let values: Vec<f64> = (0..20).map(|i| (i as f64).sqrt()).collect();
        let pop = Population::from_values(&values).unwrap();
        let s = Sample::equal_probability(vec![1, 4, 9, 16], 20);
        let y = vec![3.0; 20];
        for k in 2..=4 {
            assert_eq!(local_mean_variance(&s, &y, k, &pop).unwrap(), 0.0);
        }
    }

    #[test]
    fn full_neighbourhood_is_the_classical_estimator() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.random(), rng.random()]).collect();
        let pop = Population::from_rows(&rows).unwrap();
        let y: Vec<f64> = (0..40).map(|_| rng.random_range(-5.0..5.0)).collect();
        for _ in 0..20 {
            let n = rng.random_range(2..15);
            let units = rand::seq::index::sample(&mut rng, 40, n).into_vec();
            let s = Sample::equal_probability(units, 40);
            let local = local_mean_variance(&s, &y, n, &pop).unwrap();
            let classic = srs_variance(&s, &y, 40).unwrap();
            assert!((local - classic).abs() <= 1e-12 * classic.max(1.0));
        }
    }

    #[test]
    fn neighbourhood_ties_use_lowest_index() {
        // Units 0 and 2 are both at distance 1 from unit 1.
        let pop = Population::from_values(&[0.0, 1.0, 2.0]).unwrap();
        let y = [0.0, 0.0, 6.0];
        let s = Sample::equal_probability(vec![2, 1, 0], 3);
        // G_0 = {0,1}, G_1 = {1,0}, G_2 = {2,1}: deviations 0, 0, 3.
        let v = local_mean_variance(&s, &y, 2, &pop).unwrap();
        let expected = 9.0 * (2.0 / (3.0 * 1.0) * 9.0) / 3.0;
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn neighbourhood_bounds() {
        let pop = Population::from_values(&[0.0, 1.0, 2.0]).unwrap();
        let s = Sample::equal_probability(vec![0, 2], 3);
        let y = [1.0, 2.0, 3.0];
        assert!(local_mean_variance(&s, &y, 1, &pop).is_err());
        assert!(local_mean_variance(&s, &y, 3, &pop).is_err());
    }
}
