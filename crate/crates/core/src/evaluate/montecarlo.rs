//! Monte Carlo comparison of designs.
//!
//! Stochastic designs (SRS, LPM) are replicated `reps` times; replicate `r`
//! draws from a ChaCha8 generator seeded with the design seed on stream `r`,
//! so results do not depend on scheduling. The circular design is evaluated on
//! its full support of `N` windows instead, with `rep` holding the start `j`.

use std::io::Write;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::designs::{draw_lpm, draw_srs, enumerate_design, DesignKind, DesignSpec};
use crate::energy::energy_distance;
use crate::error::{DbdError, Result};
use crate::population::{DistanceCache, Population, Sample};

use super::estimate::{ht_total, local_mean_variance, srs_variance};
use super::metrics::{
    balance_deviation_with, gram_pseudo_inverse, local_balance_with, spatial_balance_from, voronoi,
};

/// Normal quantile for two-sided 95% intervals.
pub const CI_MULTIPLIER: f64 = 1.96;

/// Population-level quantities shared by every metric evaluation.
pub struct MetricContext<'a> {
    pub pop: &'a Population,
    pub cache: &'a DistanceCache,
    q_pinv: DMatrix<f64>,
    aux_totals: Vec<f64>,
}

impl<'a> MetricContext<'a> {
    pub fn new(pop: &'a Population, cache: &'a DistanceCache) -> Self {
        Self {
            pop,
            cache,
            q_pinv: gram_pseudo_inverse(pop),
            aux_totals: pop.aux_totals(),
        }
    }

    /// Energy distance, SB, LB and BD of one sample.
    pub fn metrics(&self, sample: &Sample) -> Result<SampleMetrics> {
        let cells = voronoi(sample, self.pop)?;
        Ok(SampleMetrics {
            energy: energy_distance(sample, self.cache, self.pop)?,
            sb: spatial_balance_from(&cells, sample),
            lb: local_balance_with(sample, self.pop, &cells, &self.q_pinv),
            bd: balance_deviation_with(sample, self.pop, &self.aux_totals)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMetrics {
    pub energy: f64,
    pub sb: f64,
    pub lb: f64,
    pub bd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetEstimate {
    pub ht: f64,
    pub vhat: f64,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub design: String,
    pub rep: usize,
    pub metrics: SampleMetrics,
    pub targets: Vec<TargetEstimate>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    fn of(values: impl Iterator<Item = f64> + Clone) -> Self {
        let (count, sum) = values
            .clone()
            .fold((0usize, 0.0), |(c, s), v| (c + 1, s + v));
        let mean = sum / count as f64;
        let sd = if count > 1 {
            (values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, sd }
    }

    /// Monte Carlo standard error of the mean over `count` rows.
    pub fn standard_error(&self, count: usize) -> f64 {
        self.sd / (count as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSummary {
    pub name: String,
    pub total: f64,
    pub mean_ht: f64,
    pub rrmse: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSummary {
    pub design: String,
    pub samples: usize,
    pub energy: MeanSd,
    pub sb: MeanSd,
    pub lb: MeanSd,
    pub bd: MeanSd,
    pub targets: Vec<TargetSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub target_names: Vec<String>,
    pub per_sample: Vec<SampleRow>,
    pub summary: Vec<DesignSummary>,
}

impl MetricsReport {
    pub fn design(&self, label: &str) -> Option<&DesignSummary> {
        self.summary.iter().find(|s| s.design == label)
    }

    pub fn rows<'s>(&'s self, label: &'s str) -> impl Iterator<Item = &'s SampleRow> + 's {
        self.per_sample.iter().filter(move |r| r.design == label)
    }

    /// Per-sample file: `design, rep, energy, sb, lb, bd` then
    /// `ht_<t>, vhat_<t>, covered_<t>` for each target.
    pub fn write_per_sample<W: Write>(&self, out: W, delimiter: u8) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .delimiter(delimiter)
            .from_writer(out);
        let mut header: Vec<String> = ["design", "rep", "energy", "sb", "lb", "bd"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for t in &self.target_names {
            header.extend([
                format!("ht_{t}"),
                format!("vhat_{t}"),
                format!("covered_{t}"),
            ]);
        }
        w.write_record(&header)?;
        for row in &self.per_sample {
            let m = &row.metrics;
            let mut rec = vec![
                row.design.clone(),
                row.rep.to_string(),
                m.energy.to_string(),
                m.sb.to_string(),
                m.lb.to_string(),
                m.bd.to_string(),
            ];
            for t in &row.targets {
                rec.extend([
                    t.ht.to_string(),
                    t.vhat.to_string(),
                    (t.covered as u8).to_string(),
                ]);
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Summary file: one row per design with means and standard deviations of
    /// each metric, then `mean_ht_<t>, rrmse_<t>, coverage_<t>` per target.
    pub fn write_summary<W: Write>(&self, out: W, delimiter: u8) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .delimiter(delimiter)
            .from_writer(out);
        let mut header: Vec<String> = [
            "design",
            "samples",
            "mean_energy",
            "sd_energy",
            "mean_sb",
            "sd_sb",
            "mean_lb",
            "sd_lb",
            "mean_bd",
            "sd_bd",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for t in &self.target_names {
            header.extend([
                format!("mean_ht_{t}"),
                format!("rrmse_{t}"),
                format!("coverage_{t}"),
            ]);
        }
        w.write_record(&header)?;
        for s in &self.summary {
            let mut rec = vec![s.design.clone(), s.samples.to_string()];
            for m in [s.energy, s.sb, s.lb, s.bd] {
                rec.extend([m.mean.to_string(), m.sd.to_string()]);
            }
            for t in &s.targets {
                rec.extend([
                    t.mean_ht.to_string(),
                    t.rrmse.to_string(),
                    t.coverage.to_string(),
                ]);
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn target_estimate(
    sample: &Sample,
    kind: &DesignKind,
    y: &[f64],
    total: f64,
    k: usize,
    pop: &Population,
) -> Result<TargetEstimate> {
    let ht = ht_total(sample, y);
    let vhat = match kind {
        DesignKind::Srs => srs_variance(sample, y, pop.len())?,
        DesignKind::Dbd(_) | DesignKind::Lpm => local_mean_variance(sample, y, k, pop)?,
    };
    let covered = (ht - total).abs() <= CI_MULTIPLIER * vhat.sqrt();
    Ok(TargetEstimate { ht, vhat, covered })
}

fn summarize(label: &str, rows: &[SampleRow], names: &[String], totals: &[f64]) -> DesignSummary {
    let metric = |f: fn(&SampleMetrics) -> f64| MeanSd::of(rows.iter().map(move |r| f(&r.metrics)));
    let count = rows.len() as f64;
    let targets = names
        .iter()
        .zip(totals)
        .enumerate()
        .map(|(t, (name, &total))| {
            let mean_ht = rows.iter().map(|r| r.targets[t].ht).sum::<f64>() / count;
            let mse = rows
                .iter()
                .map(|r| (r.targets[t].ht - total).powi(2))
                .sum::<f64>()
                / count;
            let covered = rows.iter().filter(|r| r.targets[t].covered).count() as f64;
            TargetSummary {
                name: name.clone(),
                total,
                mean_ht,
                rrmse: mse.sqrt() / total.abs(),
                coverage: covered / count,
            }
        })
        .collect();
    DesignSummary {
        design: label.to_string(),
        samples: rows.len(),
        energy: metric(|m| m.energy),
        sb: metric(|m| m.sb),
        lb: metric(|m| m.lb),
        bd: metric(|m| m.bd),
        targets,
    }
}

/// Evaluates every design in `designs` and summarizes the rows per design.
///
/// `k` is the neighbourhood size of the local mean variance estimator used
/// for the spread designs; SRS uses the standard estimator.
pub fn monte_carlo(
    pop: &Population,
    cache: &DistanceCache,
    designs: &[DesignSpec],
    reps: usize,
    targets: &[String],
    k: usize,
) -> Result<MetricsReport> {
    let ctx = MetricContext::new(pop, cache);
    let ys = targets
        .iter()
        .map(|t| pop.target(t))
        .collect::<Result<Vec<_>>>()?;
    let totals: Vec<f64> = ys.iter().map(|y| y.iter().sum()).collect();

    let mut per_sample = Vec::new();
    let mut summary = Vec::new();
    for spec in designs {
        spec.validate(pop.len())?;
        let spread = !matches!(spec.kind, DesignKind::Srs);
        if !ys.is_empty() && spread && (k < 2 || k > spec.n) {
            return Err(DbdError::InvalidNeighborhood { k, n: spec.n });
        }
        if !ys.is_empty() && !spread && spec.n < 2 {
            return Err(DbdError::InvalidConfig(
                "the SRS variance estimator needs n >= 2".into(),
            ));
        }
        let label = spec.kind.label();
        let evaluate = |rep: usize, sample: Sample| -> Result<SampleRow> {
            let metrics = ctx.metrics(&sample)?;
            let targets = ys
                .iter()
                .zip(&totals)
                .map(|(y, &total)| target_estimate(&sample, &spec.kind, y, total, k, pop))
                .collect::<Result<Vec<_>>>()?;
            Ok(SampleRow {
                design: label.to_string(),
                rep,
                metrics,
                targets,
            })
        };
        let rows = match &spec.kind {
            DesignKind::Dbd(seq) => enumerate_design(seq)
                .into_par_iter()
                .enumerate()
                .map(|(j, s)| evaluate(j + 1, s))
                .collect::<Result<Vec<_>>>()?,
            kind => {
                if reps == 0 {
                    return Err(DbdError::InvalidConfig(
                        "stochastic designs need at least one replicate".into(),
                    ));
                }
                (1..=reps)
                    .into_par_iter()
                    .map(|rep| {
                        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                        rng.set_stream(rep as u64);
                        let sample = match kind {
                            DesignKind::Srs => draw_srs(pop.len(), spec.n, &mut rng)?,
                            _ => draw_lpm(pop, spec.n, &mut rng)?,
                        };
                        evaluate(rep, sample)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        summary.push(summarize(label, &rows, targets, &totals));
        per_sample.extend(rows);
    }
    Ok(MetricsReport {
        target_names: targets.to_vec(),
        per_sample,
        summary,
    })
}

/// Share of replicates whose 95% interval `Y_hat +- 1.96 sqrt(V_hat)`
/// contains the true total of `target`.
pub fn coverage(
    pop: &Population,
    cache: &DistanceCache,
    design: &DesignSpec,
    target: &str,
    reps: usize,
    k: usize,
) -> Result<f64> {
    let report = monte_carlo(
        pop,
        cache,
        std::slice::from_ref(design),
        reps,
        &[target.to_string()],
        k,
    )?;
    Ok(report.summary[0].targets[0].coverage)
}
