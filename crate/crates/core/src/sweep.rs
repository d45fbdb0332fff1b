//! Grids of optimal-vs-baseline ratios over (quality, demand).

use std::io::Write;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::optimizer::{solve_optimal, TradeoffObjective};
use crate::scaling_law::{Coefficients, ModelConfig};
use crate::{Error, Result};

pub const CSV_HEADER: [&str; 9] = [
    "loss",
    "demand",
    "flops_ratio",
    "params_ratio",
    "tokens_ratio",
    "optimal_params",
    "optimal_tokens",
    "baseline_params",
    "baseline_tokens",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRatios {
    /// Optimal objective over baseline objective (FLOPs or dollars).
    pub flops_ratio: f64,
    pub params_ratio: f64,
    pub tokens_ratio: f64,
    pub optimal: ModelConfig,
    pub baseline: ModelConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub loss: f64,
    pub demand: f64,
    /// `None` when the solver failed for this cell.
    pub ratios: Option<SweepRatios>,
}

/// `count` points spaced evenly in log space from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| {
                    if i == 0 {
                        lo
                    } else if i == count - 1 {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (count - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// Losses of training-compute-optimal models of the given sizes.
pub fn losses_for_chinchilla_sizes(sizes: &[f64], c: &Coefficients) -> Result<Vec<f64>> {
    sizes
        .iter()
        .map(|&n| c.loss_for_chinchilla_params(n))
        .collect()
}

/// Solves every (loss, demand) cell; rows follow `losses`, columns `demands`.
///
/// `objective_for` maps a demand value to the objective weights. A cell whose
/// objective or solve fails is kept with `ratios: None`.
pub fn sweep_ratios<F>(
    losses: &[f64],
    demands: &[f64],
    objective_for: F,
    c: &Coefficients,
) -> Result<Vec<SweepCell>>
where
    F: Fn(f64) -> Result<TradeoffObjective> + Sync,
{
    if losses.is_empty() || demands.is_empty() {
        return Err(Error::invalid(
            "grid",
            "loss and demand grids must be non-empty",
        ));
    }
    let cells: Vec<(f64, f64)> = losses
        .iter()
        .flat_map(|&l| demands.iter().map(move |&d| (l, d)))
        .collect();
    let solve = |&(loss, demand): &(f64, f64)| {
        let ratios = objective_for(demand)
            .and_then(|obj| solve_optimal(loss, &obj, c))
            .ok()
            .map(|plan| SweepRatios {
                flops_ratio: plan.objective_ratio(),
                params_ratio: plan.params_ratio(),
                tokens_ratio: plan.tokens_ratio(),
                optimal: plan.optimal,
                baseline: plan.baseline,
            });
        SweepCell {
            loss,
            demand,
            ratios,
        }
    };
    #[cfg(feature = "parallel")]
    let out = cells.par_iter().map(solve).collect();
    #[cfg(not(feature = "parallel"))]
    let out = cells.iter().map(solve).collect();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub cells: usize,
    pub invalid: usize,
    pub flops_ratio: Option<Range>,
    pub params_ratio: Option<Range>,
    pub tokens_ratio: Option<Range>,
}

pub fn summarize(cells: &[SweepCell]) -> SweepSummary {
    let valid: Vec<&SweepRatios> = cells.iter().filter_map(|c| c.ratios.as_ref()).collect();
    let range = |f: fn(&SweepRatios) -> f64| {
        valid
            .iter()
            .map(|r| f(r))
            .fold(None, |acc: Option<Range>, v| {
                Some(match acc {
                    None => Range { min: v, max: v },
                    Some(r) => Range {
                        min: r.min.min(v),
                        max: r.max.max(v),
                    },
                })
            })
    };
    SweepSummary {
        cells: cells.len(),
        invalid: cells.len() - valid.len(),
        flops_ratio: range(|r| r.flops_ratio),
        params_ratio: range(|r| r.params_ratio),
        tokens_ratio: range(|r| r.tokens_ratio),
    }
}

/// Writes the sweep CSV; invalid cells carry `NA` in every computed column.
pub fn write_csv<W: Write>(cells: &[SweepCell], writer: W) -> Result<()> {
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER).map_err(io)?;
    for cell in cells {
        let mut row = vec![cell.loss.to_string(), cell.demand.to_string()];
        match &cell.ratios {
            Some(r) => row.extend(
                [
                    r.flops_ratio,
                    r.params_ratio,
                    r.tokens_ratio,
                    r.optimal.params(),
                    r.optimal.train_tokens(),
                    r.baseline.params(),
                    r.baseline.train_tokens(),
                ]
                .iter()
                .map(f64::to_string),
            ),
            None => row.extend(std::iter::repeat_n("NA".to_string(), 7)),
        }
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
