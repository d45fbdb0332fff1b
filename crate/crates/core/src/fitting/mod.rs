//! Fitting the loss-law coefficients to observed training runs.
//!
//! In log space the law reads `ln L = LSE(a − α·ln N, b − β·ln D, e)` with
//! `A, B, E = exp(a), exp(b), exp(e)`. The fit minimizes the Huber loss of the
//! log-loss residuals with L-BFGS, started from every point of a grid, and
//! keeps the best converged start.

pub mod lbfgs;

use std::io::Read;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scaling_law::Coefficients;
use crate::{Error, Result};

use lbfgs::{minimize, LbfgsOptions, Minimum};

/// One observed run: final (smoothed) training loss after `train_tokens`
/// tokens on a model with `params` parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingRun {
    pub params: f64,
    pub train_tokens: f64,
    pub final_loss: f64,
}

impl TrainingRun {
    pub fn new(params: f64, train_tokens: f64, final_loss: f64) -> Result<Self> {
        for (field, v) in [
            ("params", params),
            ("tokens", train_tokens),
            ("loss", final_loss),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(
                    field,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        Ok(TrainingRun {
            params,
            train_tokens,
            final_loss,
        })
    }

    pub fn tokens_per_param(&self) -> f64 {
        self.train_tokens / self.params
    }
}

/// Log-space parameterization `(a, b, e, α, β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub a: f64,
    pub b: f64,
    pub e: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl FitParams {
    pub fn from_coefficients(c: &Coefficients) -> Self {
        FitParams {
            a: c.a().ln(),
            b: c.b().ln(),
            e: c.e().ln(),
            alpha: c.alpha(),
            beta: c.beta(),
        }
    }

    pub fn to_coefficients(&self) -> Result<Coefficients> {
        Coefficients::new(
            self.a.exp(),
            self.b.exp(),
            self.e.exp(),
            self.alpha,
            self.beta,
        )
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.a, self.b, self.e, self.alpha, self.beta]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        FitParams {
            a: v[0],
            b: v[1],
            e: v[2],
            alpha: v[3],
            beta: v[4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub huber_delta: f64,
    pub grid: Vec<FitParams>,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
}

impl FitConfig {
    /// α, β ∈ {0.1, 0.3, 0.5, 0.7}; a, b ∈ {ln 10, ln 100, ln 500};
    /// e ∈ {ln 0.5, ln 1, ln 2}. 432 starts.
    pub fn default_grid() -> Vec<FitParams> {
        let exps = [0.1, 0.3, 0.5, 0.7];
        let scales = [10f64.ln(), 100f64.ln(), 500f64.ln()];
        let floors = [0.5f64.ln(), 0.0, 2f64.ln()];
        let mut grid = Vec::with_capacity(432);
        for &alpha in &exps {
            for &beta in &exps {
                for &a in &scales {
                    for &b in &scales {
                        for &e in &floors {
                            grid.push(FitParams {
                                a,
                                b,
                                e,
                                alpha,
                                beta,
                            });
                        }
                    }
                }
            }
        }
        grid
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.huber_delta.is_finite() && self.huber_delta > 0.0) {
            return Err(Error::invalid("huber_delta", "must be finite and > 0"));
        }
        if self.grid.is_empty() {
            return Err(Error::invalid("grid", "must contain at least one start"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations", "must be > 0"));
        }
        if self.gradient_tolerance.is_nan() || self.gradient_tolerance <= 0.0 {
            return Err(Error::invalid("gradient_tolerance", "must be > 0"));
        }
        Ok(())
    }
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            huber_delta: 1e-3,
            grid: Self::default_grid(),
            max_iterations: 500,
            gradient_tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub coefficients: Coefficients,
    pub params: FitParams,
    pub objective_value: f64,
    pub winning_start: FitParams,
    pub winning_index: usize,
    pub converged_starts: usize,
    pub total_starts: usize,
    pub runs_used: usize,
    pub max_ratio_filter: Option<f64>,
}

/// `ln(e^x1 + e^x2 + e^x3)` without overflow.
pub fn lse3(x1: f64, x2: f64, x3: f64) -> f64 {
    let m = x1.max(x2).max(x3);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((x1 - m).exp() + (x2 - m).exp() + (x3 - m).exp()).ln()
}

pub fn huber(delta: f64, r: f64) -> f64 {
    let abs = r.abs();
    if abs <= delta {
        0.5 * r * r
    } else {
        delta * (abs - 0.5 * delta)
    }
}

pub fn huber_derivative(delta: f64, r: f64) -> f64 {
    r.clamp(-delta, delta)
}

fn residual_parts(p: &FitParams, run: &TrainingRun) -> (f64, [f64; 3], f64, f64) {
    let ln_n = run.params.ln();
    let ln_d = run.train_tokens.ln();
    let u = [p.a - p.alpha * ln_n, p.b - p.beta * ln_d, p.e];
    let m = u[0].max(u[1]).max(u[2]);
    let w = [(u[0] - m).exp(), (u[1] - m).exp(), (u[2] - m).exp()];
    let sum = w[0] + w[1] + w[2];
    let r = m + sum.ln() - run.final_loss.ln();
    (r, [w[0] / sum, w[1] / sum, w[2] / sum], ln_n, ln_d)
}

/// Sum over runs of `Huber_δ(LSE(a − α ln N, b − β ln D, e) − ln L)`.
pub fn objective(p: &FitParams, runs: &[TrainingRun], delta: f64) -> f64 {
    runs.iter()
        .map(|run| {
            let r = lse3(
                p.a - p.alpha * run.params.ln(),
                p.b - p.beta * run.train_tokens.ln(),
                p.e,
            ) - run.final_loss.ln();
            huber(delta, r)
        })
        .sum()
}

/// Exact gradient over `(a, b, e, α, β)`.
///
/// The residual's partials are the softmax weights of the three LSE terms,
/// scaled by `−ln N` / `−ln D` for the exponents.
pub fn objective_gradient(p: &FitParams, runs: &[TrainingRun], delta: f64) -> [f64; 5] {
    let mut grad = [0.0; 5];
    objective_and_gradient(p, runs, delta, &mut grad);
    grad
}

fn objective_and_gradient(
    p: &FitParams,
    runs: &[TrainingRun],
    delta: f64,
    grad: &mut [f64],
) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut value = 0.0;
    for run in runs {
        let (r, w, ln_n, ln_d) = residual_parts(p, run);
        value += huber(delta, r);
        let h = huber_derivative(delta, r);
        grad[0] += h * w[0];
        grad[1] += h * w[1];
        grad[2] += h * w[2];
        grad[3] -= h * w[0] * ln_n;
        grad[4] -= h * w[1] * ln_d;
    }
    value
}

/// Runs with at most `max_tokens_per_param` tokens per parameter, in input
/// order.
pub fn filter_by_ratio(runs: &[TrainingRun], max_tokens_per_param: f64) -> Vec<TrainingRun> {
    runs.iter()
        .filter(|r| r.tokens_per_param() <= max_tokens_per_param)
        .copied()
        .collect()
}

fn distinct(mut values: Vec<f64>) -> usize {
    values.sort_by(f64::total_cmp);
    values.dedup();
    values.len()
}

pub fn fit(runs: &[TrainingRun], config: &FitConfig) -> Result<FitReport> {
    config.validate()?;
    if runs.len() < 6 {
        return Err(Error::InsufficientData(format!(
            "need at least 6 runs, got {}",
            runs.len()
        )));
    }
    if distinct(runs.iter().map(|r| r.params).collect()) < 2
        || distinct(runs.iter().map(|r| r.train_tokens).collect()) < 2
    {
        return Err(Error::InsufficientData(
            "runs must span at least 2 distinct parameter counts and 2 distinct token counts"
                .into(),
        ));
    }

    // Canonical order so the summation, and therefore the fit, does not depend
    // on how the caller ordered the runs.
    let mut runs = runs.to_vec();
    runs.sort_by(|x, y| {
        x.params
            .total_cmp(&y.params)
            .then(x.train_tokens.total_cmp(&y.train_tokens))
            .then(x.final_loss.total_cmp(&y.final_loss))
    });

    let opts = LbfgsOptions {
        max_iterations: config.max_iterations,
        gradient_tolerance: config.gradient_tolerance,
        ..LbfgsOptions::default()
    };
    let delta = config.huber_delta;
    let run_start = |start: &FitParams| -> Minimum {
        minimize(
            |x, g| objective_and_gradient(&FitParams::from_slice(x), &runs, delta, g),
            &start.to_array(),
            &opts,
        )
    };

    #[cfg(feature = "parallel")]
    let results: Vec<Minimum> = config.grid.par_iter().map(run_start).collect();
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Minimum> = config.grid.iter().map(run_start).collect();

    let converged_starts = results.iter().filter(|m| m.converged()).count();
    if converged_starts == 0 {
        return Err(Error::NoConvergence {
            iterations: config.max_iterations,
        });
    }

    // Lowest objective wins; strict comparison keeps the earliest index on ties.
    let mut best: Option<(usize, FitParams, Coefficients, f64)> = None;
    for (i, m) in results.iter().enumerate() {
        if !m.converged() {
            continue;
        }
        let params = FitParams::from_slice(&m.x);
        let Ok(coefficients) = params.to_coefficients() else {
            continue;
        };
        if best.as_ref().is_none_or(|b| m.value < b.3) {
            best = Some((i, params, coefficients, m.value));
        }
    }
    let Some((winning_index, params, coefficients, objective_value)) = best else {
        return Err(Error::InvalidCoefficients(
            "no converged start produced coefficients within bounds".into(),
        ));
    };

    Ok(FitReport {
        coefficients,
        params,
        objective_value,
        winning_start: config.grid[winning_index],
        winning_index,
        converged_starts,
        total_starts: config.grid.len(),
        runs_used: runs.len(),
        max_ratio_filter: None,
    })
}

/// Applies [`filter_by_ratio`] and fits the remaining runs.
pub fn fit_with_max_ratio(
    runs: &[TrainingRun],
    max_tokens_per_param: Option<f64>,
    config: &FitConfig,
) -> Result<FitReport> {
    let subset = match max_tokens_per_param {
        Some(t) => filter_by_ratio(runs, t),
        None => runs.to_vec(),
    };
    let mut report = fit(&subset, config)?;
    report.max_ratio_filter = max_tokens_per_param;
    Ok(report)
}

/// Ratio thresholds of the successive-subset protocol: ≤100, ≤250, ≤500
/// tokens per parameter, then all data.
pub const SUBSET_THRESHOLDS: [Option<f64>; 4] = [Some(100.0), Some(250.0), Some(500.0), None];

/// Fits each nested subset of the successive-subset protocol.
pub fn ratio_subset_protocol(
    runs: &[TrainingRun],
    config: &FitConfig,
) -> Vec<(Option<f64>, Result<FitReport>)> {
    SUBSET_THRESHOLDS
        .iter()
        .map(|&t| (t, fit_with_max_ratio(runs, t, config)))
        .collect()
}

/// Noise-free runs generated from `c` on a (params × tokens-per-param) grid.
pub fn synthetic_runs(c: &Coefficients, params: &[f64], ratios: &[f64]) -> Vec<TrainingRun> {
    params
        .iter()
        .flat_map(|&n| {
            ratios.iter().map(move |&r| {
                let d = n * r;
                TrainingRun::new(n, d, c.loss_at(n, d)).expect("positive synthetic run")
            })
        })
        .collect()
}

/// Reads a `params,tokens,loss` CSV run log. Errors carry 1-based line numbers.
pub fn read_runs_csv<R: Read>(reader: R) -> Result<Vec<TrainingRun>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or(Error::Parse {
            line: 1,
            reason: format!("missing column '{name}' (expected header params,tokens,loss)"),
        })
    };
    let (ip, it, il) = (column("params")?, column("tokens")?, column("loss")?);

    let mut runs = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |idx: usize, name: &str| -> Result<f64> {
            let raw = record.get(idx).unwrap_or("");
            raw.parse::<f64>().map_err(|_| Error::Parse {
                line,
                reason: format!("{name}: cannot parse '{raw}' as a number"),
            })
        };
        let run = TrainingRun::new(
            field(ip, "params")?,
            field(it, "tokens")?,
            field(il, "loss")?,
        )
        .map_err(|e| Error::Parse {
            line,
            reason: e.to_string(),
        })?;
        runs.push(run);
    }
    Ok(runs)
}

pub fn write_runs_csv<W: std::io::Write>(runs: &[TrainingRun], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["params", "tokens", "loss"]).map_err(io)?;
    for r in runs {
        w.write_record([
            r.params.to_string(),
            r.train_tokens.to_string(),
            r.final_loss.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests;
