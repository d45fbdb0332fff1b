use std::fs::{self, File};
use std::path::Path;

use infscale::cost::{cost_objective, solve_cost_optimal, CostConfig, InferenceDemand};
use infscale::fitting::{fit_with_max_ratio, read_runs_csv, FitConfig};
use infscale::format::{percent, sci, si, sig3};
use infscale::optimizer::{solve_optimal, TradeoffObjective};
use infscale::sweep::{
    log_grid, losses_for_chinchilla_sizes, summarize, sweep_ratios, write_csv, Range,
};
use infscale::tables::{regenerate_compute, regenerate_cost, Column, RegeneratedRow};
use infscale::{Coefficients, FlopAccount, ModelConfig};
use serde_json::json;

use crate::output::{print_json, table, write_atomically, write_text};
use crate::{Failure, Quality, SizeAxis};

/// `println!` into the command's output buffer.
macro_rules! say {
    ($out:expr) => {
        $out.push('\n')
    };
    ($out:expr, $($arg:tt)*) => {{
        use std::fmt::Write as _;
        writeln!($out, $($arg)*).expect("writing to a String cannot fail");
    }};
}

const MAX_CELLS: usize = 1_000_000;

pub fn load_coefficients(source: &str) -> Result<Coefficients, Failure> {
    if let Some(c) = Coefficients::preset(source) {
        return Ok(c);
    }
    let path = Path::new(source);
    if !path.exists() {
        return Err(Failure::Usage(format!(
            "--coeffs: '{source}' is neither a preset nor an existing file"
        )));
    }
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Io(format!("--coeffs {source}: {e}")))?;
    Coefficients::from_json(&text).map_err(|e| Failure::Domain(format!("--coeffs {source}: {e}")))
}

pub fn load_cost_config(path: Option<&Path>) -> Result<CostConfig, Failure> {
    let Some(path) = path else {
        return Ok(CostConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Io(format!("--config {}: {e}", path.display())))?;
    CostConfig::from_json(&text)
        .map_err(|e| Failure::Domain(format!("--config {}: {e}", path.display())))
}

/// Target loss, plus the Chinchilla size it was derived from if any.
fn resolve(c: &Coefficients, q: Quality) -> Result<(f64, Option<f64>), Failure> {
    match (q.loss, q.match_chinchilla) {
        (Some(l), None) => Ok((l, None)),
        (None, Some(n)) => Ok((c.loss_for_chinchilla_params(n)?, Some(n))),
        _ => Err(Failure::Usage(
            "give exactly one of --loss / --match-chinchilla".into(),
        )),
    }
}

fn quality_line(loss: f64, size: Option<f64>) -> String {
    match size {
        Some(n) => format!(
            "target loss  {} (Chinchilla-optimal {} quality)",
            sig3(loss),
            si(n)
        ),
        None => format!("target loss  {}", sig3(loss)),
    }
}

fn config_cells(cfg: &ModelConfig) -> [String; 3] {
    [
        si(cfg.params()),
        si(cfg.train_tokens()),
        sig3(cfg.tokens_per_param()),
    ]
}

pub fn loss(
    out: &mut String,
    c: &Coefficients,
    params: f64,
    tokens: f64,
    json: bool,
) -> Result<(), Failure> {
    let cfg = ModelConfig::new(params, tokens)?;
    let loss = c.loss(&cfg);
    if json {
        print_json(
            out,
            &json!({
                "params": params,
                "tokens": tokens,
                "loss": loss,
                "tokens_per_param": cfg.tokens_per_param(),
                "coefficients": c,
            }),
        );
    } else {
        say!(out, "loss            {}", sig3(loss));
        say!(out, "tokens/param    {}", sig3(cfg.tokens_per_param()));
    }
    Ok(())
}

pub fn baseline(out: &mut String, c: &Coefficients, q: Quality, json: bool) -> Result<(), Failure> {
    let (target, size) = resolve(c, q)?;
    let cfg = c.chinchilla_baseline(target)?;
    let flops = FlopAccount::new(&cfg, 0.0)?;
    if json {
        print_json(
            out,
            &json!({ "target_loss": target, "baseline": cfg, "train_flops": flops.train_flops }),
        );
    } else {
        say!(out, "{}", quality_line(target, size));
        let [n, d, r] = config_cells(&cfg);
        say!(
            out,
            "{}",
            table(
                &["", "params", "tokens", "tokens/param", "train FLOPs"],
                &[vec!["Chinchilla".into(), n, d, r, sci(flops.train_flops)]],
            )
        );
    }
    Ok(())
}

pub fn optimize_compute(
    out: &mut String,
    c: &Coefficients,
    q: Quality,
    inference_tokens: f64,
    json: bool,
) -> Result<(), Failure> {
    let (target, size) = resolve(c, q)?;
    let plan = solve_optimal(target, &TradeoffObjective::compute(inference_tokens)?, c)?;
    let base = FlopAccount::new(&plan.baseline, inference_tokens)?;
    let opt = FlopAccount::new(&plan.optimal, inference_tokens)?;
    if json {
        print_json(
            out,
            &json!({
                "target_loss": target,
                "inference_tokens": inference_tokens,
                "plan": plan,
                "baseline_flops": base,
                "optimal_flops": opt,
                "reduction_fraction": plan.reduction_fraction,
            }),
        );
        return Ok(());
    }
    say!(out, "{}", quality_line(target, size));
    say!(out, "inference tokens  {}", si(inference_tokens));
    say!(out);
    let row = |label: &str, cfg: &ModelConfig, f: &FlopAccount| {
        let [n, d, r] = config_cells(cfg);
        vec![label.to_string(), n, d, r, sci(f.total_flops)]
    };
    say!(
        out,
        "{}",
        table(
            &["", "params", "tokens", "tokens/param", "total FLOPs"],
            &[
                row("Chinchilla", &plan.baseline, &base),
                row("optimal", &plan.optimal, &opt)
            ],
        )
    );
    say!(out);
    say!(out, "FLOP reduction  {}", percent(plan.reduction_fraction));
    Ok(())
}

fn with_requests(config: &CostConfig, requests: Option<f64>) -> Result<CostConfig, Failure> {
    let mut config = *config;
    if let Some(r) = requests {
        let d = config.demand;
        config.demand =
            InferenceDemand::new(r, d.input_tokens_per_request, d.output_tokens_per_request)?;
    }
    Ok(config)
}

pub fn optimize_cost(
    out: &mut String,
    c: &Coefficients,
    q: Quality,
    requests: Option<f64>,
    config: Option<&Path>,
    json: bool,
) -> Result<(), Failure> {
    let (target, size) = resolve(c, q)?;
    let config = with_requests(&load_cost_config(config)?, requests)?;
    let plan = solve_cost_optimal(target, &config.hardware, &config.mfu, &config.demand, c)?;
    if json {
        print_json(
            out,
            &json!({ "target_loss": target, "config": config, "plan": plan }),
        );
        return Ok(());
    }
    say!(out, "{}", quality_line(target, size));
    say!(
        out,
        "requests  {} ({} input + {} output tokens each)",
        si(config.demand.requests),
        sig3(config.demand.input_tokens_per_request),
        sig3(config.demand.output_tokens_per_request)
    );
    say!(out);
    let row = |label: &str, cfg: &ModelConfig, cost: f64| {
        let [n, d, r] = config_cells(cfg);
        vec![label.to_string(), n, d, r, format!("${}", si(cost))]
    };
    say!(
        out,
        "{}",
        table(
            &["", "params", "tokens", "tokens/param", "total cost"],
            &[
                row(
                    "Chinchilla",
                    &plan.plan.baseline,
                    plan.baseline_cost.total_cost
                ),
                row("optimal", &plan.plan.optimal, plan.cost.total_cost),
            ],
        )
    );
    say!(out);
    say!(out, "cost savings  {}", percent(plan.savings_fraction));
    Ok(())
}

pub struct DemandAxis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub with_zero: bool,
    pub flag: &'static str,
}

fn axis(min: f64, max: f64, count: usize, flag: &str) -> Result<Vec<f64>, Failure> {
    if count == 0 {
        return Err(Failure::Usage(format!("--{flag}-count must be at least 1")));
    }
    if min > max || (count > 1 && min == max) {
        return Err(Failure::Usage(format!(
            "--{flag}-min must be below --{flag}-max"
        )));
    }
    Ok(log_grid(min, max, count))
}

/// Runs a compute sweep, or a cost sweep when `cost` is given.
pub fn sweep(
    out: &mut String,
    c: &Coefficients,
    sizes: SizeAxis,
    demand: DemandAxis,
    cost: Option<CostConfig>,
    csv: &Path,
    json: bool,
) -> Result<(), Failure> {
    let sizes = axis(sizes.size_min, sizes.size_max, sizes.size_count, "size")?;
    let mut demands = axis(demand.min, demand.max, demand.count, demand.flag)?;
    if demand.with_zero {
        demands.insert(0, 0.0);
    }
    if sizes.len().saturating_mul(demands.len()) > MAX_CELLS {
        return Err(Failure::Usage(format!("grid exceeds {MAX_CELLS} cells")));
    }
    let losses = losses_for_chinchilla_sizes(&sizes, c)?;
    let cells = match cost {
        None => sweep_ratios(&losses, &demands, TradeoffObjective::compute, c)?,
        Some(cfg) => {
            let objective_for = |requests: f64| {
                let d = cfg.demand;
                let demand = InferenceDemand::new(
                    requests,
                    d.input_tokens_per_request,
                    d.output_tokens_per_request,
                )?;
                Ok(cost_objective(&cfg.hardware, &cfg.mfu, &demand))
            };
            sweep_ratios(&losses, &demands, objective_for, c)?
        }
    };
    write_atomically(csv, |w| write_csv(&cells, w))?;
    let summary = summarize(&cells);
    if json {
        print_json(
            out,
            &json!({ "out": csv.display().to_string(), "summary": summary }),
        );
        return Ok(());
    }
    let kind = if cost.is_some() { "cost" } else { "flops" };
    say!(
        out,
        "wrote {} ({} cells, {} invalid)",
        csv.display(),
        summary.cells,
        summary.invalid
    );
    let range = |r: Option<Range>| match r {
        Some(r) => vec![sig3(r.min), sig3(r.max)],
        None => vec!["NA".into(), "NA".into()],
    };
    let rows: Vec<Vec<String>> = [
        (format!("{kind} ratio"), summary.flops_ratio),
        ("params ratio".into(), summary.params_ratio),
        ("tokens ratio".into(), summary.tokens_ratio),
    ]
    .into_iter()
    .map(|(label, r)| std::iter::once(label).chain(range(r)).collect())
    .collect();
    say!(out, "{}", table(&["", "min", "max"], &rows));
    Ok(())
}

pub fn fit(
    out: &mut String,
    runs: &Path,
    max_ratio: Option<f64>,
    coeffs_out: Option<&Path>,
    json: bool,
) -> Result<(), Failure> {
    let file = File::open(runs).map_err(|e| Failure::Io(format!("{}: {e}", runs.display())))?;
    let runs = read_runs_csv(file).map_err(|e| Failure::Domain(format!("{}: {e}", "runs file")))?;
    let report = fit_with_max_ratio(&runs, max_ratio, &FitConfig::default())?;
    if let Some(path) = coeffs_out {
        write_atomically(path, |w| {
            write_text(w, &(report.coefficients.to_json() + "\n"))
        })?;
    }
    if json {
        print_json(out, &json!(report));
        return Ok(());
    }
    let c = &report.coefficients;
    let filter = max_ratio.map_or("none".to_string(), |r| {
        format!("tokens/param <= {}", sig3(r))
    });
    say!(
        out,
        "runs used        {} of {} (filter: {filter})",
        report.runs_used,
        runs.len()
    );
    say!(
        out,
        "starts           {} converged of {} (winner #{})",
        report.converged_starts,
        report.total_starts,
        report.winning_index
    );
    say!(out, "objective        {}", sci(report.objective_value));
    say!(out);
    say!(
        out,
        "{}",
        table(
            &["A", "B", "E", "alpha", "beta"],
            &[vec![
                sig3(c.a()),
                sig3(c.b()),
                sig3(c.e()),
                sig3(c.alpha()),
                sig3(c.beta())
            ]],
        )
    );
    if let Some(path) = coeffs_out {
        say!(out);
        say!(out, "coefficients written to {}", path.display());
    }
    Ok(())
}

fn render_rows(
    out: &mut String,
    rows: &[RegeneratedRow],
    demand_label: &str,
    total_label: &str,
    money: bool,
) {
    let fmt = |col: Column, v: f64| match col {
        Column::Reduction => percent(v),
        Column::ChinchillaTotal | Column::OptimalTotal if money => format!("${}", si(v)),
        Column::ChinchillaTotal | Column::OptimalTotal => sci(v),
        _ => si(v),
    };
    for row in rows {
        say!(
            out,
            "{demand_label} {}  loss {} (unrounded {:.4})",
            si(row.demand),
            sig3(row.printed_loss),
            row.target_loss
        );
        let cells: Vec<Vec<String>> = row
            .cells
            .iter()
            .map(|cell| {
                let name = match cell.column {
                    Column::ChinchillaParams => "Chinchilla params".to_string(),
                    Column::ChinchillaTokens => "Chinchilla tokens".to_string(),
                    Column::ChinchillaTotal => format!("Chinchilla {total_label}"),
                    Column::OptimalParams => "optimal params".to_string(),
                    Column::OptimalTokens => "optimal tokens".to_string(),
                    Column::OptimalTotal => format!("optimal {total_label}"),
                    Column::Reduction => "reduction".to_string(),
                };
                let deviation = if cell.column == Column::Reduction {
                    format!("{:+.1}pp", cell.deviation * 100.0)
                } else {
                    format!("{:+.1}%", cell.deviation * 100.0)
                };
                vec![
                    format!("  {name}"),
                    fmt(cell.column, cell.printed),
                    fmt(cell.column, cell.computed),
                    deviation,
                    cell.annotation.clone().unwrap_or_default(),
                ]
            })
            .collect();
        say!(
            out,
            "{}",
            table(&["", "published", "computed", "deviation", "note"], &cells)
        );
        say!(out);
    }
}

pub fn tables(out: &mut String, c: &Coefficients, json: bool) -> Result<(), Failure> {
    let config = CostConfig::default();
    let compute = regenerate_compute(c)?;
    let cost = regenerate_cost(c, &config.hardware, &config.mfu, &config.demand)?;
    if json {
        print_json(out, &json!({ "compute": compute, "cost": cost }));
        return Ok(());
    }
    say!(out, "Compute-optimal vs. Chinchilla-style");
    say!(out);
    render_rows(out, &compute, "inference tokens", "FLOPs", false);
    say!(out, "Cost-optimal vs. Chinchilla-style");
    say!(out);
    render_rows(out, &cost, "requests", "cost", true);
    say!(
        out,
        "deviations of the two typo cells are measured against their corrections"
    );
    Ok(())
}
