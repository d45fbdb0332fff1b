//! WebAssembly bindings for the browser demo.
//!
//! Each export is a thin wrapper over a plain function so the logic runs
//! and is tested natively.

use infscale::cost::{cost_objective, solve_cost_optimal, CostConfig, InferenceDemand};
use infscale::optimizer::{solve_optimal, TradeoffObjective};
use infscale::sweep::{log_grid, losses_for_chinchilla_sizes, sweep_ratios};
use infscale::{Coefficients, FlopAccount, Result};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Compute-optimal plan for the quality of a Chinchilla-optimal model of
/// `chinchilla_params`.
pub fn compute_plan(chinchilla_params: f64, inference_tokens: f64) -> Result<Value> {
    let c = Coefficients::chinchilla();
    let loss = c.loss_for_chinchilla_params(chinchilla_params)?;
    let plan = solve_optimal(loss, &TradeoffObjective::compute(inference_tokens)?, &c)?;
    Ok(json!({
        "target_loss": loss,
        "plan": plan,
        "baseline_flops": FlopAccount::new(&plan.baseline, inference_tokens)?,
        "optimal_flops": FlopAccount::new(&plan.optimal, inference_tokens)?,
    }))
}

/// Cost-optimal plan under the default hardware and request shape.
pub fn cost_plan(chinchilla_params: f64, requests: f64) -> Result<Value> {
    let c = Coefficients::chinchilla();
    let cfg = CostConfig::default();
    let loss = c.loss_for_chinchilla_params(chinchilla_params)?;
    let demand = InferenceDemand::with_requests(requests)?;
    let plan = solve_cost_optimal(loss, &cfg.hardware, &cfg.mfu, &demand, &c)?;
    Ok(json!({ "target_loss": loss, "plan": plan }))
}

/// Row-major objective ratios over sizes (rows) x demands (columns); `NaN`
/// marks cells the solver rejected. `mode` is `"compute"` or `"cost"`.
pub fn ratio_grid(
    mode: &str,
    size_min: f64,
    size_max: f64,
    sizes: usize,
    demand_min: f64,
    demand_max: f64,
    demands: usize,
) -> Result<Vec<f64>> {
    let c = Coefficients::chinchilla();
    let losses = losses_for_chinchilla_sizes(&log_grid(size_min, size_max, sizes), &c)?;
    let demands = log_grid(demand_min, demand_max, demands);
    let cells = match mode {
        "cost" => {
            let cfg = CostConfig::default();
            let objective_for = |requests: f64| {
                let d = InferenceDemand::with_requests(requests)?;
                Ok(cost_objective(&cfg.hardware, &cfg.mfu, &d))
            };
            sweep_ratios(&losses, &demands, objective_for, &c)?
        }
        _ => sweep_ratios(&losses, &demands, TradeoffObjective::compute, &c)?,
    };
    Ok(cells
        .iter()
        .map(|cell| cell.ratios.map_or(f64::NAN, |r| r.flops_ratio))
        .collect())
}

fn js(err: infscale::Error) -> JsError {
    JsError::new(&err.to_string())
}

#[wasm_bindgen(js_name = solveCompute)]
pub fn solve_compute_js(chinchilla_params: f64, inference_tokens: f64) -> Result<String, JsError> {
    compute_plan(chinchilla_params, inference_tokens)
        .map(|v| v.to_string())
        .map_err(js)
}

#[wasm_bindgen(js_name = solveCost)]
pub fn solve_cost_js(chinchilla_params: f64, requests: f64) -> Result<String, JsError> {
    cost_plan(chinchilla_params, requests)
        .map(|v| v.to_string())
        .map_err(js)
}

#[wasm_bindgen(js_name = ratioGrid)]
pub fn ratio_grid_js(
    mode: &str,
    size_min: f64,
    size_max: f64,
    sizes: usize,
    demand_min: f64,
    demand_max: f64,
    demands: usize,
) -> Result<Vec<f64>, JsError> {
    ratio_grid(
        mode, size_min, size_max, sizes, demand_min, demand_max, demands,
    )
    .map_err(js)
}
