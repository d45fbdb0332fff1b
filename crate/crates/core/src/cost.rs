//! Dollar-denominated objective.
//!
//! Training costs `6·N·D·C_tr/U_tr`; serving costs
//! `2·N·C_inf·(D_inp/U_inp + D_out/U_out)`, where `C` is the price of one
//! operation at full utilization and `U` the achieved model FLOPs utilization.
//! MFU and per-op prices are constants, independent of model size.

use serde::{Deserialize, Serialize};

use crate::optimizer::{solve_optimal, OptimalPlan, TradeoffObjective};
use crate::scaling_law::{Coefficients, ModelConfig};
use crate::{Error, Result};

const SECONDS_PER_HOUR: f64 = 3600.0;

/// USD per operation at full utilization.
pub fn cost_per_op(price_per_hour: f64, peak_ops: f64) -> f64 {
    price_per_hour / (SECONDS_PER_HOUR * peak_ops)
}

fn positive(field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            field,
            format!("must be finite and > 0, got {value}"),
        ))
    }
}

fn non_negative(field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            field,
            format!("must be finite and >= 0, got {value}"),
        ))
    }
}

fn utilization(field: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            field,
            format!("must lie in (0, 1], got {value}"),
        ))
    }
}

/// Device prices (USD per device-hour) and peak throughputs (ops per second).
///
/// Inference runs at the INT8 rate; there is no separate quantization switch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHardware")]
pub struct HardwareProfile {
    pub train_price_per_hour: f64,
    pub train_peak_ops: f64,
    pub inf_price_per_hour: f64,
    pub inf_peak_ops: f64,
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawHardware {
    train_price_per_hour: f64,
    train_peak_ops: f64,
    inf_price_per_hour: f64,
    inf_peak_ops: f64,
}

impl Default for RawHardware {
    fn default() -> Self {
        let d = HardwareProfile::A100;
        RawHardware {
            train_price_per_hour: d.train_price_per_hour,
            train_peak_ops: d.train_peak_ops,
            inf_price_per_hour: d.inf_price_per_hour,
            inf_peak_ops: d.inf_peak_ops,
        }
    }
}

impl TryFrom<RawHardware> for HardwareProfile {
    type Error = Error;

    fn try_from(r: RawHardware) -> Result<Self> {
        HardwareProfile::new(
            r.train_price_per_hour,
            r.train_peak_ops,
            r.inf_price_per_hour,
            r.inf_peak_ops,
        )
    }
}

impl HardwareProfile {
    /// Training on A100-80GB (1.50 USD/h, 3.12e14 BF16 ops/s); inference on
    /// A100-40GB after INT8 quantization (1.10 USD/h, 6.24e14 ops/s).
    pub const A100: HardwareProfile = HardwareProfile {
        train_price_per_hour: 1.50,
        train_peak_ops: 3.12e14,
        inf_price_per_hour: 1.10,
        inf_peak_ops: 6.24e14,
    };

    pub fn new(
        train_price_per_hour: f64,
        train_peak_ops: f64,
        inf_price_per_hour: f64,
        inf_peak_ops: f64,
    ) -> Result<Self> {
        positive("train_price_per_hour", train_price_per_hour)?;
        positive("train_peak_ops", train_peak_ops)?;
        positive("inf_price_per_hour", inf_price_per_hour)?;
        positive("inf_peak_ops", inf_peak_ops)?;
        Ok(HardwareProfile {
            train_price_per_hour,
            train_peak_ops,
            inf_price_per_hour,
            inf_peak_ops,
        })
    }

    pub fn train_cost_per_op(&self) -> f64 {
        cost_per_op(self.train_price_per_hour, self.train_peak_ops)
    }

    pub fn inf_cost_per_op(&self) -> f64 {
        cost_per_op(self.inf_price_per_hour, self.inf_peak_ops)
    }
}

impl Default for HardwareProfile {
    fn default() -> Self {
        Self::A100
    }
}

/// Model FLOPs utilization for training, prompt processing and generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMfu")]
pub struct MfuProfile {
    pub train_mfu: f64,
    pub input_mfu: f64,
    pub output_mfu: f64,
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawMfu {
    train_mfu: f64,
    input_mfu: f64,
    output_mfu: f64,
}

impl Default for RawMfu {
    fn default() -> Self {
        let d = MfuProfile::TYPICAL;
        RawMfu {
            train_mfu: d.train_mfu,
            input_mfu: d.input_mfu,
            output_mfu: d.output_mfu,
        }
    }
}

impl TryFrom<RawMfu> for MfuProfile {
    type Error = Error;

    fn try_from(r: RawMfu) -> Result<Self> {
        MfuProfile::new(r.train_mfu, r.input_mfu, r.output_mfu)
    }
}

impl MfuProfile {
    /// 50% for training and prompt processing, 1% for generation.
    pub const TYPICAL: MfuProfile = MfuProfile {
        train_mfu: 0.5,
        input_mfu: 0.5,
        output_mfu: 0.01,
    };

    pub fn new(train_mfu: f64, input_mfu: f64, output_mfu: f64) -> Result<Self> {
        utilization("train_mfu", train_mfu)?;
        utilization("input_mfu", input_mfu)?;
        utilization("output_mfu", output_mfu)?;
        Ok(MfuProfile {
            train_mfu,
            input_mfu,
            output_mfu,
        })
    }

    /// Full utilization everywhere; with equal per-op prices this turns the
    /// cost objective into a scaled FLOP count.
    pub fn ideal() -> Self {
        MfuProfile {
            train_mfu: 1.0,
            input_mfu: 1.0,
            output_mfu: 1.0,
        }
    }
}

impl Default for MfuProfile {
    fn default() -> Self {
        Self::TYPICAL
    }
}

/// Lifetime serving volume.
///
/// Raw token totals normalize to a single "request" carrying the totals, so
/// both ways of stating demand give identical objectives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDemand")]
pub struct InferenceDemand {
    pub requests: f64,
    pub input_tokens_per_request: f64,
    pub output_tokens_per_request: f64,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct RawDemand {
    requests: Option<f64>,
    input_tokens_per_request: Option<f64>,
    output_tokens_per_request: Option<f64>,
    total_input_tokens: Option<f64>,
    total_output_tokens: Option<f64>,
}

impl TryFrom<RawDemand> for InferenceDemand {
    type Error = Error;

    fn try_from(r: RawDemand) -> Result<Self> {
        let per_request = r.requests.is_some()
            || r.input_tokens_per_request.is_some()
            || r.output_tokens_per_request.is_some();
        let totals = r.total_input_tokens.is_some() || r.total_output_tokens.is_some();
        match (per_request, totals) {
            (true, true) => Err(Error::invalid(
                "demand",
                "give either requests with a per-request shape or token totals, not both",
            )),
            (false, true) => InferenceDemand::from_totals(
                r.total_input_tokens.unwrap_or(0.0),
                r.total_output_tokens.unwrap_or(0.0),
            ),
            _ => {
                let d = InferenceDemand::default();
                InferenceDemand::new(
                    r.requests.unwrap_or(d.requests),
                    r.input_tokens_per_request
                        .unwrap_or(d.input_tokens_per_request),
                    r.output_tokens_per_request
                        .unwrap_or(d.output_tokens_per_request),
                )
            }
        }
    }
}

impl InferenceDemand {
    pub const INPUT_TOKENS_PER_REQUEST: f64 = 70.0;
    pub const OUTPUT_TOKENS_PER_REQUEST: f64 = 215.0;

    pub fn new(
        requests: f64,
        input_tokens_per_request: f64,
        output_tokens_per_request: f64,
    ) -> Result<Self> {
        non_negative("requests", requests)?;
        non_negative("input_tokens_per_request", input_tokens_per_request)?;
        non_negative("output_tokens_per_request", output_tokens_per_request)?;
        Ok(InferenceDemand {
            requests,
            input_tokens_per_request,
            output_tokens_per_request,
        })
    }

    /// `requests` with the default 70-in / 215-out shape.
    pub fn with_requests(requests: f64) -> Result<Self> {
        Self::new(
            requests,
            Self::INPUT_TOKENS_PER_REQUEST,
            Self::OUTPUT_TOKENS_PER_REQUEST,
        )
    }

    pub fn from_totals(total_input: f64, total_output: f64) -> Result<Self> {
        Self::new(1.0, total_input, total_output)
    }

    pub fn total_input(&self) -> f64 {
        self.requests * self.input_tokens_per_request
    }

    pub fn total_output(&self) -> f64 {
        self.requests * self.output_tokens_per_request
    }

    pub fn total_tokens(&self) -> f64 {
        self.total_input() + self.total_output()
    }
}

impl Default for InferenceDemand {
    fn default() -> Self {
        InferenceDemand {
            requests: 0.0,
            input_tokens_per_request: Self::INPUT_TOKENS_PER_REQUEST,
            output_tokens_per_request: Self::OUTPUT_TOKENS_PER_REQUEST,
        }
    }
}

/// A cost configuration document: `{"hardware": .., "mfu": .., "demand": ..}`.
/// Missing sections (and missing fields inside a section) take the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostConfig {
    pub hardware: HardwareProfile,
    pub mfu: MfuProfile,
    pub demand: InferenceDemand,
}

impl CostConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid("config", e.to_string()))
    }

    pub fn objective(&self) -> TradeoffObjective {
        cost_objective(&self.hardware, &self.mfu, &self.demand)
    }
}

/// Weights `a = 6·C_tr/U_tr` and `b = 2·C_inf·(D_inp/U_inp + D_out/U_out)`.
pub fn cost_objective(
    hw: &HardwareProfile,
    mfu: &MfuProfile,
    demand: &InferenceDemand,
) -> TradeoffObjective {
    let per_token = 6.0 * hw.train_cost_per_op() / mfu.train_mfu;
    let per_param = 2.0
        * hw.inf_cost_per_op()
        * (demand.total_input() / mfu.input_mfu + demand.total_output() / mfu.output_mfu);
    TradeoffObjective::new(per_token, per_param).expect("validated profiles give valid weights")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub train_cost: f64,
    pub input_cost: f64,
    pub output_cost: f64,
    pub total_cost: f64,
}

pub fn evaluate_cost(
    cfg: &ModelConfig,
    hw: &HardwareProfile,
    mfu: &MfuProfile,
    demand: &InferenceDemand,
) -> CostBreakdown {
    let n = cfg.params();
    let c_inf = hw.inf_cost_per_op();
    let train_cost = 6.0 * n * cfg.train_tokens() * hw.train_cost_per_op() / mfu.train_mfu;
    let input_cost = 2.0 * n * demand.total_input() * c_inf / mfu.input_mfu;
    let output_cost = 2.0 * n * demand.total_output() * c_inf / mfu.output_mfu;
    CostBreakdown {
        train_cost,
        input_cost,
        output_cost,
        total_cost: train_cost + input_cost + output_cost,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostPlan {
    pub plan: OptimalPlan,
    pub cost: CostBreakdown,
    pub baseline_cost: CostBreakdown,
    pub savings_fraction: f64,
}

pub fn solve_cost_optimal(
    target_loss: f64,
    hw: &HardwareProfile,
    mfu: &MfuProfile,
    demand: &InferenceDemand,
    c: &Coefficients,
) -> Result<CostPlan> {
    let obj = cost_objective(hw, mfu, demand);
    let mut plan = solve_optimal(target_loss, &obj, c)?;
    let baseline_cost = evaluate_cost(&plan.baseline, hw, mfu, demand);
    let mut cost = evaluate_cost(&plan.optimal, hw, mfu, demand);

    // The breakdown sums in a different order than the objective; at ρ ≈ 0 the
    // two configurations tie and rounding may favour the baseline.
    if cost.total_cost > baseline_cost.total_cost {
        plan.optimal = plan.baseline;
        plan.objective_value = plan.baseline_objective;
        plan.reduction_fraction = 0.0;
        cost = baseline_cost;
    }

    Ok(CostPlan {
        plan,
        cost,
        baseline_cost,
        savings_fraction: 1.0 - cost.total_cost / baseline_cost.total_cost,
    })
}
