//! Published reference configurations and their regeneration.
//!
//! Each row is keyed by the size of its Chinchilla model; the row's target
//! loss is that model's unrounded loss (the printed loss is rounded to two
//! decimals). Two printed cells are magnitude typos: they are kept verbatim
//! and carried with a correction, never edited in place.

use serde::{Deserialize, Serialize};

use crate::cost::{
    evaluate_cost, solve_cost_optimal, HardwareProfile, InferenceDemand, MfuProfile,
};
use crate::optimizer::{solve_optimal, TradeoffObjective};
use crate::scaling_law::{Coefficients, FlopAccount};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedRow {
    /// Inference tokens (compute table) or requests (cost table).
    pub demand: f64,
    pub printed_loss: f64,
    pub chinchilla_params: f64,
    pub chinchilla_tokens: f64,
    /// FLOPs or USD.
    pub chinchilla_total: f64,
    pub optimal_params: f64,
    pub optimal_tokens: f64,
    pub optimal_total: f64,
    /// Fractional reduction (FLOPs) or savings (USD).
    pub reduction: f64,
}

const fn row(v: [f64; 9]) -> PublishedRow {
    PublishedRow {
        demand: v[0],
        printed_loss: v[1],
        chinchilla_params: v[2],
        chinchilla_tokens: v[3],
        chinchilla_total: v[4],
        optimal_params: v[5],
        optimal_tokens: v[6],
        optimal_total: v[7],
        reduction: v[8],
    }
}

/// Compute-optimal vs. Chinchilla-style models, as printed.
pub const PUBLISHED_COMPUTE: [PublishedRow; 5] = [
    row([
        50e9, 2.53, 1e9, 27.4e9, 2.64e20, 6.33e6, 46.8e9, 2.41e20, 0.091,
    ]),
    row([
        200e9, 2.13, 7e9, 276e9, 1.44e22, 5.4e9, 367e9, 1.40e22, 0.026,
    ]),
    row([
        1e12, 2.05, 13e9, 577e9, 7.10e22, 8.32e9, 967e9, 6.49e22, 0.085,
    ]),
    row([
        5e12, 1.96, 30e9, 1.56e12, 5.80e23, 16.4e9, 3.27e12, 4.86e23, 0.16,
    ]),
    row([
        10e12, 1.89, 70e9, 4.26e12, 3.19e24, 41.6e9, 7.92e12, 2.81e24, 0.12,
    ]),
];

/// Cost-optimal vs. Chinchilla-style models, as printed (USD).
pub const PUBLISHED_COST: [PublishedRow; 5] = [
    row([175e6, 2.53, 1e9, 27.4e9, 3.77e3, 327e6, 152e9, 1.89e3, 0.50]),
    row([702e6, 2.13, 7e9, 276e9, 124e3, 2.90e9, 929e9, 81.8e3, 0.34]),
    row([3.51e9, 2.05, 13e9, 577e9, 987e3, 430e9, 3.1e12, 500e3, 0.49]),
    row([
        17.5e9, 1.96, 30e9, 1.56e12, 10.8e6, 8.58e9, 12.1e12, 4.52e6, 0.58,
    ]),
    row([
        35.1e9, 1.89, 70e9, 4.26e12, 51.5e6, 21.5e9, 27e12, 23.8e6, 0.54,
    ]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Table {
    Compute,
    Cost,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correction {
    pub table: Table,
    pub row: usize,
    pub column: Column,
    pub printed: f64,
    pub corrected: f64,
    pub note: &'static str,
}

pub const CORRECTIONS: [Correction; 2] = [
    Correction {
        table: Table::Compute,
        row: 0,
        column: Column::OptimalParams,
        printed: 6.33e6,
        corrected: 6.33e8,
        note: "typo: printed 6.33M; the row's own FLOP total requires ~633M",
    },
    Correction {
        table: Table::Cost,
        row: 2,
        column: Column::OptimalParams,
        printed: 430e9,
        corrected: 4.30e9,
        note: "typo: printed 430B against a 13B baseline; ~4.30B",
    },
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    ChinchillaParams,
    ChinchillaTokens,
    ChinchillaTotal,
    OptimalParams,
    OptimalTokens,
    OptimalTotal,
    Reduction,
}

impl Column {
    pub const ALL: [Column; 7] = [
        Column::ChinchillaParams,
        Column::ChinchillaTokens,
        Column::ChinchillaTotal,
        Column::OptimalParams,
        Column::OptimalTokens,
        Column::OptimalTotal,
        Column::Reduction,
    ];

    fn published(self, row: &PublishedRow) -> f64 {
        match self {
            Column::ChinchillaParams => row.chinchilla_params,
            Column::ChinchillaTokens => row.chinchilla_tokens,
            Column::ChinchillaTotal => row.chinchilla_total,
            Column::OptimalParams => row.optimal_params,
            Column::OptimalTokens => row.optimal_tokens,
            Column::OptimalTotal => row.optimal_total,
            Column::Reduction => row.reduction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellComparison {
    pub column: Column,
    pub printed: f64,
    /// Printed value, or its correction when the printed cell is a typo.
    pub reference: f64,
    pub computed: f64,
    /// Relative deviation from `reference`; for the reduction column, the
    /// difference in fractional points.
    pub deviation: f64,
    pub annotation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegeneratedRow {
    pub demand: f64,
    pub printed_loss: f64,
    pub target_loss: f64,
    pub cells: Vec<CellComparison>,
}

impl RegeneratedRow {
    pub fn cell(&self, column: Column) -> &CellComparison {
        self.cells
            .iter()
            .find(|c| c.column == column)
            .expect("every column is regenerated")
    }
}

fn compare(
    table: Table,
    index: usize,
    row: &PublishedRow,
    computed: [f64; 7],
) -> Vec<CellComparison> {
    Column::ALL
        .iter()
        .zip(computed)
        .map(|(&column, computed)| {
            let printed = column.published(row);
            let correction = CORRECTIONS
                .iter()
                .find(|c| c.table == table && c.row == index && c.column == column);
            let reference = correction.map_or(printed, |c| c.corrected);
            let deviation = if column == Column::Reduction {
                computed - reference
            } else {
                (computed - reference) / reference
            };
            CellComparison {
                column,
                printed,
                reference,
                computed,
                deviation,
                annotation: correction.map(|c| c.note.to_string()),
            }
        })
        .collect()
}

/// Recomputes every compute-table row from the loss law.
pub fn regenerate_compute(c: &Coefficients) -> Result<Vec<RegeneratedRow>> {
    PUBLISHED_COMPUTE
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let target_loss = c.loss_for_chinchilla_params(row.chinchilla_params)?;
            let plan = solve_optimal(target_loss, &TradeoffObjective::compute(row.demand)?, c)?;
            let base_flops = FlopAccount::new(&plan.baseline, row.demand)?.total_flops;
            let opt_flops = FlopAccount::new(&plan.optimal, row.demand)?.total_flops;
            let computed = [
                plan.baseline.params(),
                plan.baseline.train_tokens(),
                base_flops,
                plan.optimal.params(),
                plan.optimal.train_tokens(),
                opt_flops,
                1.0 - opt_flops / base_flops,
            ];
            Ok(RegeneratedRow {
                demand: row.demand,
                printed_loss: row.printed_loss,
                target_loss,
                cells: compare(Table::Compute, i, row, computed),
            })
        })
        .collect()
}

/// Recomputes every cost-table row. `shape` supplies the per-request token
/// counts; its request count is replaced by each row's.
pub fn regenerate_cost(
    c: &Coefficients,
    hw: &HardwareProfile,
    mfu: &MfuProfile,
    shape: &InferenceDemand,
) -> Result<Vec<RegeneratedRow>> {
    PUBLISHED_COST
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let target_loss = c.loss_for_chinchilla_params(row.chinchilla_params)?;
            let demand = InferenceDemand::new(
                row.demand,
                shape.input_tokens_per_request,
                shape.output_tokens_per_request,
            )?;
            let plan = solve_cost_optimal(target_loss, hw, mfu, &demand, c)?;
            let base = evaluate_cost(&plan.plan.baseline, hw, mfu, &demand);
            let computed = [
                plan.plan.baseline.params(),
                plan.plan.baseline.train_tokens(),
                base.total_cost,
                plan.plan.optimal.params(),
                plan.plan.optimal.train_tokens(),
                plan.cost.total_cost,
                plan.savings_fraction,
            ];
            Ok(RegeneratedRow {
                demand: row.demand,
                printed_loss: row.printed_loss,
                target_loss,
                cells: compare(Table::Cost, i, row, computed),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn printed_losses_are_roundings_of_the_row_losses() {
        let c = Coefficients::chinchilla();
        for row in PUBLISHED_COMPUTE.iter().chain(&PUBLISHED_COST) {
            let l = c.loss_for_chinchilla_params(row.chinchilla_params).unwrap();
            assert!(
                (l - row.printed_loss).abs() < 0.005,
                "{l} vs {}",
                row.printed_loss
            );
        }
    }

    #[test]
    fn typo_cells_are_annotated() {
        let c = Coefficients::chinchilla();
        let compute = regenerate_compute(&c).unwrap();
        let cell = compute[0].cell(Column::OptimalParams);
        assert_eq!(cell.printed, 6.33e6);
        assert_eq!(cell.reference, 6.33e8);
        assert!(cell.annotation.as_deref().unwrap().starts_with("typo"));
        // Against the printed value the deviation would be ~100x.
        assert!((cell.computed / cell.printed) > 90.0);
        assert!(cell.deviation.abs() < 0.02);

        let cost = regenerate_cost(
            &c,
            &HardwareProfile::default(),
            &MfuProfile::default(),
            &InferenceDemand::default(),
        )
        .unwrap();
        let cell = cost[2].cell(Column::OptimalParams);
        assert_eq!(cell.reference, 4.30e9);
        assert!(cell.annotation.is_some());
        assert!(cell.deviation.abs() < 0.10);

        let annotated = compute
            .iter()
            .chain(&cost)
            .flat_map(|r| &r.cells)
            .filter(|c| c.annotation.is_some())
            .count();
        assert_eq!(annotated, 2);
    }

    #[test]
    fn compute_table_regenerates_within_two_percent() {
        let rows = regenerate_compute(&Coefficients::chinchilla()).unwrap();
        for row in rows {
            for cell in &row.cells {
                let tol = if cell.column == Column::Reduction {
                    0.01
                } else {
                    0.02
                };
                assert!(cell.deviation.abs() < tol, "{:?}", cell);
            }
        }
    }
}
