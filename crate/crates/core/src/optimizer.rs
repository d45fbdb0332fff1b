//! Inference-adjusted optimum on a fixed-loss contour.
//!
//! Both the FLOP problem (`6·N·D + 2·N·D_inf`) and the dollar problem share the
//! shape `a·N·D + b·N`, so one solver handles both through
//! [`TradeoffObjective`]. Eliminating the Lagrange multiplier leaves a scalar
//! equation in `D`:
//!
//! ```text
//! g(D) = (E − ℓ) + (βB/α + B)·D^(−β) + ρ·(βB/α)·D^(−β−1),   ρ = b / a
//! ```
//!
//! `g` is strictly decreasing with a single positive root. `N` then follows
//! from `A·N^(−α) = (βB/α)·(D^(−β) + ρ·D^(−β−1))`.

use serde::{Deserialize, Serialize};

use crate::scaling_law::{Coefficients, ModelConfig};
use crate::{Error, Result};

pub const MAX_ITERATIONS: usize = 200;
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
const STEP_TOLERANCE: f64 = 1e-12;
const BRACKET_FACTOR: f64 = 4.0;

/// Objective `a·N·D + b·N`: `a` per parameter per training token, `b` per
/// parameter over the model's serving lifetime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffObjective {
    per_token_weight: f64,
    per_param_weight: f64,
}

impl TradeoffObjective {
    pub fn new(per_token_weight: f64, per_param_weight: f64) -> Result<Self> {
        if !(per_token_weight.is_finite() && per_token_weight > 0.0) {
            return Err(Error::invalid(
                "per_token_weight",
                format!("must be finite and > 0, got {per_token_weight}"),
            ));
        }
        if !(per_param_weight.is_finite() && per_param_weight >= 0.0) {
            return Err(Error::invalid(
                "per_param_weight",
                format!("must be finite and >= 0, got {per_param_weight}"),
            ));
        }
        Ok(TradeoffObjective {
            per_token_weight,
            per_param_weight,
        })
    }

    /// Total FLOPs: 6 per parameter per training token, 2 per parameter per
    /// inference token.
    pub fn compute(inference_tokens: f64) -> Result<Self> {
        if !(inference_tokens.is_finite() && inference_tokens >= 0.0) {
            return Err(Error::invalid(
                "inference_tokens",
                format!("must be finite and >= 0, got {inference_tokens}"),
            ));
        }
        Self::new(6.0, 2.0 * inference_tokens)
    }

    pub fn per_token_weight(&self) -> f64 {
        self.per_token_weight
    }

    pub fn per_param_weight(&self) -> f64 {
        self.per_param_weight
    }

    pub fn rho(&self) -> f64 {
        self.per_param_weight / self.per_token_weight
    }

    pub fn evaluate(&self, cfg: &ModelConfig) -> f64 {
        self.evaluate_at(cfg.params(), cfg.train_tokens())
    }

    pub fn evaluate_at(&self, params: f64, tokens: f64) -> f64 {
        self.per_token_weight * params * tokens + self.per_param_weight * params
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalPlan {
    pub optimal: ModelConfig,
    pub target_loss: f64,
    pub objective_value: f64,
    pub baseline: ModelConfig,
    pub baseline_objective: f64,
    pub reduction_fraction: f64,
    /// Value of the root equation at `optimal.train_tokens()`.
    pub residual: f64,
}

impl OptimalPlan {
    pub fn params_ratio(&self) -> f64 {
        self.optimal.params() / self.baseline.params()
    }

    pub fn tokens_ratio(&self) -> f64 {
        self.optimal.train_tokens() / self.baseline.train_tokens()
    }

    pub fn objective_ratio(&self) -> f64 {
        self.objective_value / self.baseline_objective
    }
}

/// The scalar root equation left after eliminating `N` and the multiplier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagrangeRoot {
    offset: f64,
    leading: f64,
    tail: f64,
    beta: f64,
}

impl LagrangeRoot {
    pub fn new(target_loss: f64, rho: f64, c: &Coefficients) -> Result<Self> {
        c.check_above_floor(target_loss)?;
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(Error::invalid(
                "rho",
                format!("must be finite and >= 0, got {rho}"),
            ));
        }
        let ratio = c.beta() * c.b() / c.alpha();
        Ok(LagrangeRoot {
            offset: c.e() - target_loss,
            leading: ratio + c.b(),
            tail: rho * ratio,
            beta: c.beta(),
        })
    }

    /// `E − ℓ`, the limit of `g` as `D → ∞`.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Coefficient of `D^(−β)`.
    pub fn leading_coefficient(&self) -> f64 {
        self.leading
    }

    /// Coefficient of `D^(−β−1)`.
    pub fn tail_coefficient(&self) -> f64 {
        self.tail
    }

    pub fn value(&self, tokens: f64) -> f64 {
        let lead = tokens.powf(-self.beta);
        self.offset + self.leading * lead + self.tail * lead / tokens
    }

    pub fn derivative(&self, tokens: f64) -> f64 {
        let lead = tokens.powf(-self.beta - 1.0);
        -self.beta * self.leading * lead - (self.beta + 1.0) * self.tail * lead / tokens
    }
}

/// Builds `g` and `g′` for a target loss and trade-off ratio.
pub fn lagrange_root_fn(target_loss: f64, rho: f64, c: &Coefficients) -> Result<LagrangeRoot> {
    LagrangeRoot::new(target_loss, rho, c)
}

/// Finds the positive root of a function with one sign change on `(0, ∞)`.
///
/// Works in `x = ln D`. The bracket is grown geometrically from `hint` by a
/// factor of 4 until the sign flips, then Newton steps are taken and replaced
/// by bisection whenever they leave the bracket. Stops once
/// `|g(D)| ≤ residual_tol` and the last step moved `D` by less than `1e−12`
/// relative.
pub fn solve_root<G, Gp>(g: G, g_prime: Gp, hint: f64, residual_tol: f64) -> Result<f64>
where
    G: Fn(f64) -> f64,
    Gp: Fn(f64) -> f64,
{
    if !(hint.is_finite() && hint > 0.0) {
        return Err(Error::invalid(
            "hint",
            format!("must be finite and > 0, got {hint}"),
        ));
    }
    let h = |x: f64| g(x.exp());

    let x0 = hint.ln();
    let f0 = h(x0);
    if f0 == 0.0 {
        return Ok(hint);
    }
    if !f0.is_finite() {
        return Err(Error::NoSignChange { steps: 0 });
    }

    // Grow toward the side where the sign should flip; for a decreasing g a
    // positive value means the root lies at larger D.
    let direction = if f0 > 0.0 { 1.0 } else { -1.0 };
    let step = direction * BRACKET_FACTOR.ln();
    let (mut near, mut f_near) = (x0, f0);
    let mut far = None;
    for _ in 0..MAX_ITERATIONS {
        let x = near + step;
        let fx = h(x);
        if !fx.is_finite() {
            break;
        }
        if fx == 0.0 {
            return Ok(x.exp());
        }
        if fx.signum() != f_near.signum() {
            far = Some((x, fx));
            break;
        }
        near = x;
        f_near = fx;
    }
    let Some((far, f_far)) = far else {
        return Err(Error::NoSignChange {
            steps: MAX_ITERATIONS,
        });
    };

    let (mut lo, mut hi, f_lo_sign) = if near < far {
        (near, far, f_near.signum())
    } else {
        (far, near, f_far.signum())
    };

    let mut x = near;
    let mut fx = f_near;
    for _ in 0..MAX_ITERATIONS {
        let d = x.exp();
        let slope = g_prime(d) * d;
        let newton = x - fx / slope;
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let moved = (next - x).abs();
        x = next;
        fx = h(x);
        if fx == 0.0 {
            return Ok(x.exp());
        }
        if fx.signum() == f_lo_sign {
            lo = x;
        } else {
            hi = x;
        }
        if fx.abs() <= residual_tol && (moved < STEP_TOLERANCE || hi - lo < STEP_TOLERANCE) {
            return Ok(x.exp());
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
    })
}

/// Parameter count paired with `root_tokens` on the optimal path.
pub fn recover_params(root_tokens: f64, rho: f64, c: &Coefficients) -> Result<f64> {
    if !(root_tokens.is_finite() && root_tokens > 0.0) {
        return Err(Error::invalid(
            "root_tokens",
            format!("must be finite and > 0, got {root_tokens}"),
        ));
    }
    let lead = root_tokens.powf(-c.beta());
    let params_term = c.beta() * c.b() / c.alpha() * (lead + rho * lead / root_tokens);
    Ok((c.a() / params_term).powf(1.0 / c.alpha()))
}

/// Minimizes `obj` subject to `loss(N, D) = target_loss`.
pub fn solve_optimal(
    target_loss: f64,
    obj: &TradeoffObjective,
    c: &Coefficients,
) -> Result<OptimalPlan> {
    let baseline = c.chinchilla_baseline(target_loss)?;
    let baseline_objective = obj.evaluate(&baseline);
    let rho = obj.rho();
    if rho == 0.0 {
        // Training-only objective: the closed form is the optimum.
        let root = LagrangeRoot::new(target_loss, 0.0, c)?;
        return Ok(OptimalPlan {
            optimal: baseline,
            target_loss,
            objective_value: baseline_objective,
            baseline,
            baseline_objective,
            reduction_fraction: 0.0,
            residual: root.value(baseline.train_tokens()),
        });
    }
    let root = LagrangeRoot::new(target_loss, rho, c)?;

    let tol = RESIDUAL_TOLERANCE * root.offset().abs();
    let tokens = solve_root(
        |d| root.value(d),
        |d| root.derivative(d),
        baseline.train_tokens(),
        tol,
    )?;
    let params = recover_params(tokens, rho, c)?;
    let mut optimal = ModelConfig::new(params, tokens)?;
    let mut objective_value = obj.evaluate(&optimal);

    // For ρ → 0 the root coincides with the baseline up to rounding; keep the
    // cheaper of the two feasible points.
    if objective_value > baseline_objective {
        optimal = baseline;
        objective_value = baseline_objective;
    }

    Ok(OptimalPlan {
        optimal,
        target_loss,
        objective_value,
        baseline,
        baseline_objective,
        reduction_fraction: 1.0 - objective_value / baseline_objective,
        residual: root.value(optimal.train_tokens()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn chin() -> Coefficients {
        Coefficients::chinchilla()
    }

    /// Brute-force scan of the contour: for a fine log grid of N, take D from
    /// the loss constraint and keep the cheapest point.
    fn contour_scan(l: f64, obj: &TradeoffObjective, c: &Coefficients) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        let steps = 200_000;
        for i in 0..=steps {
            let n = (17.0 + 14.0 * i as f64 / steps as f64).exp();
            let Ok(d) = c.tokens_for_loss(n, l) else {
                continue;
            };
            let v = obj.evaluate_at(n, d);
            if v < best.0 {
                best = (v, n, d);
            }
        }
        (best.1, best.2)
    }

    #[test]
    fn objective_construction() {
        let obj = TradeoffObjective::compute(3e12).unwrap();
        assert_eq!(obj.per_token_weight(), 6.0);
        assert_eq!(obj.per_param_weight(), 6e12);
        assert_eq!(obj.rho(), 1e12);
        assert!(TradeoffObjective::new(0.0, 1.0).is_err());
        assert!(TradeoffObjective::new(1.0, -1.0).is_err());
        assert!(TradeoffObjective::compute(f64::NAN).is_err());
    }

    #[test]
    fn root_equation_coefficients() {
        let g = lagrange_root_fn(2.53, 50e9 / 3.0, &chin()).unwrap();
        assert!((g.leading_coefficient() - 756.6).abs() < 0.5);
        assert!(g.value(46.8e9).abs() < 0.005);
        assert!(matches!(
            lagrange_root_fn(1.69, 1.0, &chin()),
            Err(Error::UnachievableLoss { .. })
        ));
    }

    #[test]
    fn root_equation_derivative_matches_finite_differences() {
        let g = lagrange_root_fn(2.1, 1e11, &chin()).unwrap();
        for d in [1e9, 3e10, 5e11, 2e13] {
            let h = d * 1e-6;
            let fd = (g.value(d + h) - g.value(d - h)) / (2.0 * h);
            assert!(rel(g.derivative(d), fd) < 1e-6, "{d}");
        }
    }

    #[test]
    fn zero_rho_root_is_the_closed_form_baseline() {
        let c = chin();
        for l in [1.8, 2.0, 2.53, 3.2] {
            let g = lagrange_root_fn(l, 0.0, &c).unwrap();
            let base = c.chinchilla_baseline(l).unwrap();
            let root = solve_root(|d| g.value(d), |d| g.derivative(d), 1e9, 1e-14).unwrap();
            assert!(rel(root, base.train_tokens()) < 1e-6);
        }
    }

    #[test]
    fn solve_root_linear() {
        let root = solve_root(|d| 2.0 - d, |_| -1.0, 1.0, 1e-12).unwrap();
        assert!((root - 2.0).abs() < 1e-10);
        // Also from above the root.
        let root = solve_root(|d| 2.0 - d, |_| -1.0, 1e6, 1e-12).unwrap();
        assert!((root - 2.0).abs() < 1e-10);
    }

    #[test]
    fn solve_root_reproduces_published_tokens() {
        let c = chin();
        let cases = [(70e9, 1e13, 7.92e12), (30e9, 5e12, 3.27e12)];
        for (size, inf, expected) in cases {
            let l = c.loss_for_chinchilla_params(size).unwrap();
            let g = lagrange_root_fn(l, inf / 3.0, &c).unwrap();
            let tol = 1e-10 * g.offset().abs();
            let root = solve_root(|d| g.value(d), |d| g.derivative(d), 1e11, tol).unwrap();
            assert!(rel(root, expected) < 0.01, "{root} vs {expected}");
            assert!(g.value(root).abs() < tol);
        }
    }

    #[test]
    fn solve_root_errors() {
        assert!(matches!(
            solve_root(|_| 1.0, |_| 0.0, 1.0, 1e-12),
            Err(Error::NoSignChange { .. })
        ));
        assert!(solve_root(|d| 2.0 - d, |_| -1.0, 0.0, 1e-12).is_err());
        // √2 has no exact f64 representation, so a zero tolerance is never met.
        assert!(matches!(
            solve_root(|d| 2.0 - d * d, |d| -2.0 * d, 1.0, 0.0),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn solve_root_is_deterministic() {
        let g = lagrange_root_fn(1.95, 1e12, &chin()).unwrap();
        let a = solve_root(|d| g.value(d), |d| g.derivative(d), 1e10, 1e-12).unwrap();
        let b = solve_root(|d| g.value(d), |d| g.derivative(d), 1e10, 1e-12).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn recover_params_examples() {
        let c = chin();
        let n = recover_params(46.8e9, 50e9 / 3.0, &c).unwrap();
        assert!(rel(n, 6.33e8) < 0.02, "{n}");
        let n = recover_params(7.92e12, 1e13 / 3.0, &c).unwrap();
        assert!(rel(n, 41.6e9) < 0.02, "{n}");
        let base = c.chinchilla_baseline(2.2).unwrap();
        let n = recover_params(base.train_tokens(), 0.0, &c).unwrap();
        assert!(rel(n, base.params()) < 1e-9);
    }

    #[test]
    fn brute_force_contour_confirms_smallest_published_row() {
        // The published optimal size for the 1B row is printed as 6.33M; the
        // contour minimum sits near 633M.
        let c = chin();
        let obj = TradeoffObjective::compute(50e9).unwrap();
        let (n, d) = contour_scan(2.53, &obj, &c);
        assert!(rel(n, 6.33e8) < 0.02, "{n}");
        assert!(rel(d, 46.8e9) < 0.02, "{d}");
        let plan = solve_optimal(2.53, &obj, &c).unwrap();
        assert!(rel(plan.optimal.params(), n) < 1e-3);
    }

    #[test]
    fn solve_optimal_examples() {
        let c = chin();
        let plan = solve_optimal(1.89, &TradeoffObjective::compute(1e13).unwrap(), &c).unwrap();
        assert!((plan.reduction_fraction - 0.12).abs() < 0.01);

        let plan = solve_optimal(1.96, &TradeoffObjective::compute(5e12).unwrap(), &c).unwrap();
        assert!((plan.reduction_fraction - 0.16).abs() < 0.01);
        // Keyed by the 30B Chinchilla row's unrounded loss.
        let l30 = c.loss_for_chinchilla_params(30e9).unwrap();
        let plan = solve_optimal(l30, &TradeoffObjective::compute(5e12).unwrap(), &c).unwrap();
        assert!(rel(plan.optimal.params(), 16.4e9) < 0.02);
        assert!(rel(plan.optimal.train_tokens(), 3.27e12) < 0.02);
        assert!((plan.reduction_fraction - 0.16).abs() < 0.01);

        let plan = solve_optimal(2.13, &TradeoffObjective::compute(0.0).unwrap(), &c).unwrap();
        assert_eq!(plan.reduction_fraction, 0.0);
        assert!(rel(plan.optimal.params(), plan.baseline.params()) < 1e-9);
        assert!(rel(plan.optimal.train_tokens(), plan.baseline.train_tokens()) < 1e-9);
    }

    #[test]
    fn solve_optimal_rejects_unreachable_loss() {
        let obj = TradeoffObjective::compute(1e12).unwrap();
        assert!(matches!(
            solve_optimal(1.5, &obj, &chin()),
            Err(Error::UnachievableLoss { .. })
        ));
    }

    #[test]
    fn plan_is_deterministic() {
        let obj = TradeoffObjective::compute(3e12).unwrap();
        let a = solve_optimal(2.0, &obj, &chin()).unwrap();
        let b = solve_optimal(2.0, &obj, &chin()).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    proptest! {
        #[test]
        fn solution_invariants(l in 1.75f64..4.0, ln_inf in 15.0f64..36.0) {
            let c = chin();
            let obj = TradeoffObjective::compute(ln_inf.exp()).unwrap();
            let plan = solve_optimal(l, &obj, &c).unwrap();
            let (n, d) = (plan.optimal.params(), plan.optimal.train_tokens());
            let rho = obj.rho();

            prop_assert!(plan.residual.abs() < 1e-10 * (c.e() - l).abs());
            let lhs = c.params_term(n);
            let rhs = c.beta() * c.b() / c.alpha() * (d.powf(-c.beta()) + rho * d.powf(-c.beta() - 1.0));
            prop_assert!(rel(lhs, rhs) < 1e-6);
            prop_assert!(rel(c.loss(&plan.optimal), l) < 1e-8);
            prop_assert!(plan.objective_value <= plan.baseline_objective);
            prop_assert!(plan.reduction_fraction >= 0.0 && plan.reduction_fraction < 1.0);
            prop_assert_eq!(plan.reduction_fraction, 1.0 - plan.objective_value / plan.baseline_objective);
        }
    }
}
