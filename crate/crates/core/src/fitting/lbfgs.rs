//! Limited-memory BFGS with a backtracking (Armijo) line search.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop once the infinity norm of the gradient drops below this.
    pub gradient_tolerance: f64,
    /// Sufficient-decrease constant of the Armijo condition.
    pub armijo: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            memory: 10,
            max_iterations: 500,
            gradient_tolerance: 1e-9,
            armijo: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Gradient norm below tolerance.
    Converged,
    /// No step along steepest descent decreases the objective: a stationary
    /// point to working precision.
    Stalled,
    MaxIterations,
    /// The objective or gradient was not finite at the start point.
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub termination: Termination,
}

impl Minimum {
    pub fn converged(&self) -> bool {
        matches!(
            self.termination,
            Termination::Converged | Termination::Stalled
        )
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct History {
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    memory: usize,
}

impl History {
    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy = dot(&s, &y);
        // Curvature condition; without a Wolfe search it is not guaranteed.
        if sy <= 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() || !sy.is_finite() {
            return;
        }
        if self.pairs.len() == self.memory {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
    }

    /// Two-loop recursion: returns `-H·g`.
    fn direction(&self, grad: &[f64]) -> Vec<f64> {
        let mut q = grad.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|qi| *qi *= gamma);
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        q.iter_mut().for_each(|qi| *qi = -*qi);
        q
    }
}

/// Minimizes `f`, which writes the gradient into its second argument and
/// returns the objective value.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &LbfgsOptions) -> Minimum
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let dim = x0.len();
    let mut x = x0.to_vec();
    let mut grad = vec![0.0; dim];
    let mut value = f(&x, &mut grad);
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Minimum {
            x,
            value,
            gradient_norm: f64::INFINITY,
            iterations: 0,
            termination: Termination::NonFinite,
        };
    }

    let mut history = History {
        pairs: VecDeque::with_capacity(opts.memory),
        memory: opts.memory.max(1),
    };
    let mut trial = vec![0.0; dim];
    let mut trial_grad = vec![0.0; dim];

    for iter in 0..opts.max_iterations {
        let gnorm = inf_norm(&grad);
        if gnorm < opts.gradient_tolerance {
            return Minimum {
                x,
                value,
                gradient_norm: gnorm,
                iterations: iter,
                termination: Termination::Converged,
            };
        }

        let mut dir = history.direction(&grad);
        let mut slope = dot(&grad, &dir);
        if slope.is_nan() || slope >= 0.0 {
            history.pairs.clear();
            dir = grad.iter().map(|g| -g).collect();
            slope = dot(&grad, &dir);
        }

        let mut accepted = false;
        let mut new_value = value;
        for attempt in 0..2 {
            let mut step = if history.pairs.is_empty() {
                (1.0 / dot(&grad, &grad).sqrt()).min(1.0)
            } else {
                1.0
            };
            for _ in 0..60 {
                trial
                    .iter_mut()
                    .zip(x.iter().zip(&dir))
                    .for_each(|(t, (xi, di))| *t = xi + step * di);
                let v = f(&trial, &mut trial_grad);
                if v.is_finite()
                    && v <= value + opts.armijo * step * slope
                    && trial_grad.iter().all(|g| g.is_finite())
                {
                    accepted = true;
                    new_value = v;
                    break;
                }
                step *= 0.5;
            }
            if accepted || attempt == 1 || history.pairs.is_empty() {
                break;
            }
            // Quasi-Newton direction failed; retry along steepest descent.
            history.pairs.clear();
            dir = grad.iter().map(|g| -g).collect();
            slope = dot(&grad, &dir);
        }

        if !accepted {
            return Minimum {
                x,
                value,
                gradient_norm: gnorm,
                iterations: iter,
                termination: Termination::Stalled,
            };
        }

        let s: Vec<f64> = trial.iter().zip(&x).map(|(t, xi)| t - xi).collect();
        let y: Vec<f64> = trial_grad.iter().zip(&grad).map(|(t, gi)| t - gi).collect();
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut grad, &mut trial_grad);
        value = new_value;
        history.push(s, y);
    }

    Minimum {
        gradient_norm: inf_norm(&grad),
        x,
        value,
        iterations: opts.max_iterations,
        termination: Termination::MaxIterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64], g: &mut [f64]) -> f64 {
        let (a, b) = (x[0], x[1]);
        g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
        g[1] = 200.0 * (b - a * a);
        (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
    }

    #[test]
    fn minimizes_rosenbrock() {
        let m = minimize(rosenbrock, &[-1.2, 1.0], &LbfgsOptions::default());
        assert_eq!(m.termination, Termination::Converged);
        assert!((m.x[0] - 1.0).abs() < 1e-8);
        assert!((m.x[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn minimizes_ill_conditioned_quadratic() {
        let scales = [1.0, 10.0, 1e3, 1e5, 1e-2];
        let f = |x: &[f64], g: &mut [f64]| {
            let mut v = 0.0;
            for i in 0..5 {
                let d = x[i] - i as f64;
                g[i] = scales[i] * d;
                v += 0.5 * scales[i] * d * d;
            }
            v
        };
        let m = minimize(f, &[5.0; 5], &LbfgsOptions::default());
        assert!(m.converged());
        for i in 0..5 {
            assert!((m.x[i] - i as f64).abs() < 1e-6, "{:?}", m.x);
        }
    }

    #[test]
    fn reports_non_finite_start() {
        let m = minimize(
            |_, g| {
                g[0] = 0.0;
                f64::NAN
            },
            &[0.0],
            &LbfgsOptions::default(),
        );
        assert_eq!(m.termination, Termination::NonFinite);
        assert!(!m.converged());
    }

    #[test]
    fn respects_iteration_cap() {
        let opts = LbfgsOptions {
            max_iterations: 3,
            ..Default::default()
        };
        let m = minimize(rosenbrock, &[-1.2, 1.0], &opts);
        assert_eq!(m.termination, Termination::MaxIterations);
        assert_eq!(m.iterations, 3);
    }
}
