use super::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SIZES: [f64; 5] = [1e8, 3e8, 1e9, 3e9, 1e10];
const RATIOS: [f64; 10] = [
    5.0, 10.0, 20.0, 40.0, 80.0, 160.0, 320.0, 640.0, 1280.0, 2560.0,
];

fn chinchilla_runs() -> Vec<TrainingRun> {
    synthetic_runs(&Coefficients::chinchilla(), &SIZES, &RATIOS)
}

/// Central differences on the objective.
fn fd_gradient(p: &FitParams, runs: &[TrainingRun], delta: f64) -> [f64; 5] {
    let h = 1e-6;
    let base = p.to_array();
    let mut out = [0.0; 5];
    for i in 0..5 {
        let mut up = base;
        let mut down = base;
        up[i] += h;
        down[i] -= h;
        out[i] = (objective(&FitParams::from_slice(&up), runs, delta)
            - objective(&FitParams::from_slice(&down), runs, delta))
            / (2.0 * h);
    }
    out
}

fn norm_rel_err(a: &[f64; 5], b: &[f64; 5]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let scale = b.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    diff / scale
}

#[test]
fn lse3_examples() {
    assert!((lse3(0.0, 0.0, 0.0) - 3f64.ln()).abs() < 1e-15);
    assert!((lse3(1000.0, 0.0, 0.0) - 1000.0).abs() < 1e-9);
    assert!((lse3(1f64.ln(), 2f64.ln(), 3f64.ln()) - 6f64.ln()).abs() < 1e-12);
    assert!(lse3(700.0, 699.0, -700.0).is_finite());
    assert!(lse3(-700.0, -700.0, -700.0).is_finite());
}

#[test]
fn huber_examples() {
    assert_eq!(huber(1e-3, 0.0), 0.0);
    assert!((huber(1e-3, 1e-3) - 5e-7).abs() < 1e-20);
    assert!((huber(1e-3, 1.0) - 9.995e-4).abs() < 1e-15);
    assert_eq!(huber(1e-3, -1.0), huber(1e-3, 1.0));
    // Value and slope are continuous at the threshold.
    let d = 1e-3;
    let eps = 1e-12;
    assert!((huber(d, d - eps) - huber(d, d + eps)).abs() < 1e-14);
    assert!((huber_derivative(d, d - eps) - huber_derivative(d, d + eps)).abs() < 1e-11);
}

#[test]
fn objective_is_zero_at_the_generating_parameters() {
    let c = Coefficients::chinchilla();
    let p = FitParams::from_coefficients(&c);
    assert!(objective(&p, &chinchilla_runs(), 1e-3) < 1e-18);
}

#[test]
fn objective_single_run_hand_check() {
    let e = std::f64::consts::E;
    let run = TrainingRun::new(e, e, e).unwrap();
    let p = FitParams {
        a: 0.0,
        b: 0.0,
        e: 1.0,
        alpha: 1.0,
        beta: 1.0,
    };
    // ln(e^-1 + e^-1 + e^1) − 1 = ln(1 + 2e^-2)
    let residual = (2.0 * (-1.0f64).exp() + e).ln() - 1.0;
    assert!((residual - (1.0 + 2.0 * (-2.0f64).exp()).ln()).abs() < 1e-15);
    let value = objective(&p, &[run], 1e-3);
    assert!((value - huber(1e-3, residual)).abs() < 1e-18);
    assert!((value - 1e-3 * (residual - 5e-4)).abs() < 1e-15);
}

#[test]
fn dominant_floor_term_zeroes_residuals() {
    let runs = [
        TrainingRun::new(1e9, 2e10, 2.5).unwrap(),
        TrainingRun::new(1e9, 2e10, 2.5).unwrap(),
    ];
    let p = FitParams {
        a: 2.5f64.ln() - 40.0 + 1e9f64.ln() * 0.3,
        b: 2.5f64.ln() - 40.0 + 2e10f64.ln() * 0.3,
        e: 2.5f64.ln(),
        alpha: 0.3,
        beta: 0.3,
    };
    assert!(objective(&p, &runs, 1e-3) < 1e-30);
}

#[test]
fn objective_stays_finite_for_extreme_inputs() {
    let runs = chinchilla_runs();
    for shift in [-600.0, 600.0] {
        let p = FitParams {
            a: shift,
            b: shift,
            e: shift,
            alpha: 0.3,
            beta: 0.3,
        };
        assert!(objective(&p, &runs, 1e-3).is_finite());
        assert!(objective_gradient(&p, &runs, 1e-3)
            .iter()
            .all(|g| g.is_finite()));
    }
}

#[test]
fn gradient_vanishes_at_exact_fit() {
    let p = FitParams::from_coefficients(&Coefficients::chinchilla());
    let g = objective_gradient(&p, &chinchilla_runs(), 1e-3);
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(norm < 1e-12, "{norm}");
}

#[test]
fn gradient_single_run_floor_component() {
    let run = TrainingRun::new(2e9, 5e10, 2.4).unwrap();
    let p = FitParams {
        a: 5.0,
        b: 5.5,
        e: 0.4,
        alpha: 0.3,
        beta: 0.25,
    };
    let u = [
        p.a - p.alpha * run.params.ln(),
        p.b - p.beta * run.train_tokens.ln(),
        p.e,
    ];
    let total: f64 = u.iter().map(|x| x.exp()).sum();
    let weight_e = u[2].exp() / total;
    let residual = total.ln() - run.final_loss.ln();
    let g = objective_gradient(&p, &[run], 1e-3);
    assert!((g[2] - huber_derivative(1e-3, residual) * weight_e).abs() < 1e-15);
}

#[test]
fn gradient_matches_finite_differences_on_random_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..100 {
        let p = FitParams {
            a: rng.random_range(1.0..7.0),
            b: rng.random_range(1.0..7.0),
            e: rng.random_range(-1.0..1.0),
            alpha: rng.random_range(0.05..0.8),
            beta: rng.random_range(0.05..0.8),
        };
        let c = p.to_coefficients().unwrap();
        let runs: Vec<TrainingRun> = (0..10)
            .map(|_| {
                let n = 10f64.powf(rng.random_range(7.0..11.0));
                let d = n * 10f64.powf(rng.random_range(0.5..3.5));
                // Half the cases sit close to the law (quadratic Huber
                // branch), half far from it (linear branch).
                let loss = if case % 2 == 0 {
                    c.loss_at(n, d) * (1.0 + rng.random_range(-5e-4..5e-4))
                } else {
                    rng.random_range(1.5..4.0)
                };
                TrainingRun::new(n, d, loss).unwrap()
            })
            .collect();
        let analytic = objective_gradient(&p, &runs, 1e-3);
        let numeric = fd_gradient(&p, &runs, 1e-3);
        let err = norm_rel_err(&analytic, &numeric);
        assert!(err < 1e-5, "case {case}: {err} {analytic:?} {numeric:?}");
    }
}

#[test]
fn filter_by_ratio_examples() {
    let runs: Vec<TrainingRun> = [10.0, 100.0, 250.0, 500.0]
        .iter()
        .map(|r| TrainingRun::new(1e9, 1e9 * r, 2.0).unwrap())
        .collect();
    assert_eq!(filter_by_ratio(&runs, f64::INFINITY), runs);
    assert_eq!(filter_by_ratio(&runs, 100.0), runs[..2].to_vec());

    let subsets: Vec<Vec<TrainingRun>> = SUBSET_THRESHOLDS
        .iter()
        .map(|t| filter_by_ratio(&runs, t.unwrap_or(f64::INFINITY)))
        .collect();
    assert_eq!(
        subsets.iter().map(Vec::len).collect::<Vec<_>>(),
        [2, 3, 4, 4]
    );
    for pair in subsets.windows(2) {
        assert!(pair[0].iter().all(|r| pair[1].contains(r)));
    }
}

#[test]
fn default_grid_has_432_starts() {
    let grid = FitConfig::default_grid();
    assert_eq!(grid.len(), 432);
    assert!(grid.iter().all(|p| p.to_coefficients().is_ok()));
}

#[test]
fn fit_recovers_noiseless_coefficients() {
    let runs = chinchilla_runs();
    let report = fit(&runs, &FitConfig::default()).unwrap();
    let c = report.coefficients;
    assert!((c.alpha() - 0.336).abs() < 0.005, "{c:?}");
    assert!((c.beta() - 0.283).abs() < 0.005, "{c:?}");
    assert!((c.e() - 1.69).abs() < 0.01, "{c:?}");
    assert_eq!(report.runs_used, 50);
    let truth = FitParams::from_coefficients(&Coefficients::chinchilla());
    assert!(report.objective_value <= objective(&truth, &runs, 1e-3) + 1e-18);
}

#[test]
fn fit_is_permutation_invariant() {
    let mut runs = chinchilla_runs();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for r in runs.iter_mut() {
        r.final_loss *= 1.0 + rng.random_range(-0.01..0.01);
    }
    let config = FitConfig {
        grid: FitConfig::default_grid().into_iter().step_by(9).collect(),
        ..FitConfig::default()
    };
    let a = fit(&runs, &config).unwrap();
    runs.reverse();
    runs.swap(3, 17);
    let b = fit(&runs, &config).unwrap();
    assert_eq!(a, b);
}

#[test]
fn subset_fit_never_loses_to_full_fit_parameters() {
    let mut runs = chinchilla_runs();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for r in runs.iter_mut() {
        r.final_loss *= (0.01 * rng.random_range(-1.0..1.0f64)).exp();
    }
    let config = FitConfig::default();
    let full = fit(&runs, &config).unwrap();
    let subset = filter_by_ratio(&runs, 100.0);
    let sub = fit(&subset, &config).unwrap();
    assert!(sub.objective_value <= objective(&full.params, &subset, config.huber_delta) + 1e-15);
}

#[test]
fn fit_rejects_insufficient_data() {
    let runs: Vec<TrainingRun> = (1..=3)
        .map(|i| TrainingRun::new(1e9, 1e10 * i as f64, 2.5).unwrap())
        .collect();
    assert!(matches!(
        fit(&runs, &FitConfig::default()),
        Err(Error::InsufficientData(_))
    ));

    let one_size: Vec<TrainingRun> = (1..=8)
        .map(|i| TrainingRun::new(1e9, 1e10 * i as f64, 2.5).unwrap())
        .collect();
    assert!(matches!(
        fit(&one_size, &FitConfig::default()),
        Err(Error::InsufficientData(_))
    ));

    let bad = FitConfig {
        grid: vec![],
        ..FitConfig::default()
    };
    assert!(fit(&chinchilla_runs(), &bad).is_err());
}

#[test]
fn read_runs_csv_parses_and_reports_lines() {
    let text = "params,tokens,loss\n1e9,2.0e10,2.5\n 7000000000 , 1.4e11 , 2.1\n";
    let runs = read_runs_csv(text.as_bytes()).unwrap();
    assert_eq!(runs.len(), 2);
    assert_eq!(runs[1].params, 7e9);

    let text = "params,tokens,loss\n1e9,2e10,2.5\n1e9,-5,2.5\n";
    match read_runs_csv(text.as_bytes()) {
        Err(Error::Parse { line, reason }) => {
            assert_eq!(line, 3);
            assert!(reason.contains("tokens"), "{reason}");
        }
        other => panic!("{other:?}"),
    }

    let text = "params,tokens,loss\n1e9,abc,2.5\n";
    assert!(matches!(
        read_runs_csv(text.as_bytes()),
        Err(Error::Parse { line: 2, .. })
    ));

    let text = "n,d,l\n1,2,3\n";
    assert!(matches!(
        read_runs_csv(text.as_bytes()),
        Err(Error::Parse { line: 1, .. })
    ));
}

#[test]
fn csv_round_trip() {
    let runs = chinchilla_runs();
    let mut buf = Vec::new();
    write_runs_csv(&runs, &mut buf).unwrap();
    assert_eq!(read_runs_csv(buf.as_slice()).unwrap(), runs);
}

proptest! {
    #[test]
    fn objective_is_permutation_invariant(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut runs = chinchilla_runs();
        for r in runs.iter_mut() {
            r.final_loss *= 1.0 + rng.random_range(-0.05..0.05);
        }
        let p = FitParams { a: 5.0, b: 6.0, e: 0.5, alpha: 0.3, beta: 0.3 };
        let before = objective(&p, &runs, 1e-3);
        runs.reverse();
        let after = objective(&p, &runs, 1e-3);
        prop_assert!((before - after).abs() <= 1e-12 * before.abs().max(1e-300));
    }
}
