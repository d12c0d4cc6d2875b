mod common;

use common::*;
use rand::Rng;
use spectral_completion::projections::project_rank;
use spectral_completion::solver::*;
use spectral_completion::{apply_mask, norm, project, Constraint, DenseMatrix, NormKind, ObservationSet};

fn constraints_for(m: &DenseMatrix, omega: &ObservationSet, rng: &mut impl Rng) -> Vec<Constraint> {
    let pm = apply_mask(m, omega).unwrap();
    let r = m.rows().min(m.cols());
    let k = rng.random_range(1..=r);
    let f = rng.random_range(0.3..1.2);
    let mut cs = vec![
        Constraint::FrobeniusBall { lambda: f * pm.frobenius_norm().max(1e-3) },
        Constraint::SpectralBall { lambda: f * norm(&pm, NormKind::Spectral).unwrap().max(1e-3) },
        Constraint::NuclearBall { lambda: f * norm(&pm, NormKind::Nuclear).unwrap().max(1e-3) },
        Constraint::KyFanBall { k, lambda: f * norm(&pm, NormKind::KyFan(k)).unwrap().max(1e-3) },
        Constraint::RankAtMost { k },
    ];
    if m.rows() >= m.cols() {
        cs.push(Constraint::Orthonormal);
    }
    cs
}

#[test]
fn masked_error_small_cases() {
    let x = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
    let z = DenseMatrix::zeros(2, 2);
    let one = ObservationSet::new(2, 2, [(0, 0)]).unwrap();
    assert_eq!(masked_error(&x, &z, &one).unwrap(), 1.0);
    assert_eq!(masked_error(&x, &z, &ObservationSet::empty(2, 2)).unwrap(), 0.0);
    assert_eq!(masked_error(&x, &x, &ObservationSet::full(2, 2)).unwrap(), 0.0);
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = rng(40);
    let h = 1e-5;
    for _ in 0..20 {
        let (r, c) = (rng.random_range(2..=7), rng.random_range(2..=7));
        let x = gaussian(&mut rng, r, c);
        let m = gaussian(&mut rng, r, c);
        let omega = random_mask(&mut rng, r, c, 0.6);
        let g = objective_gradient(&x, &m, &omega).unwrap();
        for _ in 0..20 {
            let d = gaussian(&mut rng, r, c);
            let fp = objective(&x.add_scaled(h, &d).unwrap(), &m, &omega).unwrap();
            let fm = objective(&x.add_scaled(-h, &d).unwrap(), &m, &omega).unwrap();
            let fd = (fp - fm) / (2.0 * h);
            let exact = g.inner(&d).unwrap();
            assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{fd} vs {exact}");
        }
    }
}

#[test]
fn traces_are_nonincreasing_and_iterates_feasible() {
    let mut rng = rng(41);
    for case in 0..40 {
        let (r, c) = (rng.random_range(2..=6), rng.random_range(2..=6));
        let m = gaussian(&mut rng, r, c);
        let omega = random_mask(&mut rng, r, c, 0.7);
        let cfg = SolverConfig {
            step_mode: if case % 2 == 0 { StepMode::unit() } else { StepMode::armijo() },
            max_iters: 300,
            ..SolverConfig::default()
        };
        for con in constraints_for(&m, &omega, &mut rng) {
            let sol = solve_approximation(&m, &omega, &con, &cfg).unwrap();
            assert!(sol.trace.max_increase() <= 1e-12, "{con}: {}", sol.trace.max_increase());
            assert_eq!(sol.trace.errors.len(), sol.trace.iterations + 1);
            assert!(con.is_satisfied(&sol.x, 1e-9).unwrap(), "{con}");
        }
    }
}

#[test]
fn full_observation_collapses_to_one_projection() {
    let mut rng = rng(42);
    let m = gaussian(&mut rng, 5, 4);
    let full = ObservationSet::full(5, 4);
    let cfg = SolverConfig::default();
    let lambda = 0.5 * m.frobenius_norm();
    let sol = solve_approximation(&m, &full, &Constraint::FrobeniusBall { lambda }, &cfg).unwrap();
    assert!(sol.x.max_abs_diff(&m.scale(lambda / m.frobenius_norm())).unwrap() < 1e-8);

    let sol = solve_approximation(&m, &full, &Constraint::RankAtMost { k: 2 }, &cfg).unwrap();
    assert!(sol.x.max_abs_diff(&project_rank(&m, 2).unwrap().x).unwrap() < 1e-8);
    assert!(sol.trace.iterations <= 1);

    let mu_step = fixed_step_iterate(&gaussian(&mut rng, 5, 4), &m, &full, &Constraint::SpectralBall { lambda: 1.0 }, 1.0).unwrap();
    let direct = project(&m, &Constraint::SpectralBall { lambda: 1.0 }).unwrap().x;
    assert!(mu_step.max_abs_diff(&direct).unwrap() < 1e-10);
}

#[test]
fn masked_frobenius_ball_reaches_scaled_observations() {
    let mut rng = rng(43);
    for _ in 0..10 {
        let m = gaussian(&mut rng, 6, 5);
        let omega = random_mask(&mut rng, 6, 5, 0.5);
        let pm = apply_mask(&m, &omega).unwrap();
        let lambda = 0.6 * pm.frobenius_norm();
        let cfg = SolverConfig { tol: Some(1e-14), rel_tol: 1e-15, ..SolverConfig::default() };
        let sol = solve_approximation(&m, &omega, &Constraint::FrobeniusBall { lambda }, &cfg).unwrap();
        let expected = pm.scale(lambda / pm.frobenius_norm());
        assert!(sol.x.max_abs_diff(&expected).unwrap() < 1e-6);
    }
}

#[test]
fn zero_error_feasible_point_is_fixed() {
    let mut rng = rng(44);
    let a = gaussian(&mut rng, 6, 2);
    let b = gaussian(&mut rng, 2, 5);
    let x = a.matmul(&b).unwrap();
    let omega = random_mask(&mut rng, 6, 5, 0.5);
    for con in [
        Constraint::RankAtMost { k: 2 },
        Constraint::NuclearBall { lambda: norm(&x, NormKind::Nuclear).unwrap() * 1.01 },
        Constraint::SpectralBall { lambda: norm(&x, NormKind::Spectral).unwrap() * 1.01 },
    ] {
        let next = fixed_step_iterate(&x, &x, &omega, &con, 1.0).unwrap();
        assert!(next.max_abs_diff(&x).unwrap() < 1e-10, "{con}");
    }
}

#[test]
fn empty_mask_step_is_a_projection() {
    let mut rng = rng(45);
    let x = gaussian(&mut rng, 4, 4);
    let m = gaussian(&mut rng, 4, 4);
    let con = Constraint::NuclearBall { lambda: 1.0 };
    let next = fixed_step_iterate(&x, &m, &ObservationSet::empty(4, 4), &con, 1.0).unwrap();
    assert!(next.max_abs_diff(&project(&x, &con).unwrap().x).unwrap() < 1e-12);
}

#[test]
fn armijo_step_decreases_objective() {
    let mut rng = rng(46);
    let cfg = SolverConfig { step_mode: StepMode::armijo(), ..SolverConfig::default() };
    for _ in 0..100 {
        let (r, c) = (rng.random_range(2..=6), rng.random_range(2..=6));
        let m = gaussian(&mut rng, r, c);
        let omega = random_mask(&mut rng, r, c, 0.6);
        let lambda = rng.random_range(0.2..2.0);
        let con = Constraint::NuclearBall { lambda };
        let x = project(&gaussian(&mut rng, r, c), &con).unwrap().x;
        let step = armijo_step(&x, &m, &omega, &con, &cfg).unwrap();
        assert!(objective(&step.x, &m, &omega).unwrap() <= objective(&x, &m, &omega).unwrap() + 1e-15);
        assert_eq!(step.mu, 0.5f64.powi(step.halvings as i32));
    }
}

#[test]
fn armijo_accepts_full_step_without_mask() {
    let mut rng = rng(47);
    let cfg = SolverConfig { step_mode: StepMode::armijo(), ..SolverConfig::default() };
    for _ in 0..100 {
        let (r, c) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let m = gaussian(&mut rng, r, c);
        let full = ObservationSet::full(r, c);
        let lambda = rng.random_range(0.2..2.0);
        let k = rng.random_range(1..=r.min(c));
        for con in [
            Constraint::FrobeniusBall { lambda },
            Constraint::SpectralBall { lambda },
            Constraint::NuclearBall { lambda },
            Constraint::KyFanBall { k, lambda },
        ] {
            let x = project(&gaussian(&mut rng, r, c), &con).unwrap().x;
            let step = armijo_step(&x, &m, &full, &con, &cfg).unwrap();
            assert_eq!(step.halvings, 0, "{con}");
            assert!(step.x.max_abs_diff(&project(&m, &con).unwrap().x).unwrap() < 1e-10);
        }
    }
}

#[test]
fn armijo_at_stationary_point_keeps_x() {
    let x = DenseMatrix::from_rows(&[[0.5, 0.0], [0.0, 0.25]]).unwrap();
    let cfg = SolverConfig { step_mode: StepMode::armijo(), ..SolverConfig::default() };
    let con = Constraint::SpectralBall { lambda: 1.0 };
    let step = armijo_step(&x, &x, &ObservationSet::full(2, 2), &con, &cfg).unwrap();
    assert_eq!(step.halvings, 0);
    assert_eq!(step.x, x);
}

#[test]
fn unit_step_is_no_worse_than_armijo() {
    let mut rng = rng(48);
    for _ in 0..20 {
        let (r, c) = (rng.random_range(3..=7), rng.random_range(3..=7));
        let m = gaussian(&mut rng, r, c);
        let omega = random_mask(&mut rng, r, c, 0.6);
        let pm = apply_mask(&m, &omega).unwrap();
        let con = Constraint::NuclearBall { lambda: 0.7 * norm(&pm, NormKind::Nuclear).unwrap() };
        let run = |step_mode| {
            let cfg = SolverConfig { step_mode, tol: Some(1e-300), rel_tol: 1e-300, max_iters: 200 };
            solve_approximation(&m, &omega, &con, &cfg).unwrap().trace.final_error()
        };
        assert!(run(StepMode::unit()) <= run(StepMode::armijo()) + 1e-8);
    }
}

#[test]
fn low_rank_nuclear_run_reaches_tolerance() {
    let mut rng = rng(49);
    let a = gaussian(&mut rng, 10, 2);
    let b = gaussian(&mut rng, 2, 10);
    let m = a.matmul(&b).unwrap();
    let omega = random_mask(&mut rng, 10, 10, 0.5);
    let con = Constraint::NuclearBall { lambda: norm(&m, NormKind::Nuclear).unwrap() };
    let cfg = SolverConfig { max_iters: 20_000, rel_tol: 1e-14, ..SolverConfig::default() };
    let sol = solve_approximation(&m, &omega, &con, &cfg).unwrap();
    let tol = cfg.effective_tol(&m, &omega).unwrap();
    assert!(sol.trace.final_error() <= tol, "{} > {tol}", sol.trace.final_error());
    assert!(sol.trace.max_increase() <= 1e-12);
}

#[test]
fn budget_exhaustion_is_reported() {
    let mut rng = rng(50);
    let m = gaussian(&mut rng, 6, 6);
    let omega = random_mask(&mut rng, 6, 6, 0.5);
    let cfg = SolverConfig { tol: Some(1e-300), rel_tol: 1e-300, max_iters: 3, ..SolverConfig::default() };
    let sol = solve_approximation(&m, &omega, &Constraint::NuclearBall { lambda: 3.0 }, &cfg).unwrap();
    assert!(!sol.trace.converged);
    assert_eq!(sol.trace.iterations, 3);
}

#[test]
fn invalid_configs_are_rejected() {
    let m = DenseMatrix::zeros(2, 2);
    let omega = ObservationSet::full(2, 2);
    let con = Constraint::SpectralBall { lambda: 1.0 };
    for cfg in [
        SolverConfig { tol: Some(0.0), ..SolverConfig::default() },
        SolverConfig { rel_tol: -1.0, ..SolverConfig::default() },
        SolverConfig { max_iters: 0, ..SolverConfig::default() },
        SolverConfig {
            step_mode: StepMode::Armijo { sigma: 1.5, mu_tilde: 1.0, max_halvings: 3 },
            ..SolverConfig::default()
        },
    ] {
        assert!(solve_approximation(&m, &omega, &con, &cfg).is_err(), "{cfg:?}");
    }
    assert!(solve_approximation(&m, &ObservationSet::full(3, 2), &con, &SolverConfig::default()).is_err());
}
