//! Masked projected gradient iteration.
//!
//! Minimizes `f(X) = ½‖P_Ω(X − M)‖_F²` over a constraint set through
//! `X_{n+1} = D(X_n − μ_n P_Ω(X_n − M))`, where `D` is the exact projection.
//! The unit step `μ = 1` replaces the observed entries of the iterate by the
//! data before projecting. An Armijo backtracking variant is available for
//! comparison.

use crate::constraint::Constraint;
use crate::error::{Error, Result};
use crate::matrix::{apply_mask, DenseMatrix, ObservationSet};
use crate::projections::project;

/// Feasibility slack checked on iterates, relative to the radius.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepMode {
    Fixed { mu: f64 },
    Armijo {
        sigma: f64,
        mu_tilde: f64,
        max_halvings: usize,
    },
}

impl StepMode {
    pub fn unit() -> Self {
        StepMode::Fixed { mu: 1.0 }
    }

    pub fn armijo() -> Self {
        StepMode::Armijo {
            sigma: 0.1,
            mu_tilde: 1.0,
            max_halvings: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub step_mode: StepMode,
    /// Absolute threshold on the masked error. `None` means
    /// `1e-6 · max(1, ‖P_Ω M‖_F)`.
    pub tol: Option<f64>,
    /// Stop once `|ε_{n−1} − ε_n| ≤ rel_tol · max(1, ε_0)`.
    pub rel_tol: f64,
    pub max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step_mode: StepMode::unit(),
            tol: None,
            rel_tol: 1e-10,
            max_iters: 5000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(tol) = self.tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(Error::invalid(format!("tol must be positive, got {tol}")));
            }
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::invalid(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        match self.step_mode {
            StepMode::Fixed { mu } if !(mu > 0.0 && mu.is_finite()) => {
                Err(Error::invalid(format!("step size must be positive, got {mu}")))
            }
            StepMode::Armijo { sigma, mu_tilde, .. }
                if !(sigma > 0.0 && sigma < 1.0) || !(mu_tilde > 0.0 && mu_tilde.is_finite()) =>
            {
                Err(Error::invalid(format!(
                    "Armijo needs sigma in (0,1) and mu_tilde > 0, got sigma={sigma}, mu_tilde={mu_tilde}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// The absolute masked-error threshold for data `m` on `omega`.
    pub fn effective_tol(&self, m: &DenseMatrix, omega: &ObservationSet) -> Result<f64> {
        match self.tol {
            Some(tol) => Ok(tol),
            None => Ok(1e-6 * apply_mask(m, omega)?.frobenius_norm().max(1.0)),
        }
    }
}

/// Per-iteration record of the masked error.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    /// `errors[n] = ‖P_Ω X_n − P_Ω M‖_F`, starting with the initial iterate.
    pub errors: Vec<f64>,
    pub steps: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Armijo searches that ran out of halvings.
    pub armijo_exhausted: usize,
}

impl IterationTrace {
    pub fn final_error(&self) -> f64 {
        *self.errors.last().expect("trace holds the initial error")
    }

    /// Largest increase between consecutive errors (zero for a monotone trace).
    pub fn max_increase(&self) -> f64 {
        self.errors
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct ApproximationSolution {
    pub x: DenseMatrix,
    pub trace: IterationTrace,
}

fn check_shapes(x: &DenseMatrix, m: &DenseMatrix, omega: &ObservationSet) -> Result<()> {
    m.ensure_same_shape(x)?;
    omega.ensure_matches(m)
}

/// `‖P_Ω(X − M)‖_F`
pub fn masked_error(x: &DenseMatrix, m: &DenseMatrix, omega: &ObservationSet) -> Result<f64> {
    check_shapes(x, m, omega)?;
    let sq: f64 = x
        .as_slice()
        .iter()
        .zip(m.as_slice())
        .zip(omega.flags())
        .filter(|(_, &keep)| keep)
        .map(|((a, b), _)| (a - b) * (a - b))
        .sum();
    Ok(sq.sqrt())
}

/// `f(X) = ½‖P_Ω(X − M)‖_F²`
pub fn objective(x: &DenseMatrix, m: &DenseMatrix, omega: &ObservationSet) -> Result<f64> {
    let e = masked_error(x, m, omega)?;
    Ok(0.5 * e * e)
}

/// Gradient of [`objective`]: `P_Ω(X − M)`.
pub fn objective_gradient(x: &DenseMatrix, m: &DenseMatrix, omega: &ObservationSet) -> Result<DenseMatrix> {
    check_shapes(x, m, omega)?;
    apply_mask(&x.sub(m)?, omega)
}

/// One projected gradient step with a fixed step size.
pub fn fixed_step_iterate(
    x: &DenseMatrix,
    m: &DenseMatrix,
    omega: &ObservationSet,
    c: &Constraint,
    mu: f64,
) -> Result<DenseMatrix> {
    let grad = objective_gradient(x, m, omega)?;
    Ok(project(&x.add_scaled(-mu, &grad)?, c)?.x)
}

#[derive(Debug, Clone)]
pub struct ArmijoStep {
    pub x: DenseMatrix,
    pub mu: f64,
    pub halvings: usize,
    /// No trial step met the sufficient-decrease test; `x` is the trial with
    /// the smallest objective.
    pub exhausted: bool,
}

/// Backtracking step: the first `j` with
/// `f(Z_j) ≤ f(X) − σ ⟨∇f(X), X − Z_j⟩`, `Z_j = D(X − μ̃ 2^{−j} ∇f(X))`.
pub fn armijo_step(
    x: &DenseMatrix,
    m: &DenseMatrix,
    omega: &ObservationSet,
    c: &Constraint,
    cfg: &SolverConfig,
) -> Result<ArmijoStep> {
    let StepMode::Armijo {
        sigma,
        mu_tilde,
        max_halvings,
    } = cfg.step_mode
    else {
        return Err(Error::invalid("armijo_step needs an Armijo step mode"));
    };
    cfg.validate()?;
    let grad = objective_gradient(x, m, omega)?;
    let f_x = objective(x, m, omega)?;
    let mut best: Option<(f64, ArmijoStep)> = None;
    let mut mu = mu_tilde;
    for j in 0..=max_halvings {
        let z = project(&x.add_scaled(-mu, &grad)?, c)?.x;
        let f_z = objective(&z, m, omega)?;
        let decrease = grad.inner(&x.sub(&z)?)?;
        if f_z <= f_x - sigma * decrease {
            return Ok(ArmijoStep {
                x: z,
                mu,
                halvings: j,
                exhausted: false,
            });
        }
        if best.as_ref().map_or(true, |(f, _)| f_z < *f) {
            best = Some((
                f_z,
                ArmijoStep {
                    x: z,
                    mu,
                    halvings: j,
                    exhausted: true,
                },
            ));
        }
        mu *= 0.5;
    }
    Ok(best.expect("at least one trial step").1)
}

/// Runs the iteration from `X_0 = D(P_Ω M)`.
pub fn solve_approximation(
    m: &DenseMatrix,
    omega: &ObservationSet,
    c: &Constraint,
    cfg: &SolverConfig,
) -> Result<ApproximationSolution> {
    omega.ensure_matches(m)?;
    let start = apply_mask(m, omega)?;
    solve_approximation_from(m, omega, c, cfg, &start)
}

/// Runs the iteration from `X_0 = D(start)`.
pub fn solve_approximation_from(
    m: &DenseMatrix,
    omega: &ObservationSet,
    c: &Constraint,
    cfg: &SolverConfig,
    start: &DenseMatrix,
) -> Result<ApproximationSolution> {
    solve_with_observer(m, omega, c, cfg, start, |_, _| {})
}

/// Like [`solve_approximation_from`], calling `observe(n, ε_n)` after every
/// iterate.
pub fn solve_with_observer(
    m: &DenseMatrix,
    omega: &ObservationSet,
    c: &Constraint,
    cfg: &SolverConfig,
    start: &DenseMatrix,
    mut observe: impl FnMut(usize, f64),
) -> Result<ApproximationSolution> {
    cfg.validate()?;
    check_shapes(start, m, omega)?;
    c.validate(m.rows(), m.cols())?;
    let tol = cfg.effective_tol(m, omega)?;

    let mut x = project(start, c)?.x;
    let mut error = masked_error(&x, m, omega)?;
    observe(0, error);
    let stall = cfg.rel_tol * error.max(1.0);
    let mut trace = IterationTrace {
        errors: vec![error],
        ..IterationTrace::default()
    };
    if error <= tol {
        trace.converged = true;
        return Ok(ApproximationSolution { x, trace });
    }

    while trace.iterations < cfg.max_iters {
        let (next, mu) = match cfg.step_mode {
            StepMode::Fixed { mu } => (fixed_step_iterate(&x, m, omega, c, mu)?, mu),
            StepMode::Armijo { .. } => {
                let step = armijo_step(&x, m, omega, c, cfg)?;
                if step.exhausted {
                    trace.armijo_exhausted += 1;
                }
                (step.x, step.mu)
            }
        };
        let next_error = masked_error(&next, m, omega)?;
        if next_error > error && matches!(cfg.step_mode, StepMode::Armijo { .. }) {
            // A failed line search near a fixed point; keep the better iterate.
            trace.converged = true;
            break;
        }
        trace.iterations += 1;
        trace.steps.push(mu);
        trace.errors.push(next_error);
        observe(trace.iterations, next_error);
        let change = (error - next_error).abs();
        x = next;
        error = next_error;
        if error <= tol || change <= stall {
            trace.converged = true;
            break;
        }
    }
    Ok(ApproximationSolution { x, trace })
}
