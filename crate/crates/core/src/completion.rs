//! Matrix completion by bisection over the constraint radius.
//!
//! For a norm ball of radius `λ`, the masked approximation error `ε(λ)` is
//! zero once the ball contains some matrix agreeing with the data, and
//! positive below that threshold. The smallest admissible `λ` is bracketed
//! between `0` and the norm of the masked data (which is itself a feasible
//! completion) and halved until the bracket is narrower than `lambda_tol`.

use crate::constraint::Constraint;
use crate::error::{Error, Result};
use crate::matrix::{apply_mask, norm, DenseMatrix, NormKind, ObservationSet};
use crate::projections::project;
use crate::solver::{masked_error, solve_approximation_from, SolverConfig};

/// The norm minimized by the completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompletionNorm {
    Nuclear,
    Spectral,
    KyFan(usize),
}

impl CompletionNorm {
    pub fn norm_kind(self) -> NormKind {
        match self {
            CompletionNorm::Nuclear => NormKind::Nuclear,
            CompletionNorm::Spectral => NormKind::Spectral,
            CompletionNorm::KyFan(k) => NormKind::KyFan(k),
        }
    }

    pub fn ball(self, lambda: f64) -> Constraint {
        match self {
            CompletionNorm::Nuclear => Constraint::NuclearBall { lambda },
            CompletionNorm::Spectral => Constraint::SpectralBall { lambda },
            CompletionNorm::KyFan(k) => Constraint::KyFanBall { k, lambda },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompletionConfig {
    pub norm: CompletionNorm,
    /// Admissible masked error.
    pub tol: f64,
    /// Admissible width of the final radius bracket.
    pub lambda_tol: f64,
    pub max_bisections: usize,
    /// Inner solver settings. Its `tol` is replaced by half the completion
    /// tolerance so a converged inner solve always clears the outer test.
    pub solver: SolverConfig,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        Self {
            norm: CompletionNorm::Nuclear,
            tol: 1e-6,
            lambda_tol: 1e-6,
            max_bisections: 60,
            solver: SolverConfig::default(),
        }
    }
}

impl CompletionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::invalid(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.lambda_tol > 0.0 && self.lambda_tol.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda_tol must be positive, got {}",
                self.lambda_tol
            )));
        }
        if self.max_bisections == 0 {
            return Err(Error::invalid("max_bisections must be at least 1"));
        }
        if let CompletionNorm::KyFan(0) = self.norm {
            return Err(Error::invalid("Ky-Fan order must be at least 1"));
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionStep {
    pub lambda: f64,
    pub error: f64,
    pub inner_iterations: usize,
    pub inner_converged: bool,
}

#[derive(Debug, Clone)]
pub struct CompletionResult {
    pub x: DenseMatrix,
    pub lambda_star: f64,
    /// Initial upper end of the bracket, the norm of the masked data.
    pub lambda_max: f64,
    pub bisection_history: Vec<BisectionStep>,
    pub converged: bool,
}

impl CompletionResult {
    pub fn bisections(&self) -> usize {
        self.bisection_history.len()
    }
}

/// Norm of the masked data, an upper bound on the optimal radius.
pub fn completable_norm_bound(m: &DenseMatrix, omega: &ObservationSet, norm_choice: CompletionNorm) -> Result<f64> {
    norm(&apply_mask(m, omega)?, norm_choice.norm_kind())
}

pub fn complete(m: &DenseMatrix, omega: &ObservationSet, cfg: &CompletionConfig) -> Result<CompletionResult> {
    cfg.validate()?;
    omega.ensure_matches(m)?;
    if omega.is_empty() {
        return Err(Error::EmptyObservations);
    }
    cfg.norm.ball(1.0).validate(m.rows(), m.cols())?;

    let data = apply_mask(m, omega)?;
    let lambda_max = norm(&data, cfg.norm.norm_kind())?;
    if lambda_max == 0.0 {
        return Ok(CompletionResult {
            x: data,
            lambda_star: 0.0,
            lambda_max,
            bisection_history: Vec::new(),
            converged: true,
        });
    }

    let inner = SolverConfig {
        tol: Some(0.5 * cfg.tol),
        ..cfg.solver
    };
    let (mut lo, mut hi) = (0.0, lambda_max);
    let mut lambda = 0.0;
    // The masked data reaches zero error at radius `lambda_max`.
    let mut witness = data.clone();
    let mut warm = data.clone();
    let mut history = Vec::new();

    while history.len() < cfg.max_bisections {
        let prev = lambda;
        lambda = 0.5 * (lo + hi);
        let ball = cfg.norm.ball(lambda);
        let start = project(&warm, &ball)?.x;
        let sol = solve_approximation_from(&data, omega, &ball, &inner, &start)?;
        let error = masked_error(&sol.x, &data, omega)?;
        history.push(BisectionStep {
            lambda,
            error,
            inner_iterations: sol.trace.iterations,
            inner_converged: sol.trace.converged,
        });

        if error > cfg.tol {
            lo = lambda;
        } else {
            hi = lambda;
            witness = sol.x.clone();
        }
        warm = sol.x;

        let stable = (lambda - prev).abs() < cfg.lambda_tol;
        if stable {
            // Below tol at the last radius, or else the upper end of a
            // bracket narrower than lambda_tol.
            let lambda_star = if error < cfg.tol { lambda } else { hi };
            let x = if error < cfg.tol { warm } else { witness };
            return Ok(CompletionResult {
                x,
                lambda_star,
                lambda_max,
                bisection_history: history,
                converged: true,
            });
        }
    }

    Ok(CompletionResult {
        x: witness,
        lambda_star: hi,
        lambda_max,
        bisection_history: history,
        converged: false,
    })
}
