//! Feasible sets supported by the projection operators.

use std::fmt;

use crate::error::{Error, Result};
use crate::matrix::{self, DenseMatrix, NormKind};

/// A constraint set; each variant has an exact Frobenius-distance projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Constraint {
    FrobeniusBall { lambda: f64 },
    SpectralBall { lambda: f64 },
    NuclearBall { lambda: f64 },
    /// Sum of the `k` largest singular values at most `lambda`.
    KyFanBall { k: usize, lambda: f64 },
    RankAtMost { k: usize },
    /// `XᵀX = I` (orthonormal columns).
    Orthonormal,
}

impl Constraint {
    /// Checks the parameters against a `rows x cols` operand.
    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        let r = rows.min(cols);
        let check_lambda = |lambda: f64| {
            if lambda.is_finite() && lambda > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("radius must be positive and finite, got {lambda}")))
            }
        };
        let check_k = |k: usize| {
            if k >= 1 && k <= r {
                Ok(())
            } else {
                Err(Error::invalid(format!(
                    "order k = {k} must lie in 1..={r} for a {rows}x{cols} matrix"
                )))
            }
        };
        match *self {
            Constraint::FrobeniusBall { lambda }
            | Constraint::SpectralBall { lambda }
            | Constraint::NuclearBall { lambda } => check_lambda(lambda),
            Constraint::KyFanBall { k, lambda } => {
                check_k(k)?;
                check_lambda(lambda)
            }
            Constraint::RankAtMost { k } => check_k(k),
            Constraint::Orthonormal => {
                if rows >= cols {
                    Ok(())
                } else {
                    Err(Error::invalid(format!(
                        "orthonormal columns need rows >= cols, got {rows}x{cols}"
                    )))
                }
            }
        }
    }

    /// The norm bounded by a ball constraint, if this is one.
    pub fn norm_kind(&self) -> Option<NormKind> {
        match *self {
            Constraint::FrobeniusBall { .. } => Some(NormKind::Frobenius),
            Constraint::SpectralBall { .. } => Some(NormKind::Spectral),
            Constraint::NuclearBall { .. } => Some(NormKind::Nuclear),
            Constraint::KyFanBall { k, .. } => Some(NormKind::KyFan(k)),
            Constraint::RankAtMost { .. } | Constraint::Orthonormal => None,
        }
    }

    pub fn radius(&self) -> Option<f64> {
        match *self {
            Constraint::FrobeniusBall { lambda }
            | Constraint::SpectralBall { lambda }
            | Constraint::NuclearBall { lambda }
            | Constraint::KyFanBall { lambda, .. } => Some(lambda),
            Constraint::RankAtMost { .. } | Constraint::Orthonormal => None,
        }
    }

    /// Every variant except the rank and orthonormality sets is convex.
    pub fn is_convex(&self) -> bool {
        self.norm_kind().is_some()
    }

    /// The quantity the constraint bounds: the norm for balls, the numerical
    /// rank for `RankAtMost`, and `‖XᵀX − I‖_F` for `Orthonormal`.
    pub fn measure(&self, x: &DenseMatrix) -> Result<f64> {
        match *self {
            Constraint::RankAtMost { .. } => {
                Ok(matrix::numerical_rank(&matrix::singular_values(x)?) as f64)
            }
            Constraint::Orthonormal => orthonormality_defect(x),
            _ => matrix::norm(x, self.norm_kind().expect("ball constraint")),
        }
    }

    /// Whether `x` is feasible, with relative slack `rel` on radii and
    /// absolute slack `rel` on the orthonormality defect.
    pub fn is_satisfied(&self, x: &DenseMatrix, rel: f64) -> Result<bool> {
        let measure = self.measure(x)?;
        Ok(match *self {
            Constraint::RankAtMost { k } => measure <= k as f64,
            Constraint::Orthonormal => measure <= rel * (x.cols() as f64).sqrt().max(1.0),
            _ => measure <= self.radius().expect("ball constraint") * (1.0 + rel),
        })
    }

    /// Same constraint kind with a different radius. Panics on the
    /// radius-free variants.
    pub fn with_radius(&self, lambda: f64) -> Constraint {
        match *self {
            Constraint::FrobeniusBall { .. } => Constraint::FrobeniusBall { lambda },
            Constraint::SpectralBall { .. } => Constraint::SpectralBall { lambda },
            Constraint::NuclearBall { .. } => Constraint::NuclearBall { lambda },
            Constraint::KyFanBall { k, .. } => Constraint::KyFanBall { k, lambda },
            other => panic!("{other} has no radius"),
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::FrobeniusBall { lambda } => write!(f, "frobenius-ball({lambda})"),
            Constraint::SpectralBall { lambda } => write!(f, "spectral-ball({lambda})"),
            Constraint::NuclearBall { lambda } => write!(f, "nuclear-ball({lambda})"),
            Constraint::KyFanBall { k, lambda } => write!(f, "kyfan-ball(k={k}, {lambda})"),
            Constraint::RankAtMost { k } => write!(f, "rank<={k}"),
            Constraint::Orthonormal => write!(f, "orthonormal"),
        }
    }
}

/// `‖XᵀX − I‖_F`
pub fn orthonormality_defect(x: &DenseMatrix) -> Result<f64> {
    let gram = x.transpose().matmul(x)?;
    Ok(gram.sub(&DenseMatrix::identity(x.cols()))?.frobenius_norm())
}
