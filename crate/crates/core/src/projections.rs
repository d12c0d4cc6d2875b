//! Exact nearest-point maps onto the constraint sets.
//!
//! Every spectral projection works on the SVD: the nearest point of a
//! unitarily invariant set keeps the singular vectors of the input and only
//! modifies its singular values. The singular-value maps are exposed on their
//! own so they can be checked against brute-force minimizers.
//!
//! | constraint        | singular-value map                          |
//! |-------------------|---------------------------------------------|
//! | spectral ball     | `min(s_i, λ)`                               |
//! | nuclear ball      | `max(s_i − θ, 0)` with `Σ = λ`              |
//! | Ky-Fan ball       | shift the top block, tie a middle block     |
//! | rank at most `k`  | drop everything after `s_k`                 |
//! | orthonormal       | all ones (`X = U Vᵀ`)                       |

use crate::constraint::{orthonormality_defect, Constraint};
use crate::error::{Error, Result};
use crate::matrix::{self, kyfan_of_sorted, numerical_rank, DenseMatrix};

/// Relative slack used to decide whether an input already lies in the set.
pub const ACTIVE_SLACK: f64 = 1e-12;

/// Tolerance used by the Ky-Fan KKT checks, relative to the largest input.
const KKT_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ProjectionResult {
    pub x: DenseMatrix,
    /// The input was outside the set and has been moved.
    pub active: bool,
    /// The nearest point is not unique (rank-deficient Procrustes input);
    /// `x` is one of the minimizers.
    pub non_unique: bool,
}

impl ProjectionResult {
    fn unchanged(m: &DenseMatrix) -> Self {
        Self {
            x: m.clone(),
            active: false,
            non_unique: false,
        }
    }

    fn moved(x: DenseMatrix) -> Self {
        Self {
            x,
            active: true,
            non_unique: false,
        }
    }
}

fn check_radius(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("radius must be positive and finite, got {lambda}")))
    }
}

fn check_spectrum(sigma: &[f64]) -> Result<()> {
    if let Some(v) = sigma.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::invalid(format!("singular values must be finite and nonnegative, got {v}")));
    }
    if sigma.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::invalid("singular values must be sorted nonincreasing"));
    }
    Ok(())
}

fn outside(measure: f64, lambda: f64) -> bool {
    measure > lambda * (1.0 + ACTIVE_SLACK)
}

/// Nearest point of the Frobenius ball: radial scaling onto the sphere.
pub fn project_frobenius_ball(m: &DenseMatrix, lambda: f64) -> Result<ProjectionResult> {
    check_radius(lambda)?;
    let norm = m.frobenius_norm();
    if !outside(norm, lambda) {
        return Ok(ProjectionResult::unchanged(m));
    }
    Ok(ProjectionResult::moved(m.scale(lambda / norm)))
}

/// Caps every singular value at `lambda`.
pub fn project_singular_values_spectral(sigma: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_radius(lambda)?;
    check_spectrum(sigma)?;
    Ok(sigma.iter().map(|&s| s.min(lambda)).collect())
}

pub fn project_spectral_ball(m: &DenseMatrix, lambda: f64) -> Result<ProjectionResult> {
    check_radius(lambda)?;
    let f = matrix::svd(m)?;
    if !outside(f.sigma[0], lambda) {
        return Ok(ProjectionResult::unchanged(m));
    }
    let capped = project_singular_values_spectral(&f.sigma, lambda)?;
    Ok(ProjectionResult::moved(f.reconstruct_with(&capped)))
}

/// Euclidean projection of a sorted nonnegative vector onto
/// `{y ≥ 0, Σ y ≤ λ}`: soft-thresholding by the unique `θ` with `Σ y = λ`.
pub fn project_singular_values_nuclear(sigma: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_radius(lambda)?;
    check_spectrum(sigma)?;
    let total: f64 = sigma.iter().sum();
    if total <= lambda {
        return Ok(sigma.to_vec());
    }
    let theta = soft_threshold_level(sigma, lambda);
    Ok(sigma.iter().map(|&s| (s - theta).max(0.0)).collect())
}

/// Threshold `θ > 0` with `Σ max(σ_i − θ, 0) = λ`, assuming `Σ σ > λ`.
///
/// With `p` entries kept, `θ = (σ_1 + … + σ_p − λ) / p`; the right `p` is
/// the one whose threshold falls in `[σ_{p+1}, σ_p)`.
fn soft_threshold_level(sigma: &[f64], lambda: f64) -> f64 {
    let mut prefix = 0.0;
    for (p, &s) in sigma.iter().enumerate() {
        prefix += s;
        let theta = (prefix - lambda) / (p + 1) as f64;
        let next = sigma.get(p + 1).copied().unwrap_or(0.0);
        if theta >= next && theta < s {
            return theta;
        }
    }
    // Only reachable through rounding; the full-support threshold is the
    // right limit in that case.
    (sigma.iter().sum::<f64>() - lambda) / sigma.len() as f64
}

pub fn project_nuclear_ball(m: &DenseMatrix, lambda: f64) -> Result<ProjectionResult> {
    check_radius(lambda)?;
    let f = matrix::svd(m)?;
    if !outside(f.sigma.iter().sum(), lambda) {
        return Ok(ProjectionResult::unchanged(m));
    }
    let shrunk = project_singular_values_nuclear(&f.sigma, lambda)?;
    Ok(ProjectionResult::moved(f.reconstruct_with(&shrunk)))
}

/// Euclidean projection of a sorted nonnegative vector onto
/// `{y ≥ 0, (sum of the k largest y_i) ≤ λ}`.
///
/// The minimizer has one of two shapes:
///
/// * a shifted top block `y_i = σ_i − θ` for `i < p`, a tied block
///   `y_i = c` for `p ≤ i < q` (which contains position `k − 1`), and an
///   untouched tail `y_i = σ_i ≤ c`;
/// * a shifted top block of length `p ≤ k` followed by zeros, when the
///   nonnegativity bound is what stops the tail.
///
/// All `(p, q)` candidates are enumerated and the first one satisfying the
/// KKT conditions is returned. If rounding rejects every candidate, the
/// feasible candidate closest to `σ` is used instead.
pub fn project_singular_values_kyfan(sigma: &[f64], k: usize, lambda: f64) -> Result<Vec<f64>> {
    check_radius(lambda)?;
    check_spectrum(sigma)?;
    let n = sigma.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("Ky-Fan order {k} must lie in 1..={n}")));
    }
    if kyfan_of_sorted(sigma, k) <= lambda {
        return Ok(sigma.to_vec());
    }

    let prefix: Vec<f64> = std::iter::once(0.0)
        .chain(sigma.iter().scan(0.0, |acc, &s| {
            *acc += s;
            Some(*acc)
        }))
        .collect();
    let tol = KKT_TOL * sigma[0].max(lambda);
    let at = |i: usize| sigma.get(i).copied().unwrap_or(0.0);
    let mut fallback: Option<(f64, Vec<f64>)> = None;
    let mut consider = |y: Vec<f64>| {
        let feasible = y.iter().all(|&v| v >= -tol)
            && kyfan_of_sorted(&y, k) <= lambda * (1.0 + 1e-12) + tol;
        if feasible {
            let dist: f64 = y.iter().zip(sigma).map(|(a, b)| (a - b) * (a - b)).sum();
            if fallback.as_ref().map_or(true, |(d, _)| dist < *d) {
                fallback = Some((dist, y));
            }
        }
    };

    // Shifted top block [0, p), tie block [p, q) at level c, tail untouched.
    for p in 0..k {
        let r = (k - p) as f64;
        let head = prefix[p];
        for q in k..=n {
            let t = (q - p) as f64;
            let tie_sum = prefix[q] - prefix[p];
            let c = (r * (lambda - head) + p as f64 * tie_sum) / (p as f64 * t + r * r);
            let theta = (tie_sum - t * c) / r;
            let kkt = theta >= -tol
                && c >= -tol
                && (p == 0 || sigma[p - 1] - theta >= c - tol)
                && sigma[p] <= c + theta + tol
                && sigma[q - 1] >= c - tol
                && at(q) <= c + tol;
            let y: Vec<f64> = (0..n)
                .map(|i| {
                    if i < p {
                        sigma[i] - theta
                    } else if i < q {
                        c
                    } else {
                        sigma[i]
                    }
                    .max(0.0)
                })
                .collect();
            if kkt {
                return Ok(y);
            }
            consider(y);
        }
    }

    // Shifted top block [0, p) with p <= k, zeros after it.
    for p in 1..=k {
        let theta = (prefix[p] - lambda) / p as f64;
        let tail = prefix[n] - prefix[p];
        let kkt = theta > 0.0
            && sigma[p - 1] - theta >= -tol
            && at(p) <= theta + tol
            && tail <= (k - p) as f64 * theta + tol;
        let y: Vec<f64> = (0..n)
            .map(|i| if i < p { (sigma[i] - theta).max(0.0) } else { 0.0 })
            .collect();
        if kkt {
            return Ok(y);
        }
        consider(y);
    }

    fallback
        .map(|(_, y)| y)
        .ok_or_else(|| Error::invalid("Ky-Fan projection found no feasible candidate"))
}

pub fn project_kyfan_ball(m: &DenseMatrix, k: usize, lambda: f64) -> Result<ProjectionResult> {
    check_radius(lambda)?;
    let r = m.rows().min(m.cols());
    if k == 0 || k > r {
        return Err(Error::invalid(format!("Ky-Fan order {k} must lie in 1..={r}")));
    }
    let f = matrix::svd(m)?;
    if !outside(kyfan_of_sorted(&f.sigma, k), lambda) {
        return Ok(ProjectionResult::unchanged(m));
    }
    let y = project_singular_values_kyfan(&f.sigma, k, lambda)?;
    Ok(ProjectionResult::moved(f.reconstruct_with(&y)))
}

/// Truncated SVD keeping the `k` leading singular triplets.
pub fn project_rank(m: &DenseMatrix, k: usize) -> Result<ProjectionResult> {
    let r = m.rows().min(m.cols());
    if k == 0 || k > r {
        return Err(Error::invalid(format!("rank bound {k} must lie in 1..={r}")));
    }
    let f = matrix::svd(m)?;
    if numerical_rank(&f.sigma) <= k {
        return Ok(ProjectionResult::unchanged(m));
    }
    Ok(ProjectionResult::moved(f.reconstruct_with(&f.sigma[..k])))
}

/// Nearest matrix with orthonormal columns, `U Vᵀ` from the SVD of `m`.
pub fn project_orthonormal(m: &DenseMatrix) -> Result<ProjectionResult> {
    Constraint::Orthonormal.validate(m.rows(), m.cols())?;
    let scale = (m.cols() as f64).sqrt();
    if orthonormality_defect(m)? <= ACTIVE_SLACK * scale {
        return Ok(ProjectionResult::unchanged(m));
    }
    let f = matrix::svd(m)?;
    let ones = vec![1.0; f.sigma.len()];
    Ok(ProjectionResult {
        x: f.reconstruct_with(&ones),
        active: true,
        non_unique: numerical_rank(&f.sigma) < m.cols(),
    })
}

/// Dispatches to the projection matching `c`.
pub fn project(m: &DenseMatrix, c: &Constraint) -> Result<ProjectionResult> {
    c.validate(m.rows(), m.cols())?;
    match *c {
        Constraint::FrobeniusBall { lambda } => project_frobenius_ball(m, lambda),
        Constraint::SpectralBall { lambda } => project_spectral_ball(m, lambda),
        Constraint::NuclearBall { lambda } => project_nuclear_ball(m, lambda),
        Constraint::KyFanBall { k, lambda } => project_kyfan_ball(m, k, lambda),
        Constraint::RankAtMost { k } => project_rank(m, k),
        Constraint::Orthonormal => project_orthonormal(m),
    }
}
