//! Shared fixtures and brute-force oracles for the integration tests.
//!
//! Nothing here calls into the projection code: random orthogonal factors
//! come from Gram-Schmidt, and the singular-value oracle solves the
//! projection problem from its halfspace description.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use spectral_completion::{DenseMatrix, ObservationSet};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// `rows x cols` matrix with orthonormal columns (`rows >= cols`), by
/// modified Gram-Schmidt on a Gaussian matrix.
pub fn orthonormal(rng: &mut impl Rng, rows: usize, cols: usize) -> DenseMatrix {
    assert!(rows >= cols);
    loop {
        let mut q: Vec<Vec<f64>> = (0..cols)
            .map(|_| (0..rows).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let mut ok = true;
        for j in 0..cols {
            for prev in 0..j {
                let (done, rest) = q.split_at_mut(j);
                let d: f64 = done[prev].iter().zip(&rest[0]).map(|(a, b)| a * b).sum();
                for (x, p) in rest[0].iter_mut().zip(&done[prev]) {
                    *x -= d * p;
                }
            }
            let n = q[j].iter().map(|v| v * v).sum::<f64>().sqrt();
            if n < 1e-8 {
                ok = false;
                break;
            }
            q[j].iter_mut().for_each(|v| *v /= n);
        }
        if ok {
            return DenseMatrix::from_fn(rows, cols, |i, j| q[j][i]);
        }
    }
}

/// `U diag(s) Vᵀ` with random orthonormal factors.
pub fn with_spectrum(rng: &mut impl Rng, rows: usize, cols: usize, s: &[f64]) -> DenseMatrix {
    let r = rows.min(cols);
    let u = orthonormal(rng, rows, r);
    let v = orthonormal(rng, cols, r);
    let d = DenseMatrix::from_diagonal(r, r, s).unwrap();
    u.matmul(&d).unwrap().matmul(&v.transpose()).unwrap()
}

/// Each entry observed independently with probability `p`.
pub fn random_mask(rng: &mut impl Rng, rows: usize, cols: usize, p: f64) -> ObservationSet {
    let flags = (0..rows * cols).map(|_| rng.random::<f64>() < p).collect();
    ObservationSet::from_flags(rows, cols, flags).unwrap()
}

/// Mask with exactly `hidden` unobserved entries chosen at random.
pub fn mask_hiding(rng: &mut impl Rng, rows: usize, cols: usize, hidden: usize) -> ObservationSet {
    let mut idx: Vec<usize> = (0..rows * cols).collect();
    for i in 0..hidden {
        let j = rng.random_range(i..idx.len());
        idx.swap(i, j);
    }
    let mut flags = vec![true; rows * cols];
    for &p in &idx[..hidden] {
        flags[p] = false;
    }
    ObservationSet::from_flags(rows, cols, flags).unwrap()
}

pub fn topk_sum(y: &[f64], k: usize) -> f64 {
    let mut s = y.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s.iter().take(k).sum()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Euclidean projection of `sigma` onto `{y >= 0, topk(y) <= lambda}` by
/// exact coordinate ascent on the dual of the halfspace description
/// `Σ_{i∈S} y_i <= lambda` for every `|S| = k` (Hildreth's method).
pub fn kyfan_projection_oracle(sigma: &[f64], k: usize, lambda: f64) -> Vec<f64> {
    let n = sigma.len();
    let sets = subsets(n, k);
    let mut nu = vec![0.0; sets.len()];
    let primal = |nu: &[f64]| -> Vec<f64> {
        let mut y = sigma.to_vec();
        for (s, &w) in sets.iter().zip(nu) {
            for &i in s {
                y[i] -= w;
            }
        }
        y.iter_mut().for_each(|v| *v = v.max(0.0));
        y
    };
    for _sweep in 0..50_000 {
        let mut moved = 0.0f64;
        for c in 0..sets.len() {
            // With the other multipliers fixed, y_i = max(b_i - nu_c, 0) on
            // S_c; the dual optimum along nu_c solves sum_S y_i = lambda.
            let mut b: Vec<f64> = sets[c].iter().map(|&i| sigma[i]).collect();
            for (c2, s2) in sets.iter().enumerate() {
                if c2 == c {
                    continue;
                }
                for (slot, &i) in sets[c].iter().enumerate() {
                    if s2.contains(&i) {
                        b[slot] -= nu[c2];
                    }
                }
            }
            let positive_sum: f64 = b.iter().map(|v| v.max(0.0)).sum();
            let new = if positive_sum <= lambda {
                0.0
            } else {
                b.sort_by(|x, y| y.total_cmp(x));
                let mut acc = 0.0;
                let mut w = 0.0;
                for (p, &v) in b.iter().enumerate() {
                    acc += v;
                    let cand = (acc - lambda) / (p + 1) as f64;
                    let next = b.get(p + 1).copied().unwrap_or(f64::NEG_INFINITY);
                    if cand >= next && cand <= v {
                        w = cand;
                        break;
                    }
                }
                w.max(0.0)
            };
            moved = moved.max((new - nu[c]).abs());
            nu[c] = new;
        }
        if moved < 1e-16 {
            break;
        }
    }
    primal(&nu)
}

/// Best feasible point of a uniform grid over `[0, max σ]^n`.
pub fn kyfan_grid_best(sigma: &[f64], k: usize, lambda: f64, levels: usize) -> (f64, Vec<f64>) {
    let n = sigma.len();
    let top = sigma.iter().cloned().fold(0.0, f64::max);
    let step = top / (levels - 1) as f64;
    let mut idx = vec![0usize; n];
    let mut best = (f64::INFINITY, vec![0.0; n]);
    loop {
        let y: Vec<f64> = idx.iter().map(|&i| i as f64 * step).collect();
        if topk_sum(&y, k) <= lambda {
            let d = sq_dist(&y, sigma);
            if d < best.0 {
                best = (d, y);
            }
        }
        let mut p = 0;
        loop {
            if p == n {
                return best;
            }
            idx[p] += 1;
            if idx[p] < levels {
                break;
            }
            idx[p] = 0;
            p += 1;
        }
    }
}

/// Minimizes a convex 1-D function on `[lo, hi]` by a grid scan with step
/// `step` followed by golden-section refinement around the best grid point.
pub fn scan_minimize(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> f64 {
    let n = ((hi - lo) / step).round() as usize;
    let mut best = (f64::INFINITY, lo);
    for i in 0..=n {
        let t = lo + i as f64 * step;
        let v = f(t);
        if v < best.0 {
            best = (v, t);
        }
    }
    let (mut a, mut b) = ((best.1 - step).max(lo), (best.1 + step).min(hi));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) <= f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

/// Minimizes a convex function of two variables by a grid scan followed by
/// cyclic golden-section refinement.
pub fn scan_minimize_2d(f: impl Fn(f64, f64) -> f64, lo: f64, hi: f64, step: f64) -> (f64, f64) {
    let n = ((hi - lo) / step).round() as usize;
    let mut best = (f64::INFINITY, lo, lo);
    for i in 0..=n {
        for j in 0..=n {
            let (s, t) = (lo + i as f64 * step, lo + j as f64 * step);
            let v = f(s, t);
            if v < best.0 {
                best = (v, s, t);
            }
        }
    }
    let (mut s, mut t) = (best.1, best.2);
    let mut width = step;
    for _ in 0..60 {
        s = scan_minimize(|x| f(x, t), s - width, s + width, width / 8.0);
        t = scan_minimize(|x| f(s, x), t - width, t + width, width / 8.0);
        width *= 0.5;
    }
    (s, t)
}
