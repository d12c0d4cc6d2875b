//! Dense real matrices, observation masks, the SVD adapter and the norms
//! every other module is written against.
//!
//! `DenseMatrix` stores its entries row-major and rejects non-finite values
//! at construction; missing data is never encoded inside a matrix, it lives
//! in an [`ObservationSet`].

use std::fmt;

use crate::error::{Error, Result};

/// Relative cutoff below which a singular value counts as zero.
pub const RANK_EPS: f64 = 1e-12;

/// A real `rows x cols` matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::InvalidShape {
                rows,
                cols,
                len: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(Error::InvalidShape {
                    rows: n_rows,
                    cols: n_cols,
                    len: data.len() + r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(n_rows, n_cols, data)
    }

    /// Fills a matrix from `f(i, j)`. Panics if `f` yields a non-finite value.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data).expect("from_fn produced an invalid matrix")
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// Rectangular `rows x cols` matrix with `diag` on its main diagonal.
    pub fn from_diagonal(rows: usize, cols: usize, diag: &[f64]) -> Result<Self> {
        if diag.len() > rows.min(cols) {
            return Err(Error::invalid(format!(
                "{} diagonal entries do not fit a {rows}x{cols} matrix",
                diag.len()
            )));
        }
        let mut data = vec![0.0; rows * cols];
        for (i, &d) in diag.iter().enumerate() {
            data[i * cols + i] = d;
        }
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of range");
        self.data[i * self.cols + j]
    }

    /// Sets one entry. Panics on a non-finite value or an index out of range.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of range");
        assert!(value.is_finite(), "non-finite value {value}");
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub(crate) fn ensure_same_shape(&self, other: &DenseMatrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                expected: self.shape(),
                found: other.shape(),
            });
        }
        Ok(())
    }

    fn zip_with(&self, other: &DenseMatrix, f: impl Fn(f64, f64) -> f64) -> Result<DenseMatrix> {
        self.ensure_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// `self + alpha * other`
    pub fn add_scaled(&self, alpha: f64, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with(other, |a, b| a + alpha * b)
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: (self.cols, other.cols),
                found: other.shape(),
            });
        }
        let mut data = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            let out = &mut data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(DenseMatrix {
            rows: self.rows,
            cols: other.cols,
            data,
        })
    }

    /// Trace inner product `<A, B> = trace(Aᵀ B)`.
    pub fn inner(&self, other: &DenseMatrix) -> Result<f64> {
        self.ensure_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Keeps the main diagonal and zeroes everything else.
    pub fn diagonal_part(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.rows, self.cols, |i, j| if i == j { self.get(i, j) } else { 0.0 })
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> Result<f64> {
        self.ensure_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    fn to_faer(&self) -> faer::Mat<f64> {
        faer::Mat::from_fn(self.rows, self.cols, |i, j| self.data[i * self.cols + j])
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// The index set Ω of observed entries, stored as a dense boolean grid.
#[derive(Clone, PartialEq, Eq)]
pub struct ObservationSet {
    rows: usize,
    cols: usize,
    observed: Vec<bool>,
    count: usize,
}

impl ObservationSet {
    /// Builds Ω from 0-based `(i, j)` pairs. Duplicates and out-of-range
    /// pairs are rejected.
    pub fn new(rows: usize, cols: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = Self::empty(rows, cols);
        for (i, j) in pairs {
            if i >= rows || j >= cols {
                return Err(Error::invalid(format!(
                    "index ({i}, {j}) out of range for {rows}x{cols}"
                )));
            }
            if set.observed[i * cols + j] {
                return Err(Error::invalid(format!("duplicate index ({i}, {j})")));
            }
            set.observed[i * cols + j] = true;
            set.count += 1;
        }
        Ok(set)
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            observed: vec![false; rows * cols],
            count: 0,
        }
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            observed: vec![true; rows * cols],
            count: rows * cols,
        }
    }

    /// Builds Ω from a row-major boolean grid.
    pub fn from_flags(rows: usize, cols: usize, flags: Vec<bool>) -> Result<Self> {
        if flags.len() != rows * cols {
            return Err(Error::InvalidShape {
                rows,
                cols,
                len: flags.len(),
            });
        }
        let count = flags.iter().filter(|&&b| b).count();
        Ok(Self {
            rows,
            cols,
            observed: flags,
            count,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn is_full(&self) -> bool {
        self.count == self.rows * self.cols
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i < self.rows && j < self.cols && self.observed[i * self.cols + j]
    }

    pub fn flags(&self) -> &[bool] {
        &self.observed
    }

    /// Observed pairs in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let cols = self.cols;
        self.observed
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(p, _)| (p / cols, p % cols))
    }

    pub fn complement(&self) -> ObservationSet {
        ObservationSet {
            rows: self.rows,
            cols: self.cols,
            observed: self.observed.iter().map(|b| !b).collect(),
            count: self.rows * self.cols - self.count,
        }
    }

    pub fn intersection(&self, other: &ObservationSet) -> Result<ObservationSet> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                expected: self.shape(),
                found: other.shape(),
            });
        }
        let flags = self
            .observed
            .iter()
            .zip(&other.observed)
            .map(|(&a, &b)| a && b)
            .collect();
        ObservationSet::from_flags(self.rows, self.cols, flags)
    }

    /// Fraction of entries that are not observed.
    pub fn missing_fraction(&self) -> f64 {
        let total = self.rows * self.cols;
        (total - self.count) as f64 / total as f64
    }

    pub(crate) fn ensure_matches(&self, x: &DenseMatrix) -> Result<()> {
        if self.shape() != x.shape() {
            return Err(Error::DimensionMismatch {
                expected: self.shape(),
                found: x.shape(),
            });
        }
        Ok(())
    }
}

impl fmt::Debug for ObservationSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ObservationSet {}x{} ({} observed)",
            self.rows, self.cols, self.count
        )
    }
}

/// The masking operator P_Ω: keeps observed entries, zeroes the rest.
pub fn apply_mask(x: &DenseMatrix, omega: &ObservationSet) -> Result<DenseMatrix> {
    omega.ensure_matches(x)?;
    let data = x
        .data
        .iter()
        .zip(&omega.observed)
        .map(|(&v, &keep)| if keep { v } else { 0.0 })
        .collect();
    Ok(DenseMatrix {
        rows: x.rows,
        cols: x.cols,
        data,
    })
}

/// Thin SVD `X = U diag(sigma) Vᵀ` with `r = min(m, n)`.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub vt: DenseMatrix,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> DenseMatrix {
        self.reconstruct_with(&self.sigma)
    }

    /// `U diag(values) Vᵀ` for replacement singular values. Trailing values
    /// beyond `values.len()` are taken as zero.
    pub fn reconstruct_with(&self, values: &[f64]) -> DenseMatrix {
        let (m, r) = self.u.shape();
        let n = self.vt.cols();
        let mut data = vec![0.0; m * n];
        for (l, &s) in values.iter().enumerate().take(r) {
            if s == 0.0 {
                continue;
            }
            let v_row = self.vt.row(l);
            for i in 0..m {
                let coef = self.u.get(i, l) * s;
                if coef == 0.0 {
                    continue;
                }
                let out = &mut data[i * n..(i + 1) * n];
                for (o, &v) in out.iter_mut().zip(v_row) {
                    *o += coef * v;
                }
            }
        }
        DenseMatrix { rows: m, cols: n, data }
    }

    /// Number of singular values above `RANK_EPS * sigma_1`.
    pub fn rank(&self) -> usize {
        numerical_rank(&self.sigma)
    }
}

pub(crate) fn numerical_rank(sigma: &[f64]) -> usize {
    let top = sigma.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    sigma.iter().filter(|&&s| s > RANK_EPS * top).count()
}

/// Thin SVD with singular values sorted nonincreasing.
pub fn svd(x: &DenseMatrix) -> Result<SvdFactors> {
    let decomposition = x.to_faer().thin_svd().map_err(|_| Error::SvdFailed)?;
    let (u, s, v) = (decomposition.U(), decomposition.S(), decomposition.V());
    let values: Vec<f64> = (0..x.rows().min(x.cols())).map(|l| s[l]).collect();

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    let r = order.len();
    let u_sorted = DenseMatrix::from_fn(x.rows(), r, |i, l| u[(i, order[l])]);
    let vt_sorted = DenseMatrix::from_fn(r, x.cols(), |l, j| v[(j, order[l])]);
    let sigma = order.iter().map(|&l| values[l].max(0.0)).collect();
    Ok(SvdFactors {
        u: u_sorted,
        sigma,
        vt: vt_sorted,
    })
}

/// Singular values only, sorted nonincreasing.
pub fn singular_values(x: &DenseMatrix) -> Result<Vec<f64>> {
    let mut values: Vec<f64> = x
        .to_faer()
        .singular_values()
        .map_err(|_| Error::SvdFailed)?
        .into_iter()
        .map(|v| v.max(0.0))
        .collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    Frobenius,
    Spectral,
    Nuclear,
    /// Sum of the `k` largest singular values.
    KyFan(usize),
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormKind::Frobenius => write!(f, "frobenius"),
            NormKind::Spectral => write!(f, "spectral"),
            NormKind::Nuclear => write!(f, "nuclear"),
            NormKind::KyFan(k) => write!(f, "kyfan({k})"),
        }
    }
}

/// Ky-Fan `k` norm of an already sorted spectrum.
pub(crate) fn kyfan_of_sorted(sigma: &[f64], k: usize) -> f64 {
    sigma.iter().take(k).sum()
}

pub fn norm(x: &DenseMatrix, kind: NormKind) -> Result<f64> {
    match kind {
        NormKind::Frobenius => Ok(x.frobenius_norm()),
        NormKind::Spectral => Ok(singular_values(x)?[0]),
        NormKind::Nuclear => Ok(singular_values(x)?.iter().sum()),
        NormKind::KyFan(k) => {
            let r = x.rows().min(x.cols());
            if k == 0 || k > r {
                return Err(Error::invalid(format!(
                    "Ky-Fan order {k} must lie in 1..={r}"
                )));
            }
            Ok(kyfan_of_sorted(&singular_values(x)?, k))
        }
    }
}
