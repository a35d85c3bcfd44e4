//! Normalization of each coordinate to a nearly uniform distribution on (0, 1),
//! either by empirical ranks (EDF) or by a fitted Gaussian CDF.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::SampleMatrix;
use crate::scalar::Real;
use crate::special::norm_cdf;

/// An n x d matrix with every entry strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSample<T> {
    values: Array2<T>,
}

impl<T: Real> NormalizedSample<T> {
    /// Wrap a matrix, validating the open-interval invariant.
    pub fn new(values: Array2<T>) -> Result<Self> {
        for ((i, j), v) in values.indexed_iter() {
            if !(*v > T::zero() && *v < T::one()) {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
        Ok(Self { values })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, T> {
        self.values.column(j)
    }
}

/// Per-column Gaussian parameters for CDF normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams<T> {
    pub mean: T,
    pub std: T,
}

/// Parametric CDF specification covering every column of a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfSpec<T> {
    pub params: Vec<GaussianParams<T>>,
}

impl<T: Real> CdfSpec<T> {
    pub fn gaussian(params: Vec<GaussianParams<T>>) -> Result<Self> {
        for (j, p) in params.iter().enumerate() {
            if !(p.std > T::zero()) {
                return Err(Error::Config(format!("column {j}: sigma must be > 0")));
            }
        }
        Ok(Self { params })
    }
}

/// Average ranks of a column, 1-based, with ties receiving the mean of the
/// ranks they span.
fn average_ranks<T: Real>(column: ArrayView1<'_, T>) -> Vec<T> {
    let n = column.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| column[a].partial_cmp(&column[b]).expect("finite values"));

    let mut ranks = vec![T::zero(); n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && column[order[end]] == column[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1 ..= end share the average (start + end + 1) / 2
        let avg = T::of((start + end + 1) as f64 / 2.0);
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

/// Rank-transform each column: the value with (average) rank i maps to
/// (i - 1/2) / n.
pub fn edf_normalize<T: Real>(sample: &SampleMatrix<T>) -> Result<NormalizedSample<T>> {
    let n = sample.n_rows();
    if n < 2 {
        return Err(Error::SampleTooSmall { n, min: 2 });
    }
    let d = sample.n_cols();
    let nt = T::from_count(n);
    let half = T::of(0.5);
    let mut out = Array2::zeros((n, d));
    for j in 0..d {
        let ranks = average_ranks(sample.column(j));
        for (i, r) in ranks.into_iter().enumerate() {
            out[[i, j]] = (r - half) / nt;
        }
    }
    Ok(NormalizedSample { values: out })
}

/// Map each entry through its column's Gaussian CDF, clamped to
/// [eps, 1 - eps] so downstream polynomial evaluation stays finite.
pub fn cdf_normalize<T: Real>(
    sample: &SampleMatrix<T>,
    spec: &CdfSpec<T>,
) -> Result<NormalizedSample<T>> {
    let d = sample.n_cols();
    if spec.params.len() != d {
        return Err(Error::Dim { expected: d, got: spec.params.len() });
    }
    for (j, p) in spec.params.iter().enumerate() {
        if !(p.std > T::zero()) {
            return Err(Error::Config(format!("column {j}: sigma must be > 0")));
        }
    }
    let eps = T::epsilon();
    let hi = T::one() - eps;
    let n = sample.n_rows();
    let mut out = Array2::zeros((n, d));
    for j in 0..d {
        let p = &spec.params[j];
        for i in 0..n {
            let u = norm_cdf((sample.values()[[i, j]] - p.mean) / p.std);
            out[[i, j]] = u.max(eps).min(hi);
        }
    }
    Ok(NormalizedSample { values: out })
}

/// Fit per-column Gaussian parameters: mean and standard deviation with
/// divisor n - 1.
pub fn fit_gaussian_params<T: Real>(sample: &SampleMatrix<T>) -> Result<CdfSpec<T>> {
    let n = sample.n_rows();
    if n < 2 {
        return Err(Error::SampleTooSmall { n, min: 2 });
    }
    let nt = T::from_count(n);
    let mut params = Vec::with_capacity(sample.n_cols());
    for j in 0..sample.n_cols() {
        let col = sample.column(j);
        let mean = col.iter().copied().sum::<T>() / nt;
        let ss = col
            .iter()
            .map(|&v| (v - mean) * (v - mean))
            .sum::<T>();
        let var = ss / T::from_count(n - 1);
        if var == T::zero() {
            return Err(Error::DegenerateColumn { col: j });
        }
        params.push(GaussianParams { mean, std: var.sqrt() });
    }
    Ok(CdfSpec { params })
}
