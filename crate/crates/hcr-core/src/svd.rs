//! Singular value decomposition of small coefficient matrices and an
//! empirical random-matrix null for singular-value significance.
//!
//! The matrices here are tiny (|B_x| x |B_y|, typically at most 16 x 16), so
//! a one-sided Jacobi sweep is both simple and accurate; the contract is the
//! decomposition invariants, not the algorithm.

use std::path::Path;

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Thin SVD with u, v orthonormal and sigma sorted nonincreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdDecomposition<T> {
    pub u: Array2<T>,
    pub sigma: Vec<T>,
    pub v: Array2<T>,
}

impl<T: Real> SvdDecomposition<T> {
    /// u diag(sigma) v^T.
    pub fn reconstruct(&self) -> Array2<T> {
        let r = self.sigma.len();
        let mut scaled = self.u.clone();
        for j in 0..r {
            for val in scaled.column_mut(j) {
                *val *= self.sigma[j];
            }
        }
        scaled.dot(&self.v.t())
    }
}

/// One-sided Jacobi on a tall matrix (rows >= cols): orthogonalize columns
/// by plane rotations, accumulating them in `v` when provided.
fn jacobi_columns<T: Real>(w: &mut Array2<T>, mut v: Option<&mut Array2<T>>) {
    let q = w.ncols();
    let eps = T::epsilon();
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..q {
            for j in (i + 1)..q {
                let mut alpha = T::zero();
                let mut beta = T::zero();
                let mut gamma = T::zero();
                for r in 0..w.nrows() {
                    let wi = w[[r, i]];
                    let wj = w[[r, j]];
                    alpha += wi * wi;
                    beta += wj * wj;
                    gamma += wi * wj;
                }
                if gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::of(2.0) * gamma);
                let t = if zeta >= T::zero() {
                    T::one() / (zeta + (T::one() + zeta * zeta).sqrt())
                } else {
                    -T::one() / (-zeta + (T::one() + zeta * zeta).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for r in 0..w.nrows() {
                    let wi = w[[r, i]];
                    let wj = w[[r, j]];
                    w[[r, i]] = c * wi - s * wj;
                    w[[r, j]] = s * wi + c * wj;
                }
                if let Some(v) = v.as_deref_mut() {
                    for r in 0..v.nrows() {
                        let vi = v[[r, i]];
                        let vj = v[[r, j]];
                        v[[r, i]] = c * vi - s * vj;
                        v[[r, j]] = s * vi + c * vj;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
}

/// Column norms after Jacobi, sorted nonincreasing.
fn singular_values_only<T: Real>(mut w: Array2<T>) -> Vec<T> {
    if w.nrows() < w.ncols() {
        w = w.t().to_owned();
    }
    jacobi_columns(&mut w, None);
    let mut sigma: Vec<T> = (0..w.ncols())
        .map(|j| w.column(j).iter().map(|&x| x * x).sum::<T>().sqrt())
        .collect();
    sigma.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    sigma
}

/// Thin SVD of a p x q matrix with a deterministic sign convention: the
/// largest-magnitude entry of each u column is positive.
pub fn svd_coefficients<T: Real>(matrix: &Array2<T>) -> Result<SvdDecomposition<T>> {
    for ((i, j), v) in matrix.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite { row: i, col: j });
        }
    }
    let (p, q) = matrix.dim();
    if p == 0 || q == 0 {
        return Err(Error::Config("svd input must be nonempty".into()));
    }
    let transposed = p < q;
    let mut w = if transposed { matrix.t().to_owned() } else { matrix.clone() };
    let r = w.ncols();
    let mut v = Array2::eye(r);
    jacobi_columns(&mut w, Some(&mut v));

    let mut order: Vec<usize> = (0..r).collect();
    let norms: Vec<T> = (0..r)
        .map(|j| w.column(j).iter().map(|&x| x * x).sum::<T>().sqrt())
        .collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).expect("finite norms"));

    let rows = w.nrows();
    let mut u = Array2::zeros((rows, r));
    let mut v_sorted = Array2::zeros((r, r));
    let mut sigma = Vec::with_capacity(r);
    for (dst, &src) in order.iter().enumerate() {
        sigma.push(norms[src]);
        if norms[src] > T::zero() {
            for i in 0..rows {
                u[[i, dst]] = w[[i, src]] / norms[src];
            }
        }
        for i in 0..r {
            v_sorted[[i, dst]] = v[[i, src]];
        }
    }
    complete_orthonormal(&mut u, &sigma);

    // sign convention on the left factor
    for j in 0..r {
        let mut best = 0;
        let mut best_abs = T::zero();
        for i in 0..rows {
            if u[[i, j]].abs() > best_abs {
                best_abs = u[[i, j]].abs();
                best = i;
            }
        }
        if u[[best, j]] < T::zero() {
            for i in 0..rows {
                u[[i, j]] = -u[[i, j]];
            }
            for i in 0..r {
                v_sorted[[i, j]] = -v_sorted[[i, j]];
            }
        }
    }

    if transposed {
        Ok(SvdDecomposition { u: v_sorted, sigma, v: u })
    } else {
        Ok(SvdDecomposition { u, sigma, v: v_sorted })
    }
}

/// Replace exactly-zero columns (zero singular values) with unit vectors
/// orthogonal to the existing ones, so u stays orthonormal.
fn complete_orthonormal<T: Real>(u: &mut Array2<T>, sigma: &[T]) {
    let rows = u.nrows();
    for j in 0..sigma.len() {
        if sigma[j] > T::zero() {
            continue;
        }
        let mut best: Option<(T, Vec<T>)> = None;
        for cand in 0..rows {
            let mut vec = vec![T::zero(); rows];
            vec[cand] = T::one();
            for other in 0..sigma.len() {
                if other == j {
                    continue;
                }
                if sigma[other] == T::zero() && other > j {
                    continue; // not yet filled
                }
                let dot: T = (0..rows).map(|i| vec[i] * u[[i, other]]).sum();
                for i in 0..rows {
                    vec[i] -= dot * u[[i, other]];
                }
            }
            let norm: T = vec.iter().map(|&x| x * x).sum::<T>().sqrt();
            if best.as_ref().is_none_or(|(bn, _)| norm > *bn) {
                best = Some((norm, vec));
            }
        }
        if let Some((norm, vec)) = best {
            for i in 0..rows {
                u[[i, j]] = vec[i] / norm;
            }
        }
    }
}

/// Empirical null for singular values: sorted spectra of `trials` random
/// p x q matrices with independent N(0,1) entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingularNull<T> {
    pub p: usize,
    pub q: usize,
    pub trials: usize,
    pub seed: u64,
    /// trials x min(p, q); each row sorted nonincreasing.
    pub sorted_samples: Array2<T>,
}

/// Simulate the singular-value null; trials run in parallel with per-trial
/// RNG streams derived from (seed, trial index).
pub fn simulate_singular_null<T: Real>(
    p: usize,
    q: usize,
    trials: usize,
    seed: u64,
) -> Result<SingularNull<T>> {
    if p == 0 || q == 0 {
        return Err(Error::Config("null shape must be nonzero".into()));
    }
    if trials < 1000 {
        return Err(Error::Config(format!("trials = {trials} below minimum 1000")));
    }
    let r = p.min(q);
    let rows: Vec<Vec<T>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64 + 1);
            let m = Array2::from_shape_fn((p, q), |_| T::of(StandardNormal.sample(&mut rng)));
            singular_values_only(m)
        })
        .collect();
    let mut sorted_samples = Array2::zeros((trials, r));
    for (t, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            sorted_samples[[t, j]] = v;
        }
    }
    Ok(SingularNull { p, q, trials, seed, sorted_samples })
}

impl<T: Real + Serialize + for<'de> Deserialize<'de>> SingularNull<T> {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

/// A singular value found significant against the empirical null.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificantSingularValue<T> {
    /// 1-based rank of the singular value.
    pub rank: usize,
    pub value: T,
    pub p_value: T,
}

/// Per-rank marginal comparison against the null: p_i is the add-one
/// fraction of null trials whose i-th sorted singular value reaches the
/// observed one; ranks with p_i < alpha are returned.
pub fn svd_significance<T: Real>(
    decomp: &SvdDecomposition<T>,
    null: &SingularNull<T>,
    alpha: T,
) -> Result<Vec<SignificantSingularValue<T>>> {
    let r = decomp.sigma.len();
    if null.sorted_samples.ncols() != r {
        return Err(Error::Config(format!(
            "null shape {}x{} does not match decomposition rank {r}",
            null.p, null.q
        )));
    }
    let mut out = Vec::new();
    for (i, &observed) in decomp.sigma.iter().enumerate() {
        let count = null
            .sorted_samples
            .index_axis(Axis(1), i)
            .iter()
            .filter(|&&s| s >= observed)
            .count();
        let p = T::from_count(count + 1) / T::from_count(null.trials + 1);
        if p < alpha {
            out.push(SignificantSingularValue { rank: i + 1, value: observed, p_value: p });
        }
    }
    Ok(out)
}
