//! HSIC baseline: Gaussian kernels with median-heuristic bandwidths, the
//! V-statistic (1/n²) Tr(KHLH), and gamma or permutation calibration.
//!
//! Cost is O(n²) time and memory by construction, the contrast point to the
//! O(n |B|) coefficient tests in the rest of the crate.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::ingest::{PairedSample, SampleMatrix};
use crate::scalar::Real;
use crate::special::gamma_dist_sf;

/// Exponent form of the Gaussian kernel: the standard squared Euclidean
/// distance, or the plain distance for fidelity experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelExponent {
    Squared,
    Linear,
}

/// Bandwidth selection for the two kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthSpec<T> {
    Median,
    MedianX2,
    Fixed { sigma_x: T, sigma_y: T },
}

/// How the p-value was calibrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Calibration {
    Gamma,
    Permutation,
}

/// Symmetric Gram matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix<T> {
    k: Array2<T>,
    sigma: T,
}

impl<T: Real> KernelMatrix<T> {
    pub fn matrix(&self) -> &Array2<T> {
        &self.k
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn n(&self) -> usize {
        self.k.nrows()
    }
}

/// HSIC test outcome.
#[derive(Debug, Clone, Serialize)]
pub struct HsicResult<T> {
    pub statistic: T,
    pub p_value: T,
    pub calibration: Calibration,
    pub sigma_x: T,
    pub sigma_y: T,
    pub alpha: T,
    pub reject: bool,
    pub meta: BTreeMap<String, Value>,
}

/// Median of the nonzero pairwise Euclidean distances.
pub fn median_heuristic<T: Real>(sample: &SampleMatrix<T>) -> Result<T> {
    let n = sample.n_rows();
    if n < 2 {
        return Err(Error::SampleTooSmall { n, min: 2 });
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let d2: T = sample
                .values()
                .row(i)
                .iter()
                .zip(sample.values().row(j).iter())
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum();
            if d2 > T::zero() {
                dists.push(d2.sqrt());
            }
        }
    }
    if dists.is_empty() {
        return Err(Error::DegenerateSample);
    }
    dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let mid = dists.len() / 2;
    Ok(if dists.len() % 2 == 1 {
        dists[mid]
    } else {
        (dists[mid - 1] + dists[mid]) / T::of(2.0)
    })
}

/// Gram matrix K_ij = exp(-dist(x_i, x_j) / (2 σ²)) with the chosen
/// distance exponent.
pub fn gaussian_kernel<T: Real>(
    sample: &SampleMatrix<T>,
    sigma: T,
    exponent: KernelExponent,
) -> Result<KernelMatrix<T>> {
    if !(sigma > T::zero()) {
        return Err(Error::Config(format!("kernel bandwidth must be > 0, got {sigma}")));
    }
    let n = sample.n_rows();
    let denom = T::of(2.0) * sigma * sigma;
    let mut k = Array2::zeros((n, n));
    for i in 0..n {
        k[[i, i]] = T::one();
        for j in (i + 1)..n {
            let d2: T = sample
                .values()
                .row(i)
                .iter()
                .zip(sample.values().row(j).iter())
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum();
            let arg = match exponent {
                KernelExponent::Squared => d2,
                KernelExponent::Linear => d2.sqrt(),
            };
            let v = (-arg / denom).exp();
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    Ok(KernelMatrix { k, sigma })
}

/// Double-center a Gram matrix: HKH with H = I - J/n.
pub fn double_center<T: Real>(k: &Array2<T>) -> Array2<T> {
    let n = k.nrows();
    let nt = T::from_count(n);
    let row_means: Vec<T> = (0..n)
        .map(|i| k.row(i).iter().copied().sum::<T>() / nt)
        .collect();
    let grand = row_means.iter().copied().sum::<T>() / nt;
    Array2::from_shape_fn((n, n), |(i, j)| k[[i, j]] - row_means[i] - row_means[j] + grand)
}

/// The V-statistic (1/n²) Tr(K H L H), computed by double-centering K
/// instead of materializing H; O(n²).
pub fn hsic_vstat<T: Real>(k: &KernelMatrix<T>, l: &KernelMatrix<T>) -> Result<T> {
    if k.n() != l.n() {
        return Err(Error::Dim { expected: k.n(), got: l.n() });
    }
    let kc = double_center(&k.k);
    let n = k.n();
    let sum: T = kc.iter().zip(l.k.iter()).map(|(&a, &b)| a * b).sum();
    Ok(sum / T::from_count(n * n))
}

fn resolve_bandwidths<T: Real>(
    pair: &PairedSample<T>,
    bandwidth: BandwidthSpec<T>,
) -> Result<(T, T)> {
    Ok(match bandwidth {
        BandwidthSpec::Median => (median_heuristic(&pair.x)?, median_heuristic(&pair.y)?),
        BandwidthSpec::MedianX2 => (
            T::of(2.0) * median_heuristic(&pair.x)?,
            T::of(2.0) * median_heuristic(&pair.y)?,
        ),
        BandwidthSpec::Fixed { sigma_x, sigma_y } => (sigma_x, sigma_y),
    })
}

/// Null statistics under permutations of y, from pre-centered matrices:
/// (1/n²) Σ_ij K̃_ij L̃_{π(i)π(j)} for each permutation.
fn permuted_stats<T: Real>(kc: &Array2<T>, lc: &Array2<T>, b: usize, seed: u64) -> Vec<T> {
    let n = kc.nrows();
    let n2 = T::from_count(n * n);
    (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep as u64 + 1);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let mut sum = T::zero();
            for i in 0..n {
                let pi = perm[i];
                for j in 0..n {
                    sum += kc[[i, j]] * lc[[pi, perm[j]]];
                }
            }
            sum / n2
        })
        .collect()
}

const GAMMA_NULL_PERMS: usize = 200;

/// HSIC test with gamma calibration: the null mean and variance of the
/// statistic are estimated from 200 internal permutations of y, then the
/// moment-matched gamma upper tail is evaluated at the observed statistic.
pub fn hsic_gamma_test<T: Real>(
    pair: &PairedSample<T>,
    alpha: T,
    bandwidth: BandwidthSpec<T>,
    exponent: KernelExponent,
    seed: u64,
) -> Result<HsicResult<T>> {
    let n = pair.n();
    if n < 20 {
        return Err(Error::SampleTooSmall { n, min: 20 });
    }
    let (sigma_x, sigma_y) = resolve_bandwidths(pair, bandwidth)?;
    let k = gaussian_kernel(&pair.x, sigma_x, exponent)?;
    let l = gaussian_kernel(&pair.y, sigma_y, exponent)?;
    let kc = double_center(&k.k);
    let lc = double_center(&l.k);
    let nt = T::from_count(n);
    let observed: T =
        kc.iter().zip(lc.iter()).map(|(&a, &b)| a * b).sum::<T>() / (nt * nt);

    let null = permuted_stats(&kc, &lc, GAMMA_NULL_PERMS, seed);
    let bt = T::from_count(GAMMA_NULL_PERMS);
    let mean = null.iter().copied().sum::<T>() / bt;
    let var = null.iter().map(|&s| (s - mean) * (s - mean)).sum::<T>()
        / (bt - T::one());

    // moment matching: n·HSIC ~ Gamma(shape a, scale b)
    let p_value = if mean > T::zero() && var > T::zero() {
        let shape = mean * mean / var;
        let scale = nt * var / mean;
        gamma_dist_sf(nt * observed, shape, scale)
    } else {
        T::one()
    };
    let mut result = HsicResult {
        statistic: observed,
        p_value,
        calibration: Calibration::Gamma,
        sigma_x,
        sigma_y,
        alpha,
        reject: p_value < alpha,
        meta: BTreeMap::new(),
    };
    result.meta.insert("n".into(), json!(n));
    result.meta.insert("null_perms".into(), json!(GAMMA_NULL_PERMS));
    result.meta.insert("seed".into(), json!(seed));
    result
        .meta
        .insert("null_mean".into(), json!(mean.to_f64().unwrap_or(f64::NAN)));
    result
        .meta
        .insert("null_var".into(), json!(var.to_f64().unwrap_or(f64::NAN)));
    Ok(result)
}

/// HSIC test with permutation calibration:
/// p = (1 + #{null >= observed}) / (B + 1).
pub fn hsic_permutation_test<T: Real>(
    pair: &PairedSample<T>,
    alpha: T,
    bandwidth: BandwidthSpec<T>,
    exponent: KernelExponent,
    b: usize,
    seed: u64,
) -> Result<HsicResult<T>> {
    if b < 100 {
        return Err(Error::Config(format!("permutation count B = {b} below minimum 100")));
    }
    let n = pair.n();
    let (sigma_x, sigma_y) = resolve_bandwidths(pair, bandwidth)?;
    let k = gaussian_kernel(&pair.x, sigma_x, exponent)?;
    let l = gaussian_kernel(&pair.y, sigma_y, exponent)?;
    let kc = double_center(&k.k);
    let lc = double_center(&l.k);
    let nt = T::from_count(n);
    let observed: T =
        kc.iter().zip(lc.iter()).map(|(&a, &b)| a * b).sum::<T>() / (nt * nt);

    let null = permuted_stats(&kc, &lc, b, seed);
    let count = null.iter().filter(|&&s| s >= observed).count();
    let p_value = T::from_count(count + 1) / T::from_count(b + 1);

    let mut result = HsicResult {
        statistic: observed,
        p_value,
        calibration: Calibration::Permutation,
        sigma_x,
        sigma_y,
        alpha,
        reject: p_value < alpha,
        meta: BTreeMap::new(),
    };
    result.meta.insert("n".into(), json!(n));
    result.meta.insert("B_perm".into(), json!(b));
    result.meta.insert("seed".into(), json!(seed));
    Ok(result)
}
