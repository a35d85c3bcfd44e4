//! Mixed-moment coefficient estimation between two normalized samples, and
//! normalization of the coefficients into z-scores for hypothesis testing.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::basis::{product_unchecked, BasisIndexSet, BasisKind};
use crate::error::{Error, Result};
use crate::normalize::NormalizedSample;
use crate::scalar::Real;

/// How to normalize coefficients into z-scores.
///
/// With the unit rule the product variance is taken to be 1, which holds for
/// pairwise features under independence; the empirical rule divides by the
/// per-feature sample variance and is required for triplewise and higher
/// bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceRule {
    Unit,
    Empirical,
}

/// Estimated mixed moments a, their per-feature product variances v, and
/// (after [`normalize_scores`]) the normalized z-scores.
///
/// Rows follow `bx` members, columns follow `by` members, both in their
/// lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable<T> {
    a: Array2<T>,
    v: Array2<T>,
    z: Option<Array2<T>>,
    variance_rule: Option<VarianceRule>,
    n: usize,
    bx: BasisIndexSet,
    by: BasisIndexSet,
}

impl<T: Real> CoefficientTable<T> {
    /// Assemble a table from precomputed parts (mostly useful in tests and
    /// for deserialization).
    pub fn from_parts(
        a: Array2<T>,
        v: Array2<T>,
        n: usize,
        bx: BasisIndexSet,
        by: BasisIndexSet,
    ) -> Result<Self> {
        if a.dim() != (bx.len(), by.len()) {
            return Err(Error::Dim { expected: bx.len() * by.len(), got: a.len() });
        }
        if v.dim() != a.dim() {
            return Err(Error::Dim { expected: a.len(), got: v.len() });
        }
        Ok(Self { a, v, z: None, variance_rule: None, n, bx, by })
    }

    pub fn a(&self) -> &Array2<T> {
        &self.a
    }

    pub fn v(&self) -> &Array2<T> {
        &self.v
    }

    /// Normalized scores; present after [`normalize_scores`].
    pub fn z(&self) -> Option<&Array2<T>> {
        self.z.as_ref()
    }

    pub fn variance_rule(&self) -> Option<VarianceRule> {
        self.variance_rule
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bx(&self) -> &BasisIndexSet {
        &self.bx
    }

    pub fn by(&self) -> &BasisIndexSet {
        &self.by
    }

    /// Row-major flattened z-scores.
    pub fn flattened_scores(&self) -> Option<Vec<T>> {
        self.z.as_ref().map(|z| z.iter().copied().collect())
    }

    /// JSON form with nested arrays: {bx, by, n, a[][], v[][], z[][]}.
    pub fn to_json(&self) -> serde_json::Value {
        let mat = |m: &Array2<T>| -> serde_json::Value {
            json!(m
                .rows()
                .into_iter()
                .map(|r| r.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect::<Vec<_>>())
                .collect::<Vec<_>>())
        };
        json!({
            "bx": self.bx,
            "by": self.by,
            "n": self.n,
            "a": mat(&self.a),
            "v": mat(&self.v),
            "z": self.z.as_ref().map(|z| mat(z)),
        })
    }
}

/// Per-row product features f_j(x) for every member of a basis; n x |B|.
///
/// This materialized path costs O(n |B|) memory and backs the permutation
/// tests and the SVD pipeline, where the same features are reused many times.
pub fn feature_matrix<T: Real>(
    sample: &NormalizedSample<T>,
    basis: &BasisIndexSet,
) -> Result<Array2<T>> {
    if basis.dim() != sample.dim() {
        return Err(Error::Dim { expected: sample.dim(), got: basis.dim() });
    }
    let n = sample.n();
    let d = sample.dim();
    let m = basis.degree() as usize;
    let mut out = Array2::zeros((n, basis.len()));
    let mut scratch = vec![T::zero(); d * (m + 1)];
    for i in 0..n {
        for c in 0..d {
            crate::basis::legendre_all_unchecked(
                basis.degree(),
                sample.values()[[i, c]],
                &mut scratch[c * (m + 1)..(c + 1) * (m + 1)],
            );
        }
        for (b, member) in basis.iter().enumerate() {
            let mut acc = T::one();
            for (c, &jc) in member.0.iter().enumerate() {
                if jc != 0 {
                    acc *= scratch[c * (m + 1) + jc as usize];
                }
            }
            out[[i, b]] = acc;
        }
    }
    Ok(out)
}

/// Estimate every mixed moment a_{j,k} = mean_i f_j(x_i) f_k(y_i) together
/// with the population variance (divisor n) of the per-row products.
///
/// One pass per feature, O(n) each and O(|B_x||B_y|) memory; features are
/// independent and run in parallel, each accumulating in fixed row order so
/// the result does not depend on scheduling.
pub fn estimate<T: Real>(
    xn: &NormalizedSample<T>,
    yn: &NormalizedSample<T>,
    bx: &BasisIndexSet,
    by: &BasisIndexSet,
) -> Result<CoefficientTable<T>> {
    if xn.n() != yn.n() {
        return Err(Error::Pairing { x_rows: xn.n(), y_rows: yn.n() });
    }
    if bx.dim() != xn.dim() {
        return Err(Error::Dim { expected: xn.dim(), got: bx.dim() });
    }
    if by.dim() != yn.dim() {
        return Err(Error::Dim { expected: yn.dim(), got: by.dim() });
    }
    let n = xn.n();
    let p = bx.len();
    let q = by.len();

    let x_rows: Vec<&[T]> = (0..n)
        .map(|i| xn.values().row(i).to_slice().expect("contiguous row"))
        .collect();
    let y_rows: Vec<&[T]> = (0..n)
        .map(|i| yn.values().row(i).to_slice().expect("contiguous row"))
        .collect();

    let stats: Vec<(T, T)> = (0..p * q)
        .into_par_iter()
        .map(|flat| {
            let j = &bx.members()[flat / q];
            let k = &by.members()[flat % q];
            // Welford accumulation over rows
            let mut mean = T::zero();
            let mut m2 = T::zero();
            for i in 0..n {
                let prod = product_unchecked(j, x_rows[i]) * product_unchecked(k, y_rows[i]);
                let t = T::from_count(i + 1);
                let delta = prod - mean;
                mean += delta / t;
                m2 += delta * (prod - mean);
            }
            (mean, m2 / T::from_count(n))
        })
        .collect();

    let mut a = Array2::zeros((p, q));
    let mut v = Array2::zeros((p, q));
    for (flat, (mean, var)) in stats.into_iter().enumerate() {
        a[[flat / q, flat % q]] = mean;
        v[[flat / q, flat % q]] = var;
    }
    Ok(CoefficientTable {
        a,
        v,
        z: None,
        variance_rule: None,
        n,
        bx: bx.clone(),
        by: by.clone(),
    })
}

/// Fill in normalized z-scores: z = sqrt(n) a under the unit rule,
/// z = sqrt(n) a / sqrt(v) under the empirical rule.
pub fn normalize_scores<T: Real>(
    table: &CoefficientTable<T>,
    rule: VarianceRule,
) -> Result<CoefficientTable<T>> {
    let sqrt_n = T::from_count(table.n).sqrt();
    let (p, q) = table.a.dim();
    let mut z = Array2::zeros((p, q));
    for jx in 0..p {
        for ky in 0..q {
            let a = table.a[[jx, ky]];
            z[[jx, ky]] = match rule {
                VarianceRule::Unit => sqrt_n * a,
                VarianceRule::Empirical => {
                    let var = table.v[[jx, ky]];
                    if var == T::zero() {
                        return Err(Error::DegenerateFeature {
                            j: table.bx.members()[jx].to_string(),
                            k: table.by.members()[ky].to_string(),
                        });
                    }
                    sqrt_n * a / var.sqrt()
                }
            };
        }
    }
    let mut out = table.clone();
    out.z = Some(z);
    out.variance_rule = Some(rule);
    Ok(out)
}

/// The rule the tests default to for a given basis pair: unit for pairwise
/// features, empirical otherwise.
pub fn default_rule(bx: &BasisIndexSet, by: &BasisIndexSet) -> VarianceRule {
    if bx.kind() == BasisKind::Pairwise && by.kind() == BasisKind::Pairwise {
        VarianceRule::Unit
    } else {
        VarianceRule::Empirical
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::MultiIndex;
    use crate::ingest::SampleMatrix;
    use crate::normalize::edf_normalize;
    use ndarray::arr2;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn normalized(values: &[f64]) -> NormalizedSample<f64> {
        let m = Array2::from_shape_vec((values.len(), 1), values.to_vec()).unwrap();
        NormalizedSample::new(m).unwrap()
    }

    fn uniform_sample(n: usize, d: usize, rng: &mut ChaCha8Rng) -> NormalizedSample<f64> {
        let m = Array2::from_shape_fn((n, d), |_| rng.random_range(1e-6..1.0 - 1e-6));
        NormalizedSample::new(m).unwrap()
    }

    #[test]
    fn identical_columns_first_moment() {
        // EDF ranks of 4 distinct points are {1/8, 3/8, 5/8, 7/8};
        // a_{1,1} = 3 * mean((2u-1)^2) = 3 * mean{9/16, 1/16, 1/16, 9/16}
        let x = SampleMatrix::from_column(&[10.0f64, 20.0, 30.0, 40.0]).unwrap();
        let xn = edf_normalize(&x).unwrap();
        let b = BasisIndexSet::pairwise(1, 1).unwrap();
        let t = estimate(&xn, &xn, &b, &b).unwrap();
        assert!((t.a()[[0, 0]] - 0.9375).abs() < 1e-14);
    }

    #[test]
    fn anticorrelated_pairing() {
        let xn = normalized(&[0.25, 0.75]);
        let yn = normalized(&[0.75, 0.25]);
        let b = BasisIndexSet::pairwise(1, 1).unwrap();
        let t = estimate(&xn, &yn, &b, &b).unwrap();
        assert!((t.a()[[0, 0]] + 0.75).abs() < 1e-14);
    }

    #[test]
    fn zero_multi_index_gives_marginal_moment() {
        // Against the all-zero index, the coefficient is the plain marginal
        // moment of the other side; for EDF ranks and f_1 it vanishes.
        let x = SampleMatrix::from_column(&[3.0f64, 1.0, 4.0, 1.5, 9.0, 2.6]).unwrap();
        let xn = edf_normalize(&x).unwrap();
        let bzero = BasisIndexSet::custom(1, 1, vec![MultiIndex(vec![0])]).unwrap();
        let bone = BasisIndexSet::custom(1, 1, vec![MultiIndex(vec![1])]).unwrap();
        let t = estimate(&xn, &xn, &bzero, &bone).unwrap();
        assert!(t.a()[[0, 0]].abs() < 1e-12);
    }

    #[test]
    fn rank_correlation_limit_for_identical_samples() {
        for n in [4usize, 16, 101] {
            let raw: Vec<f64> = (0..n).map(|i| (i as f64) * 1.7 - 3.0).collect();
            let x = SampleMatrix::from_column(&raw).unwrap();
            let xn = edf_normalize(&x).unwrap();
            let b = BasisIndexSet::pairwise(1, 1).unwrap();
            let t = estimate(&xn, &xn, &b, &b).unwrap();
            let a11 = t.a()[[0, 0]];
            let nf = n as f64;
            assert!((a11 - (nf * nf - 1.0) / (nf * nf)).abs() < 1e-12);
            assert!((0.93..=1.0).contains(&a11));
        }
    }

    #[test]
    fn estimate_invariant_under_joint_row_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xn = uniform_sample(40, 2, &mut rng);
        let yn = uniform_sample(40, 1, &mut rng);
        let bx = BasisIndexSet::pairwise(2, 3).unwrap();
        let by = BasisIndexSet::pairwise(1, 3).unwrap();
        let t1 = estimate(&xn, &yn, &bx, &by).unwrap();

        let perm: Vec<usize> = (0..40).rev().collect();
        let px = Array2::from_shape_fn((40, 2), |(i, j)| xn.values()[[perm[i], j]]);
        let py = Array2::from_shape_fn((40, 1), |(i, j)| yn.values()[[perm[i], j]]);
        let t2 = estimate(
            &NormalizedSample::new(px).unwrap(),
            &NormalizedSample::new(py).unwrap(),
            &bx,
            &by,
        )
        .unwrap();
        for (a, b) in t1.a().iter().zip(t2.a().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_scores_arithmetic() {
        let bx = BasisIndexSet::pairwise(1, 1).unwrap();
        let by = bx.clone();
        let t = CoefficientTable::from_parts(
            arr2(&[[0.2f64]]),
            arr2(&[[4.0]]),
            100,
            bx.clone(),
            by.clone(),
        )
        .unwrap();
        let unit = normalize_scores(&t, VarianceRule::Unit).unwrap();
        assert!((unit.z().unwrap()[[0, 0]] - 2.0).abs() < 1e-14);
        let emp = normalize_scores(&t, VarianceRule::Empirical).unwrap();
        assert!((emp.z().unwrap()[[0, 0]] - 1.0).abs() < 1e-14);

        let zero = CoefficientTable::from_parts(arr2(&[[0.0]]), arr2(&[[1.0]]), 50, bx, by).unwrap();
        assert_eq!(
            normalize_scores(&zero, VarianceRule::Unit).unwrap().z().unwrap()[[0, 0]],
            0.0
        );
    }

    #[test]
    fn empirical_rule_rejects_zero_variance() {
        let bx = BasisIndexSet::pairwise(1, 1).unwrap();
        let t = CoefficientTable::from_parts(
            arr2(&[[0.1]]),
            arr2(&[[0.0]]),
            10,
            bx.clone(),
            bx.clone(),
        )
        .unwrap();
        assert!(matches!(
            normalize_scores(&t, VarianceRule::Empirical),
            Err(Error::DegenerateFeature { .. })
        ));
    }

    #[test]
    fn welford_variance_matches_two_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xn = uniform_sample(200, 1, &mut rng);
        let yn = uniform_sample(200, 1, &mut rng);
        let b = BasisIndexSet::pairwise(1, 3).unwrap();
        let t = estimate(&xn, &yn, &b, &b).unwrap();

        let fx = feature_matrix(&xn, &b).unwrap();
        let fy = feature_matrix(&yn, &b).unwrap();
        for j in 0..3 {
            for k in 0..3 {
                let prods: Vec<f64> = (0..200).map(|i| fx[[i, j]] * fy[[i, k]]).collect();
                let mean = prods.iter().sum::<f64>() / 200.0;
                let var = prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / 200.0;
                assert!((t.a()[[j, k]] - mean).abs() < 1e-12);
                assert!((t.v()[[j, k]] - var).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn feature_kernel_trace_identity() {
        // sum of squared coefficients equals Tr(K^X K^Y) for the feature
        // kernels K = F F^T / n
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 50;
        let xn = uniform_sample(n, 1, &mut rng);
        let yn = uniform_sample(n, 1, &mut rng);
        let b = BasisIndexSet::pairwise(1, 4).unwrap();
        let t = estimate(&xn, &yn, &b, &b).unwrap();
        let sum_sq: f64 = t.a().iter().map(|a| a * a).sum();

        let fx = feature_matrix(&xn, &b).unwrap();
        let fy = feature_matrix(&yn, &b).unwrap();
        let kx = fx.dot(&fx.t()) / n as f64;
        let ky = fy.dot(&fy.t()) / n as f64;
        let trace: f64 = kx.iter().zip(ky.iter()).map(|(a, b)| a * b).sum();
        assert!((sum_sq - trace).abs() < 1e-10, "sum_sq={sum_sq} trace={trace}");
    }

    #[test]
    fn null_scores_look_standard_normal() {
        // Desk-size version of the null calibration: pooled z over
        // independent uniforms against N(0,1) by Kolmogorov-Smirnov.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let b = BasisIndexSet::pairwise(1, 4).unwrap();
        let mut pooled = Vec::new();
        for _ in 0..60 {
            let xn = uniform_sample(500, 1, &mut rng);
            let yn = uniform_sample(500, 1, &mut rng);
            let t = estimate(&xn, &yn, &b, &b).unwrap();
            let t = normalize_scores(&t, VarianceRule::Unit).unwrap();
            pooled.extend(t.flattened_scores().unwrap());
        }
        pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = pooled.len() as f64;
        let mut d_stat = 0.0f64;
        for (i, &zv) in pooled.iter().enumerate() {
            let f = crate::special::norm_cdf(zv);
            d_stat = d_stat.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
        }
        // 0.01-level asymptotic critical value 1.6276 / sqrt(n)
        assert!(d_stat < 1.6276 / n.sqrt(), "KS distance {d_stat}");
    }

    #[test]
    fn json_shape_has_nested_arrays() {
        let bx = BasisIndexSet::pairwise(1, 2).unwrap();
        let t = CoefficientTable::from_parts(
            arr2(&[[0.1, 0.2], [0.3, 0.4]]),
            arr2(&[[1.0, 1.0], [1.0, 1.0]]),
            10,
            bx.clone(),
            bx.clone(),
        )
        .unwrap();
        let j = t.to_json();
        assert_eq!(j["n"], 10);
        assert_eq!(j["a"][1][0], 0.3);
        assert!(j["z"].is_null());
    }
}
