//! Independence tests over normalized coefficient scores: extreme-value
//! tests against order-statistic nulls, a log-likelihood normality test, the
//! chi-square test on the score energy, permutation calibration, and the
//! significance-filtered joint-density model.

use std::collections::BTreeMap;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::basis::{product_eval, BasisIndexSet, MultiIndex};
use crate::coeffs::{feature_matrix, VarianceRule};
use crate::coeffs::{estimate, normalize_scores, CoefficientTable};
use crate::error::{Error, Result};
use crate::ingest::PairedSample;
use crate::normalize::edf_normalize;
use crate::order_stats::{order_cdf, order_sf};
use crate::scalar::Real;
use crate::special::{chi2_sf, erfc};

/// Which test produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Minmax,
    SortedExtremes,
    Loglik,
    Chi2,
    PermSumZ2,
    PermMaxZ,
}

/// Statistic choice for the permutation test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PermStatistic {
    SumZ2,
    MaxAbsZ,
}

/// Outcome of one independence test.
///
/// `p_or_pr` is a calibrated p-value in [0, 1] for the permutation,
/// chi-square and log-likelihood tests; for the min/max and sorted-extremes
/// tests it is the product-of-tail-probabilities score, an uncalibrated
/// index that may exceed 1 (see [`calibrate_score`] for a Monte-Carlo
/// conversion into a proper p-value).
#[derive(Debug, Clone, Serialize)]
pub struct TestReport<T> {
    pub method: TestMethod,
    pub statistic: T,
    pub p_or_pr: T,
    pub alpha: T,
    pub reject: bool,
    pub meta: BTreeMap<String, Value>,
}

impl<T: Real> TestReport<T> {
    fn new(method: TestMethod, statistic: T, p_or_pr: T, alpha: T) -> Self {
        Self {
            method,
            statistic,
            p_or_pr,
            alpha,
            reject: p_or_pr < alpha,
            meta: BTreeMap::new(),
        }
    }

    fn with(mut self, key: &str, value: Value) -> Self {
        self.meta.insert(key.to_owned(), value);
        self
    }
}

fn num<T: Real>(v: T) -> Value {
    json!(v.to_f64().unwrap_or(f64::NAN))
}

fn check_scores<T: Real>(z: &[T]) -> Result<()> {
    if z.is_empty() {
        return Err(Error::EmptyFeatures);
    }
    for (i, v) in z.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { row: i, col: 0 });
        }
    }
    Ok(())
}

fn minmax_score<T: Real>(z: &[T]) -> Result<(T, T, T)> {
    let mut mn = z[0];
    let mut mx = z[0];
    for &v in &z[1..] {
        if v < mn {
            mn = v;
        }
        if v > mx {
            mx = v;
        }
    }
    let m = z.len();
    let score = order_cdf(m, 1, mn)? * order_sf(m, m, mx)?;
    Ok((score, mn, mx))
}

/// Min/max extreme test: the probability that M independent N(0,1) scores
/// would have a smaller minimum, times the probability they would have a
/// larger maximum. Small values indicate dependence.
pub fn test_minmax<T: Real>(z: &[T], alpha: T) -> Result<TestReport<T>> {
    check_scores(z)?;
    let (score, mn, mx) = minmax_score(z)?;
    Ok(TestReport::new(TestMethod::Minmax, score, score, alpha)
        .with("M", json!(z.len()))
        .with("min_z", num(mn))
        .with("max_z", num(mx)))
}

fn sorted_extremes_score<T: Real>(z: &[T], k: usize) -> Result<T> {
    let m = z.len();
    let mut zs = z.to_vec();
    zs.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    let mut acc = T::one();
    for i in 1..=k {
        acc *= order_cdf(m, i, zs[i - 1])?;
        acc *= order_sf(m, m + 1 - i, zs[m - i])?;
    }
    // 2^{2k} rescaling keeps the score near 1 for independent inputs
    Ok(acc * T::of(4.0).powi(k as i32))
}

/// Sorted-extremes test: product over the k smallest and k largest sorted
/// scores of their order-statistic tail probabilities, rescaled by 2^{2k}.
/// With k = 1 this is exactly 4 times the min/max score.
pub fn test_sorted_extremes<T: Real>(z: &[T], k: usize, alpha: T) -> Result<TestReport<T>> {
    check_scores(z)?;
    if 2 * k > z.len() {
        return Err(Error::Config(format!(
            "2k = {} exceeds feature count M = {}",
            2 * k,
            z.len()
        )));
    }
    let score = sorted_extremes_score(z, k)?;
    Ok(TestReport::new(TestMethod::SortedExtremes, score, score, alpha)
        .with("M", json!(z.len()))
        .with("k", json!(k)))
}

/// Mean log-density test: mean of ln φ(z) has null mean -(1 + ln 2π)/2 and
/// null variance 1/(2M); the report carries the two-sided Gaussian p-value
/// of the standardized statistic.
pub fn test_loglik<T: Real>(z: &[T], alpha: T) -> Result<TestReport<T>> {
    check_scores(z)?;
    let m = z.len();
    let half = T::of(0.5);
    let ln_sqrt_2pi = T::of(std::f64::consts::TAU).sqrt().ln();
    let mean_ln_pdf =
        -z.iter().map(|&v| v * v).sum::<T>() / T::from_count(m) * half - ln_sqrt_2pi;
    let null_mean = -(T::one() + T::of(std::f64::consts::TAU).ln()) * half;
    let standardized = (mean_ln_pdf - null_mean) * (T::of(2.0) * T::from_count(m)).sqrt();
    let p = erfc(standardized.abs() / T::of(std::f64::consts::SQRT_2));
    Ok(TestReport::new(TestMethod::Loglik, mean_ln_pdf, p, alpha)
        .with("M", json!(m))
        .with("standardized", num(standardized)))
}

/// Chi-square test on T = Σ z², upper tail with M degrees of freedom.
pub fn test_chi2<T: Real>(z: &[T], alpha: T) -> Result<TestReport<T>> {
    check_scores(z)?;
    let t_stat = z.iter().map(|&v| v * v).sum::<T>();
    let p = chi2_sf(t_stat, T::from_count(z.len()));
    Ok(TestReport::new(TestMethod::Chi2, t_stat, p, alpha).with("M", json!(z.len())))
}

/// EDF-normalize a pair, estimate coefficients over the given bases, and
/// normalize scores with the given rule.
pub fn scores_for_pair<T: Real>(
    pair: &PairedSample<T>,
    bx: &BasisIndexSet,
    by: &BasisIndexSet,
    rule: VarianceRule,
) -> Result<CoefficientTable<T>> {
    let xn = edf_normalize(&pair.x)?;
    let yn = edf_normalize(&pair.y)?;
    let table = estimate(&xn, &yn, bx, by)?;
    normalize_scores(&table, rule)
}

/// Both permutation statistics from one permutation pass over the pair.
fn stats_from_a<T: Real>(
    a: &Array2<T>,
    mean_sq: Option<&Array2<T>>,
    n: usize,
    rule: VarianceRule,
) -> Result<(T, T)> {
    let nt = T::from_count(n);
    match rule {
        VarianceRule::Unit => {
            let mut sum = T::zero();
            let mut max_abs = T::zero();
            for &av in a.iter() {
                sum += av * av;
                max_abs = max_abs.max(av.abs());
            }
            Ok((nt * sum, nt.sqrt() * max_abs))
        }
        VarianceRule::Empirical => {
            let sq = mean_sq.expect("mean of squares required for empirical rule");
            let mut sum = T::zero();
            let mut max_abs = T::zero();
            for (idx, (&av, &sv)) in a.iter().zip(sq.iter()).enumerate() {
                let var = sv - av * av;
                if var <= T::zero() {
                    return Err(Error::DegenerateFeature {
                        j: format!("row {}", idx / a.ncols()),
                        k: format!("col {}", idx % a.ncols()),
                    });
                }
                let z2 = nt * av * av / var;
                sum += z2;
                max_abs = max_abs.max(z2.sqrt());
            }
            Ok((sum, max_abs))
        }
    }
}

/// Reports for both permutation statistics, sharing one set of permutations.
#[derive(Debug, Clone)]
pub struct PermutationReports<T> {
    pub sum_z2: TestReport<T>,
    pub max_abs_z: TestReport<T>,
}

/// Permutation test for both statistics at once.
///
/// The observed statistic is computed on the EDF-normalized pair; the null
/// sample re-pairs x with B independent uniformly random row permutations of
/// y. Replicates run in parallel with RNG streams derived from
/// (seed, replicate index), so results do not depend on scheduling.
pub fn test_permutation_both<T: Real>(
    pair: &PairedSample<T>,
    bx: &BasisIndexSet,
    by: &BasisIndexSet,
    rule: VarianceRule,
    b: usize,
    seed: u64,
    alpha: T,
) -> Result<PermutationReports<T>> {
    if b < 100 {
        return Err(Error::Config(format!("permutation count B = {b} below minimum 100")));
    }
    let xn = edf_normalize(&pair.x)?;
    let yn = edf_normalize(&pair.y)?;
    let fx = feature_matrix(&xn, bx)?;
    let fy = feature_matrix(&yn, by)?;
    let n = pair.n();
    let nt = T::from_count(n);

    let needs_sq = rule == VarianceRule::Empirical;
    let fx2 = needs_sq.then(|| fx.mapv(|v| v * v));
    let fy2 = needs_sq.then(|| fy.mapv(|v| v * v));

    let a_obs = fx.t().dot(&fy) / nt;
    let sq_obs = match (&fx2, &fy2) {
        (Some(x2), Some(y2)) => Some(x2.t().dot(y2) / nt),
        _ => None,
    };
    let (obs_sum, obs_max) = stats_from_a(&a_obs, sq_obs.as_ref(), n, rule)?;

    let counts: Result<(usize, usize)> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep as u64 + 1);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);

            let fy_perm = fy.select(Axis(0), &perm);
            let a = fx.t().dot(&fy_perm) / nt;
            let sq = match (&fx2, &fy2) {
                (Some(x2), Some(y2)) => Some(x2.t().dot(&y2.select(Axis(0), &perm)) / nt),
                _ => None,
            };
            let (s, mx) = stats_from_a(&a, sq.as_ref(), n, rule)?;
            Ok((usize::from(s >= obs_sum), usize::from(mx >= obs_max)))
        })
        .try_reduce(|| (0, 0), |l, r| Ok((l.0 + r.0, l.1 + r.1)));
    let (count_sum, count_max) = counts?;

    let denom = T::from_count(b + 1);
    let p_sum = T::from_count(count_sum + 1) / denom;
    let p_max = T::from_count(count_max + 1) / denom;

    let meta = |report: TestReport<T>, stat: &str| {
        report
            .with("B_perm", json!(b))
            .with("M", json!(bx.len() * by.len()))
            .with("m", json!(bx.degree()))
            .with("seed", json!(seed))
            .with("stat", json!(stat))
            .with("variance_rule", json!(rule))
    };
    Ok(PermutationReports {
        sum_z2: meta(
            TestReport::new(TestMethod::PermSumZ2, obs_sum, p_sum, alpha),
            "sum_z2",
        ),
        max_abs_z: meta(
            TestReport::new(TestMethod::PermMaxZ, obs_max, p_max, alpha),
            "max_abs_z",
        ),
    })
}

/// Permutation test for a single statistic.
pub fn test_permutation<T: Real>(
    pair: &PairedSample<T>,
    bx: &BasisIndexSet,
    by: &BasisIndexSet,
    rule: VarianceRule,
    stat: PermStatistic,
    b: usize,
    seed: u64,
    alpha: T,
) -> Result<TestReport<T>> {
    let both = test_permutation_both(pair, bx, by, rule, b, seed, alpha)?;
    Ok(match stat {
        PermStatistic::SumZ2 => both.sum_z2,
        PermStatistic::MaxAbsZ => both.max_abs_z,
    })
}

/// A coefficient retained by the significance filter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeptCoefficient<T> {
    pub jx: MultiIndex,
    pub ky: MultiIndex,
    pub coefficient: T,
    pub score: T,
}

/// Joint-density model keeping only significant coefficients.
#[derive(Debug, Clone, Serialize)]
pub struct SignificantModel<T> {
    pub kept: Vec<KeptCoefficient<T>>,
    pub alpha: T,
    dx: usize,
    dy: usize,
}

/// Keep the coefficients whose sorted normalized scores sit in either tail
/// of their order-statistic null: position i is kept iff
/// min(CDF^M_i(z_(i)), 1 - CDF^M_i(z_(i))) < alpha.
pub fn significance_filter<T: Real>(
    table: &CoefficientTable<T>,
    alpha: T,
) -> Result<SignificantModel<T>> {
    let z = table.z().ok_or_else(|| {
        Error::Config("scores not normalized; call normalize_scores first".into())
    })?;
    let (p, q) = z.dim();
    let m = p * q;
    if m == 0 {
        return Err(Error::EmptyFeatures);
    }
    let mut entries: Vec<(usize, usize, T)> = Vec::with_capacity(m);
    for jx in 0..p {
        for ky in 0..q {
            entries.push((jx, ky, z[[jx, ky]]));
        }
    }
    entries.sort_by(|a, b| a.2.partial_cmp(&b.2).expect("finite scores"));

    let mut kept = Vec::new();
    for (pos, (jx, ky, score)) in entries.into_iter().enumerate() {
        let i = pos + 1;
        let lower = order_cdf(m, i, score)?;
        let upper = order_sf(m, i, score)?;
        if lower.min(upper) < alpha {
            kept.push(KeptCoefficient {
                jx: table.bx().members()[jx].clone(),
                ky: table.by().members()[ky].clone(),
                coefficient: table.a()[[jx, ky]],
                score,
            });
        }
    }
    Ok(SignificantModel { kept, alpha, dx: table.bx().dim(), dy: table.by().dim() })
}

/// Evaluate the filtered joint-density model at a point of the unit cube:
/// 1 + Σ a f_j(x) f_k(y). The value may be negative and is reported as-is.
pub fn joint_density_eval<T: Real>(
    model: &SignificantModel<T>,
    x: &[T],
    y: &[T],
) -> Result<T> {
    if x.len() != model.dx {
        return Err(Error::Dim { expected: model.dx, got: x.len() });
    }
    if y.len() != model.dy {
        return Err(Error::Dim { expected: model.dy, got: y.len() });
    }
    let mut rho = T::one();
    for kc in &model.kept {
        rho += kc.coefficient * product_eval(&kc.jx, x)? * product_eval(&kc.ky, y)?;
    }
    Ok(rho)
}

/// Which score to calibrate by Monte-Carlo simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    Minmax,
    SortedExtremes { k: usize },
}

/// Convert a min/max or sorted-extremes score into a proper p-value by
/// simulating its null distribution with M independent N(0,1) scores:
/// p = (1 + #{null score <= observed}) / (replicates + 1).
pub fn calibrate_score<T: Real>(
    kind: ScoreKind,
    m_features: usize,
    observed: T,
    replicates: usize,
    seed: u64,
) -> Result<T> {
    if m_features == 0 {
        return Err(Error::EmptyFeatures);
    }
    if replicates < 100 {
        return Err(Error::Config(format!(
            "calibration replicates {replicates} below minimum 100"
        )));
    }
    if let ScoreKind::SortedExtremes { k } = kind {
        if 2 * k > m_features {
            return Err(Error::Config(format!(
                "2k = {} exceeds feature count M = {m_features}",
                2 * k
            )));
        }
    }
    let count: Result<usize> = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep as u64 + 1);
            let z: Vec<T> = (0..m_features)
                .map(|_| T::of(StandardNormal.sample(&mut rng)))
                .collect();
            let score = match kind {
                ScoreKind::Minmax => minmax_score(&z)?.0,
                ScoreKind::SortedExtremes { k } => sorted_extremes_score(&z, k)?,
            };
            Ok(usize::from(score <= observed))
        })
        .try_reduce(|| 0, |l, r| Ok(l + r));
    Ok(T::from_count(count? + 1) / T::from_count(replicates + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::SampleMatrix;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn minmax_all_zero_scores() {
        let z = [0.0f64; 16];
        let r = test_minmax(&z, 0.05).unwrap();
        let want = (1.0 - 0.5f64.powi(16)) * (1.0 - 0.5f64.powi(16));
        assert!((r.p_or_pr - want).abs() < 1e-12);
        assert!(!r.reject);
    }

    #[test]
    fn minmax_detects_extreme_score() {
        let mut z = [0.0f64; 16];
        z[7] = 10.0;
        let r = test_minmax(&z, 0.05).unwrap();
        assert!(r.p_or_pr > 0.0);
        assert!(r.p_or_pr < 1e-20, "pr = {}", r.p_or_pr);
        assert!(r.reject);
    }

    #[test]
    fn minmax_single_feature() {
        let r = test_minmax(&[0.0f64], 0.05).unwrap();
        assert!((r.p_or_pr - 0.25).abs() < 1e-14);
    }

    #[test]
    fn minmax_empty_is_error() {
        assert!(matches!(test_minmax::<f64>(&[], 0.05), Err(Error::EmptyFeatures)));
    }

    #[test]
    fn sorted_extremes_matches_four_times_minmax_at_k1() {
        let z: Vec<f64> = vec![0.3, -1.2, 2.5, 0.0, -0.7, 1.1, 0.2, -2.2];
        let minmax = test_minmax(&z, 0.05).unwrap().p_or_pr;
        let sorted = test_sorted_extremes(&z, 1, 0.05).unwrap().p_or_pr;
        assert_eq!(sorted.to_bits(), (4.0 * minmax).to_bits());
    }

    #[test]
    fn sorted_extremes_zero_k_is_unit_score() {
        let z = [0.4f64, -0.2, 0.9];
        let r = test_sorted_extremes(&z, 0, 0.05).unwrap();
        assert_eq!(r.p_or_pr, 1.0);
    }

    #[test]
    fn sorted_extremes_rejects_on_deep_negative() {
        let mut z = vec![0.0f64; 16];
        z[3] = -10.0;
        let r = test_sorted_extremes(&z, 1, 0.05).unwrap();
        assert!(r.p_or_pr < 1e-18);
        assert!(r.reject);
    }

    #[test]
    fn sorted_extremes_k_bound() {
        let z = [0.0f64; 4];
        assert!(matches!(
            test_sorted_extremes(&z, 3, 0.05),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn loglik_closed_form_at_zero_scores() {
        let z = [0.0f64; 16];
        let r = test_loglik(&z, 0.05).unwrap();
        // mean ln φ = -ln sqrt(2π), deviation 0.5, standardized 0.5·sqrt(32) = 2√2;
        // two-sided normal p = erfc(2)
        assert!((r.statistic + (std::f64::consts::TAU).sqrt().ln()).abs() < 1e-14);
        assert!((r.p_or_pr - 0.004_677_734_981_063_127).abs() < 1e-12);
        assert!(r.reject);
    }

    #[test]
    fn loglik_depends_only_on_score_magnitude() {
        let a = test_loglik(&[1.7f64], 0.05).unwrap();
        let b = test_loglik(&[-1.7f64], 0.05).unwrap();
        assert_eq!(a.p_or_pr, b.p_or_pr);
    }

    #[test]
    fn loglik_null_p_roughly_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut pvals = Vec::new();
        for _ in 0..300 {
            let z: Vec<f64> = (0..200).map(|_| StandardNormal.sample(&mut rng)).collect();
            pvals.push(test_loglik(&z, 0.05).unwrap().p_or_pr);
        }
        pvals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = pvals.len() as f64;
        let mut d = 0.0f64;
        for (i, &p) in pvals.iter().enumerate() {
            d = d.max((p - i as f64 / n).abs()).max(((i + 1) as f64 / n - p).abs());
        }
        assert!(d < 1.6276 / n.sqrt(), "KS distance {d}");
    }

    #[test]
    fn chi2_examples() {
        let r = test_chi2(&[0.0f64; 16], 0.05).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_or_pr - 1.0).abs() < 1e-14);

        let q = 1.959_963_984_540_054f64;
        let r = test_chi2(&[q], 0.05).unwrap();
        assert!((r.p_or_pr - 0.05).abs() < 1e-9);

        let r = test_chi2(&[5.991f64.sqrt(), 0.0], 0.05).unwrap();
        assert!((r.p_or_pr - (-5.991f64 / 2.0).exp()).abs() < 1e-12);
    }

    fn random_pair(n: usize, seed: u64) -> PairedSample<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        PairedSample::new(
            SampleMatrix::from_column(&x).unwrap(),
            SampleMatrix::from_column(&y).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn permutation_deterministic_given_seed() {
        let pair = random_pair(120, 9);
        let b = BasisIndexSet::pairwise(1, 4).unwrap();
        let r1 = test_permutation(&pair, &b, &b, VarianceRule::Unit, PermStatistic::SumZ2, 100, 7, 0.05)
            .unwrap();
        let r2 = test_permutation(&pair, &b, &b, VarianceRule::Unit, PermStatistic::SumZ2, 100, 7, 0.05)
            .unwrap();
        assert_eq!(r1.p_or_pr.to_bits(), r2.p_or_pr.to_bits());
        assert_eq!(r1.statistic.to_bits(), r2.statistic.to_bits());
    }

    #[test]
    fn permutation_identical_samples_hit_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let x: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pair = PairedSample::new(
            SampleMatrix::from_column(&x).unwrap(),
            SampleMatrix::from_column(&x).unwrap(),
        )
        .unwrap();
        let b = BasisIndexSet::pairwise(1, 4).unwrap();
        let r = test_permutation(&pair, &b, &b, VarianceRule::Unit, PermStatistic::SumZ2, 200, 3, 0.05)
            .unwrap();
        assert!((r.p_or_pr - 1.0 / 201.0).abs() < 1e-15);
        assert!(r.reject);
    }

    #[test]
    fn permutation_rejects_small_b() {
        let pair = random_pair(50, 2);
        let b = BasisIndexSet::pairwise(1, 2).unwrap();
        assert!(matches!(
            test_permutation(&pair, &b, &b, VarianceRule::Unit, PermStatistic::SumZ2, 50, 1, 0.05),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn permutation_empirical_rule_runs() {
        let pair = random_pair(150, 14);
        let b = BasisIndexSet::pairwise(1, 3).unwrap();
        let r = test_permutation(
            &pair, &b, &b, VarianceRule::Empirical, PermStatistic::MaxAbsZ, 100, 5, 0.05,
        )
        .unwrap();
        assert!(r.p_or_pr > 0.0 && r.p_or_pr <= 1.0);
    }

    fn scored_table(z_values: Array2<f64>, n: usize) -> CoefficientTable<f64> {
        // build a table whose unit-rule scores equal z_values
        let a = z_values.mapv(|z| z / (n as f64).sqrt());
        let v = Array2::ones(a.dim());
        let bx = BasisIndexSet::pairwise(1, a.nrows() as u32).unwrap();
        let by = BasisIndexSet::pairwise(1, a.ncols() as u32).unwrap();
        let t = CoefficientTable::from_parts(a, v, n, bx, by).unwrap();
        normalize_scores(&t, VarianceRule::Unit).unwrap()
    }

    #[test]
    fn filter_two_sided_tails_on_flat_scores() {
        // All-zero scores are themselves anomalous under the null: the
        // minimum of 16 N(0,1) draws sits at 0 with probability 2^-16, so
        // the filter flags the extreme positions. By the binomial oracle
        // P(Bin(16, 1/2) <= i-1) the one-sided tails at 0 are
        // i=3: 137/65536 ≈ 0.0021 < 0.01 and i=4: 697/65536 ≈ 0.0106 > 0.01,
        // keeping exactly positions {1,2,3} and mirrored {14,15,16}.
        let t = scored_table(Array2::zeros((4, 4)), 100);
        let model = significance_filter(&t, 0.01).unwrap();
        assert_eq!(model.kept.len(), 6);
        // while the interior (e.g. the median position, tail ≈ 0.40) is not
        // significant even at a much larger alpha
        let loose = significance_filter(&t, 0.05).unwrap();
        assert!(loose.kept.len() < 16);
    }

    #[test]
    fn filter_keeps_planted_extreme_among_null_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut z = Array2::from_shape_fn((4, 4), |_| StandardNormal.sample(&mut rng));
        let baseline = significance_filter(&scored_table(z.clone(), 100), 0.01).unwrap();
        assert!(baseline.kept.is_empty(), "kept {:?}", baseline.kept);

        z[[2, 1]] = 8.0;
        let model = significance_filter(&scored_table(z, 100), 0.01).unwrap();
        assert_eq!(model.kept.len(), 1);
        assert_eq!(model.kept[0].jx, MultiIndex(vec![3]));
        assert_eq!(model.kept[0].ky, MultiIndex(vec![2]));
        assert!((model.kept[0].score - 8.0).abs() < 1e-12);
    }

    #[test]
    fn filter_vacuous_threshold_keeps_all() {
        let mut z = Array2::zeros((2, 2));
        z[[0, 0]] = 0.3;
        let t = scored_table(z, 64);
        let model = significance_filter(&t, 1.0).unwrap();
        assert_eq!(model.kept.len(), 4);
    }

    #[test]
    fn empty_model_density_is_uniform() {
        let t = scored_table(Array2::zeros((4, 4)), 100);
        let model = significance_filter(&t, 0.01).unwrap();
        assert_eq!(joint_density_eval(&model, &[0.3], &[0.8]).unwrap(), 1.0);
    }

    #[test]
    fn single_coefficient_density_hand_value() {
        let model = SignificantModel {
            kept: vec![KeptCoefficient {
                jx: MultiIndex(vec![1]),
                ky: MultiIndex(vec![1]),
                coefficient: 0.5f64,
                score: 5.0,
            }],
            alpha: 0.01,
            dx: 1,
            dy: 1,
        };
        // 1 + 3 a (2x-1)(2y-1) at x = y = 1 with a = 1/2
        let rho = joint_density_eval(&model, &[1.0], &[1.0]).unwrap();
        assert!((rho - 2.5).abs() < 1e-13);
        assert!(matches!(
            joint_density_eval(&model, &[1.0, 0.5], &[1.0]),
            Err(Error::Dim { .. })
        ));
    }

    #[test]
    fn density_integrates_to_one() {
        let model = SignificantModel {
            kept: vec![
                KeptCoefficient {
                    jx: MultiIndex(vec![1]),
                    ky: MultiIndex(vec![2]),
                    coefficient: 0.4,
                    score: 4.0,
                },
                KeptCoefficient {
                    jx: MultiIndex(vec![3]),
                    ky: MultiIndex(vec![1]),
                    coefficient: -0.2,
                    score: -4.0,
                },
            ],
            alpha: 0.01,
            dx: 1,
            dy: 1,
        };
        // Simpson in 2D; the nontrivial products integrate to zero
        let panels = 64usize;
        let h = 1.0 / panels as f64;
        let w = |i: usize| -> f64 {
            if i == 0 || i == panels {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            }
        };
        let mut total = 0.0;
        for i in 0..=panels {
            for j in 0..=panels {
                let rho =
                    joint_density_eval(&model, &[i as f64 * h], &[j as f64 * h]).unwrap();
                total += w(i) * w(j) * rho;
            }
        }
        total *= h * h / 9.0;
        assert!((total - 1.0).abs() < 1e-8, "integral {total}");
    }

    #[test]
    fn calibration_flags_small_scores() {
        // a score far below the null distribution calibrates to the floor
        let p = calibrate_score(ScoreKind::Minmax, 16, 1e-30f64, 500, 11).unwrap();
        assert!((p - 1.0 / 501.0).abs() < 1e-15);
        // a score near 1 is typical under the null
        let p = calibrate_score(ScoreKind::Minmax, 16, 0.9f64, 500, 11).unwrap();
        assert!(p > 0.2);
    }

    #[test]
    fn report_serializes_with_sorted_meta() {
        let r = test_chi2(&[1.0f64, -0.5], 0.05).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"method\":\"chi2\""));
        assert!(s.contains("\"M\":2"));
    }

    proptest! {
        #[test]
        fn sorted_k1_is_exactly_four_minmax(z in proptest::collection::vec(-4.0f64..4.0, 2..40)) {
            let minmax = test_minmax(&z, 0.05).unwrap().p_or_pr;
            let sorted = test_sorted_extremes(&z, 1, 0.05).unwrap().p_or_pr;
            prop_assert_eq!(sorted.to_bits(), (4.0 * minmax).to_bits());
        }

        #[test]
        fn perm_reports_agree_with_combined_run(seed in 0u64..50) {
            let pair = random_pair(60, seed);
            let b = BasisIndexSet::pairwise(1, 2).unwrap();
            let both = test_permutation_both(&pair, &b, &b, VarianceRule::Unit, 100, seed, 0.05).unwrap();
            let single = test_permutation(&pair, &b, &b, VarianceRule::Unit, PermStatistic::MaxAbsZ, 100, seed, 0.05).unwrap();
            prop_assert_eq!(both.max_abs_z.p_or_pr.to_bits(), single.p_or_pr.to_bits());
        }
    }
}
