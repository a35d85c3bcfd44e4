//! Entropy and mutual-information approximations from coefficient tables.
//!
//! Both come from the first-order ln(1 + t) ≈ t expansion around the uniform
//! density, so mutual information in nits is just the sum of squared
//! nontrivial mixed moments; the corrected variant subtracts each feature's
//! estimation variance v/n, exposing the estimator's noise floor instead of
//! hiding it (corrected values may be slightly negative and are not clamped).

use ndarray::Array2;
use serde::Serialize;

use crate::coeffs::CoefficientTable;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Mutual-information estimate in nits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiEstimate<T> {
    /// Sum of squared coefficients; nonnegative.
    pub raw: T,
    /// Variance-subtracted value; may be slightly negative.
    pub corrected: T,
    /// Squared contribution of each feature pair.
    pub per_feature: Array2<T>,
}

/// Entropy relative to the uniform-density baseline: -sum a_j^2, always <= 0.
pub fn entropy_deficit<T: Real>(coefficients: &[T]) -> T {
    -coefficients.iter().map(|&a| a * a).sum::<T>()
}

fn check_nontrivial<T: Real>(table: &CoefficientTable<T>) -> Result<()> {
    if table.bx().iter().any(|j| j.is_zero()) || table.by().iter().any(|k| k.is_zero()) {
        return Err(Error::Config(
            "mutual information requires bases without the all-zero index".into(),
        ));
    }
    Ok(())
}

/// Plug-in estimate: raw = sum of squared coefficients.
pub fn mi_raw<T: Real>(table: &CoefficientTable<T>) -> Result<MiEstimate<T>> {
    check_nontrivial(table)?;
    let per_feature = table.a().mapv(|a| a * a);
    let raw = per_feature.iter().copied().sum();
    Ok(MiEstimate { raw, corrected: raw, per_feature })
}

/// Variance-subtracted estimate: corrected = sum (a^2 - v/n).
pub fn mi_corrected<T: Real>(table: &CoefficientTable<T>) -> Result<MiEstimate<T>> {
    check_nontrivial(table)?;
    let per_feature = table.a().mapv(|a| a * a);
    let raw = per_feature.iter().copied().sum();
    let nt = T::from_count(table.n());
    let corrected = table
        .a()
        .iter()
        .zip(table.v().iter())
        .map(|(&a, &v)| a * a - v / nt)
        .sum();
    Ok(MiEstimate { raw, corrected, per_feature })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisIndexSet;
    use crate::coeffs::{estimate, CoefficientTable};
    use crate::ingest::SampleMatrix;
    use crate::normalize::edf_normalize;
    use ndarray::arr2;

    fn table(a: Array2<f64>, v: Array2<f64>, n: usize) -> CoefficientTable<f64> {
        let bx = BasisIndexSet::pairwise(1, a.nrows() as u32).unwrap();
        let by = BasisIndexSet::pairwise(1, a.ncols() as u32).unwrap();
        CoefficientTable::from_parts(a, v, n, bx, by).unwrap()
    }

    #[test]
    fn entropy_deficit_arithmetic() {
        assert_eq!(entropy_deficit::<f64>(&[0.0, 0.0]), 0.0);
        assert!((entropy_deficit(&[0.3f64, 0.4]) + 0.25).abs() < 1e-15);
        assert_eq!(entropy_deficit(&[1.0f64]), -1.0);
    }

    #[test]
    fn mi_raw_sums_squares() {
        let t = table(arr2(&[[0.0]]), arr2(&[[1.0]]), 100);
        assert_eq!(mi_raw(&t).unwrap().raw, 0.0);

        let t = table(arr2(&[[0.5]]), arr2(&[[1.0]]), 100);
        assert!((mi_raw(&t).unwrap().raw - 0.25).abs() < 1e-15);

        let t = table(
            arr2(&[[0.1, 0.2], [0.3, 0.4]]),
            arr2(&[[1.0, 1.0], [1.0, 1.0]]),
            100,
        );
        let est = mi_raw(&t).unwrap();
        assert!((est.raw - 0.30).abs() < 1e-15);
        assert!((est.per_feature[[1, 1]] - 0.16).abs() < 1e-15);
    }

    #[test]
    fn correction_subtracts_variance_over_n() {
        let t = table(arr2(&[[0.2]]), arr2(&[[4.0]]), 100);
        let est = mi_corrected(&t).unwrap();
        assert!((est.raw - 0.04).abs() < 1e-15);
        assert!(est.corrected.abs() < 1e-15);

        let t = table(arr2(&[[0.0]]), arr2(&[[2.0]]), 100);
        let est = mi_corrected(&t).unwrap();
        assert!((est.corrected + 0.02).abs() < 1e-15);
        assert!(est.corrected <= est.raw);
    }

    #[test]
    fn raw_minus_corrected_is_total_variance_term() {
        let t = table(
            arr2(&[[0.1, -0.2], [0.05, 0.3]]),
            arr2(&[[1.0, 2.0], [0.5, 3.0]]),
            50,
        );
        let est = mi_corrected(&t).unwrap();
        let want: f64 = t.v().iter().sum::<f64>() / 50.0;
        assert!(((est.raw - est.corrected) - want).abs() < 1e-15);
    }

    #[test]
    fn zero_index_in_basis_is_rejected() {
        let bx = BasisIndexSet::custom(1, 1, vec![crate::basis::MultiIndex(vec![0])]).unwrap();
        let by = BasisIndexSet::pairwise(1, 1).unwrap();
        let t = CoefficientTable::from_parts(arr2(&[[0.1]]), arr2(&[[1.0]]), 10, bx, by).unwrap();
        assert!(matches!(mi_raw(&t), Err(Error::Config(_))));
    }

    #[test]
    fn reparametrization_leaves_mi_bitwise_unchanged() {
        let raw: Vec<f64> = vec![3.1, -0.2, 4.7, 1.1, 0.0, 2.2, -5.5, 9.9];
        let rawy: Vec<f64> = vec![0.4, 8.1, -3.0, 2.2, 7.7, -1.1, 0.5, 3.3];
        let b = BasisIndexSet::pairwise(1, 4).unwrap();

        let run = |xs: &[f64], ys: &[f64]| {
            let xn = edf_normalize(&SampleMatrix::from_column(xs).unwrap()).unwrap();
            let yn = edf_normalize(&SampleMatrix::from_column(ys).unwrap()).unwrap();
            mi_corrected(&estimate(&xn, &yn, &b, &b).unwrap()).unwrap()
        };

        let base = run(&raw, &rawy);
        let mapped_x: Vec<f64> = raw.iter().map(|v| (v * 0.3).exp()).collect();
        let mapped_y: Vec<f64> = rawy.iter().map(|v| v.powi(3) + 2.0 * v).collect();
        let mapped = run(&mapped_x, &mapped_y);
        assert_eq!(base.raw.to_bits(), mapped.raw.to_bits());
        assert_eq!(base.corrected.to_bits(), mapped.corrected.to_bits());
    }
}
