//! Exact distributions of the i-th order statistic of M i.i.d. standard
//! normal draws, the null model for the extreme-coefficient tests.
//!
//! The CDF is the regularized incomplete beta evaluated at the base CDF,
//! CDF^M_i(x) = I_{Φ(x)}(i, M - i + 1); the upper tail is computed through
//! the beta symmetry with the normal survival function so it stays accurate
//! far into the tails.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::special::{beta_inc_reg, ln_choose, norm_cdf, norm_pdf, norm_sf};

fn check_index(m: usize, i: usize) -> Result<()> {
    if m < 1 || i < 1 || i > m {
        return Err(Error::Index { i, m });
    }
    Ok(())
}

/// Density of the i-th smallest of `m` standard normal draws.
pub fn order_pdf<T: Real>(m: usize, i: usize, x: T) -> Result<T> {
    check_index(m, i)?;
    let p = norm_cdf(x);
    let q = norm_sf(x);
    if (i > 1 && p == T::zero()) || (i < m && q == T::zero()) {
        return Ok(T::zero());
    }
    let mut ln = T::from_count(m).ln() + ln_choose::<T>(m - 1, i - 1) + norm_pdf(x).ln();
    if i > 1 {
        ln += T::from_count(i - 1) * p.ln();
    }
    if i < m {
        ln += T::from_count(m - i) * q.ln();
    }
    Ok(ln.exp())
}

/// CDF of the i-th smallest of `m` standard normal draws.
pub fn order_cdf<T: Real>(m: usize, i: usize, x: T) -> Result<T> {
    check_index(m, i)?;
    Ok(beta_inc_reg(
        T::from_count(i),
        T::from_count(m - i + 1),
        norm_cdf(x),
    ))
}

/// Upper tail 1 - CDF^M_i(x), computed through the beta symmetry so small
/// tail probabilities keep their relative accuracy.
pub fn order_sf<T: Real>(m: usize, i: usize, x: T) -> Result<T> {
    check_index(m, i)?;
    Ok(beta_inc_reg(
        T::from_count(m - i + 1),
        T::from_count(i),
        norm_sf(x),
    ))
}

/// Inverse of [`order_cdf`] in x: bisection on a bracket widened until it
/// contains the target probability.
pub fn order_quantile<T: Real>(m: usize, i: usize, p: T) -> Result<T> {
    check_index(m, i)?;
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::Config(format!(
            "quantile probability must be in (0,1), got {p}"
        )));
    }
    let mut lo = -T::one();
    let mut hi = T::one();
    for _ in 0..1100 {
        if order_cdf(m, i, lo)? < p {
            break;
        }
        lo *= T::of(2.0);
    }
    for _ in 0..1100 {
        if order_cdf(m, i, hi)? > p {
            break;
        }
        hi *= T::of(2.0);
    }
    let tol = T::of(1e-12).max(T::epsilon() * T::of(4.0));
    for _ in 0..200 {
        let mid = (lo + hi) / T::of(2.0);
        if order_cdf(m, i, mid)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < tol * hi.abs().max(T::one()) {
            break;
        }
    }
    Ok((lo + hi) / T::of(2.0))
}

/// Null distribution object bundling M with the standard normal base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderStatNull {
    pub m: usize,
}

impl OrderStatNull {
    pub fn new(m: usize) -> Result<Self> {
        if m < 1 {
            return Err(Error::Index { i: 1, m });
        }
        Ok(Self { m })
    }

    pub fn pdf<T: Real>(&self, i: usize, x: T) -> Result<T> {
        order_pdf(self.m, i, x)
    }

    pub fn cdf<T: Real>(&self, i: usize, x: T) -> Result<T> {
        order_cdf(self.m, i, x)
    }

    pub fn sf<T: Real>(&self, i: usize, x: T) -> Result<T> {
        order_sf(self.m, i, x)
    }

    pub fn quantile<T: Real>(&self, i: usize, p: T) -> Result<T> {
        order_quantile(self.m, i, p)
    }
}
