//! Orthonormal polynomial basis on [0, 1] and product-basis index sets.
//!
//! The scalar basis is the shifted Legendre family rescaled to be orthonormal,
//! f_j(x) = sqrt(2j + 1) * P_j(2x - 1), evaluated by the stable three-term
//! recurrence. The first five members are, up to rounding,
//!
//! ```text
//! f_0 = 1
//! f_1(x) = sqrt(3) (2x - 1)
//! f_2(x) = sqrt(5) (6x^2 - 6x + 1)
//! f_3(x) = sqrt(7) (20x^3 - 30x^2 + 12x - 1)
//! f_4(x) = 3 (70x^4 - 140x^3 + 90x^2 - 20x + 1)
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Evaluate the orthonormal shifted Legendre polynomial of degree `j` at
/// `x` in [0, 1].
pub fn legendre_eval<T: Real>(j: u32, x: T) -> Result<T> {
    if !(x >= T::zero() && x <= T::one()) {
        return Err(Error::Domain { value: x.to_f64().unwrap_or(f64::NAN) });
    }
    Ok(legendre_unchecked(j, x))
}

/// Recurrence evaluation without the domain check; callers guarantee
/// x in [0, 1].
#[inline]
pub(crate) fn legendre_unchecked<T: Real>(j: u32, x: T) -> T {
    let t = T::of(2.0) * x - T::one();
    let mut prev = T::one(); // P_0
    if j == 0 {
        return prev;
    }
    let mut curr = t; // P_1
    for k in 1..j {
        let kf = T::of(k as f64);
        let next = ((T::of(2.0) * kf + T::one()) * t * curr - kf * prev) / (kf + T::one());
        prev = curr;
        curr = next;
    }
    curr * T::of((2 * j + 1) as f64).sqrt()
}

/// Fill `out[0..=m]` with f_0(x) .. f_m(x) in one recurrence pass.
#[inline]
pub(crate) fn legendre_all_unchecked<T: Real>(m: u32, x: T, out: &mut [T]) {
    debug_assert!(out.len() > m as usize);
    let t = T::of(2.0) * x - T::one();
    let mut prev = T::one();
    out[0] = T::one();
    if m == 0 {
        return;
    }
    let mut curr = t;
    out[1] = curr * T::of(3.0).sqrt();
    for k in 1..m {
        let kf = T::of(k as f64);
        let next = ((T::of(2.0) * kf + T::one()) * t * curr - kf * prev) / (kf + T::one());
        prev = curr;
        curr = next;
        out[(k + 1) as usize] = curr * T::of((2 * k + 3) as f64).sqrt();
    }
}

/// A degree assignment (j_1, ..., j_d), one component per coordinate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn nonzero_count(&self) -> usize {
        self.0.iter().filter(|&&j| j != 0).count()
    }

    pub fn is_zero(&self) -> bool {
        self.nonzero_count() == 0
    }

    pub fn max_degree(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, j) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{j}")?;
        }
        write!(f, ")")
    }
}

/// Evaluate the product basis function f_j(x) = f_{j_1}(x_1) ... f_{j_d}(x_d).
pub fn product_eval<T: Real>(j: &MultiIndex, x: &[T]) -> Result<T> {
    if j.dim() != x.len() {
        return Err(Error::Dim { expected: j.dim(), got: x.len() });
    }
    let mut acc = T::one();
    for (&jc, &xc) in j.0.iter().zip(x.iter()) {
        acc *= legendre_eval(jc, xc)?;
    }
    Ok(acc)
}

#[inline]
pub(crate) fn product_unchecked<T: Real>(j: &MultiIndex, x: &[T]) -> T {
    debug_assert_eq!(j.dim(), x.len());
    let mut acc = T::one();
    for (&jc, &xc) in j.0.iter().zip(x.iter()) {
        if jc != 0 {
            acc *= legendre_unchecked(jc, xc);
        }
    }
    acc
}

/// How a basis index set was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Full,
    Pairwise,
    Triplewise,
    Custom,
}

/// An ordered, duplicate-free set of multi-indices selecting which mixed
/// moments to estimate. Members are kept in lexicographic order so
/// coefficient tables are reproducible across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisIndexSet {
    dim: usize,
    degree: u32,
    kind: BasisKind,
    members: Vec<MultiIndex>,
}

impl BasisIndexSet {
    /// All multi-indices with exactly one nonzero component; d * m members.
    pub fn pairwise(dim: usize, degree: u32) -> Result<Self> {
        Self::filtered(dim, degree, BasisKind::Pairwise, |nz| nz == 1)
    }

    /// One or two nonzero components; d*m + C(d,2)*m^2 members.
    pub fn triplewise(dim: usize, degree: u32) -> Result<Self> {
        Self::filtered(dim, degree, BasisKind::Triplewise, |nz| nz == 1 || nz == 2)
    }

    /// Every nonzero multi-index in {0..m}^d.
    pub fn full(dim: usize, degree: u32) -> Result<Self> {
        Self::filtered(dim, degree, BasisKind::Full, |nz| nz >= 1)
    }

    fn filtered(
        dim: usize,
        degree: u32,
        kind: BasisKind,
        keep: impl Fn(usize) -> bool,
    ) -> Result<Self> {
        if dim < 1 {
            return Err(Error::Config("basis dimension must be >= 1".into()));
        }
        if degree < 1 {
            return Err(Error::Config("basis degree must be >= 1".into()));
        }
        let mut members = Vec::new();
        let mut idx = vec![0u32; dim];
        loop {
            let nz = idx.iter().filter(|&&j| j != 0).count();
            if keep(nz) {
                members.push(MultiIndex(idx.clone()));
            }
            // odometer over {0..m}^d
            let mut pos = dim;
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                if idx[pos] < degree {
                    idx[pos] += 1;
                    break;
                }
                idx[pos] = 0;
                if pos == 0 {
                    return Ok(Self::sorted(dim, degree, kind, members));
                }
            }
        }
    }

    /// Explicit member list; validates dimensions, degrees and uniqueness.
    pub fn custom(dim: usize, degree: u32, mut members: Vec<MultiIndex>) -> Result<Self> {
        for m in &members {
            if m.dim() != dim {
                return Err(Error::Dim { expected: dim, got: m.dim() });
            }
            if m.max_degree() > degree {
                return Err(Error::Config(format!(
                    "member {m} exceeds degree {degree}"
                )));
            }
        }
        members.sort();
        members.dedup();
        Ok(Self { dim, degree, kind: BasisKind::Custom, members })
    }

    fn sorted(dim: usize, degree: u32, kind: BasisKind, mut members: Vec<MultiIndex>) -> Self {
        members.sort();
        Self { dim, degree, kind, members }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[MultiIndex] {
        &self.members
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MultiIndex> {
        self.members.iter()
    }
}

/// Build a pairwise or triplewise basis (the two kinds used by the tests).
pub fn build_basis(dim: usize, degree: u32, kind: BasisKind) -> Result<BasisIndexSet> {
    match kind {
        BasisKind::Pairwise => BasisIndexSet::pairwise(dim, degree),
        BasisKind::Triplewise => BasisIndexSet::triplewise(dim, degree),
        BasisKind::Full => BasisIndexSet::full(dim, degree),
        BasisKind::Custom => Err(Error::Config(
            "custom basis requires an explicit member list".into(),
        )),
    }
}
