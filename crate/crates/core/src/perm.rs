//! Finite windows of permutations of ω whose images may be huge prime powers.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::arith::nth_prime;

/// `p_sort ^ exponent`, kept symbolic.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PrimePower {
    pub sort: usize,
    pub exponent: BigUint,
}

impl PrimePower {
    pub fn value(&self) -> Option<u64> {
        let e = self.exponent.to_u32()?;
        let p = nth_prime(self.sort);
        let mut acc: u64 = 1;
        for _ in 0..e {
            acc = acc.checked_mul(p)?;
        }
        Some(acc)
    }
}

/// A natural number, or a prime power too large to write out.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Point {
    Small(u64),
    Power(PrimePower),
}

impl Point {
    pub fn power(sort: usize, exponent: BigUint) -> Point {
        let pp = PrimePower { sort, exponent };
        match pp.value() {
            Some(v) => Point::Small(v),
            None => Point::Power(pp),
        }
    }

    pub fn as_small(&self) -> Option<u64> {
        match self {
            Point::Small(v) => Some(*v),
            Point::Power(_) => None,
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Small(v) => write!(f, "{v}"),
            Point::Power(pp) => write!(f, "p{}^{}", pp.sort, pp.exponent),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PermError {
    #[error("point {0} is outside the bound")]
    OutOfBound(u64),
    #[error("image {0} is hit twice")]
    NotInjective(Point),
}

/// The restriction of a permutation of ω to `{0, …, bound-1}`; points not
/// listed in `moved` are fixed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialPermutation {
    bound: u64,
    moved: BTreeMap<u64, Point>,
}

impl PartialPermutation {
    pub fn identity(bound: u64) -> Self {
        PartialPermutation {
            bound,
            moved: BTreeMap::new(),
        }
    }

    pub fn new<I: IntoIterator<Item = (u64, Point)>>(bound: u64, entries: I) -> Result<Self, PermError> {
        let mut moved = BTreeMap::new();
        for (k, v) in entries {
            if k >= bound {
                return Err(PermError::OutOfBound(k));
            }
            if v != Point::Small(k) {
                moved.insert(k, v);
            }
        }
        let mut seen = BTreeSet::new();
        for k in 0..bound {
            let img = moved.get(&k).cloned().unwrap_or(Point::Small(k));
            if !seen.insert(img.clone()) {
                return Err(PermError::NotInjective(img));
            }
        }
        Ok(PartialPermutation { bound, moved })
    }

    pub fn from_small(bound: u64, images: &[u64]) -> Result<Self, PermError> {
        Self::new(
            bound,
            images.iter().enumerate().map(|(k, &v)| (k as u64, Point::Small(v))),
        )
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    pub fn moved(&self) -> &BTreeMap<u64, Point> {
        &self.moved
    }

    pub fn apply(&self, k: u64) -> Point {
        self.moved.get(&k).cloned().unwrap_or(Point::Small(k))
    }

    pub fn is_identity(&self) -> bool {
        self.moved.is_empty()
    }

    /// The image list `π(0), …, π(bound-1)`.
    pub fn images(&self) -> Vec<Point> {
        (0..self.bound).map(|k| self.apply(k)).collect()
    }
}

/// Exponent `m` with `p_sort^m == v`, if `v` is a positive power of that prime.
pub fn prime_power_exponent(v: u64, sort: usize) -> Option<BigUint> {
    let p = nth_prime(sort);
    if v < p {
        return None;
    }
    let mut v = v;
    let mut m = 0u32;
    while v % p == 0 {
        v /= p;
        m += 1;
    }
    (v == 1 && m > 0).then(|| BigUint::from(m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_normalise() {
        assert_eq!(Point::power(0, BigUint::from(3u32)), Point::Small(8));
        assert!(matches!(Point::power(0, BigUint::from(64u32)), Point::Power(_)));
        assert_eq!(prime_power_exponent(27, 1), Some(BigUint::from(3u32)));
        assert_eq!(prime_power_exponent(12, 1), None);
        assert_eq!(prime_power_exponent(1, 0), None);
    }

    #[test]
    fn injectivity() {
        assert!(PartialPermutation::from_small(2, &[1, 0]).is_ok());
        assert!(PartialPermutation::from_small(2, &[1, 1]).is_err());
        let p = PartialPermutation::from_small(3, &[0, 1, 2]).unwrap();
        assert!(p.is_identity());
    }
}
