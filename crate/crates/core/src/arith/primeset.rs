//! Symbolic sets of primes.
//!
//! Besides explicit finite sets there are three decidable infinite shapes
//! (branch-coded sets, arithmetic progressions, oracle-backed sets with a
//! known superset) plus an abstract "some infinite subset of X" used when a
//! set is only known through a certificate. Finiteness questions about
//! differences and intersections are answered symbolically and may come back
//! [`SetSize::Unknown`] when the shapes involved give no handle.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::any::Any;
use core::fmt;

use num_integer::Integer;

use super::primes::{is_prime, nth_prime, prime_index, primes_below};
use super::ArithError;

/// Longest branch prefix whose code we are willing to turn into a prime.
/// `code(s) < 2^21`, so the 2^21-th prime (about 3.5e7) bounds every element.
pub const MAX_BRANCH_DEPTH: usize = 20;

/// An eventually periodic infinite binary sequence `prefix ⌢ period ⌢ period ⌢ …`,
/// kept in a normal form (primitive period, shortest prefix) so that equality of
/// codes is equality of sequences.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BranchCode {
    prefix: Vec<bool>,
    period: Vec<bool>,
}

impl BranchCode {
    pub fn new(prefix: Vec<bool>, period: Vec<bool>) -> Result<Self, ArithError> {
        if period.is_empty() {
            return Err(ArithError::InvalidBranch("empty period".into()));
        }
        let mut period = period;
        let len = period.len();
        for d in 1..=len {
            if len % d == 0 && (0..len).all(|i| period[i] == period[i % d]) {
                period.truncate(d);
                break;
            }
        }
        let mut prefix = prefix;
        while let (Some(&a), Some(&b)) = (prefix.last(), period.last()) {
            if a != b {
                break;
            }
            prefix.pop();
            period.rotate_right(1);
        }
        Ok(BranchCode { prefix, period })
    }

    /// Parse the `"0110"` / `"10"` string form.
    pub fn parse(prefix: &str, period: &str) -> Result<Self, ArithError> {
        fn bits(s: &str) -> Result<Vec<bool>, ArithError> {
            s.chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    other => Err(ArithError::InvalidBranch(format!("bad bit {other:?}"))),
                })
                .collect()
        }
        Self::new(bits(prefix)?, bits(period)?)
    }

    pub fn prefix_bits(&self) -> &[bool] {
        &self.prefix
    }

    pub fn period_bits(&self) -> &[bool] {
        &self.period
    }

    pub fn bit(&self, i: usize) -> bool {
        match self.prefix.get(i) {
            Some(&b) => b,
            None => self.period[(i - self.prefix.len()) % self.period.len()],
        }
    }

    /// First position where the two sequences disagree, `None` if equal.
    pub fn first_difference(&self, other: &BranchCode) -> Option<usize> {
        if self == other {
            return None;
        }
        let horizon = self.prefix.len().max(other.prefix.len())
            + self.period.len().lcm(&other.period.len());
        (0..horizon).find(|&i| self.bit(i) != other.bit(i))
    }

    /// The integer with binary digits `1 x(0) … x(n-1)`.
    pub fn code(&self, n: usize) -> Result<usize, ArithError> {
        if n == 0 || n > MAX_BRANCH_DEPTH {
            return Err(ArithError::BranchTooDeep(n));
        }
        let mut v = 1usize;
        for i in 0..n {
            v = (v << 1) | self.bit(i) as usize;
        }
        Ok(v)
    }

    /// `p_{code(x↾n)}`, the `n`-th element (`n ≥ 1`) of the coded set.
    pub fn element(&self, n: usize) -> Result<u64, ArithError> {
        Ok(nth_prime(self.code(n)?))
    }

    /// The `n ≥ 1` with `element(n) == p`, if any.
    pub fn position_of(&self, p: u64) -> Result<Option<usize>, ArithError> {
        if p > nth_prime(1 << (MAX_BRANCH_DEPTH + 1)) {
            return Err(ArithError::OutOfRange(p));
        }
        let Some(idx) = prime_index(p) else {
            return Ok(None);
        };
        if idx < 2 {
            return Ok(None);
        }
        let n = (usize::BITS - 1 - idx.leading_zeros()) as usize;
        let ok = (0..n).all(|j| ((idx >> (n - 1 - j)) & 1 == 1) == self.bit(j));
        Ok(ok.then_some(n))
    }

    fn render(bits: &[bool]) -> String {
        bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn prefix_string(&self) -> String {
        Self::render(&self.prefix)
    }

    pub fn period_string(&self) -> String {
        Self::render(&self.period)
    }
}

/// Outcome of a symbolic size question about a derived set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SetSize {
    /// The set is finite; its elements, increasing.
    Finite(Vec<u64>),
    Infinite,
    Unknown,
}

/// A pure membership oracle for an infinite set of primes.
pub trait PrimeOracle: Send + Sync + fmt::Debug {
    fn contains(&self, p: u64) -> Result<bool, ArithError>;

    /// A set known to contain this one.
    fn superset(&self) -> Option<PrimeSet> {
        None
    }

    /// The first `k` elements in the oracle's own enumeration order.
    fn sample(&self, k: usize) -> Result<Vec<u64>, ArithError>;

    fn describe(&self) -> String;

    /// Size of the intersection with `other`, when the oracle knows better
    /// than the generic superset argument.
    fn intersect_hint(&self, _other: &PrimeSet) -> Option<SetSize> {
        None
    }

    fn as_any(&self) -> &dyn Any;
}

#[derive(Clone, Debug)]
pub enum PrimeSet {
    /// Sorted, duplicate-free.
    Finite(Vec<u64>),
    /// `{ p_code(x↾n) : n ≥ 1 }` for the eventually periodic branch `x`.
    Branch(BranchCode),
    /// Primes `≡ residue (mod modulus)`; `modulus == 1` is the set of all primes.
    Progression { modulus: u64, residue: u64 },
    Oracle(Arc<dyn PrimeOracle>),
    /// An unspecified infinite subset of `superset`.
    Abstract { superset: Box<PrimeSet> },
}

impl PartialEq for PrimeSet {
    fn eq(&self, other: &Self) -> bool {
        use PrimeSet::*;
        match (self, other) {
            (Finite(a), Finite(b)) => a == b,
            (Branch(a), Branch(b)) => a == b,
            (
                Progression { modulus: m1, residue: r1 },
                Progression { modulus: m2, residue: r2 },
            ) => m1 == m2 && r1 == r2,
            (Oracle(a), Oracle(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl PrimeSet {
    pub fn empty() -> Self {
        PrimeSet::Finite(Vec::new())
    }

    pub fn all_primes() -> Self {
        PrimeSet::Progression {
            modulus: 1,
            residue: 0,
        }
    }

    /// Explicit finite set; rejects non-primes, sorts and deduplicates.
    pub fn finite<I: IntoIterator<Item = u64>>(primes: I) -> Result<Self, ArithError> {
        let mut v: Vec<u64> = primes.into_iter().collect();
        if let Some(&bad) = v.iter().find(|&&p| !is_prime(p)) {
            return Err(ArithError::NotPrime(bad));
        }
        v.sort_unstable();
        v.dedup();
        Ok(PrimeSet::Finite(v))
    }

    pub fn progression(modulus: u64, residue: u64) -> Result<Self, ArithError> {
        if modulus == 0 || modulus > 1_000_000 {
            return Err(ArithError::InvalidProgression { modulus, residue });
        }
        let residue = residue % modulus;
        if modulus > 1 && residue.gcd(&modulus) != 1 {
            return Err(ArithError::InvalidProgression { modulus, residue });
        }
        Ok(PrimeSet::Progression { modulus, residue })
    }

    pub fn branch(code: BranchCode) -> Self {
        PrimeSet::Branch(code)
    }

    pub fn oracle(o: Arc<dyn PrimeOracle>) -> Self {
        PrimeSet::Oracle(o)
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, PrimeSet::Finite(_))
    }

    pub fn as_finite(&self) -> Option<&[u64]> {
        match self {
            PrimeSet::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn contains(&self, p: u64) -> Result<bool, ArithError> {
        match self {
            PrimeSet::Finite(v) => Ok(v.binary_search(&p).is_ok()),
            PrimeSet::Branch(code) => Ok(code.position_of(p)?.is_some()),
            PrimeSet::Progression { modulus, residue } => {
                Ok(p % modulus == *residue && is_prime(p))
            }
            PrimeSet::Oracle(o) => o.contains(p),
            PrimeSet::Abstract { .. } => Err(ArithError::Undecidable(
                "membership in an abstract subset".into(),
            )),
        }
    }

    /// Element `k` (0-based) of the canonical enumeration.
    ///
    /// Finite sets and progressions enumerate increasingly; branch sets by
    /// prefix length, which is also increasing.
    pub fn nth(&self, k: usize) -> Result<u64, ArithError> {
        match self {
            PrimeSet::Finite(v) => v.get(k).copied().ok_or(ArithError::Exhausted(k)),
            PrimeSet::Branch(code) => code.element(k + 1),
            PrimeSet::Progression { modulus, residue } => {
                let mut seen = 0;
                let mut i = 0;
                loop {
                    let p = nth_prime(i);
                    if p % modulus == *residue {
                        if seen == k {
                            return Ok(p);
                        }
                        seen += 1;
                    }
                    i += 1;
                }
            }
            PrimeSet::Oracle(_) | PrimeSet::Abstract { .. } => Err(ArithError::Undecidable(
                "indexed enumeration of an oracle set".into(),
            )),
        }
    }

    /// Inverse of [`PrimeSet::nth`].
    pub fn index_of(&self, p: u64) -> Result<Option<usize>, ArithError> {
        match self {
            PrimeSet::Finite(v) => Ok(v.binary_search(&p).ok()),
            PrimeSet::Branch(code) => Ok(code.position_of(p)?.map(|n| n - 1)),
            PrimeSet::Progression { modulus, residue } => {
                if !self.contains(p)? {
                    return Ok(None);
                }
                let below = primes_below(p);
                Ok(Some(
                    below.iter().filter(|&&q| q % modulus == *residue).count(),
                ))
            }
            PrimeSet::Oracle(_) | PrimeSet::Abstract { .. } => Err(ArithError::Undecidable(
                "indexed enumeration of an oracle set".into(),
            )),
        }
    }

    /// Up to `k` elements, in enumeration order.
    pub fn sample(&self, k: usize) -> Result<Vec<u64>, ArithError> {
        match self {
            PrimeSet::Finite(v) => Ok(v.iter().take(k).copied().collect()),
            PrimeSet::Oracle(o) => o.sample(k),
            PrimeSet::Abstract { .. } => Err(ArithError::Undecidable(
                "sampling an abstract subset".into(),
            )),
            _ => (0..k).map(|i| self.nth(i)).collect(),
        }
    }

    fn superset_of(&self) -> Option<PrimeSet> {
        match self {
            PrimeSet::Oracle(o) => o.superset(),
            PrimeSet::Abstract { superset } => Some((**superset).clone()),
            _ => None,
        }
    }

    fn filter_members(
        list: &[u64],
        keep: impl Fn(u64) -> Result<bool, ArithError>,
    ) -> SetSize {
        let mut out = Vec::new();
        for &p in list {
            match keep(p) {
                Ok(true) => out.push(p),
                Ok(false) => {}
                Err(_) => return SetSize::Unknown,
            }
        }
        SetSize::Finite(out)
    }

    /// `self ∖ other`.
    pub fn difference(&self, other: &PrimeSet) -> SetSize {
        use PrimeSet::*;
        if let Finite(xs) = self {
            return Self::filter_members(xs, |p| other.contains(p).map(|b| !b));
        }
        if self == other {
            return SetSize::Finite(Vec::new());
        }
        match (self, other) {
            (_, Finite(_)) => SetSize::Infinite,
            (Branch(_), Branch(_)) => SetSize::Infinite,
            (Branch(_), Progression { modulus: 1, .. }) => SetSize::Finite(Vec::new()),
            (Progression { .. }, Branch(_)) => SetSize::Infinite,
            (
                Progression { modulus: m1, residue: r1 },
                Progression { modulus: m2, residue: r2 },
            ) => progression_difference(*m1, *r1, *m2, *r2),
            (Oracle(_) | Abstract { .. }, _) => {
                let Some(sup) = self.superset_of() else {
                    return SetSize::Unknown;
                };
                if let SetSize::Finite(_) = sup.intersection(other) {
                    return SetSize::Infinite;
                }
                match sup.difference(other) {
                    SetSize::Finite(list) => Self::filter_members(&list, |p| self.contains(p)),
                    _ => SetSize::Unknown,
                }
            }
            (_, Oracle(_) | Abstract { .. }) => match other.superset_of() {
                Some(sup) if self.difference(&sup) == SetSize::Infinite => SetSize::Infinite,
                _ => SetSize::Unknown,
            },
            _ => SetSize::Unknown,
        }
    }

    /// `self ∩ other`.
    pub fn intersection(&self, other: &PrimeSet) -> SetSize {
        use PrimeSet::*;
        match (self, other) {
            (Finite(xs), _) => return Self::filter_members(xs, |p| other.contains(p)),
            (_, Finite(ys)) => return Self::filter_members(ys, |p| self.contains(p)),
            _ => {}
        }
        if self == other {
            return SetSize::Infinite;
        }
        if let Oracle(o) = self {
            if let Some(h) = o.intersect_hint(other) {
                return h;
            }
        }
        if let Oracle(o) = other {
            if let Some(h) = o.intersect_hint(self) {
                return h;
            }
        }
        match (self, other) {
            (Branch(x), Branch(y)) => match x.first_difference(y) {
                None => SetSize::Infinite,
                Some(d) => {
                    let mut v = Vec::with_capacity(d);
                    for n in 1..=d {
                        match x.element(n) {
                            Ok(p) => v.push(p),
                            Err(_) => return SetSize::Unknown,
                        }
                    }
                    SetSize::Finite(v)
                }
            },
            (Branch(_), Progression { modulus: 1, .. })
            | (Progression { modulus: 1, .. }, Branch(_)) => SetSize::Infinite,
            (Branch(_), Progression { .. }) | (Progression { .. }, Branch(_)) => SetSize::Unknown,
            (
                Progression { modulus: m1, residue: r1 },
                Progression { modulus: m2, residue: r2 },
            ) => {
                let g = m1.gcd(m2);
                if r1 % g == r2 % g {
                    SetSize::Infinite
                } else {
                    let l = m1.lcm(m2);
                    let v = crate::arith::primes::factor_u64(l)
                        .into_iter()
                        .map(|(p, _)| p)
                        .filter(|p| p % m1 == *r1 && p % m2 == *r2)
                        .collect();
                    SetSize::Finite(v)
                }
            }
            (Oracle(_) | Abstract { .. }, _) => Self::via_superset(self, other),
            (_, Oracle(_) | Abstract { .. }) => Self::via_superset(other, self),
            _ => SetSize::Unknown,
        }
    }

    fn via_superset(sub: &PrimeSet, other: &PrimeSet) -> SetSize {
        let Some(sup) = sub.superset_of() else {
            return SetSize::Unknown;
        };
        match sup.intersection(other) {
            SetSize::Finite(list) => Self::filter_members(&list, |p| sub.contains(p)),
            _ => SetSize::Unknown,
        }
    }

    /// The intersection as a set, when it can be named.
    pub fn intersect(&self, other: &PrimeSet) -> Result<PrimeSet, ArithError> {
        if self == other {
            return Ok(self.clone());
        }
        match self.intersection(other) {
            SetSize::Finite(v) => Ok(PrimeSet::Finite(v)),
            SetSize::Infinite => {
                if self.difference(other) == SetSize::Finite(Vec::new()) {
                    Ok(self.clone())
                } else if other.difference(self) == SetSize::Finite(Vec::new()) {
                    Ok(other.clone())
                } else if let (
                    PrimeSet::Progression { modulus: m1, residue: r1 },
                    PrimeSet::Progression { modulus: m2, residue: r2 },
                ) = (self, other)
                {
                    let l = m1.lcm(m2);
                    let r = (0..l)
                        .find(|c| c % m1 == *r1 && c % m2 == *r2)
                        .ok_or_else(|| ArithError::Undecidable("empty class".into()))?;
                    PrimeSet::progression(l, r)
                } else {
                    Err(ArithError::Undecidable(format!(
                        "cannot name the intersection of {} and {}",
                        self.describe(),
                        other.describe()
                    )))
                }
            }
            SetSize::Unknown => Err(ArithError::Undecidable(format!(
                "intersection of {} and {}",
                self.describe(),
                other.describe()
            ))),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            PrimeSet::Finite(v) => format!("{v:?}"),
            PrimeSet::Branch(c) => format!("branch({}|{})", c.prefix_string(), c.period_string()),
            PrimeSet::Progression { modulus: 1, .. } => "all primes".into(),
            PrimeSet::Progression { modulus, residue } => {
                format!("primes = {residue} mod {modulus}")
            }
            PrimeSet::Oracle(o) => o.describe(),
            PrimeSet::Abstract { superset } => {
                format!("infinite subset of {}", superset.describe())
            }
        }
    }
}

fn progression_difference(m1: u64, r1: u64, m2: u64, r2: u64) -> SetSize {
    let l = m1.lcm(&m2);
    let covered = (0..l)
        .filter(|c| c % m1 == r1 && c.gcd(&l) == 1)
        .all(|c| c % m2 == r2);
    if !covered {
        return SetSize::Infinite;
    }
    let v = crate::arith::primes::factor_u64(l)
        .into_iter()
        .map(|(p, _)| p)
        .filter(|p| p % m1 == r1 && p % m2 != r2)
        .collect();
    SetSize::Finite(v)
}

/// Pairwise almost-disjoint branch-coded sets with their finite intersections.
#[derive(Clone, Debug)]
pub struct AlmostDisjointFamily {
    pub sets: Vec<PrimeSet>,
    /// `(i, j, P_i ∩ P_j)` for every `i < j`.
    pub intersections: Vec<(usize, usize, Vec<u64>)>,
}

/// The family `x_i = 1^i ⌢ 0^ω`, `i < count`; `x_i` and `x_j` share exactly
/// the prefixes of length `≤ min(i, j)`.
pub fn almost_disjoint_family(count: usize) -> Result<AlmostDisjointFamily, ArithError> {
    if count == 0 {
        return Err(ArithError::InvalidBranch("empty family".into()));
    }
    if count > MAX_BRANCH_DEPTH {
        return Err(ArithError::BranchTooDeep(count));
    }
    let mut sets = Vec::with_capacity(count);
    for i in 0..count {
        sets.push(PrimeSet::Branch(BranchCode::new(
            alloc::vec![true; i],
            alloc::vec![false],
        )?));
    }
    let mut intersections = Vec::new();
    for i in 0..count {
        for j in i + 1..count {
            match sets[i].intersection(&sets[j]) {
                SetSize::Finite(v) => intersections.push((i, j, v)),
                _ => return Err(ArithError::Undecidable("family not almost disjoint".into())),
            }
        }
    }
    Ok(AlmostDisjointFamily {
        sets,
        intersections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn normal_form() {
        let a = BranchCode::parse("0110", "10").unwrap();
        let b = BranchCode::parse("011", "01").unwrap();
        assert_eq!(a, b);
        let c = BranchCode::parse("", "1010").unwrap();
        assert_eq!(c.period_bits(), &[true, false]);
        assert_eq!(a.first_difference(&b), None);
        assert!(BranchCode::parse("", "").is_err());
    }

    #[test]
    fn branch_membership_by_code() {
        let x = BranchCode::parse("", "1").unwrap();
        // codes 3, 7, 15 -> p_3 = 7, p_7 = 19, p_15 = 53
        assert_eq!(x.element(1).unwrap(), 7);
        assert_eq!(x.element(2).unwrap(), 19);
        assert_eq!(x.element(3).unwrap(), 53);
        assert_eq!(x.position_of(19).unwrap(), Some(2));
        assert_eq!(x.position_of(17).unwrap(), None);
        assert_eq!(x.position_of(2).unwrap(), None);
    }

    #[test]
    fn branch_intersection_is_shared_prefixes() {
        let x = BranchCode::parse("11", "0").unwrap();
        let y = BranchCode::parse("10", "1").unwrap();
        assert_eq!(x.first_difference(&y), Some(1));
        let (a, b) = (PrimeSet::Branch(x.clone()), PrimeSet::Branch(y));
        assert_eq!(a.intersection(&b), SetSize::Finite(vec![x.element(1).unwrap()]));
        assert_eq!(a.difference(&b), SetSize::Infinite);
        assert_eq!(a.intersection(&a), SetSize::Infinite);
    }

    #[test]
    fn progressions() {
        let one4 = PrimeSet::progression(4, 1).unwrap();
        let one8 = PrimeSet::progression(8, 1).unwrap();
        let three4 = PrimeSet::progression(4, 3).unwrap();
        assert_eq!(one8.difference(&one4), SetSize::Finite(vec![]));
        assert_eq!(one4.difference(&one8), SetSize::Infinite);
        assert_eq!(one4.intersection(&three4), SetSize::Finite(vec![]));
        assert_eq!(one4.nth(0).unwrap(), 5);
        assert_eq!(one4.index_of(13).unwrap(), Some(1));
        assert!(PrimeSet::progression(4, 2).is_err());
        let all = PrimeSet::all_primes();
        assert_eq!(all.nth(5).unwrap(), 13);
        assert_eq!(
            one4.intersect(&PrimeSet::progression(3, 2).unwrap()).unwrap(),
            PrimeSet::progression(12, 5).unwrap()
        );
    }

    #[test]
    fn family_intersections_are_finite_and_consistent() {
        let fam = almost_disjoint_family(3).unwrap();
        assert_eq!(fam.sets.len(), 3);
        assert_eq!(fam.intersections.len(), 3);
        for (i, j, common) in &fam.intersections {
            assert_eq!(common.len(), (*i).min(*j));
            for &p in common {
                assert!(fam.sets[*i].contains(p).unwrap());
                assert!(fam.sets[*j].contains(p).unwrap());
            }
        }
        let single = almost_disjoint_family(1).unwrap();
        assert!(!single.sets[0].is_finite());
    }

    #[test]
    fn abstract_subset_reasoning() {
        let fam = almost_disjoint_family(3).unwrap();
        let sub = PrimeSet::Abstract {
            superset: Box::new(fam.sets[1].clone()),
        };
        assert_eq!(sub.difference(&fam.sets[2]), SetSize::Infinite);
        assert!(sub.contains(7).is_err());
    }
}
