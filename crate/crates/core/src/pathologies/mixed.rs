//! A truncated inverse system of free groups `G_n = G_(n,0) ⊕ ⊕_j ℤ x_(n,j)`
//! whose zero parts shrink along the `G*` chain, so that the limit contains
//! the rank-2 group while every level is free.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::Zero;

use super::pontryagin::{GStarLevel, PontryaginError, PontryaginGroup, Vec2};
use crate::sinfty::height_unrank;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MixedError {
    #[error(transparent)]
    Pontryagin(#[from] PontryaginError),
    #[error("element has level {found}, expected {expected}")]
    LevelMismatch { expected: usize, found: usize },
    #[error("summand {j} is outside 1..={bound} at level {level}")]
    NoSummand { level: usize, j: usize, bound: usize },
    #[error("{0:?} is not in the zero part")]
    NotInZeroPart(Vec2),
    #[error("bounds too small: {0}")]
    BoundsTooSmall(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MixedBounds {
    /// Levels `0..=levels`.
    pub levels: usize,
    /// Free summands at level 0; level `n+1` has `2 J_n + 1`.
    pub base_summands: usize,
}

/// `zero ⊕ Σ free[j] x_(level, j)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MixedElement {
    pub level: usize,
    pub zero: Vec2,
    pub free: BTreeMap<usize, BigInt>,
}

impl MixedElement {
    pub fn zero(level: usize) -> Self {
        MixedElement {
            level,
            zero: [BigRational::zero(), BigRational::zero()],
            free: BTreeMap::new(),
        }
    }

    pub fn from_zero_part(level: usize, v: Vec2) -> Self {
        MixedElement {
            zero: v,
            ..Self::zero(level)
        }
    }

    pub fn summand(level: usize, j: usize) -> Self {
        let mut e = Self::zero(level);
        e.free.insert(j, BigInt::from(1));
        e
    }

    fn add_free(&mut self, j: usize, c: &BigInt) {
        let slot = self.free.entry(j).or_default();
        *slot += c;
        if slot.is_zero() {
            self.free.remove(&j);
        }
    }

    pub fn add(&self, other: &MixedElement) -> MixedElement {
        let mut out = self.clone();
        out.zero = [&self.zero[0] + &other.zero[0], &self.zero[1] + &other.zero[1]];
        for (j, c) in &other.free {
            out.add_free(*j, c);
        }
        out
    }

    pub fn scale(&self, k: &BigInt) -> MixedElement {
        let kr = BigRational::from_integer(k.clone());
        let mut out = MixedElement::zero(self.level);
        if k.is_zero() {
            return out;
        }
        out.zero = [&self.zero[0] * &kr, &self.zero[1] * &kr];
        out.free = self.free.iter().map(|(j, c)| (*j, c * k)).collect();
        out
    }

    pub fn in_zero_part(&self) -> bool {
        self.free.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.free.is_empty() && self.zero[0].is_zero() && self.zero[1].is_zero()
    }
}

/// `G_(n,0) = G*_{N-n}`, read in reverse so that the zero parts decrease
/// along the bonding maps.
#[derive(Clone, Debug)]
pub struct MixedSystem {
    pub group: PontryaginGroup,
    pub bounds: MixedBounds,
    pub zero_parts: Vec<GStarLevel>,
    pub summands: Vec<usize>,
}

/// `g_n`: the summand of level `n` receiving summand `j` of level `n+1`.
pub fn index_map(j: usize) -> usize {
    if j == 0 || j % 2 == 1 {
        0
    } else {
        j / 2
    }
}

impl MixedSystem {
    pub fn build(group: &PontryaginGroup, bounds: MixedBounds) -> Result<Self, MixedError> {
        let n = bounds.levels;
        let zero_parts = (0..=n)
            .map(|k| group.gstar_level(n - k))
            .collect::<Result<Vec<_>, _>>()?;
        let mut summands = alloc::vec![bounds.base_summands];
        for k in 0..n {
            summands.push(2 * summands[k] + 1);
        }
        let sys = MixedSystem {
            group: group.clone(),
            bounds,
            zero_parts,
            summands,
        };
        for k in 0..n {
            for b in &sys.zero_parts[k].basis {
                if sys.enumeration_index(k, b).is_none() {
                    return Err(MixedError::BoundsTooSmall(format!(
                        "basis vector {b:?} of level {k} is not among the first {} enumerated elements",
                        sys.summands[k] + 1
                    )));
                }
            }
        }
        Ok(sys)
    }

    pub fn levels(&self) -> usize {
        self.bounds.levels
    }

    /// The `i`-th element of `G_(n,0)` in height order of its basis
    /// coordinates.
    pub fn enumerate(&self, n: usize, i: usize) -> Vec2 {
        let c = height_unrank(&BigUint::from(i), 2);
        let b = &self.zero_parts[n].basis;
        let c0 = BigRational::from_integer(c[0].clone());
        let c1 = BigRational::from_integer(c[1].clone());
        [&b[0][0] * &c0 + &b[1][0] * &c1, &b[0][1] * &c0 + &b[1][1] * &c1]
    }

    fn enumeration_index(&self, n: usize, v: &Vec2) -> Option<usize> {
        (0..=self.summands[n]).find(|&i| self.enumerate(n, i) == *v)
    }

    pub fn is_member(&self, e: &MixedElement) -> bool {
        e.level <= self.levels()
            && self.zero_parts[e.level].contains(&e.zero)
            && e.free.keys().all(|&j| j >= 1 && j <= self.summands[e.level])
    }

    /// `f_(n+1, n)`.
    pub fn bond_once(&self, e: &MixedElement) -> Result<MixedElement, MixedError> {
        if e.level == 0 {
            return Err(MixedError::LevelMismatch { expected: 1, found: 0 });
        }
        let n = e.level - 1;
        let mut out = MixedElement::from_zero_part(n, e.zero.clone());
        for (&j, c) in &e.free {
            if j == 0 || j > self.summands[e.level] {
                return Err(MixedError::NoSummand {
                    level: e.level,
                    j,
                    bound: self.summands[e.level],
                });
            }
            if j % 2 == 1 {
                let v = self.enumerate(n, (j - 1) / 2);
                let cr = BigRational::from_integer(c.clone());
                out.zero = [&out.zero[0] + &v[0] * &cr, &out.zero[1] + &v[1] * &cr];
            } else {
                out.add_free(index_map(j), c);
            }
        }
        Ok(out)
    }

    /// `f_(level, m)`.
    pub fn bond(&self, e: &MixedElement, m: usize) -> Result<MixedElement, MixedError> {
        if m > e.level {
            return Err(MixedError::LevelMismatch { expected: e.level, found: m });
        }
        let mut cur = e.clone();
        while cur.level > m {
            cur = self.bond_once(&cur)?;
        }
        Ok(cur)
    }

    /// Basis of `G_(n,0)` followed by the free generators.
    pub fn generators(&self, n: usize) -> Vec<MixedElement> {
        let mut out: Vec<MixedElement> = self.zero_parts[n]
            .basis
            .iter()
            .map(|b| MixedElement::from_zero_part(n, b.clone()))
            .collect();
        out.extend((1..=self.summands[n]).map(|j| MixedElement::summand(n, j)));
        out
    }

    /// A preimage in level `n + 1` of a generator of level `n`.
    pub fn lift(&self, g: &MixedElement) -> Option<MixedElement> {
        let n = g.level;
        if g.in_zero_part() {
            let i = self.enumeration_index(n, &g.zero)?;
            return Some(MixedElement::summand(n + 1, 2 * i + 1));
        }
        let (&j, c) = g.free.iter().next()?;
        (g.free.len() == 1 && g.zero[0].is_zero() && g.zero[1].is_zero())
            .then(|| MixedElement::summand(n + 1, 2 * j).scale(c))
    }

    pub fn check(&self) -> MixedReport {
        let mut r = MixedReport::default();
        let top = self.levels();
        for n in 0..=top {
            if let Err(e) = self.zero_parts[n].verify() {
                r.failures.push(format!("(b) level {n}: {e}"));
            }
        }
        for n in 0..top {
            for b in &self.zero_parts[n + 1].basis {
                r.clause_checks += 1;
                if !self.zero_parts[n].contains(b) {
                    r.failures.push(format!("(d) {b:?} of level {} is not in level {n}", n + 1));
                }
            }
            let mut images = BTreeSet::new();
            for i in 0..=self.summands[n] {
                r.clause_checks += 1;
                let v = self.enumerate(n, i);
                if !self.zero_parts[n].contains(&v) {
                    r.failures.push(format!("(e) enumerated {v:?} is outside level {n}"));
                }
                if !images.insert(v.clone()) {
                    r.failures.push(format!("(e) {v:?} is enumerated twice"));
                }
            }
            let evens: BTreeSet<usize> = (1..=self.summands[n + 1])
                .filter(|j| j % 2 == 0)
                .map(index_map)
                .collect();
            r.clause_checks += 1;
            if evens != (1..=self.summands[n]).collect() {
                r.failures.push(format!("(f) even summands of level {} do not cover level {n}", n + 1));
            }
            for g in self.generators(n) {
                r.onto_checks += 1;
                match self.lift(&g) {
                    Some(pre) if self.bond_once(&pre).as_ref() == Ok(&g) => {}
                    _ => r.failures.push(format!("no preimage of {g:?} at level {}", n + 1)),
                }
            }
        }
        for k in 0..=top {
            let gens = self.generators(k);
            let sum = gens.iter().fold(MixedElement::zero(k), |a, g| a.add(g));
            for g in gens.iter().chain(core::iter::once(&sum)) {
                for n in 0..=k {
                    for m in 0..=n {
                        r.composition_checks += 1;
                        let direct = self.bond(g, m);
                        let stepped = self.bond(g, n).and_then(|h| self.bond(&h, m));
                        if direct.is_err() || direct != stepped {
                            r.failures.push(format!("f({n},{m})∘f({k},{n}) ≠ f({k},{m}) on {g:?}"));
                        }
                    }
                }
            }
            let linear = gens
                .iter()
                .try_fold(MixedElement::zero(0), |a, g| self.bond(g, 0).map(|h| a.add(&h)));
            if linear != self.bond(&sum, 0) {
                r.failures.push(format!("bonding from level {k} is not additive"));
            }
        }
        r
    }

    /// For a top-level element with a nonzero free coordinate somewhere in
    /// its projections, the deepest such level and coordinate; projecting to
    /// that summand is a homomorphism to ℤ that is nonzero on the element.
    pub fn case_one_projection(&self, e: &MixedElement) -> Result<Option<CaseOne>, MixedError> {
        for n in (0..=e.level).rev() {
            let p = self.bond(e, n)?;
            if let Some((&j, c)) = p.free.iter().next() {
                return Ok(Some(CaseOne {
                    level: n,
                    summand: j,
                    value: c.clone(),
                    divisor_bound: crate::arith::primes::factor_biguint(c.magnitude())
                        .unwrap_or_default(),
                }));
            }
        }
        Ok(None)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaseOne {
    pub level: usize,
    pub summand: usize,
    pub value: BigInt,
    /// The element is divisible by `p^k` only if `p^k` divides `value`.
    pub divisor_bound: Vec<(u64, u32)>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MixedReport {
    pub clause_checks: usize,
    pub onto_checks: usize,
    pub composition_checks: usize,
    pub failures: Vec<String>,
}

impl MixedReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn system(levels: usize) -> MixedSystem {
        let g = PontryaginGroup::new(&[3, 5, 7], &[1, 2, 3]).unwrap();
        MixedSystem::build(&g, MixedBounds { levels, base_summands: 8 }).unwrap()
    }

    #[test]
    fn clauses_and_commutation() {
        let s = system(2);
        assert_eq!(s.summands, alloc::vec![8, 17, 35]);
        let r = s.check();
        assert!(r.passed(), "{:?}", r.failures);
        assert!(r.composition_checks > 0 && r.onto_checks > 0);
    }

    #[test]
    fn small_bounds_are_reported() {
        let g = PontryaginGroup::new(&[3, 5], &[1, 2]).unwrap();
        assert!(matches!(
            MixedSystem::build(&g, MixedBounds { levels: 1, base_summands: 0 }),
            Err(MixedError::BoundsTooSmall(_))
        ));
    }

    #[test]
    fn case_one() {
        let s = system(2);
        let e = MixedElement::summand(2, 4).scale(&BigInt::from(6));
        let c = s.case_one_projection(&e).unwrap().unwrap();
        assert_eq!((c.level, c.summand, c.value.clone()), (2, 4, BigInt::from(6)));
        assert_eq!(c.divisor_bound, alloc::vec![(2, 1), (3, 1)]);
        let z = MixedElement::from_zero_part(2, PontryaginGroup::x(0));
        assert_eq!(s.case_one_projection(&z).unwrap(), None);
    }
}
