//! Characteristics (per-prime divisibility exponents) and their types.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use num_traits::Zero;

use super::primeset::{PrimeSet, SetSize};
use super::primes::factor_biguint;
use super::{rational_valuation, ArithError, Exponent, Rational};

/// `p ↦ exceptional[p]` on finitely many primes, `support_exponent` on the
/// rest of `support`, and `0` everywhere else.
#[derive(Clone, Debug)]
pub struct Characteristic {
    pub exceptional: BTreeMap<u64, Exponent>,
    pub support: PrimeSet,
    pub support_exponent: Exponent,
}

impl Characteristic {
    pub fn zero() -> Self {
        Characteristic {
            exceptional: BTreeMap::new(),
            support: PrimeSet::empty(),
            support_exponent: Exponent::Finite(1),
        }
    }

    pub fn from_exceptional<I: IntoIterator<Item = (u64, Exponent)>>(entries: I) -> Self {
        Characteristic {
            exceptional: entries.into_iter().collect(),
            ..Self::zero()
        }
    }

    /// Exponent 1 on every prime of `support`, 0 elsewhere.
    pub fn on_set(support: PrimeSet) -> Self {
        Characteristic {
            support,
            ..Self::zero()
        }
    }

    pub fn with_exceptional(mut self, p: u64, e: Exponent) -> Self {
        self.exceptional.insert(p, e);
        self
    }

    pub fn value(&self, p: u64) -> Result<Exponent, ArithError> {
        if let Some(&e) = self.exceptional.get(&p) {
            return Ok(e);
        }
        if self.support_exponent != Exponent::ZERO && self.support.contains(p)? {
            Ok(self.support_exponent)
        } else {
            Ok(Exponent::ZERO)
        }
    }

    /// Pointwise minimum.
    pub fn meet(&self, other: &Characteristic) -> Result<Characteristic, ArithError> {
        let support = self.support.intersect(&other.support)?;
        let support_exponent = self.support_exponent.min(other.support_exponent);
        let mut exceptional = BTreeMap::new();
        let keys: BTreeSet<u64> = self
            .exceptional
            .keys()
            .chain(other.exceptional.keys())
            .copied()
            .collect();
        for p in keys {
            exceptional.insert(p, self.value(p)?.min(other.value(p)?));
        }
        Ok(Characteristic {
            exceptional,
            support,
            support_exponent,
        })
    }
}

/// Characteristic of a nonzero rational inside the rank-1 group whose
/// denominators are squarefree products of primes from `label`.
pub fn characteristic_in_label(q: &Rational, label: &PrimeSet) -> Result<Characteristic, ArithError> {
    if q.is_zero() {
        return Err(ArithError::ZeroValue);
    }
    let mut primes: BTreeSet<u64> = BTreeSet::new();
    for part in [q.numer().magnitude(), q.denom().magnitude()] {
        if !part.is_zero() {
            primes.extend(factor_biguint(part)?.into_iter().map(|(p, _)| p));
        }
    }
    let mut exceptional = BTreeMap::new();
    for p in primes {
        let v = rational_valuation(q, p);
        let h = if label.contains(p)? { v + 1 } else { v };
        exceptional.insert(p, Exponent::Finite(h.max(0) as u32));
    }
    Ok(Characteristic {
        exceptional,
        support: label.clone(),
        support_exponent: Exponent::Finite(1),
    })
}

#[derive(Clone, Debug)]
pub struct TypeClass {
    pub representative: Characteristic,
}

impl TypeClass {
    pub fn of(c: Characteristic) -> Self {
        TypeClass { representative: c }
    }

    pub fn zero() -> Self {
        TypeClass::of(Characteristic::zero())
    }

    pub fn is_zero(&self) -> Result<bool, ArithError> {
        Ok(type_leq(self, &TypeClass::zero())?.holds())
    }
}

/// Why `t1 ≤ t2` fails.
#[derive(Clone, Debug, PartialEq)]
pub enum LeqFailure {
    /// `within ∖ excluding` is infinite and `t1` exceeds `t2` on all of it
    /// outside the finitely many exceptional primes.
    InfiniteExcess { within: PrimeSet, excluding: PrimeSet },
    /// `t1` is infinite at `p` where it exceeds `t2`; no finite repair.
    InfiniteExponentAt(u64),
}

#[derive(Clone, Debug, PartialEq)]
pub enum TypeOrder {
    Leq,
    NotLeq(LeqFailure),
}

impl TypeOrder {
    pub fn holds(&self) -> bool {
        matches!(self, TypeOrder::Leq)
    }
}

/// `t1 ≤ t2`: the set of primes where `rep1` exceeds `rep2` is finite and
/// `rep1` is finite on it, so both sides can be repaired by equivalence.
pub fn type_leq(t1: &TypeClass, t2: &TypeClass) -> Result<TypeOrder, ArithError> {
    let (c1, c2) = (&t1.representative, &t2.representative);
    let mut candidates: BTreeSet<u64> = c1
        .exceptional
        .keys()
        .chain(c2.exceptional.keys())
        .copied()
        .collect();
    let (v1, v2) = (c1.support_exponent, c2.support_exponent);
    if v1 != Exponent::ZERO {
        let generic = if v1 <= v2 {
            (c1.support.difference(&c2.support), c2.support.clone())
        } else {
            let size = match &c1.support {
                PrimeSet::Finite(v) => SetSize::Finite(v.clone()),
                _ => SetSize::Infinite,
            };
            (size, PrimeSet::empty())
        };
        match generic {
            (SetSize::Finite(list), _) => candidates.extend(list),
            (SetSize::Infinite, excluding) => {
                let within = c1.support.clone();
                // Infinitely many excess primes, minus finitely many exceptions.
                return Ok(TypeOrder::NotLeq(LeqFailure::InfiniteExcess {
                    within,
                    excluding,
                }));
            }
            (SetSize::Unknown, _) => {
                return Err(ArithError::Undecidable(alloc::format!(
                    "whether {} is almost contained in {}",
                    c1.support.describe(),
                    c2.support.describe()
                )))
            }
        }
    }
    for p in candidates {
        let (a, b) = (c1.value(p)?, c2.value(p)?);
        if a > b && a == Exponent::Infinite {
            return Ok(TypeOrder::NotLeq(LeqFailure::InfiniteExponentAt(p)));
        }
    }
    Ok(TypeOrder::Leq)
}

/// Same type: differ at finitely many primes, and only where both are finite.
pub fn char_equivalent(c1: &Characteristic, c2: &Characteristic) -> Result<bool, ArithError> {
    let (t1, t2) = (TypeClass::of(c1.clone()), TypeClass::of(c2.clone()));
    Ok(type_leq(&t1, &t2)?.holds() && type_leq(&t2, &t1)?.holds())
}

/// Primes at which `c1` and `c2` disagree, when that set is finite and
/// explicitly listable.
pub fn disagreements(c1: &Characteristic, c2: &Characteristic) -> Result<Vec<u64>, ArithError> {
    let mut keys: BTreeSet<u64> = c1
        .exceptional
        .keys()
        .chain(c2.exceptional.keys())
        .copied()
        .collect();
    for (a, b) in [(c1, c2), (c2, c1)] {
        if a.support_exponent != Exponent::ZERO {
            match a.support.difference(&b.support) {
                SetSize::Finite(v) => keys.extend(v),
                _ => return Err(ArithError::Undecidable("infinite disagreement".into())),
            }
        }
    }
    let mut out = Vec::new();
    for p in keys {
        if c1.value(p)? != c2.value(p)? {
            out.push(p);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{almost_disjoint_family, rat};

    fn fin(e: u32) -> Exponent {
        Exponent::Finite(e)
    }

    #[test]
    fn equivalence_examples() {
        let zero = Characteristic::zero();
        let h2 = Characteristic::from_exceptional([(2, fin(1))]);
        let h2inf = Characteristic::from_exceptional([(2, Exponent::Infinite)]);
        assert!(char_equivalent(&h2, &zero).unwrap());
        assert!(!char_equivalent(&h2inf, &zero).unwrap());
        let fam = almost_disjoint_family(1).unwrap();
        let on_branch = Characteristic::on_set(fam.sets[0].clone());
        assert!(!char_equivalent(&on_branch, &zero).unwrap());
    }

    #[test]
    fn order_examples() {
        let zero = TypeClass::zero();
        let h2inf = TypeClass::of(Characteristic::from_exceptional([(2, Exponent::Infinite)]));
        let h2 = TypeClass::of(Characteristic::from_exceptional([(2, fin(1))]));
        assert!(type_leq(&zero, &h2inf).unwrap().holds());
        assert_eq!(
            type_leq(&h2inf, &h2).unwrap(),
            TypeOrder::NotLeq(LeqFailure::InfiniteExponentAt(2))
        );
        let fam = almost_disjoint_family(3).unwrap();
        let t1 = TypeClass::of(Characteristic::on_set(fam.sets[1].clone()));
        let t2 = TypeClass::of(Characteristic::on_set(fam.sets[2].clone()));
        match type_leq(&t1, &t2).unwrap() {
            TypeOrder::NotLeq(LeqFailure::InfiniteExcess { within, excluding }) => {
                assert_eq!(within.difference(&excluding), SetSize::Infinite);
            }
            other => panic!("{other:?}"),
        }
        assert!(!t1.is_zero().unwrap());
        assert!(h2.is_zero().unwrap());
    }

    #[test]
    fn rational_in_label() {
        let label = PrimeSet::finite([2, 3]).unwrap();
        let c = characteristic_in_label(&rat(5, 2), &label).unwrap();
        assert_eq!(c.value(2).unwrap(), fin(0));
        assert_eq!(c.value(3).unwrap(), fin(1));
        assert_eq!(c.value(5).unwrap(), fin(1));
        assert_eq!(c.value(7).unwrap(), fin(0));
        assert!(characteristic_in_label(&rat(0, 1), &label).is_err());
    }
}
