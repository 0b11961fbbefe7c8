use std::collections::BTreeSet;

use aleph_core::arith::{
    type_leq, Characteristic, Exponent, PrimeSet, Rational, TypeClass,
};
use aleph_core::engine::LimitElement;
use aleph_core::level::LevelElement;
use aleph_core::pathologies::PontryaginGroup;
use aleph_core::sinfty::{height_rank, height_unrank};
use aleph_core::trees::{tree_distance, Branch, Node, TreeOnOmega};
use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use proptest::prelude::*;

fn node(len: usize) -> impl Strategy<Value = Node> {
    prop::collection::vec(0u64..3, len).prop_map(Node::new)
}

fn rational() -> impl Strategy<Value = Rational> {
    (-20i64..=20, 1i64..=12).prop_map(|(a, b)| Rational::new(a.into(), b.into()))
}

fn level_element(level: usize) -> impl Strategy<Value = LevelElement> {
    prop::collection::vec((node(level), rational()), 0..6)
        .prop_map(move |ts| LevelElement::from_terms(level, ts).unwrap())
}

fn branch() -> impl Strategy<Value = Branch> {
    (prop::collection::vec(0u64..3, 0..4), prop::collection::vec(0u64..3, 1..3))
        .prop_map(|(s, c)| Branch::periodic(s, c).unwrap())
}

fn limit_element() -> impl Strategy<Value = LimitElement> {
    prop::collection::vec((branch(), rational()), 0..5).prop_map(LimitElement::new)
}

fn exponent() -> impl Strategy<Value = Exponent> {
    prop_oneof![4 => (0u32..4).prop_map(Exponent::Finite), 1 => Just(Exponent::Infinite)]
}

fn support() -> impl Strategy<Value = PrimeSet> {
    prop_oneof![
        Just(PrimeSet::empty()),
        Just(PrimeSet::all_primes()),
        Just(PrimeSet::progression(4, 1).unwrap()),
        Just(PrimeSet::progression(4, 3).unwrap()),
        prop::collection::btree_set(prop::sample::select(vec![2u64, 3, 5, 7, 11]), 1..4)
            .prop_map(|s| PrimeSet::finite(s).unwrap()),
    ]
}

fn characteristic() -> impl Strategy<Value = Characteristic> {
    (
        support(),
        prop_oneof![Just(Exponent::Finite(1)), Just(Exponent::Finite(2)), Just(Exponent::Infinite)],
        prop::collection::btree_map(prop::sample::select(vec![2u64, 3, 5, 7, 13]), exponent(), 0..3),
    )
        .prop_map(|(s, e, ex)| Characteristic {
            exceptional: ex,
            support: s,
            support_exponent: e,
        })
}

fn leq(a: &Characteristic, b: &Characteristic) -> bool {
    type_leq(&TypeClass::of(a.clone()), &TypeClass::of(b.clone())).unwrap().holds()
}

fn explicit_tree() -> impl Strategy<Value = TreeOnOmega> {
    prop::collection::vec(prop::collection::vec(0u64..2, 0..4), 0..6)
        .prop_map(|ls| TreeOnOmega::closure(ls.into_iter().map(Node::new)))
}

/// `v` lies in `⟨x₀, x₁, y_p⟩` iff subtracting some `Σ c_p y_p` with
/// `0 ≤ c_p < p` leaves an integer vector.
fn naive_member(g: &PontryaginGroup, v: &[Rational; 2]) -> bool {
    let ps = g.primes().to_vec();
    let mut digits = vec![0u64; ps.len()];
    loop {
        let mut w = v.clone();
        for (p, &c) in ps.iter().zip(&digits) {
            let y = g.y(*p).unwrap();
            let c = Rational::from_integer(c.into());
            w[0] -= &y[0] * &c;
            w[1] -= &y[1] * &c;
        }
        if w[0].is_integer() && w[1].is_integer() {
            return true;
        }
        let mut i = 0;
        loop {
            if i == ps.len() {
                return false;
            }
            digits[i] += 1;
            if digits[i] < ps[i] {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

proptest! {
    #[test]
    fn height_rank_round_trips(c in prop::collection::vec(-30i64..=30, 0..5)) {
        let c: Vec<BigInt> = c.into_iter().map(BigInt::from).collect();
        let r = height_rank(&c);
        prop_assert_eq!(height_unrank(&r, c.len()), c);
    }

    #[test]
    fn height_unrank_round_trips(r in 0u64..200_000, n in 1usize..5) {
        let r = BigUint::from(r);
        prop_assert_eq!(height_rank(&height_unrank(&r, n)), r);
    }

    #[test]
    fn height_order_is_monotone(a in prop::collection::vec(-9i64..=9, 3), b in prop::collection::vec(-9i64..=9, 3)) {
        let h = |v: &[i64]| v.iter().map(|x| x.abs()).max().unwrap();
        let ra = height_rank(&a.iter().map(|&x| BigInt::from(x)).collect::<Vec<_>>());
        let rb = height_rank(&b.iter().map(|&x| BigInt::from(x)).collect::<Vec<_>>());
        if h(&a) < h(&b) {
            prop_assert!(ra < rb);
        }
    }

    #[test]
    fn bonding_composes(e in level_element(4), m in 0usize..=4, k in 0usize..=4) {
        let (hi, lo) = (m.max(k), m.min(k));
        prop_assert_eq!(e.bond(hi).unwrap().bond(lo).unwrap(), e.bond(lo).unwrap());
        prop_assert_eq!(e.bond(4).unwrap(), e);
    }

    #[test]
    fn bonding_is_additive(a in level_element(3), b in level_element(3), q in rational(), m in 0usize..=3) {
        let lhs = a.add(&b.scale(&q)).unwrap().bond(m).unwrap();
        let rhs = a.bond(m).unwrap().add(&b.bond(m).unwrap().scale(&q)).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn projections_cohere(y in limit_element(), n in 0usize..8, m in 0usize..8) {
        let (hi, lo) = (n.max(m), n.min(m));
        prop_assert_eq!(y.project(hi).bond(lo).unwrap(), y.project(lo));
    }

    #[test]
    fn separation_level_separates(y in limit_element()) {
        if !y.is_zero() {
            let n = y.separation_level();
            prop_assert_eq!(y.project(n).support().len(), y.terms().len());
        }
    }

    #[test]
    fn type_order_is_reflexive(a in characteristic()) {
        prop_assert!(leq(&a, &a));
    }

    #[test]
    fn type_order_is_transitive(a in characteristic(), b in characteristic(), c in characteristic()) {
        if leq(&a, &b) && leq(&b, &c) {
            prop_assert!(leq(&a, &c));
        }
    }

    #[test]
    fn finite_characteristics_have_type_zero(
        ex in prop::collection::btree_map(prop::sample::select(vec![2u64, 3, 5, 7]), (0u32..5).prop_map(Exponent::Finite), 0..4),
        b in characteristic(),
    ) {
        let a = Characteristic::from_exceptional(ex);
        prop_assert!(leq(&a, &b));
        prop_assert!(leq(&a, &Characteristic::zero()));
    }

    #[test]
    fn tree_distance_is_an_ultrametric(a in explicit_tree(), b in explicit_tree(), c in explicit_tree()) {
        let d = |x: &TreeOnOmega, y: &TreeOnOmega| tree_distance(x, y, 6).value;
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert_eq!(d(&a, &a), aleph_core::trees::Dyadic::Zero);
        prop_assert!(d(&a, &c) <= d(&a, &b).max(d(&b, &c)));
    }

    #[test]
    fn pontryagin_membership_matches_search(
        a in -40i64..=40,
        b in -40i64..=40,
        d in prop::sample::select(vec![1i64, 2, 3, 5, 7, 9, 15, 21, 35, 105]),
        seed in 0u64..50,
    ) {
        let g = PontryaginGroup::seeded(&[3, 5, 7], seed).unwrap();
        let den = BigInt::from(d);
        let v = [Rational::new(a.into(), den.clone()), Rational::new(b.into(), den)];
        prop_assert_eq!(g.is_member(&v), naive_member(&g, &v));
        let one = Rational::one();
        prop_assert!(g.is_member(&[one.clone(), Rational::zero()]));
    }
}

#[test]
fn ranks_enumerate_a_height_shell() {
    // Every vector of height at most 2 in ℤ² gets a distinct rank below 25.
    let mut seen = BTreeSet::new();
    for a in -2i64..=2 {
        for b in -2i64..=2 {
            let r = height_rank(&[a.into(), b.into()]);
            assert!(r < BigUint::from(25u32));
            assert!(seen.insert(r));
        }
    }
}
