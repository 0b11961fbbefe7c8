//! A binary tree of integers splitting by Bézout identities, and the limit
//! element it defines, divisible by ever longer prime products although
//! every branch label is finite.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::arith::{product_of, PrimeSet};
use crate::engine::Engine;
use crate::level::LevelElement;
use crate::trees::{Node, TreeOnOmega};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BezoutError {
    #[error("no unused prime dividing none of the level {level} values")]
    PrimesExhausted { level: usize },
    #[error("the first supplied prime is missing")]
    NoPrimes,
    #[error("supplied primes repeat {0}")]
    Repeated(u64),
    #[error("clause ({clause}) fails at {node}: {detail}")]
    Clause {
        clause: &'static str,
        node: Node,
        detail: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BezoutNode {
    pub prime: u64,
    pub value: BigInt,
    pub divisors: BTreeSet<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BezoutTree {
    pub depth: usize,
    pub primes: Vec<u64>,
    /// Primes in the order they enter the tree, one per level.
    pub used: Vec<u64>,
    pub nodes: BTreeMap<Node, BezoutNode>,
}

fn binary_level(n: usize) -> Vec<Node> {
    (0..1u64 << n)
        .map(|i| Node::new((0..n).map(|b| (i >> (n - 1 - b)) & 1).collect::<Vec<_>>()))
        .collect()
}

/// `u = q⁻¹ mod p` in `1..p` and `v = (1 - q u) / p`, so `q u + p v = 1`.
pub fn bezout_cofactors(q: u64, p: u64) -> (BigInt, BigInt) {
    let (q, p) = (BigInt::from(q), BigInt::from(p));
    let e = q.extended_gcd(&p);
    let u = e.x.mod_floor(&p);
    let v = (BigInt::one() - &q * &u) / &p;
    (u, v)
}

pub fn build_bezout_tree(primes: &[u64], depth: usize) -> Result<BezoutTree, BezoutError> {
    let mut seen = BTreeSet::new();
    for &p in primes {
        if !seen.insert(p) {
            return Err(BezoutError::Repeated(p));
        }
    }
    let &first = primes.first().ok_or(BezoutError::NoPrimes)?;
    let mut nodes = BTreeMap::new();
    nodes.insert(
        Node::root(),
        BezoutNode {
            prime: first,
            value: BigInt::one(),
            divisors: BTreeSet::new(),
        },
    );
    let mut used = alloc::vec![first];
    for m in 0..depth {
        let level = binary_level(m);
        let q = primes
            .iter()
            .copied()
            .filter(|p| !used.contains(p))
            .find(|&p| level.iter().all(|eta| !(&nodes[eta].value % p).is_zero()))
            .ok_or(BezoutError::PrimesExhausted { level: m })?;
        used.push(q);
        for eta in level {
            let parent = nodes[&eta].clone();
            let (u, v) = bezout_cofactors(q, parent.prime);
            let mut left = parent.divisors.clone();
            left.insert(q);
            let mut right = parent.divisors.clone();
            right.insert(parent.prime);
            nodes.insert(
                eta.child(0),
                BezoutNode {
                    prime: parent.prime,
                    value: &parent.value * q * u,
                    divisors: left,
                },
            );
            nodes.insert(
                eta.child(1),
                BezoutNode {
                    prime: q,
                    value: &parent.value * parent.prime * v,
                    divisors: right,
                },
            );
        }
    }
    Ok(BezoutTree {
        depth,
        primes: primes.to_vec(),
        used,
        nodes,
    })
}

pub fn verify_bezout(t: &BezoutTree) -> Result<(), BezoutError> {
    let fail = |clause: &'static str, node: &Node, detail: String| BezoutError::Clause {
        clause,
        node: node.clone(),
        detail,
    };
    for n in 0..=t.depth {
        let level = binary_level(n);
        let level_primes: BTreeSet<u64> = level
            .iter()
            .filter_map(|eta| t.nodes.get(eta).map(|r| r.prime))
            .collect();
        for eta in &level {
            let Some(r) = t.nodes.get(eta) else {
                return Err(fail("a", eta, "missing node".into()));
            };
            if !t.used[..=n].contains(&r.prime) || !t.primes.contains(&r.prime) {
                return Err(fail("a", eta, format!("{} is not among the first {} primes used", r.prime, n + 1)));
            }
            if r.value.is_zero() {
                return Err(fail("b", eta, "zero value".into()));
            }
            if r.divisors.contains(&r.prime) || !r.divisors.is_subset(&level_primes) {
                return Err(fail("c", eta, format!("divisor set {:?}", r.divisors)));
            }
            let prod = BigInt::from(product_of(&r.divisors.iter().copied().collect::<Vec<_>>()));
            if !(&r.value % &prod).is_zero() {
                return Err(fail("d", eta, format!("{prod} does not divide {}", r.value)));
            }
            if (&r.value % r.prime).is_zero() {
                return Err(fail("e", eta, format!("{} divides {}", r.prime, r.value)));
            }
            if n == t.depth {
                continue;
            }
            let (Some(l), Some(rt)) = (t.nodes.get(&eta.child(0)), t.nodes.get(&eta.child(1))) else {
                return Err(fail("f", eta, "missing child".into()));
            };
            let q = t.used[n + 1];
            if l.prime != r.prime {
                return Err(fail("f(i)", eta, format!("left child prime {}", l.prime)));
            }
            if rt.prime != q {
                return Err(fail("f(ii)", eta, format!("right child prime {}", rt.prime)));
            }
            let mut dl = r.divisors.clone();
            dl.insert(q);
            if l.divisors != dl {
                return Err(fail("f(iii)", eta, format!("left divisor set {:?}", l.divisors)));
            }
            let mut dr = r.divisors.clone();
            dr.insert(r.prime);
            if rt.divisors != dr {
                return Err(fail("f(iv)", eta, format!("right divisor set {:?}", rt.divisors)));
            }
            if &l.value + &rt.value != r.value {
                return Err(fail("f(v)", eta, format!("{} + {} ≠ {}", l.value, rt.value, r.value)));
            }
        }
    }
    Ok(())
}

/// The engine on `2^{≤depth}` with `L(η) = { p_ν : η ⊴ ν }`.
pub fn bezout_engine(t: &BezoutTree) -> Engine {
    let host = TreeOnOmega::explicit(t.nodes.keys().cloned());
    let mut sets: BTreeMap<Node, BTreeSet<u64>> = BTreeMap::new();
    for n in (0..=t.depth).rev() {
        for eta in binary_level(n) {
            let mut s = BTreeSet::from([t.nodes[&eta].prime]);
            for k in 0..2 {
                if let Some(c) = sets.get(&eta.child(k)) {
                    s.extend(c.iter().copied());
                }
            }
            sets.insert(eta, s);
        }
    }
    let table = sets
        .into_iter()
        .map(|(eta, s)| (eta, PrimeSet::finite(s).expect("tree primes are prime")))
        .collect();
    Engine::from_table(host, table, t.depth)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BezoutLevel {
    pub level: usize,
    pub element: LevelElement,
    /// `∏_{ℓ<level}` of the primes in order of use.
    pub divisor: BigInt,
    pub coherent: bool,
    pub member: bool,
    pub divisible: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BezoutLimitReport {
    pub levels: Vec<BezoutLevel>,
}

impl BezoutLimitReport {
    pub fn passed(&self) -> bool {
        self.levels.iter().all(|l| l.coherent && l.member && l.divisible)
    }
}

/// `y_n = Σ_{η ∈ 2^n} a_η x_η`, its coherence under bonding and its
/// divisibility by the product of the first `n` primes used.
pub fn bezout_limit_element(t: &BezoutTree) -> Result<BezoutLimitReport, crate::level::LevelError> {
    let engine = bezout_engine(t);
    let mut levels = Vec::with_capacity(t.depth + 1);
    let mut prev: Option<LevelElement> = None;
    for n in 0..=t.depth {
        let y = LevelElement::from_terms(
            n,
            binary_level(n)
                .into_iter()
                .map(|eta| {
                    let a = t.nodes[&eta].value.clone();
                    (eta, BigRational::from_integer(a))
                }),
        )?;
        let group = engine.build_level(n);
        let divisor = BigInt::from(product_of(&t.used[..n.min(t.used.len())]));
        let quotient = y.scale(&BigRational::new(BigInt::one(), divisor.clone()));
        let coherent = match &prev {
            None => true,
            Some(p) => y.bond(n - 1)? == *p,
        };
        levels.push(BezoutLevel {
            level: n,
            member: group.is_member(&y)?,
            divisible: group.is_member(&quotient)?,
            element: y.clone(),
            divisor,
            coherent,
        });
        prev = Some(y);
    }
    Ok(BezoutLimitReport { levels })
}

/// Largest absolute value in the tree, for reports.
pub fn max_magnitude(t: &BezoutTree) -> BigInt {
    t.nodes.values().map(|r| r.value.abs()).max().unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn small_trees() {
        let t = build_bezout_tree(&[2, 3, 5], 0).unwrap();
        assert_eq!(t.nodes[&Node::root()].value, BigInt::one());
        let t = build_bezout_tree(&[2, 3, 5], 1).unwrap();
        assert_eq!(t.nodes[&Node::new(vec![0])].value, BigInt::from(3));
        assert_eq!(t.nodes[&Node::new(vec![1])].value, BigInt::from(-2));
        verify_bezout(&t).unwrap();
        let t = build_bezout_tree(&[2, 3, 5], 2).unwrap();
        let vals: Vec<BigInt> = binary_level(2).iter().map(|e| t.nodes[e].value.clone()).collect();
        assert_eq!(vals, [15, -12, -20, 18].map(BigInt::from).to_vec());
        verify_bezout(&t).unwrap();
        let r = bezout_limit_element(&t).unwrap();
        assert!(r.passed());
    }

    #[test]
    fn mutations_are_caught() {
        let t = build_bezout_tree(&[2, 3, 5, 7], 2).unwrap();
        let mut bad = t.clone();
        bad.nodes.get_mut(&Node::new(vec![1, 0])).unwrap().value += 1;
        assert!(matches!(verify_bezout(&bad), Err(BezoutError::Clause { clause: "d" | "f(v)", .. })));
        let mut bad = t.clone();
        bad.nodes.get_mut(&Node::new(vec![0])).unwrap().divisors.insert(7);
        assert!(matches!(verify_bezout(&bad), Err(BezoutError::Clause { clause: "c" | "d" | "f(iii)", .. })));
        assert!(matches!(
            build_bezout_tree(&[2, 3], 2),
            Err(BezoutError::PrimesExhausted { level: 1 })
        ));
    }
}
