//! Seeded random instances.

use std::collections::BTreeSet;
use std::sync::Arc;

use aleph_core::arith::{nth_prime, PrimeSet, Rational};
use aleph_core::engine::{explicit_nice_pair, make_gp, validate_limit, Engine, LimitElement, NicePair};
use aleph_core::trees::{Branch, Node, TreeOnOmega, TreeSpec};
use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Host trees of random instances are `3^{<ω}`.
pub const HOST_ARITY: u64 = 3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random prefix-closed set of at most `max_nodes` nodes with entries in
/// `1..HOST_ARITY`, depth at most `max_len`.
pub fn random_inner_tree(rng: &mut impl Rng, max_nodes: usize, max_len: usize) -> BTreeSet<Node> {
    let mut nodes = BTreeSet::from([Node::root()]);
    let target = rng.gen_range(1..=max_nodes.max(1));
    let mut attempts = 0;
    while nodes.len() < target && attempts < 64 {
        attempts += 1;
        let open: Vec<&Node> = nodes.iter().filter(|n| n.len() < max_len).collect();
        let Some(parent) = open.choose(rng) else { break };
        let child = parent.child(rng.gen_range(1..HOST_ARITY));
        nodes.insert(child);
    }
    nodes
}

pub fn random_nice_pair(rng: &mut impl Rng, max_nodes: usize) -> Arc<NicePair> {
    let inner = random_inner_tree(rng, max_nodes, 4);
    let mut pool: Vec<u64> = (0..24).map(nth_prime).collect();
    pool.shuffle(rng);
    let primes: Vec<(Node, u64)> = inner.iter().cloned().zip(pool).collect();
    explicit_nice_pair(
        TreeOnOmega::from_spec(TreeSpec::Full { arity: Some(HOST_ARITY) }),
        TreeOnOmega::explicit(inner),
        &primes,
    )
}

pub fn random_engine(rng: &mut impl Rng, max_nodes: usize, truncation: usize) -> Engine {
    Engine::from_nice_pair(random_nice_pair(rng, max_nodes), truncation, Some(HOST_ARITY))
}

/// `G_P` over a height-2 fan, with `P` drawn from a fixed branch-coded set.
pub fn fan_engine(rng: &mut impl Rng, truncation: usize) -> Engine {
    let fam = aleph_core::arith::almost_disjoint_family(6).expect("small family");
    let p = fam.sets.choose(rng).expect("nonempty family").clone();
    make_gp(p, TreeOnOmega::from_spec(TreeSpec::Fan { height: 2 }), truncation, HOST_ARITY)
        .expect("fan engines are valid")
}

pub fn random_branch(rng: &mut impl Rng, max_stem: usize) -> Branch {
    let len = rng.gen_range(0..=max_stem);
    let stem: Vec<u64> = (0..len).map(|_| rng.gen_range(0..HOST_ARITY)).collect();
    let cycle = match rng.gen_range(0..4) {
        0 | 1 => vec![0],
        2 => vec![rng.gen_range(0..HOST_ARITY)],
        _ => vec![rng.gen_range(0..HOST_ARITY), rng.gen_range(0..HOST_ARITY)],
    };
    Branch::periodic(stem, cycle).expect("nonempty cycle")
}

fn nonzero(rng: &mut impl Rng, bound: i64) -> BigInt {
    let v = rng.gen_range(1..=bound);
    BigInt::from(if rng.gen_bool(0.5) { v } else { -v })
}

/// A nonzero element of the limit with up to `max_terms` branches; some
/// coefficients carry a prime of the branch label in the denominator.
pub fn random_limit_element(engine: &Engine, rng: &mut impl Rng, max_terms: usize) -> LimitElement {
    let terms = rng.gen_range(1..=max_terms.max(1));
    let mut y = LimitElement::zero();
    let mut tries = 0;
    while y.terms().len() < terms && tries < 4 * terms {
        tries += 1;
        let b = random_branch(rng, 3);
        if y.terms().contains_key(&b) {
            continue;
        }
        let mut c = Rational::from_integer(nonzero(rng, 5));
        if rng.gen_bool(0.4) {
            if let Ok(PrimeSet::Finite(ps)) = engine.limit_label(&b) {
                if let Some(&p) = ps.choose(rng) {
                    let k = loop {
                        let k = nonzero(rng, 5);
                        if &k % BigInt::from(p) != BigInt::from(0) {
                            break k;
                        }
                    };
                    c = Rational::new(k, BigInt::from(p));
                }
            }
        }
        let term = LimitElement::new([(b, c)]);
        if validate_limit(engine, &term).is_ok() {
            y = y.add(&term);
        }
    }
    if y.is_zero() {
        y = LimitElement::branch(Branch::zero_tail(Node::root()));
    }
    y
}
