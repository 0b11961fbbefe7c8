//! Coding a truncated inverse limit into permutations of ω: the elements of
//! level `n` become powers of the `n`-th prime and an element of the limit
//! acts on each level by translation.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::arith::{nth_prime, product_of, Rational};
use crate::engine::{Engine, EngineError, LimitElement};
use crate::level::LevelElement;
use crate::perm::{PartialPermutation, PermError, Point, PrimePower};
use crate::trees::{Dyadic, Node};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodingError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Perm(#[from] PermError),
    #[error("level {level} element uses {node}, which is outside the coded window")]
    Gap { level: usize, node: Node },
    #[error("coefficient at {node} is not in its rank-1 group")]
    NotInGroup { node: Node },
    #[error("no sort {0}")]
    NoSort(usize),
}

fn pow(b: &BigUint, e: usize) -> BigUint {
    num_traits::pow(b.clone(), e)
}

/// Position of `c ∈ ℤ^N` in the order by height `max |c_i|`, then
/// lexicographically; the vectors of height below `h` come first and there
/// are `(2h-1)^N` of them.
pub fn height_rank(c: &[BigInt]) -> BigUint {
    let n = c.len();
    let h = c.iter().map(|x| x.magnitude().clone()).max().unwrap_or_default();
    if h.is_zero() {
        return BigUint::zero();
    }
    let hi = BigInt::from(h.clone());
    let wide = &h * 2u32 + 1u32;
    let narrow = &h * 2u32 - 1u32;
    let mut rank = pow(&narrow, n);
    let mut hit = false;
    for (i, ci) in c.iter().enumerate() {
        let r = n - i - 1;
        let all = pow(&wide, r);
        let inner = &all - pow(&narrow, r);
        let below = (ci + &hi).to_biguint().expect("within height");
        if hit {
            rank += &below * &all;
        } else if !below.is_zero() {
            rank += &all + (&below - 1u32) * &inner;
        }
        hit |= ci.magnitude() == &h;
    }
    rank
}

pub fn height_unrank(rank: &BigUint, n: usize) -> Vec<BigInt> {
    if rank.is_zero() || n == 0 {
        return alloc::vec![BigInt::zero(); n];
    }
    let t = rank.nth_root(n as u32);
    let h: BigUint = if (&t % 2u32).is_one() { (&t + 1u32) / 2u32 } else { &t / 2u32 };
    let hi = BigInt::from(h.clone());
    let wide = &h * 2u32 + 1u32;
    let narrow = &h * 2u32 - 1u32;
    let mut off = rank - pow(&narrow, n);
    let mut hit = false;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let r = n - i - 1;
        let all = pow(&wide, r);
        let inner = if hit { all.clone() } else { &all - pow(&narrow, r) };
        let v = if off < all {
            -hi.clone()
        } else {
            off -= &all;
            let middle = &h * 2u32 - 1u32;
            let k = if inner.is_zero() { middle.clone() } else { &off / &inner };
            if k < middle {
                off -= &k * &inner;
                -&hi + 1 + BigInt::from(k)
            } else {
                off -= &middle * &inner;
                hi.clone()
            }
        };
        hit |= v.magnitude() == &h;
        out.push(v);
    }
    out
}

/// The finite-label window nodes of one level, with `∏ L(ν)` for each; the
/// group they span is `ℤ^N` after scaling coefficients by those products.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sort {
    pub level: usize,
    pub nodes: Vec<Node>,
    pub scales: Vec<BigInt>,
}

/// Sorts `0..=depth` of an engine window; sort `n` is coded by powers of
/// the `n`-th prime.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DomainCoding {
    pub sorts: Vec<Sort>,
}

impl DomainCoding {
    pub fn from_engine(engine: &Engine, depth: usize) -> Result<Self, CodingError> {
        let mut sorts = Vec::with_capacity(depth + 1);
        for n in 0..=depth {
            let mut nodes = Vec::new();
            let mut scales = Vec::new();
            for node in engine.level_nodes(n)? {
                if let Some(ps) = engine.label(&node)?.as_finite() {
                    scales.push(BigInt::from(product_of(ps)));
                    nodes.push(node);
                }
            }
            sorts.push(Sort { level: n, nodes, scales });
        }
        Ok(DomainCoding { sorts })
    }

    pub fn depth(&self) -> usize {
        self.sorts.len() - 1
    }

    fn sort(&self, n: usize) -> Result<&Sort, CodingError> {
        self.sorts.get(n).ok_or(CodingError::NoSort(n))
    }

    pub fn coordinates(&self, e: &LevelElement) -> Result<Vec<BigInt>, CodingError> {
        let sort = self.sort(e.level())?;
        for node in e.nodes() {
            if !sort.nodes.contains(node) {
                return Err(CodingError::Gap {
                    level: e.level(),
                    node: node.clone(),
                });
            }
        }
        let mut out = Vec::with_capacity(sort.nodes.len());
        for (node, d) in sort.nodes.iter().zip(&sort.scales) {
            let c = e.coeff(node) * BigRational::from_integer(d.clone());
            if !c.is_integer() {
                return Err(CodingError::NotInGroup { node: node.clone() });
            }
            out.push(c.to_integer());
        }
        Ok(out)
    }

    pub fn element(&self, level: usize, c: &[BigInt]) -> Result<LevelElement, CodingError> {
        let sort = self.sort(level)?;
        let terms = sort
            .nodes
            .iter()
            .zip(&sort.scales)
            .zip(c)
            .map(|((n, d), x)| (n.clone(), BigRational::new(x.clone(), d.clone())));
        Ok(LevelElement::from_terms(level, terms).expect("nodes of the level"))
    }

    /// `p_n^(rank + 1)`.
    pub fn encode(&self, e: &LevelElement) -> Result<Point, CodingError> {
        let rank = height_rank(&self.coordinates(e)?);
        Ok(Point::power(e.level(), rank + 1u32))
    }

    /// The sort and rank of a coded point, or `None` off the codes.
    pub fn decode(&self, k: &Point) -> Option<(usize, BigUint)> {
        let (sort, exponent) = match k {
            Point::Power(PrimePower { sort, exponent }) => (*sort, exponent.clone()),
            Point::Small(v) => {
                let (sort, e) = self.small_power(*v)?;
                (sort, BigUint::from(e))
            }
        };
        (sort < self.sorts.len()).then(|| (sort, exponent - 1u32))
    }

    /// `v = p_sort^e` with `sort` a sort of this coding.
    fn small_power(&self, v: u64) -> Option<(usize, u32)> {
        if v < 2 {
            return None;
        }
        for sort in 0..self.sorts.len() {
            let p = nth_prime(sort);
            if v % p != 0 {
                continue;
            }
            let (mut rest, mut e) = (v, 0);
            while rest % p == 0 {
                rest /= p;
                e += 1;
            }
            return (rest == 1).then_some((sort, e));
        }
        None
    }

    pub fn decode_element(&self, k: &Point) -> Option<LevelElement> {
        let (sort, rank) = self.decode(k)?;
        let dim = self.sorts[sort].nodes.len();
        self.element(sort, &height_unrank(&rank, dim)).ok()
    }
}

/// Per-sort translations `a ↦ a + y_n`.
#[derive(Clone, Debug)]
pub struct Translation<'a> {
    coding: &'a DomainCoding,
    shifts: Vec<Vec<BigInt>>,
}

impl<'a> Translation<'a> {
    pub fn of_limit(coding: &'a DomainCoding, y: &LimitElement) -> Result<Self, CodingError> {
        let shifts = (0..=coding.depth())
            .map(|n| coding.coordinates(&y.project(n)))
            .collect::<Result<_, _>>()?;
        Ok(Translation { coding, shifts })
    }

    pub fn apply(&self, k: &Point) -> Point {
        let Some((sort, rank)) = self.coding.decode(k) else {
            return k.clone();
        };
        let dim = self.coding.sorts[sort].nodes.len();
        let c = height_unrank(&rank, dim);
        let moved: Vec<BigInt> = c.iter().zip(&self.shifts[sort]).map(|(a, b)| a + b).collect();
        Point::power(sort, height_rank(&moved) + 1u32)
    }
}

/// `π_y` restricted to `{0, …, bound-1}`.
pub fn encode_element(coding: &DomainCoding, y: &LimitElement, bound: u64) -> Result<PartialPermutation, CodingError> {
    let t = Translation::of_limit(coding, y)?;
    let mut moved = Vec::new();
    for k in 0..bound {
        let img = t.apply(&Point::Small(k));
        if img != Point::Small(k) {
            moved.push((k, img));
        }
    }
    Ok(PartialPermutation::new(bound, moved)?)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EmbeddingReport {
    pub points_checked: u64,
    pub coded_points: u64,
    pub mismatches: Vec<String>,
}

impl EmbeddingReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// `π_{y+z} = π_y ∘ π_z` and `π_{-y} = π_y⁻¹` at every point below `bound`.
pub fn verify_embedding(coding: &DomainCoding, y: &LimitElement, z: &LimitElement, bound: u64) -> Result<EmbeddingReport, CodingError> {
    let ty = Translation::of_limit(coding, y)?;
    let tz = Translation::of_limit(coding, z)?;
    let tsum = Translation::of_limit(coding, &y.add(z))?;
    let tneg = Translation::of_limit(coding, &y.neg())?;
    let mut report = EmbeddingReport::default();
    for k in 0..bound {
        let p = Point::Small(k);
        report.points_checked += 1;
        if coding.decode(&p).is_some() {
            report.coded_points += 1;
        }
        let lhs = tsum.apply(&p);
        let rhs = ty.apply(&tz.apply(&p));
        if lhs != rhs {
            report.mismatches.push(format!("π(y+z)({k}) = {lhs} but π(y)(π(z)({k})) = {rhs}"));
        }
        if tneg.apply(&ty.apply(&p)) != p || ty.apply(&tneg.apply(&p)) != p {
            report.mismatches.push(format!("π(-y) does not invert π(y) at {k}"));
        }
    }
    Ok(report)
}

/// `2^{-n}` for the least `n` below both bounds where the images differ,
/// `0` if they agree there.
pub fn distance_in_sinf(p1: &PartialPermutation, p2: &PartialPermutation) -> Dyadic {
    let bound = p1.bound().min(p2.bound());
    let keys: BTreeSet<u64> = p1
        .moved()
        .keys()
        .chain(p2.moved().keys())
        .copied()
        .filter(|&k| k < bound)
        .collect();
    for k in keys {
        if p1.apply(k) != p2.apply(k) {
            return Dyadic::InvPow2(k.to_u32().unwrap_or(u32::MAX));
        }
    }
    Dyadic::Zero
}

/// The inverse on the points below the bound whose preimage is also below it.
pub fn inverse_window(p: &PartialPermutation) -> Result<PartialPermutation, PermError> {
    let mut entries = Vec::new();
    for (&k, v) in p.moved() {
        if let Point::Small(v) = v {
            if *v < p.bound() {
                entries.push((*v, Point::Small(k)));
            }
        }
    }
    PartialPermutation::new(p.bound(), entries)
}

pub fn coefficient_scale(sort: &Sort, node: &Node) -> Option<Rational> {
    let i = sort.nodes.iter().position(|n| n == node)?;
    Some(BigRational::from_integer(sort.scales[i].clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Signed;
    use crate::arith::int;
    use crate::engine::explicit_nice_pair;
    use crate::trees::{Branch, TreeOnOmega};
    use alloc::vec;

    fn iv(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn height_order_is_a_bijection() {
        for dim in 1..=3usize {
            let total = 7usize.pow(dim as u32);
            let mut seen = BTreeSet::new();
            for r in 0..total {
                let c = height_unrank(&BigUint::from(r), dim);
                assert!(c.iter().all(|x| x.abs() <= BigInt::from(3)));
                assert_eq!(height_rank(&c), BigUint::from(r));
                assert!(seen.insert(c));
            }
        }
        assert_eq!(height_rank(&iv(&[-1, -1])), BigUint::from(1u32));
        assert_eq!(height_rank(&iv(&[1, 1])), BigUint::from(8u32));
        let big = iv(&[1 << 40, -(1 << 41), 5]);
        assert_eq!(height_unrank(&height_rank(&big), 3), big);
    }

    #[test]
    fn np1_translations() {
        let pair = explicit_nice_pair(
            TreeOnOmega::full(),
            TreeOnOmega::from_lists(&[&[], &[1]]),
            &[(Node::root(), 2), (Node::new(vec![1]), 3)],
        );
        let e = Engine::from_nice_pair(pair, 3, Some(2));
        let coding = DomainCoding::from_engine(&e, 2).unwrap();
        let y = LimitElement::branch(Branch::zero_tail(Node::new(vec![1])));
        let z = LimitElement::branch(Branch::zero_tail(Node::root())).scale(&int(-2));
        let r = verify_embedding(&coding, &y, &z, 2000).unwrap();
        assert!(r.passed(), "{:?}", r.mismatches);
        let id = encode_element(&coding, &LimitElement::zero(), 100).unwrap();
        assert!(id.is_identity());
        let py = encode_element(&coding, &y, 100).unwrap();
        assert!(py.moved().keys().all(|k| coding.decode(&Point::Small(*k)).is_some()));
        assert_eq!(distance_in_sinf(&py, &py), Dyadic::Zero);
        assert!(encode_element(&coding, &y, 0).unwrap().is_identity());
    }

    #[test]
    fn distances() {
        let a = PartialPermutation::from_small(5, &[0, 1, 2, 4, 3]).unwrap();
        let b = PartialPermutation::identity(5);
        assert_eq!(distance_in_sinf(&a, &b), Dyadic::InvPow2(3));
        let c = PartialPermutation::from_small(5, &[1, 0, 2, 3, 4]).unwrap();
        assert_eq!(distance_in_sinf(&c, &b), Dyadic::InvPow2(0));
    }
}
