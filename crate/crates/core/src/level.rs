//! Completely decomposable level groups `G_n = ⊕ K_η x_η` and their elements.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::arith::{
    characteristic_in_label, div_prime, primes::factor_biguint, product_of, rational_valuation,
    ArithError, Characteristic, PrimeSet, Rational,
};
use crate::lattice::{self, Saturation};
use crate::trees::{Node, TreeError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LevelError {
    #[error("element lives at level {found}, expected {expected}")]
    LevelMismatch { expected: usize, found: usize },
    #[error("node {node} does not have length {level}")]
    WrongLength { node: Node, level: usize },
    #[error("node {0} is not in the host tree")]
    NotInHost(Node),
    #[error("cannot bond from level {from} to level {to}")]
    LevelOrder { from: usize, to: usize },
    #[error("node {0} lies beyond the truncation")]
    BeyondTruncation(Node),
    #[error(transparent)]
    Arith(#[from] ArithError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("{0}")]
    Other(String),
}

/// Where the label `L(η)` of a node comes from.
pub trait LabelSource: Send + Sync + fmt::Debug {
    fn label(&self, node: &Node) -> Result<PrimeSet, LevelError>;
    fn in_host(&self, node: &Node) -> bool;
    /// Child entries of `node` in the host, within the working window.
    fn host_children(&self, node: &Node) -> Result<Vec<u64>, LevelError>;
}

/// A finite table of labels, for small hand-made groups.
#[derive(Clone, Debug, Default)]
pub struct LabelTable(pub BTreeMap<Node, PrimeSet>);

impl LabelSource for LabelTable {
    fn label(&self, node: &Node) -> Result<PrimeSet, LevelError> {
        self.0
            .get(node)
            .cloned()
            .ok_or_else(|| LevelError::NotInHost(node.clone()))
    }

    fn in_host(&self, node: &Node) -> bool {
        self.0.contains_key(node)
    }

    fn host_children(&self, node: &Node) -> Result<Vec<u64>, LevelError> {
        Ok(self
            .0
            .keys()
            .filter(|c| c.len() == node.len() + 1 && node.is_prefix_of(c))
            .filter_map(Node::last)
            .collect())
    }
}

/// A finite-support element `Σ a_η x_η` of a level group. Zero coefficients
/// are never stored, so equality is syntactic.
#[derive(Clone, PartialEq, Eq)]
pub struct LevelElement {
    level: usize,
    support: BTreeMap<Node, Rational>,
}

impl fmt::Debug for LevelElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for LevelElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.support.is_empty() {
            return write!(f, "0@{}", self.level);
        }
        for (i, (n, c)) in self.support.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{c}·x{n}")?;
        }
        Ok(())
    }
}

impl LevelElement {
    pub fn zero(level: usize) -> Self {
        LevelElement {
            level,
            support: BTreeMap::new(),
        }
    }

    /// Sum of the given terms; all nodes must have length `level`.
    pub fn from_terms<I>(level: usize, terms: I) -> Result<Self, LevelError>
    where
        I: IntoIterator<Item = (Node, Rational)>,
    {
        let mut e = LevelElement::zero(level);
        for (node, c) in terms {
            if node.len() != level {
                return Err(LevelError::WrongLength { node, level });
            }
            e.add_term(node, c);
        }
        Ok(e)
    }

    pub fn basis(node: Node) -> Self {
        let level = node.len();
        let mut support = BTreeMap::new();
        support.insert(node, Rational::one());
        LevelElement { level, support }
    }

    pub fn term(node: Node, c: Rational) -> Self {
        let level = node.len();
        let mut e = LevelElement::zero(level);
        e.add_term(node, c);
        e
    }

    fn add_term(&mut self, node: Node, c: Rational) {
        if c.is_zero() {
            return;
        }
        let slot = self.support.entry(node.clone()).or_insert_with(Rational::zero);
        *slot += c;
        if slot.is_zero() {
            self.support.remove(&node);
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn support(&self) -> &BTreeMap<Node, Rational> {
        &self.support
    }

    pub fn coeff(&self, node: &Node) -> Rational {
        self.support.get(node).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.support.is_empty()
    }

    pub fn add(&self, other: &LevelElement) -> Result<Self, LevelError> {
        if self.level != other.level {
            return Err(LevelError::LevelMismatch {
                expected: self.level,
                found: other.level,
            });
        }
        let mut out = self.clone();
        for (n, c) in &other.support {
            out.add_term(n.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn neg(&self) -> Self {
        self.scale(&-Rational::one())
    }

    pub fn sub(&self, other: &LevelElement) -> Result<Self, LevelError> {
        self.add(&other.neg())
    }

    pub fn scale(&self, k: &Rational) -> Self {
        let mut out = LevelElement::zero(self.level);
        for (n, c) in &self.support {
            out.add_term(n.clone(), c * k);
        }
        out
    }

    /// Image under the bonding map `x_η ↦ x_{η↾to}`.
    pub fn bond(&self, to: usize) -> Result<Self, LevelError> {
        if to > self.level {
            return Err(LevelError::LevelOrder {
                from: self.level,
                to,
            });
        }
        let mut out = LevelElement::zero(to);
        for (n, c) in &self.support {
            out.add_term(n.restrict(to), c.clone());
        }
        Ok(out)
    }

    /// Restriction of the support to `targets`.
    pub fn project(&self, targets: &BTreeSet<Node>) -> Self {
        self.project_by(|n| targets.contains(n))
    }

    pub fn project_by(&self, keep: impl Fn(&Node) -> bool) -> Self {
        LevelElement {
            level: self.level,
            support: self
                .support
                .iter()
                .filter(|(n, _)| keep(n))
                .map(|(n, c)| (n.clone(), c.clone()))
                .collect(),
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.support.keys()
    }
}

/// The bonding map `f_(from, to)` applied to an element of `G_from`.
pub fn bonding_apply(e: &LevelElement, from: usize, to: usize) -> Result<LevelElement, LevelError> {
    if e.level() != from {
        return Err(LevelError::LevelMismatch {
            expected: from,
            found: e.level(),
        });
    }
    e.bond(to)
}

/// Why an element is not in its level group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    NodeNotInGroup(Node),
    PrimeNotAllowed { node: Node, p: u64 },
    NotSquarefree { node: Node, p: u64 },
    WrongLevel { expected: usize, found: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NodeNotInGroup(n) => write!(f, "node {n} is not a component"),
            Violation::PrimeNotAllowed { node, p } => {
                write!(f, "prime {p} in the denominator at {node} is not in its label")
            }
            Violation::NotSquarefree { node, p } => {
                write!(f, "denominator at {node} is divisible by {p}^2")
            }
            Violation::WrongLevel { expected, found } => {
                write!(f, "element at level {found}, group at level {expected}")
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct LevelGroup {
    level: usize,
    source: Arc<dyn LabelSource>,
}

/// `⟨X⟩*` inside a level group: a basis of the rational span of `X` (in
/// reduced echelon form over the listed coordinates) plus membership.
#[derive(Clone, Debug)]
pub struct SubgroupDescription {
    pub level: usize,
    pub coords: Vec<Node>,
    pub basis: Vec<LevelElement>,
    group: LevelGroup,
}

#[derive(Clone, Debug)]
pub enum Freeness {
    /// A ℤ-basis of the subgroup.
    Free(Vec<LevelElement>),
    /// A member whose type is not `0`: it is divisible by every prime of
    /// `divisors`, an infinite set.
    NonFree {
        element: LevelElement,
        divisors: PrimeSet,
    },
    Unknown,
}

impl LevelGroup {
    pub fn new(level: usize, source: Arc<dyn LabelSource>) -> Self {
        LevelGroup { level, source }
    }

    pub fn from_table(level: usize, table: BTreeMap<Node, PrimeSet>) -> Self {
        LevelGroup::new(level, Arc::new(LabelTable(table)))
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn source(&self) -> &Arc<dyn LabelSource> {
        &self.source
    }

    pub fn label(&self, node: &Node) -> Result<PrimeSet, LevelError> {
        if node.len() != self.level {
            return Err(LevelError::WrongLength {
                node: node.clone(),
                level: self.level,
            });
        }
        self.source.label(node)
    }

    pub fn has_component(&self, node: &Node) -> bool {
        node.len() == self.level && self.source.in_host(node)
    }

    /// Components in the working window, in lexicographic order.
    pub fn components(&self) -> Result<Vec<(Node, PrimeSet)>, LevelError> {
        let mut frontier = alloc::vec![Node::root()];
        for _ in 0..self.level {
            let mut next = Vec::new();
            for n in &frontier {
                for e in self.source.host_children(n)? {
                    next.push(n.child(e));
                }
            }
            frontier = next;
        }
        frontier
            .into_iter()
            .map(|n| {
                let l = self.source.label(&n)?;
                Ok((n, l))
            })
            .collect()
    }

    pub fn validate_element(&self, e: &LevelElement) -> Result<Result<(), Violation>, LevelError> {
        if e.level() != self.level {
            return Ok(Err(Violation::WrongLevel {
                expected: self.level,
                found: e.level(),
            }));
        }
        for (node, c) in e.support() {
            if !self.has_component(node) {
                return Ok(Err(Violation::NodeNotInGroup(node.clone())));
            }
            if let Some(v) = coefficient_violation(node, c, &self.label(node)?)? {
                return Ok(Err(v));
            }
        }
        Ok(Ok(()))
    }

    pub fn is_member(&self, e: &LevelElement) -> Result<bool, LevelError> {
        Ok(self.validate_element(e)?.is_ok())
    }

    /// Whether `e / p` is again in the group.
    pub fn divisible_by(&self, e: &LevelElement, p: u64) -> Result<bool, LevelError> {
        for (node, c) in e.support() {
            let v = rational_valuation(c, p);
            let ok = v >= 1 || (v == 0 && self.label(node)?.contains(p)?);
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `χ(e)`: the pointwise minimum of the coefficient characteristics.
    pub fn characteristic(&self, e: &LevelElement) -> Result<Characteristic, LevelError> {
        let mut acc: Option<Characteristic> = None;
        for (node, c) in e.support() {
            let ch = characteristic_in_label(c, &self.label(node)?)?;
            acc = Some(match acc {
                None => ch,
                Some(a) => a.meet(&ch)?,
            });
        }
        acc.ok_or(LevelError::Arith(ArithError::ZeroValue))
    }

    pub fn pure_closure(&self, xs: &[LevelElement]) -> Result<SubgroupDescription, LevelError> {
        for x in xs {
            if x.level() != self.level {
                return Err(LevelError::LevelMismatch {
                    expected: self.level,
                    found: x.level(),
                });
            }
        }
        let coords: Vec<Node> = xs
            .iter()
            .flat_map(|x| x.nodes().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let rows: Vec<Vec<Rational>> = xs.iter().map(|x| to_vector(x, &coords)).collect();
        let (echelon, _) = lattice::rref(&rows);
        let basis = echelon
            .iter()
            .map(|r| from_vector(self.level, &coords, r))
            .collect();
        Ok(SubgroupDescription {
            level: self.level,
            coords,
            basis,
            group: self.clone(),
        })
    }

    pub fn freeness_check(&self, s: &SubgroupDescription) -> Result<Freeness, LevelError> {
        let mut scales = Vec::with_capacity(s.coords.len());
        let mut all_finite = true;
        for n in &s.coords {
            match self.label(n)? {
                PrimeSet::Finite(ps) => scales.push(BigInt::from(product_of(&ps))),
                _ => {
                    all_finite = false;
                    scales.push(BigInt::one());
                }
            }
        }
        if all_finite {
            return Ok(Freeness::Free(saturated_basis(s, &scales)));
        }
        for b in &s.basis {
            let mut inter: Option<PrimeSet> = None;
            for n in b.nodes() {
                let l = self.label(n)?;
                inter = Some(match inter {
                    None => l,
                    Some(acc) => match acc.intersect(&l) {
                        Ok(x) => x,
                        Err(_) => return Ok(Freeness::Unknown),
                    },
                });
            }
            if let Some(d) = inter {
                if !d.is_finite() {
                    return Ok(Freeness::NonFree {
                        element: b.clone(),
                        divisors: d,
                    });
                }
            }
        }
        Ok(Freeness::Unknown)
    }
}

fn coefficient_violation(node: &Node, c: &Rational, label: &PrimeSet) -> Result<Option<Violation>, LevelError> {
    let den = c.denom().magnitude();
    if den.is_one() {
        return Ok(None);
    }
    let f = factor_biguint(den)?;
    if let Some(&(p, _)) = f.iter().find(|&&(_, e)| e > 1) {
        return Ok(Some(Violation::NotSquarefree {
            node: node.clone(),
            p,
        }));
    }
    for (p, _) in f {
        if !label.contains(p)? {
            return Ok(Some(Violation::PrimeNotAllowed {
                node: node.clone(),
                p,
            }));
        }
    }
    Ok(None)
}

/// Coefficient vector over `coords`; nodes outside `coords` are dropped.
pub fn to_vector(e: &LevelElement, coords: &[Node]) -> Vec<Rational> {
    coords.iter().map(|n| e.coeff(n)).collect()
}

pub fn from_vector(level: usize, coords: &[Node], v: &[Rational]) -> LevelElement {
    let mut e = LevelElement::zero(level);
    for (n, c) in coords.iter().zip(v) {
        e.add_term(n.clone(), c.clone());
    }
    e
}

fn saturated_basis(s: &SubgroupDescription, scales: &[BigInt]) -> Vec<LevelElement> {
    if s.basis.is_empty() {
        return Vec::new();
    }
    let rows: Vec<Vec<BigInt>> = s
        .basis
        .iter()
        .map(|b| {
            let scaled: Vec<Rational> = to_vector(b, &s.coords)
                .iter()
                .zip(scales)
                .map(|(c, d)| c * BigRational::from_integer(d.clone()))
                .collect();
            clear_denominators(&scaled)
        })
        .collect();
    let sat = Saturation::new(&rows, s.coords.len());
    sat.basis()
        .iter()
        .map(|row| {
            let v: Vec<Rational> = row
                .iter()
                .zip(scales)
                .map(|(x, d)| BigRational::new(x.clone(), d.clone()))
                .collect();
            from_vector(s.level, &s.coords, &v)
        })
        .collect()
}

/// The primitive integer vector on the ray through `v`.
pub fn clear_denominators(v: &[Rational]) -> Vec<BigInt> {
    let den = crate::arith::common_denominator(v.iter());
    let ints: Vec<BigInt> = v
        .iter()
        .map(|c| (c * BigRational::from_integer(den.clone())).to_integer())
        .collect();
    let g = ints
        .iter()
        .fold(BigInt::zero(), |acc, x| num_integer::Integer::gcd(&acc, x));
    if g.is_zero() || g.is_one() {
        ints
    } else {
        ints.into_iter().map(|x| x / &g).collect()
    }
}

impl SubgroupDescription {
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// `e ∈ ⟨X⟩*`: in the rational span and in the ambient group.
    pub fn contains(&self, e: &LevelElement) -> Result<bool, LevelError> {
        if e.level() != self.level {
            return Ok(false);
        }
        if e.nodes().any(|n| !self.coords.contains(n)) {
            return Ok(false);
        }
        let rows: Vec<Vec<Rational>> = self.basis.iter().map(|b| to_vector(b, &self.coords)).collect();
        if lattice::solve(&rows, &to_vector(e, &self.coords)).is_none() {
            return Ok(false);
        }
        self.group.is_member(e)
    }
}

/// `e / p`, without membership checks.
pub fn divide(e: &LevelElement, p: u64) -> LevelElement {
    let mut out = LevelElement::zero(e.level());
    for (n, c) in e.support() {
        out.add_term(n.clone(), div_prime(c, p));
    }
    out
}
