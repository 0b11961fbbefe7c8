//! The inverse system `inv(T, L)` of level groups, nice pairs, and
//! finitely-branch-supported elements of its limit.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::any::Any;
use core::fmt;

use num_traits::{One, Zero};
use spin::RwLock;

use crate::arith::{
    rational_valuation, squarefree_denominator, ArithError, PrimeOracle, PrimeSet, Rational,
    SetSize,
};
use crate::level::{LabelSource, LevelElement, LevelError, LevelGroup};
use crate::trees::{
    wellfounded_check, Branch, Children, Node, NodeEnumeration, Subtree, TreeError, TreeOnOmega,
    TreeSpec, WellFounded,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Level(#[from] LevelError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Arith(#[from] ArithError),
    #[error("nice pair clause ({clause}) fails{}: {detail}", node.as_ref().map(|n| format!(" at {n}")).unwrap_or_default())]
    NicePair {
        clause: char,
        node: Option<Node>,
        detail: String,
    },
    #[error("engine condition ({clause}) fails at {node}: {detail}")]
    Condition {
        clause: char,
        node: Node,
        detail: String,
    },
    #[error("invalid limit element: {0}")]
    InvalidLimit(String),
    #[error("precondition: {0}")]
    Precondition(String),
}

impl From<EngineError> for LevelError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Level(l) => l,
            EngineError::Tree(t) => LevelError::Tree(t),
            EngineError::Arith(a) => LevelError::Arith(a),
            other => LevelError::Other(format!("{other}")),
        }
    }
}

/// How the primes `p_σ`, `σ ∈ S`, are chosen.
#[derive(Clone, Debug)]
pub enum PrimeAssignment {
    Explicit(BTreeMap<Node, u64>),
    /// `p_σ` is the element of `source` whose position equals the position
    /// of `σ` in the weight order of `S`.
    Enumerated { source: PrimeSet },
}

/// A host tree `T`, an inner tree `S ⊆ T` avoiding the entry 0, and an
/// injective assignment of primes to `S`. The label of `η ∈ T` is the set of
/// `p_σ` for `σ ∈ S` comparable with `η` (zero tails of `S` carry the prime
/// of their stem, and a zero tail can only be comparable with `η` through
/// its stem).
#[derive(Debug)]
pub struct NicePair {
    host: TreeOnOmega,
    inner: TreeOnOmega,
    primes: PrimeAssignment,
    order: NodeEnumeration,
}

impl NicePair {
    pub fn new(host: TreeOnOmega, inner: TreeOnOmega, primes: PrimeAssignment) -> Arc<Self> {
        Arc::new(NicePair {
            host,
            order: NodeEnumeration::new(inner.clone()),
            inner,
            primes,
        })
    }

    pub fn host(&self) -> &TreeOnOmega {
        &self.host
    }

    pub fn inner(&self) -> &TreeOnOmega {
        &self.inner
    }

    pub fn primes(&self) -> &PrimeAssignment {
        &self.primes
    }

    pub fn prime_of(&self, sigma: &Node) -> Result<Option<u64>, EngineError> {
        if !self.inner.contains(sigma) {
            return Ok(None);
        }
        match &self.primes {
            PrimeAssignment::Explicit(m) => Ok(m.get(sigma).copied()),
            PrimeAssignment::Enumerated { source } => match self.order.rank(sigma)? {
                Some(i) => Ok(Some(source.nth(i)?)),
                None => Ok(None),
            },
        }
    }

    pub fn node_of_prime(&self, p: u64) -> Result<Option<Node>, EngineError> {
        match &self.primes {
            PrimeAssignment::Explicit(m) => Ok(m.iter().find(|(_, &q)| q == p).map(|(n, _)| n.clone())),
            PrimeAssignment::Enumerated { source } => match source.index_of(p)? {
                Some(i) => Ok(self.order.unrank(i)?),
                None => Ok(None),
            },
        }
    }

    fn source(&self) -> Option<&PrimeSet> {
        match &self.primes {
            PrimeAssignment::Enumerated { source } => Some(source),
            PrimeAssignment::Explicit(_) => None,
        }
    }

    fn primes_below(&self, eta: &Node) -> Result<Vec<u64>, EngineError> {
        let mut out = Vec::new();
        for m in 0..eta.len() {
            if let Some(p) = self.prime_of(&eta.restrict(m))? {
                out.push(p);
            }
        }
        Ok(out)
    }

    /// `L(η) = { p_σ : σ ∈ S, σ ◁ η or η ⊴ σ }`.
    pub fn label(self: &Arc<Self>, eta: &Node) -> Result<PrimeSet, EngineError> {
        let below = self.primes_below(eta)?;
        match self.inner.subtree(eta) {
            Subtree::Finite(above) => {
                let mut all = below;
                for s in &above {
                    if let Some(p) = self.prime_of(s)? {
                        all.push(p);
                    }
                }
                Ok(PrimeSet::finite(all)?)
            }
            Subtree::Infinite => Ok(PrimeSet::Oracle(Arc::new(UpwardLabel {
                pair: self.clone(),
                node: eta.clone(),
                below,
            }))),
        }
    }

    /// The label of a branch: `{ p_σ : σ ∈ S, σ a prefix of the branch }`.
    ///
    /// The branch is followed until it leaves `S`; if it is still inside `S`
    /// after its periodic part has repeated `horizon` times and `S` above it
    /// is infinite, the branch is taken to stay in `S` and the label is
    /// returned as an infinite oracle.
    pub fn limit_label(self: &Arc<Self>, branch: &Branch, horizon: usize) -> Result<PrimeSet, EngineError> {
        let limit = branch.settled_length() + branch.cycle().len() * horizon;
        let mut exit = (0..=limit).find(|&n| !self.inner.contains(&branch.prefix(n)));
        if exit.is_none() {
            if let Subtree::Finite(list) = self.inner.subtree(&branch.prefix(limit)) {
                let mut n = limit + 1;
                while list.contains(&branch.prefix(n)) {
                    n += 1;
                }
                exit = Some(n);
            }
        }
        match exit {
            Some(end) => {
                let mut primes = Vec::new();
                for n in 0..end {
                    if let Some(p) = self.prime_of(&branch.prefix(n))? {
                        primes.push(p);
                    }
                }
                Ok(PrimeSet::finite(primes)?)
            }
            None => Ok(PrimeSet::Oracle(Arc::new(BranchLabel {
                pair: self.clone(),
                branch: branch.clone(),
            }))),
        }
    }
}

#[derive(Debug)]
struct UpwardLabel {
    pair: Arc<NicePair>,
    node: Node,
    below: Vec<u64>,
}

const SAMPLE_SCAN: usize = 200_000;

impl PrimeOracle for UpwardLabel {
    fn contains(&self, p: u64) -> Result<bool, ArithError> {
        if self.below.contains(&p) {
            return Ok(true);
        }
        match self.pair.node_of_prime(p) {
            Ok(Some(sigma)) => Ok(self.node.is_prefix_of(&sigma)),
            Ok(None) => Ok(false),
            Err(e) => Err(ArithError::Undecidable(format!("{e}"))),
        }
    }

    fn superset(&self) -> Option<PrimeSet> {
        self.pair.source().cloned()
    }

    fn sample(&self, k: usize) -> Result<Vec<u64>, ArithError> {
        let mut out: Vec<u64> = self.below.iter().copied().take(k).collect();
        let mut i = 0;
        while out.len() < k && i < SAMPLE_SCAN {
            let sigma = self
                .pair
                .order
                .unrank(i)
                .map_err(|e| ArithError::Undecidable(format!("{e}")))?;
            let Some(sigma) = sigma else { break };
            if self.node.is_prefix_of(&sigma) {
                if let Ok(Some(p)) = self.pair.prime_of(&sigma) {
                    out.push(p);
                }
            }
            i += 1;
        }
        Ok(out)
    }

    fn describe(&self) -> String {
        format!("label of {}", self.node)
    }

    fn intersect_hint(&self, other: &PrimeSet) -> Option<SetSize> {
        if Some(other) == self.pair.source() {
            return Some(SetSize::Infinite);
        }
        let PrimeSet::Oracle(o) = other else {
            return None;
        };
        let o = o.as_any().downcast_ref::<UpwardLabel>()?;
        if !Arc::ptr_eq(&self.pair, &o.pair) {
            return None;
        }
        if self.node.comparable(&o.node) {
            return Some(SetSize::Infinite);
        }
        let mut common: Vec<u64> = self
            .below
            .iter()
            .filter(|p| o.below.contains(p))
            .copied()
            .collect();
        common.sort_unstable();
        Some(SetSize::Finite(common))
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

#[derive(Debug)]
struct BranchLabel {
    pair: Arc<NicePair>,
    branch: Branch,
}

impl PrimeOracle for BranchLabel {
    fn contains(&self, p: u64) -> Result<bool, ArithError> {
        match self.pair.node_of_prime(p) {
            Ok(Some(sigma)) => Ok(self.branch.extends(&sigma)),
            Ok(None) => Ok(false),
            Err(e) => Err(ArithError::Undecidable(format!("{e}"))),
        }
    }

    fn superset(&self) -> Option<PrimeSet> {
        self.pair.source().cloned()
    }

    fn sample(&self, k: usize) -> Result<Vec<u64>, ArithError> {
        let mut out = Vec::new();
        let mut n = 0;
        while out.len() < k {
            match self.pair.prime_of(&self.branch.prefix(n)) {
                Ok(Some(p)) => out.push(p),
                Ok(None) => break,
                Err(e) => return Err(ArithError::Undecidable(format!("{e}"))),
            }
            n += 1;
        }
        Ok(out)
    }

    fn describe(&self) -> String {
        format!("label of the branch {}", self.branch)
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Node labels, either from a nice pair or from a finite table.
#[derive(Clone, Debug)]
pub enum Labeling {
    Nice(Arc<NicePair>),
    Table(BTreeMap<Node, PrimeSet>),
}

#[derive(Debug)]
struct EngineCore {
    host: TreeOnOmega,
    labeling: Labeling,
    truncation: usize,
    width: Option<u64>,
    cache: RwLock<BTreeMap<Node, PrimeSet>>,
}

impl LabelSource for EngineCore {
    fn label(&self, node: &Node) -> Result<PrimeSet, LevelError> {
        if !self.host.contains(node) {
            return Err(LevelError::NotInHost(node.clone()));
        }
        if let Some(l) = self.cache.read().get(node) {
            return Ok(l.clone());
        }
        let l = match &self.labeling {
            Labeling::Nice(pair) => pair.label(node)?,
            Labeling::Table(t) => t
                .get(node)
                .cloned()
                .ok_or_else(|| LevelError::BeyondTruncation(node.clone()))?,
        };
        self.cache.write().insert(node.clone(), l.clone());
        Ok(l)
    }

    fn in_host(&self, node: &Node) -> bool {
        self.host.contains(node)
    }

    fn host_children(&self, node: &Node) -> Result<Vec<u64>, LevelError> {
        Ok(self.host.children_upto(node, self.width)?)
    }
}

/// `inv(T, L)` cut to levels `0..=truncation` and, where `T` splits
/// infinitely, to child entries below `width`.
#[derive(Clone, Debug)]
pub struct Engine {
    core: Arc<EngineCore>,
}

/// How many times a periodic branch is unrolled before it is assumed to stay
/// inside the inner tree.
pub const BRANCH_HORIZON: usize = 32;

impl Engine {
    pub fn from_nice_pair(pair: Arc<NicePair>, truncation: usize, width: Option<u64>) -> Self {
        Engine {
            core: Arc::new(EngineCore {
                host: pair.host().clone(),
                labeling: Labeling::Nice(pair),
                truncation,
                width,
                cache: RwLock::new(BTreeMap::new()),
            }),
        }
    }

    pub fn from_table(host: TreeOnOmega, table: BTreeMap<Node, PrimeSet>, truncation: usize) -> Self {
        Engine {
            core: Arc::new(EngineCore {
                host,
                labeling: Labeling::Table(table),
                truncation,
                width: None,
                cache: RwLock::new(BTreeMap::new()),
            }),
        }
    }

    pub fn host(&self) -> &TreeOnOmega {
        &self.core.host
    }

    pub fn labeling(&self) -> &Labeling {
        &self.core.labeling
    }

    pub fn nice_pair(&self) -> Option<&Arc<NicePair>> {
        match &self.core.labeling {
            Labeling::Nice(p) => Some(p),
            Labeling::Table(_) => None,
        }
    }

    pub fn inner(&self) -> Option<&TreeOnOmega> {
        self.nice_pair().map(|p| p.inner())
    }

    pub fn truncation(&self) -> usize {
        self.core.truncation
    }

    pub fn width(&self) -> Option<u64> {
        self.core.width
    }

    pub fn label(&self, node: &Node) -> Result<PrimeSet, EngineError> {
        Ok(self.core.label(node)?)
    }

    pub fn label_is_finite(&self, node: &Node) -> Result<bool, EngineError> {
        Ok(self.label(node)?.is_finite())
    }

    pub fn build_level(&self, n: usize) -> LevelGroup {
        LevelGroup::new(n, self.core.clone())
    }

    /// Window nodes of level `n`.
    pub fn level_nodes(&self, n: usize) -> Result<Vec<Node>, EngineError> {
        Ok(self.core.host.level(n, self.core.width)?)
    }

    /// `L(ν) = ⋂_n L(ν↾n)`.
    pub fn limit_label(&self, branch: &Branch) -> Result<PrimeSet, EngineError> {
        match &self.core.labeling {
            Labeling::Nice(pair) => pair.limit_label(branch, BRANCH_HORIZON),
            Labeling::Table(_) => {
                let mut acc: Option<PrimeSet> = None;
                for n in 0..=self.core.truncation {
                    let l = self.label(&branch.prefix(n))?;
                    acc = Some(match acc {
                        None => l,
                        Some(a) => a.intersect(&l)?,
                    });
                }
                Ok(acc.unwrap_or_else(PrimeSet::empty))
            }
        }
    }

    /// Engine conditions on the window: labels shrink along edges, and each
    /// label is covered by the labels of the children. Infinite labels are
    /// compared on a sample of their elements.
    pub fn check_conditions(&self, levels: usize, sample: usize) -> Result<(), EngineError> {
        for n in 0..levels {
            for eta in self.level_nodes(n)? {
                let parent = self.label(&eta)?;
                let kids = self.core.host.children_upto(&eta, self.core.width)?;
                if kids.is_empty() {
                    return Err(EngineError::Condition {
                        clause: 'b',
                        node: eta,
                        detail: "leaf in the host tree".into(),
                    });
                }
                let mut child_labels = Vec::new();
                for k in &kids {
                    let c = eta.child(*k);
                    let l = self.label(&c)?;
                    for p in members(&l, sample)? {
                        if !parent.contains(p)? {
                            return Err(EngineError::Condition {
                                clause: 'a',
                                node: c,
                                detail: format!("{p} is in the child label only"),
                            });
                        }
                    }
                    child_labels.push((c, l));
                }
                for p in members(&parent, sample)? {
                    let covered = match self.nice_pair() {
                        Some(pair) => {
                            let w = covering_child(pair, &eta, p)?;
                            self.label(&w)?.contains(p)?
                        }
                        None => {
                            let mut hit = false;
                            for (_, l) in &child_labels {
                                if l.contains(p)? {
                                    hit = true;
                                    break;
                                }
                            }
                            hit
                        }
                    };
                    if !covered {
                        return Err(EngineError::Condition {
                            clause: 'b',
                            node: eta,
                            detail: format!("{p} is in no child label"),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Bonding maps compose and are onto on the window up to `max_level`.
    pub fn check_bonding_laws(&self, max_level: usize, sample: usize) -> Result<BondingReport, EngineError> {
        let mut report = BondingReport::default();
        let mut gens: Vec<Vec<LevelElement>> = Vec::new();
        for k in 0..=max_level {
            gens.push(self.generators(k, sample)?);
        }
        for k in 0..=max_level {
            let gk = self.build_level(k);
            for g in &gens[k] {
                if !gk.is_member(g)? {
                    return Err(EngineError::InvalidLimit(format!("generator {g} not in G_{k}")));
                }
                let mut images = Vec::with_capacity(k + 1);
                for m in 0..=k {
                    images.push(g.bond(m)?);
                }
                for n in 0..=k {
                    for m in 0..=n {
                        report.composition_checks += 1;
                        if images[n].bond(m)? != images[m] {
                            report.failures.push(format!("f({n},{m})∘f({k},{n}) ≠ f({k},{m}) on {g}"));
                        }
                    }
                }
            }
        }
        for m in 0..max_level {
            for g in &gens[m] {
                for n in m + 1..=max_level {
                    report.onto_checks += 1;
                    match self.preimage(g, n)? {
                        Some(pre) => {
                            if !self.build_level(n).is_member(&pre)? || pre.bond(m)? != *g {
                                report.failures.push(format!("bad preimage of {g} at level {n}"));
                            }
                        }
                        None => report.failures.push(format!("no preimage of {g} at level {n}")),
                    }
                }
            }
        }
        Ok(report)
    }

    /// `x_η` and `(1/p) x_η` for window nodes of level `n`.
    pub fn generators(&self, n: usize, sample: usize) -> Result<Vec<LevelElement>, EngineError> {
        let mut out = Vec::new();
        for eta in self.level_nodes(n)? {
            out.push(LevelElement::basis(eta.clone()));
            for p in members(&self.label(&eta)?, sample)? {
                out.push(LevelElement::term(eta.clone(), Rational::new(One::one(), p.into())));
            }
        }
        Ok(out)
    }

    /// A preimage in `G_n` of a single-node element, found by walking down
    /// through children whose labels still allow the denominator.
    pub fn preimage(&self, g: &LevelElement, n: usize) -> Result<Option<LevelElement>, EngineError> {
        let mut out = LevelElement::zero(n);
        for (eta, c) in g.support() {
            let need = squarefree_denominator(c)?
                .ok_or_else(|| EngineError::InvalidLimit(format!("{c} has a square denominator")))?;
            let mut node = eta.clone();
            while node.len() < n {
                let kids = self.core.host.children_upto(&node, self.core.width)?;
                let mut next = None;
                for k in kids {
                    let child = node.child(k);
                    let l = self.label(&child)?;
                    let mut ok = true;
                    for &p in &need {
                        if !l.contains(p)? {
                            ok = false;
                            break;
                        }
                    }
                    if ok {
                        next = Some(child);
                        break;
                    }
                }
                match next {
                    Some(c) => node = c,
                    None => return Ok(None),
                }
            }
            out = out.add(&LevelElement::term(node, c.clone()))?;
        }
        Ok(Some(out))
    }
}

fn members(l: &PrimeSet, sample: usize) -> Result<Vec<u64>, EngineError> {
    match l {
        PrimeSet::Finite(v) => Ok(v.clone()),
        other => Ok(other.sample(sample)?),
    }
}

/// A child of `η` whose label contains `p ∈ L(η)`: the direction of `σ` when
/// `p = p_σ` lies above `η`, otherwise the zero child.
fn covering_child(pair: &NicePair, eta: &Node, p: u64) -> Result<Node, EngineError> {
    match pair.node_of_prime(p)? {
        Some(sigma) if eta.is_proper_prefix_of(&sigma) => Ok(sigma.restrict(eta.len() + 1)),
        _ => Ok(eta.child(0)),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BondingReport {
    pub composition_checks: usize,
    pub onto_checks: usize,
    pub failures: Vec<String>,
}

impl BondingReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// A finite sum `Σ c_i x_{ν_i}` of branch elements of the limit.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct LimitElement {
    terms: BTreeMap<Branch, Rational>,
}

impl fmt::Debug for LimitElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (b, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{c}·x[{b}]")?;
        }
        Ok(())
    }
}

impl LimitElement {
    pub fn zero() -> Self {
        LimitElement::default()
    }

    pub fn new<I: IntoIterator<Item = (Branch, Rational)>>(terms: I) -> Self {
        let mut out = LimitElement::zero();
        for (b, c) in terms {
            out.add_term(b, c);
        }
        out
    }

    pub fn branch(b: Branch) -> Self {
        LimitElement::new([(b, Rational::one())])
    }

    fn add_term(&mut self, b: Branch, c: Rational) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(b.clone()).or_insert_with(Rational::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&b);
        }
    }

    pub fn terms(&self) -> &BTreeMap<Branch, Rational> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &LimitElement) -> LimitElement {
        let mut out = self.clone();
        for (b, c) in &other.terms {
            out.add_term(b.clone(), c.clone());
        }
        out
    }

    pub fn scale(&self, k: &Rational) -> LimitElement {
        LimitElement::new(self.terms.iter().map(|(b, c)| (b.clone(), c * k)))
    }

    pub fn neg(&self) -> LimitElement {
        self.scale(&-Rational::one())
    }

    pub fn sub(&self, other: &LimitElement) -> LimitElement {
        self.add(&other.neg())
    }

    /// `f_(ω, n)(y) = Σ c_i x_{ν_i ↾ n}`.
    pub fn project(&self, n: usize) -> LevelElement {
        LevelElement::from_terms(n, self.terms.iter().map(|(b, c)| (b.prefix(n), c.clone())))
            .expect("prefixes have length n")
    }

    /// Least level at which all branches are pairwise separated.
    pub fn separation_level(&self) -> usize {
        let bs: Vec<&Branch> = self.terms.keys().collect();
        let mut s = 0;
        for i in 0..bs.len() {
            for j in i + 1..bs.len() {
                if let Some(d) = bs[i].first_difference(bs[j]) {
                    s = s.max(d + 1);
                }
            }
        }
        s
    }
}

pub fn project_limit(y: &LimitElement, n: usize) -> LevelElement {
    y.project(n)
}

/// Branches lie in the host, coefficients have squarefree denominators from
/// the branch labels, and every level projection is in its level group.
pub fn validate_limit(engine: &Engine, y: &LimitElement) -> Result<(), EngineError> {
    for (b, c) in y.terms() {
        for n in 0..=engine.truncation() {
            if !engine.host().contains(&b.prefix(n)) {
                return Err(EngineError::InvalidLimit(format!("branch {b} leaves the host at level {n}")));
            }
        }
        let Some(den) = squarefree_denominator(c)? else {
            return Err(EngineError::InvalidLimit(format!("{c} has a square in its denominator")));
        };
        let l = engine.limit_label(b)?;
        for p in den {
            if !l.contains(p)? {
                return Err(EngineError::InvalidLimit(format!("{p} is not in the label of {b}")));
            }
        }
    }
    for n in 0..=engine.truncation() {
        if let Err(v) = engine.build_level(n).validate_element(&y.project(n))? {
            return Err(EngineError::InvalidLimit(format!("level {n}: {v}")));
        }
    }
    Ok(())
}

/// Divisibility by `p` in the limit, decided branch by branch.
pub fn limit_divisible(engine: &Engine, y: &LimitElement, p: u64) -> Result<bool, EngineError> {
    for (b, c) in y.terms() {
        let v = rational_valuation(c, p);
        let ok = v >= 1 || (v == 0 && engine.limit_label(b)?.contains(p)?);
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Evidence that `x_branch` is divisible by the primes of its first nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NonZeroTypeCertificate {
    pub branch: Branch,
    /// `(branch ↾ n, p_{branch ↾ n})` for `n = 1..=depth`.
    pub divisors: Vec<(Node, u64)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Homogeneity {
    Certificate(NonZeroTypeCertificate),
    /// The branch leaves the inner tree at this node.
    PromiseBroken { level: usize, node: Node },
}

pub fn homogeneity_witness(engine: &Engine, branch: &Branch, depth: usize) -> Result<Homogeneity, EngineError> {
    let pair = engine
        .nice_pair()
        .ok_or_else(|| EngineError::Precondition("homogeneity needs a nice pair".into()))?;
    let x = LimitElement::branch(branch.clone());
    let mut divisors = Vec::with_capacity(depth);
    for n in 1..=depth {
        let node = branch.prefix(n);
        let Some(p) = pair.prime_of(&node)? else {
            return Ok(Homogeneity::PromiseBroken { level: n, node });
        };
        if !limit_divisible(engine, &x, p)? {
            return Ok(Homogeneity::PromiseBroken { level: n, node });
        }
        divisors.push((node, p));
    }
    Ok(Homogeneity::Certificate(NonZeroTypeCertificate {
        branch: branch.clone(),
        divisors,
    }))
}

/// Clause-by-clause check of a nice pair on the window of the given depth.
pub fn validate_nice_pair(pair: &NicePair, sample_depth: usize, width: u64) -> Result<(), EngineError> {
    let fail = |clause: char, node: Option<Node>, detail: String| EngineError::NicePair {
        clause,
        node,
        detail,
    };
    let host = pair.host();
    let inner = pair.inner();
    if !host.contains(&Node::root()) {
        return Err(fail('a', Some(Node::root()), "host has no root".into()));
    }
    if !inner.contains(&Node::root()) && !is_empty_tree(inner) {
        return Err(fail('a', Some(Node::root()), "inner tree has no root".into()));
    }
    let mut s_nodes = Vec::new();
    for n in 0..=sample_depth {
        for node in host.level(n, Some(width))? {
            if host.children_upto(&node, None).map(|v| v.is_empty()).unwrap_or(false)
                && !matches!(host.children(&node), Children::Infinite)
            {
                return Err(fail('a', Some(node), "host tree has a leaf".into()));
            }
            if inner.contains(&node) {
                s_nodes.push(node);
            }
        }
    }
    if let TreeOnOmega::Explicit(set) = inner {
        for node in set {
            if !host.contains(node) {
                return Err(fail('a', Some(node.clone()), "inner node outside the host".into()));
            }
            if let Some(parent) = node.parent() {
                if !set.contains(&parent) {
                    return Err(fail('a', Some(node.clone()), "inner tree is not prefix closed".into()));
                }
            }
        }
        s_nodes = set.iter().cloned().collect();
    }
    for node in &s_nodes {
        if node.entries().contains(&0) {
            return Err(fail('b', Some(node.clone()), "inner node has entry 0".into()));
        }
        for k in 1..=2 {
            if !host.contains(&node.with_zeros(k)) {
                return Err(fail('d', Some(node.clone()), "zero extension leaves the host".into()));
            }
        }
    }
    let mut seen: BTreeMap<u64, Node> = BTreeMap::new();
    for node in &s_nodes {
        let Some(p) = pair.prime_of(node)? else {
            return Err(fail('c', Some(node.clone()), "no prime assigned".into()));
        };
        if !crate::arith::is_prime(p) {
            return Err(fail('c', Some(node.clone()), format!("{p} is not prime")));
        }
        if let Some(other) = seen.insert(p, node.clone()) {
            return Err(fail('c', Some(node.clone()), format!("{p} already assigned to {other}")));
        }
    }
    if let PrimeAssignment::Explicit(m) = pair.primes() {
        for node in m.keys() {
            if !inner.contains(node) {
                return Err(fail('c', Some(node.clone()), "prime assigned outside the inner tree".into()));
            }
        }
    }
    Ok(())
}

fn is_empty_tree(t: &TreeOnOmega) -> bool {
    matches!(t, TreeOnOmega::Explicit(s) if s.is_empty())
}

/// Host `ω^{<ω}`, an inner tree that is well founded with every non-leaf node
/// splitting infinitely, and primes listed from the infinite set `pstar`.
pub fn make_gp(pstar: PrimeSet, s: TreeOnOmega, truncation: usize, width: u64) -> Result<Engine, EngineError> {
    if pstar.is_finite() {
        return Err(EngineError::Precondition("the prime set must be infinite".into()));
    }
    if s.is_finite() {
        return Err(EngineError::Precondition("the inner tree must split infinitely".into()));
    }
    let sample: Vec<Node> = (0..=truncation)
        .flat_map(|n| s.level(n, Some(width)).unwrap_or_default())
        .collect();
    for node in &sample {
        if let Children::Finite(v) = s.children(node) {
            if !v.is_empty() {
                return Err(EngineError::Precondition(format!("{node} splits only finitely")));
            }
        }
    }
    let height = match s.spec() {
        Some(TreeSpec::Fan { height }) => Some(height),
        _ => None,
    };
    let rank = move |n: &Node| height.map(|h| (h - n.len().min(h)) as u64);
    match wellfounded_check(&s, truncation.max(8), Some(&rank))? {
        WellFounded::BranchFound(chain) => {
            return Err(EngineError::Precondition(format!(
                "inner tree has a branch through {}",
                chain.last().cloned().unwrap_or_default()
            )))
        }
        WellFounded::NoBranchUpTo { .. } | WellFounded::Certified { .. } => {}
    }
    let pair = NicePair::new(TreeOnOmega::full(), s, PrimeAssignment::Enumerated { source: pstar });
    validate_nice_pair(&pair, truncation.min(3), width)?;
    Ok(Engine::from_nice_pair(pair, truncation, Some(width)))
}

/// The engine of a tree `a` on ω: inner tree `a^{+1}`, host `ω^{<ω}`, primes
/// listed in increasing order along the weight order of the inner tree.
pub fn make_ga(a: &TreeOnOmega, truncation: usize, width: u64) -> Result<Engine, EngineError> {
    let s = crate::trees::shift_plus_one(a);
    let pair = NicePair::new(
        TreeOnOmega::full(),
        s,
        PrimeAssignment::Enumerated {
            source: PrimeSet::all_primes(),
        },
    );
    validate_nice_pair(&pair, truncation.min(3), width)?;
    Ok(Engine::from_nice_pair(pair, truncation, Some(width)))
}

/// Nodes of `S` of the window, for reports.
pub fn inner_nodes(engine: &Engine, depth: usize) -> Result<BTreeSet<Node>, EngineError> {
    let mut out = BTreeSet::new();
    let Some(inner) = engine.inner() else {
        return Ok(out);
    };
    for n in 0..=depth {
        for node in inner.level(n, engine.width())? {
            out.insert(node);
        }
    }
    Ok(out)
}

pub fn explicit_nice_pair(
    host: TreeOnOmega,
    inner: TreeOnOmega,
    primes: &[(Node, u64)],
) -> Arc<NicePair> {
    NicePair::new(host, inner, PrimeAssignment::Explicit(primes.iter().cloned().collect()))
}

pub fn finite_labels_only(engine: &Engine, levels: usize) -> Result<bool, EngineError> {
    for n in 0..=levels {
        for node in engine.level_nodes(n)? {
            if !engine.label_is_finite(&node)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
