//! Trees on ω: explicit finite trees and lazily described infinite ones.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use spin::RwLock;

use crate::perm::{PartialPermutation, Point};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TreeError {
    #[error("tree has no root")]
    MissingRoot,
    #[error("node {node} is present but its prefix {prefix} is not")]
    MissingPrefix { node: Node, prefix: Node },
    #[error("oracle lists child {child} which it does not contain")]
    PhantomChild { child: Node },
    #[error("level {0} is infinite and no width bound was given")]
    InfiniteLevel(usize),
    #[error("rank does not decrease on the edge {parent} -> {child}")]
    RankIncrease { parent: Node, child: Node },
    #[error("rank annotation undefined at {0}")]
    RankMissing(Node),
    #[error("partial permutation is not injective: {0} has two preimages")]
    NotInjective(u64),
    #[error("cannot restrict the inverse at {0}: preimage outside the bound")]
    InverseUnknown(u64),
    #[error("symbolic image at {0} cannot become a tree entry")]
    SymbolicEntry(u64),
    #[error("empty period in branch")]
    EmptyCycle,
    #[error("node {0} is outside the tree")]
    NotInTree(Node),
    #[error("enumeration gave up at weight {0}")]
    EnumerationLimit(u64),
}

/// A finite sequence of naturals. Ordered lexicographically, prefixes first.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Node(pub Vec<u64>);

impl Node {
    pub fn root() -> Self {
        Node(Vec::new())
    }

    pub fn new(entries: impl Into<Vec<u64>>) -> Self {
        Node(entries.into())
    }

    pub fn entries(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Option<u64> {
        self.0.last().copied()
    }

    pub fn parent(&self) -> Option<Node> {
        (!self.is_root()).then(|| Node(self.0[..self.0.len() - 1].to_vec()))
    }

    pub fn child(&self, k: u64) -> Node {
        let mut v = self.0.clone();
        v.push(k);
        Node(v)
    }

    pub fn restrict(&self, m: usize) -> Node {
        Node(self.0[..m.min(self.0.len())].to_vec())
    }

    /// `self ⊴ other`.
    pub fn is_prefix_of(&self, other: &Node) -> bool {
        other.0.starts_with(&self.0)
    }

    /// `self ◁ other`.
    pub fn is_proper_prefix_of(&self, other: &Node) -> bool {
        self.len() < other.len() && self.is_prefix_of(other)
    }

    pub fn comparable(&self, other: &Node) -> bool {
        self.is_prefix_of(other) || other.is_prefix_of(self)
    }

    pub fn with_zeros(&self, k: usize) -> Node {
        let mut v = self.0.clone();
        v.extend(core::iter::repeat_n(0, k));
        Node(v)
    }

    /// Length plus sum of entries; finitely many nodes share a weight.
    pub fn weight(&self) -> u64 {
        self.0.len() as u64 + self.0.iter().sum::<u64>()
    }

    pub fn shifted(&self) -> Node {
        Node(self.0.iter().map(|e| e + 1).collect())
    }
}

impl fmt::Debug for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("()");
        }
        f.write_str("(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{e}")?;
        }
        f.write_str(")")
    }
}

impl From<&[u64]> for Node {
    fn from(v: &[u64]) -> Self {
        Node(v.to_vec())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Children {
    /// Increasing child entries.
    Finite(Vec<u64>),
    Infinite,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Subtree {
    /// Every node extending the queried one, itself included, sorted.
    Finite(Vec<Node>),
    Infinite,
}

/// Serializable description of the lazily evaluated trees we know about.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TreeSpec {
    Explicit(Vec<Node>),
    /// `arity^{<ω}`, or `ω^{<ω}` when `arity` is `None`.
    Full { arity: Option<u64> },
    /// Sequences of positive entries of length at most `height`.
    Fan { height: usize },
    /// Strictly decreasing sequences with entries below `bound`.
    Decreasing { bound: u64 },
    /// `{η^{+1} : η ∈ inner}`.
    Shifted(Box<TreeSpec>),
}

/// Membership, child and finiteness queries for a tree on ω.
pub trait TreeOracle: Send + Sync + fmt::Debug {
    fn contains(&self, node: &Node) -> bool;
    fn children(&self, node: &Node) -> Children;
    /// The `k`-th child entry (0-based, increasing).
    fn nth_child(&self, node: &Node, k: usize) -> Option<u64> {
        match self.children(node) {
            Children::Finite(v) => v.get(k).copied(),
            Children::Infinite => None,
        }
    }
    fn subtree(&self, node: &Node) -> Subtree;
    fn spec(&self) -> Option<TreeSpec> {
        None
    }
}

#[derive(Debug)]
struct SpecTree(TreeSpec);

fn collect_subtree(oracle: &dyn TreeOracle, node: &Node, out: &mut Vec<Node>) {
    out.push(node.clone());
    if let Children::Finite(cs) = oracle.children(node) {
        for c in cs {
            collect_subtree(oracle, &node.child(c), out);
        }
    }
}

impl TreeOracle for SpecTree {
    fn contains(&self, node: &Node) -> bool {
        match &self.0 {
            TreeSpec::Explicit(v) => v.contains(node),
            TreeSpec::Full { arity: None } => true,
            TreeSpec::Full { arity: Some(w) } => node.0.iter().all(|e| e < w),
            TreeSpec::Fan { height } => node.len() <= *height && node.0.iter().all(|&e| e > 0),
            TreeSpec::Decreasing { bound } => {
                node.0.iter().all(|e| e < bound) && node.0.windows(2).all(|w| w[0] > w[1])
            }
            TreeSpec::Shifted(inner) => {
                node.0.iter().all(|&e| e > 0)
                    && SpecTree((**inner).clone())
                        .contains(&Node(node.0.iter().map(|e| e - 1).collect()))
            }
        }
    }

    fn children(&self, node: &Node) -> Children {
        if !self.contains(node) {
            return Children::Finite(Vec::new());
        }
        match &self.0 {
            TreeSpec::Explicit(v) => Children::Finite(
                v.iter()
                    .filter(|c| c.len() == node.len() + 1 && node.is_prefix_of(c))
                    .filter_map(|c| c.last())
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect(),
            ),
            TreeSpec::Full { arity: None } => Children::Infinite,
            TreeSpec::Full { arity: Some(w) } => Children::Finite((0..*w).collect()),
            TreeSpec::Fan { height } => {
                if node.len() < *height {
                    Children::Infinite
                } else {
                    Children::Finite(Vec::new())
                }
            }
            TreeSpec::Decreasing { bound } => {
                let top = node.last().unwrap_or(*bound);
                Children::Finite((0..top).collect())
            }
            TreeSpec::Shifted(inner) => {
                let base = Node(node.0.iter().map(|e| e - 1).collect());
                match SpecTree((**inner).clone()).children(&base) {
                    Children::Finite(v) => Children::Finite(v.into_iter().map(|e| e + 1).collect()),
                    Children::Infinite => Children::Infinite,
                }
            }
        }
    }

    fn nth_child(&self, node: &Node, k: usize) -> Option<u64> {
        if !self.contains(node) {
            return None;
        }
        match &self.0 {
            TreeSpec::Full { arity: None } => Some(k as u64),
            TreeSpec::Fan { height } => (node.len() < *height).then_some(k as u64 + 1),
            TreeSpec::Shifted(inner) => {
                let base = Node(node.0.iter().map(|e| e - 1).collect());
                SpecTree((**inner).clone()).nth_child(&base, k).map(|e| e + 1)
            }
            _ => match self.children(node) {
                Children::Finite(v) => v.get(k).copied(),
                Children::Infinite => None,
            },
        }
    }

    fn subtree(&self, node: &Node) -> Subtree {
        if !self.contains(node) {
            return Subtree::Finite(Vec::new());
        }
        let infinite = match &self.0 {
            TreeSpec::Explicit(_) | TreeSpec::Decreasing { .. } => false,
            TreeSpec::Full { .. } => true,
            TreeSpec::Fan { height } => node.len() < *height,
            TreeSpec::Shifted(inner) => {
                let base = Node(node.0.iter().map(|e| e - 1).collect());
                matches!(SpecTree((**inner).clone()).subtree(&base), Subtree::Infinite)
            }
        };
        if infinite {
            return Subtree::Infinite;
        }
        let mut out = Vec::new();
        collect_subtree(self, node, &mut out);
        out.sort();
        Subtree::Finite(out)
    }

    fn spec(&self) -> Option<TreeSpec> {
        Some(self.0.clone())
    }
}

#[derive(Debug)]
struct ShiftedOracle(Arc<dyn TreeOracle>);

impl TreeOracle for ShiftedOracle {
    fn contains(&self, node: &Node) -> bool {
        node.0.iter().all(|&e| e > 0) && self.0.contains(&unshift(node))
    }

    fn children(&self, node: &Node) -> Children {
        if !self.contains(node) {
            return Children::Finite(Vec::new());
        }
        match self.0.children(&unshift(node)) {
            Children::Finite(v) => Children::Finite(v.into_iter().map(|e| e + 1).collect()),
            Children::Infinite => Children::Infinite,
        }
    }

    fn nth_child(&self, node: &Node, k: usize) -> Option<u64> {
        if !self.contains(node) {
            return None;
        }
        self.0.nth_child(&unshift(node), k).map(|e| e + 1)
    }

    fn subtree(&self, node: &Node) -> Subtree {
        if !self.contains(node) {
            return Subtree::Finite(Vec::new());
        }
        match self.0.subtree(&unshift(node)) {
            Subtree::Finite(v) => Subtree::Finite(v.iter().map(Node::shifted).collect()),
            Subtree::Infinite => Subtree::Infinite,
        }
    }

    fn spec(&self) -> Option<TreeSpec> {
        self.0.spec().map(|s| TreeSpec::Shifted(Box::new(s)))
    }
}

fn unshift(node: &Node) -> Node {
    Node(node.0.iter().map(|e| e - 1).collect())
}

#[derive(Clone)]
pub enum TreeOnOmega {
    Explicit(BTreeSet<Node>),
    Lazy(Arc<dyn TreeOracle>),
}

impl fmt::Debug for TreeOnOmega {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeOnOmega::Explicit(s) => f.debug_set().entries(s.iter()).finish(),
            TreeOnOmega::Lazy(o) => write!(f, "Lazy({o:?})"),
        }
    }
}

impl TreeOnOmega {
    pub fn explicit<I: IntoIterator<Item = Node>>(nodes: I) -> Self {
        TreeOnOmega::Explicit(nodes.into_iter().collect())
    }

    /// Explicit tree from raw entry lists.
    pub fn from_lists(lists: &[&[u64]]) -> Self {
        Self::explicit(lists.iter().map(|l| Node::from(*l)))
    }

    /// The explicit tree generated by `nodes`: all their prefixes.
    pub fn closure<I: IntoIterator<Item = Node>>(nodes: I) -> Self {
        let mut set = BTreeSet::new();
        set.insert(Node::root());
        for n in nodes {
            for m in 0..=n.len() {
                set.insert(n.restrict(m));
            }
        }
        TreeOnOmega::Explicit(set)
    }

    pub fn from_spec(spec: TreeSpec) -> Self {
        match spec {
            TreeSpec::Explicit(v) => TreeOnOmega::explicit(v),
            other => TreeOnOmega::Lazy(Arc::new(SpecTree(other))),
        }
    }

    pub fn full() -> Self {
        Self::from_spec(TreeSpec::Full { arity: None })
    }

    pub fn spec(&self) -> Option<TreeSpec> {
        match self {
            TreeOnOmega::Explicit(s) => Some(TreeSpec::Explicit(s.iter().cloned().collect())),
            TreeOnOmega::Lazy(o) => o.spec(),
        }
    }

    pub fn contains(&self, node: &Node) -> bool {
        match self {
            TreeOnOmega::Explicit(s) => s.contains(node),
            TreeOnOmega::Lazy(o) => o.contains(node),
        }
    }

    pub fn children(&self, node: &Node) -> Children {
        match self {
            TreeOnOmega::Explicit(s) => {
                if !s.contains(node) {
                    return Children::Finite(Vec::new());
                }
                Children::Finite(
                    s.range(node.clone()..)
                        .skip(1)
                        .take_while(|c| node.is_prefix_of(c))
                        .filter(|c| c.len() == node.len() + 1)
                        .filter_map(|c| c.last())
                        .collect(),
                )
            }
            TreeOnOmega::Lazy(o) => o.children(node),
        }
    }

    pub fn nth_child(&self, node: &Node, k: usize) -> Option<u64> {
        match self {
            TreeOnOmega::Explicit(_) => match self.children(node) {
                Children::Finite(v) => v.get(k).copied(),
                Children::Infinite => None,
            },
            TreeOnOmega::Lazy(o) => o.nth_child(node, k),
        }
    }

    pub fn subtree(&self, node: &Node) -> Subtree {
        match self {
            TreeOnOmega::Explicit(s) => Subtree::Finite(
                s.range(node.clone()..)
                    .take_while(|c| node.is_prefix_of(c))
                    .cloned()
                    .collect(),
            ),
            TreeOnOmega::Lazy(o) => o.subtree(node),
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.subtree(&Node::root()), Subtree::Finite(_))
    }

    /// Child entries of `node`, cut at `width` when the node splits infinitely.
    pub fn children_upto(&self, node: &Node, width: Option<u64>) -> Result<Vec<u64>, TreeError> {
        match self.children(node) {
            Children::Finite(v) => Ok(match width {
                Some(w) => v.into_iter().filter(|&e| e < w).collect(),
                None => v,
            }),
            Children::Infinite => {
                let w = width.ok_or(TreeError::InfiniteLevel(node.len() + 1))?;
                let mut out = Vec::new();
                let mut k = 0;
                while let Some(e) = self.nth_child(node, k) {
                    if e >= w {
                        break;
                    }
                    out.push(e);
                    k += 1;
                }
                Ok(out)
            }
        }
    }

    /// The level-`n` slice, restricted to entries below `width` if given.
    pub fn level(&self, n: usize, width: Option<u64>) -> Result<Vec<Node>, TreeError> {
        let mut frontier = vec![Node::root()];
        if !self.contains(&Node::root()) {
            return Ok(Vec::new());
        }
        for _ in 0..n {
            let mut next = Vec::new();
            for node in &frontier {
                for e in self.children_upto(node, width)? {
                    next.push(node.child(e));
                }
            }
            frontier = next;
        }
        Ok(frontier)
    }

    pub fn height(&self) -> Option<usize> {
        match self.subtree(&Node::root()) {
            Subtree::Finite(v) => v.iter().map(Node::len).max(),
            Subtree::Infinite => None,
        }
    }
}

/// Check that the tree is rooted and prefix-closed. Lazy trees are checked
/// on `sample` only.
pub fn validate_tree(t: &TreeOnOmega, sample: &[Node]) -> Result<(), TreeError> {
    if !t.contains(&Node::root()) {
        return Err(TreeError::MissingRoot);
    }
    let check = |node: &Node| -> Result<(), TreeError> {
        for m in (0..node.len()).rev() {
            let prefix = node.restrict(m);
            if !t.contains(&prefix) {
                return Err(TreeError::MissingPrefix {
                    node: node.clone(),
                    prefix,
                });
            }
        }
        Ok(())
    };
    match t {
        TreeOnOmega::Explicit(s) => s.iter().try_for_each(check),
        TreeOnOmega::Lazy(_) => {
            for node in sample.iter().filter(|n| t.contains(n)) {
                check(node)?;
                for k in 0..8 {
                    let Some(e) = t.nth_child(node, k) else { break };
                    if !t.contains(&node.child(e)) {
                        return Err(TreeError::PhantomChild {
                            child: node.child(e),
                        });
                    }
                }
            }
            Ok(())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WellFounded {
    /// No branch of length `depth`; for explicit trees `depth` is the height
    /// and `ranks` the exact rank function.
    NoBranchUpTo {
        depth: usize,
        ranks: Option<BTreeMap<Node, u64>>,
    },
    /// A chain `(η↾1, …, η↾depth)` inside the tree.
    BranchFound(Vec<Node>),
    /// A rank annotation strictly decreased on every sampled edge.
    Certified { edges_checked: usize },
}

/// Rank function of a finite tree: leaves 0, otherwise one more than the
/// largest child rank.
pub fn explicit_ranks(nodes: &BTreeSet<Node>) -> BTreeMap<Node, u64> {
    let mut ranks: BTreeMap<Node, u64> = BTreeMap::new();
    for node in nodes.iter().rev() {
        let r = ranks.get(node).copied().unwrap_or(0);
        ranks.entry(node.clone()).or_insert(0);
        if let Some(parent) = node.parent() {
            let e = ranks.entry(parent).or_insert(0);
            *e = (*e).max(r + 1);
        }
    }
    ranks
}

const SAMPLE_WIDTH: usize = 8;
const SAMPLE_NODES: usize = 200_000;

fn branch_search(t: &TreeOnOmega, node: &Node, remaining: usize) -> Option<Vec<Node>> {
    if remaining == 0 {
        return Some(Vec::new());
    }
    match t.subtree(node) {
        Subtree::Finite(list) => {
            let target = node.len() + remaining;
            let deep = list.into_iter().find(|n| n.len() >= target)?;
            Some((node.len() + 1..=target).map(|m| deep.restrict(m)).collect())
        }
        Subtree::Infinite => {
            let kids: Vec<u64> = match t.children(node) {
                Children::Finite(mut v) => {
                    v.reverse();
                    v
                }
                Children::Infinite => (0..SAMPLE_WIDTH).filter_map(|k| t.nth_child(node, k)).collect(),
            };
            let kids: Vec<Node> = kids.into_iter().map(|e| node.child(e)).collect();
            let (inf, fin): (Vec<&Node>, Vec<&Node>) = kids
                .iter()
                .partition(|c| matches!(t.subtree(c), Subtree::Infinite));
            for c in inf.into_iter().chain(fin) {
                if let Some(mut rest) = branch_search(t, c, remaining - 1) {
                    rest.insert(0, c.clone());
                    return Some(rest);
                }
            }
            None
        }
    }
}

/// Search for a chain of length `depth`, or certify its absence.
///
/// Explicit trees are decided exactly. For lazy trees, a supplied `rank`
/// annotation is checked for strict decrease on a breadth-first sample of
/// edges (infinitely splitting nodes contribute their first few children).
pub fn wellfounded_check(
    t: &TreeOnOmega,
    depth: usize,
    rank: Option<&dyn Fn(&Node) -> Option<u64>>,
) -> Result<WellFounded, TreeError> {
    if let TreeOnOmega::Explicit(nodes) = t {
        let height = nodes.iter().map(Node::len).max().unwrap_or(0);
        if height >= depth && depth > 0 {
            if let Some(chain) = branch_search(t, &Node::root(), depth) {
                return Ok(WellFounded::BranchFound(chain));
            }
        }
        return Ok(WellFounded::NoBranchUpTo {
            depth: height,
            ranks: Some(explicit_ranks(nodes)),
        });
    }
    if let Some(chain) = branch_search(t, &Node::root(), depth) {
        return Ok(WellFounded::BranchFound(chain));
    }
    let Some(rank) = rank else {
        return Ok(WellFounded::NoBranchUpTo { depth, ranks: None });
    };
    let mut edges = 0;
    let mut frontier = vec![Node::root()];
    let mut visited = 0;
    while let Some(node) = frontier.pop() {
        visited += 1;
        if visited > SAMPLE_NODES || node.len() >= depth {
            continue;
        }
        let r = rank(&node).ok_or_else(|| TreeError::RankMissing(node.clone()))?;
        let kids: Vec<u64> = match t.children(&node) {
            Children::Finite(v) => v,
            Children::Infinite => (0..SAMPLE_WIDTH).filter_map(|k| t.nth_child(&node, k)).collect(),
        };
        for e in kids {
            let c = node.child(e);
            let rc = rank(&c).ok_or_else(|| TreeError::RankMissing(c.clone()))?;
            if rc >= r {
                return Err(TreeError::RankIncrease {
                    parent: node.clone(),
                    child: c,
                });
            }
            edges += 1;
            frontier.push(c);
        }
    }
    Ok(WellFounded::Certified {
        edges_checked: edges,
    })
}

/// `0` or `2^{-n}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dyadic {
    Zero,
    InvPow2(u32),
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Dyadic::Zero, Dyadic::Zero) => Ordering::Equal,
            (Dyadic::Zero, _) => Ordering::Less,
            (_, Dyadic::Zero) => Ordering::Greater,
            (Dyadic::InvPow2(a), Dyadic::InvPow2(b)) => b.cmp(a),
        }
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dyadic::Zero => f.write_str("0"),
            Dyadic::InvPow2(0) => f.write_str("1"),
            Dyadic::InvPow2(n) => write!(f, "1/{}", 1u128 << (*n).min(127)),
        }
    }
}

/// A distance, possibly only a lower-bound-style answer: `exact` is false
/// when the compared objects agreed as far as they could be inspected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Distance {
    pub value: Dyadic,
    pub exact: bool,
}

/// `2^{-n}` for the least level `n` at which the slices differ.
pub fn tree_distance(t1: &TreeOnOmega, t2: &TreeOnOmega, max_depth: usize) -> Distance {
    if let (TreeOnOmega::Explicit(a), TreeOnOmega::Explicit(b)) = (t1, t2) {
        let mut la: BTreeMap<usize, BTreeSet<&Node>> = BTreeMap::new();
        for n in a {
            la.entry(n.len()).or_default().insert(n);
        }
        let mut lb: BTreeMap<usize, BTreeSet<&Node>> = BTreeMap::new();
        for n in b {
            lb.entry(n.len()).or_default().insert(n);
        }
        let top = la.keys().chain(lb.keys()).max().copied().unwrap_or(0);
        let empty = BTreeSet::new();
        for n in 0..=top {
            if la.get(&n).unwrap_or(&empty) != lb.get(&n).unwrap_or(&empty) {
                return Distance {
                    value: Dyadic::InvPow2(n as u32),
                    exact: true,
                };
            }
        }
        return Distance {
            value: Dyadic::Zero,
            exact: true,
        };
    }
    let differ = |n: u32| Distance {
        value: Dyadic::InvPow2(n),
        exact: true,
    };
    if t1.contains(&Node::root()) != t2.contains(&Node::root()) {
        return differ(0);
    }
    let mut exact = true;
    let mut frontier = vec![Node::root()];
    for n in 1..=max_depth {
        let mut next = Vec::new();
        for node in &frontier {
            match (t1.children(node), t2.children(node)) {
                (Children::Finite(a), Children::Finite(b)) => {
                    if a != b {
                        return differ(n as u32);
                    }
                    next.extend(a.into_iter().map(|e| node.child(e)));
                }
                (Children::Infinite, Children::Infinite) => {
                    exact = false;
                    for k in 0..SAMPLE_WIDTH {
                        let (a, b) = (t1.nth_child(node, k), t2.nth_child(node, k));
                        if a != b {
                            return differ(n as u32);
                        }
                        if let Some(e) = a {
                            next.push(node.child(e));
                        }
                    }
                }
                _ => return differ(n as u32),
            }
            if next.len() > SAMPLE_NODES {
                exact = false;
                next.truncate(SAMPLE_NODES);
            }
        }
        frontier = next;
    }
    if t1.is_finite() && t2.is_finite() {
        let h = t1.height().max(t2.height()).unwrap_or(0);
        exact &= h <= max_depth;
    } else {
        exact = false;
    }
    Distance {
        value: Dyadic::Zero,
        exact,
    }
}

/// `{η^{+1} : η ∈ a}`.
pub fn shift_plus_one(a: &TreeOnOmega) -> TreeOnOmega {
    match a {
        TreeOnOmega::Explicit(s) => TreeOnOmega::Explicit(s.iter().map(Node::shifted).collect()),
        TreeOnOmega::Lazy(o) => match o.spec() {
            Some(spec) => TreeOnOmega::from_spec(TreeSpec::Shifted(Box::new(spec))),
            None => TreeOnOmega::Lazy(Arc::new(ShiftedOracle(o.clone()))),
        },
    }
}

/// Tree of all restrictions `g↾n` and `g⁻¹↾n`, `n ≤ depth`.
///
/// `g⁻¹(i)` is the preimage of `i` below the bound when there is one; a point
/// the permutation does not move is its own preimage.
pub fn prefix_tree_of_permutations(
    perms: &[PartialPermutation],
    depth: usize,
) -> Result<TreeOnOmega, TreeError> {
    let mut nodes = BTreeSet::new();
    nodes.insert(Node::root());
    for g in perms {
        let mut seen: BTreeMap<u64, u64> = BTreeMap::new();
        for k in 0..g.bound() {
            if let Point::Small(v) = g.apply(k) {
                if seen.insert(v, k).is_some() {
                    return Err(TreeError::NotInjective(v));
                }
            }
        }
        let mut fwd = Vec::new();
        let mut inv = Vec::new();
        for i in 0..depth as u64 {
            match g.apply(i) {
                Point::Small(v) => fwd.push(v),
                Point::Power(_) => return Err(TreeError::SymbolicEntry(i)),
            }
            let pre = match seen.get(&i) {
                Some(&k) => k,
                None if i >= g.bound() => i,
                None => return Err(TreeError::InverseUnknown(i)),
            };
            inv.push(pre);
        }
        for m in 0..=depth {
            nodes.insert(Node(fwd[..m].to_vec()));
            nodes.insert(Node(inv[..m].to_vec()));
        }
    }
    Ok(TreeOnOmega::Explicit(nodes))
}

/// A fixed bijection between the nodes of a tree and an initial segment of ℕ:
/// nodes ordered by weight, then lexicographically.
#[derive(Debug)]
pub struct NodeEnumeration {
    tree: TreeOnOmega,
    cache: RwLock<EnumCache>,
}

#[derive(Debug, Default)]
struct EnumCache {
    order: Vec<Node>,
    index: BTreeMap<Node, usize>,
    /// Weights `< done` are fully listed.
    done: u64,
    finite: Option<bool>,
}

/// Weight classes above this are never enumerated.
pub const MAX_ENUM_WEIGHT: u64 = 40;

impl NodeEnumeration {
    pub fn new(tree: TreeOnOmega) -> Self {
        NodeEnumeration {
            tree,
            cache: RwLock::new(EnumCache::default()),
        }
    }

    pub fn tree(&self) -> &TreeOnOmega {
        &self.tree
    }

    fn weight_class(&self, w: u64) -> Vec<Node> {
        fn walk(t: &TreeOnOmega, node: &Node, left: u64, out: &mut Vec<Node>) {
            if left == 0 {
                out.push(node.clone());
                return;
            }
            for e in 0..left {
                let c = node.child(e);
                if t.contains(&c) {
                    walk(t, &c, left - 1 - e, out);
                }
            }
        }
        let mut out = Vec::new();
        if self.tree.contains(&Node::root()) {
            walk(&self.tree, &Node::root(), w, &mut out);
        }
        out
    }

    fn extend_to(&self, weight: u64) -> Result<(), TreeError> {
        if self.cache.read().done > weight {
            return Ok(());
        }
        if weight > MAX_ENUM_WEIGHT {
            return Err(TreeError::EnumerationLimit(weight));
        }
        let mut c = self.cache.write();
        while c.done <= weight {
            let w = c.done;
            for n in self.weight_class(w) {
                let i = c.order.len();
                c.index.insert(n.clone(), i);
                c.order.push(n);
            }
            c.done += 1;
        }
        Ok(())
    }

    fn finite_total(&self) -> Option<usize> {
        if let Some(f) = self.cache.read().finite {
            if !f {
                return None;
            }
        }
        match self.tree.subtree(&Node::root()) {
            Subtree::Finite(v) => {
                self.cache.write().finite = Some(true);
                Some(v.len())
            }
            Subtree::Infinite => {
                self.cache.write().finite = Some(false);
                None
            }
        }
    }

    /// Position of `node`, `None` when it is not in the tree.
    pub fn rank(&self, node: &Node) -> Result<Option<usize>, TreeError> {
        if !self.tree.contains(node) {
            return Ok(None);
        }
        self.extend_to(node.weight())?;
        Ok(self.cache.read().index.get(node).copied())
    }

    /// The node at position `i`, `None` past the end of a finite tree.
    pub fn unrank(&self, i: usize) -> Result<Option<Node>, TreeError> {
        let total = self.finite_total();
        if let Some(total) = total {
            if i >= total {
                return Ok(None);
            }
        }
        loop {
            {
                let c = self.cache.read();
                if let Some(n) = c.order.get(i) {
                    return Ok(Some(n.clone()));
                }
            }
            let next = self.cache.read().done;
            self.extend_to(next)?;
        }
    }
}

/// An eventually periodic infinite branch `stem ⌢ cycle ⌢ cycle ⌢ …`, kept in
/// a normal form so that equal branches compare equal. A cycle of `[0]` is a
/// zero tail.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Branch {
    stem: Vec<u64>,
    cycle: Vec<u64>,
}

impl Branch {
    pub fn periodic(stem: Vec<u64>, cycle: Vec<u64>) -> Result<Self, TreeError> {
        if cycle.is_empty() {
            return Err(TreeError::EmptyCycle);
        }
        let mut cycle = cycle;
        let len = cycle.len();
        for d in 1..=len {
            if len % d == 0 && (0..len).all(|i| cycle[i] == cycle[i % d]) {
                cycle.truncate(d);
                break;
            }
        }
        let mut stem = stem;
        while let (Some(&a), Some(&b)) = (stem.last(), cycle.last()) {
            if a != b {
                break;
            }
            stem.pop();
            cycle.rotate_right(1);
        }
        Ok(Branch { stem, cycle })
    }

    /// `η ⌢ (0, 0, …)`.
    pub fn zero_tail(stem: Node) -> Self {
        Branch::periodic(stem.0, vec![0]).expect("nonempty cycle")
    }

    pub fn is_zero_tail(&self) -> bool {
        self.cycle == [0]
    }

    pub fn stem(&self) -> Node {
        Node(self.stem.clone())
    }

    pub fn cycle(&self) -> &[u64] {
        &self.cycle
    }

    pub fn entry(&self, i: usize) -> u64 {
        match self.stem.get(i) {
            Some(&e) => e,
            None => self.cycle[(i - self.stem.len()) % self.cycle.len()],
        }
    }

    /// `branch ↾ n`.
    pub fn prefix(&self, n: usize) -> Node {
        Node((0..n).map(|i| self.entry(i)).collect())
    }

    pub fn extends(&self, node: &Node) -> bool {
        node.0.iter().enumerate().all(|(i, &e)| self.entry(i) == e)
    }

    /// First index where the branches differ, `None` if they are equal.
    pub fn first_difference(&self, other: &Branch) -> Option<usize> {
        if self == other {
            return None;
        }
        let horizon = self.stem.len().max(other.stem.len())
            + num_integer::Integer::lcm(&self.cycle.len(), &other.cycle.len());
        (0..horizon).find(|&i| self.entry(i) != other.entry(i))
    }

    /// Length past which every later prefix is already determined by the
    /// stem and one full cycle.
    pub fn settled_length(&self) -> usize {
        self.stem.len() + self.cycle.len()
    }
}

impl fmt::Debug for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.stem())?;
        f.write_str("⌢")?;
        write!(f, "{}", Node(self.cycle.clone()))?;
        f.write_str("^ω")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(v: &[u64]) -> Node {
        Node::from(v)
    }

    #[test]
    fn validation_examples() {
        let ok = TreeOnOmega::from_lists(&[&[], &[0], &[1]]);
        assert!(validate_tree(&ok, &[]).is_ok());
        let gap = TreeOnOmega::from_lists(&[&[], &[0, 1]]);
        assert_eq!(
            validate_tree(&gap, &[]),
            Err(TreeError::MissingPrefix {
                node: n(&[0, 1]),
                prefix: n(&[0])
            })
        );
        let rootless = TreeOnOmega::from_lists(&[&[0]]);
        assert_eq!(validate_tree(&rootless, &[]), Err(TreeError::MissingRoot));
    }

    #[test]
    fn wellfounded_examples() {
        let t = TreeOnOmega::from_lists(&[&[], &[1], &[1, 1]]);
        match wellfounded_check(&t, 10, None).unwrap() {
            WellFounded::NoBranchUpTo { depth, ranks } => {
                assert_eq!(depth, 2);
                assert_eq!(ranks.unwrap()[&Node::root()], 2);
            }
            other => panic!("{other:?}"),
        }
        let binary = TreeOnOmega::from_spec(TreeSpec::Full { arity: Some(2) });
        let chain: Vec<Node> = (1..=5).map(|k| Node(vec![1; k])).collect();
        assert_eq!(
            wellfounded_check(&binary, 5, None).unwrap(),
            WellFounded::BranchFound(chain)
        );
        let dec = TreeOnOmega::from_spec(TreeSpec::Decreasing { bound: 10 });
        let rank = |x: &Node| Some(x.last().unwrap_or(10));
        assert!(matches!(
            wellfounded_check(&dec, 20, Some(&rank)).unwrap(),
            WellFounded::Certified { .. }
        ));
        let bad = |x: &Node| Some(x.len() as u64);
        assert!(matches!(
            wellfounded_check(&dec, 20, Some(&bad)),
            Err(TreeError::RankIncrease { .. })
        ));
    }

    #[test]
    fn distance_examples() {
        let single = TreeOnOmega::from_lists(&[&[]]);
        let two = TreeOnOmega::from_lists(&[&[], &[0]]);
        assert_eq!(tree_distance(&single, &single, 5).value, Dyadic::Zero);
        assert_eq!(tree_distance(&single, &two, 5).value, Dyadic::InvPow2(1));
        let b = TreeOnOmega::from_spec(TreeSpec::Full { arity: Some(2) });
        let t = TreeOnOmega::from_spec(TreeSpec::Full { arity: Some(3) });
        assert_eq!(tree_distance(&b, &t, 4).value, Dyadic::InvPow2(1));
        assert!(Dyadic::Zero < Dyadic::InvPow2(3));
        assert!(Dyadic::InvPow2(3) < Dyadic::InvPow2(1));
    }

    #[test]
    fn shift_examples() {
        let a = TreeOnOmega::from_lists(&[&[], &[0], &[0, 2]]);
        let s = shift_plus_one(&a);
        assert!(matches!(&s, TreeOnOmega::Explicit(x) if x.len() == 3));
        assert!(s.contains(&n(&[1, 3])));
        let b = shift_plus_one(&TreeOnOmega::from_spec(TreeSpec::Full { arity: Some(2) }));
        assert!(b.contains(&n(&[1, 2, 2])));
        assert!(!b.contains(&n(&[0])));
        assert_eq!(b.children(&n(&[2])), Children::Finite(vec![1, 2]));
    }

    #[test]
    fn levels_and_children() {
        let full = TreeOnOmega::full();
        assert!(full.level(2, None).is_err());
        assert_eq!(full.level(2, Some(3)).unwrap().len(), 9);
        let t = TreeOnOmega::from_lists(&[&[], &[1], &[1, 1], &[3]]);
        assert_eq!(t.children(&Node::root()), Children::Finite(vec![1, 3]));
        assert_eq!(t.level(1, None).unwrap(), vec![n(&[1]), n(&[3])]);
    }

    #[test]
    fn branch_normal_form() {
        let a = Branch::zero_tail(n(&[1, 0, 0]));
        let b = Branch::zero_tail(n(&[1]));
        assert_eq!(a, b);
        assert!(a.is_zero_tail());
        assert_eq!(a.prefix(3), n(&[1, 0, 0]));
        let c = Branch::periodic(vec![2], vec![1, 2, 1, 2]).unwrap();
        assert_eq!(c, Branch::periodic(vec![], vec![2, 1]).unwrap());
        assert_eq!(a.first_difference(&Branch::zero_tail(n(&[2]))), Some(0));
        assert_eq!(a.first_difference(&Branch::zero_tail(n(&[1, 0, 3]))), Some(2));
        assert!(Branch::periodic(vec![], vec![]).is_err());
    }

    #[test]
    fn enumeration_is_a_bijection() {
        let fan = NodeEnumeration::new(TreeOnOmega::from_spec(TreeSpec::Fan { height: 3 }));
        for i in 0..300 {
            let node = fan.unrank(i).unwrap().unwrap();
            assert_eq!(fan.rank(&node).unwrap(), Some(i));
        }
        assert_eq!(fan.unrank(0).unwrap(), Some(Node::root()));
        let fin = NodeEnumeration::new(TreeOnOmega::from_lists(&[&[], &[2], &[5]]));
        assert_eq!(fin.unrank(2).unwrap(), Some(n(&[5])));
        assert_eq!(fin.unrank(3).unwrap(), None);
    }
}
