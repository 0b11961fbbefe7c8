//! Homomorphisms to ℤ separating limit elements from 0, retractions onto
//! pure closures of finite sets, and type obstructions to surjections.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::arith::{
    product_of, type_leq, Characteristic, LeqFailure, PrimeSet, Rational, SetSize, TypeClass,
    TypeOrder,
};
use crate::cancel::{check, CancelToken};
use crate::engine::{
    validate_limit, Engine, EngineError, LimitElement, PrimeAssignment, BRANCH_HORIZON,
};
use crate::lattice::{self, Saturation};
use crate::level::{to_vector, LevelElement};
use crate::trees::{Branch, Node};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WitnessError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("precondition: {0}")]
    Precondition(String),
    #[error("no stabilization within truncation {0}")]
    DepthExhausted(usize),
    #[error("internal assertion failed: {0}")]
    Assertion(String),
    #[error("prime sets are not almost disjoint")]
    NotAlmostDisjoint,
    #[error("no node with an infinite label up to level {0}")]
    NoObstruction(usize),
    #[error("cancelled")]
    Cancelled,
}

impl From<crate::level::LevelError> for WitnessError {
    fn from(e: crate::level::LevelError) -> Self {
        WitnessError::Engine(e.into())
    }
}

impl From<crate::arith::ArithError> for WitnessError {
    fn from(e: crate::arith::ArithError) -> Self {
        WitnessError::Engine(e.into())
    }
}

/// `z ↦ coefficient of x_node in f_(ω, level)(z)`, a homomorphism into
/// `K_node x_node ≅ ℤ` when the label is finite.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HomDescriptor {
    pub level: usize,
    pub node: Node,
    pub value: Rational,
    pub label: Vec<u64>,
}

impl HomDescriptor {
    pub fn apply(&self, z: &LimitElement) -> Rational {
        z.project(self.level).coeff(&self.node)
    }

    /// The value as an integer multiple of `1 / ∏ label`.
    pub fn integer_value(&self) -> BigInt {
        let d = BigRational::from_integer(BigInt::from(product_of(&self.label)));
        (&self.value * d).to_integer()
    }
}

fn exits(engine: &Engine, node: &Node) -> Result<bool, EngineError> {
    match engine.inner() {
        Some(s) => Ok(!s.contains(node)),
        None => engine.label_is_finite(node),
    }
}

fn max_walk(y: &LimitElement) -> usize {
    let tail = y
        .terms()
        .keys()
        .map(|b| b.settled_length() + b.cycle().len() * BRANCH_HORIZON)
        .max()
        .unwrap_or(0);
    y.separation_level() + tail + 1
}

/// Walk down the nonzero part of `y` from the first level after which all
/// projections are nonzero, until the path leaves the inner tree.
pub fn torsionless_witness(
    engine: &Engine,
    y: &LimitElement,
    cancel: Option<&CancelToken>,
) -> Result<HomDescriptor, WitnessError> {
    if y.is_zero() {
        return Err(WitnessError::Precondition("the element is 0".into()));
    }
    let s = y.separation_level();
    let mut start = s;
    while start > 0 && !y.project(start - 1).is_zero() {
        start -= 1;
    }
    let first = y.project(start);
    let mut node = first.nodes().next().cloned().expect("nonzero projection");
    let limit = max_walk(y);
    loop {
        if check(cancel) {
            return Err(WitnessError::Cancelled);
        }
        if exits(engine, &node)? {
            let label = engine.label(&node)?;
            let Some(ps) = label.as_finite() else {
                return Err(WitnessError::Assertion(format!("label of {node} is infinite off the inner tree")));
            };
            let value = y.project(node.len()).coeff(&node);
            if value.is_zero() {
                return Err(WitnessError::Assertion(format!("zero coefficient at {node}")));
            }
            return Ok(HomDescriptor {
                level: node.len(),
                label: ps.to_vec(),
                node,
                value,
            });
        }
        if node.len() > limit {
            return Err(WitnessError::Precondition(format!(
                "the support stays in the inner tree past {node}"
            )));
        }
        let next = y.project(node.len() + 1);
        node = next
            .nodes()
            .find(|n| node.is_proper_prefix_of(n))
            .cloned()
            .ok_or_else(|| WitnessError::Assertion(format!("no nonzero successor of {node}")))?;
    }
}

/// Result of the independence reduction and rank trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stabilization {
    /// First level from which the rank of the image is constant.
    pub level: usize,
    pub rank: usize,
    /// Indices of the independent subfamily kept.
    pub kept: Vec<usize>,
    /// Rank of the image at each level up to the separation level.
    pub ranks: Vec<usize>,
}

fn all_branches(xs: &[LimitElement]) -> Vec<Branch> {
    xs.iter()
        .flat_map(|x| x.terms().keys().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Level by which all branches occurring in `xs` are pairwise distinct.
pub fn separation_level(xs: &[LimitElement]) -> usize {
    let bs = all_branches(xs);
    let mut s = 0;
    for i in 0..bs.len() {
        for j in i + 1..bs.len() {
            if let Some(d) = bs[i].first_difference(&bs[j]) {
                s = s.max(d + 1);
            }
        }
    }
    s
}

fn level_rows(xs: &[LimitElement], n: usize) -> (Vec<Node>, Vec<Vec<Rational>>) {
    let projected: Vec<LevelElement> = xs.iter().map(|x| x.project(n)).collect();
    let coords: Vec<Node> = projected
        .iter()
        .flat_map(|e| e.nodes().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let rows = projected.iter().map(|e| to_vector(e, &coords)).collect();
    (coords, rows)
}

/// `(n*, k*)`: the rank of `f_(ω, n)(⟨X⟩*)` is nondecreasing in `n` and is
/// constant from the level where all branches have separated.
pub fn stabilization_depth(engine: &Engine, xs: &[LimitElement]) -> Result<Stabilization, WitnessError> {
    let s = separation_level(xs);
    if s > engine.truncation() {
        return Err(WitnessError::DepthExhausted(engine.truncation()));
    }
    let (_, rows) = level_rows(xs, s);
    let kept = lattice::independent_rows(&rows);
    let ranks: Vec<usize> = (0..=s).map(|n| lattice::rank(&level_rows(xs, n).1)).collect();
    let k = kept.len();
    let level = ranks.iter().position(|&r| r == k).unwrap_or(s);
    Ok(Stabilization {
        level,
        rank: k,
        kept,
        ranks,
    })
}

/// A retraction `r = g₀⁻¹ ∘ ρ ∘ f*` of the limit onto `⟨X⟩*`, where `f*`
/// projects to the finite-label nodes `Y*` of level `level` and `ρ` projects
/// onto the saturation of the image along a complement.
#[derive(Clone, Debug)]
pub struct RetractionCertificate {
    pub level: usize,
    pub nodes: Vec<Node>,
    /// `∏ L(ν)` for each node.
    pub scales: Vec<BigInt>,
    pub reduced: Vec<LimitElement>,
    pub rank: usize,
    /// Free basis of `⟨X⟩*`.
    pub basis: Vec<LimitElement>,
    /// Its image, a free basis of the target summand of `G_level`.
    pub target_basis: Vec<LevelElement>,
    saturation: Option<Saturation>,
    pub transcript: Vec<String>,
}

impl RetractionCertificate {
    fn scaled(&self, e: &LevelElement) -> Result<Vec<BigInt>, WitnessError> {
        let mut out = Vec::with_capacity(self.nodes.len());
        for (n, d) in self.nodes.iter().zip(&self.scales) {
            let c = e.coeff(n) * BigRational::from_integer(d.clone());
            if !c.is_integer() {
                return Err(WitnessError::Precondition(format!("coefficient at {n} is not in its rank-1 group")));
            }
            out.push(c.to_integer());
        }
        Ok(out)
    }

    /// `r(z)`.
    pub fn apply(&self, z: &LimitElement) -> Result<LimitElement, WitnessError> {
        let Some(sat) = &self.saturation else {
            return Ok(LimitElement::zero());
        };
        let v = self.scaled(&z.project(self.level))?;
        let w = sat.coords(&v);
        let mut out = LimitElement::zero();
        for (c, b) in w.iter().take(self.rank).zip(&self.basis) {
            out = out.add(&b.scale(&BigRational::from_integer(c.clone())));
        }
        Ok(out)
    }

    /// `f*(z)` as an element of `G_level`.
    pub fn project(&self, z: &LimitElement) -> LevelElement {
        let keep: BTreeSet<Node> = self.nodes.iter().cloned().collect();
        z.project(self.level).project(&keep)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RetractionOptions {
    /// Do not look for a retraction below this level.
    pub min_level: usize,
}

pub fn separability_retraction(
    engine: &Engine,
    xs: &[LimitElement],
    options: RetractionOptions,
    cancel: Option<&CancelToken>,
) -> Result<RetractionCertificate, WitnessError> {
    for x in xs {
        validate_limit(engine, x)?;
    }
    let stab = stabilization_depth(engine, xs)?;
    let reduced: Vec<LimitElement> = stab.kept.iter().map(|&i| xs[i].clone()).collect();
    let k = stab.rank;
    let mut transcript = Vec::new();
    transcript.push(format!("kept {:?} of {} elements; rank {k} from level {}", stab.kept, xs.len(), stab.level));
    if k == 0 {
        return Ok(RetractionCertificate {
            level: options.min_level,
            nodes: Vec::new(),
            scales: Vec::new(),
            reduced,
            rank: 0,
            basis: Vec::new(),
            target_basis: Vec::new(),
            saturation: None,
            transcript,
        });
    }
    let mut last_rank = 0;
    for n in stab.level.max(options.min_level)..=engine.truncation() {
        if check(cancel) {
            return Err(WitnessError::Cancelled);
        }
        let (coords, _) = level_rows(&reduced, n);
        let mut nodes = Vec::new();
        let mut scales = Vec::new();
        for c in coords {
            if let Some(ps) = engine.label(&c)?.as_finite() {
                scales.push(BigInt::from(product_of(ps)));
                nodes.push(c);
            }
        }
        let mut cert = RetractionCertificate {
            level: n,
            nodes,
            scales,
            reduced: reduced.clone(),
            rank: 0,
            basis: Vec::new(),
            target_basis: Vec::new(),
            saturation: None,
            transcript: transcript.clone(),
        };
        let rows: Vec<Vec<BigInt>> = reduced
            .iter()
            .map(|x| cert.scaled(&cert.project(x)))
            .collect::<Result<_, _>>()?;
        let rat_rows: Vec<Vec<Rational>> = rows.iter().map(|r| lattice::to_rational(r)).collect();
        let k_star = lattice::rank(&rat_rows);
        last_rank = k_star;
        transcript.push(format!("level {n}: {} finite-label nodes, image rank {k_star}", cert.nodes.len()));
        if k_star != k {
            continue;
        }
        let sat = Saturation::new(&rows, cert.nodes.len());
        let mut basis = Vec::with_capacity(k);
        let mut onto = true;
        for w in sat.basis() {
            let coeffs = lattice::solve(&rat_rows, &lattice::to_rational(w))
                .ok_or_else(|| WitnessError::Assertion("saturation vector outside the rational span".into()))?;
            let pre = reduced
                .iter()
                .zip(&coeffs)
                .fold(LimitElement::zero(), |acc, (x, c)| acc.add(&x.scale(c)));
            if validate_limit(engine, &pre).is_err() {
                onto = false;
                transcript.push(format!("level {n}: {pre:?} is not in the limit"));
                break;
            }
            basis.push(pre);
        }
        if !onto {
            continue;
        }
        cert.target_basis = basis.iter().map(|b| cert.project(b)).collect();
        let level = engine.build_level(n);
        for t in &cert.target_basis {
            if !level.is_member(t)? {
                return Err(WitnessError::Assertion(format!("{t} is not in G_{n}")));
            }
        }
        if lattice::determinant(&sat.q).abs() != BigInt::one() {
            return Err(WitnessError::Assertion("complement is not unimodular".into()));
        }
        cert.rank = k;
        cert.basis = basis;
        cert.saturation = Some(sat);
        for x in &reduced {
            if cert.apply(x)? != *x {
                return Err(WitnessError::Assertion(format!("retraction moves {x:?}")));
            }
        }
        for x in xs {
            if cert.apply(x)? != *x {
                return Err(WitnessError::Assertion(format!("retraction moves {x:?}")));
            }
        }
        transcript.push(format!("level {n}: retraction fixes all {} elements", xs.len()));
        cert.transcript = transcript;
        return Ok(cert);
    }
    Err(WitnessError::Assertion(format!(
        "image rank {last_rank} on finite-label nodes never reached {k} by level {}",
        engine.truncation()
    )))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObstructionKind {
    /// No level of the source maps onto a level of the target.
    Surjection,
    /// No level surjects onto a free group.
    Product,
}

/// `x_node` is divisible by every prime of `witness_set`, which is infinite
/// and meets `target_primes` only in `exceptions`; hence its type is not
/// below the type of any element of a group whose labels lie in
/// `target_primes`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObstructionCertificate {
    pub kind: ObstructionKind,
    pub level: usize,
    pub node: Node,
    pub witness_set: PrimeSet,
    pub target_primes: PrimeSet,
    pub exceptions: Vec<u64>,
    pub sample: Vec<u64>,
    pub failure: LeqFailure,
}

impl ObstructionCertificate {
    pub fn element(&self) -> LevelElement {
        LevelElement::basis(self.node.clone())
    }
}

const OBSTRUCTION_SAMPLE: usize = 8;

fn enumerated_source(engine: &Engine) -> Result<PrimeSet, WitnessError> {
    match engine.nice_pair().map(|p| p.primes()) {
        Some(PrimeAssignment::Enumerated { source }) => Ok(source.clone()),
        _ => Err(WitnessError::Precondition("engine is not of the G_P shape".into())),
    }
}

fn leq_failure(witness: &PrimeSet, target: &PrimeSet) -> Result<Option<LeqFailure>, WitnessError> {
    let t1 = TypeClass::of(Characteristic::on_set(witness.clone()));
    let t2 = if target.is_finite() && target.as_finite().is_some_and(|v| v.is_empty()) {
        TypeClass::zero()
    } else {
        TypeClass::of(Characteristic::on_set(target.clone()))
    };
    Ok(match type_leq(&t1, &t2)? {
        TypeOrder::Leq => None,
        TypeOrder::NotLeq(f) => Some(f),
    })
}

fn outside_sample(witness: &PrimeSet, target: &PrimeSet) -> Result<Vec<u64>, WitnessError> {
    let mut out = Vec::new();
    let mut i = 0;
    while out.len() < OBSTRUCTION_SAMPLE && i < 64 * OBSTRUCTION_SAMPLE {
        let p = witness.nth(i)?;
        if !target.contains(p)? {
            out.push(p);
        }
        i += 1;
    }
    Ok(out)
}

/// The root of the inner tree of a `G_P` engine is labelled by all of `P`.
fn root_label_is_source(engine: &Engine, source: &PrimeSet) -> Result<bool, WitnessError> {
    let root = Node::root();
    if engine.inner().is_none_or(|s| !s.contains(&root)) {
        return Ok(false);
    }
    let l = engine.label(&root)?;
    if l.is_finite() {
        return Ok(false);
    }
    for p in source.sample(OBSTRUCTION_SAMPLE)? {
        if !l.contains(p)? {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn surjection_obstruction(src: &Engine, dst: &Engine) -> Result<ObstructionCertificate, WitnessError> {
    let p1 = enumerated_source(src)?;
    let p2 = enumerated_source(dst)?;
    if p1.is_finite() || p2.is_finite() {
        return Err(WitnessError::Precondition("G_P needs an infinite prime set".into()));
    }
    let exceptions = match p1.intersection(&p2) {
        SetSize::Finite(v) => v,
        _ => return Err(WitnessError::NotAlmostDisjoint),
    };
    if !root_label_is_source(src, &p1)? {
        return Err(WitnessError::Precondition("the root label of the source is not its prime set".into()));
    }
    let failure = leq_failure(&p1, &p2)?
        .ok_or_else(|| WitnessError::Assertion("type of the root is below the target".into()))?;
    Ok(ObstructionCertificate {
        kind: ObstructionKind::Surjection,
        level: 0,
        node: Node::root(),
        sample: outside_sample(&p1, &p2)?,
        witness_set: p1,
        target_primes: p2,
        exceptions,
        failure,
    })
}

/// The first window node with an infinite label, whose basis element has a
/// nonzero type.
pub fn product_obstruction(engine: &Engine, cancel: Option<&CancelToken>) -> Result<ObstructionCertificate, WitnessError> {
    for n in 0..=engine.truncation() {
        for node in engine.level_nodes(n)? {
            if check(cancel) {
                return Err(WitnessError::Cancelled);
            }
            let label = engine.label(&node)?;
            if label.is_finite() {
                continue;
            }
            let witness = match engine.nice_pair().map(|p| p.primes()) {
                Some(PrimeAssignment::Enumerated { source }) if node.is_root() => source.clone(),
                _ => label,
            };
            let target = PrimeSet::empty();
            let failure = leq_failure(&witness, &target)?
                .ok_or_else(|| WitnessError::Assertion("infinite label with zero type".into()))?;
            return Ok(ObstructionCertificate {
                kind: ObstructionKind::Product,
                level: n,
                sample: outside_sample(&witness, &target)?,
                node,
                witness_set: witness,
                target_primes: target,
                exceptions: Vec::new(),
                failure,
            });
        }
    }
    Err(WitnessError::NoObstruction(engine.truncation()))
}

/// Re-derives the type comparison failure from the stored sets alone.
pub fn verify_obstruction(cert: &ObstructionCertificate) -> Result<(), String> {
    let w = &cert.witness_set;
    let t = &cert.target_primes;
    if w.is_finite() {
        return Err("witness set is finite".into());
    }
    if cert.sample.is_empty() {
        return Err("empty sample".into());
    }
    for &p in &cert.sample {
        let inside = w.contains(p).map_err(|e| format!("{e}"))?;
        let outside = !t.contains(p).map_err(|e| format!("{e}"))?;
        if !(inside && outside) {
            return Err(format!("sample prime {p} is not in the excess set"));
        }
    }
    let mut exceptions = cert.exceptions.clone();
    exceptions.sort_unstable();
    match w.intersection(t) {
        SetSize::Finite(v) if v == exceptions => {}
        SetSize::Finite(v) => return Err(format!("intersection is {v:?}, not {exceptions:?}")),
        _ => return Err("intersection with the target primes is not finite".into()),
    }
    match leq_failure(w, t).map_err(|e| format!("{e}"))? {
        Some(LeqFailure::InfiniteExcess { .. }) => Ok(()),
        Some(other) => Err(format!("unexpected failure {other:?}")),
        None => Err("the type is below the target".into()),
    }
}
