//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::time::{Duration, Instant};

use aleph_core::arith::{almost_disjoint_family, is_prime, nth_prime, Rational};
use aleph_core::engine::{
    homogeneity_witness, make_ga, make_gp, Engine, Homogeneity, LimitElement, PrimeAssignment,
};
use aleph_core::level::LevelElement;
use aleph_core::pathologies::bezout::{bezout_limit_element, build_bezout_tree, verify_bezout, BezoutTree};
use aleph_core::pathologies::pontryagin::PontryaginGroup;
use aleph_core::perm::{PartialPermutation, Point};
use aleph_core::sinfty::{distance_in_sinf, encode_element, verify_embedding, DomainCoding};
use aleph_core::trees::{tree_distance, Branch, Dyadic, Node, TreeOnOmega, TreeSpec};
use aleph_core::witnesses::{
    product_obstruction, separability_retraction, surjection_obstruction, torsionless_witness, verify_obstruction,
    RetractionOptions, WitnessError,
};
use aleph_lab::json;
use aleph_lab::suites::{self, HOST_ARITY};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::Rng;

fn report(n: usize, ok: bool, what: &str) {
    let line = format!("criterion {n}: {} ({what})\n", if ok { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
}

fn finish(n: usize, failures: &[String], what: &str) {
    report(n, failures.is_empty(), what);
    assert!(failures.is_empty(), "criterion {n}: {:?}", &failures[..failures.len().min(5)]);
}

fn naive_factor(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        let mut e = 0;
        while n % d == 0 {
            n /= d;
            e += 1;
        }
        if e > 0 {
            out.push((d, e));
        }
        d += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// `q ∈ ⟨1/p : p ∈ allowed⟩` by trial division.
fn naive_in_rank_one(q: &Rational, allowed: &BTreeSet<u64>) -> bool {
    let d = q.denom().to_u64().expect("small denominators");
    naive_factor(d).iter().all(|&(p, e)| e == 1 && allowed.contains(&p))
}

fn binary_nodes(n: usize) -> Vec<Node> {
    (0..1u64 << n)
        .map(|i| Node::new((0..n).map(|b| (i >> (n - 1 - b)) & 1).collect::<Vec<_>>()))
        .collect()
}

fn bezout_oracle(t: &BezoutTree) -> Vec<String> {
    let mut bad = Vec::new();
    for n in 0..=t.depth {
        let d: BigInt = t.used[..n].iter().map(|&p| BigInt::from(p)).product();
        for eta in binary_nodes(n) {
            let a = &t.nodes[&eta].value;
            let below: BTreeSet<u64> = t
                .nodes
                .iter()
                .filter(|(nu, _)| eta.is_prefix_of(nu))
                .map(|(_, r)| r.prime)
                .collect();
            let q = Rational::new(a.clone(), d.clone());
            if !naive_in_rank_one(&q, &below) {
                bad.push(format!("level {n}: {q} at {eta} is outside its rank-1 group"));
            }
            if n < t.depth {
                let s = &t.nodes[&eta.child(0)].value + &t.nodes[&eta.child(1)].value;
                if &s != a {
                    bad.push(format!("children of {eta} sum to {s}, not {a}"));
                }
            }
        }
    }
    bad
}

#[test]
fn criterion_1_bezout_tree() {
    let start = Instant::now();
    let primes: Vec<u64> = (0..13).map(nth_prime).collect();
    let mut failures = Vec::new();
    for depth in 0..=12 {
        let t = match build_bezout_tree(&primes, depth) {
            Ok(t) => t,
            Err(e) => {
                failures.push(format!("depth {depth}: {e}"));
                continue;
            }
        };
        if let Err(e) = verify_bezout(&t) {
            failures.push(format!("depth {depth}: {e}"));
        }
        match bezout_limit_element(&t) {
            Ok(r) if r.passed() => {}
            Ok(_) => failures.push(format!("depth {depth}: limit element check failed")),
            Err(e) => failures.push(format!("depth {depth}: {e}")),
        }
        if depth == 12 {
            failures.extend(bezout_oracle(&t));
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(10) {
        failures.push(format!("took {elapsed:?}"));
    }
    finish(1, &failures, &format!("depth 0..=12, 13 primes, {elapsed:.2?}"));
}

/// `L(η) = { p_σ : σ ◁ η or η ⊴ σ }` straight from the assignment.
fn naive_label(primes: &BTreeMap<Node, u64>, eta: &Node) -> Vec<u64> {
    let mut v: Vec<u64> = primes
        .iter()
        .filter(|(s, _)| s.is_proper_prefix_of(eta) || eta.is_prefix_of(s))
        .map(|(_, &p)| p)
        .collect();
    v.sort_unstable();
    v
}

fn naive_bond(e: &LevelElement, m: usize) -> LevelElement {
    let mut acc: BTreeMap<Node, Rational> = BTreeMap::new();
    for (n, c) in e.support() {
        *acc.entry(n.restrict(m)).or_insert_with(Rational::zero) += c;
    }
    LevelElement::from_terms(m, acc.into_iter().filter(|(_, c)| !c.is_zero())).unwrap()
}

#[test]
fn criterion_2_engine_laws() {
    let start = Instant::now();
    let mut rng = suites::rng(2);
    let mut failures = Vec::new();
    let (mut compositions, mut ontos) = (0, 0);
    for i in 0..50 {
        let pair = suites::random_nice_pair(&mut rng, 8);
        let PrimeAssignment::Explicit(assigned) = pair.primes().clone() else { unreachable!() };
        assert!(assigned.len() <= 8);
        let e = Engine::from_nice_pair(pair, 6, Some(HOST_ARITY));
        match e.check_bonding_laws(6, 2) {
            Ok(r) => {
                compositions += r.composition_checks;
                ontos += r.onto_checks;
                failures.extend(r.failures.into_iter().map(|f| format!("pair {i}: {f}")));
            }
            Err(err) => failures.push(format!("pair {i}: {err}")),
        }
        for n in 0..=6 {
            for eta in e.level_nodes(n).unwrap() {
                let got = e.label(&eta).unwrap();
                if got.as_finite() != Some(&naive_label(&assigned, &eta)[..]) {
                    failures.push(format!("pair {i}: label of {eta} is {}", got.describe()));
                }
            }
        }
        let top = e.build_level(6);
        let gens = e.generators(6, 2).unwrap();
        for _ in 0..10 {
            let mut x = LevelElement::zero(6);
            for _ in 0..4 {
                let g = gens.choose(&mut rng).unwrap();
                x = x.add(&g.scale(&Rational::from_integer(rng.gen_range(-3..=3).into()))).unwrap();
            }
            assert!(top.is_member(&x).unwrap());
            let m = rng.gen_range(0..=6);
            let image = x.bond(m).unwrap();
            if image != naive_bond(&x, m) || !e.build_level(m).is_member(&image).unwrap() {
                failures.push(format!("pair {i}: f(6,{m}) disagrees with restriction on {x}"));
            }
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(30) {
        failures.push(format!("took {elapsed:?}"));
    }
    finish(
        2,
        &failures,
        &format!("50 pairs, {compositions} composition and {ontos} onto checks, {elapsed:.2?}"),
    );
}

/// Coefficient of `x_node` in the projection, summed branch by branch.
fn naive_coefficient(y: &LimitElement, node: &Node) -> Rational {
    y.terms()
        .iter()
        .filter(|(b, _)| b.prefix(node.len()) == *node)
        .map(|(_, c)| c.clone())
        .fold(Rational::zero(), |a, c| a + c)
}

#[test]
fn criterion_3_torsionless() {
    let mut rng = suites::rng(3);
    let mut failures = Vec::new();
    for i in 0..120 {
        let e = if i % 4 == 3 {
            suites::fan_engine(&mut rng, 6)
        } else {
            suites::random_engine(&mut rng, 8, 6)
        };
        let y = suites::random_limit_element(&e, &mut rng, 3);
        assert!(!y.is_zero());
        match torsionless_witness(&e, &y, None) {
            Ok(h) => {
                let v = naive_coefficient(&y, &h.node);
                let label = e.label(&h.node).unwrap();
                let finite = label.as_finite().map(|l| l.iter().copied().collect::<BTreeSet<_>>());
                let ok = v == h.value
                    && !v.is_zero()
                    && h.apply(&y) == v
                    && finite.as_ref().is_some_and(|l| naive_in_rank_one(&v, l))
                    && finite.as_ref().is_some_and(|l| l.iter().copied().eq(h.label.iter().copied()));
                if !ok {
                    failures.push(format!("element {i}: bad descriptor {h:?} for {y:?}"));
                }
            }
            Err(err) => failures.push(format!("element {i}: {err}")),
        }
    }
    finish(3, &failures, "120 elements over finite and fan inner trees");
}

fn rank_of(rows: &[Vec<Rational>]) -> usize {
    let mut m: Vec<Vec<Rational>> = rows.to_vec();
    let cols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(piv) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, piv);
        for i in 0..m.len() {
            if i != r && !m[i][c].is_zero() {
                let f = &m[i][c] / &m[r][c];
                for j in 0..cols {
                    let t = &m[r][j] * &f;
                    m[i][j] -= t;
                }
            }
        }
        r += 1;
    }
    r
}

fn det(m: &[Vec<Rational>]) -> Rational {
    let mut m = m.to_vec();
    let n = m.len();
    let mut d = Rational::one();
    for c in 0..n {
        let Some(piv) = (c..n).find(|&i| !m[i][c].is_zero()) else { return Rational::zero() };
        if piv != c {
            m.swap(piv, c);
            d = -d;
        }
        d *= &m[c][c];
        for i in c + 1..n {
            let f = &m[i][c] / &m[c][c];
            for j in c..n {
                let t = &m[c][j] * &f;
                m[i][j] -= t;
            }
        }
    }
    d
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

/// Integer rows whose maximal minors have gcd 1 span a direct summand.
fn primitive(rows: &[Vec<BigInt>]) -> bool {
    let k = rows.len();
    let cols = rows.first().map_or(0, Vec::len);
    let mut g = BigInt::zero();
    for s in subsets(cols, k) {
        let m: Vec<Vec<Rational>> = rows
            .iter()
            .map(|r| s.iter().map(|&j| Rational::from_integer(r[j].clone())).collect())
            .collect();
        g = g.gcd(&det(&m).to_integer());
        if g.is_one() {
            return true;
        }
    }
    false
}

#[test]
fn criterion_4_separability() {
    let mut rng = suites::rng(4);
    let mut failures = Vec::new();
    let mut ranks = BTreeMap::new();
    for i in 0..60 {
        let e = suites::random_engine(&mut rng, 8, 6);
        let k = rng.gen_range(1..=4);
        let xs: Vec<LimitElement> = (0..k).map(|_| suites::random_limit_element(&e, &mut rng, 3)).collect();
        let cert = match separability_retraction(&e, &xs, RetractionOptions::default(), None) {
            Ok(c) => c,
            Err(WitnessError::Assertion(m)) => {
                failures.push(format!("set {i}: rank assertion fired: {m}"));
                continue;
            }
            Err(err) => {
                failures.push(format!("set {i}: {err}"));
                continue;
            }
        };
        *ranks.entry(cert.rank).or_insert(0) += 1;
        for x in &xs {
            if cert.apply(x).ok().as_ref() != Some(x) {
                failures.push(format!("set {i}: {x:?} is moved"));
            }
        }
        for _ in 0..20 {
            let z = suites::random_limit_element(&e, &mut rng, 3);
            match cert.apply(&z) {
                Ok(r) if cert.apply(&r).ok().as_ref() == Some(&r) => {}
                _ => failures.push(format!("set {i}: not idempotent on {z:?}")),
            }
        }
        let level = e.build_level(cert.level);
        let mut rows = Vec::new();
        for t in &cert.target_basis {
            if !level.is_member(t).unwrap() {
                failures.push(format!("set {i}: {t} not in the level group"));
            }
            let row: Vec<Rational> = cert
                .nodes
                .iter()
                .zip(&cert.scales)
                .map(|(n, d)| t.coeff(n) * Rational::from_integer(d.clone()))
                .collect();
            if !row.iter().all(Rational::is_integer) {
                failures.push(format!("set {i}: {t} has a coefficient outside its rank-1 group"));
            }
            rows.push(row);
        }
        let rank = rank_of(&rows);
        let ints: Vec<Vec<BigInt>> = rows.iter().map(|r| r.iter().map(Rational::to_integer).collect()).collect();
        if rank != cert.rank || cert.target_basis.len() != cert.rank || (rank > 0 && !primitive(&ints)) {
            failures.push(format!("set {i}: target basis is not a free basis of a summand"));
        }
        let xrank = rank_of(
            &xs.iter()
                .map(|x| {
                    let p = x.project(e.truncation());
                    let nodes: Vec<Node> = e.level_nodes(e.truncation()).unwrap();
                    nodes.iter().map(|n| p.coeff(n)).collect()
                })
                .collect::<Vec<_>>(),
        );
        if xrank != cert.rank {
            failures.push(format!("set {i}: rank {} but the set has rank {xrank}", cert.rank));
        }
    }
    finish(4, &failures, &format!("60 sets, ranks {ranks:?}"));
}

#[test]
fn criterion_5_branch_dichotomy() {
    let mut failures = Vec::new();
    let full = TreeOnOmega::from_spec(TreeSpec::Full { arity: Some(2) });
    let e = make_ga(&full, 10, HOST_ARITY).unwrap();
    let branches = [
        Branch::periodic(vec![], vec![1]).unwrap(),
        Branch::periodic(vec![2], vec![1, 2]).unwrap(),
    ];
    for b in &branches {
        for depth in 1..=10 {
            match homogeneity_witness(&e, b, depth).unwrap() {
                Homogeneity::Certificate(c) => {
                    let primes: BTreeSet<u64> = c.divisors.iter().map(|(_, p)| *p).collect();
                    let ok = c.divisors.len() == depth
                        && primes.len() == depth
                        && c.divisors.iter().enumerate().all(|(k, (node, p))| {
                            *node == b.prefix(k + 1)
                                && is_prime(*p)
                                && (0..=e.truncation()).all(|n| e.label(&b.prefix(n)).unwrap().contains(*p).unwrap())
                        });
                    if !ok {
                        failures.push(format!("{b}: bad certificate at depth {depth}"));
                    }
                }
                h => failures.push(format!("{b}: depth {depth} gave {h:?}")),
            }
        }
    }
    let wellfounded: Vec<(TreeOnOmega, Branch)> = vec![
        (
            TreeOnOmega::from_spec(TreeSpec::Fan { height: 3 }),
            Branch::periodic(vec![], vec![2]).unwrap(),
        ),
        (
            TreeOnOmega::from_lists(&[&[], &[0], &[0, 0], &[1]]),
            Branch::periodic(vec![], vec![1]).unwrap(),
        ),
        (
            TreeOnOmega::from_spec(TreeSpec::Decreasing { bound: 4 }),
            Branch::periodic(vec![4, 3], vec![1]).unwrap(),
        ),
    ];
    for (a, b) in &wellfounded {
        let e = make_ga(a, 6, HOST_ARITY).unwrap();
        let exit = (1..).find(|&n| {
            let back: Vec<u64> = b.prefix(n).entries().iter().map(|x| x.wrapping_sub(1)).collect();
            b.prefix(n).entries().contains(&0) || !a.contains(&Node::new(back))
        });
        match homogeneity_witness(&e, b, 10).unwrap() {
            Homogeneity::PromiseBroken { level, node } if Some(level) == exit && node == b.prefix(level) => {}
            h => failures.push(format!("{b} over {a:?}: {h:?}, expected exit at {exit:?}")),
        }
    }
    finish(5, &failures, "2 branches at depths 1..=10, 3 well-founded trees");
}

/// The parsed certificate alone: samples lie in the witness set and outside
/// the target, and enumerating the witness set finds no shared prime beyond
/// the listed exceptions.
fn independent_recheck(v: &serde_json::Value) -> Result<(), String> {
    let c = json::obstruction_from_json(v).map_err(|e| e.to_string())?;
    let members = c.witness_set.sample(16).map_err(|e| e.to_string())?;
    if members.len() < 16 {
        return Err("witness set looks finite".into());
    }
    for p in members {
        if c.target_primes.contains(p).unwrap() && !c.exceptions.contains(&p) {
            return Err(format!("{p} is shared but not listed"));
        }
    }
    for &p in &c.sample {
        if !c.witness_set.contains(p).unwrap() || c.target_primes.contains(p).unwrap() {
            return Err(format!("sample prime {p} is not in the excess set"));
        }
    }
    verify_obstruction(&c)
}

#[test]
fn criterion_6_obstructions() {
    let fam = almost_disjoint_family(5).unwrap();
    let fan = || TreeOnOmega::from_spec(TreeSpec::Fan { height: 2 });
    let engines: Vec<Engine> = fam.sets.iter().map(|p| make_gp(p.clone(), fan(), 4, HOST_ARITY).unwrap()).collect();
    let mut failures = Vec::new();
    let mut pairs = 0;
    for i in 0..engines.len() {
        for j in 0..engines.len() {
            if i == j {
                continue;
            }
            pairs += 1;
            let s = surjection_obstruction(&engines[i], &engines[j]);
            let p = product_obstruction(&engines[i], None);
            for (name, cert) in [("surjection", s), ("product", p)] {
                let result = cert
                    .map_err(|e| e.to_string())
                    .and_then(|c| json::obstruction_to_json(&c).map_err(|e| e.to_string()))
                    .map(|v| serde_json::to_string(&v).unwrap())
                    .and_then(|text| serde_json::from_str::<serde_json::Value>(&text).map_err(|e| e.to_string()))
                    .and_then(|v| {
                        independent_recheck(&v)?;
                        let mut tampered = v.clone();
                        let listed = tampered["exceptions"].as_array_mut().unwrap();
                        let extra = if listed.contains(&serde_json::json!(2)) { 3 } else { 2 };
                        listed.push(serde_json::json!(extra));
                        match independent_recheck(&tampered) {
                            Ok(()) => Err("tampered evidence accepted".into()),
                            Err(_) => Ok(()),
                        }
                    });
                if let Err(e) = result {
                    failures.push(format!("{name} ({i}, {j}): {e}"));
                }
            }
        }
    }
    finish(6, &failures, &format!("{pairs} ordered pairs from a family of 5"));
}

#[test]
fn criterion_7_sinfty_encoding() {
    let start = Instant::now();
    let mut rng = suites::rng(7);
    let mut failures = Vec::new();
    let bound = 10_000;
    let engines: Vec<Engine> = (0..4).map(|_| suites::random_engine(&mut rng, 8, 4)).collect();
    let codings: Vec<DomainCoding> = engines.iter().map(|e| DomainCoding::from_engine(e, 4).unwrap()).collect();
    let mut coded = 0;
    for i in 0..100 {
        let k = i % engines.len();
        let (e, c) = (&engines[k], &codings[k]);
        let y = suites::random_limit_element(e, &mut rng, 3);
        let z = suites::random_limit_element(e, &mut rng, 3);
        match verify_embedding(c, &y, &z, bound) {
            Ok(r) if r.passed() => coded += r.coded_points,
            Ok(r) => failures.push(format!("pair {i}: {:?}", &r.mismatches[..1])),
            Err(err) => failures.push(format!("pair {i}: {err}")),
        }
        let py = encode_element(c, &y, bound).unwrap();
        let pz = encode_element(c, &z, bound).unwrap();
        let psum = encode_element(c, &y.add(&z), bound).unwrap();
        let pneg = encode_element(c, &y.neg(), bound).unwrap();
        for x in 0..bound {
            if let Point::Small(v) = pz.apply(x) {
                if v < bound && psum.apply(x) != py.apply(v) {
                    failures.push(format!("pair {i}: composition fails at {x}"));
                }
            }
            if let Point::Small(v) = py.apply(x) {
                if v < bound && pneg.apply(v) != Point::Small(x) {
                    failures.push(format!("pair {i}: inverse fails at {x}"));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(10) {
        failures.push(format!("took {elapsed:?}"));
    }
    finish(7, &failures, &format!("100 pairs at bound {bound}, {coded} coded points, {elapsed:.2?}"));
}

fn naive_members(d: u64, allowed: &[u64]) -> bool {
    naive_factor(d).iter().all(|&(p, e)| e == 1 && allowed.contains(&p))
}

/// `v ∈ ℤ² + Σ c_p y_p` for some `c_p ∈ 0..p`.
fn naive_pontryagin(g: &PontryaginGroup, v: &[Rational; 2]) -> bool {
    fn go(g: &PontryaginGroup, ps: &[u64], v: [Rational; 2]) -> bool {
        let Some((&p, rest)) = ps.split_first() else {
            return v[0].is_integer() && v[1].is_integer();
        };
        let y = g.y(p).unwrap();
        (0..p).any(|c| {
            let c = Rational::from_integer(c.into());
            go(g, rest, [&v[0] - &y[0] * &c, &v[1] - &y[1] * &c])
        })
    }
    go(g, g.primes(), v.clone())
}

#[test]
fn criterion_8_oracles() {
    let mut rng = suites::rng(8);
    let mut failures = Vec::new();
    let small = [2u64, 3, 5, 7, 11, 13];
    let (mut div, mut chars, mut pont) = (0, 0, 0);
    while div < 240 {
        let pair = suites::random_nice_pair(&mut rng, 8);
        let PrimeAssignment::Explicit(assigned) = pair.primes().clone() else { unreachable!() };
        let e = Engine::from_nice_pair(pair, 3, Some(HOST_ARITY));
        let n = rng.gen_range(0..=3);
        let g = e.build_level(n);
        let nodes = e.level_nodes(n).unwrap();
        for _ in 0..10 {
            let mut terms = Vec::new();
            for _ in 0..rng.gen_range(1..=3) {
                let node = nodes.choose(&mut rng).unwrap().clone();
                let label = naive_label(&assigned, &node);
                let mut den = 1u64;
                for &p in &label {
                    if rng.gen_bool(0.3) {
                        den *= p;
                    }
                }
                let num = rng.gen_range(1..=60i64) * if rng.gen_bool(0.5) { 1 } else { -1 };
                terms.push((node, Rational::new(num.into(), den.into())));
            }
            let mut x = LevelElement::zero(n);
            for (node, c) in terms {
                x = x.add(&LevelElement::term(node, c)).unwrap();
            }
            if x.is_zero() {
                continue;
            }
            let member = |y: &LevelElement| {
                y.support().iter().all(|(node, c)| {
                    let label = naive_label(&assigned, node);
                    naive_members(c.denom().to_u64().unwrap(), &label)
                })
            };
            assert!(member(&x));
            let p = *small.choose(&mut rng).unwrap();
            let q = x.scale(&Rational::new(1.into(), p.into()));
            div += 1;
            if g.divisible_by(&x, p).unwrap() != member(&q) {
                failures.push(format!("divisible_by({x}, {p})"));
            }
            let ch = g.characteristic(&x).unwrap();
            for &p in &small {
                let mut k = 0u32;
                let mut y = x.clone();
                loop {
                    let next = y.scale(&Rational::new(1.into(), p.into()));
                    if k > 40 || !member(&next) {
                        break;
                    }
                    y = next;
                    k += 1;
                }
                chars += 1;
                if ch.value(p).unwrap() != aleph_core::arith::Exponent::Finite(k) {
                    failures.push(format!("height of {x} at {p}: {:?} vs {k}", ch.value(p)));
                }
            }
        }
    }
    let groups = [
        PontryaginGroup::seeded(&[2, 3, 5], 1).unwrap(),
        PontryaginGroup::seeded(&[3, 5, 7], 2).unwrap(),
        PontryaginGroup::new(&[5, 7], &[2, 3]).unwrap(),
    ];
    while pont < 300 {
        let g = groups.choose(&mut rng).unwrap();
        let v = if rng.gen_bool(0.5) {
            let mut v = [Rational::from_integer(rng.gen_range(-4..=4).into()), Rational::from_integer(rng.gen_range(-4..=4).into())];
            for &p in g.primes() {
                let c = Rational::from_integer(rng.gen_range(-3..=3).into());
                let y = g.y(p).unwrap();
                v = [&v[0] + &y[0] * &c, &v[1] + &y[1] * &c];
            }
            v
        } else {
            let pool = [1i64, 2, 3, 5, 6, 7, 9, 10, 15, 21, 35, 105];
            let d = *pool.choose(&mut rng).unwrap();
            [
                Rational::new(rng.gen_range(-20..=20).into(), d.into()),
                Rational::new(rng.gen_range(-20..=20).into(), d.into()),
            ]
        };
        pont += 1;
        if g.is_member(&v) != naive_pontryagin(g, &v) {
            failures.push(format!("membership of {v:?} in {:?}", g.primes()));
        }
    }
    finish(
        8,
        &failures,
        &format!("{div} divisibility, {chars} height and {pont} membership instances"),
    );
}

fn naive_tree_distance(a: &BTreeSet<Node>, b: &BTreeSet<Node>) -> Dyadic {
    let top = a.iter().chain(b).map(Node::len).max().unwrap_or(0);
    for n in 0..=top {
        let la: BTreeSet<&Node> = a.iter().filter(|x| x.len() == n).collect();
        let lb: BTreeSet<&Node> = b.iter().filter(|x| x.len() == n).collect();
        if la != lb {
            return Dyadic::InvPow2(n as u32);
        }
    }
    Dyadic::Zero
}

fn naive_perm_distance(p: &PartialPermutation, q: &PartialPermutation) -> Dyadic {
    (0..p.bound().min(q.bound()))
        .find(|&k| p.apply(k) != q.apply(k))
        .map_or(Dyadic::Zero, |k| Dyadic::InvPow2(k as u32))
}

#[test]
fn criterion_9_ultrametric() {
    let mut rng = suites::rng(9);
    let mut failures = Vec::new();
    let trees: Vec<BTreeSet<Node>> = (0..40).map(|_| suites::random_inner_tree(&mut rng, 6, 3)).collect();
    let perms: Vec<PartialPermutation> = (0..40)
        .map(|_| {
            let mut images: Vec<u64> = (0..12).collect();
            let swaps = rng.gen_range(0..3);
            for _ in 0..swaps {
                let (i, j) = (rng.gen_range(4..12), rng.gen_range(4..12));
                images.swap(i, j);
            }
            if rng.gen_bool(0.5) {
                images[..rng.gen_range(1..5)].reverse();
            }
            PartialPermutation::from_small(12, &images).unwrap()
        })
        .collect();
    for t in 0..600 {
        let (i, j, k) = (rng.gen_range(0..40), rng.gen_range(0..40), rng.gen_range(0..40));
        let tr = |x: usize| TreeOnOmega::explicit(trees[x].iter().cloned());
        let d = |x: usize, y: usize| tree_distance(&tr(x), &tr(y), 6).value;
        let (dij, djk, dik) = (d(i, j), d(j, k), d(i, k));
        if dik > dij.max(djk) || dij != d(j, i) || d(i, i) != Dyadic::Zero {
            failures.push(format!("tree triple {t}"));
        }
        if dij != naive_tree_distance(&trees[i], &trees[j]) || (dij == Dyadic::Zero) != (trees[i] == trees[j]) {
            failures.push(format!("tree distance {i} {j}"));
        }
        let s = |x: usize, y: usize| distance_in_sinf(&perms[x], &perms[y]);
        let (sij, sjk, sik) = (s(i, j), s(j, k), s(i, k));
        if sik > sij.max(sjk) || sij != s(j, i) || s(i, i) != Dyadic::Zero {
            failures.push(format!("permutation triple {t}"));
        }
        if sij != naive_perm_distance(&perms[i], &perms[j]) {
            failures.push(format!("permutation distance {i} {j}"));
        }
    }
    finish(9, &failures, "600 triples of trees and of permutations");
}
