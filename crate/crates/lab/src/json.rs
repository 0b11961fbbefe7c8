//! JSON forms of trees, prime sets, elements, engines and certificates.

use std::collections::BTreeMap;

use aleph_core::arith::{BranchCode, Characteristic, Exponent, LeqFailure, PrimeSet, Rational};
use aleph_core::engine::{explicit_nice_pair, Engine, Labeling, LimitElement, NicePair, PrimeAssignment};
use aleph_core::level::LevelElement;
use aleph_core::pathologies::bezout::BezoutTree;
use aleph_core::perm::{PartialPermutation, Point};
use aleph_core::trees::{Branch, Node, TreeOnOmega, TreeSpec};
use aleph_core::witnesses::{HomDescriptor, ObstructionCertificate, ObstructionKind, RetractionCertificate};
use num_bigint::BigInt;
use serde_json::{json, Map, Value};

#[derive(Debug, thiserror::Error)]
pub enum JsonError {
    #[error("{path}: {msg}")]
    Shape { path: String, msg: String },
    #[error("cannot write {0} as JSON")]
    Unserializable(String),
}

pub type Result<T> = std::result::Result<T, JsonError>;

fn shape(path: &str, msg: impl Into<String>) -> JsonError {
    JsonError::Shape {
        path: path.into(),
        msg: msg.into(),
    }
}

fn field<'a>(v: &'a Value, key: &str, path: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| shape(path, format!("missing field `{key}`")))
}

fn as_u64(v: &Value, path: &str) -> Result<u64> {
    v.as_u64().ok_or_else(|| shape(path, "expected a natural number"))
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| shape(path, "expected an array"))
}

fn u64_list(v: &Value, path: &str) -> Result<Vec<u64>> {
    as_array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| as_u64(x, &format!("{path}[{i}]")))
        .collect()
}

pub fn rational_to_json(q: &Rational) -> Value {
    Value::String(q.to_string())
}

pub fn rational_from_json(v: &Value, path: &str) -> Result<Rational> {
    if let Some(i) = v.as_i64() {
        return Ok(Rational::from_integer(i.into()));
    }
    let s = v.as_str().ok_or_else(|| shape(path, "expected a rational string"))?;
    let bad = || shape(path, format!("bad rational `{s}`"));
    match s.split_once('/') {
        None => Ok(Rational::from_integer(s.trim().parse::<BigInt>().map_err(|_| bad())?)),
        Some((a, b)) => {
            let a: BigInt = a.trim().parse().map_err(|_| bad())?;
            let b: BigInt = b.trim().parse().map_err(|_| bad())?;
            if b == BigInt::from(0) {
                return Err(bad());
            }
            Ok(Rational::new(a, b))
        }
    }
}

pub fn bigint_to_json(n: &BigInt) -> Value {
    Value::String(n.to_string())
}

pub fn node_to_json(n: &Node) -> Value {
    json!(n.entries())
}

pub fn node_from_json(v: &Value, path: &str) -> Result<Node> {
    Ok(Node::new(u64_list(v, path)?))
}

pub fn spec_to_json(s: &TreeSpec) -> Value {
    match s {
        TreeSpec::Explicit(nodes) => json!({ "explicit": nodes.iter().map(node_to_json).collect::<Vec<_>>() }),
        TreeSpec::Full { arity } => json!({ "full": { "arity": arity } }),
        TreeSpec::Fan { height } => json!({ "fan": { "height": height } }),
        TreeSpec::Decreasing { bound } => json!({ "decreasing": { "bound": bound } }),
        TreeSpec::Shifted(inner) => json!({ "shifted": spec_to_json(inner) }),
    }
}

pub fn tree_to_json(t: &TreeOnOmega) -> Result<Value> {
    match t {
        TreeOnOmega::Explicit(s) => Ok(json!({ "explicit": s.iter().map(node_to_json).collect::<Vec<_>>() })),
        TreeOnOmega::Lazy(_) => t
            .spec()
            .map(|s| spec_to_json(&s))
            .ok_or_else(|| JsonError::Unserializable(format!("{t:?}"))),
    }
}

fn spec_from_json(v: &Value, path: &str) -> Result<TreeSpec> {
    let obj = v.as_object().ok_or_else(|| shape(path, "expected a tree object"))?;
    let (kind, body) = obj.iter().next().ok_or_else(|| shape(path, "empty tree object"))?;
    let sub = format!("{path}.{kind}");
    Ok(match kind.as_str() {
        "explicit" => TreeSpec::Explicit(
            as_array(body, &sub)?
                .iter()
                .enumerate()
                .map(|(i, n)| node_from_json(n, &format!("{sub}[{i}]")))
                .collect::<Result<_>>()?,
        ),
        "full" => TreeSpec::Full {
            arity: body.get("arity").and_then(Value::as_u64),
        },
        "fan" => TreeSpec::Fan {
            height: as_u64(field(body, "height", &sub)?, &sub)? as usize,
        },
        "decreasing" => TreeSpec::Decreasing {
            bound: as_u64(field(body, "bound", &sub)?, &sub)?,
        },
        "shifted" => TreeSpec::Shifted(Box::new(spec_from_json(body, &sub)?)),
        other => return Err(shape(path, format!("unknown tree kind `{other}`"))),
    })
}

/// Explicit node lists are kept as given, so that malformed trees reach the
/// validators.
pub fn tree_from_json(v: &Value, path: &str) -> Result<TreeOnOmega> {
    match spec_from_json(v, path)? {
        TreeSpec::Explicit(nodes) => Ok(TreeOnOmega::explicit(nodes)),
        spec => Ok(TreeOnOmega::from_spec(spec)),
    }
}

fn bits(v: &[bool]) -> String {
    v.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn primeset_to_json(p: &PrimeSet) -> Result<Value> {
    Ok(match p {
        PrimeSet::Finite(v) => json!({ "finite": v }),
        PrimeSet::Branch(c) => json!({ "branch": { "prefix": bits(c.prefix_bits()), "period": bits(c.period_bits()) } }),
        PrimeSet::Progression { modulus: 1, .. } => json!("all"),
        PrimeSet::Progression { modulus, residue } => {
            json!({ "progression": { "modulus": modulus, "residue": residue } })
        }
        other => return Err(JsonError::Unserializable(other.describe())),
    })
}

pub fn primeset_from_json(v: &Value, path: &str) -> Result<PrimeSet> {
    if v.as_str() == Some("all") {
        return Ok(PrimeSet::all_primes());
    }
    let obj = v.as_object().ok_or_else(|| shape(path, "expected a prime set"))?;
    let (kind, body) = obj.iter().next().ok_or_else(|| shape(path, "empty prime set"))?;
    let sub = format!("{path}.{kind}");
    let arith = |e: aleph_core::arith::ArithError| shape(&sub, e.to_string());
    match kind.as_str() {
        "finite" => PrimeSet::finite(u64_list(body, &sub)?).map_err(arith),
        "branch" => {
            let text = |k: &str| -> Result<&str> {
                field(body, k, &sub)?
                    .as_str()
                    .ok_or_else(|| shape(&sub, format!("`{k}` must be a bit string")))
            };
            Ok(PrimeSet::branch(BranchCode::parse(text("prefix")?, text("period")?).map_err(arith)?))
        }
        "progression" => PrimeSet::progression(
            as_u64(field(body, "modulus", &sub)?, &sub)?,
            as_u64(field(body, "residue", &sub)?, &sub)?,
        )
        .map_err(arith),
        other => Err(shape(path, format!("unknown prime set kind `{other}`"))),
    }
}

pub fn branch_to_json(b: &Branch) -> Value {
    json!({ "stem": b.stem().entries(), "cycle": b.cycle() })
}

pub fn branch_from_json(v: &Value, path: &str) -> Result<Branch> {
    let stem = u64_list(field(v, "stem", path)?, path)?;
    let cycle = match v.get("cycle") {
        Some(c) => u64_list(c, path)?,
        None => vec![0],
    };
    Branch::periodic(stem, cycle).map_err(|e| shape(path, e.to_string()))
}

pub fn limit_to_json(y: &LimitElement) -> Value {
    Value::Array(
        y.terms()
            .iter()
            .map(|(b, c)| json!({ "branch": branch_to_json(b), "coeff": rational_to_json(c) }))
            .collect(),
    )
}

pub fn limit_from_json(v: &Value, path: &str) -> Result<LimitElement> {
    let terms = as_array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let p = format!("{path}[{i}]");
            Ok((
                branch_from_json(field(t, "branch", &p)?, &p)?,
                rational_from_json(field(t, "coeff", &p)?, &p)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LimitElement::new(terms))
}

pub fn level_element_to_json(e: &LevelElement) -> Value {
    json!({
        "level": e.level(),
        "terms": e.support().iter()
            .map(|(n, c)| json!({ "node": node_to_json(n), "coeff": rational_to_json(c) }))
            .collect::<Vec<_>>(),
    })
}

pub fn level_element_from_json(v: &Value, path: &str) -> Result<LevelElement> {
    let level = as_u64(field(v, "level", path)?, path)? as usize;
    let terms = as_array(field(v, "terms", path)?, path)?
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let p = format!("{path}.terms[{i}]");
            Ok((
                node_from_json(field(t, "node", &p)?, &p)?,
                rational_from_json(field(t, "coeff", &p)?, &p)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    LevelElement::from_terms(level, terms).map_err(|e| shape(path, e.to_string()))
}

pub fn engine_to_json(e: &Engine) -> Result<Value> {
    let mut m = Map::new();
    m.insert("host".into(), tree_to_json(e.host())?);
    m.insert("truncation".into(), json!(e.truncation()));
    m.insert("width".into(), json!(e.width()));
    match e.labeling() {
        Labeling::Nice(pair) => {
            m.insert("inner".into(), tree_to_json(pair.inner())?);
            m.insert(
                "primes".into(),
                match pair.primes() {
                    PrimeAssignment::Explicit(map) => Value::Array(
                        map.iter()
                            .map(|(n, p)| json!({ "node": node_to_json(n), "prime": p }))
                            .collect(),
                    ),
                    PrimeAssignment::Enumerated { source } => json!({ "enumerated": primeset_to_json(source)? }),
                },
            );
        }
        Labeling::Table(t) => {
            m.insert(
                "table".into(),
                Value::Array(
                    t.iter()
                        .map(|(n, l)| Ok(json!({ "node": node_to_json(n), "label": primeset_to_json(l)? })))
                        .collect::<Result<_>>()?,
                ),
            );
        }
    }
    Ok(Value::Object(m))
}

pub fn nice_pair_from_json(v: &Value, path: &str) -> Result<std::sync::Arc<NicePair>> {
    let host = match v.get("host") {
        Some(h) => tree_from_json(h, &format!("{path}.host"))?,
        None => TreeOnOmega::full(),
    };
    let inner = tree_from_json(field(v, "inner", path)?, &format!("{path}.inner"))?;
    let primes = field(v, "primes", path)?;
    if let Some(src) = primes.get("enumerated") {
        let source = primeset_from_json(src, &format!("{path}.primes.enumerated"))?;
        return Ok(NicePair::new(host, inner, PrimeAssignment::Enumerated { source }));
    }
    let list = as_array(primes, &format!("{path}.primes"))?
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let p = format!("{path}.primes[{i}]");
            Ok((node_from_json(field(e, "node", &p)?, &p)?, as_u64(field(e, "prime", &p)?, &p)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(explicit_nice_pair(host, inner, &list))
}

pub fn engine_from_json(v: &Value) -> Result<Engine> {
    let truncation = as_u64(field(v, "truncation", "engine")?, "engine.truncation")? as usize;
    let width = v.get("width").and_then(Value::as_u64);
    if let Some(table) = v.get("table") {
        let host = tree_from_json(field(v, "host", "engine")?, "engine.host")?;
        let mut labels = BTreeMap::new();
        for (i, e) in as_array(table, "engine.table")?.iter().enumerate() {
            let p = format!("engine.table[{i}]");
            labels.insert(
                node_from_json(field(e, "node", &p)?, &p)?,
                primeset_from_json(field(e, "label", &p)?, &p)?,
            );
        }
        return Ok(Engine::from_table(host, labels, truncation));
    }
    Ok(Engine::from_nice_pair(nice_pair_from_json(v, "engine")?, truncation, width))
}

fn exponent_to_json(e: &Exponent) -> Value {
    match e {
        Exponent::Finite(k) => json!(k),
        Exponent::Infinite => json!("inf"),
    }
}

pub fn characteristic_to_json(c: &Characteristic) -> Result<Value> {
    Ok(json!({
        "exceptional": c.exceptional.iter()
            .map(|(p, e)| json!([p, exponent_to_json(e)]))
            .collect::<Vec<_>>(),
        "support": primeset_to_json(&c.support)?,
        "support_exponent": exponent_to_json(&c.support_exponent),
    }))
}

pub fn hom_to_json(h: &HomDescriptor) -> Value {
    json!({
        "level": h.level,
        "node": node_to_json(&h.node),
        "value": rational_to_json(&h.value),
        "label": h.label,
        "integer_value": bigint_to_json(&h.integer_value()),
    })
}

pub fn retraction_to_json(c: &RetractionCertificate) -> Value {
    json!({
        "level": c.level,
        "rank": c.rank,
        "nodes": c.nodes.iter().map(node_to_json).collect::<Vec<_>>(),
        "scales": c.scales.iter().map(bigint_to_json).collect::<Vec<_>>(),
        "basis": c.basis.iter().map(limit_to_json).collect::<Vec<_>>(),
        "target_basis": c.target_basis.iter().map(level_element_to_json).collect::<Vec<_>>(),
        "transcript": c.transcript,
    })
}

fn kind_name(k: ObstructionKind) -> &'static str {
    match k {
        ObstructionKind::Surjection => "surjection",
        ObstructionKind::Product => "product",
    }
}

pub fn obstruction_to_json(c: &ObstructionCertificate) -> Result<Value> {
    let failure = match &c.failure {
        LeqFailure::InfiniteExcess { within, excluding } => json!({
            "infinite_excess": { "within": primeset_to_json(within)?, "excluding": primeset_to_json(excluding)? }
        }),
        LeqFailure::InfiniteExponentAt(p) => json!({ "infinite_exponent_at": p }),
    };
    Ok(json!({
        "kind": kind_name(c.kind),
        "level": c.level,
        "node": node_to_json(&c.node),
        "witness_set": primeset_to_json(&c.witness_set)?,
        "target_primes": primeset_to_json(&c.target_primes)?,
        "exceptions": c.exceptions,
        "sample": c.sample,
        "failure": failure,
    }))
}

pub fn obstruction_from_json(v: &Value) -> Result<ObstructionCertificate> {
    let p = "certificate";
    let kind = match field(v, "kind", p)?.as_str() {
        Some("surjection") => ObstructionKind::Surjection,
        Some("product") => ObstructionKind::Product,
        _ => return Err(shape(p, "unknown obstruction kind")),
    };
    let f = field(v, "failure", p)?;
    let failure = if let Some(x) = f.get("infinite_excess") {
        LeqFailure::InfiniteExcess {
            within: primeset_from_json(field(x, "within", p)?, "failure.within")?,
            excluding: primeset_from_json(field(x, "excluding", p)?, "failure.excluding")?,
        }
    } else {
        LeqFailure::InfiniteExponentAt(as_u64(field(f, "infinite_exponent_at", p)?, "failure")?)
    };
    Ok(ObstructionCertificate {
        kind,
        level: as_u64(field(v, "level", p)?, "level")? as usize,
        node: node_from_json(field(v, "node", p)?, "node")?,
        witness_set: primeset_from_json(field(v, "witness_set", p)?, "witness_set")?,
        target_primes: primeset_from_json(field(v, "target_primes", p)?, "target_primes")?,
        exceptions: u64_list(field(v, "exceptions", p)?, "exceptions")?,
        sample: u64_list(field(v, "sample", p)?, "sample")?,
        failure,
    })
}

pub fn bezout_to_json(t: &BezoutTree) -> Value {
    json!({
        "depth": t.depth,
        "primes_used": t.used,
        "nodes": t.nodes.iter().map(|(n, r)| json!({
            "node": node_to_json(n),
            "prime": r.prime,
            "value": bigint_to_json(&r.value),
            "divisors": r.divisors.iter().collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    })
}

pub fn vec2_to_json(v: &[Rational; 2]) -> Value {
    json!([rational_to_json(&v[0]), rational_to_json(&v[1])])
}

pub fn vec2_from_json(v: &Value, path: &str) -> Result<[Rational; 2]> {
    let a = as_array(v, path)?;
    if a.len() != 2 {
        return Err(shape(path, "expected two coordinates"));
    }
    Ok([rational_from_json(&a[0], path)?, rational_from_json(&a[1], path)?])
}

pub fn point_to_json(p: &Point) -> Value {
    match p {
        Point::Small(v) => json!(v),
        Point::Power(pp) => json!({ "sort": pp.sort, "exponent": pp.exponent.to_string() }),
    }
}

pub fn permutation_to_json(p: &PartialPermutation) -> Value {
    json!({
        "bound": p.bound(),
        "moved": p.moved().iter().map(|(k, v)| json!([k, point_to_json(v)])).collect::<Vec<_>>(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use aleph_core::arith::almost_disjoint_family;

    #[test]
    fn round_trips() {
        let fam = almost_disjoint_family(3).unwrap();
        for s in fam.sets.iter().chain([&PrimeSet::all_primes(), &PrimeSet::finite([2, 7]).unwrap()]) {
            assert_eq!(&primeset_from_json(&primeset_to_json(s).unwrap(), "p").unwrap(), s);
        }
        let y = LimitElement::new([
            (Branch::periodic(vec![1, 2], vec![0, 1]).unwrap(), Rational::new(3.into(), 2.into())),
            (Branch::zero_tail(Node::new(vec![1])), Rational::from_integer((-4).into())),
        ]);
        assert_eq!(limit_from_json(&limit_to_json(&y), "y").unwrap(), y);
        let t = TreeOnOmega::from_spec(TreeSpec::Shifted(Box::new(TreeSpec::Fan { height: 2 })));
        let back = tree_from_json(&tree_to_json(&t).unwrap(), "t").unwrap();
        assert_eq!(back.spec(), t.spec());
        assert!(rational_from_json(&json!("1/0"), "q").is_err());
        assert_eq!(rational_from_json(&json!(-3), "q").unwrap(), Rational::from_integer((-3).into()));
    }
}
