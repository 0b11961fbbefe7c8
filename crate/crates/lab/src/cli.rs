//! Command line: argument parsing and the subcommands.

use std::path::{Path, PathBuf};

use aleph_core::arith::{almost_disjoint_family, nth_prime, SetSize};
use aleph_core::engine::{
    homogeneity_witness, make_ga, make_gp, validate_limit, validate_nice_pair, Engine, Homogeneity, Labeling,
    LimitElement,
};
use aleph_core::pathologies::bezout::{bezout_limit_element, build_bezout_tree, max_magnitude, verify_bezout};
use aleph_core::pathologies::mixed::{MixedBounds, MixedElement, MixedSystem};
use aleph_core::pathologies::pontryagin::{gstar_chain, product_group_check, PontryaginGroup, DEFAULT_SEED};
use aleph_core::sinfty::{encode_element, verify_embedding, DomainCoding};
use aleph_core::trees::{validate_tree, wellfounded_check, Node, TreeOnOmega, TreeSpec, WellFounded};
use aleph_core::witnesses::{
    product_obstruction, separability_retraction, surjection_obstruction, torsionless_witness, verify_obstruction,
    ObstructionCertificate, RetractionOptions, WitnessError,
};
use clap::{Args, Parser, Subcommand};
use num_bigint::BigInt;
use num_traits::Zero;
use serde_json::{json, Value};

use crate::json;
use crate::report::{Check, RunReport};
use crate::suites;

#[derive(Parser, Debug)]
#[command(name = "aleph-lab", version, about = "Build and check inverse systems of rank-1 groups")]
pub struct Cli {
    /// Seed for randomized suites.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Also write the report to this file.
    #[arg(long, global = true)]
    pub json_out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    #[arg(long, global = true)]
    pub truncation: Option<usize>,
    /// `first:N` or a comma-separated list.
    #[arg(long, global = true, value_parser = parse_primes)]
    pub primes: Option<PrimeList>,
    /// Number of random instances.
    #[arg(long, global = true)]
    pub count: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimeList(pub Vec<u64>);

pub fn parse_primes(s: &str) -> Result<PrimeList, String> {
    if let Some(n) = s.strip_prefix("first:") {
        let n: usize = n.parse().map_err(|_| format!("bad count in `{s}`"))?;
        return Ok(PrimeList((0..n).map(nth_prime).collect()));
    }
    s.split(',')
        .map(|t| t.trim().parse::<u64>().map_err(|_| format!("bad prime `{t}`")))
        .collect::<Result<_, _>>()
        .map(PrimeList)
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Engines from JSON, or seeded random nice pairs.
    Engine {
        #[command(subcommand)]
        action: EngineAction,
    },
    Witness {
        #[command(subcommand)]
        action: WitnessAction,
    },
    Obstruct {
        #[command(subcommand)]
        action: ObstructAction,
    },
    Bezout {
        #[command(subcommand)]
        action: BezoutAction,
    },
    Pontryagin {
        #[command(subcommand)]
        action: PontryaginAction,
    },
    Mixed {
        #[command(subcommand)]
        action: MixedAction,
    },
    Sinfty {
        #[command(subcommand)]
        action: SinftyAction,
    },
    Reduce {
        #[command(subcommand)]
        action: ReduceAction,
    },
    Family {
        #[command(subcommand)]
        action: FamilyAction,
    },
}

#[derive(Args, Debug, Clone)]
pub struct EngineFile {
    #[arg(long)]
    pub file: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum EngineAction {
    Build(EngineFile),
    Check(EngineFile),
}

#[derive(Subcommand, Debug)]
pub enum WitnessAction {
    Torsionless {
        #[arg(long)]
        engine: Option<PathBuf>,
        #[arg(long)]
        element: Option<PathBuf>,
    },
    Retract {
        #[arg(long)]
        engine: Option<PathBuf>,
        /// A JSON array of limit elements.
        #[arg(long)]
        elements: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        min_level: usize,
    },
}

#[derive(Args, Debug, Clone)]
pub struct FamilyChoice {
    /// Size of the almost-disjoint family.
    #[arg(long, default_value_t = 4)]
    pub family: usize,
    /// Height of the fan used as inner tree.
    #[arg(long, default_value_t = 2)]
    pub height: usize,
}

#[derive(Subcommand, Debug)]
pub enum ObstructAction {
    Surjection {
        #[command(flatten)]
        family: FamilyChoice,
        #[arg(long, default_value_t = 0)]
        source: usize,
        #[arg(long, default_value_t = 1)]
        target: usize,
    },
    Product {
        #[command(flatten)]
        family: FamilyChoice,
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
    /// Re-check a stored certificate.
    Verify {
        #[arg(long)]
        cert: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum BezoutAction {
    Build,
    Verify,
    Limit,
}

#[derive(Subcommand, Debug)]
pub enum PontryaginAction {
    Check,
}

#[derive(Args, Debug, Clone)]
pub struct MixedArgs {
    /// Free summands at level 0.
    #[arg(long, default_value_t = 7)]
    pub base_summands: usize,
}

#[derive(Subcommand, Debug)]
pub enum MixedAction {
    Build(MixedArgs),
    Check(MixedArgs),
}

#[derive(Subcommand, Debug)]
pub enum SinftyAction {
    Encode {
        #[arg(long)]
        engine: PathBuf,
        #[arg(long)]
        element: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        bound: u64,
    },
    Verify {
        #[arg(long)]
        engine: Option<PathBuf>,
        /// A JSON array `[y, z]`.
        #[arg(long)]
        elements: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        bound: u64,
    },
}

#[derive(Subcommand, Debug)]
pub enum ReduceAction {
    FromTree {
        #[arg(long)]
        tree: PathBuf,
        /// A branch `{"stem": [...], "cycle": [...]}` to test for divisibility.
        #[arg(long)]
        branch: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum FamilyAction {
    AlmostDisjoint,
}

const WIDTH: u64 = suites::HOST_ARITY;

/// Input problems become a failed `input` check.
struct Failed;

type Step<T> = Result<T, Failed>;

struct Ctx<'a> {
    cli: &'a Cli,
    report: RunReport,
    inputs: serde_json::Map<String, Value>,
}

impl Ctx<'_> {
    fn read(&mut self, key: &str, path: &Path) -> Step<Value> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return self.input(format!("{}: {e}", path.display())),
        };
        match serde_json::from_str::<Value>(&text) {
            Ok(v) => {
                self.inputs.insert(key.into(), v.clone());
                Ok(v)
            }
            Err(e) => self.input(format!("{}: {e}", path.display())),
        }
    }

    fn input<T>(&mut self, msg: impl Into<String>) -> Step<T> {
        self.report.fail_input(msg);
        Err(Failed)
    }

    fn seed(&mut self) -> Step<u64> {
        match self.cli.seed {
            Some(s) => Ok(s),
            None => self.input("randomized suites need --seed"),
        }
    }

    fn engine(&mut self, path: &Path) -> Step<Engine> {
        let v = self.read("engine", path)?;
        match json::engine_from_json(&v) {
            Ok(e) => Ok(e),
            Err(e) => self.input(e.to_string()),
        }
    }

    fn limit(&mut self, key: &str, path: &Path) -> Step<LimitElement> {
        let v = self.read(key, path)?;
        json::limit_from_json(&v, key).or_else(|e| self.input(e.to_string()))
    }

    fn limits(&mut self, path: &Path) -> Step<Vec<LimitElement>> {
        let v = self.read("elements", path)?;
        let Some(items) = v.as_array() else {
            return self.input("elements must be a JSON array");
        };
        let mut out = Vec::new();
        for (i, item) in items.iter().enumerate() {
            out.push(json::limit_from_json(item, &format!("elements[{i}]")).or_else(|e| self.input(e.to_string()))?);
        }
        Ok(out)
    }

    fn witness_error<T>(&mut self, e: WitnessError) -> Step<T> {
        match e {
            WitnessError::Assertion(msg) => {
                self.report.assertion(msg);
                Err(Failed)
            }
            other => self.input(other.to_string()),
        }
    }

    fn check(&mut self, c: Check) {
        self.report.push(c);
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Engine { action: EngineAction::Build(_) } => "engine build",
        Command::Engine { action: EngineAction::Check(_) } => "engine check",
        Command::Witness { action: WitnessAction::Torsionless { .. } } => "witness torsionless",
        Command::Witness { action: WitnessAction::Retract { .. } } => "witness retract",
        Command::Obstruct { action: ObstructAction::Surjection { .. } } => "obstruct surjection",
        Command::Obstruct { action: ObstructAction::Product { .. } } => "obstruct product",
        Command::Obstruct { action: ObstructAction::Verify { .. } } => "obstruct verify",
        Command::Bezout { action: BezoutAction::Build } => "bezout build",
        Command::Bezout { action: BezoutAction::Verify } => "bezout verify",
        Command::Bezout { action: BezoutAction::Limit } => "bezout limit",
        Command::Pontryagin { .. } => "pontryagin check",
        Command::Mixed { action: MixedAction::Build(_) } => "mixed build",
        Command::Mixed { action: MixedAction::Check(_) } => "mixed check",
        Command::Sinfty { action: SinftyAction::Encode { .. } } => "sinfty encode",
        Command::Sinfty { action: SinftyAction::Verify { .. } } => "sinfty verify",
        Command::Reduce { .. } => "reduce from-tree",
        Command::Family { .. } => "family almost-disjoint",
    }
}

pub fn run(cli: &Cli) -> RunReport {
    let mut ctx = Ctx {
        cli,
        report: RunReport::new(command_name(&cli.command), &Value::Null, cli.seed),
        inputs: serde_json::Map::new(),
    };
    let result = dispatch(&mut ctx);
    let mut report = ctx.report;
    if let Ok(v) = result {
        report.result = v;
    }
    let inputs = json!({
        "args": format!("{:?}", cli.command),
        "depth": cli.depth,
        "truncation": cli.truncation,
        "primes": cli.primes.as_ref().map(|p| &p.0),
        "count": cli.count,
        "files": Value::Object(ctx.inputs),
    });
    report.inputs_digest = crate::report::digest(&inputs);
    report
}

fn dispatch(ctx: &mut Ctx) -> Step<Value> {
    match &ctx.cli.command {
        Command::Engine { action } => match action {
            EngineAction::Build(f) => engine_build(ctx, f),
            EngineAction::Check(f) => engine_check(ctx, f),
        },
        Command::Witness { action } => match action {
            WitnessAction::Torsionless { engine, element } => torsionless(ctx, engine.as_deref(), element.as_deref()),
            WitnessAction::Retract { engine, elements, min_level } => {
                retract(ctx, engine.as_deref(), elements.as_deref(), *min_level)
            }
        },
        Command::Obstruct { action } => match action {
            ObstructAction::Surjection { family, source, target } => obstruct_surjection(ctx, family, *source, *target),
            ObstructAction::Product { family, index } => obstruct_product(ctx, family, *index),
            ObstructAction::Verify { cert } => {
                let v = ctx.read("certificate", cert)?;
                let c = json::obstruction_from_json(&v).or_else(|e| ctx.input(e.to_string()))?;
                record_verification(ctx, "verify", &c);
                Ok(v)
            }
        },
        Command::Bezout { action } => bezout(ctx, action),
        Command::Pontryagin { action: PontryaginAction::Check } => pontryagin(ctx),
        Command::Mixed { action } => match action {
            MixedAction::Build(a) => mixed(ctx, a, false),
            MixedAction::Check(a) => mixed(ctx, a, true),
        },
        Command::Sinfty { action } => match action {
            SinftyAction::Encode { engine, element, bound } => sinfty_encode(ctx, engine, element, *bound),
            SinftyAction::Verify { engine, elements, bound } => {
                sinfty_verify(ctx, engine.as_deref(), elements.as_deref(), *bound)
            }
        },
        Command::Reduce { action: ReduceAction::FromTree { tree, branch } } => reduce(ctx, tree, branch.as_deref()),
        Command::Family { action: FamilyAction::AlmostDisjoint } => family(ctx),
    }
}

fn validate_engine(ctx: &mut Ctx, e: &Engine) -> bool {
    let sample: Vec<Node> = (0..=e.truncation().min(3))
        .flat_map(|n| e.host().level(n, Some(e.width().unwrap_or(WIDTH))).unwrap_or_default())
        .collect();
    let mut ok = true;
    let mut trees = vec![("host", e.host().clone())];
    if let Some(inner) = e.inner() {
        trees.push(("inner", inner.clone()));
    }
    for (name, t) in trees {
        let empty = matches!(&t, TreeOnOmega::Explicit(s) if s.is_empty());
        let r = if empty && name == "inner" { Ok(()) } else { validate_tree(&t, &sample) };
        ok &= r.is_ok();
        ctx.check(Check::from_bool(
            format!("{name} tree"),
            r.is_ok(),
            json!(r.err().map(|e| e.to_string())),
            || json::tree_to_json(&t).unwrap_or(Value::Null),
        ));
    }
    if let Labeling::Nice(pair) = e.labeling() {
        if ok {
            let r = validate_nice_pair(pair, e.truncation().min(3), e.width().unwrap_or(WIDTH));
            ok &= r.is_ok();
            ctx.check(Check::from_bool(
                "nice pair",
                r.is_ok(),
                json!(r.err().map(|e| e.to_string())),
                || json::engine_to_json(e).unwrap_or(Value::Null),
            ));
        }
    }
    ok
}

fn level_summary(e: &Engine) -> Value {
    let levels: Vec<Value> = (0..=e.truncation())
        .map(|n| {
            let nodes = e.level_nodes(n).unwrap_or_default();
            let infinite: Vec<Value> = nodes
                .iter()
                .filter(|x| !e.label_is_finite(x).unwrap_or(true))
                .map(json::node_to_json)
                .collect();
            json!({ "level": n, "nodes": nodes.len(), "infinite_labels": infinite })
        })
        .collect();
    json!({ "levels": levels })
}

fn engine_build(ctx: &mut Ctx, f: &EngineFile) -> Step<Value> {
    let Some(path) = &f.file else {
        return ctx.input("engine build needs --file");
    };
    let e = ctx.engine(path)?;
    if !validate_engine(ctx, &e) {
        return Err(Failed);
    }
    Ok(level_summary(&e))
}

fn bonding_check(ctx: &mut Ctx, name: String, e: &Engine) {
    let levels = e.truncation();
    let conditions = e.check_conditions(levels, 4);
    ctx.check(Check::from_bool(
        format!("{name} conditions"),
        conditions.is_ok(),
        json!(conditions.as_ref().err().map(|x| x.to_string())),
        || json::engine_to_json(e).unwrap_or(Value::Null),
    ));
    match e.check_bonding_laws(levels, 2) {
        Ok(r) => ctx.check(Check::from_bool(
            format!("{name} bonding"),
            r.passed(),
            json!({
                "composition_checks": r.composition_checks,
                "onto_checks": r.onto_checks,
                "failures": r.failures.iter().take(5).collect::<Vec<_>>(),
            }),
            || json::engine_to_json(e).unwrap_or(Value::Null),
        )),
        Err(err) => ctx.check(Check::fail(
            format!("{name} bonding"),
            json!(err.to_string()),
            json::engine_to_json(e).unwrap_or(Value::Null),
        )),
    }
}

fn engine_check(ctx: &mut Ctx, f: &EngineFile) -> Step<Value> {
    if let Some(path) = &f.file {
        let mut e = ctx.engine(path)?;
        if let Some(t) = ctx.cli.truncation {
            e = rebuild(&e, t);
        }
        if !validate_engine(ctx, &e) {
            return Err(Failed);
        }
        bonding_check(ctx, "engine".into(), &e);
        return Ok(level_summary(&e));
    }
    let seed = ctx.seed()?;
    let mut rng = suites::rng(seed);
    let count = ctx.cli.count.unwrap_or(50);
    let truncation = ctx.cli.truncation.unwrap_or(6);
    for i in 0..count {
        let e = suites::random_engine(&mut rng, 8, truncation);
        bonding_check(ctx, format!("pair {i}"), &e);
    }
    Ok(json!({ "pairs": count, "truncation": truncation }))
}

fn rebuild(e: &Engine, truncation: usize) -> Engine {
    match e.labeling() {
        Labeling::Nice(pair) => Engine::from_nice_pair(pair.clone(), truncation, e.width()),
        Labeling::Table(t) => Engine::from_table(e.host().clone(), t.clone(), truncation),
    }
}

fn torsionless_one(ctx: &mut Ctx, name: String, e: &Engine, y: &LimitElement) {
    let repro = || json!({ "engine": json::engine_to_json(e).unwrap_or(Value::Null), "element": json::limit_to_json(y) });
    match torsionless_witness(e, y, None) {
        Ok(h) => {
            let image = h.apply(y);
            let ok = image == h.value && !image.is_zero() && e.label_is_finite(&h.node).unwrap_or(false);
            ctx.check(Check::from_bool(name, ok, json::hom_to_json(&h), repro));
        }
        Err(WitnessError::Assertion(m)) => {
            let r = repro();
            ctx.report.assertion(format!("{name}: {m}"));
            ctx.report.checks.last_mut().expect("just pushed").reproducer = Some(r);
        }
        Err(err) => ctx.check(Check::fail(name, json!(err.to_string()), repro())),
    }
}

fn torsionless(ctx: &mut Ctx, engine: Option<&Path>, element: Option<&Path>) -> Step<Value> {
    if let (Some(ep), Some(yp)) = (engine, element) {
        let e = ctx.engine(ep)?;
        let y = ctx.limit("element", yp)?;
        if let Err(err) = validate_limit(&e, &y) {
            return ctx.input(err.to_string());
        }
        if y.is_zero() {
            return ctx.input("the element is 0");
        }
        torsionless_one(ctx, "descriptor".into(), &e, &y);
        let h = torsionless_witness(&e, &y, None).ok();
        return Ok(h.map(|h| json::hom_to_json(&h)).unwrap_or(Value::Null));
    }
    if engine.is_some() || element.is_some() {
        return ctx.input("give both --engine and --element, or neither");
    }
    let seed = ctx.seed()?;
    let mut rng = suites::rng(seed);
    let count = ctx.cli.count.unwrap_or(100);
    let truncation = ctx.cli.truncation.unwrap_or(6);
    for i in 0..count {
        let e = if i % 4 == 3 {
            suites::fan_engine(&mut rng, truncation)
        } else {
            suites::random_engine(&mut rng, 8, truncation)
        };
        let y = suites::random_limit_element(&e, &mut rng, 3);
        torsionless_one(ctx, format!("element {i}"), &e, &y);
    }
    Ok(json!({ "elements": count }))
}

fn retract_one(ctx: &mut Ctx, name: String, e: &Engine, xs: &[LimitElement], min_level: usize, probes: &[LimitElement]) {
    let repro = || {
        json!({
            "engine": json::engine_to_json(e).unwrap_or(Value::Null),
            "elements": xs.iter().map(json::limit_to_json).collect::<Vec<_>>(),
        })
    };
    let cert = match separability_retraction(e, xs, RetractionOptions { min_level }, None) {
        Ok(c) => c,
        Err(WitnessError::Assertion(m)) => {
            ctx.report.assertion(format!("{name}: {m}"));
            ctx.report.checks.last_mut().expect("just pushed").reproducer = Some(repro());
            return;
        }
        Err(err) => {
            ctx.check(Check::fail(name, json!(err.to_string()), repro()));
            return;
        }
    };
    let fixes = xs.iter().all(|x| cert.apply(x).as_ref() == Ok(x));
    let idempotent = probes.iter().all(|z| match cert.apply(z) {
        Ok(r) => cert.apply(&r).as_ref() == Ok(&r),
        Err(_) => false,
    });
    let detail = json!({
        "fixes_elements": fixes,
        "idempotent_on_probes": idempotent,
        "probes": probes.len(),
        "certificate": json::retraction_to_json(&cert),
    });
    ctx.check(Check::from_bool(name, fixes && idempotent, detail, repro));
}

fn retract(ctx: &mut Ctx, engine: Option<&Path>, elements: Option<&Path>, min_level: usize) -> Step<Value> {
    let seed = ctx.cli.seed;
    if let (Some(ep), Some(xp)) = (engine, elements) {
        let e = ctx.engine(ep)?;
        let xs = ctx.limits(xp)?;
        for x in &xs {
            if let Err(err) = validate_limit(&e, x) {
                return ctx.input(err.to_string());
            }
        }
        let mut rng = suites::rng(seed.unwrap_or(0));
        let probes: Vec<LimitElement> = (0..20).map(|_| suites::random_limit_element(&e, &mut rng, 3)).collect();
        retract_one(ctx, "retraction".into(), &e, &xs, min_level, &probes);
        let cert = separability_retraction(&e, &xs, RetractionOptions { min_level }, None)
            .or_else(|err| ctx.witness_error(err))?;
        return Ok(json::retraction_to_json(&cert));
    }
    if engine.is_some() || elements.is_some() {
        return ctx.input("give both --engine and --elements, or neither");
    }
    let seed = ctx.seed()?;
    let mut rng = suites::rng(seed);
    let count = ctx.cli.count.unwrap_or(50);
    let truncation = ctx.cli.truncation.unwrap_or(6);
    for i in 0..count {
        let e = suites::random_engine(&mut rng, 8, truncation);
        let k = rand::Rng::gen_range(&mut rng, 1..=4);
        let xs: Vec<LimitElement> = (0..k).map(|_| suites::random_limit_element(&e, &mut rng, 3)).collect();
        let probes: Vec<LimitElement> = (0..20).map(|_| suites::random_limit_element(&e, &mut rng, 3)).collect();
        retract_one(ctx, format!("set {i}"), &e, &xs, min_level, &probes);
    }
    Ok(json!({ "sets": count }))
}

fn gp_engines(ctx: &mut Ctx, f: &FamilyChoice, indices: &[usize]) -> Step<Vec<Engine>> {
    let fam = almost_disjoint_family(f.family).or_else(|e| ctx.input(e.to_string()))?;
    let truncation = ctx.cli.truncation.unwrap_or(4);
    let mut out = Vec::new();
    for &i in indices {
        let Some(p) = fam.sets.get(i) else {
            return ctx.input(format!("index {i} outside a family of {}", f.family));
        };
        let s = TreeOnOmega::from_spec(TreeSpec::Fan { height: f.height });
        out.push(make_gp(p.clone(), s, truncation, WIDTH).or_else(|e| ctx.input(e.to_string()))?);
    }
    Ok(out)
}

/// Serialize, parse back and verify from the parsed copy only.
fn record_verification(ctx: &mut Ctx, name: &str, cert: &ObstructionCertificate) -> Value {
    let v = match json::obstruction_to_json(cert) {
        Ok(v) => v,
        Err(e) => {
            ctx.check(Check::fail(name, json!(e.to_string()), Value::Null));
            return Value::Null;
        }
    };
    let text = serde_json::to_string(&v).expect("values serialize");
    let parsed = serde_json::from_str::<Value>(&text)
        .map_err(|e| e.to_string())
        .and_then(|p| json::obstruction_from_json(&p).map_err(|e| e.to_string()))
        .and_then(|c| verify_obstruction(&c));
    ctx.check(Check::from_bool(name, parsed.is_ok(), json!(parsed.err()), || v.clone()));
    v
}

fn obstruct_surjection(ctx: &mut Ctx, f: &FamilyChoice, source: usize, target: usize) -> Step<Value> {
    let es = gp_engines(ctx, f, &[source, target])?;
    let cert = surjection_obstruction(&es[0], &es[1]).or_else(|e| ctx.witness_error(e))?;
    Ok(record_verification(ctx, "surjection certificate", &cert))
}

fn obstruct_product(ctx: &mut Ctx, f: &FamilyChoice, index: usize) -> Step<Value> {
    let es = gp_engines(ctx, f, &[index])?;
    let cert = product_obstruction(&es[0], None).or_else(|e| ctx.witness_error(e))?;
    Ok(record_verification(ctx, "product certificate", &cert))
}

fn bezout(ctx: &mut Ctx, action: &BezoutAction) -> Step<Value> {
    let primes = ctx.cli.primes.clone().map(|p| p.0).unwrap_or_else(|| (0..13).map(nth_prime).collect());
    let depth = ctx.cli.depth.unwrap_or(8);
    let tree = build_bezout_tree(&primes, depth).or_else(|e| ctx.input(e.to_string()))?;
    ctx.check(Check::pass("build", json!({ "nodes": tree.nodes.len(), "max_magnitude": max_magnitude(&tree).to_string() })));
    match action {
        BezoutAction::Build => Ok(json::bezout_to_json(&tree)),
        BezoutAction::Verify => {
            let r = verify_bezout(&tree);
            ctx.check(Check::from_bool("clauses", r.is_ok(), json!(r.as_ref().err().map(|e| e.to_string())), || {
                json!({ "primes": primes, "depth": depth })
            }));
            Ok(json!({ "depth": depth, "primes_used": tree.used }))
        }
        BezoutAction::Limit => {
            let r = bezout_limit_element(&tree).or_else(|e| ctx.input(e.to_string()))?;
            for l in &r.levels {
                ctx.check(Check::from_bool(
                    format!("level {}", l.level),
                    l.coherent && l.member && l.divisible,
                    json!({
                        "coherent": l.coherent,
                        "member": l.member,
                        "divisible": l.divisible,
                        "divisor": l.divisor.to_string(),
                    }),
                    || json!({ "primes": primes, "depth": l.level }),
                ));
            }
            Ok(json!({ "levels": r.levels.len() }))
        }
    }
}

fn pontryagin_group(ctx: &mut Ctx, default_len: usize) -> Step<PontryaginGroup> {
    let primes = ctx.cli.primes.clone().map(|p| p.0).unwrap_or_else(|| (1..=default_len).map(nth_prime).collect());
    PontryaginGroup::seeded(&primes, ctx.cli.seed.unwrap_or(DEFAULT_SEED)).or_else(|e| ctx.input(e.to_string()))
}

fn pontryagin(ctx: &mut Ctx) -> Step<Value> {
    let g = pontryagin_group(ctx, 5)?;
    let levels = ctx.cli.depth.unwrap_or(g.primes().len()).min(g.primes().len());
    let chain = gstar_chain(&g, levels).or_else(|e| ctx.input(e.to_string()))?;
    for l in &chain.levels {
        let r = l.verify();
        ctx.check(Check::from_bool(format!("basis of level {}", l.n), r.is_ok(), json!(r.err()), || {
            json!({ "primes": g.primes(), "level": l.n })
        }));
    }
    ctx.check(Check::from_bool(
        "chain increases",
        chain.increasing,
        json!({ "increasing": chain.increasing, "decreasing": chain.decreasing }),
        || json!({ "primes": g.primes() }),
    ));
    for (p, idx) in g.primes().iter().zip(&chain.indices) {
        ctx.check(Check::from_bool(
            format!("index at {p}"),
            *idx == aleph_core::arith::Rational::from_integer((*p).into()),
            json!(idx.to_string()),
            || json!({ "primes": g.primes() }),
        ));
    }
    let twin = PontryaginGroup::seeded(g.primes(), ctx.cli.seed.unwrap_or(DEFAULT_SEED) ^ 1)
        .or_else(|e| ctx.input(e.to_string()))?;
    let mut samples = vec![vec![PontryaginGroup::x(0), PontryaginGroup::x(1)]];
    for &p in g.primes() {
        samples.push(vec![g.y(p).expect("listed"), twin.y(p).expect("listed")]);
    }
    let r = product_group_check(&[g.clone(), twin], &samples).or_else(|e| ctx.input(e.to_string()))?;
    ctx.check(Check::from_bool(
        "product samples have type 0",
        r.passed(),
        json!(r.samples.iter().map(|s| s.type_zero).collect::<Vec<_>>()),
        || json!({ "primes": g.primes() }),
    ));
    Ok(json!({
        "coefficients": g.primes().iter().map(|&p| json!([p, g.coefficient(p)])).collect::<Vec<_>>(),
        "bases": chain.levels.iter().map(|l| l.basis.iter().map(json::vec2_to_json).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "indices": chain.indices.iter().map(|i| i.to_string()).collect::<Vec<_>>(),
    }))
}

fn mixed(ctx: &mut Ctx, a: &MixedArgs, check: bool) -> Step<Value> {
    let g = pontryagin_group(ctx, 3)?;
    let levels = ctx.cli.depth.unwrap_or(g.primes().len()).min(g.primes().len());
    let sys = match MixedSystem::build(&g, MixedBounds { levels, base_summands: a.base_summands }) {
        Ok(s) => s,
        Err(e) => return ctx.input(e.to_string()),
    };
    let summary = json!({
        "levels": levels,
        "summands": sys.summands,
        "zero_parts": sys.zero_parts.iter()
            .map(|z| z.basis.iter().map(json::vec2_to_json).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    });
    if !check {
        return Ok(summary);
    }
    let r = sys.check();
    ctx.check(Check::from_bool(
        "system",
        r.passed(),
        json!({
            "clause_checks": r.clause_checks,
            "onto_checks": r.onto_checks,
            "composition_checks": r.composition_checks,
            "failures": r.failures.iter().take(5).collect::<Vec<_>>(),
        }),
        || json!({ "primes": g.primes(), "levels": levels, "base_summands": a.base_summands }),
    ));
    let e = MixedElement::summand(levels, 2).scale(&BigInt::from(6));
    match sys.case_one_projection(&e) {
        Ok(Some(c)) => ctx.check(Check::pass(
            "free coordinate witness",
            json!({ "level": c.level, "summand": c.summand, "value": c.value.to_string() }),
        )),
        other => ctx.check(Check::fail("free coordinate witness", json!(format!("{other:?}")), Value::Null)),
    }
    Ok(summary)
}

fn coding(ctx: &mut Ctx, e: &Engine) -> Step<DomainCoding> {
    let depth = ctx.cli.depth.unwrap_or(e.truncation()).min(e.truncation());
    DomainCoding::from_engine(e, depth).or_else(|err| ctx.input(err.to_string()))
}

fn sinfty_encode(ctx: &mut Ctx, engine: &Path, element: &Path, bound: u64) -> Step<Value> {
    let e = ctx.engine(engine)?;
    let y = ctx.limit("element", element)?;
    if let Err(err) = validate_limit(&e, &y) {
        return ctx.input(err.to_string());
    }
    let c = coding(ctx, &e)?;
    let p = encode_element(&c, &y, bound).or_else(|err| ctx.input(err.to_string()))?;
    ctx.check(Check::pass("encoded", json!({ "moved": p.moved().len() })));
    Ok(json::permutation_to_json(&p))
}

fn embedding_one(ctx: &mut Ctx, name: String, c: &DomainCoding, e: &Engine, y: &LimitElement, z: &LimitElement, bound: u64) {
    let repro = || {
        json!({
            "engine": json::engine_to_json(e).unwrap_or(Value::Null),
            "elements": [json::limit_to_json(y), json::limit_to_json(z)],
            "bound": bound,
        })
    };
    match verify_embedding(c, y, z, bound) {
        Ok(r) => ctx.check(Check::from_bool(
            name,
            r.passed(),
            json!({
                "points": r.points_checked,
                "coded_points": r.coded_points,
                "mismatches": r.mismatches.iter().take(5).collect::<Vec<_>>(),
            }),
            repro,
        )),
        Err(err) => ctx.check(Check::fail(name, json!(err.to_string()), repro())),
    }
}

fn sinfty_verify(ctx: &mut Ctx, engine: Option<&Path>, elements: Option<&Path>, bound: u64) -> Step<Value> {
    if let (Some(ep), Some(xp)) = (engine, elements) {
        let e = ctx.engine(ep)?;
        let xs = ctx.limits(xp)?;
        if xs.len() != 2 {
            return ctx.input("expected two elements");
        }
        for x in &xs {
            if let Err(err) = validate_limit(&e, x) {
                return ctx.input(err.to_string());
            }
        }
        let c = coding(ctx, &e)?;
        embedding_one(ctx, "pair".into(), &c, &e, &xs[0], &xs[1], bound);
        return Ok(json!({ "bound": bound }));
    }
    if engine.is_some() || elements.is_some() {
        return ctx.input("give both --engine and --elements, or neither");
    }
    let seed = ctx.seed()?;
    let mut rng = suites::rng(seed);
    let count = ctx.cli.count.unwrap_or(100);
    let truncation = ctx.cli.truncation.unwrap_or(4);
    let engines: Vec<Engine> = (0..4).map(|_| suites::random_engine(&mut rng, 8, truncation)).collect();
    let codings: Vec<DomainCoding> = engines
        .iter()
        .map(|e| coding(ctx, e))
        .collect::<Step<_>>()?;
    for i in 0..count {
        let k = i % engines.len();
        let y = suites::random_limit_element(&engines[k], &mut rng, 3);
        let z = suites::random_limit_element(&engines[k], &mut rng, 3);
        embedding_one(ctx, format!("pair {i}"), &codings[k], &engines[k], &y, &z, bound);
    }
    Ok(json!({ "pairs": count, "bound": bound }))
}

fn reduce(ctx: &mut Ctx, tree: &Path, branch: Option<&Path>) -> Step<Value> {
    let v = ctx.read("tree", tree)?;
    let a = json::tree_from_json(&v, "tree").or_else(|e| ctx.input(e.to_string()))?;
    let sample: Vec<Node> = (0..=3).flat_map(|n| a.level(n, Some(WIDTH)).unwrap_or_default()).collect();
    if let Err(e) = validate_tree(&a, &sample) {
        return ctx.input(e.to_string());
    }
    let truncation = ctx.cli.truncation.unwrap_or(6);
    let e = make_ga(&a, truncation, WIDTH).or_else(|err| ctx.input(err.to_string()))?;
    let depth = ctx.cli.depth.unwrap_or(10);
    let wf = wellfounded_check(&a, depth, None).or_else(|err| ctx.input(err.to_string()))?;
    let well_founded = match &wf {
        WellFounded::BranchFound(chain) => json!({ "branch_through": json::node_to_json(chain.last().expect("nonempty chain")) }),
        WellFounded::NoBranchUpTo { depth, .. } => json!({ "no_branch_up_to": depth }),
        WellFounded::Certified { edges_checked } => json!({ "certified_edges": edges_checked }),
    };
    let mut out = json!({
        "engine": json::engine_to_json(&e).unwrap_or(Value::Null),
        "well_founded": well_founded,
    });
    if let Some(bp) = branch {
        let bv = ctx.read("branch", bp)?;
        let b = json::branch_from_json(&bv, "branch").or_else(|err| ctx.input(err.to_string()))?;
        let shifted = aleph_core::trees::Branch::periodic(
            b.stem().entries().iter().map(|x| x + 1).collect(),
            b.cycle().iter().map(|x| x + 1).collect(),
        )
        .or_else(|err| ctx.input(err.to_string()))?;
        let h = homogeneity_witness(&e, &shifted, depth).or_else(|err| ctx.input(err.to_string()))?;
        let detail = match &h {
            Homogeneity::Certificate(c) => json!({
                "divisors": c.divisors.iter().map(|(n, p)| json!([json::node_to_json(n), p])).collect::<Vec<_>>(),
            }),
            Homogeneity::PromiseBroken { level, node } => {
                json!({ "promise_broken": { "level": level, "node": json::node_to_json(node) } })
            }
        };
        ctx.check(Check::pass("homogeneity", detail.clone()));
        out["homogeneity"] = detail;
    }
    Ok(out)
}

fn family(ctx: &mut Ctx) -> Step<Value> {
    let count = ctx.cli.count.unwrap_or(4);
    let fam = almost_disjoint_family(count).or_else(|e| ctx.input(e.to_string()))?;
    for (i, j, v) in &fam.intersections {
        let again = fam.sets[*i].intersection(&fam.sets[*j]);
        ctx.check(Check::from_bool(
            format!("sets {i} and {j}"),
            again == SetSize::Finite(v.clone()),
            json!(v),
            || json!({ "count": count }),
        ));
    }
    let sets: Vec<Value> = fam
        .sets
        .iter()
        .map(|s| json!({ "set": json::primeset_to_json(s).unwrap_or(Value::Null), "first": s.sample(5).unwrap_or_default() }))
        .collect();
    Ok(json!({ "sets": sets }))
}
