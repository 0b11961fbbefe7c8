//! Run reports: a canonical JSON document per invocation.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const SCHEMA: &str = "aleph-lab/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    /// Bad input or a failed check.
    Fail,
    /// An internal consistency assertion fired.
    Assertion,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::Fail => 2,
            Outcome::Assertion => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: Value,
    /// Inputs that reproduce a failure on their own.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reproducer: Option<Value>,
}

impl Check {
    pub fn pass(name: impl Into<String>, detail: Value) -> Self {
        Check {
            name: name.into(),
            passed: true,
            detail,
            reproducer: None,
        }
    }

    pub fn fail(name: impl Into<String>, detail: Value, reproducer: Value) -> Self {
        Check {
            name: name.into(),
            passed: false,
            detail,
            reproducer: Some(reproducer),
        }
    }

    pub fn from_bool(name: impl Into<String>, ok: bool, detail: Value, reproducer: impl FnOnce() -> Value) -> Self {
        if ok {
            Check::pass(name, detail)
        } else {
            Check::fail(name, detail, reproducer())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub command: String,
    pub inputs_digest: String,
    pub seed: Option<u64>,
    pub outcome: Outcome,
    pub checks: Vec<Check>,
    pub result: Value,
}

pub fn digest(inputs: &Value) -> String {
    let bytes = serde_json::to_vec(inputs).expect("values serialize");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunReport {
    pub fn new(command: impl Into<String>, inputs: &Value, seed: Option<u64>) -> Self {
        RunReport {
            schema: SCHEMA,
            command: command.into(),
            inputs_digest: digest(inputs),
            seed,
            outcome: Outcome::Pass,
            checks: Vec::new(),
            result: Value::Null,
        }
    }

    pub fn push(&mut self, c: Check) {
        if !c.passed && self.outcome == Outcome::Pass {
            self.outcome = Outcome::Fail;
        }
        self.checks.push(c);
    }

    pub fn fail_input(&mut self, msg: impl Into<String>) {
        self.push(Check::fail("input", Value::String(msg.into()), Value::Null));
    }

    pub fn assertion(&mut self, msg: impl Into<String>) {
        self.checks.push(Check::fail("assertion", Value::String(msg.into()), Value::Null));
        self.outcome = Outcome::Assertion;
    }

    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Pass
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}
