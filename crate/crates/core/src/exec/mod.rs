//! Executors and their shared configuration and counters.
//!
//! [`Vm`] runs the code buffer produced by the versioning engine in every
//! mode. [`irinterp`] walks the IR directly and [`reference`] the AST; both
//! serve as oracles in tests.

pub mod code;
pub mod irinterp;
pub mod reference;
pub mod vm;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

pub use code::CodeBuffer;
pub use vm::Vm;

use crate::bbv::MaxVers;
use crate::runtime::{Heap, RuntimeError, TypeTag, Value};

/// Calls fail with a stack overflow once this many activations are live.
pub const MAX_CALL_DEPTH: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    /// No versioning: every block gets only its generic version.
    Baseline,
    /// Tests decided by the representation analysis are removed before
    /// compiling without versioning.
    Analysis,
    BbvLazy,
    BbvEager,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Baseline, Mode::Analysis, Mode::BbvLazy, Mode::BbvEager];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Analysis => "analysis",
            Mode::BbvLazy => "bbv-lazy",
            Mode::BbvEager => "bbv-eager",
        }
    }

    /// Whether the version limit affects this mode.
    pub fn uses_limit(self) -> bool {
        matches!(self, Mode::BbvLazy | Mode::BbvEager)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Mode, String> {
        Mode::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| format!("unknown mode `{s}`"))
    }
}

/// Parses a version limit: a non-negative integer or `inf`.
pub fn parse_limit(s: &str) -> Result<MaxVers, String> {
    match s {
        "inf" | "∞" => Ok(None),
        _ => s.parse::<u32>().map(Some).map_err(|_| format!("invalid version limit `{s}`")),
    }
}

pub fn limit_name(l: MaxVers) -> String {
    match l {
        Some(n) => n.to_string(),
        None => "inf".to_string(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Config {
    pub mode: Mode,
    pub maxvers: MaxVers,
    /// Maximum number of ops to execute; `None` is unlimited.
    pub fuel: Option<u64>,
}

impl Config {
    pub fn new(mode: Mode, maxvers: MaxVers) -> Config {
        Config { mode, maxvers, fuel: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    /// Executed type tests, indexed by [`TypeTag::index`].
    pub tests_by_kind: [u64; 7],
    /// Executed ops, counting each phi copy as one op.
    pub ops_executed: u64,
    /// Code size: ops, phi copies and stubs emitted.
    pub ops_emitted: u64,
    pub compiler_invocations: u64,
    pub stub_hits: u64,
    /// Number of blocks having a given number of compiled versions.
    pub versions_histogram: BTreeMap<usize, usize>,
}

impl Counters {
    pub fn tests_total(&self) -> u64 {
        self.tests_by_kind.iter().sum()
    }

    pub fn tests(&self, tag: TypeTag) -> u64 {
        self.tests_by_kind[tag.index()]
    }

    /// Event counts accumulated since `before` (the histogram is kept).
    pub fn since(&self, before: &Counters) -> Counters {
        let mut d = self.clone();
        for (a, b) in d.tests_by_kind.iter_mut().zip(before.tests_by_kind) {
            *a -= b;
        }
        d.ops_executed -= before.ops_executed;
        d.ops_emitted -= before.ops_emitted;
        d.compiler_invocations -= before.compiler_invocations;
        d.stub_hits -= before.stub_hits;
        d
    }
}

/// Text written by `print`: strings verbatim, other values rendered.
pub fn display(heap: &Heap, v: Value) -> String {
    match v {
        Value::Str(s) => heap.str(s).to_string(),
        other => heap.render(other),
    }
}

/// Outcome of a program run, comparable across executors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Observation {
    /// Rendered result, or the error code.
    pub result: Result<String, RuntimeError>,
    pub output: Vec<String>,
}
