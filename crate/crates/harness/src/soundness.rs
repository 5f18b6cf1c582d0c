//! Checks the representation analysis against observed executions.
//!
//! The IR interpreter reports every traversed edge; each value live across
//! the edge must carry a tag in the set the analysis inferred for it there.

use std::fmt;

use bbv_core::analysis::{analyze, AnalysisResult, TypeSet};
use bbv_core::exec::irinterp::{EdgeHook, IrInterp};
use bbv_core::ir::{liveness, BlockId, FuncId, LivenessInfo, Operand, Program, ValueId};
use bbv_core::runtime::{tag_of, Heap, RuntimeError, TypeTag, Value};

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub func: String,
    pub from: BlockId,
    pub to: BlockId,
    /// `None` when the edge itself was deemed unreachable.
    pub value: Option<(ValueId, TypeTag, TypeSet)>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value {
            Some((v, tag, set)) => {
                write!(f, "{}: {} -> {}: {v} has tag {tag}, inferred {set:?}", self.func, self.from, self.to)
            }
            None => write!(f, "{}: {} -> {}: edge inferred unreachable", self.func, self.from, self.to),
        }
    }
}

pub struct SoundnessChecker<'p> {
    program: &'p Program,
    analyses: Vec<AnalysisResult>,
    live: Vec<LivenessInfo>,
    /// Number of (value, edge) observations checked.
    pub checked: u64,
    pub violations: Vec<Violation>,
}

impl<'p> SoundnessChecker<'p> {
    pub fn new(program: &'p Program) -> Self {
        SoundnessChecker {
            program,
            analyses: program.functions.iter().map(analyze).collect(),
            live: program.functions.iter().map(liveness).collect(),
            checked: 0,
            violations: vec![],
        }
    }
}

impl EdgeHook for SoundnessChecker<'_> {
    fn on_edge(&mut self, func: FuncId, from: BlockId, arm: usize, to: BlockId, values: &[Option<Value>], _: &Heap) {
        let f = self.program.function(func);
        let Some(edge) = self.analyses[func.index()].edge(from, arm) else {
            self.violations.push(Violation { func: f.name.to_string(), from, to, value: None });
            return;
        };
        let block = f.block(to);
        let phi_outs: Vec<ValueId> = block.phis.iter().map(|p| p.out).collect();
        let incoming = block.phis.iter().filter_map(|p| match p.incoming_from(from) {
            Some(Operand::Val(v)) => Some(*v),
            _ => None,
        });
        let observed = self.live[func.index()].live_in(to).iter().copied().filter(|v| !phi_outs.contains(v));
        for v in observed.chain(incoming) {
            let Some(x) = values[v.index()] else { continue };
            let tag = tag_of(x);
            let set = edge.env[v.index()];
            self.checked += 1;
            if !set.contains(tag) {
                self.violations.push(Violation { func: f.name.to_string(), from, to, value: Some((v, tag, set)) });
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SoundnessReport {
    pub outcome: Result<String, RuntimeError>,
    pub checked: u64,
    pub violations: Vec<Violation>,
}

/// Runs main and then `entry`, if given, under the checker.
pub fn check_program(program: &Program, entry: Option<&str>, fuel: Option<u64>) -> SoundnessReport {
    let mut interp = IrInterp::with_hook(program, SoundnessChecker::new(program));
    if let Some(n) = fuel {
        interp.set_fuel(n);
    }
    let obs = interp.observe(entry, &[]);
    SoundnessReport { outcome: obs.result, checked: interp.hook.checked, violations: interp.hook.violations }
}
