//! Runs one program in every configuration and compares each run with the
//! reference interpreter.

use std::rc::Rc;

use bbv_core::bbv::MaxVers;
use bbv_core::exec::reference::Reference;
use bbv_core::exec::{limit_name, Config, Counters, Mode, Observation, Vm};
use bbv_core::frontend::{compile_source, parse};
use bbv_core::runtime::RuntimeError;

use crate::suite::DEFAULT_LIMITS;

/// Op budget for the reference run of a program under test.
pub const REFERENCE_FUEL: u64 = 5_000_000;

#[derive(Clone, Debug)]
pub struct Run {
    pub mode: Mode,
    pub maxvers: MaxVers,
    pub observation: Observation,
    pub counters: Counters,
    pub max_specialized: usize,
    pub layout: Result<(), String>,
}

impl Run {
    pub fn label(&self) -> String {
        format!("{} maxvers={}", self.mode, limit_name(self.maxvers))
    }
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub expected: Observation,
    pub runs: Vec<Run>,
}

impl Comparison {
    /// Descriptions of runs whose result or output differ from the
    /// reference.
    pub fn mismatches(&self) -> Vec<String> {
        self.runs
            .iter()
            .filter(|r| r.observation != self.expected)
            .map(|r| format!("{}: got {:?}, expected {:?}", r.label(), r.observation, self.expected))
            .collect()
    }

    pub fn baseline_emitted(&self) -> u64 {
        self.runs.iter().find(|r| r.mode == Mode::Baseline).map(|r| r.counters.ops_emitted).unwrap_or(0)
    }
}

/// Every (mode, limit) pair of the experiment grid.
pub fn grid() -> Vec<(Mode, MaxVers)> {
    let mut out = vec![(Mode::Baseline, Some(0)), (Mode::Analysis, Some(0))];
    for m in [Mode::BbvLazy, Mode::BbvEager] {
        out.extend(DEFAULT_LIMITS.iter().map(|l| (m, *l)));
    }
    out
}

/// Runs `src` (main, then `entry`) in the reference interpreter and in
/// every configuration of [`grid`]. Returns `None` when the reference run
/// exceeds its budget or the program does not compile.
pub fn compare(src: &str, entry: Option<&str>) -> Option<Comparison> {
    let ast = parse(src).ok()?;
    let program = Rc::new(compile_source(src).ok()?);
    let mut reference = Reference::new(&ast);
    reference.set_fuel(REFERENCE_FUEL);
    let expected = reference.observe(entry, &[]);
    if expected.result == Err(RuntimeError::OutOfFuel) {
        return None;
    }
    let runs = grid()
        .into_iter()
        .map(|(mode, maxvers)| {
            let mut vm = Vm::new(program.clone(), Config { mode, maxvers, fuel: Some(REFERENCE_FUEL * 20) });
            let observation = vm.observe(entry, &[]);
            Run {
                mode,
                maxvers,
                observation,
                counters: vm.counters(),
                max_specialized: vm.max_specialized_versions(),
                layout: if mode == Mode::BbvEager { Ok(()) } else { vm.check_layout() },
            }
        })
        .collect();
    Some(Comparison { expected, runs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_covers_modes_and_limits() {
        let g = grid();
        assert_eq!(g.len(), 12);
        assert!(g.contains(&(Mode::BbvEager, None)));
    }

    #[test]
    fn corpus_fib_agrees() {
        let src = crate::corpus::find("recursive_fib").unwrap().source;
        let c = compare(&src, Some("bench")).unwrap();
        assert_eq!(c.expected.result.as_deref(), Ok("987"));
        assert!(c.mismatches().is_empty(), "{:?}", c.mismatches());
    }
}
