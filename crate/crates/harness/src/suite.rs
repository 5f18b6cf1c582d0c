use std::rc::Rc;

use bbv_core::bbv::MaxVers;
use bbv_core::exec::{Config, Counters, Mode, Vm};
use bbv_core::frontend::compile_source;
use bbv_core::ir::Program;
use bbv_core::runtime::fnv1a;
use thiserror::Error;

use crate::corpus::Benchmark;

pub const DEFAULT_LIMITS: [MaxVers; 5] = [Some(0), Some(1), Some(2), Some(5), None];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub modes: Vec<Mode>,
    pub limits: Vec<MaxVers>,
    pub warmup: u32,
    pub iters: u32,
    /// Global function called for each iteration.
    pub entry: String,
    /// Per-run op budget.
    pub fuel: Option<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            modes: Mode::ALL.to_vec(),
            limits: DEFAULT_LIMITS.to_vec(),
            warmup: 1,
            iters: 1,
            entry: "bench".to_string(),
            fuel: Some(2_000_000_000),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("lazy modes need at least one warmup iteration")]
    NoWarmup,
    #[error("at least one timed iteration is required")]
    NoIterations,
    #[error("no version limits given")]
    NoLimits,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.warmup == 0 && self.effective_modes().iter().any(|m| *m != Mode::BbvEager) {
            return Err(ConfigError::NoWarmup);
        }
        if self.iters == 0 {
            return Err(ConfigError::NoIterations);
        }
        if self.limits.is_empty() {
            return Err(ConfigError::NoLimits);
        }
        Ok(())
    }

    /// Requested modes with baseline first, always present.
    fn effective_modes(&self) -> Vec<Mode> {
        let mut modes = vec![Mode::Baseline];
        for m in &self.modes {
            if !modes.contains(m) {
                modes.push(*m);
            }
        }
        modes
    }
}

/// One (benchmark, mode, limit) measurement.
///
/// Tests, executed ops and stub hits cover the timed iterations only.
/// Emitted ops, compiler invocations and the version histogram cover the
/// whole run, warm-up included.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub benchmark: String,
    pub mode: Mode,
    pub maxvers: MaxVers,
    /// Rendered result of the last iteration.
    pub result: Option<String>,
    pub result_hash: String,
    /// Compile error message or runtime error code.
    pub error: Option<String>,
    pub counters: Counters,
    /// Non-generic versions of the most versioned block.
    pub max_specialized: usize,
    /// Layout check outcome for lazy runs.
    pub layout: Result<(), String>,
    pub ratio_tests: Option<f64>,
    pub ratio_ops_emitted: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StatsReport {
    pub config: ExperimentConfig,
    pub rows: Vec<Row>,
}

impl StatsReport {
    pub fn row(&self, benchmark: &str, mode: Mode, maxvers: MaxVers) -> Option<&Row> {
        self.rows.iter().find(|r| r.benchmark == benchmark && r.mode == mode && r.maxvers == maxvers)
    }

    pub fn benchmarks(&self) -> Vec<&str> {
        let mut names: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !names.contains(&r.benchmark.as_str()) {
                names.push(&r.benchmark);
            }
        }
        names
    }
}

pub fn hash_result(result: &Result<String, String>) -> String {
    let text = match result {
        Ok(s) => format!("ok:{s}"),
        Err(e) => format!("error:{e}"),
    };
    format!("{:016x}", fnv1a(text.as_bytes()))
}

fn ratio(x: u64, base: u64) -> Option<f64> {
    match (x, base) {
        (0, 0) => Some(1.0),
        (_, 0) => None,
        _ => Some(x as f64 / base as f64),
    }
}

/// Runs one benchmark program under one configuration.
pub fn measure(program: &Rc<Program>, cfg: &ExperimentConfig, mode: Mode, maxvers: MaxVers) -> Row {
    let mut vm = Vm::new(program.clone(), Config { mode, maxvers, fuel: cfg.fuel });
    let mut outcome = vm.run_main().map(|_| ());
    let mut before = vm.counters();
    let mut last = None;
    if outcome.is_ok() {
        outcome = (|| {
            for _ in 0..cfg.warmup {
                vm.call_global(&cfg.entry, &[])?;
            }
            before = vm.counters();
            for _ in 0..cfg.iters {
                last = Some(vm.call_global(&cfg.entry, &[])?);
            }
            Ok(())
        })();
    }
    let after = vm.counters();
    let mut counters = after.since(&before);
    counters.ops_emitted = after.ops_emitted;
    counters.compiler_invocations = after.compiler_invocations;
    let result = match outcome {
        Ok(()) => Ok(vm.heap().render(last.expect("at least one iteration"))),
        Err(e) => Err(e.code().to_string()),
    };
    let layout = if mode == Mode::BbvEager { Ok(()) } else { vm.check_layout() };
    Row {
        benchmark: String::new(),
        mode,
        maxvers,
        result_hash: hash_result(&result),
        error: result.as_ref().err().cloned(),
        result: result.ok(),
        counters,
        max_specialized: vm.max_specialized_versions(),
        layout,
        ratio_tests: None,
        ratio_ops_emitted: None,
    }
}

fn failed_row(benchmark: &str, mode: Mode, maxvers: MaxVers, error: String) -> Row {
    let result = Err(error.clone());
    Row {
        benchmark: benchmark.to_string(),
        mode,
        maxvers,
        result: None,
        result_hash: hash_result(&result),
        error: Some(error),
        counters: Counters::default(),
        max_specialized: 0,
        layout: Ok(()),
        ratio_tests: None,
        ratio_ops_emitted: None,
    }
}

/// Runs the cross product of benchmarks, modes and limits.
///
/// Modes that ignore the version limit run once per benchmark and their
/// row is repeated under every limit. A benchmark that fails to compile
/// gets error rows and the suite continues.
pub fn run_suite(benchmarks: &[Benchmark], cfg: &ExperimentConfig) -> Result<StatsReport, ConfigError> {
    cfg.validate()?;
    let modes = cfg.effective_modes();
    let mut rows = Vec::new();
    for b in benchmarks {
        let program = compile_source(&b.source).map(Rc::new);
        let mut bench_rows: Vec<Row> = Vec::new();
        for &mode in &modes {
            let mut shared: Option<Row> = None;
            for &limit in &cfg.limits {
                let mut row = match (&program, &shared) {
                    (Err(e), _) => failed_row(&b.name, mode, limit, e.to_string()),
                    (Ok(_), Some(r)) => Row { maxvers: limit, ..r.clone() },
                    (Ok(p), None) => measure(p, cfg, mode, limit),
                };
                row.benchmark = b.name.clone();
                if !mode.uses_limit() && shared.is_none() {
                    shared = Some(row.clone());
                }
                bench_rows.push(row);
            }
        }
        let base: Vec<(u64, u64)> = bench_rows
            .iter()
            .filter(|r| r.mode == Mode::Baseline)
            .map(|r| (r.counters.tests_total(), r.counters.ops_emitted))
            .collect();
        let (bt, be) = base[0];
        for r in &mut bench_rows {
            if r.error.is_none() {
                r.ratio_tests = ratio(r.counters.tests_total(), bt);
                r.ratio_ops_emitted = ratio(r.counters.ops_emitted, be);
            }
        }
        rows.extend(bench_rows);
    }
    Ok(StatsReport { config: cfg.clone(), rows })
}
