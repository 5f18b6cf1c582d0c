//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and fails if any criterion fails.

use std::collections::BTreeMap;
use std::rc::Rc;

use bbv_core::bbv::MaxVers;
use bbv_core::exec::{limit_name, Config, Counters, Mode, Vm};
use bbv_core::frontend::compile_source;
use bbv_core::runtime::{TypeTag, Value};
use bbv_harness::check::{compare, Comparison};
use bbv_harness::corpus;
use bbv_harness::randprog::generate;
use bbv_harness::soundness::check_program;
use bbv_harness::suite::{run_suite, ExperimentConfig, Row, StatsReport, DEFAULT_LIMITS};

const RANDOM_PROGRAMS: u64 = 1000;

struct Outcome {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

struct Fixture {
    report: StatsReport,
    random: Vec<(u64, Option<Comparison>)>,
}

fn vm_for(name: &str, mode: Mode, maxvers: MaxVers) -> Vm {
    let program = Rc::new(compile_source(&corpus::find(name).unwrap().source).unwrap());
    let mut vm = Vm::new(program, Config::new(mode, maxvers));
    vm.run_main().unwrap();
    vm
}

/// Counters of one call after `warm` identical calls.
fn per_call(vm: &mut Vm, f: &str, args: &[Value], warm: usize) -> (Value, Counters) {
    for _ in 0..warm {
        vm.call_global(f, args).unwrap();
    }
    let before = vm.counters();
    let v = vm.call_global(f, args).unwrap();
    (v, vm.counters().since(&before))
}

fn sum_walkthrough() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for limit in [Some(2), Some(5), None] {
        let mut vm = vm_for("sum", Mode::BbvLazy, limit);
        let (v, c) = per_call(&mut vm, "sum", &[Value::Int(500)], 1);
        let good = v == Value::Int(124750) && c.tests_total() == 1 && c.tests(TypeTag::Int32) == 1;
        let settled = c.stub_hits == 0 && c.compiler_invocations == 0;
        ok &= good && settled;
        notes.push(format!("lazy/{}: {} tests", limit_name(limit), c.tests_total()));
    }
    let mut vm = vm_for("sum", Mode::Baseline, Some(0));
    let (v, c) = per_call(&mut vm, "sum", &[Value::Int(500)], 1);
    ok &= v == Value::Int(124750) && c.tests_total() >= 2500;
    notes.push(format!("baseline: {} tests", c.tests_total()));
    verdict(ok, notes.join(", "))
}

fn bits_in_byte(report: &StatsReport) -> Outcome {
    let mut lazy = vm_for("bits_in_byte", Mode::BbvLazy, Some(5));
    let mut analysis = vm_for("bits_in_byte", Mode::Analysis, Some(0));
    let mut ok = true;
    let (mut lazy_max, mut ratio_min) = (0, u64::MAX);
    for y in 0..256 {
        let arg = [Value::Int(y)];
        let (a, lc) = per_call(&mut lazy, "bitsinbyte", &arg, 0);
        let (b, ac) = per_call(&mut analysis, "bitsinbyte", &arg, 0);
        ok &= a == Value::Int(y.count_ones() as i32) && a == b;
        ok &= lc.tests_total() == 1 && lc.tests(TypeTag::Int32) == 1;
        lazy_max = lazy_max.max(lc.tests_total());
        ratio_min = ratio_min.min(ac.tests_total() / lc.tests_total().max(1));
    }
    ok &= ratio_min >= 8;
    let lazy5 = report.row("bits_in_byte", Mode::BbvLazy, Some(5)).unwrap().ratio_tests.unwrap();
    let an = report.row("bits_in_byte", Mode::Analysis, Some(5)).unwrap().ratio_tests.unwrap();
    ok &= lazy5 < an;
    verdict(
        ok,
        format!("lazy <= {lazy_max} test/call, analysis >= {ratio_min}x lazy per call, suite ratios lazy5 {lazy5:.3} < analysis {an:.3}"),
    )
}

fn globals_benchmark(report: &StatsReport) -> Outcome {
    let mut ok = true;
    let mut seen = Vec::new();
    for mode in [Mode::Analysis, Mode::BbvLazy] {
        for l in DEFAULT_LIMITS {
            let r = report.row("globals_bitwise_and", mode, l).unwrap().ratio_tests;
            ok &= r == Some(1.0);
            seen.push(r.unwrap_or(f64::NAN));
        }
    }
    verdict(ok, format!("ratios {seen:?}"))
}

fn tests_of(report: &StatsReport, b: &str, m: Mode, l: MaxVers) -> u64 {
    report.row(b, m, l).unwrap().counters.tests_total()
}

fn dominance(report: &StatsReport) -> Outcome {
    let mut bad = Vec::new();
    for b in report.benchmarks() {
        let lazy = tests_of(report, b, Mode::BbvLazy, Some(5));
        let an = tests_of(report, b, Mode::Analysis, Some(5));
        let base = tests_of(report, b, Mode::Baseline, Some(5));
        if !(lazy <= an && an <= base) {
            bad.push(format!("{b}: {lazy} / {an} / {base}"));
        }
    }
    verdict(bad.is_empty(), if bad.is_empty() { "lazy5 <= analysis <= baseline everywhere".into() } else { bad.join("; ") })
}

fn limit_sweep(report: &StatsReport) -> Outcome {
    let mut bad = Vec::new();
    for b in report.benchmarks() {
        let seq: Vec<u64> = DEFAULT_LIMITS.iter().map(|l| tests_of(report, b, Mode::BbvLazy, *l)).collect();
        if seq.windows(2).any(|w| w[1] > w[0]) {
            bad.push(format!("{b}: {seq:?}"));
        }
    }
    verdict(bad.is_empty(), if bad.is_empty() { "non-increasing on every benchmark".into() } else { bad.join("; ") })
}

fn find_run(c: &Comparison, m: Mode, l: MaxVers) -> &bbv_harness::check::Run {
    c.runs.iter().find(|r| r.mode == m && r.maxvers == l).unwrap()
}

fn disabled_mode(fx: &Fixture) -> Outcome {
    let mut bad = Vec::new();
    for b in fx.report.benchmarks() {
        let base = fx.report.row(b, Mode::Baseline, Some(0)).unwrap();
        let lazy = fx.report.row(b, Mode::BbvLazy, Some(0)).unwrap();
        if base.counters != lazy.counters {
            bad.push(b.to_string());
        }
    }
    for (seed, c) in &fx.random {
        let Some(c) = c else { continue };
        if find_run(c, Mode::Baseline, Some(0)).counters != find_run(c, Mode::BbvLazy, Some(0)).counters {
            bad.push(format!("seed {seed}"));
        }
    }
    verdict(bad.is_empty(), if bad.is_empty() { "identical counters on corpus and random programs".into() } else { bad.join(", ") })
}

fn histogram(report: &StatsReport) -> Outcome {
    let mut agg: BTreeMap<usize, usize> = BTreeMap::new();
    for b in report.benchmarks() {
        for (k, n) in &report.row(b, Mode::BbvLazy, None).unwrap().counters.versions_histogram {
            *agg.entry(*k).or_default() += n;
        }
    }
    let total: usize = agg.values().sum();
    let one = agg.get(&1).copied().unwrap_or(0);
    let max = agg.keys().max().copied().unwrap_or(0);
    verdict(
        2 * one > total && max <= 20,
        format!("{one}/{total} blocks have one version ({:.1}%), max {max} versions; histogram {agg:?}", 100.0 * one as f64 / total as f64),
    )
}

fn eager_vs_lazy(report: &StatsReport) -> Outcome {
    let (mut ee, mut le, mut et, mut lt) = (0, 0, 0, 0);
    for b in report.benchmarks() {
        let e = &report.row(b, Mode::BbvEager, Some(5)).unwrap().counters;
        let l = &report.row(b, Mode::BbvLazy, Some(5)).unwrap().counters;
        ee += e.ops_emitted;
        le += l.ops_emitted;
        et += e.tests_total();
        lt += l.tests_total();
    }
    let base: u64 = report.benchmarks().iter().map(|b| tests_of(report, b, Mode::Baseline, Some(5))).sum();
    verdict(
        ee > le && et > lt,
        format!(
            "emitted eager {ee} vs lazy {le}; tests eager {et} vs lazy {lt}; eliminated eager {} vs lazy {}",
            base - et.min(base),
            base - lt.min(base)
        ),
    )
}

fn lazy_layout(fx: &Fixture) -> Outcome {
    let mut bad = Vec::new();
    let mut runs = 0;
    for r in fx.report.rows.iter().filter(|r| r.mode != Mode::BbvEager) {
        runs += 1;
        if let Err(e) = &r.layout {
            bad.push(format!("{} {} {}: {e}", r.benchmark, r.mode, limit_name(r.maxvers)));
        }
    }
    for (seed, c) in &fx.random {
        for r in c.iter().flat_map(|c| &c.runs).filter(|r| r.mode != Mode::BbvEager) {
            runs += 1;
            if let Err(e) = &r.layout {
                bad.push(format!("seed {seed} {}: {e}", r.label()));
            }
        }
    }
    verdict(bad.is_empty(), if bad.is_empty() { format!("{runs} lazy runs checked") } else { bad.join("; ") })
}

fn differential(fx: &Fixture) -> Outcome {
    let mut bad = Vec::new();
    let mut compared = 0;
    for b in corpus::builtin() {
        match compare(&b.source, Some("bench")) {
            Some(c) => {
                compared += c.runs.len();
                bad.extend(c.mismatches().into_iter().map(|m| format!("{}: {m}", b.name)));
            }
            None => bad.push(format!("{}: no reference result", b.name)),
        }
    }
    let mut programs = 0;
    for (seed, c) in &fx.random {
        let Some(c) = c else {
            bad.push(format!("seed {seed}: no reference result"));
            continue;
        };
        programs += 1;
        compared += c.runs.len();
        bad.extend(c.mismatches().into_iter().map(|m| format!("seed {seed}: {m}")));
    }
    verdict(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{compared} runs agree ({} corpus programs, {programs} random programs)", corpus::builtin().len())
        } else {
            format!("{} mismatches, first: {}", bad.len(), bad[0])
        },
    )
}

fn soundness() -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    let sources = corpus::builtin()
        .into_iter()
        .map(|b| (b.name, b.source))
        .chain((0..RANDOM_PROGRAMS).map(|s| (format!("seed {s}"), generate(s))));
    for (name, src) in sources {
        let program = compile_source(&src).unwrap();
        let r = check_program(&program, Some("bench"), Some(50_000_000));
        checked += r.checked;
        bad.extend(r.violations.iter().map(|v| format!("{name}: {v}")));
    }
    verdict(
        bad.is_empty(),
        if bad.is_empty() { format!("{checked} observed values within their inferred sets") } else { bad[..bad.len().min(3)].join("; ") },
    )
}

fn bound_and_termination(fx: &Fixture) -> Outcome {
    let mut bad = Vec::new();
    let mut check = |what: String, max_spec: usize, limit: MaxVers| {
        if let Some(l) = limit {
            if max_spec > l as usize {
                bad.push(format!("{what}: {max_spec} versions > {l}"));
            }
        }
    };
    for r in &fx.report.rows {
        let Row { benchmark, mode, maxvers, max_specialized, .. } = r;
        let effective = if mode.uses_limit() { *maxvers } else { Some(0) };
        check(format!("{benchmark} {mode} {}", limit_name(*maxvers)), *max_specialized, effective);
    }
    let mut worst: f64 = 0.0;
    let mut budget = Vec::new();
    for (seed, c) in &fx.random {
        let Some(c) = c else { continue };
        let base = c.baseline_emitted();
        for r in &c.runs {
            let effective = if r.mode.uses_limit() { r.maxvers } else { Some(0) };
            check(format!("seed {seed} {}", r.label()), r.max_specialized, effective);
            worst = worst.max(r.counters.ops_emitted as f64 / base as f64);
            if r.counters.ops_emitted > 100 * base {
                budget.push(format!("seed {seed} {}: {} ops vs baseline {base}", r.label(), r.counters.ops_emitted));
            }
        }
    }
    bad.extend(budget);
    verdict(
        bad.is_empty(),
        if bad.is_empty() { format!("limits respected; largest emission {worst:.1}x baseline") } else { bad.join("; ") },
    )
}

#[test]
fn acceptance() {
    let report = run_suite(&corpus::builtin(), &ExperimentConfig::default()).unwrap();
    let random = (0..RANDOM_PROGRAMS).map(|s| (s, compare(&generate(s), Some("bench")))).collect();
    let fx = Fixture { report, random };
    let failed: Vec<_> = fx.report.rows.iter().filter(|r| r.error.is_some()).map(|r| r.benchmark.clone()).collect();
    assert!(failed.is_empty(), "corpus runs failed: {failed:?}");

    let results = [
        ("1 sum walkthrough", sum_walkthrough()),
        ("2 bits-in-byte", bits_in_byte(&fx.report)),
        ("3 globals benchmark", globals_benchmark(&fx.report)),
        ("4 dominance", dominance(&fx.report)),
        ("5 limit sweep", limit_sweep(&fx.report)),
        ("6 disabled mode", disabled_mode(&fx)),
        ("7 version histogram", histogram(&fx.report)),
        ("8 eager vs lazy", eager_vs_lazy(&fx.report)),
        ("9 lazy layout", lazy_layout(&fx)),
        ("10 differential", differential(&fx)),
        ("11 analysis soundness", soundness()),
        ("12 version bound", bound_and_termination(&fx)),
    ];
    let mut failures = Vec::new();
    for (name, o) in &results {
        println!("{} {name}: {}", if o.ok { "PASS" } else { "FAIL" }, o.detail);
        if !o.ok {
            failures.push(*name);
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
