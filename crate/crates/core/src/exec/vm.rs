//! The virtual machine executing the code buffer.
//!
//! Frames live on an explicit stack; each frame owns a window of the value
//! stack with one slot per SSA value of its function. Stub hits and first
//! calls re-enter the engine, which appends code and patches branches while
//! execution is suspended.

use std::rc::Rc;

use super::code::{MArg, MOp, Target};
use super::{display, Config, Counters, Mode, Observation, MAX_CALL_DEPTH};
use crate::analysis::apply_analysis_program;
use crate::bbv::{Engine, EngineMode, VersionId};
use crate::ir::{Capture, FuncId, Program};
use crate::runtime::{eval_low, tag_of, Heap, RuntimeError, Value};

struct Frame {
    base: usize,
    ret_pc: u32,
    /// Caller slot receiving the return value.
    out: u32,
    cells: Vec<u32>,
    env: Rc<[u32]>,
}

pub struct Vm {
    engine: Engine,
    heap: Heap,
    globals: Vec<Value>,
    stack: Vec<Value>,
    frames: Vec<Frame>,
    scratch: Vec<Value>,
    tests_by_kind: [u64; 7],
    ops_executed: u64,
    stub_hits: u64,
    exec_seq: u64,
    fuel: u64,
    output: Vec<String>,
    config: Config,
}

impl Vm {
    pub fn new(program: Rc<Program>, config: Config) -> Vm {
        let (program, mode, limit) = match config.mode {
            Mode::Baseline => (program, EngineMode::Lazy, Some(0)),
            Mode::Analysis => (Rc::new(apply_analysis_program(&program)), EngineMode::Lazy, Some(0)),
            Mode::BbvLazy => (program, EngineMode::Lazy, config.maxvers),
            Mode::BbvEager => (program, EngineMode::Eager, config.maxvers),
        };
        Vm {
            engine: Engine::new(program, mode, limit),
            heap: Heap::new(),
            globals: vec![],
            stack: vec![],
            frames: vec![],
            scratch: vec![],
            tests_by_kind: [0; 7],
            ops_executed: 0,
            stub_hits: 0,
            exec_seq: 0,
            fuel: config.fuel.unwrap_or(u64::MAX),
            output: vec![],
            config,
        }
    }

    pub fn config(&self) -> Config {
        self.config
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn heap(&self) -> &Heap {
        &self.heap
    }

    pub fn heap_mut(&mut self) -> &mut Heap {
        &mut self.heap
    }

    pub fn output(&self) -> &[String] {
        &self.output
    }

    pub fn take_output(&mut self) -> Vec<String> {
        std::mem::take(&mut self.output)
    }

    pub fn counters(&self) -> Counters {
        Counters {
            tests_by_kind: self.tests_by_kind,
            ops_executed: self.ops_executed,
            ops_emitted: self.engine.code.emitted,
            compiler_invocations: self.engine.compiler_invocations,
            stub_hits: self.stub_hits,
            versions_histogram: self.engine.versions.histogram(),
        }
    }

    pub fn global(&self, name: &str) -> Value {
        self.engine
            .global_names
            .iter()
            .position(|n| &**n == name)
            .and_then(|i| self.globals.get(i).copied())
            .unwrap_or(Value::UNDEFINED)
    }

    /// Runs the top-level code.
    pub fn run_main(&mut self) -> Result<Value, RuntimeError> {
        let main = self.engine.program.main;
        self.invoke(main, Rc::from(vec![]), &[])
    }

    /// Calls the function stored in global `name`.
    pub fn call_global(&mut self, name: &str, args: &[Value]) -> Result<Value, RuntimeError> {
        let f = self.global(name);
        self.call(f, args)
    }

    pub fn call(&mut self, callee: Value, args: &[Value]) -> Result<Value, RuntimeError> {
        let Value::Closure(r) = callee else { return Err(RuntimeError::NotAFunction) };
        let clo = self.heap.closure(r).clone();
        self.invoke(FuncId(clo.func), clo.captures.into(), args)
    }

    /// Runs main and then, if given, calls `entry` with `args`.
    pub fn observe(&mut self, entry: Option<&str>, args: &[Value]) -> Observation {
        let mut result = self.run_main();
        if let (Ok(_), Some(e)) = (&result, entry) {
            result = self.call_global(e, args);
        }
        Observation { result: result.map(|v| self.heap.render(v)), output: self.output.clone() }
    }

    fn push_frame(&mut self, f: FuncId, env: Rc<[u32]>, args: &[Value], ret_pc: u32, out: u32) -> Result<(), RuntimeError> {
        if self.frames.len() >= MAX_CALL_DEPTH {
            return Err(RuntimeError::StackOverflow);
        }
        let func = self.engine.program.function(f);
        let base = self.stack.len();
        self.stack.resize(base + func.n_values as usize, Value::UNDEFINED);
        for (i, p) in func.params.iter().enumerate() {
            self.stack[base + p.index()] = args.get(i).copied().unwrap_or(Value::UNDEFINED);
        }
        let cells = (0..func.n_cells).map(|_| self.heap.alloc_cell(Value::UNDEFINED)).collect();
        self.frames.push(Frame { base, ret_pc, out, cells, env });
        Ok(())
    }

    fn invoke(&mut self, f: FuncId, env: Rc<[u32]>, args: &[Value]) -> Result<Value, RuntimeError> {
        let depth = self.frames.len();
        let base = self.stack.len();
        self.push_frame(f, env, args, u32::MAX, 0)?;
        let pc = self.engine.entry(f, &mut self.heap);
        let r = self.execute(pc, depth);
        if r.is_err() {
            self.frames.truncate(depth);
            self.stack.truncate(base);
        }
        r
    }

    fn execute(&mut self, mut pc: u32, stop_depth: usize) -> Result<Value, RuntimeError> {
        let mut base = self.frames.last().expect("active frame").base;
        macro_rules! rd {
            ($a:expr) => {
                match *$a {
                    MArg::Slot(s) => self.stack[base + s as usize],
                    MArg::Imm(v) => v,
                }
            };
        }
        // Performs the phi copies of a destination and yields the next pc,
        // resolving stubs through the engine.
        macro_rules! goto {
            ($d:expr) => {{
                let d = $d;
                let target = d.target;
                if !d.moves.is_empty() {
                    self.scratch.clear();
                    for (_, src) in d.moves.iter() {
                        self.scratch.push(rd!(src));
                    }
                    for ((dst, _), v) in d.moves.iter().zip(self.scratch.iter()) {
                        self.stack[base + *dst as usize] = *v;
                    }
                    self.ops_executed += d.moves.len() as u64;
                }
                match target {
                    Target::Next => pc + 1,
                    Target::At(o) => o,
                    Target::Stub(s) => {
                        self.stub_hits += 1;
                        self.engine.resolve_stub(s, &mut self.heap)
                    }
                }
            }};
        }
        loop {
            let op = &self.engine.code.ops[pc as usize];
            if !matches!(op, MOp::VersionEntry(_)) {
                if self.fuel == 0 {
                    return Err(RuntimeError::OutOfFuel);
                }
                self.fuel -= 1;
                self.ops_executed += 1;
            }
            pc = match op {
                MOp::VersionEntry(v) => {
                    let v: VersionId = *v;
                    let version = self.engine.versions.get_mut(v);
                    if version.first_exec.is_none() {
                        version.first_exec = Some(self.exec_seq);
                        self.exec_seq += 1;
                    }
                    pc + 1
                }
                MOp::Low { op, args, out } => {
                    let (op, out) = (*op, *out);
                    self.scratch.clear();
                    for a in args.iter() {
                        self.scratch.push(rd!(a));
                    }
                    let r = eval_low(op, &self.scratch, &mut self.heap)?;
                    if let (Some(o), Some(v)) = (out, r) {
                        self.stack[base + o as usize] = v;
                    }
                    pc + 1
                }
                MOp::Ovf { op, lhs, rhs, out, normal, overflow } => {
                    let (Value::Int(x), Value::Int(y)) = (rd!(lhs), rd!(rhs)) else {
                        panic!("overflow op on non-int32 operands")
                    };
                    match op.eval(x, y) {
                        Some(r) => {
                            self.stack[base + *out as usize] = Value::Int(r);
                            goto!(normal)
                        }
                        None => goto!(overflow),
                    }
                }
                MOp::Test { tag, value, taken, other } => {
                    self.tests_by_kind[tag.index()] += 1;
                    if tag_of(rd!(value)) == *tag {
                        goto!(taken)
                    } else {
                        goto!(other)
                    }
                }
                MOp::Branch { cond, then_to, else_to } => {
                    if rd!(cond) == Value::TRUE {
                        goto!(then_to)
                    } else {
                        goto!(else_to)
                    }
                }
                MOp::Jump(d) => goto!(d),
                MOp::Moves(m) => {
                    self.scratch.clear();
                    for (_, src) in m.iter() {
                        self.scratch.push(rd!(src));
                    }
                    for ((dst, _), v) in m.iter().zip(self.scratch.iter()) {
                        self.stack[base + *dst as usize] = *v;
                    }
                    // The op itself was counted once above.
                    self.ops_executed += m.len() as u64 - 1;
                    pc + 1
                }
                MOp::Call { callee, args, out } => {
                    let out = *out;
                    let Value::Closure(r) = rd!(callee) else { return Err(RuntimeError::NotAFunction) };
                    let mut argv = Vec::with_capacity(args.len());
                    for a in args.iter() {
                        argv.push(rd!(a));
                    }
                    let clo = self.heap.closure(r);
                    let (f, env) = (FuncId(clo.func), Rc::from(clo.captures.as_slice()));
                    self.push_frame(f, env, &argv, pc + 1, out)?;
                    base = self.frames.last().unwrap().base;
                    self.engine.entry(f, &mut self.heap)
                }
                MOp::Return(v) => {
                    let v = rd!(v);
                    let fr = self.frames.pop().expect("active frame");
                    self.stack.truncate(fr.base);
                    if self.frames.len() == stop_depth {
                        return Ok(v);
                    }
                    base = self.frames.last().unwrap().base;
                    self.stack[base + fr.out as usize] = v;
                    fr.ret_pc
                }
                MOp::Throw(e) => return Err(*e),
                MOp::GlobalGet { global, out } => {
                    let v = self.globals.get(*global as usize).copied().unwrap_or(Value::UNDEFINED);
                    self.stack[base + *out as usize] = v;
                    pc + 1
                }
                MOp::GlobalSet { global, value } => {
                    let (g, v) = (*global as usize, rd!(value));
                    if g >= self.globals.len() {
                        self.globals.resize(g + 1, Value::UNDEFINED);
                    }
                    self.globals[g] = v;
                    pc + 1
                }
                MOp::CellGet { cell, out } => {
                    let c = self.frames.last().unwrap().cells[*cell as usize];
                    self.stack[base + *out as usize] = self.heap.cell(c);
                    pc + 1
                }
                MOp::CellSet { cell, value } => {
                    let c = self.frames.last().unwrap().cells[*cell as usize];
                    let v = rd!(value);
                    self.heap.set_cell(c, v);
                    pc + 1
                }
                MOp::EnvGet { slot, out } => {
                    let c = self.frames.last().unwrap().env[*slot as usize];
                    self.stack[base + *out as usize] = self.heap.cell(c);
                    pc + 1
                }
                MOp::EnvSet { slot, value } => {
                    let c = self.frames.last().unwrap().env[*slot as usize];
                    let v = rd!(value);
                    self.heap.set_cell(c, v);
                    pc + 1
                }
                MOp::MakeClosure { func, captures, out } => {
                    let fr = self.frames.last().unwrap();
                    let caps = captures
                        .iter()
                        .map(|c| match c {
                            Capture::Cell(i) => fr.cells[*i as usize],
                            Capture::Env(i) => fr.env[*i as usize],
                        })
                        .collect();
                    let v = self.heap.alloc_closure(func.0, caps);
                    self.stack[base + *out as usize] = v;
                    pc + 1
                }
                MOp::Print(v) => {
                    let v = rd!(v);
                    self.output.push(display(&self.heap, v));
                    pc + 1
                }
            };
        }
    }

    /// Checks the lazy-mode layout properties: compiled versions were all
    /// executed, and their code starts increase in first-execution order.
    pub fn check_layout(&self) -> Result<(), String> {
        let mut seen: Vec<(u64, u32, VersionId)> = Vec::new();
        for v in &self.engine.versions.versions {
            let Some(start) = v.start else { continue };
            match v.first_exec {
                Some(e) => seen.push((e, start, v.seq)),
                None => return Err(format!("version {} of {} {} was compiled but never executed", v.seq, v.func, v.block)),
            }
        }
        seen.sort();
        for w in seen.windows(2) {
            if w[1].1 <= w[0].1 {
                return Err(format!(
                    "version {} (start {}) executed after version {} (start {})",
                    w[1].2, w[1].1, w[0].2, w[0].1
                ));
            }
        }
        Ok(())
    }

    /// Largest number of non-generic versions of any block.
    pub fn max_specialized_versions(&self) -> usize {
        self.engine
            .versions
            .blocks()
            .map(|(_, ids)| ids.iter().filter(|&&id| !self.engine.versions.get(id).generic).count())
            .max()
            .unwrap_or(0)
    }

    /// Listing of the code buffer, one op per line.
    pub fn dump_code(&self) -> String {
        let mut s = String::new();
        for (i, op) in self.engine.code.ops.iter().enumerate() {
            s.push_str(&format!("{i:5}  {op}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bbv::MaxVers;
    use crate::frontend::compile_source;

    const SUM: &str = "function sum(n) {
    var s = 0;
    for (var i = 0; i < n; i++) {
        s += i;
    }
    return s;
}";

    fn vm(src: &str, mode: Mode, maxvers: MaxVers) -> Vm {
        let mut cfg = Config::new(mode, maxvers);
        cfg.fuel = Some(10_000_000);
        let mut vm = Vm::new(Rc::new(compile_source(src).unwrap()), cfg);
        vm.run_main().unwrap();
        vm
    }

    fn call(vm: &mut Vm, f: &str, args: &[Value]) -> (Result<Value, RuntimeError>, Counters) {
        let before = vm.counters();
        let r = vm.call_global(f, args);
        (r, vm.counters().since(&before))
    }

    #[test]
    fn sum_in_every_mode() {
        for mode in Mode::ALL {
            for l in [Some(0), Some(1), Some(2), Some(5), None] {
                let mut m = vm(SUM, mode, l);
                assert_eq!(call(&mut m, "sum", &[Value::Int(500)]).0, Ok(Value::Int(124750)), "{mode} {l:?}");
            }
        }
    }

    #[test]
    fn sum_baseline_tests_i_and_n_every_iteration() {
        let mut m = vm(SUM, Mode::Baseline, None);
        let (_, c) = call(&mut m, "sum", &[Value::Int(500)]);
        // Five int32 tests per iteration (i and n for `<`, s and i for `+=`,
        // i for `++`) and two for the final comparison.
        assert_eq!(c.tests_total(), 5 * 500 + 2);
        assert_eq!(c.tests(crate::runtime::TypeTag::Int32), c.tests_total());
    }

    #[test]
    fn sum_lazy_keeps_one_test_and_warms_up() {
        for l in [Some(2), Some(5), None] {
            let mut m = vm(SUM, Mode::BbvLazy, l);
            let (_, first) = call(&mut m, "sum", &[Value::Int(500)]);
            assert!(first.stub_hits > 0);
            let (r, second) = call(&mut m, "sum", &[Value::Int(600)]);
            assert_eq!(r, Ok(Value::Int(179700)));
            assert_eq!(second.tests_total(), 1);
            assert_eq!((second.stub_hits, second.compiler_invocations, second.ops_emitted), (0, 0, 0));
            m.check_layout().unwrap();
        }
    }

    #[test]
    fn limit_zero_is_baseline() {
        let src = format!("{SUM} function g(x) {{ var a = [x, 2.5, \"s\"]; var t = 0; for (var i = 0; i < 3; i++) {{ t = t + a[i]; }} return t; }}");
        let mut a = vm(&src, Mode::Baseline, None);
        let mut b = vm(&src, Mode::BbvLazy, Some(0));
        for (f, x) in [("sum", 50), ("g", 1), ("sum", 7)] {
            assert_eq!(a.call_global(f, &[Value::Int(x)]), b.call_global(f, &[Value::Int(x)]));
        }
        assert_eq!(a.counters(), b.counters());
        assert_eq!(a.dump_code(), b.dump_code());
    }

    #[test]
    fn eager_straight_line_code_equals_lazy() {
        let src = "function f() { var a = 1; var b = \"x\"; var c = [a, b]; return c; }";
        let mut lazy = vm(src, Mode::BbvLazy, Some(5));
        let mut eager = vm(src, Mode::BbvEager, Some(5));
        let (a, b) = (lazy.call_global("f", &[]).unwrap(), eager.call_global("f", &[]).unwrap());
        assert_eq!(lazy.heap().render(a), eager.heap().render(b));
        assert_eq!(lazy.dump_code(), eager.dump_code());
    }

    #[test]
    fn eager_compiles_without_stubs() {
        let mut m = vm(SUM, Mode::BbvEager, Some(5));
        let (_, c) = call(&mut m, "sum", &[Value::Int(10)]);
        assert_eq!(c.stub_hits, 0);
        assert!(m.engine().code.stubs.is_empty());
        let mut lazy = vm(SUM, Mode::BbvLazy, Some(5));
        assert_eq!(call(&mut lazy, "sum", &[Value::Int(10)]).0, Ok(Value::Int(45)));
        assert!(m.counters().ops_emitted > lazy.counters().ops_emitted);
    }

    #[test]
    fn runtime_errors_and_recovery() {
        let src = "function bad(x) { return x & 1; } function deep(n) { return deep(n + 1); } function ok() { return 3; }";
        for mode in Mode::ALL {
            let mut m = vm(src, mode, Some(5));
            assert_eq!(m.call_global("bad", &[Value::UNDEFINED]), Err(RuntimeError::BadBitwise));
            assert_eq!(m.call_global("deep", &[Value::Int(0)]), Err(RuntimeError::StackOverflow));
            assert_eq!(m.call_global("missing", &[]), Err(RuntimeError::NotAFunction));
            assert_eq!(m.call_global("ok", &[]), Ok(Value::Int(3)));
        }
    }

    #[test]
    fn closures_share_cells() {
        let src = "function make() { var n = 0; return function() { n++; return n; }; }
                   function run() { var c = make(); c(); c(); var d = make(); d(); return c() * 10 + d(); }";
        for mode in Mode::ALL {
            let mut m = vm(src, mode, None);
            assert_eq!(m.call_global("run", &[]), Ok(Value::Int(32)));
        }
    }

    #[test]
    fn fuel_stops_infinite_loops() {
        let mut cfg = Config::new(Mode::BbvLazy, Some(5));
        cfg.fuel = Some(1000);
        let mut m = Vm::new(Rc::new(compile_source("while (true) {}").unwrap()), cfg);
        assert_eq!(m.run_main(), Err(RuntimeError::OutOfFuel));
    }

    #[test]
    fn print_writes_display_form() {
        let m = vm("print(\"a\" + 1); print(1.5); print([1, null]); print({k: \"v\"});", Mode::BbvLazy, None);
        assert_eq!(m.output(), ["a1", "1.5f", "[1,null]", "{k:\"v\"}"]);
    }
}
