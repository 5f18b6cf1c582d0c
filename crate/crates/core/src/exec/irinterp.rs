//! Direct interpreter for the IR.
//!
//! Runs a program block by block, resolving phis on each edge. Primitives
//! that were not inlined are applied with their reference semantics, so
//! the same program can be run before and after inlining. An [`EdgeHook`]
//! observes the values of the frame on every traversed edge.

use std::collections::HashMap;
use std::rc::Rc;

use super::{display, Observation, MAX_CALL_DEPTH};
use crate::ir::{BlockId, Capture, FuncId, InstKind, Operand, Program, ValueId};
use crate::runtime::prims::apply_prim;
use crate::runtime::{eval_low, tag_of, Const, Heap, PrimOp, RuntimeError, Value};

pub trait EdgeHook {
    /// Called when control leaves `from` through successor `arm`, before
    /// the phis of `to` are resolved. `values` holds the frame's defined
    /// values.
    fn on_edge(&mut self, func: FuncId, from: BlockId, arm: usize, to: BlockId, values: &[Option<Value>], heap: &Heap);
}

impl EdgeHook for () {
    fn on_edge(&mut self, _: FuncId, _: BlockId, _: usize, _: BlockId, _: &[Option<Value>], _: &Heap) {}
}

pub struct IrInterp<'p, H: EdgeHook = ()> {
    program: &'p Program,
    heap: Heap,
    globals: HashMap<Rc<str>, Value>,
    strings: HashMap<Rc<str>, Value>,
    output: Vec<String>,
    pub hook: H,
    depth: usize,
    fuel: u64,
    pub tests_by_kind: [u64; 7],
}

impl<'p> IrInterp<'p, ()> {
    pub fn new(program: &'p Program) -> Self {
        IrInterp::with_hook(program, ())
    }
}

impl<'p, H: EdgeHook> IrInterp<'p, H> {
    pub fn with_hook(program: &'p Program, hook: H) -> Self {
        IrInterp {
            program,
            heap: Heap::new(),
            globals: HashMap::new(),
            strings: HashMap::new(),
            output: vec![],
            hook,
            depth: 0,
            fuel: u64::MAX,
            tests_by_kind: [0; 7],
        }
    }

    pub fn set_fuel(&mut self, fuel: u64) {
        self.fuel = fuel;
    }

    pub fn heap(&self) -> &Heap {
        &self.heap
    }

    pub fn output(&self) -> &[String] {
        &self.output
    }

    pub fn run_main(&mut self) -> Result<Value, RuntimeError> {
        self.call_fn(self.program.main, &[], &[])
    }

    pub fn call_global(&mut self, name: &str, args: &[Value]) -> Result<Value, RuntimeError> {
        let f = self.globals.get(name).copied().unwrap_or(Value::UNDEFINED);
        self.call_value(f, args)
    }

    pub fn observe(&mut self, entry: Option<&str>, args: &[Value]) -> Observation {
        let mut result = self.run_main();
        if let (Ok(_), Some(e)) = (&result, entry) {
            result = self.call_global(e, args);
        }
        Observation { result: result.map(|v| self.heap.render(v)), output: self.output.clone() }
    }

    fn call_value(&mut self, callee: Value, args: &[Value]) -> Result<Value, RuntimeError> {
        let Value::Closure(r) = callee else { return Err(RuntimeError::NotAFunction) };
        let clo = self.heap.closure(r).clone();
        self.call_fn(FuncId(clo.func), &clo.captures, args)
    }

    fn call_fn(&mut self, f: FuncId, env: &[u32], args: &[Value]) -> Result<Value, RuntimeError> {
        if self.depth >= MAX_CALL_DEPTH {
            return Err(RuntimeError::StackOverflow);
        }
        self.depth += 1;
        let r = self.body(f, env, args);
        self.depth -= 1;
        r
    }

    fn body(&mut self, fid: FuncId, env: &[u32], args: &[Value]) -> Result<Value, RuntimeError> {
        let program = self.program;
        let f = program.function(fid);
        let mut vals: Vec<Option<Value>> = vec![None; f.n_values as usize];
        for (i, p) in f.params.iter().enumerate() {
            vals[p.index()] = Some(args.get(i).copied().unwrap_or(Value::UNDEFINED));
        }
        let cells: Vec<u32> = (0..f.n_cells).map(|_| self.heap.alloc_cell(Value::UNDEFINED)).collect();
        let mut b = f.entry;
        let mut prev: Option<BlockId> = None;
        let mut phi_vals: Vec<(ValueId, Value)> = Vec::new();
        loop {
            let block = f.block(b);
            if let Some(p) = prev {
                phi_vals.clear();
                for phi in &block.phis {
                    let o = phi.incoming_from(p).expect("phi entry for predecessor");
                    phi_vals.push((phi.out, self.read(&vals, o)));
                }
                for (v, x) in phi_vals.drain(..) {
                    vals[v.index()] = Some(x);
                }
            }
            for inst in block.body() {
                if self.fuel == 0 {
                    return Err(RuntimeError::OutOfFuel);
                }
                self.fuel -= 1;
                let out: Option<Value> = match &inst.kind {
                    InstKind::Low(op, args) => {
                        let a: Vec<Value> = args.iter().map(|o| self.read(&vals, o)).collect();
                        eval_low(*op, &a, &mut self.heap)?
                    }
                    InstKind::Prim(PrimOp::Call, args) => {
                        let a: Vec<Value> = args.iter().map(|o| self.read(&vals, o)).collect();
                        Some(self.call_value(a[0], &a[1..])?)
                    }
                    InstKind::Prim(p, args) => {
                        let a: Vec<Value> = args.iter().map(|o| self.read(&vals, o)).collect();
                        apply_prim(*p, &mut self.heap, &a)?
                    }
                    InstKind::Call(c, args) => {
                        let c = self.read(&vals, c);
                        let a: Vec<Value> = args.iter().map(|o| self.read(&vals, o)).collect();
                        Some(self.call_value(c, &a)?)
                    }
                    InstKind::GlobalGet(n) => Some(self.globals.get(n).copied().unwrap_or(Value::UNDEFINED)),
                    InstKind::GlobalSet(n, v) => {
                        let v = self.read(&vals, v);
                        self.globals.insert(n.clone(), v);
                        None
                    }
                    InstKind::CellGet(c) => Some(self.heap.cell(cells[*c as usize])),
                    InstKind::CellSet(c, v) => {
                        let v = self.read(&vals, v);
                        self.heap.set_cell(cells[*c as usize], v);
                        None
                    }
                    InstKind::EnvGet(s) => Some(self.heap.cell(env[*s as usize])),
                    InstKind::EnvSet(s, v) => {
                        let v = self.read(&vals, v);
                        self.heap.set_cell(env[*s as usize], v);
                        None
                    }
                    InstKind::MakeClosure(func, caps) => {
                        let caps = caps
                            .iter()
                            .map(|c| match c {
                                Capture::Cell(i) => cells[*i as usize],
                                Capture::Env(i) => env[*i as usize],
                            })
                            .collect();
                        Some(self.heap.alloc_closure(func.0, caps))
                    }
                    InstKind::Print(v) => {
                        let v = self.read(&vals, v);
                        self.output.push(display(&self.heap, v));
                        None
                    }
                    k => panic!("terminator {k:?} in block body"),
                };
                if let (Some(o), Some(v)) = (inst.out, out) {
                    vals[o.index()] = Some(v);
                }
            }
            let term = block.terminator();
            let (arm, next) = match &term.kind {
                InstKind::Jump(t) => (0, *t),
                InstKind::Branch { cond, then_to, else_to } => {
                    if self.read(&vals, cond) == Value::Const(Const::True) {
                        (0, *then_to)
                    } else {
                        (1, *else_to)
                    }
                }
                InstKind::TestTag { tag, value, taken, other } => {
                    self.tests_by_kind[tag.index()] += 1;
                    if tag_of(self.read(&vals, value)) == *tag {
                        (0, *taken)
                    } else {
                        (1, *other)
                    }
                }
                InstKind::ArithOvf { op, lhs, rhs, normal, overflow } => {
                    let (Value::Int(x), Value::Int(y)) = (self.read(&vals, lhs), self.read(&vals, rhs)) else {
                        panic!("overflow op on non-int32 operands")
                    };
                    match op.eval(x, y) {
                        Some(r) => {
                            vals[term.out.expect("overflow op output").index()] = Some(Value::Int(r));
                            (0, *normal)
                        }
                        None => (1, *overflow),
                    }
                }
                InstKind::Return(v) => return Ok(self.read(&vals, v)),
                InstKind::Throw(e) => return Err(*e),
                k => panic!("{k:?} is not a terminator"),
            };
            self.hook.on_edge(fid, b, arm, next, &vals, &self.heap);
            prev = Some(b);
            b = next;
        }
    }

    fn read(&mut self, vals: &[Option<Value>], o: &Operand) -> Value {
        match o {
            Operand::Val(v) => vals[v.index()].unwrap_or_else(|| panic!("{v} read before definition")),
            Operand::Imm(l) => match l {
                crate::ir::Literal::Int(i) => Value::Int(*i),
                crate::ir::Literal::Float(x) => Value::Float(*x),
                crate::ir::Literal::Const(c) => Value::Const(*c),
                crate::ir::Literal::Str(s) => {
                    *self.strings.entry(s.clone()).or_insert_with(|| self.heap.alloc_str(&**s))
                }
            },
        }
    }
}
