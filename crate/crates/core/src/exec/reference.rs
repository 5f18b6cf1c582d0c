//! Reference interpreter over the AST.
//!
//! Independent of the IR pipeline: names are resolved through a chain of
//! scopes at run time and every operator is applied with the reference
//! primitive semantics. Used as the oracle for differential testing.

use std::collections::HashMap;
use std::rc::Rc;

use super::{display, Observation, MAX_CALL_DEPTH};
use crate::frontend::ast::{declared_names, hoisted_functions, Ast, BinOp, Expr, ExprKind, ForInit, FuncDecl, Stmt, UnOp};
use crate::frontend::lower::binop_prim;
use crate::runtime::prims::apply_prim;
use crate::runtime::{Heap, PrimOp, RuntimeError, Value};

/// One function activation's locals, each held in a heap cell so that
/// closures observe later assignments.
struct Scope {
    vars: HashMap<String, u32>,
    parent: Option<Rc<Scope>>,
}

impl Scope {
    fn lookup(&self, name: &str) -> Option<u32> {
        match self.vars.get(name) {
            Some(c) => Some(*c),
            None => self.parent.as_ref().and_then(|p| p.lookup(name)),
        }
    }
}

enum Flow {
    Normal,
    Return(Value),
}

pub struct Reference<'a> {
    ast: &'a Ast,
    heap: Heap,
    globals: HashMap<String, Value>,
    /// Function and defining scope of each closure, indexed by the id
    /// stored in the heap closure.
    closures: Vec<(Rc<FuncDecl>, Option<Rc<Scope>>)>,
    output: Vec<String>,
    depth: usize,
    fuel: u64,
}

type R<T> = Result<T, RuntimeError>;

impl<'a> Reference<'a> {
    pub fn new(ast: &'a Ast) -> Self {
        Reference {
            ast,
            heap: Heap::new(),
            globals: HashMap::new(),
            closures: vec![],
            output: vec![],
            depth: 0,
            fuel: u64::MAX,
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

    pub fn run_main(&mut self) -> R<Value> {
        if self.depth >= MAX_CALL_DEPTH {
            return Err(RuntimeError::StackOverflow);
        }
        self.depth += 1;
        let r = self.run_top();
        self.depth -= 1;
        r
    }

    fn run_top(&mut self) -> R<Value> {
        let body = &self.ast.body;
        for f in hoisted_functions(body) {
            let clo = self.make_closure(f.clone(), None);
            self.globals.insert(f.name.clone().expect("declarations are named"), clo);
        }
        for s in body {
            if let Flow::Return(v) = self.stmt(s, None)? {
                return Ok(v);
            }
        }
        Ok(Value::UNDEFINED)
    }

    pub fn call_global(&mut self, name: &str, args: &[Value]) -> R<Value> {
        let f = self.globals.get(name).copied().unwrap_or(Value::UNDEFINED);
        self.call(f, args)
    }

    pub fn observe(&mut self, entry: Option<&str>, args: &[Value]) -> Observation {
        let mut result = self.run_main();
        if let (Ok(_), Some(e)) = (&result, entry) {
            result = self.call_global(e, args);
        }
        Observation { result: result.map(|v| self.heap.render(v)), output: self.output.clone() }
    }

    fn make_closure(&mut self, f: Rc<FuncDecl>, scope: Option<Rc<Scope>>) -> Value {
        self.closures.push((f, scope));
        self.heap.alloc_closure(self.closures.len() as u32 - 1, vec![])
    }

    pub fn call(&mut self, callee: Value, args: &[Value]) -> R<Value> {
        let Value::Closure(r) = callee else { return Err(RuntimeError::NotAFunction) };
        let (f, parent) = self.closures[self.heap.closure(r).func as usize].clone();
        if self.depth >= MAX_CALL_DEPTH {
            return Err(RuntimeError::StackOverflow);
        }
        self.depth += 1;
        let r = self.activate(&f, parent, args);
        self.depth -= 1;
        r
    }

    fn activate(&mut self, f: &FuncDecl, parent: Option<Rc<Scope>>, args: &[Value]) -> R<Value> {
        let mut vars = HashMap::new();
        for name in f.params.iter().chain(declared_names(&f.body).iter()) {
            if !vars.contains_key(name) {
                vars.insert(name.clone(), self.heap.alloc_cell(Value::UNDEFINED));
            }
        }
        for (i, p) in f.params.iter().enumerate() {
            self.heap.set_cell(vars[p], args.get(i).copied().unwrap_or(Value::UNDEFINED));
        }
        let scope = Rc::new(Scope { vars, parent });
        for h in hoisted_functions(&f.body) {
            let clo = self.make_closure(h.clone(), Some(scope.clone()));
            self.heap.set_cell(scope.vars[h.name.as_deref().expect("declarations are named")], clo);
        }
        for s in &f.body {
            if let Flow::Return(v) = self.stmt(s, Some(&scope))? {
                return Ok(v);
            }
        }
        Ok(Value::UNDEFINED)
    }

    fn tick(&mut self) -> R<()> {
        if self.fuel == 0 {
            return Err(RuntimeError::OutOfFuel);
        }
        self.fuel -= 1;
        Ok(())
    }

    fn read(&mut self, name: &str, scope: Option<&Rc<Scope>>) -> Value {
        match scope.and_then(|s| s.lookup(name)) {
            Some(c) => self.heap.cell(c),
            None => self.globals.get(name).copied().unwrap_or(Value::UNDEFINED),
        }
    }

    fn write(&mut self, name: &str, v: Value, scope: Option<&Rc<Scope>>) {
        match scope.and_then(|s| s.lookup(name)) {
            Some(c) => self.heap.set_cell(c, v),
            None => {
                self.globals.insert(name.to_string(), v);
            }
        }
    }

    fn truthy(&self, v: Value) -> bool {
        self.heap.truthy(v)
    }

    fn stmt(&mut self, s: &Stmt, scope: Option<&Rc<Scope>>) -> R<Flow> {
        self.tick()?;
        match s {
            Stmt::Var(ds) => {
                for d in ds {
                    if let Some(e) = &d.init {
                        let v = self.expr(e, scope)?;
                        self.write(&d.name, v, scope);
                    }
                }
            }
            Stmt::Expr(e) => {
                self.expr(e, scope)?;
            }
            Stmt::If(c, t, e) => {
                let c = self.expr(c, scope)?;
                if self.truthy(c) {
                    return self.stmt(t, scope);
                } else if let Some(e) = e {
                    return self.stmt(e, scope);
                }
            }
            Stmt::While(c, body) => loop {
                let v = self.expr(c, scope)?;
                if !self.truthy(v) {
                    break;
                }
                if let Flow::Return(v) = self.stmt(body, scope)? {
                    return Ok(Flow::Return(v));
                }
            },
            Stmt::For { init, cond, update, body } => {
                match init {
                    Some(ForInit::Var(ds)) => {
                        self.stmt(&Stmt::Var(ds.clone()), scope)?;
                    }
                    Some(ForInit::Expr(e)) => {
                        self.expr(e, scope)?;
                    }
                    None => {}
                }
                loop {
                    self.tick()?;
                    if let Some(c) = cond {
                        let v = self.expr(c, scope)?;
                        if !self.truthy(v) {
                            break;
                        }
                    }
                    if let Flow::Return(v) = self.stmt(body, scope)? {
                        return Ok(Flow::Return(v));
                    }
                    if let Some(u) = update {
                        self.expr(u, scope)?;
                    }
                }
            }
            Stmt::Return(e, _) => {
                let v = match e {
                    Some(e) => self.expr(e, scope)?,
                    None => Value::UNDEFINED,
                };
                return Ok(Flow::Return(v));
            }
            Stmt::Block(b) => {
                for s in b {
                    if let Flow::Return(v) = self.stmt(s, scope)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            Stmt::Function(_) | Stmt::Empty => {}
        }
        Ok(Flow::Normal)
    }

    fn prim(&mut self, p: PrimOp, args: &[Value]) -> R<Value> {
        Ok(apply_prim(p, &mut self.heap, args)?.unwrap_or(Value::UNDEFINED))
    }

    fn name_value(&mut self, name: &str) -> Value {
        self.heap.alloc_str(name)
    }

    fn expr(&mut self, e: &Expr, scope: Option<&Rc<Scope>>) -> R<Value> {
        self.tick()?;
        Ok(match &e.kind {
            ExprKind::Int(i) => Value::Int(*i),
            ExprKind::Float(x) => Value::Float(*x),
            ExprKind::Str(s) => self.heap.alloc_str(s.as_str()),
            ExprKind::Bool(b) => Value::bool(*b),
            ExprKind::Null => Value::NULL,
            ExprKind::Undefined => Value::UNDEFINED,
            ExprKind::Ident(n) => self.read(n, scope),
            ExprKind::Unary(op, a) => {
                let a = self.expr(a, scope)?;
                let p = match op {
                    UnOp::Neg => PrimOp::Neg,
                    UnOp::Not => PrimOp::Not,
                };
                self.prim(p, &[a])?
            }
            ExprKind::Binary(op, a, b) => {
                let a = self.expr(a, scope)?;
                let b = self.expr(b, scope)?;
                self.prim(binop_prim(*op), &[a, b])?
            }
            ExprKind::Array(es) => {
                let mut vs = Vec::with_capacity(es.len());
                for e in es {
                    vs.push(self.expr(e, scope)?);
                }
                self.heap.alloc_array(vs)
            }
            ExprKind::Object(ps) => {
                let o = self.heap.alloc_object();
                for (k, e) in ps {
                    let v = self.expr(e, scope)?;
                    let Value::Object(r) = o else { unreachable!() };
                    self.heap.object_mut(r).insert(k.clone(), v);
                }
                o
            }
            ExprKind::Index(o, i) => {
                let o = self.expr(o, scope)?;
                let i = self.expr(i, scope)?;
                self.prim(PrimOp::GetIndex, &[o, i])?
            }
            ExprKind::Member(o, name) => {
                let o = self.expr(o, scope)?;
                let k = self.name_value(name);
                self.prim(PrimOp::GetProp, &[o, k])?
            }
            ExprKind::Assign(None, target, value) => match &target.kind {
                ExprKind::Ident(n) => {
                    let v = self.expr(value, scope)?;
                    self.write(n, v, scope);
                    v
                }
                ExprKind::Member(o, name) => {
                    let o = self.expr(o, scope)?;
                    let v = self.expr(value, scope)?;
                    let k = self.name_value(name);
                    self.prim(PrimOp::PutProp, &[o, k, v])?;
                    v
                }
                ExprKind::Index(o, i) => {
                    let o = self.expr(o, scope)?;
                    let i = self.expr(i, scope)?;
                    let v = self.expr(value, scope)?;
                    self.prim(PrimOp::PutIndex, &[o, i, v])?;
                    v
                }
                _ => unreachable!("rejected by lowering"),
            },
            ExprKind::Assign(Some(op), target, value) => self.read_modify_write(*op, target, |me| me.expr(value, scope), scope)?.1,
            ExprKind::Update { increment, prefix, target } => {
                let op = if *increment { BinOp::Add } else { BinOp::Sub };
                let (old, new) = self.read_modify_write(op, target, |_| Ok(Value::Int(1)), scope)?;
                if *prefix {
                    new
                } else {
                    old
                }
            }
            ExprKind::Function(f) => self.make_closure(f.clone(), scope.cloned()),
            ExprKind::Call(callee, args) => {
                if let ExprKind::Ident(n) = &callee.kind {
                    if n == "print" && scope.and_then(|s| s.lookup("print")).is_none() {
                        let v = self.expr(&args[0], scope)?;
                        self.output.push(display(&self.heap, v));
                        return Ok(Value::UNDEFINED);
                    }
                }
                let c = self.expr(callee, scope)?;
                let mut vs = Vec::with_capacity(args.len());
                for a in args {
                    vs.push(self.expr(a, scope)?);
                }
                self.call(c, &vs)?
            }
        })
    }

    fn read_modify_write(
        &mut self,
        op: BinOp,
        target: &Expr,
        rhs: impl FnOnce(&mut Self) -> R<Value>,
        scope: Option<&Rc<Scope>>,
    ) -> R<(Value, Value)> {
        let p = binop_prim(op);
        match &target.kind {
            ExprKind::Ident(n) => {
                let old = self.read(n, scope);
                let v = rhs(self)?;
                let new = self.prim(p, &[old, v])?;
                self.write(n, new, scope);
                Ok((old, new))
            }
            ExprKind::Member(o, name) => {
                let o = self.expr(o, scope)?;
                let k = self.name_value(name);
                let old = self.prim(PrimOp::GetProp, &[o, k])?;
                let v = rhs(self)?;
                let new = self.prim(p, &[old, v])?;
                self.prim(PrimOp::PutProp, &[o, k, new])?;
                Ok((old, new))
            }
            ExprKind::Index(o, i) => {
                let o = self.expr(o, scope)?;
                let i = self.expr(i, scope)?;
                let old = self.prim(PrimOp::GetIndex, &[o, i])?;
                let v = rhs(self)?;
                let new = self.prim(p, &[old, v])?;
                self.prim(PrimOp::PutIndex, &[o, i, new])?;
                Ok((old, new))
            }
            _ => unreachable!("rejected by lowering"),
        }
    }
}
