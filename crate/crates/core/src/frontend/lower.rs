//! AST to SSA lowering.
//!
//! SSA form is built directly while walking the AST (Braun et al.,
//! "Simple and Efficient Construction of Static Single Assignment Form"):
//! each block records the current definition of every local, reads in
//! unsealed blocks create incomplete phis, and trivial phis are removed
//! afterwards. Locals captured by nested functions live in per-activation
//! cells instead; names that resolve to no enclosing function are globals.

use std::collections::HashMap;
use std::rc::Rc;

use super::ast::{declared_names, hoisted_functions, visit_free_names, Ast, BinOp, Expr, ExprKind, ForInit, FuncDecl, Pos, Stmt, UnOp};
use super::LowerError;
use crate::ir::cleanup::cleanup;
use crate::ir::{BlockId, Capture, FuncId, Inst, InstKind, IrFunction, Literal, Operand, Phi, Program, ValueId};
use crate::runtime::{Const, LowOp, PrimOp};

pub fn lower(ast: &Ast) -> Result<Program, LowerError> {
    let mut funcs: Vec<Option<IrFunction>> = vec![None];
    let main = FuncDecl { name: Some("main".into()), params: vec![], body: ast.body.clone(), pos: Pos::default() };
    let f = FnBuilder::lower_function(&mut funcs, &main, &[], true)?;
    funcs[0] = Some(f);
    Ok(Program { functions: funcs.into_iter().map(|f| f.expect("every function lowered")).collect(), main: FuncId(0) })
}

pub(crate) fn binop_prim(op: BinOp) -> PrimOp {
    match op {
        BinOp::Add => PrimOp::Add,
        BinOp::Sub => PrimOp::Sub,
        BinOp::Mul => PrimOp::Mul,
        BinOp::Div => PrimOp::Div,
        BinOp::Mod => PrimOp::Mod,
        BinOp::BitAnd => PrimOp::And,
        BinOp::BitOr => PrimOp::Or,
        BinOp::BitXor => PrimOp::Xor,
        BinOp::Shl => PrimOp::Shl,
        BinOp::Shr => PrimOp::Shr,
        BinOp::Lt => PrimOp::Lt,
        BinOp::Le => PrimOp::Le,
        BinOp::Gt => PrimOp::Gt,
        BinOp::Ge => PrimOp::Ge,
        BinOp::Eq => PrimOp::Eq,
        BinOp::Ne => PrimOp::Ne,
    }
}

#[derive(Clone, Copy, Debug)]
enum Var {
    Ssa(usize),
    Cell(u32),
    Env(u32),
}

fn undefined() -> Operand {
    Operand::konst(Const::Undefined)
}

/// Function declarations and expressions directly inside `body`, not
/// nested in other functions.
fn direct_nested(body: &[Stmt]) -> Vec<Rc<FuncDecl>> {
    fn stmt(s: &Stmt, out: &mut Vec<Rc<FuncDecl>>) {
        match s {
            Stmt::Var(ds) => ds.iter().filter_map(|d| d.init.as_ref()).for_each(|e| expr(e, out)),
            Stmt::Expr(e) => expr(e, out),
            Stmt::If(c, t, e) => {
                expr(c, out);
                stmt(t, out);
                if let Some(e) = e {
                    stmt(e, out);
                }
            }
            Stmt::While(c, b) => {
                expr(c, out);
                stmt(b, out);
            }
            Stmt::For { init, cond, update, body } => {
                match init {
                    Some(ForInit::Var(ds)) => ds.iter().filter_map(|d| d.init.as_ref()).for_each(|e| expr(e, out)),
                    Some(ForInit::Expr(e)) => expr(e, out),
                    None => {}
                }
                cond.iter().chain(update.iter()).for_each(|e| expr(e, out));
                stmt(body, out);
            }
            Stmt::Return(e, _) => e.iter().for_each(|e| expr(e, out)),
            Stmt::Block(b) => b.iter().for_each(|s| stmt(s, out)),
            Stmt::Function(f) => out.push(f.clone()),
            Stmt::Empty => {}
        }
    }
    fn expr(e: &Expr, out: &mut Vec<Rc<FuncDecl>>) {
        match &e.kind {
            ExprKind::Function(f) => out.push(f.clone()),
            ExprKind::Unary(_, a) | ExprKind::Member(a, _) => expr(a, out),
            ExprKind::Update { target, .. } => expr(target, out),
            ExprKind::Binary(_, a, b) | ExprKind::Index(a, b) | ExprKind::Assign(_, a, b) => {
                expr(a, out);
                expr(b, out);
            }
            ExprKind::Array(es) => es.iter().for_each(|e| expr(e, out)),
            ExprKind::Object(ps) => ps.iter().for_each(|(_, e)| expr(e, out)),
            ExprKind::Call(c, args) => {
                expr(c, out);
                args.iter().for_each(|e| expr(e, out));
            }
            _ => {}
        }
    }
    let mut out = Vec::new();
    body.iter().for_each(|s| stmt(s, &mut out));
    out
}

struct FnBuilder<'a> {
    funcs: &'a mut Vec<Option<IrFunction>>,
    f: IrFunction,
    cur: BlockId,
    preds: Vec<Vec<BlockId>>,
    sealed: Vec<bool>,
    defs: Vec<HashMap<usize, Operand>>,
    incomplete: Vec<Vec<(usize, ValueId)>>,
    vars: HashMap<String, Var>,
    /// Locals of this function and every enclosing non-top-level function,
    /// innermost last; used to compute nested environments.
    scopes: Vec<Vec<String>>,
}

impl<'a> FnBuilder<'a> {
    fn lower_function(
        funcs: &'a mut Vec<Option<IrFunction>>,
        decl: &FuncDecl,
        outer: &[Vec<String>],
        top_level: bool,
    ) -> Result<IrFunction, LowerError> {
        let mut locals: Vec<String> = Vec::new();
        if !top_level {
            for p in decl.params.iter().cloned().chain(declared_names(&decl.body)) {
                if !locals.contains(&p) {
                    locals.push(p);
                }
            }
        }
        // Locals that some nested function refers to.
        let mut captured: Vec<String> = Vec::new();
        for n in direct_nested(&decl.body) {
            visit_free_names(&n, &mut |name| {
                if locals.iter().any(|l| l == name) && !captured.iter().any(|c| c == name) {
                    captured.push(name.to_string());
                }
            });
        }
        // Free names bound by an enclosing function form the environment.
        let mut env: Vec<String> = Vec::new();
        if !top_level {
            visit_free_names(decl, &mut |name| {
                if outer.iter().any(|s| s.iter().any(|l| l == name)) && !env.iter().any(|e| e == name) {
                    env.push(name.to_string());
                }
            });
        }

        let mut vars = HashMap::new();
        let mut n_ssa = 0;
        let mut n_cells = 0;
        for (i, name) in env.iter().enumerate() {
            vars.insert(name.clone(), Var::Env(i as u32));
        }
        for name in &locals {
            if captured.contains(name) {
                vars.insert(name.clone(), Var::Cell(n_cells));
                n_cells += 1;
            } else {
                vars.insert(name.clone(), Var::Ssa(n_ssa));
                n_ssa += 1;
            }
        }

        let name = decl.name.clone().unwrap_or_else(|| format!("anon_{}_{}", decl.pos.line, decl.pos.col));
        let params: Vec<ValueId> = (0..decl.params.len() as u32).map(ValueId).collect();
        let f = IrFunction {
            name,
            params: params.clone(),
            n_cells,
            n_env: env.len() as u32,
            entry: BlockId(0),
            blocks: vec![],
            n_values: params.len() as u32,
        };
        let mut scopes = outer.to_vec();
        if !top_level {
            scopes.push(locals.clone());
        }
        let mut b = FnBuilder {
            funcs,
            f,
            cur: BlockId(0),
            preds: vec![],
            sealed: vec![],
            defs: vec![],
            incomplete: vec![],
            vars,
            scopes,
        };
        let entry = b.new_block();
        b.seal(entry);
        b.cur = entry;

        // Entry: parameters and locals get their initial values.
        for name in &locals {
            let param = decl.params.iter().rposition(|p| p == name).map(|i| Operand::Val(params[i]));
            match b.vars[name] {
                Var::Ssa(i) => b.write_var(i, entry, param.unwrap_or_else(undefined)),
                Var::Cell(slot) => {
                    if let Some(p) = param {
                        b.emit(InstKind::CellSet(slot, p));
                    }
                }
                Var::Env(_) => unreachable!("locals shadow the environment"),
            }
        }
        for h in hoisted_functions(&decl.body) {
            let clo = b.closure(&h)?;
            let name = h.name.as_deref().expect("declarations are named");
            b.assign_name(name, clo);
        }

        for s in &decl.body {
            b.stmt(s)?;
        }
        b.terminate(InstKind::Return(undefined()));
        let mut f = b.finish();
        cleanup(&mut f);
        Ok(f)
    }

    fn finish(mut self) -> IrFunction {
        // Any block left unsealed is unreachable from here on.
        for i in 0..self.sealed.len() {
            if !self.sealed[i] {
                self.seal(BlockId(i as u32));
            }
        }
        self.f
    }

    fn new_block(&mut self) -> BlockId {
        let b = self.f.new_block();
        self.preds.push(vec![]);
        self.sealed.push(false);
        self.defs.push(HashMap::new());
        self.incomplete.push(vec![]);
        b
    }

    fn emit(&mut self, kind: InstKind) -> Option<ValueId> {
        let out = kind.has_output().then(|| self.f.new_value());
        self.f.blocks[self.cur.index()].insts.push(Inst { out, kind });
        out
    }

    fn value(&mut self, kind: InstKind) -> Operand {
        Operand::Val(self.emit(kind).expect("instruction has an output"))
    }

    /// Ends the current block. Code after it goes to a fresh block with no
    /// predecessors, which cleanup removes.
    fn terminate(&mut self, kind: InstKind) {
        let from = self.cur;
        for s in kind.successors() {
            self.preds[s.index()].push(from);
        }
        self.f.blocks[from.index()].insts.push(Inst { out: None, kind });
        let dead = self.new_block();
        self.seal(dead);
        self.cur = dead;
    }

    fn jump_to(&mut self, target: BlockId) {
        self.terminate(InstKind::Jump(target));
    }

    // SSA construction.

    fn write_var(&mut self, var: usize, b: BlockId, v: Operand) {
        self.defs[b.index()].insert(var, v);
    }

    fn read_var(&mut self, var: usize, b: BlockId) -> Operand {
        if let Some(v) = self.defs[b.index()].get(&var) {
            return v.clone();
        }
        let v = if !self.sealed[b.index()] {
            let phi = self.new_phi(b);
            self.incomplete[b.index()].push((var, phi));
            Operand::Val(phi)
        } else if self.preds[b.index()].len() == 1 {
            let p = self.preds[b.index()][0];
            self.read_var(var, p)
        } else if self.preds[b.index()].is_empty() {
            undefined()
        } else {
            let phi = self.new_phi(b);
            self.write_var(var, b, Operand::Val(phi));
            self.add_phi_operands(var, b, phi);
            Operand::Val(phi)
        };
        self.write_var(var, b, v.clone());
        v
    }

    fn new_phi(&mut self, b: BlockId) -> ValueId {
        let out = self.f.new_value();
        self.f.blocks[b.index()].phis.push(Phi { out, incoming: vec![] });
        out
    }

    fn add_phi_operands(&mut self, var: usize, b: BlockId, phi: ValueId) {
        for p in self.preds[b.index()].clone() {
            let v = self.read_var(var, p);
            let slot = self.f.blocks[b.index()].phis.iter_mut().find(|x| x.out == phi).expect("phi exists");
            slot.incoming.push((p, v));
        }
    }

    fn seal(&mut self, b: BlockId) {
        for (var, phi) in std::mem::take(&mut self.incomplete[b.index()]) {
            self.add_phi_operands(var, b, phi);
        }
        self.sealed[b.index()] = true;
    }

    // Names.

    fn read_name(&mut self, name: &str) -> Operand {
        match self.vars.get(name).copied() {
            Some(Var::Ssa(i)) => self.read_var(i, self.cur),
            Some(Var::Cell(slot)) => self.value(InstKind::CellGet(slot)),
            Some(Var::Env(slot)) => self.value(InstKind::EnvGet(slot)),
            None => self.value(InstKind::GlobalGet(name.into())),
        }
    }

    fn assign_name(&mut self, name: &str, v: Operand) {
        match self.vars.get(name).copied() {
            Some(Var::Ssa(i)) => self.write_var(i, self.cur, v),
            Some(Var::Cell(slot)) => {
                self.emit(InstKind::CellSet(slot, v));
            }
            Some(Var::Env(slot)) => {
                self.emit(InstKind::EnvSet(slot, v));
            }
            None => {
                self.emit(InstKind::GlobalSet(name.into(), v));
            }
        }
    }

    fn closure(&mut self, decl: &FuncDecl) -> Result<Operand, LowerError> {
        let id = FuncId(self.funcs.len() as u32);
        self.funcs.push(None);
        let f = FnBuilder::lower_function(&mut *self.funcs, decl, &self.scopes, false)?;
        let mut env: Vec<String> = Vec::new();
        // Recompute the nested environment in the same order lower_function does.
        let scopes = &self.scopes;
        visit_free_names(decl, &mut |name| {
            if scopes.iter().any(|s| s.iter().any(|l| l == name)) && !env.iter().any(|e| e == name) {
                env.push(name.to_string());
            }
        });
        debug_assert_eq!(env.len() as u32, f.n_env);
        self.funcs[id.index()] = Some(f);
        let caps = env
            .iter()
            .map(|name| match self.vars.get(name) {
                Some(Var::Cell(slot)) => Capture::Cell(*slot),
                Some(Var::Env(slot)) => Capture::Env(*slot),
                other => unreachable!("captured name {name} resolved to {other:?}"),
            })
            .collect();
        Ok(self.value(InstKind::MakeClosure(id, caps)))
    }

    // Statements.

    fn stmt(&mut self, s: &Stmt) -> Result<(), LowerError> {
        match s {
            Stmt::Var(ds) => {
                for d in ds {
                    if let Some(init) = &d.init {
                        let v = self.expr(init)?;
                        self.assign_name(&d.name, v);
                    }
                }
            }
            Stmt::Expr(e) => {
                self.expr(e)?;
            }
            Stmt::If(c, t, e) => {
                let then_b = self.new_block();
                let join = self.new_block();
                let else_b = if e.is_some() { self.new_block() } else { join };
                self.cond(c, then_b, else_b)?;
                self.seal(then_b);
                if e.is_some() {
                    self.seal(else_b);
                }
                self.cur = then_b;
                self.stmt(t)?;
                self.jump_to(join);
                if let Some(e) = e {
                    self.cur = else_b;
                    self.stmt(e)?;
                    self.jump_to(join);
                }
                self.seal(join);
                self.cur = join;
            }
            Stmt::While(c, body) => self.lower_loop(Some(c), None, body)?,
            Stmt::For { init, cond, update, body } => {
                match init {
                    Some(ForInit::Var(ds)) => self.stmt(&Stmt::Var(ds.clone()))?,
                    Some(ForInit::Expr(e)) => {
                        self.expr(e)?;
                    }
                    None => {}
                }
                self.lower_loop(cond.as_ref(), update.as_ref(), body)?;
            }
            Stmt::Return(e, _) => {
                let v = match e {
                    Some(e) => self.expr(e)?,
                    None => undefined(),
                };
                self.terminate(InstKind::Return(v));
            }
            Stmt::Block(b) => {
                for s in b {
                    self.stmt(s)?;
                }
            }
            // Declarations are hoisted to the function entry.
            Stmt::Function(_) | Stmt::Empty => {}
        }
        Ok(())
    }

    fn lower_loop(&mut self, cond: Option<&Expr>, update: Option<&Expr>, body: &Stmt) -> Result<(), LowerError> {
        let header = self.new_block();
        self.jump_to(header);
        self.cur = header;
        let body_b = self.new_block();
        let exit = self.new_block();
        match cond {
            Some(c) => self.cond(c, body_b, exit)?,
            None => self.jump_to(body_b),
        }
        self.seal(body_b);
        self.cur = body_b;
        self.stmt(body)?;
        if let Some(u) = update {
            self.expr(u)?;
        }
        self.jump_to(header);
        self.seal(header);
        self.seal(exit);
        self.cur = exit;
        Ok(())
    }

    /// Branches on the truth of `c`. Comparisons and `!` already produce
    /// booleans; literals are decided statically.
    fn cond(&mut self, c: &Expr, then_b: BlockId, else_b: BlockId) -> Result<(), LowerError> {
        let literal = match &c.kind {
            ExprKind::Bool(b) => Some(*b),
            ExprKind::Null | ExprKind::Undefined => Some(false),
            ExprKind::Int(i) => Some(*i != 0),
            ExprKind::Float(x) => Some(*x != 0.0 && !x.is_nan()),
            ExprKind::Str(s) => Some(!s.is_empty()),
            _ => None,
        };
        if let Some(b) = literal {
            self.jump_to(if b { then_b } else { else_b });
            return Ok(());
        }
        let v = self.expr(c)?;
        let boolean = matches!(
            &c.kind,
            ExprKind::Binary(BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne, _, _)
                | ExprKind::Unary(UnOp::Not, _)
        );
        let cond = if boolean { v } else { self.value(InstKind::Prim(PrimOp::ToBool, vec![v])) };
        self.terminate(InstKind::Branch { cond, then_to: then_b, else_to: else_b });
        Ok(())
    }

    // Expressions.

    fn prim(&mut self, p: PrimOp, args: Vec<Operand>) -> Operand {
        match self.emit(InstKind::Prim(p, args)) {
            Some(v) => Operand::Val(v),
            None => undefined(),
        }
    }

    fn expr(&mut self, e: &Expr) -> Result<Operand, LowerError> {
        Ok(match &e.kind {
            ExprKind::Int(i) => Operand::int(*i),
            ExprKind::Float(x) => Operand::Imm(Literal::Float(*x)),
            ExprKind::Str(s) => Operand::str(s),
            ExprKind::Bool(b) => Operand::konst(Const::from_bool(*b)),
            ExprKind::Null => Operand::konst(Const::Null),
            ExprKind::Undefined => undefined(),
            ExprKind::Ident(n) => self.read_name(n),
            ExprKind::Unary(op, a) => {
                let a = self.expr(a)?;
                let p = match op {
                    UnOp::Neg => PrimOp::Neg,
                    UnOp::Not => PrimOp::Not,
                };
                self.prim(p, vec![a])
            }
            ExprKind::Binary(op, a, b) => {
                let a = self.expr(a)?;
                let b = self.expr(b)?;
                self.prim(binop_prim(*op), vec![a, b])
            }
            ExprKind::Array(es) => {
                let mut vs = Vec::with_capacity(es.len());
                for e in es {
                    vs.push(self.expr(e)?);
                }
                self.value(InstKind::Low(LowOp::ArrNew, vs))
            }
            ExprKind::Object(ps) => {
                let o = self.value(InstKind::Low(LowOp::ObjNew, vec![]));
                for (k, e) in ps {
                    let v = self.expr(e)?;
                    self.emit(InstKind::Low(LowOp::ObjSet, vec![o.clone(), Operand::str(k), v]));
                }
                o
            }
            ExprKind::Index(o, i) => {
                let o = self.expr(o)?;
                let i = self.expr(i)?;
                self.prim(PrimOp::GetIndex, vec![o, i])
            }
            ExprKind::Member(o, name) => {
                let o = self.expr(o)?;
                self.prim(PrimOp::GetProp, vec![o, Operand::str(name)])
            }
            ExprKind::Assign(op, target, value) => self.assign(*op, target, value, e.pos)?,
            ExprKind::Update { increment, prefix, target } => {
                let op = if *increment { BinOp::Add } else { BinOp::Sub };
                let one = Expr { kind: ExprKind::Int(1), pos: e.pos };
                let (old, new) = self.read_modify_write(op, target, &one, e.pos)?;
                if *prefix {
                    new
                } else {
                    old
                }
            }
            ExprKind::Function(decl) => self.closure(decl)?,
            ExprKind::Call(callee, args) => {
                if let ExprKind::Ident(n) = &callee.kind {
                    if n == "print" && !self.vars.contains_key("print") {
                        if args.len() != 1 {
                            return Err(LowerError {
                                line: e.pos.line,
                                col: e.pos.col,
                                message: "print takes exactly one argument".into(),
                            });
                        }
                        let v = self.expr(&args[0])?;
                        self.emit(InstKind::Print(v));
                        return Ok(undefined());
                    }
                }
                let mut vs = vec![self.expr(callee)?];
                for a in args {
                    vs.push(self.expr(a)?);
                }
                self.prim(PrimOp::Call, vs)
            }
        })
    }

    fn assign(&mut self, op: Option<BinOp>, target: &Expr, value: &Expr, pos: Pos) -> Result<Operand, LowerError> {
        if let Some(op) = op {
            return Ok(self.read_modify_write(op, target, value, pos)?.1);
        }
        match &target.kind {
            ExprKind::Ident(n) => {
                let v = self.expr(value)?;
                self.assign_name(n, v.clone());
                Ok(v)
            }
            ExprKind::Member(o, name) => {
                let o = self.expr(o)?;
                let v = self.expr(value)?;
                self.prim(PrimOp::PutProp, vec![o, Operand::str(name), v.clone()]);
                Ok(v)
            }
            ExprKind::Index(o, i) => {
                let o = self.expr(o)?;
                let i = self.expr(i)?;
                let v = self.expr(value)?;
                self.prim(PrimOp::PutIndex, vec![o, i, v.clone()]);
                Ok(v)
            }
            _ => Err(invalid_target(pos)),
        }
    }

    /// `target = target op value`, evaluating the target's subexpressions
    /// once. Returns the old and the new value.
    fn read_modify_write(
        &mut self,
        op: BinOp,
        target: &Expr,
        value: &Expr,
        pos: Pos,
    ) -> Result<(Operand, Operand), LowerError> {
        let p = binop_prim(op);
        match &target.kind {
            ExprKind::Ident(n) => {
                let old = self.read_name(n);
                let v = self.expr(value)?;
                let new = self.prim(p, vec![old.clone(), v]);
                self.assign_name(n, new.clone());
                Ok((old, new))
            }
            ExprKind::Member(o, name) => {
                let o = self.expr(o)?;
                let old = self.prim(PrimOp::GetProp, vec![o.clone(), Operand::str(name)]);
                let v = self.expr(value)?;
                let new = self.prim(p, vec![old.clone(), v]);
                self.prim(PrimOp::PutProp, vec![o, Operand::str(name), new.clone()]);
                Ok((old, new))
            }
            ExprKind::Index(o, i) => {
                let o = self.expr(o)?;
                let i = self.expr(i)?;
                let old = self.prim(PrimOp::GetIndex, vec![o.clone(), i.clone()]);
                let v = self.expr(value)?;
                let new = self.prim(p, vec![old.clone(), v]);
                self.prim(PrimOp::PutIndex, vec![o, i, new.clone()]);
                Ok((old, new))
            }
            _ => Err(invalid_target(pos)),
        }
    }
}

fn invalid_target(pos: Pos) -> LowerError {
    LowerError { line: pos.line, col: pos.col, message: "invalid assignment target".into() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;
    use crate::ir::cfg::{dominators, predecessors};
    use crate::ir::text::print_function;
    use crate::ir::validate;

    fn lower_src(src: &str) -> Program {
        let p = lower(&parse(src).unwrap()).unwrap();
        for f in &p.functions {
            let d = validate(f);
            assert!(d.is_empty(), "{d:?}\n{}", print_function(f));
        }
        p
    }

    const SUM: &str = "function sum(n) { var i = 0; var s = 0; while (i < n) { s = s + i; i++; } return s; }";

    #[test]
    fn sum_has_a_loop_with_two_phis() {
        let p = lower_src(SUM);
        let f = p.function(p.find("sum").unwrap());
        // entry, header, body, exit
        assert_eq!(f.blocks.len(), 4, "{}", print_function(f));
        let preds = predecessors(f);
        let idom = dominators(f);
        let headers: Vec<usize> = (0..f.blocks.len())
            .filter(|&b| preds[b].iter().any(|p| crate::ir::cfg::dominates(&idom, BlockId(b as u32), *p)))
            .collect();
        assert_eq!(headers.len(), 1);
        assert_eq!(f.blocks[headers[0]].phis.len(), 2);
        let prims: Vec<PrimOp> = f
            .blocks
            .iter()
            .flat_map(|b| b.insts.iter())
            .filter_map(|i| match &i.kind {
                InstKind::Prim(p, _) => Some(*p),
                _ => None,
            })
            .collect();
        assert_eq!(prims, vec![PrimOp::Lt, PrimOp::Add, PrimOp::Add]);
    }

    #[test]
    fn top_level_names_are_globals() {
        let p = lower_src("var x = 1; function f() { return x; } x = f();");
        let main = p.function(p.main);
        let text = print_function(main);
        assert!(text.contains("global_set \"x\", 1"), "{text}");
        assert!(text.contains("global_set \"f\""), "{text}");
        let f = p.function(p.find("f").unwrap());
        assert!(print_function(f).contains("global_get \"x\""));
    }

    #[test]
    fn captured_locals_use_cells_and_env() {
        let p = lower_src(
            "function counter() { var n = 0; return function() { n = n + 1; return n; }; }",
        );
        let c = p.function(p.find("counter").unwrap());
        assert_eq!(c.n_cells, 1);
        let text = print_function(c);
        assert!(text.contains("make_closure f2 [cell 0]"), "{text}");
        assert!(text.contains("cell_set 0, 0"), "{text}");
        let inner = &p.functions[2];
        assert_eq!(inner.n_env, 1);
        let t = print_function(inner);
        assert!(t.contains("env_get 0") && t.contains("env_set 0"), "{t}");
    }

    #[test]
    fn environments_chain_through_intermediate_functions() {
        let p = lower_src("function a(x) { return function() { return function() { return x; }; }; }");
        let a = p.function(p.find("a").unwrap());
        assert!(print_function(a).contains("cell_set 0, v0"));
        let mid = &p.functions[2];
        assert!(print_function(mid).contains("make_closure f3 [env 0]"), "{}", print_function(mid));
    }

    #[test]
    fn print_is_an_instruction_unless_shadowed() {
        let p = lower_src("print(1);");
        assert!(print_function(p.function(p.main)).contains("print 1"));
        let p = lower_src("function f(print) { print(1); }");
        let t = print_function(p.function(p.find("f").unwrap()));
        assert!(t.contains("prim call v0, 1"), "{t}");
    }

    #[test]
    fn code_after_return_is_dropped() {
        let p = lower_src("function f() { return 1; print(2); }");
        let f = p.function(p.find("f").unwrap());
        assert_eq!(f.blocks.len(), 1);
        assert!(!print_function(f).contains("print"));
    }

    #[test]
    fn postfix_update_yields_old_value() {
        let p = lower_src("function f(a) { var b = a++; return b; }");
        let t = print_function(p.function(p.find("f").unwrap()));
        assert!(t.contains("v1 = prim add v0, 1"), "{t}");
        assert!(t.contains("return v0"), "{t}");
    }

    #[test]
    fn if_without_else_joins_with_phi() {
        let p = lower_src("function f(a) { var r = 1; if (a) { r = 2; } return r; }");
        let f = p.function(p.find("f").unwrap());
        let t = print_function(f);
        assert!(t.contains("prim to_bool v0"), "{t}");
        assert_eq!(f.blocks.iter().map(|b| b.phis.len()).sum::<usize>(), 1, "{t}");
    }

    #[test]
    fn print_arity_is_checked() {
        let e = lower(&parse("print(1, 2);").unwrap()).unwrap_err();
        assert_eq!((e.line, e.col), (1, 1));
    }
}
