//! Flow-sensitive representation analysis over sets of type tags.
//!
//! A sparse-conditional style fixed point: blocks are processed only once
//! some incoming edge is reachable, every value maps to the set of tags it
//! may carry, and type tests narrow the tested value on both outgoing
//! edges (to the tag on the taken edge, to the remaining tags on the
//! other). Edges whose narrowed set is empty are unreachable.

use std::fmt;

use crate::ir::cfg::reverse_postorder;
use crate::ir::cleanup::cleanup;
use crate::ir::{BlockId, InstKind, IrFunction, Literal, Operand, Program, ValueId};
use crate::runtime::{Const, TypeTag};

/// A set of type tags. The full set is the unknown type.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct TypeSet(u8);

impl TypeSet {
    pub const EMPTY: TypeSet = TypeSet(0);
    pub const TOP: TypeSet = TypeSet(0x7f);

    pub fn of(t: TypeTag) -> TypeSet {
        TypeSet(1 << t.index())
    }

    pub fn from_tags<I: IntoIterator<Item = TypeTag>>(tags: I) -> TypeSet {
        tags.into_iter().fold(TypeSet::EMPTY, |s, t| s.union(TypeSet::of(t)))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, t: TypeTag) -> bool {
        self.0 & (1 << t.index()) != 0
    }

    pub fn union(self, o: TypeSet) -> TypeSet {
        TypeSet(self.0 | o.0)
    }

    pub fn intersect(self, o: TypeSet) -> TypeSet {
        TypeSet(self.0 & o.0)
    }

    pub fn minus(self, o: TypeSet) -> TypeSet {
        TypeSet(self.0 & !o.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, o: TypeSet) -> bool {
        self.0 & !o.0 == 0
    }

    pub fn tags(self) -> impl Iterator<Item = TypeTag> {
        TypeTag::ALL.into_iter().filter(move |t| self.contains(*t))
    }
}

impl fmt::Debug for TypeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == TypeSet::TOP {
            return write!(f, "any");
        }
        let names: Vec<&str> = self.tags().map(|t| t.short_name()).collect();
        write!(f, "{{{}}}", names.join(","))
    }
}

/// Per-value sets, indexed by value id.
pub type Env = Vec<TypeSet>;

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub from: BlockId,
    /// Successor position in the terminator.
    pub arm: usize,
    pub to: BlockId,
    /// Sets holding when control traverses the edge, before the
    /// successor's phis.
    pub env: Env,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisResult {
    /// Reachable edges only.
    pub edges: Vec<Edge>,
    /// Sets at block entry after phis; `None` for unreachable blocks.
    pub block_in: Vec<Option<Env>>,
    /// Set of the tested value at each block ending in a type test.
    pub tested: Vec<Option<TypeSet>>,
}

impl AnalysisResult {
    pub fn edge(&self, from: BlockId, arm: usize) -> Option<&Edge> {
        self.edges.iter().find(|e| e.from == from && e.arm == arm)
    }

    pub fn is_reachable(&self, b: BlockId) -> bool {
        self.block_in[b.index()].is_some()
    }
}

fn operand_set(env: &Env, o: &Operand) -> TypeSet {
    match o {
        Operand::Val(v) => env[v.index()],
        Operand::Imm(l) => TypeSet::of(l.tag()),
    }
}

fn inst_set(kind: &InstKind) -> TypeSet {
    match kind {
        InstKind::Low(op, _) => op.result_tag().map(TypeSet::of).unwrap_or(TypeSet::TOP),
        InstKind::MakeClosure(..) => TypeSet::of(TypeTag::Closure),
        InstKind::ArithOvf { .. } => TypeSet::of(TypeTag::Int32),
        _ => TypeSet::TOP,
    }
}

/// Runs the analysis to its least fixed point.
pub fn analyze(f: &IrFunction) -> AnalysisResult {
    let n = f.blocks.len();
    let nv = f.n_values as usize;
    let rpo = reverse_postorder(f);
    let mut edges: Vec<Vec<Option<Env>>> = f.blocks.iter().map(|b| vec![None; b.successors().len()]).collect();
    let mut block_in: Vec<Option<Env>> = vec![None; n];
    let mut tested: Vec<Option<TypeSet>> = vec![None; n];
    let preds = crate::ir::cfg::predecessors(f);

    let mut changed = true;
    while changed {
        changed = false;
        for &b in &rpo {
            let block = f.block(b);
            // Entry state: join of the reachable incoming edges.
            let mut env: Option<Env> = None;
            if b == f.entry {
                let mut e = vec![TypeSet::EMPTY; nv];
                for p in &f.params {
                    e[p.index()] = TypeSet::TOP;
                }
                env = Some(e);
            }
            let mut incoming: Vec<(BlockId, &Env)> = Vec::new();
            for &p in &preds[b.index()] {
                let succs = f.block(p).successors();
                for (arm, s) in succs.iter().enumerate() {
                    if *s == b {
                        if let Some(e) = &edges[p.index()][arm] {
                            incoming.push((p, e));
                        }
                    }
                }
            }
            for (_, e) in &incoming {
                let acc = env.get_or_insert_with(|| vec![TypeSet::EMPTY; nv]);
                for (a, x) in acc.iter_mut().zip(e.iter()) {
                    *a = a.union(*x);
                }
            }
            let Some(mut env) = env else { continue };
            for phi in &block.phis {
                let mut s = TypeSet::EMPTY;
                for (p, e) in &incoming {
                    if let Some(o) = phi.incoming_from(*p) {
                        s = s.union(operand_set(e, o));
                    }
                }
                env[phi.out.index()] = s;
            }
            if block_in[b.index()].as_ref() != Some(&env) {
                block_in[b.index()] = Some(env.clone());
            }
            for inst in block.body() {
                if let Some(o) = inst.out {
                    env[o.index()] = inst_set(&inst.kind);
                }
            }
            let term = block.terminator();
            let outs: Vec<Option<Env>> = match &term.kind {
                InstKind::Jump(_) => vec![Some(env)],
                InstKind::TestTag { tag, value, .. } => {
                    let s = operand_set(&env, value);
                    tested[b.index()] = Some(s);
                    let t = TypeSet::of(*tag);
                    let arm = |narrowed: TypeSet| {
                        if narrowed.is_empty() {
                            return None;
                        }
                        let mut e = env.clone();
                        if let Operand::Val(v) = value {
                            e[v.index()] = narrowed;
                        }
                        Some(e)
                    };
                    vec![arm(s.intersect(t)), arm(s.minus(t))]
                }
                InstKind::Branch { cond, .. } => match cond {
                    Operand::Imm(Literal::Const(c)) => {
                        let taken = *c == Const::True;
                        vec![taken.then(|| env.clone()), (!taken).then(|| env.clone())]
                    }
                    _ => vec![Some(env.clone()), Some(env)],
                },
                InstKind::ArithOvf { .. } => {
                    let out = term.out.expect("overflow op has an output");
                    let mut normal = env.clone();
                    normal[out.index()] = TypeSet::of(TypeTag::Int32);
                    vec![Some(normal), Some(env)]
                }
                _ => vec![],
            };
            for (arm, e) in outs.into_iter().enumerate() {
                let slot = &mut edges[b.index()][arm];
                // Sets only grow; joining keeps the iteration monotone.
                let merged = match (&*slot, e) {
                    (None, e) => e,
                    (Some(old), None) => Some(old.clone()),
                    (Some(old), Some(new)) => Some(old.iter().zip(new.iter()).map(|(a, b)| a.union(*b)).collect()),
                };
                if *slot != merged {
                    changed = true;
                    *slot = merged;
                }
            }
        }
    }

    let mut out_edges = Vec::new();
    for b in f.block_ids() {
        let succs = f.block(b).successors();
        for (arm, e) in edges[b.index()].iter().enumerate() {
            if let Some(env) = e {
                out_edges.push(Edge { from: b, arm, to: succs[arm], env: env.clone() });
            }
        }
    }
    AnalysisResult { edges: out_edges, block_in, tested }
}

/// Replaces every type test decided by `r` with a jump and removes the
/// code that becomes unreachable.
pub fn apply_analysis(f: &IrFunction, r: &AnalysisResult) -> IrFunction {
    let mut g = f.clone();
    for b in f.block_ids() {
        let Some(s) = r.tested[b.index()] else { continue };
        if s.is_empty() {
            continue;
        }
        let term = g.block_mut(b).terminator_mut();
        if let InstKind::TestTag { tag, taken, other, .. } = term.kind {
            let t = TypeSet::of(tag);
            if s.is_subset(t) {
                term.kind = InstKind::Jump(taken);
            } else if s.intersect(t).is_empty() {
                term.kind = InstKind::Jump(other);
            }
        }
    }
    cleanup(&mut g);
    g
}

pub fn apply_analysis_program(p: &Program) -> Program {
    Program {
        functions: p.functions.iter().map(|f| apply_analysis(f, &analyze(f))).collect(),
        main: p.main,
    }
}

/// Text report of the sets on every reachable edge, listing only values
/// with a non-empty set.
pub fn dump_analysis(f: &IrFunction, r: &AnalysisResult) -> String {
    let mut s = format!("function {}\n", f.name);
    for e in &r.edges {
        let sets: Vec<String> = e
            .env
            .iter()
            .enumerate()
            .filter(|(_, t)| !t.is_empty())
            .map(|(v, t)| format!("{}={t:?}", ValueId(v as u32)))
            .collect();
        s.push_str(&format!("  {} -> {}: {}\n", e.from, e.to, sets.join(" ")));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::compile_source;
    use crate::ir::validate;

    fn func(src: &str, name: &str) -> IrFunction {
        let p = compile_source(src).unwrap();
        p.function(p.find(name).unwrap()).clone()
    }

    fn return_set(f: &IrFunction, r: &AnalysisResult) -> TypeSet {
        let mut s = TypeSet::EMPTY;
        for b in f.block_ids() {
            if let (Some(env), InstKind::Return(o)) = (&r.block_in[b.index()], &f.block(b).terminator().kind) {
                let mut env = env.clone();
                for inst in f.block(b).body() {
                    if let Some(out) = inst.out {
                        env[out.index()] = inst_set(&inst.kind);
                    }
                }
                s = s.union(operand_set(&env, o));
            }
        }
        s
    }

    #[test]
    fn literal_return_is_int32() {
        let f = func("function f() { return 1; }", "f");
        assert_eq!(return_set(&f, &analyze(&f)), TypeSet::of(TypeTag::Int32));
    }

    #[test]
    fn int_addition_may_overflow_to_float() {
        let f = func("function f(a, b) { a = a | 0; b = b | 0; return a + b; }", "f");
        let r = analyze(&f);
        assert_eq!(return_set(&f, &r), TypeSet::from_tags([TypeTag::Int32, TypeTag::Float64]));
    }

    #[test]
    fn tests_narrow_both_ways() {
        let f = func("function f(x) { return -x; }", "f");
        let r = analyze(&f);
        // The first test on x is on a parameter: x is unknown before it.
        let b = f.block_ids().find(|b| r.tested[b.index()].is_some()).unwrap();
        let InstKind::TestTag { tag, value: Operand::Val(x), .. } = f.block(b).terminator().kind else { panic!() };
        assert_eq!(r.tested[b.index()], Some(TypeSet::TOP));
        assert_eq!(r.edge(b, 0).unwrap().env[x.index()], TypeSet::of(tag));
        assert_eq!(r.edge(b, 1).unwrap().env[x.index()], TypeSet::TOP.minus(TypeSet::of(tag)));
    }

    #[test]
    fn straight_line_int_literals_lose_all_tests() {
        let f = func("function f() { var a = 1; var b = a + 2; var c = b * 3; return c - a; }", "f");
        assert!(f.count_tests(None) > 0);
        let g = apply_analysis(&f, &analyze(&f));
        assert!(validate(&g).is_empty());
        // Only the tests on possibly-overflowed results remain.
        assert!(g.count_tests(None) < f.count_tests(None));
        let h = func("function f() { var a = 1; var b = 2; return a < b; }", "f");
        assert_eq!(apply_analysis(&h, &analyze(&h)).count_tests(None), 0);
    }

    #[test]
    fn fixed_point_is_stable() {
        let f = func(
            "function f(n) { var s = 0; for (var i = 0; i < n; i++) { s = s + i * 0.5; } return s; }",
            "f",
        );
        let r = analyze(&f);
        assert_eq!(analyze(&f), r);
        let g = apply_analysis(&f, &r);
        assert!(validate(&g).is_empty());
    }
}
