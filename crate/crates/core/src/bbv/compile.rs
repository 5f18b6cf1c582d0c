//! Compilation of block versions into the code buffer.
//!
//! A version is compiled by walking its block while tracking the known tag
//! of every value. Type tests whose outcome is known emit nothing, and
//! control continues into the decided successor. When a successor version
//! does not exist yet it is compiled directly after the current one, so
//! straight-line paths need no jumps. Branches whose direction is unknown
//! get two stubs in lazy mode; in eager mode both successors are queued and
//! the branch targets fixed up once the function is done.

use std::collections::{HashMap, VecDeque};
use std::rc::Rc;

use super::{MaxVers, Request, TypingContext, VersionId, VersionTable};
use crate::exec::code::{CodeBuffer, Dest, MArg, MOp, Stub, Target};
use crate::ir::{liveness, BlockId, FuncId, InstKind, IrFunction, Literal, LivenessInfo, Operand, Program, ValueId};
use crate::runtime::{Heap, LowOp, TypeTag, Value};

/// Register moves performed on an edge, as (destination slot, source).
type Moves = Rc<[(u32, MArg)]>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EngineMode {
    Lazy,
    Eager,
}

struct FuncInfo {
    live: LivenessInfo,
    /// Blocks whose body may transfer control elsewhere before reaching the
    /// terminator (calls, fallible stores). Their successors are compiled
    /// lazily even when the direction is known, so that code is laid out in
    /// execution order.
    barrier: Vec<bool>,
}

pub struct Engine {
    pub program: Rc<Program>,
    pub mode: EngineMode,
    pub limit: MaxVers,
    pub code: CodeBuffer,
    pub versions: VersionTable,
    pub compiler_invocations: u64,
    funcs: Vec<FuncInfo>,
    entries: Vec<Option<u32>>,
    pub global_names: Vec<Rc<str>>,
    global_index: HashMap<Rc<str>, u32>,
    strings: HashMap<Rc<str>, Value>,
    known: Vec<Option<TypeTag>>,
    queue: VecDeque<VersionId>,
    fixups: Vec<(u32, u8, VersionId)>,
}

fn is_barrier(f: &IrFunction, b: BlockId) -> bool {
    f.block(b)
        .body()
        .iter()
        .any(|i| matches!(i.kind, InstKind::Call(..) | InstKind::Low(LowOp::ArrSet, _)))
}

impl Engine {
    pub fn new(program: Rc<Program>, mode: EngineMode, limit: MaxVers) -> Engine {
        let funcs = program
            .functions
            .iter()
            .map(|f| FuncInfo { live: liveness(f), barrier: f.block_ids().map(|b| is_barrier(f, b)).collect() })
            .collect();
        let n = program.functions.len();
        Engine {
            program,
            mode,
            limit,
            code: CodeBuffer::default(),
            versions: VersionTable::new(),
            compiler_invocations: 0,
            funcs,
            entries: vec![None; n],
            global_names: vec![],
            global_index: HashMap::new(),
            strings: HashMap::new(),
            known: vec![],
            queue: VecDeque::new(),
            fixups: vec![],
        }
    }

    pub fn live_in(&self, f: FuncId, b: BlockId) -> &std::collections::BTreeSet<ValueId> {
        self.funcs[f.index()].live.live_in(b)
    }

    pub fn global_slot(&mut self, name: &Rc<str>) -> u32 {
        if let Some(&i) = self.global_index.get(name) {
            return i;
        }
        let i = self.global_names.len() as u32;
        self.global_names.push(name.clone());
        self.global_index.insert(name.clone(), i);
        i
    }

    /// Offset of the function's entry version, compiling it on first use.
    pub fn entry(&mut self, f: FuncId, heap: &mut Heap) -> u32 {
        if let Some(o) = self.entries[f.index()] {
            return o;
        }
        self.compiler_invocations += 1;
        let entry = self.program.function(f).entry;
        let ctx = TypingContext::generic(self.live_in(f, entry).iter().copied());
        let id = self.versions.request(f, entry, &ctx, self.limit).id();
        if self.versions.get(id).start.is_none() {
            self.compile_chain(id, heap);
        }
        if self.mode == EngineMode::Eager {
            self.drain(heap);
        }
        let start = self.versions.get(id).start.expect("entry compiled");
        self.entries[f.index()] = Some(start);
        start
    }

    /// Resolves a stub hit: obtains the target version, compiling it at the
    /// end of the buffer if needed, and patches the branch. Returns the
    /// offset to continue at.
    pub fn resolve_stub(&mut self, id: u32, heap: &mut Heap) -> u32 {
        self.compiler_invocations += 1;
        let stub = self.code.stubs[id as usize].clone();
        let vid = self.versions.request(stub.func, stub.block, &stub.context, self.limit).id();
        if self.versions.get(vid).start.is_none() {
            self.compile_chain(vid, heap);
        }
        let start = self.versions.get(vid).start.expect("version compiled");
        self.code.patch(stub.site, stub.arm, start);
        self.code.stubs[id as usize].resolved = Some(start);
        start
    }

    fn drain(&mut self, heap: &mut Heap) {
        while let Some(id) = self.queue.pop_front() {
            if self.versions.get(id).start.is_none() {
                self.compile_chain(id, heap);
            }
        }
        for (site, arm, id) in std::mem::take(&mut self.fixups) {
            let start = self.versions.get(id).start.expect("queued version compiled");
            self.code.patch(site, arm, start);
        }
    }

    fn imm(&mut self, lit: &Literal, heap: &mut Heap) -> Value {
        match lit {
            Literal::Int(i) => Value::Int(*i),
            Literal::Float(x) => Value::Float(*x),
            Literal::Const(c) => Value::Const(*c),
            Literal::Str(s) => *self.strings.entry(s.clone()).or_insert_with(|| heap.alloc_str(&**s)),
        }
    }

    fn arg(&mut self, o: &Operand, heap: &mut Heap) -> MArg {
        match o {
            Operand::Val(v) => MArg::Slot(v.0),
            Operand::Imm(l) => MArg::Imm(self.imm(l, heap)),
        }
    }

    fn args(&mut self, os: &[Operand], heap: &mut Heap) -> Rc<[MArg]> {
        os.iter().map(|o| self.arg(o, heap)).collect()
    }

    fn tag_of(&self, o: &Operand, narrow: Option<(ValueId, TypeTag)>) -> Option<TypeTag> {
        match o {
            Operand::Imm(l) => Some(l.tag()),
            Operand::Val(v) => match narrow {
                Some((n, t)) if n == *v => Some(t),
                _ => self.known[v.index()],
            },
        }
    }

    /// Context and phi copies for the edge `from -> succ`. `narrow` is a
    /// tag learned on this edge.
    fn edge(
        &mut self,
        func: FuncId,
        f: &IrFunction,
        from: BlockId,
        succ: BlockId,
        narrow: Option<(ValueId, TypeTag)>,
        heap: &mut Heap,
    ) -> (TypingContext, Moves) {
        let block = f.block(succ);
        let live = self.funcs[func.index()].live.live_in(succ).clone();
        let mut entries = Vec::with_capacity(live.len());
        let mut moves = Vec::new();
        for v in live {
            let tag = match block.phis.iter().find(|p| p.out == v) {
                Some(phi) => {
                    let inc = phi.incoming_from(from).expect("phi has an entry for every predecessor");
                    if *inc != Operand::Val(v) {
                        let a = self.arg(inc, heap);
                        moves.push((v.0, a));
                    }
                    self.tag_of(inc, narrow)
                }
                None => self.tag_of(&Operand::Val(v), narrow),
            };
            entries.push((v, tag));
        }
        (TypingContext::new(entries), moves.into())
    }

    /// Unconditional transfer. Returns the version to compile next in the
    /// chain, if the successor has no code yet.
    fn goto(&mut self, func: FuncId, succ: BlockId, ctx: TypingContext, moves: Moves, barrier: bool) -> Option<VersionId> {
        if barrier && self.mode == EngineMode::Lazy {
            let site = self.code.len();
            let stub = self.code.add_stub(Stub { func, block: succ, context: ctx, site, arm: 0, resolved: None });
            self.code.push(MOp::Jump(Dest::new(Target::Stub(stub), moves)));
            return None;
        }
        let id = self.versions.request(func, succ, &ctx, self.limit).id();
        match self.versions.get(id).start {
            Some(start) => {
                self.code.push(MOp::Jump(Dest::new(Target::At(start), moves)));
                None
            }
            None => {
                if !moves.is_empty() {
                    self.code.push(MOp::Moves(moves));
                }
                Some(id)
            }
        }
    }

    /// Targets for the arms of a branch about to be pushed at the end of
    /// the buffer.
    fn arms(&mut self, func: FuncId, arms: Vec<(BlockId, TypingContext, Moves)>) -> Vec<Dest> {
        let site = self.code.len();
        let mut dests = Vec::with_capacity(arms.len());
        for (i, (succ, ctx, moves)) in arms.into_iter().enumerate() {
            let target = match self.mode {
                EngineMode::Lazy => {
                    let s = Stub { func, block: succ, context: ctx, site, arm: i as u8, resolved: None };
                    Target::Stub(self.code.add_stub(s))
                }
                EngineMode::Eager => {
                    let r = self.versions.request(func, succ, &ctx, self.limit);
                    match (r, self.versions.get(r.id()).start) {
                        (_, Some(start)) => Target::At(start),
                        (Request::New(id), None) => {
                            self.queue.push_back(id);
                            self.fixups.push((site, i as u8, id));
                            Target::At(u32::MAX)
                        }
                        (Request::Existing(id), None) => {
                            self.fixups.push((site, i as u8, id));
                            Target::At(u32::MAX)
                        }
                    }
                }
            };
            dests.push(Dest::new(target, moves));
        }
        dests
    }

    /// Compiles `id` and then, as long as control continues into a
    /// successor version that has no code yet, that successor.
    fn compile_chain(&mut self, id: VersionId, heap: &mut Heap) {
        let program = self.program.clone();
        let mut cur = id;
        loop {
            let (func, bid, ctx) = {
                let v = self.versions.get(cur);
                (v.func, v.block, v.context.clone())
            };
            let f = program.function(func);
            let start = self.code.push(MOp::VersionEntry(cur));
            self.versions.get_mut(cur).start = Some(start);
            self.known.clear();
            self.known.resize(f.n_values as usize, None);
            for &(v, t) in ctx.entries() {
                self.known[v.index()] = t;
            }
            let block = f.block(bid);
            for inst in block.body() {
                let out = inst.out.map(|v| v.0);
                let (op, tag) = match &inst.kind {
                    InstKind::Low(op, args) => {
                        (MOp::Low { op: *op, args: self.args(args, heap), out }, op.result_tag())
                    }
                    InstKind::Call(c, args) => {
                        let callee = self.arg(c, heap);
                        (MOp::Call { callee, args: self.args(args, heap), out: out.unwrap() }, None)
                    }
                    InstKind::GlobalGet(n) => (MOp::GlobalGet { global: self.global_slot(n), out: out.unwrap() }, None),
                    InstKind::GlobalSet(n, v) => {
                        let global = self.global_slot(n);
                        (MOp::GlobalSet { global, value: self.arg(v, heap) }, None)
                    }
                    InstKind::CellGet(c) => (MOp::CellGet { cell: *c, out: out.unwrap() }, None),
                    InstKind::CellSet(c, v) => (MOp::CellSet { cell: *c, value: self.arg(v, heap) }, None),
                    InstKind::EnvGet(s) => (MOp::EnvGet { slot: *s, out: out.unwrap() }, None),
                    InstKind::EnvSet(s, v) => (MOp::EnvSet { slot: *s, value: self.arg(v, heap) }, None),
                    InstKind::MakeClosure(fid, caps) => (
                        MOp::MakeClosure { func: *fid, captures: caps.clone().into(), out: out.unwrap() },
                        Some(TypeTag::Closure),
                    ),
                    InstKind::Print(v) => (MOp::Print(self.arg(v, heap)), None),
                    InstKind::Prim(p, _) => panic!("primitive {} was not inlined", p.name()),
                    k => panic!("terminator {k:?} in block body"),
                };
                self.code.push(op);
                if let Some(o) = inst.out {
                    self.known[o.index()] = tag;
                }
            }
            let barrier = self.funcs[func.index()].barrier[bid.index()];
            let next = match &block.terminator().kind {
                InstKind::Jump(s) => {
                    let (ctx, moves) = self.edge(func, f, bid, *s, None, heap);
                    self.goto(func, *s, ctx, moves, barrier)
                }
                InstKind::TestTag { tag, value, taken, other } => match self.tag_of(value, None) {
                    Some(t) => {
                        let s = if t == *tag { *taken } else { *other };
                        let (ctx, moves) = self.edge(func, f, bid, s, None, heap);
                        self.goto(func, s, ctx, moves, barrier)
                    }
                    None => {
                        let narrow = value.as_val().map(|v| (v, *tag));
                        let t = self.edge(func, f, bid, *taken, narrow, heap);
                        let o = self.edge(func, f, bid, *other, None, heap);
                        let value = self.arg(value, heap);
                        let mut d = self.arms(func, vec![(*taken, t.0, t.1), (*other, o.0, o.1)]).into_iter();
                        let (taken, other) = (d.next().unwrap(), d.next().unwrap());
                        self.code.push(MOp::Test { tag: *tag, value, taken, other });
                        None
                    }
                },
                InstKind::Branch { cond, then_to, else_to } => match cond {
                    Operand::Imm(Literal::Const(c)) => {
                        let s = if *c == crate::runtime::Const::True { *then_to } else { *else_to };
                        let (ctx, moves) = self.edge(func, f, bid, s, None, heap);
                        self.goto(func, s, ctx, moves, barrier)
                    }
                    _ => {
                        let t = self.edge(func, f, bid, *then_to, None, heap);
                        let e = self.edge(func, f, bid, *else_to, None, heap);
                        let cond = self.arg(cond, heap);
                        let mut d = self.arms(func, vec![(*then_to, t.0, t.1), (*else_to, e.0, e.1)]).into_iter();
                        let (then_to, else_to) = (d.next().unwrap(), d.next().unwrap());
                        self.code.push(MOp::Branch { cond, then_to, else_to });
                        None
                    }
                },
                InstKind::ArithOvf { op, lhs, rhs, normal, overflow } => {
                    let out = block.terminator().out.expect("overflow op has an output");
                    let n = self.edge(func, f, bid, *normal, Some((out, TypeTag::Int32)), heap);
                    let o = self.edge(func, f, bid, *overflow, None, heap);
                    let (lhs, rhs) = (self.arg(lhs, heap), self.arg(rhs, heap));
                    let mut d = self.arms(func, vec![(*normal, n.0, n.1), (*overflow, o.0, o.1)]).into_iter();
                    let (normal, overflow) = (d.next().unwrap(), d.next().unwrap());
                    self.code.push(MOp::Ovf { op: *op, lhs, rhs, out: out.0, normal, overflow });
                    None
                }
                InstKind::Return(v) => {
                    let v = self.arg(v, heap);
                    self.code.push(MOp::Return(v));
                    None
                }
                InstKind::Throw(e) => {
                    self.code.push(MOp::Throw(*e));
                    None
                }
                k => panic!("{k:?} is not a terminator"),
            };
            self.versions.get_mut(cur).end = Some(self.code.len());
            match next {
                Some(n) => cur = n,
                None => break,
            }
        }
    }
}
