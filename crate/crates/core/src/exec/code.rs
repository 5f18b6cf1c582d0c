//! The patchable code buffer executed by the VM.
//!
//! Ops are appended and never move; only branch targets are rewritten in
//! place. Stubs live in a side table and are referenced from branch
//! targets until patched.

use std::fmt;
use std::rc::Rc;

use crate::bbv::VersionId;
use crate::ir::{BlockId, FuncId};
use crate::runtime::{LowOp, OvfOp, RuntimeError, TypeTag, Value};

/// Operand of an op: a frame slot or an immediate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MArg {
    Slot(u32),
    Imm(Value),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    /// The op right after the branch.
    Next,
    At(u32),
    Stub(u32),
}

/// A control transfer: parallel copies for the successor's phis, then a
/// jump.
#[derive(Clone, Debug, PartialEq)]
pub struct Dest {
    pub target: Target,
    pub moves: Rc<[(u32, MArg)]>,
}

impl Dest {
    pub fn new(target: Target, moves: Rc<[(u32, MArg)]>) -> Dest {
        Dest { target, moves }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MOp {
    /// Marks the first op of a block version; not counted as code.
    VersionEntry(VersionId),
    Low { op: LowOp, args: Rc<[MArg]>, out: Option<u32> },
    Ovf { op: OvfOp, lhs: MArg, rhs: MArg, out: u32, normal: Dest, overflow: Dest },
    Test { tag: TypeTag, value: MArg, taken: Dest, other: Dest },
    Branch { cond: MArg, then_to: Dest, else_to: Dest },
    Jump(Dest),
    /// Phi copies on a fall-through edge.
    Moves(Rc<[(u32, MArg)]>),
    Call { callee: MArg, args: Rc<[MArg]>, out: u32 },
    Return(MArg),
    Throw(RuntimeError),
    GlobalGet { global: u32, out: u32 },
    GlobalSet { global: u32, value: MArg },
    CellGet { cell: u32, out: u32 },
    CellSet { cell: u32, value: MArg },
    EnvGet { slot: u32, out: u32 },
    EnvSet { slot: u32, value: MArg },
    MakeClosure { func: FuncId, captures: Rc<[crate::ir::Capture]>, out: u32 },
    Print(MArg),
}

impl MOp {
    /// Code size of the op: one per op plus one per phi copy it carries.
    pub fn size(&self) -> u64 {
        let moves = |d: &Dest| d.moves.len() as u64;
        match self {
            MOp::VersionEntry(_) => 0,
            MOp::Moves(m) => m.len() as u64,
            MOp::Ovf { normal, overflow, .. } => 1 + moves(normal) + moves(overflow),
            MOp::Test { taken, other, .. } => 1 + moves(taken) + moves(other),
            MOp::Branch { then_to, else_to, .. } => 1 + moves(then_to) + moves(else_to),
            MOp::Jump(d) => 1 + moves(d),
            _ => 1,
        }
    }

    /// Mutable access to the branch arms, in operand order.
    pub fn dests_mut(&mut self) -> Vec<&mut Dest> {
        match self {
            MOp::Ovf { normal, overflow, .. } => vec![normal, overflow],
            MOp::Test { taken, other, .. } => vec![taken, other],
            MOp::Branch { then_to, else_to, .. } => vec![then_to, else_to],
            MOp::Jump(d) => vec![d],
            _ => vec![],
        }
    }

    pub fn dests(&self) -> Vec<&Dest> {
        match self {
            MOp::Ovf { normal, overflow, .. } => vec![normal, overflow],
            MOp::Test { taken, other, .. } => vec![taken, other],
            MOp::Branch { then_to, else_to, .. } => vec![then_to, else_to],
            MOp::Jump(d) => vec![d],
            _ => vec![],
        }
    }
}

/// A lazily resolved branch arm: compiles `block` under `context` when
/// first taken.
#[derive(Clone, Debug)]
pub struct Stub {
    pub func: FuncId,
    pub block: BlockId,
    pub context: crate::bbv::TypingContext,
    /// Branch op and arm index to patch.
    pub site: u32,
    pub arm: u8,
    pub resolved: Option<u32>,
}

#[derive(Clone, Debug, Default)]
pub struct CodeBuffer {
    pub ops: Vec<MOp>,
    pub stubs: Vec<Stub>,
    /// Running code size: op sizes plus one per stub.
    pub emitted: u64,
}

impl CodeBuffer {
    pub fn len(&self) -> u32 {
        self.ops.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn push(&mut self, op: MOp) -> u32 {
        self.emitted += op.size();
        self.ops.push(op);
        self.len() - 1
    }

    pub fn add_stub(&mut self, stub: Stub) -> u32 {
        self.emitted += 1;
        self.stubs.push(stub);
        self.stubs.len() as u32 - 1
    }

    /// Rewrites one arm of the branch at `site` to jump to `to`, turning it
    /// into a fall-through when `to` directly follows the branch.
    pub fn patch(&mut self, site: u32, arm: u8, to: u32) {
        let target = if to == site + 1 { Target::Next } else { Target::At(to) };
        let mut dests = self.ops[site as usize].dests_mut();
        dests[arm as usize].target = target;
    }
}

impl fmt::Display for MArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MArg::Slot(s) => write!(f, "r{s}"),
            MArg::Imm(Value::Int(i)) => write!(f, "{i}"),
            MArg::Imm(Value::Float(x)) => write!(f, "{x:?}"),
            MArg::Imm(Value::Const(c)) => write!(f, "{}", c.name()),
            MArg::Imm(v) => write!(f, "{v:?}"),
        }
    }
}

impl fmt::Display for Dest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (dst, src)) in self.moves.iter().enumerate() {
            write!(f, "{}r{dst}<-{src}", if i == 0 { "[" } else { ", " })?;
        }
        if !self.moves.is_empty() {
            write!(f, "] ")?;
        }
        match self.target {
            Target::Next => write!(f, "next"),
            Target::At(o) => write!(f, "@{o}"),
            Target::Stub(s) => write!(f, "stub{s}"),
        }
    }
}

fn list(args: &[MArg]) -> String {
    args.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for MOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MOp::VersionEntry(v) => write!(f, "; version {v}"),
            MOp::Low { op, args, out: Some(o) } => write!(f, "r{o} = {} {}", op.name(), list(args)),
            MOp::Low { op, args, out: None } => write!(f, "{} {}", op.name(), list(args)),
            MOp::Ovf { op, lhs, rhs, out, normal, overflow } => {
                write!(f, "r{out} = {} {lhs}, {rhs} ? {normal} : {overflow}", op.name())
            }
            MOp::Test { tag, value, taken, other } => write!(f, "{} {value} ? {taken} : {other}", tag.test_name()),
            MOp::Branch { cond, then_to, else_to } => write!(f, "branch {cond} ? {then_to} : {else_to}"),
            MOp::Jump(d) => write!(f, "jump {d}"),
            MOp::Moves(m) => {
                let parts: Vec<String> = m.iter().map(|(d, s)| format!("r{d}<-{s}")).collect();
                write!(f, "moves {}", parts.join(", "))
            }
            MOp::Call { callee, args, out } => write!(f, "r{out} = call {callee}({})", list(args)),
            MOp::Return(v) => write!(f, "return {v}"),
            MOp::Throw(e) => write!(f, "throw {}", e.code()),
            MOp::GlobalGet { global, out } => write!(f, "r{out} = global_get g{global}"),
            MOp::GlobalSet { global, value } => write!(f, "global_set g{global}, {value}"),
            MOp::CellGet { cell, out } => write!(f, "r{out} = cell_get {cell}"),
            MOp::CellSet { cell, value } => write!(f, "cell_set {cell}, {value}"),
            MOp::EnvGet { slot, out } => write!(f, "r{out} = env_get {slot}"),
            MOp::EnvSet { slot, value } => write!(f, "env_set {slot}, {value}"),
            MOp::MakeClosure { func, captures, out } => write!(f, "r{out} = make_closure {func} {captures:?}"),
            MOp::Print(v) => write!(f, "print {v}"),
        }
    }
}
