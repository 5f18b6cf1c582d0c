//! SSA control flow graph IR shared by every backend.

pub mod cfg;
pub mod cleanup;
pub mod liveness;
pub mod text;
pub mod validate;

use std::fmt;
use std::rc::Rc;

use crate::runtime::{Const, LowOp, OvfOp, PrimOp, RuntimeError, TypeTag};

pub use liveness::{liveness, LivenessInfo};
pub use validate::validate;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ValueId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FuncId(pub u32);

impl ValueId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl BlockId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl FuncId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ValueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}", self.0)
    }
}

impl fmt::Display for FuncId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

#[derive(Clone, Debug)]
pub enum Literal {
    Int(i32),
    Float(f64),
    Const(Const),
    Str(Rc<str>),
}

impl PartialEq for Literal {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Literal::Int(a), Literal::Int(b)) => a == b,
            (Literal::Float(a), Literal::Float(b)) => a.to_bits() == b.to_bits(),
            (Literal::Const(a), Literal::Const(b)) => a == b,
            (Literal::Str(a), Literal::Str(b)) => a == b,
            _ => false,
        }
    }
}

impl Literal {
    pub fn tag(&self) -> TypeTag {
        match self {
            Literal::Int(_) => TypeTag::Int32,
            Literal::Float(_) => TypeTag::Float64,
            Literal::Const(_) => TypeTag::Const,
            Literal::Str(_) => TypeTag::String,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Operand {
    Val(ValueId),
    Imm(Literal),
}

impl Operand {
    pub fn int(i: i32) -> Operand {
        Operand::Imm(Literal::Int(i))
    }

    pub fn konst(c: Const) -> Operand {
        Operand::Imm(Literal::Const(c))
    }

    pub fn str(s: &str) -> Operand {
        Operand::Imm(Literal::Str(s.into()))
    }

    pub fn as_val(&self) -> Option<ValueId> {
        match self {
            Operand::Val(v) => Some(*v),
            Operand::Imm(_) => None,
        }
    }

    pub fn literal_tag(&self) -> Option<TypeTag> {
        match self {
            Operand::Imm(l) => Some(l.tag()),
            Operand::Val(_) => None,
        }
    }
}

impl From<ValueId> for Operand {
    fn from(v: ValueId) -> Self {
        Operand::Val(v)
    }
}

/// Where a closure finds a captured variable when it is created: one of the
/// creating frame's own cells, or a slot of the creating closure's
/// environment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Capture {
    Cell(u32),
    Env(u32),
}

#[derive(Clone, Debug, PartialEq)]
pub enum InstKind {
    Low(LowOp, Vec<Operand>),
    /// Runtime primitive call; removed by primitive inlining.
    Prim(PrimOp, Vec<Operand>),
    /// Call of a value already known to be a closure.
    Call(Operand, Vec<Operand>),
    GlobalGet(Rc<str>),
    GlobalSet(Rc<str>, Operand),
    CellGet(u32),
    CellSet(u32, Operand),
    EnvGet(u32),
    EnvSet(u32, Operand),
    MakeClosure(FuncId, Vec<Capture>),
    Print(Operand),

    Jump(BlockId),
    /// Branch on a boolean constant.
    Branch { cond: Operand, then_to: BlockId, else_to: BlockId },
    /// Dynamic type test; `taken` is reached when the tag holds.
    TestTag { tag: TypeTag, value: Operand, taken: BlockId, other: BlockId },
    /// Overflow-checked int32 arithmetic. The instruction's output is only
    /// defined along the `normal` edge.
    ArithOvf { op: OvfOp, lhs: Operand, rhs: Operand, normal: BlockId, overflow: BlockId },
    Return(Operand),
    Throw(RuntimeError),
}

impl InstKind {
    pub fn is_terminator(&self) -> bool {
        matches!(
            self,
            InstKind::Jump(_)
                | InstKind::Branch { .. }
                | InstKind::TestTag { .. }
                | InstKind::ArithOvf { .. }
                | InstKind::Return(_)
                | InstKind::Throw(_)
        )
    }

    pub fn successors(&self) -> Vec<BlockId> {
        match self {
            InstKind::Jump(b) => vec![*b],
            InstKind::Branch { then_to, else_to, .. } => vec![*then_to, *else_to],
            InstKind::TestTag { taken, other, .. } => vec![*taken, *other],
            InstKind::ArithOvf { normal, overflow, .. } => vec![*normal, *overflow],
            _ => vec![],
        }
    }

    pub fn successors_mut(&mut self) -> Vec<&mut BlockId> {
        match self {
            InstKind::Jump(b) => vec![b],
            InstKind::Branch { then_to, else_to, .. } => vec![then_to, else_to],
            InstKind::TestTag { taken, other, .. } => vec![taken, other],
            InstKind::ArithOvf { normal, overflow, .. } => vec![normal, overflow],
            _ => vec![],
        }
    }

    pub fn operands(&self) -> Vec<&Operand> {
        match self {
            InstKind::Low(_, a) | InstKind::Prim(_, a) => a.iter().collect(),
            InstKind::Call(c, a) => std::iter::once(c).chain(a.iter()).collect(),
            InstKind::GlobalSet(_, v)
            | InstKind::CellSet(_, v)
            | InstKind::EnvSet(_, v)
            | InstKind::Print(v)
            | InstKind::Return(v) => vec![v],
            InstKind::Branch { cond, .. } => vec![cond],
            InstKind::TestTag { value, .. } => vec![value],
            InstKind::ArithOvf { lhs, rhs, .. } => vec![lhs, rhs],
            InstKind::GlobalGet(_)
            | InstKind::CellGet(_)
            | InstKind::EnvGet(_)
            | InstKind::MakeClosure(..)
            | InstKind::Jump(_)
            | InstKind::Throw(_) => vec![],
        }
    }

    pub fn operands_mut(&mut self) -> Vec<&mut Operand> {
        match self {
            InstKind::Low(_, a) | InstKind::Prim(_, a) => a.iter_mut().collect(),
            InstKind::Call(c, a) => std::iter::once(c).chain(a.iter_mut()).collect(),
            InstKind::GlobalSet(_, v)
            | InstKind::CellSet(_, v)
            | InstKind::EnvSet(_, v)
            | InstKind::Print(v)
            | InstKind::Return(v) => vec![v],
            InstKind::Branch { cond, .. } => vec![cond],
            InstKind::TestTag { value, .. } => vec![value],
            InstKind::ArithOvf { lhs, rhs, .. } => vec![lhs, rhs],
            _ => vec![],
        }
    }

    /// Whether this instruction produces a value.
    pub fn has_output(&self) -> bool {
        match self {
            InstKind::Low(op, _) => op.has_output(),
            InstKind::Prim(p, _) => p.has_output(),
            InstKind::Call(..)
            | InstKind::GlobalGet(_)
            | InstKind::CellGet(_)
            | InstKind::EnvGet(_)
            | InstKind::MakeClosure(..)
            | InstKind::ArithOvf { .. } => true,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Inst {
    pub out: Option<ValueId>,
    pub kind: InstKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Phi {
    pub out: ValueId,
    /// One incoming operand per predecessor edge.
    pub incoming: Vec<(BlockId, Operand)>,
}

impl Phi {
    pub fn incoming_from(&self, pred: BlockId) -> Option<&Operand> {
        self.incoming.iter().find(|(b, _)| *b == pred).map(|(_, o)| o)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Block {
    pub phis: Vec<Phi>,
    /// Body instructions followed by exactly one terminator.
    pub insts: Vec<Inst>,
}

impl Block {
    pub fn terminator(&self) -> &Inst {
        self.insts.last().expect("block has no terminator")
    }

    pub fn terminator_mut(&mut self) -> &mut Inst {
        self.insts.last_mut().expect("block has no terminator")
    }

    pub fn body(&self) -> &[Inst] {
        &self.insts[..self.insts.len().saturating_sub(1)]
    }

    pub fn successors(&self) -> Vec<BlockId> {
        self.insts.last().map(|t| t.kind.successors()).unwrap_or_default()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IrFunction {
    pub name: String,
    pub params: Vec<ValueId>,
    /// Cells allocated per activation for captured locals.
    pub n_cells: u32,
    /// Number of captured slots the closure environment provides.
    pub n_env: u32,
    pub entry: BlockId,
    pub blocks: Vec<Block>,
    /// Size of the SSA value table; values are `v0 .. v{n_values-1}`.
    pub n_values: u32,
}

impl IrFunction {
    pub fn block(&self, b: BlockId) -> &Block {
        &self.blocks[b.index()]
    }

    pub fn block_mut(&mut self, b: BlockId) -> &mut Block {
        &mut self.blocks[b.index()]
    }

    pub fn block_ids(&self) -> impl Iterator<Item = BlockId> {
        (0..self.blocks.len() as u32).map(BlockId)
    }

    pub fn new_value(&mut self) -> ValueId {
        self.n_values += 1;
        ValueId(self.n_values - 1)
    }

    pub fn new_block(&mut self) -> BlockId {
        self.blocks.push(Block::default());
        BlockId(self.blocks.len() as u32 - 1)
    }

    /// Counts `TestTag` terminators, optionally for a single tag.
    pub fn count_tests(&self, tag: Option<TypeTag>) -> usize {
        self.blocks
            .iter()
            .filter(|b| match b.insts.last().map(|i| &i.kind) {
                Some(InstKind::TestTag { tag: t, .. }) => tag.is_none_or(|x| x == *t),
                _ => false,
            })
            .count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    pub functions: Vec<IrFunction>,
    /// The implicit top-level function.
    pub main: FuncId,
}

impl Program {
    pub fn function(&self, f: FuncId) -> &IrFunction {
        &self.functions[f.index()]
    }

    pub fn find(&self, name: &str) -> Option<FuncId> {
        self.functions.iter().position(|f| f.name == name).map(|i| FuncId(i as u32))
    }
}
