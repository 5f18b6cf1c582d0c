use std::collections::HashMap;
use std::fmt;

use super::cfg::{dominates, dominators, predecessors, reverse_postorder};
use super::{BlockId, InstKind, IrFunction, Operand, ValueId};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub function: String,
    pub block: Option<BlockId>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.block {
            Some(b) => write!(f, "{}:{}: {}", self.function, b, self.message),
            None => write!(f, "{}: {}", self.function, self.message),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum DefSite {
    Param,
    Phi(BlockId),
    Inst(BlockId, usize),
    /// Output of an overflow-checked op, available from the normal successor.
    EdgeStart(BlockId),
}

/// Checks the structural and SSA invariants of a function. Returns an empty
/// list iff all of them hold.
pub fn validate(f: &IrFunction) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    macro_rules! push {
        ($block:expr, $msg:expr) => {
            diags.push(Diagnostic { function: f.name.clone(), block: $block, message: $msg })
        };
    }
    let nblocks = f.blocks.len();
    if f.entry.index() >= nblocks {
        push!(None, format!("entry {} out of range", f.entry));
        return diags;
    }

    let mut structural_ok = true;
    for b in f.block_ids() {
        let block = f.block(b);
        match block.insts.last() {
            None => {
                push!(Some(b), "block has no terminator".into());
                structural_ok = false;
            }
            Some(t) if !t.kind.is_terminator() => {
                push!(Some(b), "block does not end in a terminator".into());
                structural_ok = false;
            }
            _ => {}
        }
        for (i, inst) in block.insts.iter().enumerate() {
            if inst.kind.is_terminator() && i + 1 != block.insts.len() {
                push!(Some(b), format!("terminator at position {i} is not last"));
                structural_ok = false;
            }
            if inst.out.is_some() && !inst.kind.has_output() {
                push!(Some(b), format!("instruction {i} defines a value but produces none"));
            }
            if let InstKind::Low(op, args) = &inst.kind {
                if !op.is_variadic() && args.len() != op.operand_tags().len() {
                    push!(Some(b), format!("{} expects {} operands", op.name(), op.operand_tags().len()));
                }
            }
            if let InstKind::ArithOvf { normal, overflow, .. } = &inst.kind {
                if inst.out.is_none() {
                    push!(Some(b), "overflow-checked op without output".into());
                }
                if normal == overflow {
                    push!(Some(b), "overflow-checked op with identical successors".into());
                }
            }
            for s in inst.kind.successors() {
                if s.index() >= nblocks {
                    push!(Some(b), format!("successor {s} out of range"));
                    structural_ok = false;
                }
            }
        }
    }
    if !structural_ok {
        return diags;
    }

    let preds = predecessors(f);
    if !preds[f.entry.index()].is_empty() {
        push!(Some(f.entry), "entry block has predecessors".into());
    }
    let reachable = reverse_postorder(f);
    if reachable.len() != nblocks {
        let mut seen = vec![false; nblocks];
        reachable.iter().for_each(|b| seen[b.index()] = true);
        for b in f.block_ids().filter(|b| !seen[b.index()]) {
            push!(Some(b), "unreachable block".into());
        }
    }

    // Edges and phis.
    for b in f.block_ids() {
        let succs = f.block(b).successors();
        if succs.len() == 2 && succs[0] == succs[1] && !f.block(succs[0]).phis.is_empty() {
            push!(Some(b), format!("both edges lead to {} which has phis", succs[0]));
        }
        for phi in &f.block(b).phis {
            let mut expected = preds[b.index()].clone();
            expected.sort();
            expected.dedup();
            let mut got: Vec<BlockId> = phi.incoming.iter().map(|(p, _)| *p).collect();
            got.sort();
            let before = got.len();
            got.dedup();
            if got.len() != before {
                push!(Some(b), format!("phi {} has duplicate incoming blocks", phi.out));
            }
            for p in &expected {
                if !got.contains(p) {
                    push!(Some(b), format!("phi {} missing incoming value for predecessor {p}", phi.out));
                }
            }
            for p in &got {
                if !expected.contains(p) {
                    push!(Some(b), format!("phi {} has incoming value from non-predecessor {p}", phi.out));
                }
            }
        }
    }

    // Single definitions.
    let mut defs: HashMap<ValueId, DefSite> = HashMap::new();
    let mut define = |v: ValueId, site: DefSite, diags: &mut Vec<Diagnostic>| {
        if v.0 >= f.n_values {
            diags.push(Diagnostic { function: f.name.clone(), block: None, message: format!("{v} outside value table") });
        }
        if defs.insert(v, site).is_some() {
            diags.push(Diagnostic { function: f.name.clone(), block: None, message: format!("{v} defined more than once") });
        }
    };
    for p in &f.params {
        define(*p, DefSite::Param, &mut diags);
    }
    for b in f.block_ids() {
        for phi in &f.block(b).phis {
            define(phi.out, DefSite::Phi(b), &mut diags);
        }
        for (i, inst) in f.block(b).insts.iter().enumerate() {
            if let Some(o) = inst.out {
                let site = match &inst.kind {
                    InstKind::ArithOvf { normal, .. } => {
                        if preds[normal.index()].len() != 1 {
                            diags.push(Diagnostic {
                                function: f.name.clone(),
                                block: Some(b),
                                message: format!("normal successor {normal} of overflow-checked op must have one predecessor"),
                            });
                        }
                        DefSite::EdgeStart(*normal)
                    }
                    _ => DefSite::Inst(b, i),
                };
                define(o, site, &mut diags);
            }
        }
    }

    // Definitions dominate uses.
    let idom = dominators(f);
    let available = |v: ValueId, b: BlockId, pos: usize| -> bool {
        match defs.get(&v) {
            None => false,
            Some(DefSite::Param) => true,
            Some(DefSite::Phi(d)) | Some(DefSite::EdgeStart(d)) => dominates(&idom, *d, b),
            Some(DefSite::Inst(d, i)) => {
                if *d == b {
                    *i < pos
                } else {
                    dominates(&idom, *d, b)
                }
            }
        }
    };
    for &b in &reachable {
        let block = f.block(b);
        for (i, inst) in block.insts.iter().enumerate() {
            for op in inst.kind.operands() {
                if let Operand::Val(v) = op {
                    if !available(*v, b, i) {
                        push!(Some(b), format!("use of {v} is not dominated by its definition"));
                    }
                }
            }
        }
        for phi in &block.phis {
            for (p, op) in &phi.incoming {
                if let Operand::Val(v) = op {
                    if p.index() < nblocks && idom[p.index()].is_some() && !available(*v, *p, usize::MAX) {
                        push!(Some(b), format!("phi {} uses {v} not available at the end of {p}", phi.out));
                    }
                }
            }
        }
    }
    diags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{Block, Inst, Phi};

    fn ret(v: u32) -> Inst {
        Inst { out: None, kind: InstKind::Return(Operand::Val(ValueId(v))) }
    }

    fn one_block(insts: Vec<Inst>) -> IrFunction {
        IrFunction {
            name: "t".into(),
            params: vec![ValueId(0)],
            n_cells: 0,
            n_env: 0,
            entry: BlockId(0),
            blocks: vec![Block { phis: vec![], insts }],
            n_values: 1,
        }
    }

    #[test]
    fn valid_single_block() {
        assert!(validate(&one_block(vec![ret(0)])).is_empty());
    }

    #[test]
    fn two_terminators() {
        let d = validate(&one_block(vec![ret(0), ret(0)]));
        assert!(d.iter().any(|d| d.message.contains("not last")), "{d:?}");
    }

    #[test]
    fn phi_missing_predecessor() {
        let mut f = one_block(vec![Inst { out: None, kind: InstKind::Jump(BlockId(1)) }]);
        f.blocks.push(Block {
            phis: vec![Phi { out: ValueId(1), incoming: vec![] }],
            insts: vec![ret(1)],
        });
        f.n_values = 2;
        let d = validate(&f);
        assert!(d.iter().any(|d| d.message.contains("missing incoming")), "{d:?}");
    }

    #[test]
    fn use_before_def() {
        let mut f = one_block(vec![ret(1)]);
        f.n_values = 2;
        assert!(!validate(&f).is_empty());
    }
}
