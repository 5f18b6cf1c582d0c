use std::collections::BTreeSet;

use super::cfg::reverse_postorder;
use super::{BlockId, IrFunction, Operand, ValueId};

/// Values live at the entry of each block, after phi resolution: a block's
/// own phi outputs are included when they are used.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LivenessInfo {
    pub live_in: Vec<BTreeSet<ValueId>>,
    pub live_out: Vec<BTreeSet<ValueId>>,
}

impl LivenessInfo {
    pub fn live_in(&self, b: BlockId) -> &BTreeSet<ValueId> {
        &self.live_in[b.index()]
    }

    pub fn is_live_anywhere(&self, v: ValueId) -> bool {
        self.live_in.iter().chain(self.live_out.iter()).any(|s| s.contains(&v))
    }
}

/// Backward dataflow fixed point.
pub fn liveness(f: &IrFunction) -> LivenessInfo {
    let n = f.blocks.len();
    // Per block: values used before any local definition, and local defs.
    let mut upward = vec![BTreeSet::new(); n];
    let mut defs = vec![BTreeSet::new(); n];
    for b in f.block_ids() {
        let block = f.block(b);
        let (up, d) = (&mut upward[b.index()], &mut defs[b.index()]);
        for p in &block.phis {
            d.insert(p.out);
        }
        for inst in &block.insts {
            for op in inst.kind.operands() {
                if let Operand::Val(v) = op {
                    if !d.contains(v) {
                        up.insert(*v);
                    }
                }
            }
            if let Some(o) = inst.out {
                d.insert(o);
            }
        }
    }
    let phi_outs: Vec<BTreeSet<ValueId>> =
        f.blocks.iter().map(|b| b.phis.iter().map(|p| p.out).collect()).collect();

    let mut live_in = vec![BTreeSet::new(); n];
    let mut live_out = vec![BTreeSet::new(); n];
    let mut order = reverse_postorder(f);
    order.reverse();
    let mut changed = true;
    while changed {
        changed = false;
        for &b in &order {
            let mut out = BTreeSet::new();
            for s in f.block(b).successors() {
                let s_in: &BTreeSet<ValueId> = &live_in[s.index()];
                out.extend(s_in.difference(&phi_outs[s.index()]).copied());
                for p in &f.block(s).phis {
                    if s_in.contains(&p.out) {
                        if let Some(Operand::Val(v)) = p.incoming_from(b) {
                            out.insert(*v);
                        }
                    }
                }
            }
            let mut inn: BTreeSet<ValueId> = upward[b.index()].clone();
            inn.extend(out.difference(&defs[b.index()]).copied());
            for p in &phi_outs[b.index()] {
                if upward_uses_phi(f, b, *p) || out.contains(p) {
                    inn.insert(*p);
                }
            }
            if inn != live_in[b.index()] || out != live_out[b.index()] {
                live_in[b.index()] = inn;
                live_out[b.index()] = out;
                changed = true;
            }
        }
    }
    LivenessInfo { live_in, live_out }
}

fn upward_uses_phi(f: &IrFunction, b: BlockId, v: ValueId) -> bool {
    f.block(b)
        .insts
        .iter()
        .any(|i| i.kind.operands().into_iter().any(|o| *o == Operand::Val(v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{Block, Inst, InstKind, Phi};
    use crate::runtime::{OvfOp, TypeTag};

    fn func(blocks: Vec<Block>, params: Vec<ValueId>, n_values: u32) -> IrFunction {
        IrFunction { name: "t".into(), params, n_cells: 0, n_env: 0, entry: BlockId(0), blocks, n_values }
    }

    fn inst(out: Option<u32>, kind: InstKind) -> Inst {
        Inst { out: out.map(ValueId), kind }
    }

    #[test]
    fn param_returned_is_live_at_entry() {
        let f = func(
            vec![Block { phis: vec![], insts: vec![inst(None, InstKind::Return(Operand::Val(ValueId(0))))] }],
            vec![ValueId(0)],
            1,
        );
        let l = liveness(&f);
        assert!(l.live_in(BlockId(0)).contains(&ValueId(0)));
    }

    #[test]
    fn dead_definition_is_never_live() {
        let f = func(
            vec![Block {
                phis: vec![],
                insts: vec![
                    inst(Some(1), InstKind::GlobalGet("g".into())),
                    inst(None, InstKind::Return(Operand::Val(ValueId(0)))),
                ],
            }],
            vec![ValueId(0)],
            2,
        );
        assert!(!liveness(&f).is_live_anywhere(ValueId(1)));
    }

    #[test]
    fn loop_carried_phi_and_invariant_param() {
        // b0: jump b1
        // b1: v1 = phi [b0: 0, b2: v2]; test i32 v0 ? b2 : b3
        // b2: v2 = add_i32_ovf v1, v0 ? b1 : b3   (normal edge loops back)
        // b3: return v1
        let f = func(
            vec![
                Block { phis: vec![], insts: vec![inst(None, InstKind::Jump(BlockId(1)))] },
                Block {
                    phis: vec![Phi {
                        out: ValueId(1),
                        incoming: vec![(BlockId(0), Operand::int(0)), (BlockId(2), Operand::Val(ValueId(2)))],
                    }],
                    insts: vec![inst(None, InstKind::TestTag {
                        tag: TypeTag::Int32,
                        value: Operand::Val(ValueId(0)),
                        taken: BlockId(2),
                        other: BlockId(3),
                    })],
                },
                Block {
                    phis: vec![],
                    insts: vec![inst(Some(2), InstKind::ArithOvf {
                        op: OvfOp::Add,
                        lhs: Operand::Val(ValueId(1)),
                        rhs: Operand::Val(ValueId(0)),
                        normal: BlockId(1),
                        overflow: BlockId(3),
                    })],
                },
                Block { phis: vec![], insts: vec![inst(None, InstKind::Return(Operand::Val(ValueId(1))))] },
            ],
            vec![ValueId(0)],
            3,
        );
        let l = liveness(&f);
        let header: Vec<_> = l.live_in(BlockId(1)).iter().copied().collect();
        assert_eq!(header, vec![ValueId(0), ValueId(1)]);
        assert!(l.live_in(BlockId(0)).contains(&ValueId(0)));
        assert!(!l.live_in(BlockId(0)).contains(&ValueId(1)));
    }
}
