//! Liveness agrees with a path search from every block entry on random
//! control-flow graphs.

use std::collections::BTreeSet;

use bbv_core::ir::{liveness, Block, BlockId, Inst, InstKind, IrFunction, Operand, Phi, ValueId};
use bbv_core::runtime::LowOp;
use proptest::prelude::*;

const VALUES: u32 = 8;

#[derive(Clone, Debug)]
struct BlockSpec {
    phis: Vec<u32>,
    /// (output, lhs, rhs); no output means a print of `lhs`.
    insts: Vec<(Option<u32>, u32, u32)>,
    /// 0 return, 1 jump, 2 branch.
    term: (u8, u32, u32, u32),
    phi_args: Vec<u32>,
}

fn block_spec() -> impl Strategy<Value = BlockSpec> {
    (
        prop::collection::vec(0..VALUES, 0..2),
        prop::collection::vec((prop::option::of(0..VALUES), 0..VALUES, 0..VALUES), 0..4),
        (0u8..3, 0u32..16, 0u32..16, 0..VALUES),
        prop::collection::vec(0..VALUES, 8),
    )
        .prop_map(|(phis, insts, term, phi_args)| BlockSpec { phis, insts, term, phi_args })
}

/// Builds an SSA-shaped function: every value other than the parameter
/// `v0` has at most one definition; later duplicates become prints.
fn build(specs: &[BlockSpec]) -> IrFunction {
    let n = specs.len() as u32;
    let v = |x: u32| Operand::Val(ValueId(x));
    let mut defined: BTreeSet<u32> = BTreeSet::from([0]);
    let phi_outs: Vec<Vec<u32>> = specs
        .iter()
        .map(|s| s.phis.iter().copied().filter(|o| defined.insert(*o)).collect())
        .collect();
    let mut blocks: Vec<Block> = specs
        .iter()
        .map(|s| {
            let mut insts: Vec<Inst> = s
                .insts
                .iter()
                .map(|&(out, a, b)| match out {
                    Some(o) if defined.insert(o) => {
                        Inst { out: Some(ValueId(o)), kind: InstKind::Low(LowOp::AddF64, vec![v(a), v(b)]) }
                    }
                    _ => Inst { out: None, kind: InstKind::Print(v(a)) },
                })
                .collect();
            let (k, t, e, c) = s.term;
            let kind = match k {
                0 => InstKind::Return(v(c)),
                1 => InstKind::Jump(BlockId(t % n)),
                _ => InstKind::Branch { cond: v(c), then_to: BlockId(t % n), else_to: BlockId(e % n) },
            };
            insts.push(Inst { out: None, kind });
            Block { phis: vec![], insts }
        })
        .collect();
    let mut preds: Vec<Vec<BlockId>> = vec![vec![]; blocks.len()];
    for (i, b) in blocks.iter().enumerate() {
        for s in b.successors() {
            if !preds[s.index()].contains(&BlockId(i as u32)) {
                preds[s.index()].push(BlockId(i as u32));
            }
        }
    }
    for (i, s) in specs.iter().enumerate() {
        blocks[i].phis = phi_outs[i]
            .iter()
            .enumerate()
            .map(|(k, &o)| Phi {
                out: ValueId(o),
                incoming: preds[i].iter().enumerate().map(|(j, p)| (*p, v(s.phi_args[(j + k) % 8]))).collect(),
            })
            .collect();
    }
    IrFunction {
        name: "r".into(),
        params: vec![ValueId(0)],
        n_cells: 0,
        n_env: 0,
        entry: BlockId(0),
        blocks,
        n_values: VALUES,
    }
}

fn uses(kind: &InstKind, x: ValueId) -> bool {
    kind.operands().into_iter().any(|o| *o == Operand::Val(x))
}

/// Whether `x` is used on some path from position `pos` of block `b`
/// before being redefined. Phi operands count as uses at the end of the
/// predecessor when the phi's output is in `live_phis`.
fn used_ahead(f: &IrFunction, b: BlockId, x: ValueId, live_phis: &BTreeSet<(BlockId, ValueId)>) -> bool {
    let mut seen = BTreeSet::new();
    let mut stack = vec![b];
    while let Some(b) = stack.pop() {
        if !seen.insert(b) {
            continue;
        }
        let block = f.block(b);
        let mut killed = false;
        for inst in &block.insts {
            if uses(&inst.kind, x) {
                return true;
            }
            if inst.out == Some(x) {
                killed = true;
                break;
            }
        }
        if killed {
            continue;
        }
        for s in block.successors() {
            let sb = f.block(s);
            for p in &sb.phis {
                if live_phis.contains(&(s, p.out)) && p.incoming_from(b) == Some(&Operand::Val(x)) {
                    return true;
                }
            }
            if !sb.phis.iter().any(|p| p.out == x) {
                stack.push(s);
            }
        }
    }
    false
}

fn reachable(f: &IrFunction) -> BTreeSet<BlockId> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![f.entry];
    while let Some(b) = stack.pop() {
        if seen.insert(b) {
            stack.extend(f.block(b).successors());
        }
    }
    seen
}

fn oracle(f: &IrFunction) -> Vec<BTreeSet<ValueId>> {
    let mut live_phis = BTreeSet::new();
    loop {
        let mut next = live_phis.clone();
        for b in f.block_ids() {
            for p in &f.block(b).phis {
                if used_ahead(f, b, p.out, &live_phis) {
                    next.insert((b, p.out));
                }
            }
        }
        if next == live_phis {
            break;
        }
        live_phis = next;
    }
    f.block_ids()
        .map(|b| (0..VALUES).map(ValueId).filter(|&x| used_ahead(f, b, x, &live_phis)).collect())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn liveness_matches_path_search(specs in prop::collection::vec(block_spec(), 1..7)) {
        let f = build(&specs);
        let info = liveness(&f);
        let expect = oracle(&f);
        for b in reachable(&f) {
            prop_assert_eq!(info.live_in(b), &expect[b.index()], "block {}", b);
        }
    }
}
