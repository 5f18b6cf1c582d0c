//! Normalization shared by the passes that rewrite the CFG.

use std::collections::{HashMap, HashSet};

use super::cfg::{predecessors, reverse_postorder};
use super::{BlockId, IrFunction, Literal, Operand, ValueId};
use crate::runtime::Const;

/// Removes unreachable blocks, trivial and dead phis, then renumbers blocks
/// in reverse post-order and values densely in definition order.
pub fn cleanup(f: &mut IrFunction) {
    strip_unreachable(f);
    remove_trivial_phis(f);
    prune_dead_phis(f);
    renumber(f);
}

fn strip_unreachable(f: &mut IrFunction) {
    let rpo = reverse_postorder(f);
    let mut live = vec![false; f.blocks.len()];
    rpo.iter().for_each(|b| live[b.index()] = true);
    for b in f.blocks.iter_mut() {
        for phi in &mut b.phis {
            phi.incoming.retain(|(p, _)| live[p.index()]);
        }
    }
    // Also drop incoming entries for edges that no longer exist.
    let preds = predecessors(f);
    for (i, b) in f.blocks.iter_mut().enumerate() {
        for phi in &mut b.phis {
            phi.incoming.retain(|(p, _)| preds[i].contains(p));
        }
    }
    for (i, b) in f.blocks.iter_mut().enumerate() {
        if !live[i] {
            b.phis.clear();
            b.insts.clear();
        }
    }
}

fn substitute(f: &mut IrFunction, from: ValueId, to: &Operand) {
    for b in f.blocks.iter_mut() {
        for phi in &mut b.phis {
            for (_, o) in &mut phi.incoming {
                if *o == Operand::Val(from) {
                    *o = to.clone();
                }
            }
        }
        for inst in &mut b.insts {
            for o in inst.kind.operands_mut() {
                if *o == Operand::Val(from) {
                    *o = to.clone();
                }
            }
        }
    }
}

/// A phi whose incoming operands are all the same (ignoring itself) is
/// replaced by that operand.
pub fn remove_trivial_phis(f: &mut IrFunction) {
    loop {
        let mut found = None;
        'scan: for (bi, b) in f.blocks.iter().enumerate() {
            for (pi, phi) in b.phis.iter().enumerate() {
                let mut same: Option<&Operand> = None;
                let mut trivial = true;
                for (_, o) in &phi.incoming {
                    if *o == Operand::Val(phi.out) || same == Some(o) {
                        continue;
                    }
                    if same.is_some() {
                        trivial = false;
                        break;
                    }
                    same = Some(o);
                }
                if trivial {
                    let to = same.cloned().unwrap_or(Operand::Imm(Literal::Const(Const::Undefined)));
                    found = Some((bi, pi, phi.out, to));
                    break 'scan;
                }
            }
        }
        let Some((bi, pi, out, to)) = found else { return };
        f.blocks[bi].phis.remove(pi);
        substitute(f, out, &to);
    }
}

/// Removes phis whose value is never used except by other dead phis.
pub fn prune_dead_phis(f: &mut IrFunction) {
    let phi_args: HashMap<ValueId, Vec<ValueId>> = f
        .blocks
        .iter()
        .flat_map(|b| b.phis.iter())
        .map(|p| (p.out, p.incoming.iter().filter_map(|(_, o)| o.as_val()).collect()))
        .collect();
    let mut used: HashSet<ValueId> = HashSet::new();
    let mut work: Vec<ValueId> = f
        .blocks
        .iter()
        .flat_map(|b| b.insts.iter())
        .flat_map(|i| i.kind.operands().into_iter().filter_map(|o| o.as_val()).collect::<Vec<_>>())
        .collect();
    while let Some(v) = work.pop() {
        if used.insert(v) {
            if let Some(args) = phi_args.get(&v) {
                work.extend(args.iter().copied());
            }
        }
    }
    for b in f.blocks.iter_mut() {
        b.phis.retain(|p| used.contains(&p.out));
    }
}

/// Drops empty (unreachable) blocks and renumbers blocks in reverse
/// post-order and values in definition order.
pub fn renumber(f: &mut IrFunction) {
    let rpo = reverse_postorder(f);
    let mut bmap = vec![None; f.blocks.len()];
    for (i, b) in rpo.iter().enumerate() {
        bmap[b.index()] = Some(BlockId(i as u32));
    }
    let mut old = std::mem::take(&mut f.blocks);
    let mut blocks = Vec::with_capacity(rpo.len());
    for b in &rpo {
        let mut block = std::mem::take(&mut old[b.index()]);
        for phi in &mut block.phis {
            for (p, _) in &mut phi.incoming {
                *p = bmap[p.index()].expect("incoming from live block");
            }
            phi.incoming.sort_by_key(|(p, _)| *p);
        }
        for s in block.terminator_mut().kind.successors_mut() {
            *s = bmap[s.index()].expect("successor is live");
        }
        blocks.push(block);
    }
    f.blocks = blocks;
    f.entry = BlockId(0);

    let mut vmap: HashMap<ValueId, ValueId> = HashMap::new();
    let mut next = 0u32;
    let mut fresh = |v: ValueId, vmap: &mut HashMap<ValueId, ValueId>| {
        vmap.insert(v, ValueId(next));
        next += 1;
    };
    for p in &f.params {
        fresh(*p, &mut vmap);
    }
    for b in &f.blocks {
        for phi in &b.phis {
            fresh(phi.out, &mut vmap);
        }
        for inst in &b.insts {
            if let Some(o) = inst.out {
                fresh(o, &mut vmap);
            }
        }
    }
    let map = |v: &mut ValueId| *v = vmap[v];
    f.params.iter_mut().for_each(map);
    for b in f.blocks.iter_mut() {
        for phi in &mut b.phis {
            map(&mut phi.out);
            for (_, o) in &mut phi.incoming {
                if let Operand::Val(v) = o {
                    map(v);
                }
            }
        }
        for inst in &mut b.insts {
            if let Some(o) = &mut inst.out {
                map(o);
            }
            for o in inst.kind.operands_mut() {
                if let Operand::Val(v) = o {
                    map(v);
                }
            }
        }
    }
    f.n_values = next;
}
