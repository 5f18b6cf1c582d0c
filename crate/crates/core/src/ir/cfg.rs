use super::{BlockId, IrFunction};

/// Predecessor lists, one entry per incoming edge.
pub fn predecessors(f: &IrFunction) -> Vec<Vec<BlockId>> {
    let mut preds = vec![Vec::new(); f.blocks.len()];
    for b in f.block_ids() {
        if f.block(b).insts.is_empty() {
            continue;
        }
        for s in f.block(b).successors() {
            if s.index() < preds.len() {
                preds[s.index()].push(b);
            }
        }
    }
    preds
}

/// Reverse post-order over blocks reachable from the entry.
pub fn reverse_postorder(f: &IrFunction) -> Vec<BlockId> {
    let n = f.blocks.len();
    let mut visited = vec![false; n];
    let mut post = Vec::with_capacity(n);
    // Iterative DFS: (block, next successor index).
    let mut stack = vec![(f.entry, 0usize)];
    visited[f.entry.index()] = true;
    while let Some((b, i)) = stack.pop() {
        // Reversed so that the first successor ends up first in RPO.
        let mut succs = if f.block(b).insts.is_empty() { vec![] } else { f.block(b).successors() };
        succs.reverse();
        if i < succs.len() {
            stack.push((b, i + 1));
            let s = succs[i];
            if s.index() < n && !visited[s.index()] {
                visited[s.index()] = true;
                stack.push((s, 0));
            }
        } else {
            post.push(b);
        }
    }
    post.reverse();
    post
}

/// Immediate dominators (Cooper, Harvey, Kennedy). Unreachable blocks map
/// to `None`; the entry maps to itself.
pub fn dominators(f: &IrFunction) -> Vec<Option<BlockId>> {
    let rpo = reverse_postorder(f);
    let mut order = vec![usize::MAX; f.blocks.len()];
    for (i, b) in rpo.iter().enumerate() {
        order[b.index()] = i;
    }
    let preds = predecessors(f);
    let mut idom: Vec<Option<BlockId>> = vec![None; f.blocks.len()];
    idom[f.entry.index()] = Some(f.entry);
    let intersect = |idom: &[Option<BlockId>], mut a: BlockId, mut b: BlockId| {
        while a != b {
            while order[a.index()] > order[b.index()] {
                a = idom[a.index()].unwrap();
            }
            while order[b.index()] > order[a.index()] {
                b = idom[b.index()].unwrap();
            }
        }
        a
    };
    let mut changed = true;
    while changed {
        changed = false;
        for &b in rpo.iter().skip(1) {
            let mut new = None;
            for &p in &preds[b.index()] {
                if idom[p.index()].is_none() {
                    continue;
                }
                new = Some(match new {
                    None => p,
                    Some(cur) => intersect(&idom, p, cur),
                });
            }
            if new.is_some() && idom[b.index()] != new {
                idom[b.index()] = new;
                changed = true;
            }
        }
    }
    idom
}

pub fn dominates(idom: &[Option<BlockId>], a: BlockId, mut b: BlockId) -> bool {
    loop {
        if a == b {
            return true;
        }
        match idom[b.index()] {
            Some(p) if p != b => b = p,
            _ => return false,
        }
    }
}
