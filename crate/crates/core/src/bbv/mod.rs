//! Basic block versioning: typing contexts, the version table and the
//! version selection policy. Compilation into the code buffer lives in
//! [`compile`].

pub mod compile;

use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

use crate::ir::{BlockId, FuncId, ValueId};
use crate::runtime::TypeTag;

pub use compile::{Engine, EngineMode};

/// Live values at a block entry with their known tags (`None` = unknown).
/// Entries are sorted by value id; the set of keys is exactly the block's
/// live-in set.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TypingContext {
    entries: Rc<[(ValueId, Option<TypeTag>)]>,
}

impl TypingContext {
    /// Builds a context from entries in any order.
    pub fn new(mut entries: Vec<(ValueId, Option<TypeTag>)>) -> Self {
        entries.sort_by_key(|(v, _)| *v);
        entries.dedup_by_key(|(v, _)| *v);
        TypingContext { entries: entries.into() }
    }

    /// The context assigning the unknown type to every live value.
    pub fn generic<I: IntoIterator<Item = ValueId>>(live: I) -> Self {
        Self::new(live.into_iter().map(|v| (v, None)).collect())
    }

    pub fn entries(&self) -> &[(ValueId, Option<TypeTag>)] {
        &self.entries
    }

    pub fn live(&self) -> impl Iterator<Item = ValueId> + '_ {
        self.entries.iter().map(|(v, _)| *v)
    }

    /// Known tag of `v`; `None` when unknown or not live.
    pub fn get(&self, v: ValueId) -> Option<TypeTag> {
        self.entries.binary_search_by_key(&v, |(x, _)| *x).ok().and_then(|i| self.entries[i].1)
    }

    pub fn is_generic(&self) -> bool {
        self.entries.iter().all(|(_, t)| t.is_none())
    }

    pub fn known_count(&self) -> usize {
        self.entries.iter().filter(|(_, t)| t.is_some()).count()
    }
}

impl fmt::Debug for TypingContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (v, t)) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            match t {
                Some(t) => write!(f, "{v}:{}", t.short_name())?,
                None => write!(f, "{v}:?")?,
            }
        }
        write!(f, "}}")
    }
}

/// Cost of entering a version compiled for `succ` with the incoming
/// context `pred`: 0 for an exact match, +1 for every type known in `pred`
/// that `succ` forgets, `None` when `succ` assumes a type `pred` does not
/// guarantee.
pub fn context_comp(pred: &TypingContext, succ: &TypingContext) -> Option<u32> {
    let mut score = 0;
    for &(v, succ_tag) in succ.entries() {
        match (pred.get(v), succ_tag) {
            (a, b) if a == b => {}
            (Some(_), None) => score += 1,
            _ => return None,
        }
    }
    Some(score)
}

/// Maximum number of specialized versions per block; `None` is unlimited
/// and `Some(0)` disables versioning.
pub type MaxVers = Option<u32>;

pub type VersionId = u32;

#[derive(Clone, Debug)]
pub struct BlockVersion {
    pub func: FuncId,
    pub block: BlockId,
    pub context: TypingContext,
    /// The fallback version created once the limit is reached.
    pub generic: bool,
    /// Creation sequence number (equal to the version id).
    pub seq: u32,
    /// Code buffer extent; `None` until compiled.
    pub start: Option<u32>,
    pub end: Option<u32>,
    /// Position in the order versions were first executed.
    pub first_exec: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Request {
    Existing(VersionId),
    New(VersionId),
}

impl Request {
    pub fn id(self) -> VersionId {
        match self {
            Request::Existing(v) | Request::New(v) => v,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct VersionTable {
    pub versions: Vec<BlockVersion>,
    by_block: HashMap<(FuncId, BlockId), Vec<VersionId>>,
    exact: HashMap<(FuncId, BlockId, TypingContext), VersionId>,
}

impl VersionTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: VersionId) -> &BlockVersion {
        &self.versions[id as usize]
    }

    pub fn get_mut(&mut self, id: VersionId) -> &mut BlockVersion {
        &mut self.versions[id as usize]
    }

    pub fn versions_of(&self, func: FuncId, block: BlockId) -> &[VersionId] {
        self.by_block.get(&(func, block)).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&(FuncId, BlockId), &Vec<VersionId>)> {
        self.by_block.iter()
    }

    fn create(&mut self, func: FuncId, block: BlockId, context: TypingContext, generic: bool) -> VersionId {
        let id = self.versions.len() as VersionId;
        self.versions.push(BlockVersion {
            func,
            block,
            context: context.clone(),
            generic,
            seq: id,
            start: None,
            end: None,
            first_exec: None,
        });
        self.by_block.entry((func, block)).or_default().push(id);
        self.exact.insert((func, block, context), id);
        id
    }

    /// Selects the version to use for entering `block` with `ctx`:
    /// an exact match; else a new version while under the limit; else the
    /// compatible version with the lowest score (earliest on ties); else
    /// the generic version, created on demand.
    pub fn request(&mut self, func: FuncId, block: BlockId, ctx: &TypingContext, limit: MaxVers) -> Request {
        if let Some(&id) = self.exact.get(&(func, block, ctx.clone())) {
            return Request::Existing(id);
        }
        let existing = self.versions_of(func, block);
        let specialized = existing.iter().filter(|&&id| !self.get(id).generic).count() as u32;
        if limit.is_none_or(|l| specialized < l) {
            return Request::New(self.create(func, block, ctx.clone(), false));
        }
        let best = existing
            .iter()
            .filter_map(|&id| context_comp(ctx, &self.get(id).context).map(|s| (s, id)))
            .min();
        if let Some((_, id)) = best {
            return Request::Existing(id);
        }
        let generic = TypingContext::generic(ctx.live());
        if let Some(&id) = self.exact.get(&(func, block, generic.clone())) {
            return Request::Existing(id);
        }
        Request::New(self.create(func, block, generic, true))
    }

    /// Number of versions per block, as a map from version count to the
    /// number of blocks with that many versions.
    pub fn histogram(&self) -> std::collections::BTreeMap<usize, usize> {
        let mut h = std::collections::BTreeMap::new();
        for ids in self.by_block.values() {
            let n = ids.iter().filter(|&&id| self.get(id).start.is_some()).count();
            if n > 0 {
                *h.entry(n).or_insert(0) += 1;
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use TypeTag::{Float64 as F, Int32 as I};

    fn ctx(e: &[(u32, Option<TypeTag>)]) -> TypingContext {
        TypingContext::new(e.iter().map(|&(v, t)| (ValueId(v), t)).collect())
    }

    #[test]
    fn context_comp_examples() {
        assert_eq!(context_comp(&ctx(&[(0, Some(I)), (1, Some(F))]), &ctx(&[(0, Some(I)), (1, Some(F))])), Some(0));
        assert_eq!(context_comp(&ctx(&[(0, Some(I))]), &ctx(&[(0, None)])), Some(1));
        assert_eq!(context_comp(&ctx(&[(0, Some(I))]), &ctx(&[(0, Some(F))])), None);
        assert_eq!(context_comp(&ctx(&[(0, None)]), &ctx(&[(0, Some(I))])), None);
    }

    const F0: FuncId = FuncId(0);
    const B0: BlockId = BlockId(0);

    #[test]
    fn request_new_then_exact() {
        let mut t = VersionTable::new();
        let c = ctx(&[(0, Some(I))]);
        let r = t.request(F0, B0, &c, Some(5));
        assert!(matches!(r, Request::New(_)));
        assert_eq!(t.get(r.id()).context, c);
        assert_eq!(t.request(F0, B0, &c, Some(5)), Request::Existing(r.id()));
    }

    #[test]
    fn full_table_reuses_compatible_version() {
        let mut t = VersionTable::new();
        let all_unknown = t.request(F0, B0, &ctx(&[(0, None)]), Some(1)).id();
        let r = t.request(F0, B0, &ctx(&[(0, Some(I))]), Some(1));
        assert_eq!(r, Request::Existing(all_unknown));
    }

    #[test]
    fn full_table_without_compatible_version_falls_back_to_generic() {
        let mut t = VersionTable::new();
        t.request(F0, B0, &ctx(&[(0, Some(I))]), Some(1));
        let r = t.request(F0, B0, &ctx(&[(0, Some(F))]), Some(1));
        let Request::New(g) = r else { panic!("{r:?}") };
        assert!(t.get(g).generic && t.get(g).context.is_generic());
        // The generic version is reused afterwards.
        assert_eq!(t.request(F0, B0, &ctx(&[(0, Some(TypeTag::String))]), Some(1)), Request::Existing(g));
    }

    #[test]
    fn limit_zero_is_always_generic() {
        let mut t = VersionTable::new();
        let a = t.request(F0, B0, &ctx(&[(0, Some(I))]), Some(0)).id();
        let b = t.request(F0, B0, &ctx(&[(0, Some(F))]), Some(0)).id();
        let c = t.request(F0, B0, &ctx(&[(0, None)]), Some(0)).id();
        assert_eq!((a, b), (c, c));
        assert!(t.get(a).generic);
    }

    #[test]
    fn compatible_match_prefers_lowest_score_then_earliest() {
        let mut t = VersionTable::new();
        let unknown = t.request(F0, B0, &ctx(&[(0, None), (1, None)]), Some(2)).id();
        let half = t.request(F0, B0, &ctx(&[(0, Some(I)), (1, None)]), Some(2)).id();
        let r = t.request(F0, B0, &ctx(&[(0, Some(I)), (1, Some(I))]), Some(2));
        assert_eq!(r, Request::Existing(half));
        let r = t.request(F0, B0, &ctx(&[(0, Some(F)), (1, Some(I))]), Some(2));
        assert_eq!(r, Request::Existing(unknown));
    }
}
