//! A miniature dynamic-language VM built around lazy basic block versioning.
//!
//! Source text in the MiniDyn language (a small JavaScript subset) is
//! parsed, lowered to an SSA control flow graph, and has its operator
//! primitives inlined so that every dynamic type test is an explicit
//! branch. The [`bbv`] engine then compiles block versions specialized on
//! typing contexts into a patchable [`exec::CodeBuffer`], lazily through
//! stubs or eagerly per function. The [`analysis`] module provides the
//! flow-based representation analysis used as a point of comparison.

pub mod analysis;
pub mod bbv;
pub mod exec;
pub mod frontend;
pub mod ir;
pub mod runtime;
