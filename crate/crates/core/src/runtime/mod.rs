//! Tagged values, the heap, and the semantics of every low-level operation.

pub mod heap;
pub mod ops;
pub mod prims;
pub mod value;

pub use heap::{fnv1a, Closure, Heap};
pub use ops::{add_i32_ovf, eval_low, to_string, LowOp, OvfOp, RuntimeError};
pub use prims::PrimOp;
pub use value::{tag_of, Const, TypeTag, Value};
