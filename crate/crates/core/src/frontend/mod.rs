//! MiniDyn source to inlined SSA IR: parsing, lowering, and primitive
//! inlining.

pub mod ast;
pub mod inline;
pub mod lexer;
pub mod lower;
pub mod parser;

use thiserror::Error;

pub use ast::Ast;
pub use inline::inline_primitives;
pub use lower::lower;
pub use parser::parse;

use crate::ir::Program;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("syntax error at {line}:{col}: {message}")]
pub struct SyntaxError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("lowering error at {line}:{col}: {message}")]
pub struct LowerError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Lower(#[from] LowerError),
}

/// Parses, lowers and inlines a source file.
pub fn compile_source(src: &str) -> Result<Program, CompileError> {
    let ast = parse(src)?;
    let program = lower(&ast)?;
    Ok(inline_primitives(program))
}
