//! Textual IR format used by `--dump-ir`.
//!
//! ```text
//! function sum(v0) entry=b0 cells=0 env=0 values=9
//! b0:
//!   jump b1
//!
//! b1:
//!   v1 = phi [b0: 0, b4: v7]
//!   is_i32 v1 ? b2 : b3
//! end
//! ```
//!
//! Blocks are separated by blank lines; functions by `end` lines. The
//! printer and parser round-trip exactly.

use std::fmt::Write as _;

use thiserror::Error;

use super::{Block, BlockId, Capture, FuncId, Inst, InstKind, IrFunction, Literal, Operand, Phi, Program, ValueId};
use crate::runtime::{Const, LowOp, OvfOp, PrimOp, RuntimeError, TypeTag};

pub fn print_program(p: &Program) -> String {
    let mut out = format!("program main={}\n\n", p.main);
    for (i, f) in p.functions.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&print_function(f));
    }
    out
}

pub fn print_function(f: &IrFunction) -> String {
    let mut out = String::new();
    let params: Vec<String> = f.params.iter().map(|v| v.to_string()).collect();
    let _ = writeln!(
        out,
        "function {}({}) entry={} cells={} env={} values={}",
        f.name,
        params.join(", "),
        f.entry,
        f.n_cells,
        f.n_env,
        f.n_values
    );
    for (i, b) in f.blocks.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "b{i}:");
        for phi in &b.phis {
            let inc: Vec<String> = phi.incoming.iter().map(|(p, o)| format!("{p}: {}", operand(o))).collect();
            let _ = writeln!(out, "  {} = phi [{}]", phi.out, inc.join(", "));
        }
        for inst in &b.insts {
            let _ = writeln!(out, "  {}", print_inst(inst));
        }
    }
    out.push_str("end\n");
    out
}

pub fn literal(l: &Literal) -> String {
    match l {
        Literal::Int(i) => i.to_string(),
        Literal::Float(x) => format!("{x:?}"),
        Literal::Const(c) => c.name().to_string(),
        Literal::Str(s) => format!("{:?}", &**s),
    }
}

pub fn operand(o: &Operand) -> String {
    match o {
        Operand::Val(v) => v.to_string(),
        Operand::Imm(l) => literal(l),
    }
}

fn list(ops: &[Operand]) -> String {
    ops.iter().map(operand).collect::<Vec<_>>().join(", ")
}

pub fn print_inst(inst: &Inst) -> String {
    let lhs = inst.out.map(|v| format!("{v} = ")).unwrap_or_default();
    let rhs = match &inst.kind {
        InstKind::Low(op, args) if args.is_empty() => op.name().to_string(),
        InstKind::Low(op, args) => format!("{} {}", op.name(), list(args)),
        InstKind::Prim(p, args) => format!("prim {} {}", p.name(), list(args)),
        InstKind::Call(c, args) => format!("call {}({})", operand(c), list(args)),
        InstKind::GlobalGet(n) => format!("global_get {:?}", &**n),
        InstKind::GlobalSet(n, v) => format!("global_set {:?}, {}", &**n, operand(v)),
        InstKind::CellGet(i) => format!("cell_get {i}"),
        InstKind::CellSet(i, v) => format!("cell_set {i}, {}", operand(v)),
        InstKind::EnvGet(i) => format!("env_get {i}"),
        InstKind::EnvSet(i, v) => format!("env_set {i}, {}", operand(v)),
        InstKind::MakeClosure(fid, caps) => {
            let caps: Vec<String> = caps
                .iter()
                .map(|c| match c {
                    Capture::Cell(i) => format!("cell {i}"),
                    Capture::Env(i) => format!("env {i}"),
                })
                .collect();
            format!("make_closure {fid} [{}]", caps.join(", "))
        }
        InstKind::Print(v) => format!("print {}", operand(v)),
        InstKind::Jump(b) => format!("jump {b}"),
        InstKind::Branch { cond, then_to, else_to } => format!("branch {} ? {then_to} : {else_to}", operand(cond)),
        InstKind::TestTag { tag, value, taken, other } => {
            format!("{} {} ? {taken} : {other}", tag.test_name(), operand(value))
        }
        InstKind::ArithOvf { op, lhs: a, rhs: b, normal, overflow } => {
            format!("{} {}, {} ? {normal} : {overflow}", op.name(), operand(a), operand(b))
        }
        InstKind::Return(v) => format!("return {}", operand(v)),
        InstKind::Throw(e) => format!("throw {}", e.code()),
    };
    format!("{lhs}{rhs}")
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("IR parse error on line {line}: {message}")]
pub struct IrParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
enum T {
    Word(String),
    Str(String),
    P(char),
}

fn lex(line: &str) -> Result<Vec<T>, String> {
    let cs: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if "=,[]():?".contains(c) {
            out.push(T::P(c));
            i += 1;
        } else if c == '"' {
            i += 1;
            let mut s = String::new();
            loop {
                let Some(&d) = cs.get(i) else { return Err("unterminated string".into()) };
                i += 1;
                match d {
                    '"' => break,
                    '\\' => {
                        let e = *cs.get(i).ok_or("bad escape")?;
                        i += 1;
                        match e {
                            'n' => s.push('\n'),
                            't' => s.push('\t'),
                            'r' => s.push('\r'),
                            '0' => s.push('\0'),
                            'u' => {
                                // \u{XXXX}
                                if cs.get(i) != Some(&'{') {
                                    return Err("bad unicode escape".into());
                                }
                                let close = cs[i..].iter().position(|&c| c == '}').ok_or("bad unicode escape")? + i;
                                let hex: String = cs[i + 1..close].iter().collect();
                                let code = u32::from_str_radix(&hex, 16).map_err(|_| "bad unicode escape")?;
                                s.push(char::from_u32(code).ok_or("bad unicode escape")?);
                                i = close + 1;
                            }
                            other => s.push(other),
                        }
                    }
                    other => s.push(other),
                }
            }
            out.push(T::Str(s));
        } else {
            let start = i;
            while i < cs.len() && !cs[i].is_whitespace() && !"=,[]():?\"".contains(cs[i]) {
                i += 1;
            }
            out.push(T::Word(cs[start..i].iter().collect()));
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    toks: &'a [T],
    i: usize,
}

impl Cursor<'_> {
    fn next(&mut self) -> Result<&T, String> {
        let t = self.toks.get(self.i).ok_or("unexpected end of line")?;
        self.i += 1;
        Ok(t)
    }

    fn peek(&self) -> Option<&T> {
        self.toks.get(self.i)
    }

    fn word(&mut self) -> Result<String, String> {
        match self.next()? {
            T::Word(w) => Ok(w.clone()),
            other => Err(format!("expected word, found {other:?}")),
        }
    }

    fn punct(&mut self, c: char) -> Result<(), String> {
        match self.next()? {
            T::P(d) if *d == c => Ok(()),
            other => Err(format!("expected `{c}`, found {other:?}")),
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&T::P(c)) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn string(&mut self) -> Result<String, String> {
        match self.next()? {
            T::Str(s) => Ok(s.clone()),
            other => Err(format!("expected string, found {other:?}")),
        }
    }

    fn done(&self) -> Result<(), String> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(format!("trailing token {t:?}")),
        }
    }

    fn operand(&mut self) -> Result<Operand, String> {
        match self.next()?.clone() {
            T::Str(s) => Ok(Operand::Imm(Literal::Str(s.into()))),
            T::P(c) => Err(format!("expected operand, found `{c}`")),
            T::Word(w) => parse_operand_word(&w),
        }
    }

    fn operands_until_end(&mut self) -> Result<Vec<Operand>, String> {
        let mut v = Vec::new();
        if self.peek().is_none() {
            return Ok(v);
        }
        loop {
            v.push(self.operand()?);
            if !self.eat(',') {
                return Ok(v);
            }
        }
    }

    fn block(&mut self) -> Result<BlockId, String> {
        let w = self.word()?;
        id_of(&w, 'b').map(BlockId)
    }

    fn u32(&mut self) -> Result<u32, String> {
        let w = self.word()?;
        w.parse().map_err(|_| format!("expected integer, found `{w}`"))
    }
}

fn id_of(w: &str, prefix: char) -> Result<u32, String> {
    w.strip_prefix(prefix)
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| format!("expected {prefix}<n>, found `{w}`"))
}

fn parse_operand_word(w: &str) -> Result<Operand, String> {
    if let Some(n) = w.strip_prefix('v') {
        if let Ok(i) = n.parse() {
            return Ok(Operand::Val(ValueId(i)));
        }
    }
    let lit = match w {
        "true" => Literal::Const(Const::True),
        "false" => Literal::Const(Const::False),
        "null" => Literal::Const(Const::Null),
        "undefined" => Literal::Const(Const::Undefined),
        "NaN" => Literal::Float(f64::NAN),
        "inf" => Literal::Float(f64::INFINITY),
        "-inf" => Literal::Float(f64::NEG_INFINITY),
        _ if w.contains(['.', 'e', 'E']) => Literal::Float(w.parse().map_err(|_| format!("bad float `{w}`"))?),
        _ => Literal::Int(w.parse().map_err(|_| format!("bad operand `{w}`"))?),
    };
    Ok(Operand::Imm(lit))
}

pub fn parse_program(text: &str) -> Result<Program, IrParseError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0;
    let err = |line: usize, message: String| IrParseError { line: line + 1, message };
    while i < lines.len() && lines[i].trim().is_empty() {
        i += 1;
    }
    let header = lines.get(i).ok_or_else(|| err(i, "empty input".into()))?;
    let main = header
        .trim()
        .strip_prefix("program main=")
        .ok_or_else(|| err(i, "expected `program main=f<n>`".into()))
        .and_then(|w| id_of(w, 'f').map_err(|m| err(i, m)))?;
    i += 1;
    let mut functions = Vec::new();
    loop {
        while i < lines.len() && lines[i].trim().is_empty() {
            i += 1;
        }
        if i >= lines.len() {
            break;
        }
        let (f, next) = parse_function_lines(&lines, i)?;
        functions.push(f);
        i = next;
    }
    Ok(Program { functions, main: FuncId(main) })
}

pub fn parse_function(text: &str) -> Result<IrFunction, IrParseError> {
    let lines: Vec<&str> = text.lines().collect();
    let start = lines.iter().position(|l| !l.trim().is_empty()).unwrap_or(0);
    parse_function_lines(&lines, start).map(|(f, _)| f)
}

fn parse_function_lines(lines: &[&str], mut i: usize) -> Result<(IrFunction, usize), IrParseError> {
    let err = |line: usize, message: String| IrParseError { line: line + 1, message };
    let toks = lex(lines[i]).map_err(|m| err(i, m))?;
    let mut c = Cursor { toks: &toks, i: 0 };
    let mut header = || -> Result<IrFunction, String> {
        if c.word()? != "function" {
            return Err("expected `function`".into());
        }
        let name = c.word()?;
        c.punct('(')?;
        let mut params = Vec::new();
        if !c.eat(')') {
            loop {
                params.push(ValueId(id_of(&c.word()?, 'v')?));
                if c.eat(')') {
                    break;
                }
                c.punct(',')?;
            }
        }
        let mut kv = |key: &str| -> Result<String, String> {
            let w = c.word()?;
            if w != key {
                return Err(format!("expected `{key}=`"));
            }
            c.punct('=')?;
            c.word()
        };
        let entry = BlockId(id_of(&kv("entry")?, 'b')?);
        let n_cells = kv("cells")?.parse().map_err(|_| "bad cells")?;
        let n_env = kv("env")?.parse().map_err(|_| "bad env")?;
        let n_values = kv("values")?.parse().map_err(|_| "bad values")?;
        c.done()?;
        Ok(IrFunction { name, params, n_cells, n_env, entry, blocks: vec![], n_values })
    };
    let mut f = header().map_err(|m| err(i, m))?;
    i += 1;
    loop {
        let Some(line) = lines.get(i) else {
            return Err(err(i, "missing `end`".into()));
        };
        let t = line.trim();
        if t.is_empty() {
            i += 1;
            continue;
        }
        if t == "end" {
            return Ok((f, i + 1));
        }
        if let Some(label) = t.strip_suffix(':') {
            let id = id_of(label, 'b').map_err(|m| err(i, m))?;
            if id as usize != f.blocks.len() {
                return Err(err(i, format!("blocks must appear in order; expected b{}", f.blocks.len())));
            }
            f.blocks.push(Block::default());
            i += 1;
            continue;
        }
        let block = f.blocks.last_mut().ok_or_else(|| err(i, "instruction outside a block".into()))?;
        let toks = lex(t).map_err(|m| err(i, m))?;
        match parse_line(&toks).map_err(|m| err(i, m))? {
            Line::Phi(p) => block.phis.push(p),
            Line::Inst(inst) => block.insts.push(inst),
        }
        i += 1;
    }
}

enum Line {
    Phi(Phi),
    Inst(Inst),
}

fn parse_line(toks: &[T]) -> Result<Line, String> {
    let mut c = Cursor { toks, i: 0 };
    let mut out = None;
    if toks.len() >= 2 && toks[1] == T::P('=') {
        out = Some(ValueId(id_of(&c.word()?, 'v')?));
        c.punct('=')?;
    }
    let head = c.word()?;
    let kind = match head.as_str() {
        "phi" => {
            let out = out.ok_or("phi without output")?;
            c.punct('[')?;
            let mut incoming = Vec::new();
            if !c.eat(']') {
                loop {
                    let b = c.block()?;
                    c.punct(':')?;
                    incoming.push((b, c.operand()?));
                    if c.eat(']') {
                        break;
                    }
                    c.punct(',')?;
                }
            }
            c.done()?;
            return Ok(Line::Phi(Phi { out, incoming }));
        }
        "prim" => {
            let name = c.word()?;
            let p = PrimOp::from_name(&name).ok_or_else(|| format!("unknown primitive `{name}`"))?;
            InstKind::Prim(p, c.operands_until_end()?)
        }
        "call" => {
            let callee = c.operand()?;
            c.punct('(')?;
            let mut args = Vec::new();
            if !c.eat(')') {
                loop {
                    args.push(c.operand()?);
                    if c.eat(')') {
                        break;
                    }
                    c.punct(',')?;
                }
            }
            InstKind::Call(callee, args)
        }
        "global_get" => InstKind::GlobalGet(c.string()?.into()),
        "global_set" => {
            let n = c.string()?;
            c.punct(',')?;
            InstKind::GlobalSet(n.into(), c.operand()?)
        }
        "cell_get" => InstKind::CellGet(c.u32()?),
        "env_get" => InstKind::EnvGet(c.u32()?),
        "cell_set" | "env_set" => {
            let slot = c.u32()?;
            c.punct(',')?;
            let v = c.operand()?;
            if head == "cell_set" {
                InstKind::CellSet(slot, v)
            } else {
                InstKind::EnvSet(slot, v)
            }
        }
        "make_closure" => {
            let fid = FuncId(id_of(&c.word()?, 'f')?);
            c.punct('[')?;
            let mut caps = Vec::new();
            if !c.eat(']') {
                loop {
                    let kind = c.word()?;
                    let i = c.u32()?;
                    caps.push(match kind.as_str() {
                        "cell" => Capture::Cell(i),
                        "env" => Capture::Env(i),
                        other => return Err(format!("bad capture `{other}`")),
                    });
                    if c.eat(']') {
                        break;
                    }
                    c.punct(',')?;
                }
            }
            InstKind::MakeClosure(fid, caps)
        }
        "print" => InstKind::Print(c.operand()?),
        "jump" => InstKind::Jump(c.block()?),
        "branch" => {
            let cond = c.operand()?;
            c.punct('?')?;
            let then_to = c.block()?;
            c.punct(':')?;
            InstKind::Branch { cond, then_to, else_to: c.block()? }
        }
        "return" => InstKind::Return(c.operand()?),
        "throw" => {
            let code = c.word()?;
            InstKind::Throw(RuntimeError::from_code(&code).ok_or_else(|| format!("unknown error `{code}`"))?)
        }
        other => {
            if let Some(tag) = other.strip_prefix("is_").and_then(TypeTag::from_short_name) {
                let value = c.operand()?;
                c.punct('?')?;
                let taken = c.block()?;
                c.punct(':')?;
                InstKind::TestTag { tag, value, taken, other: c.block()? }
            } else if let Some(op) = OvfOp::from_name(other) {
                let lhs = c.operand()?;
                c.punct(',')?;
                let rhs = c.operand()?;
                c.punct('?')?;
                let normal = c.block()?;
                c.punct(':')?;
                InstKind::ArithOvf { op, lhs, rhs, normal, overflow: c.block()? }
            } else if let Some(op) = LowOp::from_name(other) {
                InstKind::Low(op, c.operands_until_end()?)
            } else {
                return Err(format!("unknown instruction `{other}`"));
            }
        }
    };
    c.done()?;
    Ok(Line::Inst(Inst { out, kind }))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
function f(v0, v1) entry=b0 cells=1 env=0 values=8
b0:
  v2 = prim add v0, 1
  v3 = global_get \"g\\\"x\"
  cell_set 0, v3
  v4 = make_closure f1 [cell 0, env 2]
  v5 = call v4(v2, \"s\", -2.5, undefined)
  is_i32 v0 ? b1 : b2

b1:
  v6 = add_i32_ovf v0, 2147483647 ? b3 : b2

b2:
  v7 = phi [b0: 1e21, b1: NaN]
  throw not_a_function

b3:
  obj_set v5, \"k\", v6
  return v6
end
";

    #[test]
    fn round_trip_is_exact() {
        let f = parse_function(SAMPLE).unwrap();
        assert_eq!(print_function(&f), SAMPLE);
        assert_eq!(parse_function(&print_function(&f)).unwrap(), f);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_function("function f() entry=b0 cells=0 env=0 values=0\nb0:\n  bogus v1\nend\n").unwrap_err();
        assert_eq!(e.line, 3);
    }
}
