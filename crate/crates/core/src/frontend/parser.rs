use std::rc::Rc;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::SyntaxError;

pub fn parse(src: &str) -> Result<Ast, SyntaxError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, i: 0 };
    let mut body = Vec::new();
    while !p.at_eof() {
        body.push(p.statement()?);
    }
    Ok(Ast { body })
}

struct Parser {
    toks: Vec<Token>,
    i: usize,
}

type PResult<T> = Result<T, SyntaxError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.i + k).min(self.toks.len() - 1)].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].pos
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn error<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let pos = self.pos();
        Err(SyntaxError { line: pos.line, col: pos.col, message: msg.into() })
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_keyword(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Keyword(q) if *q == k)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.error(format!("expected `{p}`, found {}", describe(self.peek())))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(n) => {
                self.advance();
                Ok(n)
            }
            other => self.error(format!("expected identifier, found {}", describe(&other))),
        }
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Punct("{") => {
                self.advance();
                let mut body = Vec::new();
                while !self.is_punct("}") {
                    if self.at_eof() {
                        return self.error("unterminated block");
                    }
                    body.push(self.statement()?);
                }
                self.advance();
                Ok(Stmt::Block(body))
            }
            Tok::Punct(";") => {
                self.advance();
                Ok(Stmt::Empty)
            }
            Tok::Keyword("var") => {
                self.advance();
                let decls = self.var_decls()?;
                self.expect_punct(";")?;
                Ok(Stmt::Var(decls))
            }
            Tok::Keyword("function") if matches!(self.peek_at(1), Tok::Ident(_)) => {
                let f = self.function()?;
                Ok(Stmt::Function(f))
            }
            Tok::Keyword("return") => {
                self.advance();
                let e = if self.is_punct(";") { None } else { Some(self.expression()?) };
                self.expect_punct(";")?;
                Ok(Stmt::Return(e, pos))
            }
            Tok::Keyword("if") => {
                self.advance();
                self.expect_punct("(")?;
                let c = self.expression()?;
                self.expect_punct(")")?;
                let t = self.statement()?;
                let e = if self.is_keyword("else") {
                    self.advance();
                    Some(Box::new(self.statement()?))
                } else {
                    None
                };
                Ok(Stmt::If(c, Box::new(t), e))
            }
            Tok::Keyword("while") => {
                self.advance();
                self.expect_punct("(")?;
                let c = self.expression()?;
                self.expect_punct(")")?;
                let b = self.statement()?;
                Ok(Stmt::While(c, Box::new(b)))
            }
            Tok::Keyword("for") => {
                self.advance();
                self.expect_punct("(")?;
                let init = if self.is_punct(";") {
                    None
                } else if self.is_keyword("var") {
                    self.advance();
                    Some(ForInit::Var(self.var_decls()?))
                } else {
                    Some(ForInit::Expr(self.expression()?))
                };
                self.expect_punct(";")?;
                let cond = if self.is_punct(";") { None } else { Some(self.expression()?) };
                self.expect_punct(";")?;
                let update = if self.is_punct(")") { None } else { Some(self.expression()?) };
                self.expect_punct(")")?;
                let body = self.statement()?;
                Ok(Stmt::For { init, cond, update, body: Box::new(body) })
            }
            _ => {
                let e = self.expression()?;
                self.expect_punct(";")?;
                Ok(Stmt::Expr(e))
            }
        }
    }

    fn var_decls(&mut self) -> PResult<Vec<VarDecl>> {
        let mut decls = Vec::new();
        loop {
            let pos = self.pos();
            let name = self.ident()?;
            let init = if self.eat_punct("=") { Some(self.assignment()?) } else { None };
            decls.push(VarDecl { name, init, pos });
            if !self.eat_punct(",") {
                return Ok(decls);
            }
        }
    }

    fn function(&mut self) -> PResult<Rc<FuncDecl>> {
        let pos = self.pos();
        self.advance(); // `function`
        let name = match self.peek() {
            Tok::Ident(_) => Some(self.ident()?),
            _ => None,
        };
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.is_punct(")") {
            loop {
                params.push(self.ident()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        self.expect_punct("{")?;
        let mut body = Vec::new();
        while !self.is_punct("}") {
            if self.at_eof() {
                return self.error("unterminated function body");
            }
            body.push(self.statement()?);
        }
        self.advance();
        Ok(Rc::new(FuncDecl { name, params, body, pos }))
    }

    /// Expression; the comma operator is not supported.
    fn expression(&mut self) -> PResult<Expr> {
        self.assignment()
    }

    fn assignment(&mut self) -> PResult<Expr> {
        let lhs = self.binary(0)?;
        let op = match self.peek() {
            Tok::Punct("=") => None,
            Tok::Punct(p) => match compound_op(p) {
                Some(op) => Some(op),
                None => return Ok(lhs),
            },
            _ => return Ok(lhs),
        };
        let pos = self.pos();
        if !is_assignable(&lhs) {
            return Err(SyntaxError { line: pos.line, col: pos.col, message: "invalid assignment target".into() });
        }
        self.advance();
        let rhs = self.assignment()?;
        Ok(Expr { pos: lhs.pos, kind: ExprKind::Assign(op, Box::new(lhs), Box::new(rhs)) })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let Some((op, prec)) = (match self.peek() {
                Tok::Punct(p) => binary_op(p),
                _ => None,
            }) else {
                return Ok(lhs);
            };
            if prec < min_prec {
                return Ok(lhs);
            }
            self.advance();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr { pos: lhs.pos, kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)) };
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        match self.peek() {
            Tok::Punct("-") => {
                self.advance();
                let e = self.unary()?;
                Ok(match e.kind {
                    // Fold negated numeric literals so `-1` stays a literal.
                    ExprKind::Int(i) => Expr { pos, kind: ExprKind::Int(-i) },
                    ExprKind::Float(f) => Expr { pos, kind: ExprKind::Float(-f) },
                    kind => Expr { pos, kind: ExprKind::Unary(UnOp::Neg, Box::new(Expr { kind, pos: e.pos })) },
                })
            }
            Tok::Punct("!") => {
                self.advance();
                let e = self.unary()?;
                Ok(Expr { pos, kind: ExprKind::Unary(UnOp::Not, Box::new(e)) })
            }
            Tok::Punct(p @ ("++" | "--")) => {
                let increment = *p == "++";
                self.advance();
                let target = self.unary()?;
                if !is_assignable(&target) {
                    return self.error("invalid update target");
                }
                Ok(Expr { pos, kind: ExprKind::Update { increment, prefix: true, target: Box::new(target) } })
            }
            _ => self.postfix(),
        }
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.call()?;
        while let Tok::Punct(p @ ("++" | "--")) = self.peek() {
            let increment = *p == "++";
            if !is_assignable(&e) {
                return self.error("invalid update target");
            }
            self.advance();
            e = Expr { pos: e.pos, kind: ExprKind::Update { increment, prefix: false, target: Box::new(e) } };
        }
        Ok(e)
    }

    fn call(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            let pos = self.pos();
            if self.eat_punct("(") {
                let mut args = Vec::new();
                if !self.is_punct(")") {
                    loop {
                        args.push(self.assignment()?);
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                }
                self.expect_punct(")")?;
                e = Expr { pos: e.pos, kind: ExprKind::Call(Box::new(e), args) };
            } else if self.eat_punct(".") {
                let name = self.ident()?;
                e = Expr { pos, kind: ExprKind::Member(Box::new(e), name) };
            } else if self.eat_punct("[") {
                let idx = self.expression()?;
                self.expect_punct("]")?;
                e = Expr { pos, kind: ExprKind::Index(Box::new(e), Box::new(idx)) };
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let kind = match self.peek().clone() {
            Tok::Int(i) => {
                self.advance();
                ExprKind::Int(i)
            }
            Tok::Float(f) => {
                self.advance();
                ExprKind::Float(f)
            }
            Tok::Str(s) => {
                self.advance();
                ExprKind::Str(s)
            }
            Tok::Ident(n) => {
                self.advance();
                ExprKind::Ident(n)
            }
            Tok::Keyword("true") => {
                self.advance();
                ExprKind::Bool(true)
            }
            Tok::Keyword("false") => {
                self.advance();
                ExprKind::Bool(false)
            }
            Tok::Keyword("null") => {
                self.advance();
                ExprKind::Null
            }
            Tok::Keyword("undefined") => {
                self.advance();
                ExprKind::Undefined
            }
            Tok::Keyword("function") => ExprKind::Function(self.function()?),
            Tok::Punct("(") => {
                self.advance();
                let e = self.expression()?;
                self.expect_punct(")")?;
                return Ok(e);
            }
            Tok::Punct("[") => {
                self.advance();
                let mut elems = Vec::new();
                if !self.is_punct("]") {
                    loop {
                        elems.push(self.assignment()?);
                        if !self.eat_punct(",") || self.is_punct("]") {
                            break;
                        }
                    }
                }
                self.expect_punct("]")?;
                ExprKind::Array(elems)
            }
            Tok::Punct("{") => {
                self.advance();
                let mut props = Vec::new();
                if !self.is_punct("}") {
                    loop {
                        let key = match self.peek().clone() {
                            Tok::Ident(n) => n,
                            Tok::Str(s) => s,
                            Tok::Int(i) => i.to_string(),
                            other => return self.error(format!("expected property name, found {}", describe(&other))),
                        };
                        self.advance();
                        self.expect_punct(":")?;
                        props.push((key, self.assignment()?));
                        if !self.eat_punct(",") || self.is_punct("}") {
                            break;
                        }
                    }
                }
                self.expect_punct("}")?;
                ExprKind::Object(props)
            }
            other => return self.error(format!("expected expression, found {}", describe(&other))),
        };
        Ok(Expr { kind, pos })
    }
}

fn is_assignable(e: &Expr) -> bool {
    matches!(e.kind, ExprKind::Ident(_) | ExprKind::Member(..) | ExprKind::Index(..))
}

fn compound_op(p: &str) -> Option<BinOp> {
    Some(match p {
        "+=" => BinOp::Add,
        "-=" => BinOp::Sub,
        "*=" => BinOp::Mul,
        "/=" => BinOp::Div,
        "%=" => BinOp::Mod,
        "&=" => BinOp::BitAnd,
        "|=" => BinOp::BitOr,
        "^=" => BinOp::BitXor,
        "<<=" => BinOp::Shl,
        ">>=" => BinOp::Shr,
        _ => return None,
    })
}

fn binary_op(p: &str) -> Option<(BinOp, u8)> {
    Some(match p {
        "|" => (BinOp::BitOr, 1),
        "^" => (BinOp::BitXor, 2),
        "&" => (BinOp::BitAnd, 3),
        "==" | "===" => (BinOp::Eq, 4),
        "!=" | "!==" => (BinOp::Ne, 4),
        "<" => (BinOp::Lt, 5),
        "<=" => (BinOp::Le, 5),
        ">" => (BinOp::Gt, 5),
        ">=" => (BinOp::Ge, 5),
        "<<" => (BinOp::Shl, 6),
        ">>" => (BinOp::Shr, 6),
        "+" => (BinOp::Add, 7),
        "-" => (BinOp::Sub, 7),
        "*" => (BinOp::Mul, 8),
        "/" => (BinOp::Div, 8),
        "%" => (BinOp::Mod, 8),
        _ => return None,
    })
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Int(i) => format!("number `{i}`"),
        Tok::Float(f) => format!("number `{f}`"),
        Tok::Str(_) => "string literal".into(),
        Tok::Ident(n) => format!("identifier `{n}`"),
        Tok::Keyword(k) => format!("`{k}`"),
        Tok::Punct(p) => format!("`{p}`"),
        Tok::Eof => "end of input".into(),
    }
}
