use std::fmt;
use std::rc::Rc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    BitAnd,
    BitOr,
    BitXor,
    Shl,
    Shr,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::BitAnd => "&",
            BinOp::BitOr => "|",
            BinOp::BitXor => "^",
            BinOp::Shl => "<<",
            BinOp::Shr => ">>",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Int(i32),
    Float(f64),
    Str(String),
    Bool(bool),
    Null,
    Undefined,
    Ident(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Array(Vec<Expr>),
    Object(Vec<(String, Expr)>),
    Index(Box<Expr>, Box<Expr>),
    Member(Box<Expr>, String),
    /// `target op= value`; `op` is `None` for plain assignment.
    Assign(Option<BinOp>, Box<Expr>, Box<Expr>),
    /// `++`/`--` in prefix or postfix position.
    Update { increment: bool, prefix: bool, target: Box<Expr> },
    Function(Rc<FuncDecl>),
    Call(Box<Expr>, Vec<Expr>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub init: Option<Expr>,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ForInit {
    Var(Vec<VarDecl>),
    Expr(Expr),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stmt {
    Var(Vec<VarDecl>),
    Expr(Expr),
    If(Expr, Box<Stmt>, Option<Box<Stmt>>),
    While(Expr, Box<Stmt>),
    For {
        init: Option<ForInit>,
        cond: Option<Expr>,
        update: Option<Expr>,
        body: Box<Stmt>,
    },
    Return(Option<Expr>, Pos),
    Block(Vec<Stmt>),
    Function(Rc<FuncDecl>),
    Empty,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FuncDecl {
    pub name: Option<String>,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
    pub pos: Pos,
}

/// A whole source file. Top-level statements run as the implicit `main`
/// function; top-level `var`s and function declarations are globals.
#[derive(Clone, Debug, PartialEq)]
pub struct Ast {
    pub body: Vec<Stmt>,
}

impl Ast {
    /// Top-level function declarations, in source order.
    pub fn functions(&self) -> impl Iterator<Item = &Rc<FuncDecl>> {
        self.body.iter().filter_map(|s| match s {
            Stmt::Function(f) => Some(f),
            _ => None,
        })
    }
}

/// Names declared by `var` anywhere in `body` (not descending into nested
/// functions), followed by nested function declaration names. Order is
/// first occurrence; duplicates are dropped.
pub fn declared_names(body: &[Stmt]) -> Vec<String> {
    fn walk(s: &Stmt, out: &mut Vec<String>) {
        let add = |n: &str, out: &mut Vec<String>| {
            if !out.iter().any(|x| x == n) {
                out.push(n.to_string());
            }
        };
        match s {
            Stmt::Var(ds) => ds.iter().for_each(|d| add(&d.name, out)),
            Stmt::For { init: Some(ForInit::Var(ds)), body, .. } => {
                ds.iter().for_each(|d| add(&d.name, out));
                walk(body, out);
            }
            Stmt::For { body, .. } | Stmt::While(_, body) => walk(body, out),
            Stmt::If(_, t, e) => {
                walk(t, out);
                if let Some(e) = e {
                    walk(e, out);
                }
            }
            Stmt::Block(b) => b.iter().for_each(|s| walk(s, out)),
            Stmt::Function(f) => {
                if let Some(n) = &f.name {
                    add(n, out);
                }
            }
            Stmt::Expr(_) | Stmt::Return(..) | Stmt::Empty => {}
        }
    }
    let mut out = Vec::new();
    body.iter().for_each(|s| walk(s, &mut out));
    out
}

/// Function declarations directly in `body` (hoisted), including those
/// nested in blocks and control flow but not inside other functions.
pub fn hoisted_functions(body: &[Stmt]) -> Vec<Rc<FuncDecl>> {
    fn walk(s: &Stmt, out: &mut Vec<Rc<FuncDecl>>) {
        match s {
            Stmt::Function(f) => out.push(f.clone()),
            Stmt::For { body, .. } | Stmt::While(_, body) => walk(body, out),
            Stmt::If(_, t, e) => {
                walk(t, out);
                if let Some(e) = e {
                    walk(e, out);
                }
            }
            Stmt::Block(b) => b.iter().for_each(|s| walk(s, out)),
            _ => {}
        }
    }
    let mut out = Vec::new();
    body.iter().for_each(|s| walk(s, &mut out));
    out
}

/// Calls `f` for every name free in `func`: referenced by its body or by
/// any nested function without being declared along the way. Names may
/// repeat.
pub fn visit_free_names(func: &FuncDecl, f: &mut dyn FnMut(&str)) {
    let mut locals: Vec<String> = func.params.clone();
    locals.extend(declared_names(&func.body));
    for s in &func.body {
        visit_stmt(s, &locals, f);
    }
}

fn visit_stmt(s: &Stmt, locals: &[String], f: &mut dyn FnMut(&str)) {
    match s {
        Stmt::Var(ds) => ds.iter().filter_map(|d| d.init.as_ref()).for_each(|e| visit_expr(e, locals, f)),
        Stmt::Expr(e) => visit_expr(e, locals, f),
        Stmt::If(c, t, e) => {
            visit_expr(c, locals, f);
            visit_stmt(t, locals, f);
            if let Some(e) = e {
                visit_stmt(e, locals, f);
            }
        }
        Stmt::While(c, b) => {
            visit_expr(c, locals, f);
            visit_stmt(b, locals, f);
        }
        Stmt::For { init, cond, update, body } => {
            match init {
                Some(ForInit::Var(ds)) => ds.iter().filter_map(|d| d.init.as_ref()).for_each(|e| visit_expr(e, locals, f)),
                Some(ForInit::Expr(e)) => visit_expr(e, locals, f),
                None => {}
            }
            cond.iter().chain(update.iter()).for_each(|e| visit_expr(e, locals, f));
            visit_stmt(body, locals, f);
        }
        Stmt::Return(e, _) => e.iter().for_each(|e| visit_expr(e, locals, f)),
        Stmt::Block(b) => b.iter().for_each(|s| visit_stmt(s, locals, f)),
        Stmt::Function(func) => visit_nested(func, locals, f),
        Stmt::Empty => {}
    }
}

fn visit_nested(func: &FuncDecl, outer: &[String], f: &mut dyn FnMut(&str)) {
    visit_free_names(func, &mut |n| {
        if !outer.iter().any(|l| l == n) {
            f(n)
        }
    });
}

fn visit_expr(e: &Expr, locals: &[String], f: &mut dyn FnMut(&str)) {
    match &e.kind {
        ExprKind::Ident(n) => {
            if !locals.iter().any(|l| l == n) {
                f(n)
            }
        }
        ExprKind::Int(_) | ExprKind::Float(_) | ExprKind::Str(_) | ExprKind::Bool(_) | ExprKind::Null | ExprKind::Undefined => {}
        ExprKind::Unary(_, a) | ExprKind::Member(a, _) => visit_expr(a, locals, f),
        ExprKind::Update { target, .. } => visit_expr(target, locals, f),
        ExprKind::Binary(_, a, b) | ExprKind::Index(a, b) | ExprKind::Assign(_, a, b) => {
            visit_expr(a, locals, f);
            visit_expr(b, locals, f);
        }
        ExprKind::Array(es) => es.iter().for_each(|e| visit_expr(e, locals, f)),
        ExprKind::Object(ps) => ps.iter().for_each(|(_, e)| visit_expr(e, locals, f)),
        ExprKind::Call(c, args) => {
            visit_expr(c, locals, f);
            args.iter().for_each(|e| visit_expr(e, locals, f));
        }
        ExprKind::Function(func) => visit_nested(func, locals, f),
    }
}
