//! Random MiniDyn programs that terminate by construction.
//!
//! Loops count a fresh, read-only variable up to a small constant, and a
//! function only calls functions defined before it, so there is no
//! recursion. Values of every type flow through variables, which makes
//! type tests go both ways and runtime errors reachable.

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenOptions {
    /// Helper functions besides `bench`.
    pub max_funcs: usize,
    pub max_stmts: usize,
    pub max_expr_depth: u32,
    /// Exclusive upper bound on loop trip counts.
    pub max_trip: u32,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions { max_funcs: 3, max_stmts: 4, max_expr_depth: 3, max_trip: 4 }
    }
}

const ARITH_OPS: [(&str, u32); 10] = [
    ("+", 8),
    ("-", 5),
    ("*", 4),
    ("/", 1),
    ("%", 1),
    ("&", 3),
    ("|", 2),
    ("^", 1),
    ("<<", 1),
    (">>", 1),
];

const COMPARE_OPS: [&str; 6] = ["<", "<=", ">", ">=", "==", "!="];

const COMPOUND_OPS: [&str; 6] = ["+=", "-=", "*=", "&=", "|=", "<<="];

struct Func {
    name: String,
    arity: usize,
}

struct Gen {
    rng: StdRng,
    opts: GenOptions,
    out: String,
    indent: usize,
    next_name: usize,
    funcs: Vec<Func>,
    readable: Vec<String>,
    writable: Vec<String>,
    /// Locals holding a four-element array or an object with fields `a`
    /// and `b`; only indexed, never used as operands.
    arrays: Vec<String>,
    objects: Vec<String>,
    loop_depth: u32,
    max_loop_depth: u32,
}

/// Generates the source of a program defining `bench()`.
pub fn generate(seed: u64) -> String {
    generate_with(seed, GenOptions::default())
}

pub fn generate_with(seed: u64, opts: GenOptions) -> String {
    let mut g = Gen {
        rng: StdRng::seed_from_u64(seed),
        opts,
        out: String::new(),
        indent: 0,
        next_name: 0,
        funcs: vec![],
        readable: vec![],
        writable: vec![],
        arrays: vec![],
        objects: vec![],
        loop_depth: 0,
        max_loop_depth: 1,
    };
    g.program();
    g.out
}

impl Gen {
    fn line(&mut self, s: &str) {
        for _ in 0..self.indent {
            self.out.push_str("    ");
        }
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn fresh(&mut self, prefix: &str) -> String {
        self.next_name += 1;
        format!("{prefix}{}", self.next_name)
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn program(&mut self) {
        let globals: Vec<String> = (0..self.rng.gen_range(0..=2)).map(|_| self.fresh("g")).collect();
        self.readable.clear();
        for g in &globals {
            let init = self.literal();
            self.line(&format!("var {g} = {init};"));
        }
        let nfuncs = self.rng.gen_range(0..=self.opts.max_funcs);
        for _ in 0..nfuncs {
            let name = self.fresh("f");
            let arity = self.rng.gen_range(0..=2);
            self.function(&name, arity, &globals, 1);
            self.funcs.push(Func { name, arity });
        }
        self.function("bench", 0, &globals, 2);
        if !self.funcs.is_empty() && self.chance(0.3) {
            self.readable = globals.clone();
            self.writable = globals.clone();
            self.arrays.clear();
            self.objects.clear();
            let call = self.call(1);
            self.line(&format!("print({call});"));
        }
    }

    fn function(&mut self, name: &str, arity: usize, globals: &[String], max_loop_depth: u32) {
        let params: Vec<String> = (0..arity).map(|_| self.fresh("p")).collect();
        self.line(&format!("function {name}({}) {{", params.join(", ")));
        self.indent += 1;
        self.readable = globals.iter().chain(params.iter()).cloned().collect();
        self.writable = self.readable.clone();
        self.max_loop_depth = max_loop_depth;
        self.loop_depth = 0;
        self.arrays.clear();
        self.objects.clear();
        let nlocals = self.rng.gen_range(1..=3);
        let mut decls = Vec::new();
        for _ in 0..nlocals {
            let v = self.fresh("v");
            let init = self.expr(1);
            decls.push(format!("{v} = {init}"));
            self.readable.push(v.clone());
            self.writable.push(v);
        }
        self.line(&format!("var {};", decls.join(", ")));
        if self.chance(0.6) {
            let a = self.fresh("a");
            let elems: Vec<String> = (0..4).map(|_| self.number()).collect();
            self.line(&format!("var {a} = [{}];", elems.join(", ")));
            self.arrays.push(a);
        }
        if self.chance(0.5) {
            let o = self.fresh("o");
            let (x, y) = (self.number(), self.number());
            self.line(&format!("var {o} = {{a: {x}, b: {y}}};"));
            self.objects.push(o);
        }
        let n = self.rng.gen_range(1..=self.opts.max_stmts + 1);
        for _ in 0..n {
            self.stmt(0);
        }
        let ret = self.expr(self.opts.max_expr_depth);
        self.line(&format!("return {ret};"));
        self.indent -= 1;
        self.line("}");
    }

    fn block(&mut self, depth: u32) {
        let n = self.rng.gen_range(1..=self.opts.max_stmts.saturating_sub(depth as usize).max(1));
        for _ in 0..n {
            self.stmt(depth + 1);
        }
    }

    fn target(&mut self) -> String {
        self.writable.choose(&mut self.rng).cloned().expect("functions declare locals")
    }

    fn stmt(&mut self, depth: u32) {
        let can_loop = self.loop_depth < self.max_loop_depth;
        let nested = depth < 2;
        let d = self.opts.max_expr_depth;
        match self.rng.gen_range(0..100) {
            0..=29 => {
                let t = self.target();
                let e = self.expr(d);
                self.line(&format!("{t} = {e};"));
            }
            30..=39 => {
                let t = self.target();
                let op = *COMPOUND_OPS.choose(&mut self.rng).unwrap();
                let e = self.expr(1);
                self.line(&format!("{t} {op} {e};"));
            }
            40..=46 => {
                let t = self.target();
                let s = match self.rng.gen_range(0..4) {
                    0 => format!("{t}++;"),
                    1 => format!("{t}--;"),
                    2 => format!("++{t};"),
                    _ => format!("--{t};"),
                };
                self.line(&s);
            }
            47..=58 if nested => {
                let c = self.cond();
                self.line(&format!("if ({c}) {{"));
                self.indent += 1;
                self.block(depth);
                self.indent -= 1;
                if self.chance(0.5) {
                    self.line("} else {");
                    self.indent += 1;
                    self.block(depth);
                    self.indent -= 1;
                }
                self.line("}");
            }
            59..=70 if nested && can_loop => {
                let i = self.fresh("i");
                let trip = self.rng.gen_range(1..self.opts.max_trip);
                self.line(&format!("for (var {i} = 0; {i} < {trip}; {i}++) {{"));
                self.enter_loop(&i, depth);
                self.line("}");
            }
            71..=74 if nested && can_loop => {
                let w = self.fresh("w");
                let trip = self.rng.gen_range(1..self.opts.max_trip);
                self.line(&format!("var {w} = 0;"));
                self.line(&format!("while ({w} < {trip}) {{"));
                self.enter_loop(&w, depth);
                self.indent += 1;
                self.line(&format!("{w}++;"));
                self.indent -= 1;
                self.line("}");
            }
            75..=82 => {
                let e = self.expr(d);
                self.line(&format!("print({e});"));
            }
            83..=85 if !self.arrays.is_empty() => {
                let a = self.arrays.choose(&mut self.rng).unwrap().clone();
                let k = self.expr(1);
                let e = self.expr(1);
                self.line(&format!("{a}[({k}) & 3] = {e};"));
            }
            86..=87 if !self.objects.is_empty() => {
                let a = self.objects.choose(&mut self.rng).unwrap().clone();
                let e = self.expr(1);
                let p = *["a", "b"].choose(&mut self.rng).unwrap();
                self.line(&format!("{a}.{p} = {e};"));
            }
            92..=94 => {
                let c = self.cond();
                let e = self.expr(1);
                self.line(&format!("if ({c}) return {e};"));
            }
            _ => {
                let t = self.target();
                let e = self.expr(d);
                self.line(&format!("{t} = {e};"));
            }
        }
    }

    fn enter_loop(&mut self, counter: &str, depth: u32) {
        self.indent += 1;
        self.loop_depth += 1;
        self.readable.push(counter.to_string());
        self.block(depth);
        self.readable.pop();
        self.loop_depth -= 1;
        self.indent -= 1;
    }

    fn leaf_var(&mut self) -> String {
        self.readable.choose(&mut self.rng).cloned().expect("functions declare locals")
    }

    fn number(&mut self) -> String {
        if self.chance(0.8) {
            self.rng.gen_range(0..10).to_string()
        } else {
            ["0.5", "2.25", "(-1.5)"].choose(&mut self.rng).unwrap().to_string()
        }
    }

    fn literal(&mut self) -> String {
        let numeric = self.chance(0.94);
        match (numeric, self.rng.gen_range(0..100)) {
            (true, 0..=69) => self.rng.gen_range(0..10).to_string(),
            (true, 70..=76) => format!("(-{})", self.rng.gen_range(1..5)),
            (true, 77..=84) => {
                ["2147483647", "1073741824", "65535", "(-2147483647)"].choose(&mut self.rng).unwrap().to_string()
            }
            (true, _) => ["0.5", "2.25", "(-1.5)", "1e9", "0.1", "3.0"].choose(&mut self.rng).unwrap().to_string(),
            (false, 0..=29) => ["\"a\"", "\"xy\"", "\"\"", "\"7\""].choose(&mut self.rng).unwrap().to_string(),
            (false, 30..=59) => ["true", "false"].choose(&mut self.rng).unwrap().to_string(),
            (false, 60..=84) => "null".to_string(),
            (false, _) => "undefined".to_string(),
        }
    }

    fn leaf(&mut self) -> String {
        if !self.readable.is_empty() && self.chance(0.6) {
            self.leaf_var()
        } else {
            self.literal()
        }
    }

    /// A comparison most of the time, otherwise any value.
    fn cond(&mut self) -> String {
        if self.chance(0.8) {
            let op = *COMPARE_OPS.choose(&mut self.rng).unwrap();
            let a = self.expr(1);
            let b = self.expr(1);
            format!("{a} {op} {b}")
        } else {
            self.expr(2)
        }
    }

    fn call(&mut self, depth: u32) -> String {
        let i = self.rng.gen_range(0..self.funcs.len());
        let (name, arity) = (self.funcs[i].name.clone(), self.funcs[i].arity);
        let n = if self.chance(0.03) { arity.saturating_sub(1) } else { arity };
        let args: Vec<String> = (0..n).map(|_| self.expr(depth.saturating_sub(1))).collect();
        format!("{name}({})", args.join(", "))
    }

    fn expr(&mut self, depth: u32) -> String {
        if depth == 0 || self.chance(0.3) {
            return self.leaf();
        }
        match self.rng.gen_range(0..100) {
            0..=64 => {
                let total: u32 = ARITH_OPS.iter().map(|(_, w)| w).sum();
                let mut pick = self.rng.gen_range(0..total);
                let op = ARITH_OPS
                    .iter()
                    .find(|(_, w)| {
                        if pick < *w {
                            true
                        } else {
                            pick -= w;
                            false
                        }
                    })
                    .unwrap()
                    .0;
                let a = self.expr(depth - 1);
                let b = self.expr(depth - 1);
                format!("({a} {op} {b})")
            }
            65..=67 => {
                let op = if self.chance(0.9) { "-" } else { "!" };
                let a = self.expr(depth - 1);
                format!("({op}{a})")
            }
            68..=79 if !self.funcs.is_empty() => self.call(depth),
            80..=84 if !self.readable.is_empty() => {
                let q = self.fresh("q");
                let x = self.leaf_var();
                let arg = self.expr(depth - 1);
                if self.chance(0.4) && self.writable.contains(&x) {
                    format!("(function({q}) {{ {x} = {q}; return {x}; }})({arg})")
                } else {
                    let op = *["+", "-", "*"].choose(&mut self.rng).unwrap();
                    format!("(function({q}) {{ return {q} {op} {x}; }})({arg})")
                }
            }
            85 => {
                let a = self.leaf();
                let b = self.literal();
                format!("[{a}, {b}]")
            }
            86 => {
                let a = self.leaf();
                let b = self.literal();
                format!("{{a: {a}, b: {b}}}")
            }
            87..=92 if !self.arrays.is_empty() => {
                let a = self.arrays.choose(&mut self.rng).unwrap().clone();
                let k = self.expr(depth - 1);
                format!("{a}[({k}) & 3]")
            }
            93..=95 if !self.objects.is_empty() => {
                let o = self.objects.choose(&mut self.rng).unwrap().clone();
                let p = *["a", "b"].choose(&mut self.rng).unwrap();
                format!("{o}.{p}")
            }
            96..=97 if !self.arrays.is_empty() => {
                let a = self.arrays.choose(&mut self.rng).unwrap().clone();
                format!("{a}.length")
            }
            _ => self.leaf(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use bbv_core::frontend::compile_source;

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(generate(7), generate(7));
        assert_ne!(generate(7), generate(8));
    }

    #[test]
    fn generated_programs_compile() {
        for seed in 0..300 {
            let src = generate(seed);
            if let Err(e) = compile_source(&src) {
                panic!("seed {seed}: {e}\n{src}");
            }
        }
    }
}
