//! Primitive inlining.
//!
//! Every `prim` instruction is replaced by a sub-CFG that dispatches on the
//! operand tags with explicit `is_*` tests and then runs typed low-level
//! ops. The block holding the primitive is split: the template starts where
//! the primitive was, and the remainder of the block becomes a join block
//! whose phi receives the result from every template exit.
//!
//! Tests on immediate operands are decided here, since their tags are known
//! without any analysis.

use crate::ir::cleanup::cleanup;
use crate::ir::{BlockId, Inst, InstKind, IrFunction, Literal, Operand, Phi, Program};
use crate::runtime::ops::{f64_to_i32, float_to_string};
use crate::runtime::{Const, LowOp, OvfOp, PrimOp, RuntimeError, TypeTag};

pub fn inline_primitives(mut p: Program) -> Program {
    for f in &mut p.functions {
        inline_function(f);
    }
    p
}

/// Inlines every primitive of `f` and normalizes the result.
pub fn inline_function(f: &mut IrFunction) {
    let mut bi = 0;
    while bi < f.blocks.len() {
        let Some(k) = f.blocks[bi].insts.iter().position(|i| matches!(i.kind, InstKind::Prim(..))) else {
            bi += 1;
            continue;
        };
        let b = BlockId(bi as u32);
        let mut rest = f.blocks[bi].insts.split_off(k);
        let Inst { out, kind: InstKind::Prim(prim, args) } = rest.remove(0) else { unreachable!() };
        let cont = f.new_block();
        for s in rest.last().expect("block keeps its terminator").kind.successors() {
            for phi in &mut f.blocks[s.index()].phis {
                for (p, _) in &mut phi.incoming {
                    if *p == b {
                        *p = cont;
                    }
                }
            }
        }
        f.blocks[cont.index()].insts = rest;
        let arms = Template { f }.expand(b, prim, &args);
        for (arm, _) in &arms {
            f.blocks[arm.index()].insts.push(Inst { out: None, kind: InstKind::Jump(cont) });
        }
        if let Some(out) = out {
            f.blocks[cont.index()].phis.push(Phi { out, incoming: arms });
        }
        bi += 1;
    }
    cleanup(f);
}

/// A template exit: the block that jumps to the join and the value it
/// delivers.
type Arm = (BlockId, Operand);

#[derive(Clone, Copy, PartialEq, Eq)]
enum NumCase {
    IntInt,
    IntFloat,
    FloatInt,
    FloatFloat,
    /// `x` is a number and `y` is not.
    NumOther,
    /// `x` is not a number.
    Other,
}

fn undefined() -> Operand {
    Operand::konst(Const::Undefined)
}

fn negate(c: Const) -> Const {
    Const::from_bool(c != Const::True)
}

struct Template<'f> {
    f: &'f mut IrFunction,
}

impl Template<'_> {
    fn new_block(&mut self) -> BlockId {
        self.f.new_block()
    }

    fn emit(&mut self, b: BlockId, kind: InstKind) -> Operand {
        let out = self.f.new_value();
        self.f.blocks[b.index()].insts.push(Inst { out: Some(out), kind });
        Operand::Val(out)
    }

    fn low(&mut self, b: BlockId, op: LowOp, args: Vec<Operand>) -> Operand {
        self.emit(b, InstKind::Low(op, args))
    }

    fn low_void(&mut self, b: BlockId, op: LowOp, args: Vec<Operand>) {
        self.f.blocks[b.index()].insts.push(Inst { out: None, kind: InstKind::Low(op, args) });
    }

    fn terminate(&mut self, b: BlockId, kind: InstKind) {
        self.f.blocks[b.index()].insts.push(Inst { out: None, kind });
    }

    fn throw(&mut self, b: BlockId, e: RuntimeError) {
        self.terminate(b, InstKind::Throw(e));
    }

    /// Emits `is_<tag> v`, or decides it statically for an immediate.
    /// Returns the blocks where the test holds and where it fails.
    fn test(&mut self, b: BlockId, tag: TypeTag, v: &Operand) -> (Option<BlockId>, Option<BlockId>) {
        if let Some(t) = v.literal_tag() {
            return if t == tag { (Some(b), None) } else { (None, Some(b)) };
        }
        let taken = self.new_block();
        let other = self.new_block();
        self.terminate(b, InstKind::TestTag { tag, value: v.clone(), taken, other });
        (Some(taken), Some(other))
    }

    /// Overflow-checked int32 op. Returns the normal block with the result,
    /// and the overflow block.
    fn ovf(&mut self, b: BlockId, op: OvfOp, x: &Operand, y: &Operand) -> (Arm, BlockId) {
        let normal = self.new_block();
        let overflow = self.new_block();
        let out = self.f.new_value();
        self.f.blocks[b.index()].insts.push(Inst {
            out: Some(out),
            kind: InstKind::ArithOvf { op, lhs: x.clone(), rhs: y.clone(), normal, overflow },
        });
        ((normal, Operand::Val(out)), overflow)
    }

    fn coerce_f64(&mut self, b: BlockId, x: &Operand) -> Operand {
        match x {
            Operand::Imm(Literal::Int(i)) => Operand::Imm(Literal::Float(f64::from(*i))),
            _ => self.low(b, LowOp::I32ToF64, vec![x.clone()]),
        }
    }

    fn coerce_string(&mut self, b: BlockId, x: &Operand) -> Operand {
        let s = match x {
            Operand::Imm(Literal::Str(_)) => return x.clone(),
            Operand::Imm(Literal::Int(i)) => i.to_string(),
            Operand::Imm(Literal::Float(f)) => float_to_string(*f),
            Operand::Imm(Literal::Const(c)) => c.name().to_string(),
            Operand::Val(_) => return self.low(b, LowOp::ToString, vec![x.clone()]),
        };
        Operand::str(&s)
    }

    /// Merges arms into one block, with a phi when their values differ.
    fn join(&mut self, arms: Vec<Arm>) -> Option<Arm> {
        if arms.len() <= 1 {
            return arms.into_iter().next();
        }
        let j = self.new_block();
        for (b, _) in &arms {
            self.terminate(*b, InstKind::Jump(j));
        }
        if arms.iter().all(|(_, o)| *o == arms[0].1) {
            return Some((j, arms[0].1.clone()));
        }
        let out = self.f.new_value();
        self.f.blocks[j.index()].phis.push(Phi { out, incoming: arms });
        Some((j, Operand::Val(out)))
    }

    /// Two-level number dispatch on `x` then `y`.
    fn num_dispatch(&mut self, b: BlockId, x: &Operand, y: &Operand) -> Vec<(NumCase, BlockId)> {
        let mut cases = Vec::new();
        let (xi, xn) = self.test(b, TypeTag::Int32, x);
        if let Some(xi) = xi {
            let (yi, yn) = self.test(xi, TypeTag::Int32, y);
            cases.extend(yi.map(|b| (NumCase::IntInt, b)));
            if let Some(yn) = yn {
                let (yf, yo) = self.test(yn, TypeTag::Float64, y);
                cases.extend(yf.map(|b| (NumCase::IntFloat, b)));
                cases.extend(yo.map(|b| (NumCase::NumOther, b)));
            }
        }
        if let Some(xn) = xn {
            let (xf, xo) = self.test(xn, TypeTag::Float64, x);
            if let Some(xf) = xf {
                let (yi, yn) = self.test(xf, TypeTag::Int32, y);
                cases.extend(yi.map(|b| (NumCase::FloatInt, b)));
                if let Some(yn) = yn {
                    let (yf, yo) = self.test(yn, TypeTag::Float64, y);
                    cases.extend(yf.map(|b| (NumCase::FloatFloat, b)));
                    cases.extend(yo.map(|b| (NumCase::NumOther, b)));
                }
            }
            cases.extend(xo.map(|b| (NumCase::Other, b)));
        }
        cases
    }

    /// Float operands for a mixed or float case.
    fn float_pair(&mut self, case: NumCase, b: BlockId, x: &Operand, y: &Operand) -> (Operand, Operand) {
        match case {
            NumCase::IntInt | NumCase::IntFloat => {
                let fx = self.coerce_f64(b, x);
                let fy = if case == NumCase::IntInt { self.coerce_f64(b, y) } else { y.clone() };
                (fx, fy)
            }
            NumCase::FloatInt => (x.clone(), self.coerce_f64(b, y)),
            _ => (x.clone(), y.clone()),
        }
    }

    fn expand(&mut self, b: BlockId, prim: PrimOp, args: &[Operand]) -> Vec<Arm> {
        let a = |i: usize| args[i].clone();
        match prim {
            PrimOp::Add | PrimOp::Sub | PrimOp::Mul | PrimOp::Div | PrimOp::Mod => {
                self.arith(b, prim.ovf_op().unwrap(), &a(0), &a(1))
            }
            PrimOp::And | PrimOp::Or | PrimOp::Xor | PrimOp::Shl | PrimOp::Shr => {
                self.bitwise(b, prim.bitwise_op().unwrap(), &a(0), &a(1))
            }
            PrimOp::Lt | PrimOp::Le | PrimOp::Gt | PrimOp::Ge => self.compare(b, prim, &a(0), &a(1)),
            PrimOp::Eq => self.eq(b, &a(0), &a(1)),
            PrimOp::Ne => {
                let arms = self.eq(b, &a(0), &a(1));
                self.negate_arms(arms)
            }
            PrimOp::Neg => self.neg(b, &a(0)),
            PrimOp::ToBool => self.coerce_bool(b, &a(0)),
            PrimOp::Not => {
                let arms = self.coerce_bool(b, &a(0));
                self.negate_arms(arms)
            }
            PrimOp::GetProp => self.get_prop(b, &a(0), &a(1)),
            PrimOp::PutProp => self.put_prop(b, &a(0), &a(1), &a(2)),
            PrimOp::GetIndex => self.get_index(b, &a(0), &a(1)),
            PrimOp::PutIndex => self.put_index(b, &a(0), &a(1), &a(2)),
            PrimOp::Call => {
                let (c, o) = self.test(b, TypeTag::Closure, &a(0));
                if let Some(o) = o {
                    self.throw(o, RuntimeError::NotAFunction);
                }
                c.map(|c| {
                    let r = self.emit(c, InstKind::Call(a(0), args[1..].to_vec()));
                    (c, r)
                })
                .into_iter()
                .collect()
            }
        }
    }

    fn negate_arms(&mut self, arms: Vec<Arm>) -> Vec<Arm> {
        arms.into_iter()
            .map(|(b, v)| match v {
                Operand::Imm(Literal::Const(c)) => (b, Operand::konst(negate(c))),
                v => {
                    let r = self.low(b, LowOp::NotBool, vec![v]);
                    (b, r)
                }
            })
            .collect()
    }

    fn arith(&mut self, b: BlockId, op: OvfOp, x: &Operand, y: &Operand) -> Vec<Arm> {
        let mut arms = Vec::new();
        let mut slow: Vec<BlockId> = Vec::new();
        let fop = op.float_op();
        for (case, cb) in self.num_dispatch(b, x, y) {
            match case {
                NumCase::IntInt => {
                    let (normal, overflow) = self.ovf(cb, op, x, y);
                    arms.push(normal);
                    let (fx, fy) = self.float_pair(case, overflow, x, y);
                    let r = self.low(overflow, fop, vec![fx, fy]);
                    arms.push((overflow, r));
                }
                NumCase::IntFloat | NumCase::FloatInt | NumCase::FloatFloat => {
                    let (fx, fy) = self.float_pair(case, cb, x, y);
                    let r = self.low(cb, fop, vec![fx, fy]);
                    arms.push((cb, r));
                }
                NumCase::NumOther | NumCase::Other => slow.push(cb),
            }
        }
        if slow.is_empty() {
            return arms;
        }
        if op != OvfOp::Add {
            for s in slow {
                self.throw(s, RuntimeError::NotANumber);
            }
            return arms;
        }
        // String concatenation of both operands' string forms, shared by
        // every non-numeric case.
        let s = if slow.len() == 1 {
            slow[0]
        } else {
            let s = self.new_block();
            for from in slow {
                self.terminate(from, InstKind::Jump(s));
            }
            s
        };
        let sx = self.coerce_string(s, x);
        let sy = self.coerce_string(s, y);
        let r = self.low(s, LowOp::StrCat, vec![sx, sy]);
        arms.push((s, r));
        arms
    }

    fn neg(&mut self, b: BlockId, x: &Operand) -> Vec<Arm> {
        let mut arms = Vec::new();
        let (xi, xn) = self.test(b, TypeTag::Int32, x);
        if let Some(xi) = xi {
            let (normal, overflow) = self.ovf(xi, OvfOp::Sub, &Operand::int(0), x);
            arms.push(normal);
            let fx = self.coerce_f64(overflow, x);
            let r = self.low(overflow, LowOp::SubF64, vec![Operand::Imm(Literal::Float(0.0)), fx]);
            arms.push((overflow, r));
        }
        if let Some(xn) = xn {
            let (xf, xo) = self.test(xn, TypeTag::Float64, x);
            if let Some(xf) = xf {
                let r = self.low(xf, LowOp::NegF64, vec![x.clone()]);
                arms.push((xf, r));
            }
            if let Some(xo) = xo {
                self.throw(xo, RuntimeError::NotANumber);
            }
        }
        arms
    }

    fn coerce_int32(&mut self, b: BlockId, x: &Operand) -> Option<Arm> {
        let mut arms = Vec::new();
        let (xi, xn) = self.test(b, TypeTag::Int32, x);
        if let Some(xi) = xi {
            arms.push((xi, x.clone()));
        }
        if let Some(xn) = xn {
            let (xf, xo) = self.test(xn, TypeTag::Float64, x);
            if let Some(xf) = xf {
                let r = match x {
                    Operand::Imm(Literal::Float(f)) => Operand::int(f64_to_i32(*f)),
                    _ => self.low(xf, LowOp::F64ToI32, vec![x.clone()]),
                };
                arms.push((xf, r));
            }
            if let Some(xo) = xo {
                self.throw(xo, RuntimeError::BadBitwise);
            }
        }
        self.join(arms)
    }

    fn bitwise(&mut self, b: BlockId, op: LowOp, x: &Operand, y: &Operand) -> Vec<Arm> {
        let Some((bx, ix)) = self.coerce_int32(b, x) else { return vec![] };
        let Some((by, iy)) = self.coerce_int32(bx, y) else { return vec![] };
        let r = self.low(by, op, vec![ix, iy]);
        vec![(by, r)]
    }

    fn compare(&mut self, b: BlockId, prim: PrimOp, x: &Operand, y: &Operand) -> Vec<Arm> {
        let (iop, fop) = prim.compare_ops().expect("relational operator");
        let mut arms = Vec::new();
        for (case, cb) in self.num_dispatch(b, x, y) {
            match case {
                NumCase::IntInt => {
                    let r = self.low(cb, iop, vec![x.clone(), y.clone()]);
                    arms.push((cb, r));
                }
                NumCase::IntFloat | NumCase::FloatInt | NumCase::FloatFloat => {
                    let (fx, fy) = self.float_pair(case, cb, x, y);
                    let r = self.low(cb, fop, vec![fx, fy]);
                    arms.push((cb, r));
                }
                NumCase::NumOther | NumCase::Other => self.throw(cb, RuntimeError::BadCompare),
            }
        }
        arms
    }

    fn eq(&mut self, b: BlockId, x: &Operand, y: &Operand) -> Vec<Arm> {
        let mut arms = Vec::new();
        for (case, cb) in self.num_dispatch(b, x, y) {
            let r = match case {
                NumCase::IntInt => self.low(cb, LowOp::EqI32, vec![x.clone(), y.clone()]),
                NumCase::IntFloat | NumCase::FloatInt | NumCase::FloatFloat => {
                    let (fx, fy) = self.float_pair(case, cb, x, y);
                    self.low(cb, LowOp::EqF64, vec![fx, fy])
                }
                NumCase::NumOther => Operand::konst(Const::False),
                NumCase::Other => self.low(cb, LowOp::EqRef, vec![x.clone(), y.clone()]),
            };
            arms.push((cb, r));
        }
        arms
    }

    fn coerce_bool(&mut self, b: BlockId, x: &Operand) -> Vec<Arm> {
        let mut arms = Vec::new();
        let mut rest = Some(b);
        for (tag, op) in [
            (TypeTag::Int32, LowOp::TruthyI32),
            (TypeTag::Const, LowOp::TruthyConst),
            (TypeTag::Float64, LowOp::TruthyF64),
            (TypeTag::String, LowOp::TruthyStr),
        ] {
            let Some(cur) = rest else { break };
            let (t, o) = self.test(cur, tag, x);
            if let Some(t) = t {
                let r = self.low(t, op, vec![x.clone()]);
                arms.push((t, r));
            }
            rest = o;
        }
        if let Some(r) = rest {
            arms.push((r, Operand::konst(Const::True)));
        }
        arms
    }

    fn get_prop(&mut self, b: BlockId, o: &Operand, name: &Operand) -> Vec<Arm> {
        let Operand::Imm(Literal::Str(key)) = name else { panic!("property names are string immediates") };
        let mut arms = Vec::new();
        let (obj, rest) = self.test(b, TypeTag::Object, o);
        if let Some(obj) = obj {
            let r = self.low(obj, LowOp::ObjGet, vec![o.clone(), name.clone()]);
            arms.push((obj, r));
        }
        let mut rest = rest;
        if &**key == "length" {
            for (tag, op) in [(TypeTag::Array, LowOp::ArrLen), (TypeTag::String, LowOp::StrLen)] {
                let Some(cur) = rest else { break };
                let (t, other) = self.test(cur, tag, o);
                if let Some(t) = t {
                    let r = self.low(t, op, vec![o.clone()]);
                    arms.push((t, r));
                }
                rest = other;
            }
        }
        if let Some(cur) = rest {
            let (c, other) = self.test(cur, TypeTag::Const, o);
            if let Some(c) = c {
                self.throw(c, RuntimeError::ConstProperty);
            }
            if let Some(other) = other {
                arms.push((other, undefined()));
            }
        }
        arms
    }

    fn put_prop(&mut self, b: BlockId, o: &Operand, name: &Operand, v: &Operand) -> Vec<Arm> {
        let (obj, other) = self.test(b, TypeTag::Object, o);
        if let Some(other) = other {
            self.throw(other, RuntimeError::NotIndexable);
        }
        obj.map(|obj| {
            self.low_void(obj, LowOp::ObjSet, vec![o.clone(), name.clone(), v.clone()]);
            (obj, undefined())
        })
        .into_iter()
        .collect()
    }

    fn get_index(&mut self, b: BlockId, o: &Operand, k: &Operand) -> Vec<Arm> {
        let mut arms = Vec::new();
        let (arr, rest) = self.test(b, TypeTag::Array, o);
        if let Some(arr) = arr {
            let (ki, kn) = self.test(arr, TypeTag::Int32, k);
            if let Some(ki) = ki {
                let r = self.low(ki, LowOp::ArrGet, vec![o.clone(), k.clone()]);
                arms.push((ki, r));
            }
            arms.extend(kn.map(|kn| (kn, undefined())));
        }
        let Some(rest) = rest else { return arms };
        let (obj, rest) = self.test(rest, TypeTag::Object, o);
        if let Some(obj) = obj {
            let ks = self.coerce_string(obj, k);
            let r = self.low(obj, LowOp::ObjGet, vec![o.clone(), ks]);
            arms.push((obj, r));
        }
        let Some(rest) = rest else { return arms };
        let (s, rest) = self.test(rest, TypeTag::String, o);
        if let Some(s) = s {
            let (ki, kn) = self.test(s, TypeTag::Int32, k);
            if let Some(ki) = ki {
                let r = self.low(ki, LowOp::StrCharAt, vec![o.clone(), k.clone()]);
                arms.push((ki, r));
            }
            arms.extend(kn.map(|kn| (kn, undefined())));
        }
        let Some(rest) = rest else { return arms };
        let (c, other) = self.test(rest, TypeTag::Const, o);
        if let Some(c) = c {
            self.throw(c, RuntimeError::ConstProperty);
        }
        arms.extend(other.map(|o| (o, undefined())));
        arms
    }

    fn put_index(&mut self, b: BlockId, o: &Operand, k: &Operand, v: &Operand) -> Vec<Arm> {
        let mut arms = Vec::new();
        let (arr, rest) = self.test(b, TypeTag::Array, o);
        if let Some(arr) = arr {
            let (ki, kn) = self.test(arr, TypeTag::Int32, k);
            if let Some(ki) = ki {
                self.low_void(ki, LowOp::ArrSet, vec![o.clone(), k.clone(), v.clone()]);
                arms.push((ki, undefined()));
            }
            if let Some(kn) = kn {
                self.throw(kn, RuntimeError::BadIndex);
            }
        }
        let Some(rest) = rest else { return arms };
        let (obj, other) = self.test(rest, TypeTag::Object, o);
        if let Some(obj) = obj {
            let ks = self.coerce_string(obj, k);
            self.low_void(obj, LowOp::ObjSet, vec![o.clone(), ks, v.clone()]);
            arms.push((obj, undefined()));
        }
        if let Some(other) = other {
            self.throw(other, RuntimeError::NotIndexable);
        }
        arms
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::compile_source;
    use crate::ir::text::print_function;
    use crate::ir::validate;

    fn compiled(src: &str, name: &str) -> IrFunction {
        let p = compile_source(src).unwrap();
        for f in &p.functions {
            let d = validate(f);
            assert!(d.is_empty(), "{d:?}\n{}", print_function(f));
            assert!(!print_function(f).contains("prim "), "{}", print_function(f));
        }
        p.function(p.find(name).unwrap()).clone()
    }

    fn count_low(f: &IrFunction, op: LowOp) -> usize {
        f.blocks
            .iter()
            .flat_map(|b| b.insts.iter())
            .filter(|i| matches!(&i.kind, InstKind::Low(o, _) if *o == op))
            .count()
    }

    fn count_ovf(f: &IrFunction) -> usize {
        f.blocks.iter().filter(|b| matches!(b.terminator().kind, InstKind::ArithOvf { .. })).count()
    }

    #[test]
    fn add_template_shape() {
        let f = compiled("function f(x, y) { return x + y; }", "f");
        assert_eq!(f.count_tests(Some(TypeTag::Int32)), 3);
        assert_eq!(f.count_tests(Some(TypeTag::Float64)), 3);
        assert_eq!(f.count_tests(None), 6);
        assert_eq!(count_ovf(&f), 1);
        assert_eq!(count_low(&f, LowOp::AddF64), 4);
        assert_eq!(count_low(&f, LowOp::I32ToF64), 4);
        // The string path is shared by all three non-numeric cases.
        assert_eq!(count_low(&f, LowOp::StrCat), 1);
        assert_eq!(count_low(&f, LowOp::ToString), 2);
    }

    #[test]
    fn literal_operands_fold_their_tests() {
        let f = compiled("function f(i) { return i + 1; }", "f");
        // is_i32 i, then is_f64 i; the literal is never tested.
        assert_eq!(f.count_tests(None), 2);
        let f = compiled("function f() { return \"a\" + \"b\"; }", "f");
        assert_eq!(f.count_tests(None), 0);
        assert_eq!(count_low(&f, LowOp::StrCat), 1);
        assert_eq!(count_low(&f, LowOp::ToString), 0);
    }

    #[test]
    fn per_operator_test_counts() {
        let cases = [
            ("x - y", 6),
            ("x < y", 6),
            ("x == y", 6),
            ("x != y", 6),
            ("x & y", 4),
            ("x >> 1", 2),
            ("-x", 2),
            ("!x", 4),
            ("x.foo", 2),
            ("x.length", 4),
            ("x[y]", 6),
            ("x(y)", 1),
        ];
        for (e, n) in cases {
            let f = compiled(&format!("function f(x, y) {{ return {e}; }}"), "f");
            assert_eq!(f.count_tests(None), n, "{e}\n{}", print_function(&f));
        }
    }

    #[test]
    fn ne_negates_each_arm() {
        let f = compiled("function f(x) { return x != null; }", "f");
        // Number arms fold to `true`; the reference arm is negated.
        assert_eq!(count_low(&f, LowOp::NotBool), 1);
        assert_eq!(count_low(&f, LowOp::EqRef), 1);
    }
}
