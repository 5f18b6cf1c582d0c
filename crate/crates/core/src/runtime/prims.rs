//! Reference semantics of the runtime primitives.
//!
//! The compiled form of each primitive is an inlined IR template (see
//! `frontend::inline`); these direct implementations define what the
//! templates must compute and back the reference AST interpreter.

use super::heap::Heap;
use super::ops::{eq_ref, eval_low, f64_to_i32, to_string, LowOp, OvfOp, RuntimeError};
use super::value::{Const, Value};

/// Operators that lower to runtime primitive calls.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PrimOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    And,
    Or,
    Xor,
    Shl,
    Shr,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    Neg,
    Not,
    ToBool,
    GetProp,
    PutProp,
    GetIndex,
    PutIndex,
    Call,
}

impl PrimOp {
    pub const ALL: [PrimOp; 24] = [
        PrimOp::Add,
        PrimOp::Sub,
        PrimOp::Mul,
        PrimOp::Div,
        PrimOp::Mod,
        PrimOp::And,
        PrimOp::Or,
        PrimOp::Xor,
        PrimOp::Shl,
        PrimOp::Shr,
        PrimOp::Lt,
        PrimOp::Le,
        PrimOp::Gt,
        PrimOp::Ge,
        PrimOp::Eq,
        PrimOp::Ne,
        PrimOp::Neg,
        PrimOp::Not,
        PrimOp::ToBool,
        PrimOp::GetProp,
        PrimOp::PutProp,
        PrimOp::GetIndex,
        PrimOp::PutIndex,
        PrimOp::Call,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PrimOp::Add => "add",
            PrimOp::Sub => "sub",
            PrimOp::Mul => "mul",
            PrimOp::Div => "div",
            PrimOp::Mod => "mod",
            PrimOp::And => "and",
            PrimOp::Or => "or",
            PrimOp::Xor => "xor",
            PrimOp::Shl => "shl",
            PrimOp::Shr => "shr",
            PrimOp::Lt => "lt",
            PrimOp::Le => "le",
            PrimOp::Gt => "gt",
            PrimOp::Ge => "ge",
            PrimOp::Eq => "eq",
            PrimOp::Ne => "ne",
            PrimOp::Neg => "neg",
            PrimOp::Not => "not",
            PrimOp::ToBool => "to_bool",
            PrimOp::GetProp => "get_prop",
            PrimOp::PutProp => "put_prop",
            PrimOp::GetIndex => "get_index",
            PrimOp::PutIndex => "put_index",
            PrimOp::Call => "call",
        }
    }

    pub fn from_name(s: &str) -> Option<PrimOp> {
        PrimOp::ALL.into_iter().find(|p| p.name() == s)
    }

    pub fn has_output(self) -> bool {
        !matches!(self, PrimOp::PutProp | PrimOp::PutIndex)
    }

    /// True when the result is always a boolean constant.
    pub fn yields_bool(self) -> bool {
        matches!(
            self,
            PrimOp::Lt | PrimOp::Le | PrimOp::Gt | PrimOp::Ge | PrimOp::Eq | PrimOp::Ne | PrimOp::Not | PrimOp::ToBool
        )
    }

    pub fn ovf_op(self) -> Option<OvfOp> {
        match self {
            PrimOp::Add => Some(OvfOp::Add),
            PrimOp::Sub => Some(OvfOp::Sub),
            PrimOp::Mul => Some(OvfOp::Mul),
            PrimOp::Div => Some(OvfOp::Div),
            PrimOp::Mod => Some(OvfOp::Mod),
            _ => None,
        }
    }

    pub fn bitwise_op(self) -> Option<LowOp> {
        match self {
            PrimOp::And => Some(LowOp::AndI32),
            PrimOp::Or => Some(LowOp::OrI32),
            PrimOp::Xor => Some(LowOp::XorI32),
            PrimOp::Shl => Some(LowOp::ShlI32),
            PrimOp::Shr => Some(LowOp::ShrI32),
            _ => None,
        }
    }

    /// Int and float comparison ops for the relational operators.
    pub fn compare_ops(self) -> Option<(LowOp, LowOp)> {
        match self {
            PrimOp::Lt => Some((LowOp::LtI32, LowOp::LtF64)),
            PrimOp::Le => Some((LowOp::LeI32, LowOp::LeF64)),
            PrimOp::Gt => Some((LowOp::GtI32, LowOp::GtF64)),
            PrimOp::Ge => Some((LowOp::GeI32, LowOp::GeF64)),
            PrimOp::Eq => Some((LowOp::EqI32, LowOp::EqF64)),
            _ => None,
        }
    }
}

fn low(op: LowOp, args: &[Value], heap: &mut Heap) -> Value {
    eval_low(op, args, heap)
        .expect("pure low-level op cannot fail")
        .expect("op has an output")
}

fn as_number(v: Value) -> Option<f64> {
    match v {
        Value::Int(i) => Some(f64::from(i)),
        Value::Float(f) => Some(f),
        _ => None,
    }
}

/// `+`: int32 with overflow to float64, mixed numbers as float64, otherwise
/// string concatenation of both operands' string forms.
pub fn prim_add(heap: &mut Heap, x: Value, y: Value) -> Value {
    match (x, y) {
        (Value::Int(a), Value::Int(b)) => match OvfOp::Add.eval(a, b) {
            Some(r) => Value::Int(r),
            None => Value::Float(f64::from(a) + f64::from(b)),
        },
        (Value::Int(_) | Value::Float(_), Value::Int(_) | Value::Float(_)) => {
            Value::Float(as_number(x).unwrap() + as_number(y).unwrap())
        }
        _ => {
            let s = format!("{}{}", to_string(heap, x), to_string(heap, y));
            heap.alloc_str(s)
        }
    }
}

/// `-`, `*`, `/`, `%`: numbers only.
pub fn prim_arith(op: OvfOp, x: Value, y: Value) -> Result<Value, RuntimeError> {
    match (x, y) {
        (Value::Int(a), Value::Int(b)) => Ok(match op.eval(a, b) {
            Some(r) => Value::Int(r),
            None => float_arith(op, f64::from(a), f64::from(b)),
        }),
        _ => match (as_number(x), as_number(y)) {
            (Some(a), Some(b)) => Ok(float_arith(op, a, b)),
            _ => Err(RuntimeError::NotANumber),
        },
    }
}

fn float_arith(op: OvfOp, a: f64, b: f64) -> Value {
    Value::Float(match op {
        OvfOp::Add => a + b,
        OvfOp::Sub => a - b,
        OvfOp::Mul => a * b,
        OvfOp::Div => a / b,
        OvfOp::Mod => a % b,
    })
}

pub fn prim_neg(x: Value) -> Result<Value, RuntimeError> {
    match x {
        Value::Int(a) => Ok(match a.checked_neg() {
            Some(r) => Value::Int(r),
            None => Value::Float(0.0 - f64::from(a)),
        }),
        Value::Float(f) => Ok(Value::Float(-f)),
        _ => Err(RuntimeError::NotANumber),
    }
}

fn to_int32(v: Value) -> Result<i32, RuntimeError> {
    match v {
        Value::Int(i) => Ok(i),
        Value::Float(f) => Ok(f64_to_i32(f)),
        _ => Err(RuntimeError::BadBitwise),
    }
}

pub fn prim_bitwise(op: LowOp, heap: &mut Heap, x: Value, y: Value) -> Result<Value, RuntimeError> {
    let a = to_int32(x)?;
    let b = to_int32(y)?;
    Ok(low(op, &[Value::Int(a), Value::Int(b)], heap))
}

/// `<`, `<=`, `>`, `>=`: numbers only.
pub fn prim_compare(op: PrimOp, heap: &mut Heap, x: Value, y: Value) -> Result<Value, RuntimeError> {
    let (iop, fop) = op.compare_ops().expect("relational operator");
    match (x, y) {
        (Value::Int(_), Value::Int(_)) => Ok(low(iop, &[x, y], heap)),
        _ => match (as_number(x), as_number(y)) {
            (Some(a), Some(b)) => Ok(low(fop, &[Value::Float(a), Value::Float(b)], heap)),
            _ => Err(RuntimeError::BadCompare),
        },
    }
}

/// `==`: numbers compare numerically, everything else by identity with no
/// coercion across tags.
pub fn prim_eq(heap: &Heap, x: Value, y: Value) -> bool {
    match (as_number(x), as_number(y)) {
        (Some(a), Some(b)) => a == b,
        (Some(_), None) => false,
        _ => eq_ref(heap, x, y),
    }
}

pub fn prim_to_bool(heap: &Heap, x: Value) -> bool {
    heap.truthy(x)
}

pub fn prim_get_prop(heap: &mut Heap, obj: Value, name: &str) -> Result<Value, RuntimeError> {
    match obj {
        Value::Object(o) => Ok(heap.object(o).get(name).copied().unwrap_or(Value::UNDEFINED)),
        Value::Array(a) if name == "length" => Ok(Value::Int(heap.array(a).len() as i32)),
        Value::Str(s) if name == "length" => Ok(Value::Int(heap.str(s).chars().count() as i32)),
        Value::Const(_) => Err(RuntimeError::ConstProperty),
        _ => Ok(Value::UNDEFINED),
    }
}

pub fn prim_put_prop(heap: &mut Heap, obj: Value, name: &str, v: Value) -> Result<(), RuntimeError> {
    match obj {
        Value::Object(o) => {
            heap.object_mut(o).insert(name.to_string(), v);
            Ok(())
        }
        _ => Err(RuntimeError::NotIndexable),
    }
}

pub fn prim_get_index(heap: &mut Heap, obj: Value, key: Value) -> Result<Value, RuntimeError> {
    match (obj, key) {
        (Value::Array(_), Value::Int(_)) => Ok(low(LowOp::ArrGet, &[obj, key], heap)),
        (Value::Array(_), _) => Ok(Value::UNDEFINED),
        (Value::Object(o), _) => {
            let k = to_string(heap, key);
            Ok(heap.object(o).get(&k).copied().unwrap_or(Value::UNDEFINED))
        }
        (Value::Str(_), Value::Int(_)) => Ok(low(LowOp::StrCharAt, &[obj, key], heap)),
        (Value::Str(_), _) => Ok(Value::UNDEFINED),
        (Value::Const(_), _) => Err(RuntimeError::ConstProperty),
        _ => Ok(Value::UNDEFINED),
    }
}

pub fn prim_put_index(heap: &mut Heap, obj: Value, key: Value, v: Value) -> Result<(), RuntimeError> {
    match (obj, key) {
        (Value::Array(_), Value::Int(_)) => eval_low(LowOp::ArrSet, &[obj, key, v], heap).map(|_| ()),
        (Value::Array(_), _) => Err(RuntimeError::BadIndex),
        (Value::Object(o), _) => {
            let k = to_string(heap, key);
            heap.object_mut(o).insert(k, v);
            Ok(())
        }
        _ => Err(RuntimeError::NotIndexable),
    }
}

/// Applies a value-level primitive (everything except `Call`).
pub fn apply_prim(prim: PrimOp, heap: &mut Heap, args: &[Value]) -> Result<Option<Value>, RuntimeError> {
    let str_arg = |heap: &Heap, v: Value| match v {
        Value::Str(s) => heap.str(s).to_string(),
        other => panic!("property name must be a string, got {other:?}"),
    };
    let v = match prim {
        PrimOp::Add => prim_add(heap, args[0], args[1]),
        PrimOp::Sub | PrimOp::Mul | PrimOp::Div | PrimOp::Mod => {
            prim_arith(prim.ovf_op().unwrap(), args[0], args[1])?
        }
        PrimOp::And | PrimOp::Or | PrimOp::Xor | PrimOp::Shl | PrimOp::Shr => {
            prim_bitwise(prim.bitwise_op().unwrap(), heap, args[0], args[1])?
        }
        PrimOp::Lt | PrimOp::Le | PrimOp::Gt | PrimOp::Ge => prim_compare(prim, heap, args[0], args[1])?,
        PrimOp::Eq => Value::bool(prim_eq(heap, args[0], args[1])),
        PrimOp::Ne => Value::bool(!prim_eq(heap, args[0], args[1])),
        PrimOp::Neg => prim_neg(args[0])?,
        PrimOp::Not => Value::bool(!prim_to_bool(heap, args[0])),
        PrimOp::ToBool => Value::bool(prim_to_bool(heap, args[0])),
        PrimOp::GetProp => {
            let name = str_arg(heap, args[1]);
            prim_get_prop(heap, args[0], &name)?
        }
        PrimOp::PutProp => {
            let name = str_arg(heap, args[1]);
            prim_put_prop(heap, args[0], &name, args[2])?;
            return Ok(None);
        }
        PrimOp::GetIndex => prim_get_index(heap, args[0], args[1])?,
        PrimOp::PutIndex => {
            prim_put_index(heap, args[0], args[1], args[2])?;
            return Ok(None);
        }
        PrimOp::Call => panic!("calls are applied by the executor"),
    };
    Ok(Some(v))
}

pub fn bool_value(c: Const) -> bool {
    c == Const::True
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::value::{tag_of, TypeTag};

    fn s(heap: &Heap, v: Value) -> String {
        match v {
            Value::Str(r) => heap.str(r).to_string(),
            other => panic!("not a string: {other:?}"),
        }
    }

    #[test]
    fn add_examples() {
        let mut h = Heap::new();
        assert_eq!(prim_add(&mut h, Value::Int(1), Value::Int(2)), Value::Int(3));
        // Oracle: convert both to float64 and add.
        let expected = f64::from(2147483647) + f64::from(1);
        assert_eq!(prim_add(&mut h, Value::Int(2147483647), Value::Int(1)), Value::Float(expected));
        assert_eq!(expected, 2147483648.0);
        let a = h.alloc_str("a");
        let r = prim_add(&mut h, a, Value::Int(1));
        assert_eq!(s(&h, r), "a1");
        let r = prim_add(&mut h, Value::TRUE, Value::Int(1));
        assert_eq!(s(&h, r), "true1");
    }

    #[test]
    fn sub_mul_div_mod_examples() {
        assert_eq!(prim_arith(OvfOp::Sub, Value::Int(5), Value::Int(7)), Ok(Value::Int(-2)));
        assert_eq!(prim_arith(OvfOp::Sub, Value::Int(i32::MIN), Value::Int(1)), Ok(Value::Float(-2147483649.0)));
        assert_eq!(prim_arith(OvfOp::Sub, Value::NULL, Value::Int(1)), Err(RuntimeError::NotANumber));
        assert_eq!(prim_arith(OvfOp::Mul, Value::Int(6), Value::Int(7)), Ok(Value::Int(42)));
        assert_eq!(prim_arith(OvfOp::Mul, Value::Int(65536), Value::Int(65536)), Ok(Value::Float(4294967296.0)));
        assert_eq!(prim_arith(OvfOp::Mul, Value::Float(1.5), Value::Int(2)), Ok(Value::Float(3.0)));
        assert_eq!(prim_arith(OvfOp::Div, Value::Int(6), Value::Int(3)), Ok(Value::Int(2)));
        assert_eq!(prim_arith(OvfOp::Div, Value::Int(7), Value::Int(2)), Ok(Value::Float(3.5)));
        assert_eq!(prim_arith(OvfOp::Div, Value::Int(1), Value::Int(0)), Ok(Value::Float(f64::INFINITY)));
        assert_eq!(prim_arith(OvfOp::Mod, Value::Int(7), Value::Int(3)), Ok(Value::Int(1)));
        assert_eq!(prim_arith(OvfOp::Mod, Value::Float(7.5), Value::Int(2)), Ok(Value::Float(1.5)));
        let m = prim_arith(OvfOp::Mod, Value::Int(7), Value::Int(0)).unwrap();
        assert!(m.as_float().unwrap().is_nan());
    }

    #[test]
    fn bitwise_examples() {
        let mut h = Heap::new();
        assert_eq!(prim_bitwise(LowOp::AndI32, &mut h, Value::Int(6), Value::Int(3)), Ok(Value::Int(2)));
        assert_eq!(
            prim_bitwise(LowOp::AndI32, &mut h, Value::Float(4294967296.0), Value::Int(5)),
            Ok(Value::Int(0))
        );
        assert_eq!(prim_bitwise(LowOp::ShlI32, &mut h, Value::Int(1), Value::Int(33)), Ok(Value::Int(2)));
        assert_eq!(prim_bitwise(LowOp::ShrI32, &mut h, Value::Int(-8), Value::Int(1)), Ok(Value::Int(-4)));
        let st = h.alloc_str("x");
        assert_eq!(prim_bitwise(LowOp::OrI32, &mut h, st, Value::Int(1)), Err(RuntimeError::BadBitwise));
    }

    #[test]
    fn compare_and_equality_examples() {
        let mut h = Heap::new();
        assert_eq!(prim_compare(PrimOp::Lt, &mut h, Value::Int(1), Value::Int(2)), Ok(Value::TRUE));
        assert_eq!(prim_compare(PrimOp::Ge, &mut h, Value::Float(2.5), Value::Int(2)), Ok(Value::TRUE));
        let st = h.alloc_str("a");
        assert_eq!(prim_compare(PrimOp::Lt, &mut h, st, Value::Int(2)), Err(RuntimeError::BadCompare));
        assert!(prim_eq(&h, Value::Int(1), Value::Float(1.0)));
        assert!(!prim_eq(&h, Value::Int(1), Value::TRUE));
        assert!(!prim_eq(&h, Value::NULL, Value::UNDEFINED));
        let st2 = h.alloc_str("a");
        assert!(prim_eq(&h, st, st2));
    }

    #[test]
    fn property_examples() {
        let mut h = Heap::new();
        let o = h.alloc_object();
        prim_put_prop(&mut h, o, "x", Value::Int(4)).unwrap();
        assert_eq!(prim_get_prop(&mut h, o, "x"), Ok(Value::Int(4)));
        assert_eq!(prim_get_prop(&mut h, o, "y"), Ok(Value::UNDEFINED));
        assert_eq!(prim_get_prop(&mut h, Value::NULL, "y"), Err(RuntimeError::ConstProperty));
        let a = h.alloc_array(vec![Value::Int(1), Value::Int(2)]);
        assert_eq!(prim_get_prop(&mut h, a, "length"), Ok(Value::Int(2)));
        assert_eq!(prim_get_index(&mut h, a, Value::Int(1)), Ok(Value::Int(2)));
        assert_eq!(prim_get_index(&mut h, a, Value::Int(5)), Ok(Value::UNDEFINED));
        assert_eq!(prim_put_index(&mut h, Value::Int(3), Value::Int(0), Value::NULL), Err(RuntimeError::NotIndexable));
        prim_put_index(&mut h, o, Value::Int(3), Value::TRUE).unwrap();
        let k = h.alloc_str("3");
        assert_eq!(prim_get_index(&mut h, o, k), Ok(Value::TRUE));
    }

    #[test]
    fn arithmetic_on_floats_stays_float() {
        // Randomized sweep with a fixed LCG so the test stays deterministic.
        let mut state: u64 = 0x1234_5678;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            state
        };
        let mut h = Heap::new();
        for _ in 0..2000 {
            let a = next() as i32;
            let b = (next() >> 7) as i32;
            let f = f64::from_bits(next() >> 2);
            for op in OvfOp::ALL {
                let r = prim_arith(op, Value::Int(a), Value::Int(b)).unwrap();
                assert!(matches!(tag_of(r), TypeTag::Int32 | TypeTag::Float64));
                let r = prim_arith(op, Value::Float(f), Value::Int(b)).unwrap();
                assert_eq!(tag_of(r), TypeTag::Float64);
            }
            let r = prim_add(&mut h, Value::Int(a), Value::Int(b));
            assert!(matches!(tag_of(r), TypeTag::Int32 | TypeTag::Float64));
            assert_eq!(tag_of(prim_add(&mut h, Value::Int(a), Value::Float(f))), TypeTag::Float64);
        }
    }
}
