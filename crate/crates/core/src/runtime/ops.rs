//! Low-level typed operations. Every primitive template bottoms out in
//! these, and every executor (code buffer VM, IR interpreter, reference
//! interpreter) shares this one implementation of their semantics.

use thiserror::Error;

use super::heap::{Heap, MAX_ARRAY_INDEX};
use super::value::{Const, TypeTag, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Error)]
pub enum RuntimeError {
    #[error("arithmetic operand is not a number")]
    NotANumber,
    #[error("relational comparison of non-numbers")]
    BadCompare,
    #[error("bitwise operand is not a number")]
    BadBitwise,
    #[error("value is not a function")]
    NotAFunction,
    #[error("cannot access a property of a constant")]
    ConstProperty,
    #[error("value does not support indexed or property stores")]
    NotIndexable,
    #[error("invalid array index")]
    BadIndex,
    #[error("call stack overflow")]
    StackOverflow,
    #[error("execution step limit reached")]
    OutOfFuel,
}

impl RuntimeError {
    pub const ALL: [RuntimeError; 9] = [
        RuntimeError::NotANumber,
        RuntimeError::BadCompare,
        RuntimeError::BadBitwise,
        RuntimeError::NotAFunction,
        RuntimeError::ConstProperty,
        RuntimeError::NotIndexable,
        RuntimeError::BadIndex,
        RuntimeError::StackOverflow,
        RuntimeError::OutOfFuel,
    ];

    pub fn code(self) -> &'static str {
        match self {
            RuntimeError::NotANumber => "not_a_number",
            RuntimeError::BadCompare => "bad_compare",
            RuntimeError::BadBitwise => "bad_bitwise",
            RuntimeError::NotAFunction => "not_a_function",
            RuntimeError::ConstProperty => "const_property",
            RuntimeError::NotIndexable => "not_indexable",
            RuntimeError::BadIndex => "bad_index",
            RuntimeError::StackOverflow => "stack_overflow",
            RuntimeError::OutOfFuel => "out_of_fuel",
        }
    }

    pub fn from_code(s: &str) -> Option<RuntimeError> {
        RuntimeError::ALL.into_iter().find(|e| e.code() == s)
    }
}

macro_rules! low_ops {
    ($($variant:ident => $name:literal,)*) => {
        /// Typed low-level operations (non-branching).
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
        pub enum LowOp { $($variant,)* }

        impl LowOp {
            pub const ALL: &'static [LowOp] = &[$(LowOp::$variant,)*];

            pub fn name(self) -> &'static str {
                match self { $(LowOp::$variant => $name,)* }
            }

            pub fn from_name(s: &str) -> Option<LowOp> {
                match s { $($name => Some(LowOp::$variant),)* _ => None }
            }
        }
    };
}

low_ops! {
    AddF64 => "add_f64",
    SubF64 => "sub_f64",
    MulF64 => "mul_f64",
    DivF64 => "div_f64",
    ModF64 => "mod_f64",
    NegF64 => "neg_f64",
    I32ToF64 => "i32_to_f64",
    F64ToI32 => "f64_to_i32",
    AndI32 => "and_i32",
    OrI32 => "or_i32",
    XorI32 => "xor_i32",
    ShlI32 => "shl_i32",
    ShrI32 => "shr_i32",
    LtI32 => "lt_i32",
    LeI32 => "le_i32",
    GtI32 => "gt_i32",
    GeI32 => "ge_i32",
    EqI32 => "eq_i32",
    LtF64 => "lt_f64",
    LeF64 => "le_f64",
    GtF64 => "gt_f64",
    GeF64 => "ge_f64",
    EqF64 => "eq_f64",
    EqRef => "eq_ref",
    NotBool => "not_bool",
    TruthyI32 => "truthy_i32",
    TruthyF64 => "truthy_f64",
    TruthyStr => "truthy_str",
    TruthyConst => "truthy_const",
    ToString => "to_string",
    StrCat => "strcat",
    StrLen => "str_len",
    StrCharAt => "str_char_at",
    ObjNew => "obj_new",
    ObjGet => "obj_get",
    ObjSet => "obj_set",
    ArrNew => "arr_new",
    ArrGet => "arr_get",
    ArrSet => "arr_set",
    ArrLen => "arr_len",
}

use TypeTag::{Array as A, Const as C, Float64 as F, Int32 as I, Object as O, String as S};

impl LowOp {
    /// Required operand tags; `None` accepts any value. `ArrNew` is variadic
    /// and returns an empty slice.
    pub fn operand_tags(self) -> &'static [Option<TypeTag>] {
        use LowOp::*;
        match self {
            AddF64 | SubF64 | MulF64 | DivF64 | ModF64 => &[Some(F), Some(F)],
            NegF64 | F64ToI32 | TruthyF64 => &[Some(F)],
            I32ToF64 | TruthyI32 => &[Some(I)],
            AndI32 | OrI32 | XorI32 | ShlI32 | ShrI32 => &[Some(I), Some(I)],
            LtI32 | LeI32 | GtI32 | GeI32 | EqI32 => &[Some(I), Some(I)],
            LtF64 | LeF64 | GtF64 | GeF64 | EqF64 => &[Some(F), Some(F)],
            EqRef => &[None, None],
            NotBool | TruthyConst => &[Some(C)],
            TruthyStr | StrLen => &[Some(S)],
            ToString => &[None],
            StrCat => &[Some(S), Some(S)],
            StrCharAt => &[Some(S), Some(I)],
            ObjNew => &[],
            ObjGet => &[Some(O), Some(S)],
            ObjSet => &[Some(O), Some(S), None],
            ArrNew => &[],
            ArrGet => &[Some(A), Some(I)],
            ArrSet => &[Some(A), Some(I), None],
            ArrLen => &[Some(A)],
        }
    }

    pub fn is_variadic(self) -> bool {
        self == LowOp::ArrNew
    }

    pub fn has_output(self) -> bool {
        !matches!(self, LowOp::ObjSet | LowOp::ArrSet)
    }

    /// Statically known tag of the result, if any.
    pub fn result_tag(self) -> Option<TypeTag> {
        use LowOp::*;
        match self {
            AddF64 | SubF64 | MulF64 | DivF64 | ModF64 | NegF64 | I32ToF64 => Some(F),
            F64ToI32 | AndI32 | OrI32 | XorI32 | ShlI32 | ShrI32 | StrLen | ArrLen => Some(I),
            LtI32 | LeI32 | GtI32 | GeI32 | EqI32 | LtF64 | LeF64 | GtF64 | GeF64 | EqF64
            | EqRef | NotBool | TruthyI32 | TruthyF64 | TruthyStr | TruthyConst => Some(C),
            ToString | StrCat => Some(S),
            ObjNew => Some(O),
            ArrNew => Some(A),
            StrCharAt | ObjGet | ArrGet => None,
            ObjSet | ArrSet => None,
        }
    }
}

/// Overflow-branching int32 arithmetic. These are block terminators: the
/// normal edge receives the int32 result, the overflow edge receives nothing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OvfOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

impl OvfOp {
    pub const ALL: [OvfOp; 5] = [OvfOp::Add, OvfOp::Sub, OvfOp::Mul, OvfOp::Div, OvfOp::Mod];

    pub fn name(self) -> &'static str {
        match self {
            OvfOp::Add => "add_i32_ovf",
            OvfOp::Sub => "sub_i32_ovf",
            OvfOp::Mul => "mul_i32_ovf",
            OvfOp::Div => "div_i32_ovf",
            OvfOp::Mod => "mod_i32_ovf",
        }
    }

    pub fn from_name(s: &str) -> Option<OvfOp> {
        OvfOp::ALL.into_iter().find(|o| o.name() == s)
    }

    /// `None` signals overflow. Division "overflows" whenever the int32
    /// quotient is not exact; modulo overflows on a zero divisor.
    pub fn eval(self, x: i32, y: i32) -> Option<i32> {
        match self {
            OvfOp::Add => x.checked_add(y),
            OvfOp::Sub => x.checked_sub(y),
            OvfOp::Mul => x.checked_mul(y),
            OvfOp::Div => {
                if y == 0 || x.checked_rem(y) != Some(0) {
                    None
                } else {
                    x.checked_div(y)
                }
            }
            OvfOp::Mod => x.checked_rem(y),
        }
    }

    /// The float64 operation used on the overflow edge.
    pub fn float_op(self) -> LowOp {
        match self {
            OvfOp::Add => LowOp::AddF64,
            OvfOp::Sub => LowOp::SubF64,
            OvfOp::Mul => LowOp::MulF64,
            OvfOp::Div => LowOp::DivF64,
            OvfOp::Mod => LowOp::ModF64,
        }
    }
}

pub fn add_i32_ovf(x: i32, y: i32) -> Option<i32> {
    OvfOp::Add.eval(x, y)
}

/// ECMAScript ToInt32 on a float.
pub fn f64_to_i32(f: f64) -> i32 {
    if !f.is_finite() {
        return 0;
    }
    let m = f.trunc().rem_euclid(4_294_967_296.0);
    m as u32 as i32
}

/// Shortest round-trip decimal rendering of a float.
pub fn float_to_string(f: f64) -> String {
    if f.is_nan() {
        "NaN".to_string()
    } else if f.is_infinite() {
        if f > 0.0 { "Infinity" } else { "-Infinity" }.to_string()
    } else {
        format!("{f}")
    }
}

pub fn to_string(heap: &Heap, v: Value) -> String {
    let mut seen = Vec::new();
    to_string_inner(heap, v, &mut seen)
}

fn to_string_inner(heap: &Heap, v: Value, seen: &mut Vec<u32>) -> String {
    match v {
        Value::Int(i) => i.to_string(),
        Value::Float(f) => float_to_string(f),
        Value::Const(c) => c.name().to_string(),
        Value::Str(s) => heap.str(s).to_string(),
        Value::Object(_) => "[object Object]".to_string(),
        Value::Closure(_) => "function".to_string(),
        Value::Array(a) => {
            // Cyclic joins render the inner occurrence as empty.
            if seen.contains(&a.0) {
                return String::new();
            }
            seen.push(a.0);
            let parts: Vec<String> = heap
                .array(a)
                .iter()
                .map(|e| match e {
                    Value::Const(Const::Null | Const::Undefined) => String::new(),
                    other => to_string_inner(heap, *other, seen),
                })
                .collect();
            seen.pop();
            parts.join(",")
        }
    }
}

fn int(v: Value) -> i32 {
    match v {
        Value::Int(i) => i,
        other => panic!("typed op expected int32, got {other:?}"),
    }
}

fn float(v: Value) -> f64 {
    match v {
        Value::Float(f) => f,
        other => panic!("typed op expected float64, got {other:?}"),
    }
}

fn konst(v: Value) -> Const {
    match v {
        Value::Const(c) => c,
        other => panic!("typed op expected const, got {other:?}"),
    }
}

/// Evaluates a typed low-level op. Operands must carry the tags listed by
/// [`LowOp::operand_tags`]; a violation is a compiler bug and panics.
pub fn eval_low(op: LowOp, args: &[Value], heap: &mut Heap) -> Result<Option<Value>, RuntimeError> {
    use LowOp::*;
    let a = |i: usize| args[i];
    let v = match op {
        AddF64 => Value::Float(float(a(0)) + float(a(1))),
        SubF64 => Value::Float(float(a(0)) - float(a(1))),
        MulF64 => Value::Float(float(a(0)) * float(a(1))),
        DivF64 => Value::Float(float(a(0)) / float(a(1))),
        ModF64 => Value::Float(float(a(0)) % float(a(1))),
        NegF64 => Value::Float(-float(a(0))),
        I32ToF64 => Value::Float(f64::from(int(a(0)))),
        F64ToI32 => Value::Int(f64_to_i32(float(a(0)))),
        AndI32 => Value::Int(int(a(0)) & int(a(1))),
        OrI32 => Value::Int(int(a(0)) | int(a(1))),
        XorI32 => Value::Int(int(a(0)) ^ int(a(1))),
        ShlI32 => Value::Int(int(a(0)).wrapping_shl(int(a(1)) as u32 & 31)),
        ShrI32 => Value::Int(int(a(0)).wrapping_shr(int(a(1)) as u32 & 31)),
        LtI32 => Value::bool(int(a(0)) < int(a(1))),
        LeI32 => Value::bool(int(a(0)) <= int(a(1))),
        GtI32 => Value::bool(int(a(0)) > int(a(1))),
        GeI32 => Value::bool(int(a(0)) >= int(a(1))),
        EqI32 => Value::bool(int(a(0)) == int(a(1))),
        LtF64 => Value::bool(float(a(0)) < float(a(1))),
        LeF64 => Value::bool(float(a(0)) <= float(a(1))),
        GtF64 => Value::bool(float(a(0)) > float(a(1))),
        GeF64 => Value::bool(float(a(0)) >= float(a(1))),
        EqF64 => Value::bool(float(a(0)) == float(a(1))),
        EqRef => Value::bool(eq_ref(heap, a(0), a(1))),
        NotBool => Value::bool(konst(a(0)) != Const::True),
        TruthyI32 => Value::bool(int(a(0)) != 0),
        TruthyF64 => {
            let f = float(a(0));
            Value::bool(!(f == 0.0 || f.is_nan()))
        }
        TruthyStr => match a(0) {
            Value::Str(s) => Value::bool(!heap.str(s).is_empty()),
            other => panic!("truthy_str on {other:?}"),
        },
        TruthyConst => Value::bool(konst(a(0)) == Const::True),
        ToString => {
            let s = to_string(heap, a(0));
            heap.alloc_str(s)
        }
        StrCat => match (a(0), a(1)) {
            (Value::Str(x), Value::Str(y)) => {
                let s = format!("{}{}", heap.str(x), heap.str(y));
                heap.alloc_str(s)
            }
            other => panic!("strcat on {other:?}"),
        },
        StrLen => match a(0) {
            Value::Str(s) => Value::Int(heap.str(s).chars().count() as i32),
            other => panic!("str_len on {other:?}"),
        },
        StrCharAt => match a(0) {
            Value::Str(s) => {
                let i = int(a(1));
                let c = if i < 0 { None } else { heap.str(s).chars().nth(i as usize) };
                match c {
                    Some(c) => heap.alloc_str(c.to_string()),
                    None => Value::UNDEFINED,
                }
            }
            other => panic!("str_char_at on {other:?}"),
        },
        ObjNew => heap.alloc_object(),
        ObjGet => match (a(0), a(1)) {
            (Value::Object(o), Value::Str(k)) => {
                let key = heap.str(k);
                heap.object(o).get(key).copied().unwrap_or(Value::UNDEFINED)
            }
            other => panic!("obj_get on {other:?}"),
        },
        ObjSet => {
            match (a(0), a(1)) {
                (Value::Object(o), Value::Str(k)) => {
                    let key = heap.str(k).to_string();
                    heap.object_mut(o).insert(key, a(2));
                }
                other => panic!("obj_set on {other:?}"),
            }
            return Ok(None);
        }
        ArrNew => heap.alloc_array(args.to_vec()),
        ArrGet => match a(0) {
            Value::Array(r) => {
                let i = int(a(1));
                if i < 0 {
                    Value::UNDEFINED
                } else {
                    heap.array(r).get(i as usize).copied().unwrap_or(Value::UNDEFINED)
                }
            }
            other => panic!("arr_get on {other:?}"),
        },
        ArrSet => {
            match a(0) {
                Value::Array(r) => {
                    let i = int(a(1));
                    if !(0..MAX_ARRAY_INDEX).contains(&i) {
                        return Err(RuntimeError::BadIndex);
                    }
                    let arr = heap.array_mut(r);
                    let i = i as usize;
                    if i >= arr.len() {
                        arr.resize(i + 1, Value::UNDEFINED);
                    }
                    arr[i] = a(2);
                }
                other => panic!("arr_set on {other:?}"),
            }
            return Ok(None);
        }
        ArrLen => match a(0) {
            Value::Array(r) => Value::Int(heap.array(r).len() as i32),
            other => panic!("arr_len on {other:?}"),
        },
    };
    Ok(Some(v))
}

/// Identity equality for non-number left operands: same tag and same
/// constant, same string contents, or same heap reference.
pub fn eq_ref(heap: &Heap, x: Value, y: Value) -> bool {
    match (x, y) {
        (Value::Str(a), Value::Str(b)) => heap.str(a) == heap.str(b),
        (Value::Int(a), Value::Int(b)) => a == b,
        (Value::Float(a), Value::Float(b)) => a == b,
        (Value::Int(a), Value::Float(b)) | (Value::Float(b), Value::Int(a)) => f64::from(a) == b,
        (a, b) => a == b,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: exact 64-bit arithmetic, then a range check.
    fn add_oracle(x: i32, y: i32) -> Option<i32> {
        let r = i64::from(x) + i64::from(y);
        (i64::from(i32::MIN)..=i64::from(i32::MAX)).contains(&r).then_some(r as i32)
    }

    #[test]
    fn add_i32_ovf_examples() {
        assert_eq!(add_i32_ovf(1, 2), Some(3));
        assert_eq!(add_oracle(2147483647, 1), None);
        assert_eq!(add_i32_ovf(2147483647, 1), None);
        assert_eq!(add_oracle(-2147483648, -1), None);
        assert_eq!(add_i32_ovf(-2147483648, -1), None);
    }

    #[test]
    fn division_is_exact_or_overflows() {
        assert_eq!(OvfOp::Div.eval(6, 3), Some(2));
        assert_eq!(OvfOp::Div.eval(7, 2), None);
        assert_eq!(OvfOp::Div.eval(1, 0), None);
        assert_eq!(OvfOp::Div.eval(i32::MIN, -1), None);
        assert_eq!(OvfOp::Mod.eval(-7, 2), Some(-1));
        assert_eq!(OvfOp::Mod.eval(7, 0), None);
    }

    #[test]
    fn to_int32_wraps() {
        assert_eq!(f64_to_i32(4294967296.0), 0);
        assert_eq!(f64_to_i32(2147483648.0), i32::MIN);
        assert_eq!(f64_to_i32(-1.5), -1);
        assert_eq!(f64_to_i32(f64::NAN), 0);
    }

    #[test]
    fn float_strings() {
        assert_eq!(float_to_string(2147483648.0), "2147483648");
        assert_eq!(float_to_string(0.1), "0.1");
        assert_eq!(float_to_string(f64::NEG_INFINITY), "-Infinity");
    }

    #[test]
    fn names_round_trip() {
        for op in LowOp::ALL {
            assert_eq!(LowOp::from_name(op.name()), Some(*op));
        }
        for e in RuntimeError::ALL {
            assert_eq!(RuntimeError::from_code(e.code()), Some(e));
        }
    }

    #[test]
    fn array_store_grows() {
        let mut h = Heap::new();
        let a = h.alloc_array(vec![]);
        eval_low(LowOp::ArrSet, &[a, Value::Int(2), Value::Int(9)], &mut h).unwrap();
        assert_eq!(h.render(a), "[undefined,undefined,9]");
        assert_eq!(
            eval_low(LowOp::ArrSet, &[a, Value::Int(-1), Value::Int(9)], &mut h),
            Err(RuntimeError::BadIndex)
        );
    }
}
