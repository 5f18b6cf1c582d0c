use std::fmt;

/// Coarse value category used for dynamic dispatch.
///
/// These seven tags are the only type information the versioning compiler
/// and the representation analysis ever reason about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TypeTag {
    Int32,
    Float64,
    Const,
    String,
    Object,
    Array,
    Closure,
}

impl TypeTag {
    pub const ALL: [TypeTag; 7] = [
        TypeTag::Int32,
        TypeTag::Float64,
        TypeTag::Const,
        TypeTag::String,
        TypeTag::Object,
        TypeTag::Array,
        TypeTag::Closure,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Short name as used by the `is_*` tests (`i32`, `f64`, ...).
    pub fn short_name(self) -> &'static str {
        match self {
            TypeTag::Int32 => "i32",
            TypeTag::Float64 => "f64",
            TypeTag::Const => "const",
            TypeTag::String => "string",
            TypeTag::Object => "object",
            TypeTag::Array => "array",
            TypeTag::Closure => "closure",
        }
    }

    pub fn from_short_name(s: &str) -> Option<TypeTag> {
        TypeTag::ALL.into_iter().find(|t| t.short_name() == s)
    }

    /// Name of the test instruction for this tag, e.g. `is_i32`.
    pub fn test_name(self) -> &'static str {
        match self {
            TypeTag::Int32 => "is_i32",
            TypeTag::Float64 => "is_f64",
            TypeTag::Const => "is_const",
            TypeTag::String => "is_string",
            TypeTag::Object => "is_object",
            TypeTag::Array => "is_array",
            TypeTag::Closure => "is_closure",
        }
    }
}

impl fmt::Display for TypeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeTag::Int32 => f.write_str("int32"),
            TypeTag::Float64 => f.write_str("float64"),
            other => f.write_str(other.short_name()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Const {
    True,
    False,
    Null,
    Undefined,
}

impl Const {
    pub fn from_bool(b: bool) -> Const {
        if b {
            Const::True
        } else {
            Const::False
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Const::True => "true",
            Const::False => "false",
            Const::Null => "null",
            Const::Undefined => "undefined",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StrRef(pub u32);
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjRef(pub u32);
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArrRef(pub u32);
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CloRef(pub u32);

/// A tagged runtime value. Heap kinds hold references into [`super::Heap`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Value {
    Int(i32),
    Float(f64),
    Const(Const),
    Str(StrRef),
    Object(ObjRef),
    Array(ArrRef),
    Closure(CloRef),
}

impl Value {
    pub const UNDEFINED: Value = Value::Const(Const::Undefined);
    pub const NULL: Value = Value::Const(Const::Null);
    pub const TRUE: Value = Value::Const(Const::True);
    pub const FALSE: Value = Value::Const(Const::False);

    pub fn bool(b: bool) -> Value {
        Value::Const(Const::from_bool(b))
    }

    pub fn tag(&self) -> TypeTag {
        tag_of(*self)
    }

    pub fn as_int(&self) -> Option<i32> {
        match *self {
            Value::Int(i) => Some(i),
            _ => None,
        }
    }

    pub fn as_float(&self) -> Option<f64> {
        match *self {
            Value::Float(f) => Some(f),
            _ => None,
        }
    }
}

pub fn tag_of(v: Value) -> TypeTag {
    match v {
        Value::Int(_) => TypeTag::Int32,
        Value::Float(_) => TypeTag::Float64,
        Value::Const(_) => TypeTag::Const,
        Value::Str(_) => TypeTag::String,
        Value::Object(_) => TypeTag::Object,
        Value::Array(_) => TypeTag::Array,
        Value::Closure(_) => TypeTag::Closure,
    }
}
