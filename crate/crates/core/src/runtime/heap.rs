use std::collections::BTreeMap;

use super::value::{ArrRef, CloRef, Const, ObjRef, StrRef, Value};

/// Largest array index a store may create. Guards against accidental
/// multi-gigabyte allocations from a stray large integer index.
pub const MAX_ARRAY_INDEX: i32 = 1 << 20;

#[derive(Clone, Debug, Default)]
pub struct Closure {
    pub func: u32,
    /// Captured cell or scope indices; interpreted by the executor that
    /// created the closure.
    pub captures: Vec<u32>,
}

/// Growable tables for every heap kind. Nothing is ever freed.
#[derive(Clone, Debug, Default)]
pub struct Heap {
    strings: Vec<String>,
    objects: Vec<BTreeMap<String, Value>>,
    arrays: Vec<Vec<Value>>,
    closures: Vec<Closure>,
    cells: Vec<Value>,
}

impl Heap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn alloc_str(&mut self, s: impl Into<String>) -> Value {
        self.strings.push(s.into());
        Value::Str(StrRef(self.strings.len() as u32 - 1))
    }

    pub fn str(&self, r: StrRef) -> &str {
        &self.strings[r.0 as usize]
    }

    pub fn alloc_object(&mut self) -> Value {
        self.objects.push(BTreeMap::new());
        Value::Object(ObjRef(self.objects.len() as u32 - 1))
    }

    pub fn object(&self, r: ObjRef) -> &BTreeMap<String, Value> {
        &self.objects[r.0 as usize]
    }

    pub fn object_mut(&mut self, r: ObjRef) -> &mut BTreeMap<String, Value> {
        &mut self.objects[r.0 as usize]
    }

    pub fn alloc_array(&mut self, elems: Vec<Value>) -> Value {
        self.arrays.push(elems);
        Value::Array(ArrRef(self.arrays.len() as u32 - 1))
    }

    pub fn array(&self, r: ArrRef) -> &[Value] {
        &self.arrays[r.0 as usize]
    }

    pub fn array_mut(&mut self, r: ArrRef) -> &mut Vec<Value> {
        &mut self.arrays[r.0 as usize]
    }

    pub fn alloc_closure(&mut self, func: u32, captures: Vec<u32>) -> Value {
        self.closures.push(Closure { func, captures });
        Value::Closure(CloRef(self.closures.len() as u32 - 1))
    }

    pub fn closure(&self, r: CloRef) -> &Closure {
        &self.closures[r.0 as usize]
    }

    pub fn alloc_cell(&mut self, init: Value) -> u32 {
        self.cells.push(init);
        self.cells.len() as u32 - 1
    }

    pub fn cell(&self, c: u32) -> Value {
        self.cells[c as usize]
    }

    pub fn set_cell(&mut self, c: u32, v: Value) {
        self.cells[c as usize] = v;
    }

    /// Deep, deterministic rendering used to compare results across
    /// executors. Heap identities never leak into the output.
    pub fn render(&self, v: Value) -> String {
        let mut out = String::new();
        let mut stack = Vec::new();
        self.render_into(v, &mut out, &mut stack);
        out
    }

    fn render_into(&self, v: Value, out: &mut String, stack: &mut Vec<(u8, u32)>) {
        match v {
            Value::Int(i) => out.push_str(&i.to_string()),
            Value::Float(f) => {
                out.push_str(&super::ops::float_to_string(f));
                out.push('f');
            }
            Value::Const(c) => out.push_str(c.name()),
            Value::Str(s) => {
                out.push_str(&format!("{:?}", self.str(s)));
            }
            Value::Closure(_) => out.push_str("<function>"),
            Value::Array(a) => {
                if stack.contains(&(0, a.0)) {
                    out.push_str("<cycle>");
                    return;
                }
                stack.push((0, a.0));
                out.push('[');
                for (i, e) in self.array(a).iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    self.render_into(*e, out, stack);
                }
                out.push(']');
                stack.pop();
            }
            Value::Object(o) => {
                if stack.contains(&(1, o.0)) {
                    out.push_str("<cycle>");
                    return;
                }
                stack.push((1, o.0));
                out.push('{');
                for (i, (k, e)) in self.object(o).iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push_str(k);
                    out.push(':');
                    self.render_into(*e, out, stack);
                }
                out.push('}');
                stack.pop();
            }
        }
    }

    /// JS-style truthiness.
    pub fn truthy(&self, v: Value) -> bool {
        match v {
            Value::Int(i) => i != 0,
            Value::Float(f) => !(f == 0.0 || f.is_nan()),
            Value::Const(c) => c == Const::True,
            Value::Str(s) => !self.str(s).is_empty(),
            Value::Object(_) | Value::Array(_) | Value::Closure(_) => true,
        }
    }
}

/// 64-bit FNV-1a, used for stable result hashes.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}
