//! Inlined primitive templates compute what the reference primitives
//! compute, for arbitrary operand values and in every execution mode.

use std::rc::Rc;

use bbv_core::exec::{Config, Mode, Vm};
use bbv_core::frontend::compile_source;
use bbv_core::runtime::prims::apply_prim;
use bbv_core::runtime::{Const, Heap, PrimOp, RuntimeError, TypeTag, Value};
use proptest::prelude::*;

#[derive(Clone, Debug)]
enum Spec {
    Int(i32),
    Float(f64),
    Const(Const),
    Str(String),
    Arr(Vec<i32>),
    Obj(Vec<(String, i32)>),
}

fn spec() -> impl Strategy<Value = Spec> {
    prop_oneof![
        4 => any::<i32>().prop_map(Spec::Int),
        3 => prop::sample::select(vec![0, 1, -1, 2, 3, 31, 32, 33, 46341, i32::MAX, i32::MIN]).prop_map(Spec::Int),
        2 => any::<f64>().prop_map(Spec::Float),
        2 => prop::sample::select(vec![0.5, -0.0, 0.0, 3.0, -2.5, 1e10, 2147483648.0, f64::NAN, f64::INFINITY])
            .prop_map(Spec::Float),
        1 => prop::sample::select(vec![Const::True, Const::False, Const::Null, Const::Undefined]).prop_map(Spec::Const),
        1 => "[a-c0-9]{0,3}".prop_map(Spec::Str),
        1 => prop::collection::vec(-3i32..4, 0..4).prop_map(Spec::Arr),
        1 => prop::collection::vec(("[pq]", -3i32..4), 0..3).prop_map(Spec::Obj),
    ]
}

fn make(h: &mut Heap, s: &Spec) -> Value {
    match s {
        Spec::Int(i) => Value::Int(*i),
        Spec::Float(f) => Value::Float(*f),
        Spec::Const(c) => Value::Const(*c),
        Spec::Str(s) => h.alloc_str(s.as_str()),
        Spec::Arr(xs) => h.alloc_array(xs.iter().map(|x| Value::Int(*x)).collect()),
        Spec::Obj(kv) => {
            let o = h.alloc_object();
            let Value::Object(r) = o else { unreachable!() };
            for (k, v) in kv {
                h.object_mut(r).insert(k.clone(), Value::Int(*v));
            }
            o
        }
    }
}

const BINARY: [(&str, PrimOp); 17] = [
    ("a + b", PrimOp::Add),
    ("a - b", PrimOp::Sub),
    ("a * b", PrimOp::Mul),
    ("a / b", PrimOp::Div),
    ("a % b", PrimOp::Mod),
    ("a & b", PrimOp::And),
    ("a | b", PrimOp::Or),
    ("a ^ b", PrimOp::Xor),
    ("a << b", PrimOp::Shl),
    ("a >> b", PrimOp::Shr),
    ("a < b", PrimOp::Lt),
    ("a <= b", PrimOp::Le),
    ("a > b", PrimOp::Gt),
    ("a >= b", PrimOp::Ge),
    ("a == b", PrimOp::Eq),
    ("a != b", PrimOp::Ne),
    ("a[b]", PrimOp::GetIndex),
];

const MODES: [(Mode, Option<u32>); 5] = [
    (Mode::Baseline, Some(0)),
    (Mode::Analysis, Some(0)),
    (Mode::BbvLazy, Some(2)),
    (Mode::BbvLazy, None),
    (Mode::BbvEager, Some(5)),
];

fn expected(prim: PrimOp, args: &[&Spec]) -> Result<String, RuntimeError> {
    let mut h = Heap::new();
    let vals: Vec<Value> = args.iter().map(|s| make(&mut h, s)).collect();
    apply_prim(prim, &mut h, &vals).map(|v| h.render(v.expect("value primitive")))
}

/// Calls `f` in every mode, twice per argument order so that versions
/// compiled for one operand layout are reused or extended by the next.
fn check(src: &str, prim: PrimOp, args: &[&Spec]) -> Result<(), TestCaseError> {
    let program = Rc::new(compile_source(src).unwrap());
    let mut orders = vec![args.to_vec()];
    if args.len() == 2 {
        orders.push(vec![args[1], args[0]]);
    }
    for (mode, limit) in MODES {
        let mut vm = Vm::new(program.clone(), Config::new(mode, limit));
        vm.run_main().unwrap();
        for order in orders.iter().chain(orders.iter()) {
            let want = expected(prim, order);
            let vals: Vec<Value> = order.iter().map(|s| make(vm.heap_mut(), s)).collect();
            let got = vm.call_global("f", &vals).map(|v| vm.heap().render(v));
            prop_assert_eq!(&got, &want, "{} in {:?}/{:?} with {:?}", src, mode, limit, order);
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(192))]

    #[test]
    fn binary_templates_match_primitives(i in 0..BINARY.len(), a in spec(), b in spec()) {
        let (expr, prim) = BINARY[i];
        check(&format!("function f(a, b) {{ return {expr}; }}"), prim, &[&a, &b])?;
    }

    #[test]
    fn unary_templates_match_primitives(neg in any::<bool>(), a in spec()) {
        let (src, prim) = if neg { ("function f(a) { return -a; }", PrimOp::Neg) } else { ("function f(a) { return !a; }", PrimOp::Not) };
        check(src, prim, &[&a])?;
    }

    #[test]
    fn property_reads_match_primitive(a in spec(), name in "[pq]") {
        let src = format!("function f(a) {{ return a.{name}; }}");
        let program = Rc::new(compile_source(&src).unwrap());
        let mut h = Heap::new();
        let args = [make(&mut h, &a), h.alloc_str(name.as_str())];
        let want = apply_prim(PrimOp::GetProp, &mut h, &args).map(|v| h.render(v.unwrap()));
        for (mode, limit) in MODES {
            let mut vm = Vm::new(program.clone(), Config::new(mode, limit));
            vm.run_main().unwrap();
            let x = make(vm.heap_mut(), &a);
            let got = vm.call_global("f", &[x]).map(|v| vm.heap().render(v));
            prop_assert_eq!(&got, &want);
        }
    }

    #[test]
    fn arithmetic_result_tags(x in any::<i32>(), y in any::<i32>(), f in any::<f64>(), i in 0..5usize) {
        let prim = [PrimOp::Add, PrimOp::Sub, PrimOp::Mul, PrimOp::Div, PrimOp::Mod][i];
        let mut h = Heap::new();
        let tag = |v: Result<Option<Value>, RuntimeError>| v.unwrap().map(bbv_core::runtime::tag_of);
        let ints = tag(apply_prim(prim, &mut h, &[Value::Int(x), Value::Int(y)]));
        prop_assert!(matches!(ints, Some(TypeTag::Int32 | TypeTag::Float64)));
        for args in [[Value::Float(f), Value::Int(y)], [Value::Int(x), Value::Float(f)], [Value::Float(f), Value::Float(f)]] {
            prop_assert_eq!(tag(apply_prim(prim, &mut h, &args)), Some(TypeTag::Float64));
        }
    }
}
