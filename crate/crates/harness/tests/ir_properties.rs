//! Structural properties of compiled random programs and the corpus.

use bbv_core::analysis::{analyze, TypeSet};
use bbv_core::frontend::{compile_source, lower, parse};
use bbv_core::ir::text::{parse_program, print_program};
use bbv_core::ir::{validate, InstKind, IrFunction, Operand};
use bbv_core::runtime::TypeTag;
use bbv_harness::corpus;
use bbv_harness::randprog::generate;
use proptest::prelude::*;

fn sources() -> Vec<(String, String)> {
    corpus::builtin()
        .into_iter()
        .map(|b| (b.name, b.source))
        .chain((0..200).map(|s| (format!("seed {s}"), generate(s))))
        .collect()
}

/// Every typed operand is statically known to carry its tag: the only
/// sources of that knowledge are type tests, literals and typed results.
fn typed_operands_are_guarded(f: &IrFunction) -> Result<(), String> {
    let r = analyze(f);
    let set = |env: &Vec<TypeSet>, o: &Operand| match o {
        Operand::Val(v) => env[v.index()],
        Operand::Imm(l) => TypeSet::of(l.tag()),
    };
    for b in f.block_ids() {
        let Some(mut env) = r.block_in[b.index()].clone() else { continue };
        for inst in &f.block(b).insts {
            let need: Vec<(&Operand, TypeTag)> = match &inst.kind {
                InstKind::Low(op, args) => {
                    args.iter().zip(op.operand_tags()).filter_map(|(a, t)| t.map(|t| (a, t))).collect()
                }
                InstKind::ArithOvf { lhs, rhs, .. } => vec![(lhs, TypeTag::Int32), (rhs, TypeTag::Int32)],
                InstKind::Branch { cond, .. } => vec![(cond, TypeTag::Const)],
                InstKind::Call(c, _) => vec![(c, TypeTag::Closure)],
                InstKind::Prim(..) => return Err(format!("{}: primitive left after inlining", f.name)),
                _ => vec![],
            };
            for (o, t) in need {
                let s = set(&env, o);
                if !s.is_subset(TypeSet::of(t)) {
                    return Err(format!("{} {b}: operand {o:?} of {:?} may be {s:?}", f.name, inst.kind));
                }
            }
            if let Some(out) = inst.out {
                env[out.index()] = match &inst.kind {
                    InstKind::Low(op, _) => op.result_tag().map(TypeSet::of).unwrap_or(TypeSet::TOP),
                    InstKind::MakeClosure(..) => TypeSet::of(TypeTag::Closure),
                    InstKind::ArithOvf { .. } => TypeSet::of(TypeTag::Int32),
                    _ => TypeSet::TOP,
                };
            }
        }
    }
    Ok(())
}

#[test]
fn compiled_programs_validate_and_round_trip() {
    for (name, src) in sources() {
        let p = compile_source(&src).unwrap();
        for f in &p.functions {
            assert_eq!(validate(f), vec![], "{name}");
        }
        let text = print_program(&p);
        let back = parse_program(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(back, p, "{name}");
        assert_eq!(print_program(&back), text, "{name}");
        let lowered = lower(&parse(&src).unwrap()).unwrap();
        assert_eq!(parse_program(&print_program(&lowered)).unwrap(), lowered, "{name}");
    }
}

#[test]
fn inlined_typed_ops_are_guarded() {
    for (name, src) in sources() {
        let p = compile_source(&src).unwrap();
        for f in &p.functions {
            if let Err(e) = typed_operands_are_guarded(f) {
                panic!("{name}: {e}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_seeds_agree_and_analysis_is_sound(seed in 1000u64..u64::MAX) {
        let src = generate(seed);
        if let Some(c) = bbv_harness::check::compare(&src, Some("bench")) {
            prop_assert!(c.mismatches().is_empty(), "{}\n{:?}", src, c.mismatches());
            for r in &c.runs {
                prop_assert!(r.layout.is_ok(), "{}: {:?}", r.label(), r.layout);
            }
        }
        let p = compile_source(&src).unwrap();
        let s = bbv_harness::soundness::check_program(&p, Some("bench"), Some(50_000_000));
        prop_assert!(s.violations.is_empty(), "{}\n{:?}", src, s.violations);
    }
}
