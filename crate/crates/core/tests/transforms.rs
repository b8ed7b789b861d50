use equivar::interp::{check_equivalence, entry_arity, random_inputs, Verdict, DEFAULT_STEP_LIMIT};
use equivar::seed::{derive_index, rng};
use equivar::syntax::random::random_program;
use equivar::syntax::{parse, print, structurally_equal, PrintStyle};
use equivar::transforms::{apply_transform, semantics_preserving, ProgramForm, TransformId};

fn check_pass(id: TransformId, programs: u64) -> Vec<String> {
    let mut failures = Vec::new();
    for seed in 0..programs {
        let p = random_program(seed);
        let arity = entry_arity(&p).unwrap();
        let inputs = random_inputs(arity, 10, derive_index(seed, "inputs", 0));
        let out = apply_transform(id, ProgramForm::Ast(p.clone()), &mut rng(seed))
            .unwrap()
            .into_ast()
            .unwrap();
        let verdict = check_equivalence(&p, &out, &inputs, DEFAULT_STEP_LIMIT);
        if let Verdict::Diverged { input, left, right } = verdict {
            failures.push(format!(
                "{id} seed {seed}: {input:?}\n{:?}\nvs\n{:?}\n{}\n---\n{}",
                left,
                right,
                print(&p, PrintStyle::Beautified),
                print(&out, PrintStyle::Beautified)
            ));
        }
    }
    failures
}

#[test]
fn preserving_passes_agree_with_interpreter() {
    for id in TransformId::ALL {
        if !semantics_preserving(id) || id == TransformId::SW {
            continue;
        }
        let failures = check_pass(id, 60);
        assert!(failures.is_empty(), "{}", failures[0]);
    }
}

#[test]
fn print_roundtrip_over_random_programs() {
    for seed in 0..1000 {
        let p = random_program(seed);
        for style in [PrintStyle::Beautified, PrintStyle::Reformatted] {
            assert_eq!(parse(&print(&p, style)).unwrap(), p, "seed {seed} {style:?}");
        }
        let compact = parse(&print(&p, PrintStyle::Compact)).unwrap();
        assert!(structurally_equal(&compact, &p), "seed {seed} compact");
    }
}

#[test]
fn line_subsampling_can_diverge() {
    let diverged = (0..40).any(|seed| {
        let p = random_program(seed);
        let arity = entry_arity(&p).unwrap();
        let out = apply_transform(TransformId::LS, ProgramForm::Ast(p.clone()), &mut rng(seed))
            .unwrap()
            .into_ast()
            .unwrap();
        let inputs = random_inputs(arity, 10, seed);
        matches!(check_equivalence(&p, &out, &inputs, DEFAULT_STEP_LIMIT), Verdict::Diverged { .. })
    });
    assert!(diverged);
}
