use std::fs;
use std::path::Path;

use equivar::augment::{augment_records, AugmentRequest, MethodRecord, VariantRecord};
use equivar::cli::main_with_args;
use equivar::contrastive::{pretrain, TrainConfig, TrainError, TrainState};
use equivar::encoder::checkpoint::Container;
use equivar::encoder::{init_params, load_encoder, Pooling};
use equivar::eval::synth::generate_synthetic_corpus;
use equivar::eval::{
    adversarial_attack, clone_eval, cosine_similarity, export_embeddings, make_pairs, AttackConfig, PairConfig,
    Scorer, ScorerKind,
};
use equivar::interp::{check_equivalence, entry_arity, random_inputs, Verdict, DEFAULT_STEP_LIMIT};
use equivar::syntax::parse;
use equivar::tokenizer::{train_vocab, Tokenizer, VocabConfig};
use equivar::transforms::{TransformId, TransformSpec};

fn corpus(n: usize) -> Vec<VariantRecord> {
    let methods: Vec<MethodRecord> = generate_synthetic_corpus(n, 2)
        .into_iter()
        .map(|m| MethodRecord { id: m.id, source: m.source })
        .collect();
    augment_records(&methods, &AugmentRequest::with_defaults(10, 1).unwrap(), 1).unwrap().0
}

fn tokenizer(c: &[VariantRecord]) -> Tokenizer {
    let texts: Vec<&str> = c.iter().flat_map(|r| r.members()).collect();
    Tokenizer::new(train_vocab(&texts, &VocabConfig { size: 600, ..VocabConfig::default() }).unwrap())
}

fn small_cfg(steps: u64) -> TrainConfig {
    TrainConfig {
        steps,
        batch_size: 8,
        queue_capacity: 32,
        queue_refill: 4,
        d_tok: 32,
        d_hid: 32,
        d_out: 16,
        checkpoint_every: 0,
        seed: 9,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_steps_checkpoint_is_the_initialization() {
    let c = corpus(10);
    let tok = tokenizer(&c);
    let cfg = small_cfg(0);
    let dir = tempfile::tempdir().unwrap();
    let out = pretrain(&c, &tok, &cfg, dir.path(), false).unwrap();
    assert!(out.reports.is_empty());
    let (state, _) = TrainState::from_container(&Container::load(&out.checkpoint).unwrap()).unwrap();
    assert_eq!(state, TrainState::new(cfg.dims(tok.vocab().len()), &cfg));
}

#[test]
fn resumed_training_matches_an_uninterrupted_run() {
    let c = corpus(12);
    let tok = tokenizer(&c);
    let straight = tempfile::tempdir().unwrap();
    let full = pretrain(&c, &tok, &small_cfg(8), straight.path(), false).unwrap();
    let split = tempfile::tempdir().unwrap();
    pretrain(&c, &tok, &small_cfg(5), split.path(), false).unwrap();
    let rest = pretrain(&c, &tok, &small_cfg(8), split.path(), true).unwrap();
    assert_eq!(rest.reports, full.reports[5..]);
    let read = |d: &Path, n: &str| fs::read(d.join(n)).unwrap();
    assert_eq!(read(straight.path(), "last.ckpt"), read(split.path(), "last.ckpt"));
    assert_eq!(read(straight.path(), "metrics.jsonl"), read(split.path(), "metrics.jsonl"));
}

#[test]
fn pretraining_needs_a_variant_pair() {
    let c: Vec<VariantRecord> = corpus(3).into_iter().map(|r| VariantRecord { variants: vec![], ..r }).collect();
    let tok = tokenizer(&c);
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(pretrain(&c, &tok, &small_cfg(2), dir.path(), false), Err(TrainError::Data(_))));
}

#[test]
fn trained_embeddings_cluster_by_base() {
    let c = corpus(24);
    let tok = tokenizer(&c);
    let dir = tempfile::tempdir().unwrap();
    let out = pretrain(&c, &tok, &small_cfg(300), dir.path(), false).unwrap();
    let params = load_encoder(&out.checkpoint).unwrap();
    let rows = export_embeddings(&params, &tok, &c, Pooling::Max).unwrap();
    assert_eq!(rows.len(), c.iter().map(VariantRecord::set_size).sum::<usize>());
    assert!(export_embeddings(&params, &tok, &[], Pooling::Max).unwrap().is_empty());
    let (mut intra, mut inter) = ((0.0, 0), (0.0, 0));
    for (i, a) in rows.iter().enumerate() {
        for b in &rows[i + 1..] {
            let s = cosine_similarity(&a.embedding, &b.embedding).unwrap();
            let acc = if a.id == b.id { &mut intra } else { &mut inter };
            acc.0 += s;
            acc.1 += 1;
        }
    }
    let (intra, inter) = (intra.0 / intra.1 as f64, inter.0 / inter.1 as f64);
    assert!(intra > inter, "intra {intra} inter {inter}");
}

const CLONE: &str = "function sum(xs) {\n  let total = 0;\n  for (let i = 0; i < xs.length; i++) {\n    total += xs[i];\n  }\n  return total;\n}\n";

#[test]
fn attacks_preserve_semantics_and_only_get_stronger() {
    let p = parse(CLONE).unwrap();
    let inputs = random_inputs(entry_arity(&p).unwrap(), 10, 4);
    let scorer = Scorer::Edit;
    for seed in 0..10 {
        let s4 = adversarial_attack(&scorer, CLONE, CLONE, true, &AttackConfig::new(4, 0).unwrap(), seed).unwrap();
        let s16 = adversarial_attack(&scorer, CLONE, CLONE, true, &AttackConfig::new(16, 0).unwrap(), seed).unwrap();
        assert!(s16.1 <= s4.1);
        for attacked in [&s4.0, &s16.0] {
            let q = parse(attacked).unwrap();
            assert_eq!(check_equivalence(&p, &q, &inputs, DEFAULT_STEP_LIMIT), Verdict::Equivalent);
        }
    }
    let specs = [TransformId::IM, TransformId::C].map(|id| TransformSpec { id, probability: 1.0 }).to_vec();
    let atk = AttackConfig::with_specs(4, specs, 0).unwrap();
    let (_, score) = adversarial_attack(&scorer, CLONE, CLONE, true, &atk, 1).unwrap();
    assert!(score < 1.0);
}

#[test]
fn benchmark_is_balanced_and_unseen() {
    let c = corpus(20);
    let bench = make_pairs(&c, &PairConfig::default()).unwrap();
    let clones = bench.pairs.iter().filter(|p| p.label == 1).count();
    assert_eq!(clones * 2, bench.pairs.len());
    let seen: std::collections::HashSet<&str> = c.iter().flat_map(|r| r.members()).collect();
    assert!(bench.pairs.iter().all(|p| !seen.contains(p.a.as_str()) && !seen.contains(p.b.as_str())));
    let exact: Vec<_> = bench
        .pairs
        .iter()
        .map(|p| equivar::eval::ClonePair { b: if p.label == 1 { p.a.clone() } else { p.b.clone() }, ..p.clone() })
        .collect();
    let r = clone_eval(&Scorer::Edit, ScorerKind::Edit, Pooling::Max, &exact, None).unwrap();
    assert_eq!(r.report.auroc, 1.0);
    let tok = tokenizer(&c);
    let params = init_params(small_cfg(0).dims(tok.vocab().len()), 1);
    let scorer = Scorer::Embedding { params: &params, tokenizer: &tok, pooling: Pooling::Max };
    for p in bench.pairs.iter().take(5) {
        assert!((scorer.score(&p.a, &p.a).unwrap() - 1.0).abs() < 1e-12);
    }
}

fn cli(args: &[&str]) -> u8 {
    main_with_args(std::iter::once("equivar").chain(args.iter().copied()))
}

#[test]
fn cli_contract() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    assert_eq!(cli(&["gen", "--count", "10", "--seed", "1", "--out", &p("a.jsonl")]), 0);
    assert_eq!(cli(&["gen", "--count", "10", "--seed", "1", "--out", &p("b.jsonl")]), 0);
    assert_eq!(fs::read(p("a.jsonl")).unwrap(), fs::read(p("b.jsonl")).unwrap());
    for line in fs::read_to_string(p("a.jsonl")).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["id"].is_string() && v["source"].is_string() && v["family"].is_string());
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(p("a.jsonl.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["seed"], 1);

    assert_eq!(cli(&["gen", "--count", "0", "--out", &p("c.jsonl")]), 2);
    assert_eq!(cli(&["augment", "--in", &p("missing.jsonl"), "--out", &p("x.jsonl")]), 2);
    fs::write(p("bad.toml"), "[train]\ntemperature = -1.0\n").unwrap();
    assert_eq!(cli(&["--config", &p("bad.toml"), "gen", "--count", "1", "--out", &p("d.jsonl")]), 0);
    assert_eq!(
        cli(&["--config", &p("bad.toml"), "pretrain", "--in", &p("a.jsonl"), "--vocab", &p("v.txt"), "--out-dir", &p("ck")]),
        2
    );
    fs::write(p("v.txt"), "not a vocabulary\n").unwrap();
    assert_eq!(cli(&["pretrain", "--in", &p("a.jsonl"), "--vocab", &p("v.txt"), "--out-dir", &p("ck")]), 1);

    assert_eq!(cli(&["augment", "--in", &p("a.jsonl"), "--out", &p("aug.jsonl"), "--n", "6"]), 0);
    assert_eq!(cli(&["make-pairs", "--in", &p("aug.jsonl"), "--out", &p("pairs.jsonl")]), 0);
    assert_eq!(
        cli(&["eval-clones", "--pairs", &p("pairs.jsonl"), "--scorer", "edit", "--attack-n", "4", "--out", &p("r.json")]),
        0
    );
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(p("r.json")).unwrap()).unwrap();
    assert_eq!(report["attack_n"], 4);
    assert_eq!(report["scorer"], "edit");
    assert!(report["auroc"].as_f64().unwrap() <= 1.0);
    assert_eq!(cli(&["eval-clones", "--pairs", &p("pairs.jsonl"), "--scorer", "cosine"]), 2);
}
