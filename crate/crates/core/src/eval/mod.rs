//! Clone-detection probes, ROC/PR metrics, the adversarial transform
//! attack, held-out pair benchmarks and embedding export.

pub mod synth;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{sample_one, transform_dropout, variant_key, AugmentRequest, VariantRecord};
use crate::encoder::{forward, EncoderError, EncoderParams, Pooling};
use crate::seed;
use crate::syntax::{parse, LexError, SyntaxError};
use crate::tokenizer::{EncodeMode, Tokenizer};
use crate::transforms::{TransformId, TransformSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("vector has zero norm")]
    ZeroNorm,
    #[error("vectors differ in dimension")]
    DimensionMismatch,
    #[error("need at least one positive and one negative, got {positives} and {negatives}")]
    DegenerateLabels { positives: usize, negatives: usize },
    #[error("invalid attack config: {0}")]
    Config(String),
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, EvalError> {
    if u.len() != v.len() {
        return Err(EvalError::DimensionMismatch);
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(EvalError::ZeroNorm);
    }
    let c = u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / (nu * nv);
    Ok(c.clamp(-1.0, 1.0))
}

/// Similarity in `[0, 1]`: one minus the scaled token edit distance.
pub fn edit_distance_score(a: &str, b: &str) -> Result<f64, LexError> {
    Ok(1.0 - crate::augment::token_dissimilarity(a, b)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub score: f64,
    pub label: bool,
}

fn counts(pairs: &[ScoredPair]) -> (usize, usize) {
    let p = pairs.iter().filter(|s| s.label).count();
    (p, pairs.len() - p)
}

fn sorted_desc(pairs: &[ScoredPair]) -> Vec<ScoredPair> {
    let mut v = pairs.to_vec();
    v.sort_by(|a, b| b.score.total_cmp(&a.score));
    v
}

/// Runs of equal score in a descending-sorted list, as (positives, negatives).
fn tie_groups(sorted: &[ScoredPair]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for (i, s) in sorted.iter().enumerate() {
        if i == 0 || sorted[i - 1].score != s.score {
            out.push((0, 0));
        }
        let g = out.last_mut().unwrap();
        if s.label { g.0 += 1 } else { g.1 += 1 }
    }
    out
}

/// Area under the ROC curve with ties counted half, plus the Hanley-McNeil
/// standard error.
pub fn auroc(pairs: &[ScoredPair]) -> Result<(f64, f64), EvalError> {
    let (np, nn) = counts(pairs);
    if np == 0 || nn == 0 {
        return Err(EvalError::DegenerateLabels { positives: np, negatives: nn });
    }
    // Walking down the scores, each positive beats every negative below it.
    let mut negatives_above = 0usize;
    let mut twice_wins = 0u128;
    for (p, n) in tie_groups(&sorted_desc(pairs)) {
        let below = nn - negatives_above - n;
        twice_wins += p as u128 * (2 * below + n) as u128;
        negatives_above += n;
    }
    let a = twice_wins as f64 / (2.0 * np as f64 * nn as f64);
    Ok((a, hanley_mcneil_se(a, np, nn)))
}

pub fn hanley_mcneil_se(a: f64, np: usize, nn: usize) -> f64 {
    let q1 = a / (2.0 - a);
    let q2 = 2.0 * a * a / (1.0 + a);
    let (np, nn) = (np as f64, nn as f64);
    let var = (a * (1.0 - a) + (np - 1.0) * (q1 - a * a) + (nn - 1.0) * (q2 - a * a)) / (np * nn);
    var.max(0.0).sqrt()
}

/// Step-wise area under the precision-recall curve, one step per distinct
/// score.
pub fn average_precision(pairs: &[ScoredPair]) -> Result<f64, EvalError> {
    let (np, nn) = counts(pairs);
    if np == 0 {
        return Err(EvalError::DegenerateLabels { positives: np, negatives: nn });
    }
    let (mut tp, mut seen, mut ap) = (0usize, 0usize, 0.0);
    for (p, n) in tie_groups(&sorted_desc(pairs)) {
        tp += p;
        seen += p + n;
        if p > 0 {
            ap += (p as f64 / np as f64) * (tp as f64 / seen as f64);
        }
    }
    Ok(ap)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    Cosine,
    Edit,
    Random,
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScorerKind::Cosine => "cosine",
            ScorerKind::Edit => "edit",
            ScorerKind::Random => "random",
        })
    }
}

impl FromStr for ScorerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cosine" => Ok(ScorerKind::Cosine),
            "edit" => Ok(ScorerKind::Edit),
            "random" => Ok(ScorerKind::Random),
            _ => Err(format!("unknown scorer `{s}` (expected cosine, edit or random)")),
        }
    }
}

/// Anything that rates how clone-like two programs are; higher means more
/// alike.
pub enum Scorer<'a> {
    Embedding { params: &'a EncoderParams, tokenizer: &'a Tokenizer, pooling: Pooling },
    Edit,
}

impl Scorer<'_> {
    pub fn embed(&self, src: &str) -> Result<Vec<f64>, EvalError> {
        match self {
            Scorer::Embedding { params, tokenizer, pooling } => {
                let ids = tokenizer.encode(src, EncodeMode::Best);
                Ok(forward(params, &ids, *pooling, true)?.output)
            }
            Scorer::Edit => Err(EvalError::Config("edit scorer has no embedding".into())),
        }
    }

    pub fn score(&self, a: &str, b: &str) -> Result<f64, EvalError> {
        match self {
            Scorer::Edit => Ok(edit_distance_score(a, b)?),
            _ => cosine_similarity(&self.embed(a)?, &self.embed(b)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClonePair {
    pub a: String,
    pub b: String,
    /// 1 for clones, 0 otherwise.
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub samples: usize,
    pub specs: Vec<TransformSpec>,
    pub seed: u64,
}

impl AttackConfig {
    /// Compression and renaming passes, each at 0.5.
    pub fn new(samples: usize, seed: u64) -> Result<Self, EvalError> {
        use TransformId::*;
        let specs = [R, B, C, DCE, T, CF, VR, IM]
            .into_iter()
            .map(|id| TransformSpec { id, probability: 0.5 })
            .collect();
        Self::with_specs(samples, specs, seed)
    }

    pub fn with_specs(samples: usize, specs: Vec<TransformSpec>, seed: u64) -> Result<Self, EvalError> {
        if samples == 0 {
            return Err(EvalError::Config("attack needs at least one sample".into()));
        }
        if let Some(s) = specs.iter().find(|s| matches!(s.id, TransformId::LS | TransformId::DCI | TransformId::SW)) {
            return Err(EvalError::Config(format!("{:?} is not allowed in an attack", s.id)));
        }
        Ok(AttackConfig { samples, specs, seed })
    }
}

/// Replace `b` by the candidate that moves the score furthest: down when
/// `minimize`, up otherwise. The unmodified `b` is always a candidate, and
/// candidate `i` depends only on `seed` and `i`, so a larger budget never
/// does worse.
pub fn adversarial_attack(
    scorer: &Scorer,
    a: &str,
    b: &str,
    minimize: bool,
    atk: &AttackConfig,
    seed: u64,
) -> Result<(String, f64), EvalError> {
    let base = parse(b)?;
    let mut best = (b.to_string(), scorer.score(a, b)?);
    for i in 0..atk.samples {
        let mut rng = seed::rng(seed::derive_index(seed, "candidate", i as u64));
        let text = match sample_one(&base, &atk.specs, &mut rng) {
            Ok((text, _)) => text,
            Err(e) => {
                log::debug!("attack candidate {i} failed: {e}");
                continue;
            }
        };
        let s = scorer.score(a, &text)?;
        if (minimize && s < best.1) || (!minimize && s > best.1) {
            best = (text, s);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloneReport {
    pub schema_version: u32,
    pub scorer: ScorerKind,
    pub pooling: Pooling,
    /// Attack budget; 0 for unattacked pairs.
    pub attack_n: usize,
    pub auroc: f64,
    pub auroc_se: f64,
    pub ap: f64,
    pub pairs_used: usize,
    pub pairs_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub pair: usize,
    pub label: u8,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloneEval {
    pub report: CloneReport,
    pub scores: Vec<ScoreRow>,
}

/// Score every pair, optionally after attacking the `b` side of each clone
/// pair. Pairs that fail to parse, or whose label is not 0 or 1, are
/// skipped and counted.
pub fn clone_eval(
    scorer: &Scorer,
    kind: ScorerKind,
    pooling: Pooling,
    pairs: &[ClonePair],
    attack: Option<&AttackConfig>,
) -> Result<CloneEval, EvalError> {
    let rows: Vec<Option<ScoreRow>> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            if p.label > 1 || parse(&p.a).is_err() || parse(&p.b).is_err() {
                return Ok(None);
            }
            let score = match attack {
                Some(atk) if p.label == 1 => {
                    let s = seed::derive_index(atk.seed, "pair", i as u64);
                    adversarial_attack(scorer, &p.a, &p.b, true, atk, s)?.1
                }
                _ => scorer.score(&p.a, &p.b)?,
            };
            Ok(Some(ScoreRow { pair: i, label: p.label, score }))
        })
        .collect::<Result<_, EvalError>>()?;
    let skipped = rows.iter().filter(|r| r.is_none()).count();
    if skipped > 0 {
        log::warn!("skipped {skipped} pairs that failed to parse");
    }
    let scores: Vec<ScoreRow> = rows.into_iter().flatten().collect();
    let scored: Vec<ScoredPair> = scores.iter().map(|r| ScoredPair { score: r.score, label: r.label == 1 }).collect();
    let (auroc, auroc_se) = auroc(&scored)?;
    let report = CloneReport {
        schema_version: SCHEMA_VERSION,
        scorer: kind,
        pooling,
        attack_n: attack.map_or(0, |a| a.samples),
        auroc,
        auroc_se,
        ap: average_precision(&scored)?,
        pairs_used: scores.len(),
        pairs_skipped: skipped,
    };
    Ok(CloneEval { report, scores })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRow {
    pub id: String,
    pub variant: usize,
    pub embedding: Vec<f64>,
}

/// One row per member of every variant set, base first.
pub fn export_embeddings(
    params: &EncoderParams,
    tokenizer: &Tokenizer,
    corpus: &[VariantRecord],
    pooling: Pooling,
) -> Result<Vec<EmbeddingRow>, EvalError> {
    let scorer = Scorer::Embedding { params, tokenizer, pooling };
    let jobs: Vec<(&str, usize, &str)> = corpus
        .iter()
        .flat_map(|r| r.members().enumerate().map(move |(i, m)| (r.id.as_str(), i, m)))
        .collect();
    jobs.par_iter()
        .map(|&(id, variant, src)| Ok(EmbeddingRow { id: id.to_string(), variant, embedding: scorer.embed(src)? }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairConfig {
    /// Clone pairs drawn per base method; as many non-clone pairs follow.
    pub clones_per_base: usize,
    /// Dropout attempts when sampling fresh variants.
    pub attempts: usize,
    pub seed: u64,
}

impl Default for PairConfig {
    fn default() -> Self {
        PairConfig { clones_per_base: 2, attempts: 20, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub pairs: Vec<ClonePair>,
    /// Bases with fewer than two unseen variants.
    pub bases_without_clones: usize,
}

/// Build a balanced clone benchmark from variants that do not occur in the
/// augmented training corpus. A clone pair holds two distinct unseen
/// variants of one base; each is followed by a non-clone pair matching an
/// unseen variant of the same base with one of a different base.
pub fn make_pairs(corpus: &[VariantRecord], cfg: &PairConfig) -> Result<Benchmark, EvalError> {
    if cfg.attempts < 2 {
        return Err(EvalError::Config("need at least two attempts per base".into()));
    }
    let salt = seed::derive_str(cfg.seed, "heldout");
    let unseen: Vec<Vec<String>> = corpus
        .par_iter()
        .map(|rec| {
            let seen: HashSet<String> = rec.members().filter_map(|m| variant_key(m).ok()).collect();
            let req = AugmentRequest::with_defaults(cfg.attempts, seed::derive_str(salt, &rec.id))
                .expect("attempts checked above");
            let fresh = transform_dropout(&rec.source, &req)?;
            Ok(fresh
                .variants
                .into_iter()
                .filter(|v| variant_key(v).is_ok_and(|k| !seen.contains(&k)))
                .collect())
        })
        .collect::<Result<_, EvalError>>()?;

    let mut rng = seed::rng(seed::derive_str(cfg.seed, "pairs"));
    let donors: Vec<usize> = (0..corpus.len()).filter(|&j| !unseen[j].is_empty()).collect();
    let mut pairs = Vec::new();
    let mut bases_without_clones = 0;
    for (i, pool) in unseen.iter().enumerate() {
        if pool.len() < 2 {
            bases_without_clones += 1;
            continue;
        }
        let others: Vec<usize> = donors.iter().copied().filter(|&j| j != i).collect();
        for _ in 0..cfg.clones_per_base {
            let two: Vec<&String> = pool.choose_multiple(&mut rng, 2).collect();
            pairs.push(ClonePair { a: two[0].clone(), b: two[1].clone(), label: 1 });
            if let Some(&j) = others.choose(&mut rng) {
                let mine = &pool[rng.gen_range(0..pool.len())];
                let theirs = &unseen[j][rng.gen_range(0..unseen[j].len())];
                pairs.push(ClonePair { a: mine.clone(), b: theirs.clone(), label: 0 });
            }
        }
    }
    Ok(Benchmark { pairs, bases_without_clones })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(pos: &[f64], neg: &[f64]) -> Vec<ScoredPair> {
        pos.iter()
            .map(|&score| ScoredPair { score, label: true })
            .chain(neg.iter().map(|&score| ScoredPair { score, label: false }))
            .collect()
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[2.0, 3.0], &[2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine_similarity(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(matches!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]), Err(EvalError::ZeroNorm)));
        assert!(matches!(cosine_similarity(&[1.0], &[1.0, 0.0]), Err(EvalError::DimensionMismatch)));
    }

    #[test]
    fn edit_score_examples() {
        assert_eq!(edit_distance_score("x = f(1);", "x = f(1);").unwrap(), 1.0);
        assert!((edit_distance_score("a b c", "a x c").unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(edit_distance_score("a b c", "d e f").unwrap(), 0.0);
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&sp(&[0.9, 0.8], &[0.7, 0.1])).unwrap().0, 1.0);
        assert_eq!(auroc(&sp(&[0.9, 0.4], &[0.6, 0.1])).unwrap().0, 0.75);
        assert_eq!(auroc(&sp(&[0.5, 0.5], &[0.5])).unwrap().0, 0.5);
        assert!(matches!(auroc(&sp(&[0.5], &[])), Err(EvalError::DegenerateLabels { .. })));
    }

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision(&sp(&[0.9, 0.8], &[0.7, 0.1])).unwrap(), 1.0);
        let alt = sp(&[4.0, 2.0], &[3.0, 1.0]);
        assert!((average_precision(&alt).unwrap() - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-15);
        assert_eq!(average_precision(&sp(&[0.1], &[0.2, 0.3, 0.4])).unwrap(), 0.25);
    }

    #[test]
    fn attack_with_zero_probabilities_is_identity() {
        let specs = vec![TransformSpec { id: TransformId::IM, probability: 0.0 }];
        let atk = AttackConfig::with_specs(1, specs, 0).unwrap();
        let src = "function f(a) { return a + 1; }";
        let (b, s) = adversarial_attack(&Scorer::Edit, src, src, true, &atk, 3).unwrap();
        assert_eq!((b.as_str(), s), (src, 1.0));
        assert!(AttackConfig::with_specs(1, vec![TransformSpec { id: TransformId::LS, probability: 0.5 }], 0).is_err());
        assert!(AttackConfig::new(0, 0).is_err());
    }
}
