//! Transform dropout, variant deduplication, corpus augmentation and the
//! diversity and dissimilarity statistics computed over augmented corpora.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::syntax::lexer::{lex_code, unescape_string};
use crate::syntax::printer::quote_string;
use crate::syntax::{parse, print, LexError, PrintStyle, Program, SyntaxError, TokenKind};
use crate::transforms::{apply_transform, ProgramForm, TransformError, TransformId, TransformSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentRequest {
    pub specs: Vec<TransformSpec>,
    pub count: usize,
    pub seed: u64,
}

impl AugmentRequest {
    pub fn new(specs: Vec<TransformSpec>, count: usize, seed: u64) -> Result<Self, AugmentError> {
        if count == 0 {
            return Err(AugmentError::Config("variant count must be at least 1".into()));
        }
        Ok(AugmentRequest { specs, count, seed })
    }

    /// Default pipeline with `count` attempts.
    pub fn with_defaults(count: usize, seed: u64) -> Result<Self, AugmentError> {
        Self::new(default_specs(), count, seed)
    }
}

/// CF, DCE, T, VR, IM, DCI, LS, C, B, R; each fires with probability 0.5,
/// line subsampling with 0.25.
pub fn default_specs() -> Vec<TransformSpec> {
    use TransformId::*;
    [CF, DCE, T, VR, IM, DCI, LS, C, B, R]
        .into_iter()
        .map(|id| TransformSpec { id, probability: if id == LS { 0.25 } else { 0.5 } })
        .collect()
}

/// Deduplicated variants of one program. `variants[0]` is the base.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariantSet {
    pub variants: Vec<String>,
}

impl VariantSet {
    pub fn base(&self) -> &str {
        &self.variants[0]
    }

    pub fn len(&self) -> usize {
        self.variants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variants.is_empty()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AugmentError {
    #[error("invalid request: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: malformed record: {source}")]
    Record {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> AugmentError + '_ {
    move |source| AugmentError::Io { path: path.display().to_string(), source }
}

/// Dedup key: the compact print, which ignores comments, layout and
/// redundant braces.
fn dedup_key(program: &Program) -> String {
    print(program, PrintStyle::Compact)
}

/// One stochastic sample: run the passes in order, each with its own coin.
fn sample_variant<R: Rng>(base: &Program, specs: &[TransformSpec], rng: &mut R) -> ProgramForm {
    let mut form = ProgramForm::Ast(base.clone());
    for spec in specs {
        if !rng.gen_bool(spec.probability) {
            continue;
        }
        let before = form.clone();
        form = match apply_transform(spec.id, form, rng) {
            Ok(next) => next,
            Err(e) => {
                log::debug!("skipping pass: {e}");
                before
            }
        };
    }
    form
}

/// Lower a sampled form to text plus its dedup key.
fn lower(form: ProgramForm) -> Result<(String, String), TransformError> {
    match form {
        ProgramForm::Ast(p) => Ok((print(&p, PrintStyle::Beautified), dedup_key(&p))),
        ProgramForm::Source(s) => {
            let p = parse(&s)
                .map_err(|source| TransformError::Syntax { id: TransformId::C, source })?;
            let key = dedup_key(&p);
            Ok((s, key))
        }
    }
}

/// One dropout sample of `base` as (text, dedup key).
pub fn sample_one<R: Rng>(base: &Program, specs: &[TransformSpec], rng: &mut R) -> Result<(String, String), TransformError> {
    lower(sample_variant(base, specs, rng))
}

/// Dedup key of source text.
pub fn variant_key(src: &str) -> Result<String, SyntaxError> {
    Ok(dedup_key(&parse(src)?))
}

/// Draw `count - 1` samples and keep the distinct ones after the base.
pub fn transform_dropout(x: &str, req: &AugmentRequest) -> Result<VariantSet, SyntaxError> {
    let base = parse(x)?;
    let mut rng = seed::rng(req.seed);
    let mut seen = HashSet::from([dedup_key(&base)]);
    let mut variants = vec![x.to_string()];
    for _ in 1..req.count {
        let form = sample_variant(&base, &req.specs, &mut rng);
        match lower(form) {
            Ok((text, key)) => {
                if seen.insert(key) {
                    variants.push(text);
                }
            }
            Err(e) => log::warn!("dropping unparsable variant: {e}"),
        }
    }
    Ok(VariantSet { variants })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub id: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantRecord {
    pub id: String,
    pub source: String,
    /// Non-base variants; absent in plain method corpora.
    #[serde(default)]
    pub variants: Vec<String>,
}

impl VariantRecord {
    pub fn set_size(&self) -> usize {
        1 + self.variants.len()
    }

    /// Base followed by the variants.
    pub fn members(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.source.as_str()).chain(self.variants.iter().map(String::as_str))
    }

    pub fn member(&self, i: usize) -> &str {
        if i == 0 {
            &self.source
        } else {
            &self.variants[i - 1]
        }
    }
}

/// Per-method seed: independent of position in the corpus and worker count.
pub fn method_seed(global: u64, id: &str) -> u64 {
    seed::derive_str(global, id)
}

pub fn augment_record(record: &MethodRecord, req: &AugmentRequest) -> Result<VariantRecord, SyntaxError> {
    let per = AugmentRequest { seed: method_seed(req.seed, &record.id), ..req.clone() };
    let mut set = transform_dropout(&record.source, &per)?;
    let variants = set.variants.split_off(1);
    Ok(VariantRecord { id: record.id.clone(), source: record.source.clone(), variants })
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, AugmentError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|source| AugmentError::Record {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), AugmentError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).expect("records serialize");
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Map |V| to the number of methods with that many variants.
pub fn histogram(sizes: impl IntoIterator<Item = usize>) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for s in sizes {
        *h.entry(s).or_insert(0) += 1;
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentSummary {
    pub methods: usize,
    pub parse_failures: usize,
    pub failed_ids: Vec<String>,
    pub histogram: BTreeMap<usize, usize>,
    pub elapsed_secs: f64,
    pub throughput_methods_per_sec: f64,
}

/// Augment every record in memory on a pool of `jobs` threads. Output order
/// follows input order; failed records are dropped and listed.
pub fn augment_records(
    records: &[MethodRecord],
    req: &AugmentRequest,
    jobs: usize,
) -> Result<(Vec<VariantRecord>, AugmentSummary), AugmentError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| AugmentError::Config(e.to_string()))?;
    let start = Instant::now();
    let results: Vec<Result<VariantRecord, SyntaxError>> =
        pool.install(|| records.par_iter().map(|r| augment_record(r, req)).collect());
    let elapsed = start.elapsed().as_secs_f64();
    let mut out = Vec::with_capacity(records.len());
    let mut failed_ids = Vec::new();
    for (rec, res) in records.iter().zip(results) {
        match res {
            Ok(v) => out.push(v),
            Err(e) => {
                log::warn!("{}: {e}", rec.id);
                failed_ids.push(rec.id.clone());
            }
        }
    }
    let summary = AugmentSummary {
        methods: out.len(),
        parse_failures: failed_ids.len(),
        failed_ids,
        histogram: histogram(out.iter().map(VariantRecord::set_size)),
        elapsed_secs: elapsed,
        throughput_methods_per_sec: if elapsed > 0.0 { records.len() as f64 / elapsed } else { 0.0 },
    };
    Ok((out, summary))
}

/// Read `{"id","source"}` JSONL, write `{"id","source","variants"}` JSONL.
pub fn augment_corpus(
    in_path: &Path,
    out_path: &Path,
    req: &AugmentRequest,
    jobs: usize,
) -> Result<AugmentSummary, AugmentError> {
    let records: Vec<MethodRecord> = read_jsonl(in_path)?;
    let (out, summary) = augment_records(&records, req, jobs)?;
    write_jsonl(out_path, &out)?;
    Ok(summary)
}

/// Comment-free token stream with string literals requoted, so quoting
/// style does not count as a difference.
pub fn normalized_tokens(src: &str) -> Result<Vec<String>, LexError> {
    Ok(lex_code(src)?
        .into_iter()
        .map(|t| match t.kind {
            TokenKind::String => quote_string(&unescape_string(&t.lexeme)),
            _ => t.lexeme,
        })
        .collect())
}

/// Token-level edit distance divided by the longer stream's length.
pub fn token_dissimilarity(a: &str, b: &str) -> Result<f64, LexError> {
    Ok(stream_dissimilarity(&normalized_tokens(a)?, &normalized_tokens(b)?))
}

pub fn stream_dissimilarity<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 0.0;
    }
    levenshtein(a, b) as f64 / longest as f64
}

/// Minimum insertions, deletions and substitutions turning `a` into `b`.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub count: usize,
    pub mean: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
}

/// Percentile by linear interpolation between order statistics.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Quartiles {
    /// None for an empty sample.
    pub fn of(values: &[f64]) -> Option<Quartiles> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Quartiles {
            count: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            p25: percentile(&v, 0.25),
            p50: percentile(&v, 0.5),
            p75: percentile(&v, 0.75),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub histogram: BTreeMap<usize, usize>,
    /// `None` when no method has a second variant.
    pub positives: Option<Quartiles>,
    pub negatives: Option<Quartiles>,
    pub throughput_methods_per_sec: Option<f64>,
    #[serde(skip)]
    pub positive_samples: Vec<f64>,
    #[serde(skip)]
    pub negative_samples: Vec<f64>,
}

impl CorpusStats {
    /// Share of methods with more than one variant.
    pub fn diverse_fraction(&self) -> f64 {
        let total: usize = self.histogram.values().sum();
        let single = self.histogram.get(&1).copied().unwrap_or(0);
        if total == 0 {
            0.0
        } else {
            (total - single) as f64 / total as f64
        }
    }
}

/// One positive pair per method with two or more variants, and as many
/// negative pairs drawn across different methods (one per method when no
/// positives exist). Unlexable members score as fully dissimilar.
pub fn dissimilarity_stats(corpus: &[VariantRecord], sample_seed: u64) -> CorpusStats {
    let mut rng = seed::rng(sample_seed);
    let mut positives = Vec::new();
    for rec in corpus {
        if rec.set_size() >= 2 {
            let idx: Vec<usize> = (0..rec.set_size()).collect();
            let pick: Vec<usize> = idx.choose_multiple(&mut rng, 2).copied().collect();
            positives.push((rec.member(pick[0]), rec.member(pick[1])));
        }
    }
    let n_neg = if positives.is_empty() { corpus.len() } else { positives.len() };
    let mut negatives = Vec::new();
    if corpus.len() >= 2 {
        for _ in 0..n_neg {
            let i = rng.gen_range(0..corpus.len());
            let mut j = rng.gen_range(0..corpus.len() - 1);
            if j >= i {
                j += 1;
            }
            let a = corpus[i].member(rng.gen_range(0..corpus[i].set_size()));
            let b = corpus[j].member(rng.gen_range(0..corpus[j].set_size()));
            negatives.push((a, b));
        }
    }
    let score = |pairs: &[(&str, &str)]| -> Vec<f64> {
        pairs
            .par_iter()
            .map(|(a, b)| token_dissimilarity(a, b).unwrap_or(1.0))
            .collect()
    };
    let positive_samples = score(&positives);
    let negative_samples = score(&negatives);
    CorpusStats {
        histogram: histogram(corpus.iter().map(VariantRecord::set_size)),
        positives: Quartiles::of(&positive_samples),
        negatives: Quartiles::of(&negative_samples),
        throughput_methods_per_sec: None,
        positive_samples,
        negative_samples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::TransformId;

    const MERGE_SORT: &str = include_str!("../../tests/fixtures/merge_sort.js");

    fn req(specs: Vec<TransformSpec>, count: usize) -> AugmentRequest {
        AugmentRequest::new(specs, count, 11).unwrap()
    }

    #[test]
    fn nothing_fires_or_nothing_sampled() {
        let zero: Vec<_> = default_specs()
            .into_iter()
            .map(|s| TransformSpec { probability: 0.0, ..s })
            .collect();
        let src = "function f(a){ return a + 1; }";
        assert_eq!(transform_dropout(src, &req(zero, 5)).unwrap().variants, vec![src]);
        assert_eq!(transform_dropout(src, &req(default_specs(), 1)).unwrap().variants, vec![src]);
        assert!(AugmentRequest::new(default_specs(), 0, 1).is_err());
    }

    #[test]
    fn merge_sort_mangled_and_compressed() {
        let specs = vec![
            TransformSpec::new(TransformId::IM, 1.0).unwrap(),
            TransformSpec::new(TransformId::C, 1.0).unwrap(),
        ];
        let set = transform_dropout(MERGE_SORT, &req(specs, 2)).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.base(), MERGE_SORT);
        let expected = "function mergeSort(e){if(1===e.length)return e;const t=Math.floor(e.length/2),\
                        r=e.slice(0,t),n=e.slice(t);return merge(mergeSort(r),mergeSort(n));}";
        assert_eq!(
            normalized_tokens(&set.variants[1]).unwrap(),
            normalized_tokens(expected).unwrap()
        );
    }

    #[test]
    fn dropout_is_seeded_and_deduplicated() {
        let r = req(default_specs(), 20);
        let a = transform_dropout(MERGE_SORT, &r).unwrap();
        assert_eq!(a, transform_dropout(MERGE_SORT, &r).unwrap());
        assert!(a.len() > 1 && a.len() <= 20);
        for i in 0..a.len() {
            for j in 0..i {
                assert!(token_dissimilarity(&a.variants[i], &a.variants[j]).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn parse_errors_propagate() {
        assert!(transform_dropout("function (", &req(default_specs(), 3)).is_err());
    }

    #[test]
    fn dissimilarity_values() {
        assert_eq!(token_dissimilarity("a b c", "a b c").unwrap(), 0.0);
        assert!((token_dissimilarity("a b c", "a x c").unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(token_dissimilarity("a b", "c d").unwrap(), 1.0);
        assert_eq!(token_dissimilarity("'s' // c", "\"s\"").unwrap(), 0.0);
        assert_eq!(token_dissimilarity("", "").unwrap(), 0.0);
        assert!(token_dissimilarity("\"open", "x").is_err());
    }

    #[test]
    fn quartiles_interpolate() {
        let q = Quartiles::of(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((q.mean, q.p25, q.p50, q.p75), (2.5, 1.75, 2.5, 3.25));
        assert!(Quartiles::of(&[]).is_none());
    }

    #[test]
    fn stats_flag_missing_positives() {
        let corpus: Vec<VariantRecord> = (0..3)
            .map(|i| VariantRecord { id: i.to_string(), source: format!("x = {i};"), variants: vec![] })
            .collect();
        let stats = dissimilarity_stats(&corpus, 0);
        assert!(stats.positives.is_none());
        assert_eq!(stats.negatives.unwrap().count, 3);
        assert_eq!(stats.histogram, BTreeMap::from([(1, 3)]));
        assert_eq!(stats.diverse_fraction(), 0.0);
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let records: Vec<MethodRecord> = (0..12)
            .map(|i| MethodRecord {
                id: format!("m{i}"),
                source: print(&crate::syntax::random::random_program(i), PrintStyle::Beautified),
            })
            .collect();
        let r = req(default_specs(), 6);
        let (one, s1) = augment_records(&records, &r, 1).unwrap();
        let (many, s8) = augment_records(&records, &r, 8).unwrap();
        assert_eq!(one, many);
        assert_eq!(s1.histogram, s8.histogram);
        assert_eq!(s1.histogram.values().sum::<usize>(), 12);
    }
}
