//! Unigram-LM subword tokenizer with deterministic (Viterbi) and sampled
//! segmentation. Text is split on whitespace; each word carries a leading
//! `▁` marker, so decoding restores single-space separated text.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::sync::{Arc, RwLock};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const BOS: u32 = 2;
pub const EOS: u32 = 3;
pub const RESERVED: usize = 4;
const RESERVED_PIECES: [&str; RESERVED] = ["<pad>", "<unk>", "<s>", "</s>"];

pub const MARKER: char = '\u{2581}';
const FORMAT_HEADER: &str = "#equivar-unigram-vocab 1";

pub type TokenIds = Vec<u32>;

#[derive(Debug, thiserror::Error)]
pub enum VocabError {
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error("vocabulary size {requested} is below the {required} needed for the alphabet and reserved ids")]
    TooSmall { requested: usize, required: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("vocabulary file line {line}: {msg}")]
    Format { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecodeError {
    #[error("token id {id} outside vocabulary of size {size}")]
    OutOfRange { id: u32, size: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum EncodeMode {
    Best,
    Sample { alpha: f64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VocabConfig {
    pub size: usize,
    pub max_piece_len: usize,
    /// Candidate pieces kept before EM, as a multiple of `size`.
    pub seed_factor: usize,
    pub em_iterations: usize,
    /// Fraction of pieces kept per pruning round.
    pub shrink: f64,
}

impl Default for VocabConfig {
    fn default() -> Self {
        VocabConfig { size: 8000, max_piece_len: 16, seed_factor: 4, em_iterations: 2, shrink: 0.75 }
    }
}

/// Collapse whitespace runs to single spaces and trim.
pub fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().map(|w| format!("{MARKER}{w}"))
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

/// Pieces never mix identifier characters with punctuation; the marker
/// attaches to either.
fn uniform_class(chars: &[char]) -> bool {
    let body = if chars.first() == Some(&MARKER) { &chars[1..] } else { chars };
    body.iter().all(|&c| is_word_char(c)) || body.iter().all(|&c| !is_word_char(c) && c != MARKER)
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubwordVocab {
    /// Piece text and log-probability; the first `RESERVED` are special.
    pieces: Vec<(String, f64)>,
    index: HashMap<String, u32>,
    max_len: usize,
    unk_logp: f64,
}

impl SubwordVocab {
    fn from_pieces(pieces: Vec<(String, f64)>) -> Self {
        let index = pieces
            .iter()
            .enumerate()
            .skip(RESERVED)
            .map(|(i, (p, _))| (p.clone(), i as u32))
            .collect();
        let max_len = pieces.iter().skip(RESERVED).map(|(p, _)| p.chars().count()).max().unwrap_or(1);
        let min = pieces.iter().skip(RESERVED).map(|p| p.1).fold(0.0, f64::min);
        SubwordVocab { pieces, index, max_len, unk_logp: min - 10.0 }
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn piece(&self, id: u32) -> Option<&str> {
        self.pieces.get(id as usize).map(|p| p.0.as_str())
    }

    pub fn log_prob(&self, id: u32) -> Option<f64> {
        self.pieces.get(id as usize).map(|p| p.1)
    }

    pub fn id(&self, piece: &str) -> Option<u32> {
        self.index.get(piece).copied()
    }

    /// Candidate pieces ending at each char position of `word`:
    /// `ends[j]` holds `(start, id, logp)`.
    fn lattice(&self, chars: &[char]) -> Vec<Vec<(usize, u32, f64)>> {
        let mut ends = vec![Vec::new(); chars.len() + 1];
        let mut buf = String::new();
        for i in 0..chars.len() {
            buf.clear();
            let mut covered = false;
            for j in i..chars.len().min(i + self.max_len) {
                buf.push(chars[j]);
                if let Some(&id) = self.index.get(buf.as_str()) {
                    ends[j + 1].push((i, id, self.pieces[id as usize].1));
                    covered |= j == i;
                }
            }
            if !covered {
                ends[i + 1].push((i, UNK, self.unk_logp));
            }
        }
        ends
    }

    /// Up to `k` highest-scoring segmentations of one marked word, best
    /// first, with their log-probabilities.
    pub fn nbest(&self, word: &str, k: usize) -> Vec<(TokenIds, f64)> {
        let chars: Vec<char> = word.chars().collect();
        let ends = self.lattice(&chars);
        // best[j]: (score, start, rank in best[start], id), sorted descending.
        let mut best: Vec<Vec<(f64, usize, usize, u32)>> = vec![Vec::new(); chars.len() + 1];
        best[0].push((0.0, 0, 0, PAD));
        for j in 1..=chars.len() {
            let mut cands = Vec::new();
            for &(i, id, lp) in &ends[j] {
                for (rank, e) in best[i].iter().enumerate() {
                    cands.push((e.0 + lp, i, rank, id));
                }
            }
            cands.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.3).cmp(&(b.1, b.3))));
            cands.truncate(k.max(1));
            best[j] = cands;
        }
        best[chars.len()]
            .iter()
            .map(|&(score, start, rank, id)| {
                let mut ids = vec![id];
                let (mut pos, mut r) = (start, rank);
                while pos > 0 {
                    let e = best[pos][r];
                    ids.push(e.3);
                    pos = e.1;
                    r = e.2;
                }
                ids.reverse();
                (ids, score)
            })
            .collect()
    }

    fn viterbi(&self, word: &str) -> TokenIds {
        self.nbest(word, 1).swap_remove(0).0
    }

    /// Uncached encoding. Sampling draws each word's segmentation from its
    /// 64-best list with weights `P(seg)^alpha`.
    pub fn encode(&self, text: &str, mode: EncodeMode) -> TokenIds {
        let mut rng = match mode {
            EncodeMode::Sample { seed, .. } => Some(crate::seed::rng(seed)),
            EncodeMode::Best => None,
        };
        let mut out = vec![BOS];
        for w in words(text) {
            match (mode, rng.as_mut()) {
                (EncodeMode::Sample { alpha, .. }, Some(r)) => {
                    out.extend(sample_from(&self.nbest(&w, NBEST), alpha, r))
                }
                _ => out.extend(self.viterbi(&w)),
            }
        }
        out.push(EOS);
        out
    }

    pub fn decode(&self, ids: &[u32]) -> Result<String, DecodeError> {
        let mut s = String::new();
        for &id in ids {
            match id {
                PAD | BOS | EOS => {}
                UNK => s.push('\u{fffd}'),
                _ => s.push_str(self.piece(id).ok_or(DecodeError::OutOfRange { id, size: self.len() })?),
            }
        }
        let text = s.replace(MARKER, " ");
        Ok(text.strip_prefix(' ').unwrap_or(&text).to_string())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{FORMAT_HEADER}\n#size {}\n", self.len());
        out.push_str("#reserved pad=0 unk=1 bos=2 eos=3\n");
        for (p, lp) in &self.pieces {
            out.push_str(&format!("{p}\t{lp:?}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, VocabError> {
        let fmt = |line: usize, msg: &str| VocabError::Format { line, msg: msg.to_string() };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h == FORMAT_HEADER => {}
            _ => return Err(fmt(1, "missing header")),
        }
        let mut size = None;
        let mut pieces = Vec::new();
        for (i, line) in lines {
            if let Some(rest) = line.strip_prefix("#size ") {
                size = Some(rest.trim().parse::<usize>().map_err(|_| fmt(i + 1, "bad size"))?);
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let (p, lp) = line.split_once('\t').ok_or_else(|| fmt(i + 1, "expected piece<TAB>logprob"))?;
            let lp: f64 = lp.parse().map_err(|_| fmt(i + 1, "bad log-probability"))?;
            if !lp.is_finite() || p.is_empty() {
                return Err(fmt(i + 1, "invalid piece"));
            }
            pieces.push((p.to_string(), lp));
        }
        if size != Some(pieces.len()) {
            return Err(fmt(0, "size header does not match piece count"));
        }
        if pieces.len() < RESERVED || pieces.iter().zip(RESERVED_PIECES).any(|(p, r)| p.0 != r) {
            return Err(fmt(0, "reserved pieces missing"));
        }
        let vocab = SubwordVocab::from_pieces(pieces);
        if vocab.index.len() + RESERVED != vocab.len() {
            return Err(fmt(0, "duplicate pieces"));
        }
        Ok(vocab)
    }

    pub fn save(&self, path: &Path) -> Result<(), VocabError> {
        fs::write(path, self.to_text())
            .map_err(|source| VocabError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: &Path) -> Result<Self, VocabError> {
        let text = fs::read_to_string(path)
            .map_err(|source| VocabError::Io { path: path.display().to_string(), source })?;
        Self::from_text(&text)
    }
}

pub const NBEST: usize = 64;

fn sample_from<R: Rng + ?Sized>(nbest: &[(TokenIds, f64)], alpha: f64, rng: &mut R) -> TokenIds {
    let top = nbest[0].1;
    let weights: Vec<f64> = nbest.iter().map(|(_, s)| (alpha * (s - top)).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (w, (ids, _)) in weights.iter().zip(nbest) {
        if u < *w {
            return ids.clone();
        }
        u -= w;
    }
    nbest.last().unwrap().0.clone()
}

type NBestList = Arc<Vec<(TokenIds, f64)>>;

/// Vocabulary plus a per-word cache of n-best segmentations. Safe to share
/// across threads.
#[derive(Debug)]
pub struct Tokenizer {
    vocab: SubwordVocab,
    cache: RwLock<HashMap<String, NBestList>>,
}

impl Tokenizer {
    pub fn new(vocab: SubwordVocab) -> Self {
        Tokenizer { vocab, cache: RwLock::new(HashMap::new()) }
    }

    pub fn vocab(&self) -> &SubwordVocab {
        &self.vocab
    }

    fn segmentations(&self, word: &str) -> NBestList {
        if let Some(hit) = self.cache.read().unwrap().get(word) {
            return hit.clone();
        }
        let list = Arc::new(self.vocab.nbest(word, NBEST));
        self.cache.write().unwrap().insert(word.to_string(), list.clone());
        list
    }

    pub fn encode(&self, text: &str, mode: EncodeMode) -> TokenIds {
        match mode {
            EncodeMode::Best => self.encode_inner::<rand_chacha::ChaCha8Rng>(text, None),
            EncodeMode::Sample { alpha, seed } => {
                self.encode_inner(text, Some((alpha, &mut crate::seed::rng(seed))))
            }
        }
    }

    /// Sampled encoding drawing from a caller-owned stream.
    pub fn encode_sampled<R: Rng>(&self, text: &str, alpha: f64, rng: &mut R) -> TokenIds {
        self.encode_inner(text, Some((alpha, rng)))
    }

    fn encode_inner<R: Rng>(&self, text: &str, mut sample: Option<(f64, &mut R)>) -> TokenIds {
        let mut out = vec![BOS];
        for w in words(text) {
            let list = self.segmentations(&w);
            match sample.as_mut() {
                Some((alpha, rng)) => out.extend(sample_from(&list, *alpha, *rng)),
                None => out.extend_from_slice(&list[0].0),
            }
        }
        out.push(EOS);
        out
    }

    pub fn decode(&self, ids: &[u32]) -> Result<String, DecodeError> {
        self.vocab.decode(ids)
    }
}

/// Expected piece counts over the words in one chunk.
fn expected_counts(vocab: &SubwordVocab, words: &[(Vec<char>, f64)]) -> (Vec<f64>, f64) {
    let mut counts = vec![0.0; vocab.len()];
    let mut loglik = 0.0;
    for (chars, freq) in words {
        let ends = vocab.lattice(chars);
        let n = chars.len();
        let mut alpha = vec![f64::NEG_INFINITY; n + 1];
        alpha[0] = 0.0;
        for j in 1..=n {
            for &(i, _, lp) in &ends[j] {
                alpha[j] = log_sum_exp(alpha[j], alpha[i] + lp);
            }
        }
        let mut beta = vec![f64::NEG_INFINITY; n + 1];
        beta[n] = 0.0;
        for j in (1..=n).rev() {
            for &(i, _, lp) in &ends[j] {
                beta[i] = log_sum_exp(beta[i], beta[j] + lp);
            }
        }
        let z = alpha[n];
        loglik += freq * z;
        for j in 1..=n {
            for &(i, id, lp) in &ends[j] {
                counts[id as usize] += freq * (alpha[i] + lp + beta[j] - z).exp();
            }
        }
    }
    (counts, loglik)
}

const CHUNK: usize = 256;

/// E-step in fixed chunks summed in order, so results do not depend on the
/// thread count.
fn e_step(vocab: &SubwordVocab, words: &[(Vec<char>, f64)]) -> Vec<f64> {
    let parts: Vec<Vec<f64>> =
        words.par_chunks(CHUNK).map(|c| expected_counts(vocab, c).0).collect();
    let mut total = vec![0.0; vocab.len()];
    for p in parts {
        for (t, x) in total.iter_mut().zip(p) {
            *t += x;
        }
    }
    total
}

fn build(pieces: &[(String, f64)]) -> SubwordVocab {
    let mut all: Vec<(String, f64)> = RESERVED_PIECES.iter().map(|p| (p.to_string(), 0.0)).collect();
    all.extend(pieces.iter().cloned());
    SubwordVocab::from_pieces(all)
}

/// Re-estimate log-probabilities from expected counts. Single characters
/// keep a floor count so every alphabet symbol stays encodable.
fn m_step(pieces: &mut Vec<(String, f64)>, counts: &[f64]) {
    let mut kept = Vec::with_capacity(pieces.len());
    for (i, (p, _)) in pieces.drain(..).enumerate() {
        let c = counts[i + RESERVED];
        let single = p.chars().count() == 1;
        if single || c > 0.5 {
            kept.push((p, if single { c.max(0.5) } else { c }));
        }
    }
    let total: f64 = kept.iter().map(|p| p.1).sum();
    *pieces = kept.into_iter().map(|(p, c)| (p, (c / total).ln())).collect();
}

/// Train a unigram model of at most `cfg.size` ids (reserved ids included)
/// by EM over seed substrings with likelihood-based pruning.
pub fn train_vocab<S: AsRef<str>>(texts: &[S], cfg: &VocabConfig) -> Result<SubwordVocab, VocabError> {
    let mut freq: BTreeMap<String, f64> = BTreeMap::new();
    for t in texts {
        for w in words(t.as_ref()) {
            *freq.entry(w).or_insert(0.0) += 1.0;
        }
    }
    if freq.is_empty() {
        return Err(VocabError::EmptyCorpus);
    }
    let words: Vec<(Vec<char>, f64)> = freq.iter().map(|(w, f)| (w.chars().collect(), *f)).collect();

    let mut chars: BTreeMap<char, f64> = BTreeMap::new();
    let mut subs: HashMap<String, f64> = HashMap::new();
    for (w, f) in &words {
        for (i, c) in w.iter().enumerate() {
            *chars.entry(*c).or_insert(0.0) += f;
            for j in i + 2..=w.len().min(i + cfg.max_piece_len) {
                if uniform_class(&w[i..j]) {
                    *subs.entry(w[i..j].iter().collect()).or_insert(0.0) += f;
                }
            }
        }
    }
    let required = chars.len() + RESERVED;
    if cfg.size < required {
        return Err(VocabError::TooSmall { requested: cfg.size, required });
    }
    let target = cfg.size - RESERVED;

    let mut seeds: Vec<(String, f64)> = subs.into_iter().filter(|(_, f)| *f >= 2.0).collect();
    seeds.sort_by(|a, b| {
        let sa = a.1 * a.0.chars().count() as f64;
        let sb = b.1 * b.0.chars().count() as f64;
        sb.total_cmp(&sa).then_with(|| a.0.cmp(&b.0))
    });
    seeds.truncate((cfg.size * cfg.seed_factor).saturating_sub(chars.len()));
    let mut pieces: Vec<(String, f64)> =
        chars.iter().map(|(c, f)| (c.to_string(), *f)).chain(seeds).collect();
    let total: f64 = pieces.iter().map(|p| p.1).sum();
    for p in &mut pieces {
        p.1 = (p.1 / total).ln();
    }

    loop {
        for _ in 0..cfg.em_iterations.max(1) {
            let counts = e_step(&build(&pieces), &words);
            m_step(&mut pieces, &counts);
        }
        if pieces.len() <= target {
            break;
        }
        let keep = ((pieces.len() as f64 * cfg.shrink) as usize).max(target);
        pieces = prune(pieces, &words, keep);
    }
    Ok(build(&pieces))
}

/// Drop the pieces whose removal costs the least likelihood, approximating
/// the cost by each piece's Viterbi count times its log-probability gain
/// over the best segmentation of its text without it.
fn prune(pieces: Vec<(String, f64)>, words: &[(Vec<char>, f64)], keep: usize) -> Vec<(String, f64)> {
    let vocab = build(&pieces);
    let parts: Vec<Vec<f64>> = words
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut c = vec![0.0; vocab.len()];
            for (w, f) in chunk {
                let word: String = w.iter().collect();
                for id in vocab.viterbi(&word) {
                    c[id as usize] += f;
                }
            }
            c
        })
        .collect();
    let mut counts = vec![0.0; vocab.len()];
    for p in parts {
        for (t, x) in counts.iter_mut().zip(p) {
            *t += x;
        }
    }
    let losses: Vec<f64> = pieces
        .par_iter()
        .enumerate()
        .map(|(i, (p, lp))| {
            if p.chars().count() == 1 {
                return f64::INFINITY;
            }
            let alt = vocab
                .nbest(p, 2)
                .into_iter()
                .find(|(ids, _)| ids.len() > 1)
                .map_or(f64::NEG_INFINITY, |x| x.1);
            counts[i + RESERVED] * (lp - alt)
        })
        .collect();
    let mut order: Vec<usize> = (0..pieces.len()).collect();
    order.sort_by(|&a, &b| losses[b].total_cmp(&losses[a]).then_with(|| pieces[a].0.cmp(&pieces[b].0)));
    order.truncate(keep);
    order.sort_unstable();
    order.into_iter().map(|i| pieces[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code_corpus() -> Vec<String> {
        crate::eval::synth::generate_synthetic_corpus(60, 5).into_iter().map(|m| m.source).collect()
    }

    fn small(size: usize) -> VocabConfig {
        VocabConfig { size, ..VocabConfig::default() }
    }

    #[test]
    fn single_word_corpus() {
        let v = train_vocab(&["aaaa"], &small(RESERVED + 3)).unwrap();
        let pieces: Vec<&str> = (RESERVED as u32..v.len() as u32).map(|i| v.piece(i).unwrap()).collect();
        assert!(pieces.contains(&"a"));
        assert!(pieces.iter().any(|p| p.chars().count() > 1), "{pieces:?}");
        assert_eq!(v.decode(&v.encode("aaaa", EncodeMode::Best)).unwrap(), "aaaa");
    }

    #[test]
    fn too_small_or_empty() {
        assert!(matches!(train_vocab(&["abc"], &small(5)), Err(VocabError::TooSmall { .. })));
        assert!(matches!(train_vocab::<&str>(&[], &small(50)), Err(VocabError::EmptyCorpus)));
        assert!(matches!(train_vocab(&["  "], &small(50)), Err(VocabError::EmptyCorpus)));
    }

    #[test]
    fn roundtrip_and_keyword_pieces() {
        let corpus = code_corpus();
        let v = train_vocab(&corpus, &small(600)).unwrap();
        assert!(v.len() <= 600);
        let tok = Tokenizer::new(v.clone());
        for text in &corpus {
            for line in text.lines() {
                let ids = tok.encode(line, EncodeMode::Best);
                assert_eq!(tok.decode(&ids).unwrap(), normalize(line));
                assert_eq!(ids, v.encode(line, EncodeMode::Best));
            }
            let sampled = tok.encode(text, EncodeMode::Sample { alpha: 0.1, seed: 9 });
            assert_eq!(tok.decode(&sampled).unwrap(), normalize(text));
        }
        let f = tok.encode("function", EncodeMode::Best);
        assert!(f.len() - 2 <= 3, "{f:?}");
    }

    #[test]
    fn empty_and_out_of_range() {
        let v = train_vocab(&["ab ab"], &small(20)).unwrap();
        assert_eq!(v.encode("", EncodeMode::Best), vec![BOS, EOS]);
        assert_eq!(v.decode(&[BOS, EOS]).unwrap(), "");
        assert!(v.decode(&[v.len() as u32]).is_err());
        assert_eq!(v.decode(&v.encode("zz ab", EncodeMode::Best)).unwrap(), "\u{fffd}\u{fffd} ab");
    }

    #[test]
    fn sampling_varies_and_stays_lossless() {
        let corpus = code_corpus();
        let tok = Tokenizer::new(train_vocab(&corpus, &small(600)).unwrap());
        let text = &corpus[0];
        let best = tok.encode(text, EncodeMode::Best);
        assert_eq!(best, tok.encode(text, EncodeMode::Best));
        let mut distinct = std::collections::HashSet::new();
        for seed in 0..100 {
            let ids = tok.encode(text, EncodeMode::Sample { alpha: 0.1, seed });
            assert_eq!(tok.decode(&ids).unwrap(), normalize(text));
            distinct.insert(ids);
        }
        assert!(distinct.len() > 1);
    }

    #[test]
    fn sampled_pairs_usually_differ() {
        let corpus = code_corpus();
        let tok = Tokenizer::new(train_vocab(&corpus, &small(600)).unwrap());
        let long: Vec<&String> = corpus.iter().filter(|t| t.len() >= 20).collect();
        let differ = long
            .iter()
            .enumerate()
            .filter(|(i, t)| {
                let a = tok.encode(t, EncodeMode::Sample { alpha: 0.1, seed: 2 * *i as u64 });
                let b = tok.encode(t, EncodeMode::Sample { alpha: 0.1, seed: 2 * *i as u64 + 1 });
                a != b
            })
            .count();
        assert!(differ * 2 > long.len());
    }

    #[test]
    fn file_roundtrip_is_exact() {
        let v = train_vocab(&code_corpus(), &small(300)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        v.save(&path).unwrap();
        assert_eq!(SubwordVocab::load(&path).unwrap(), v);
        assert!(SubwordVocab::from_text("nonsense").is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let corpus = code_corpus();
        assert_eq!(train_vocab(&corpus, &small(300)).unwrap(), train_vocab(&corpus, &small(300)).unwrap());
    }
}
