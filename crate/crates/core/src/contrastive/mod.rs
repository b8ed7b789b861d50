//! Momentum-contrast pre-training: InfoNCE over a FIFO queue of key
//! embeddings, a query encoder trained by SGD and a key encoder that
//! tracks it by exponential moving average.

use std::collections::VecDeque;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::VariantRecord;
use crate::encoder::checkpoint::{CheckpointError, Container, Tensor};
use crate::encoder::{backward, forward, init_params, Dims, EncoderError, EncoderParams, Grads, Pooling};
use crate::seed;
use crate::tokenizer::{TokenIds, Tokenizer};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("no trainable pairs: {0}")]
    Data(String),
    #[error("vectors differ in dimension")]
    DimensionMismatch,
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TrainError + '_ {
    move |source| TrainError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub temperature: f64,
    /// EMA coefficient of the key encoder.
    pub momentum: f64,
    pub batch_size: usize,
    pub queue_capacity: usize,
    /// Keys from each batch pushed onto the queue.
    pub queue_refill: usize,
    pub steps: u64,
    pub learning_rate: f64,
    pub warmup_steps: u64,
    pub sgd_momentum: f64,
    pub seed: u64,
    pub pooling: Pooling,
    pub normalize: bool,
    /// Subword sampling temperature for each view.
    pub sampling_alpha: f64,
    /// Drop queue entries that come from the query's own base method.
    pub mask_same_base: bool,
    pub d_tok: usize,
    pub d_hid: usize,
    pub d_out: usize,
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            temperature: 0.07,
            momentum: 0.999,
            batch_size: 32,
            queue_capacity: 512,
            queue_refill: 8,
            steps: 2000,
            learning_rate: 0.2,
            warmup_steps: 100,
            sgd_momentum: 0.9,
            seed: 0,
            pooling: Pooling::Max,
            normalize: true,
            sampling_alpha: 0.1,
            mask_same_base: true,
            d_tok: 512,
            d_hid: 512,
            d_out: 128,
            checkpoint_every: 500,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.temperature > 0.0) {
            return bad("temperature must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if self.queue_refill == 0 || self.queue_refill > self.batch_size {
            return bad("queue refill must lie in 1..=batch size");
        }
        if self.queue_capacity < self.batch_size {
            return bad("queue capacity must be at least the batch size");
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.sgd_momentum) {
            return bad("learning rate must be positive and SGD momentum in [0, 1)");
        }
        if self.d_tok == 0 || self.d_hid == 0 || self.d_out == 0 {
            return bad("dimensions must be positive");
        }
        Ok(())
    }

    pub fn dims(&self, vocab: usize) -> Dims {
        Dims { vocab, d_tok: self.d_tok, d_hid: self.d_hid, d_out: self.d_out }
    }

    /// Linear warmup to the base rate, constant afterwards.
    pub fn learning_rate_at(&self, step: u64) -> f64 {
        if step < self.warmup_steps {
            self.learning_rate * (step + 1) as f64 / self.warmup_steps as f64
        } else {
            self.learning_rate
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfoNce {
    pub loss: f64,
    pub grad_q: Vec<f64>,
    pub grad_k: Vec<f64>,
    /// Whether the positive outscored every negative.
    pub retrieved: bool,
}

/// `-log(exp(q.k+/t) / (exp(q.k+/t) + sum exp(q.k-/t)))` with gradients for
/// `q` and `k+`; negatives are constants.
pub fn info_nce(q: &[f64], k_pos: &[f64], negatives: &[&[f64]], t: f64) -> Result<InfoNce, TrainError> {
    if q.len() != k_pos.len() || negatives.iter().any(|n| n.len() != q.len()) {
        return Err(TrainError::DimensionMismatch);
    }
    let logits: Vec<f64> = std::iter::once(dot(q, k_pos) / t)
        .chain(negatives.iter().map(|n| dot(q, n) / t))
        .collect();
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|l| (l - m).exp()).sum();
    let lse = m + sum.ln();
    let probs: Vec<f64> = logits.iter().map(|l| (l - lse).exp()).collect();
    let mut grad_q: Vec<f64> = k_pos.iter().map(|k| (probs[0] - 1.0) * k / t).collect();
    for (p, n) in probs[1..].iter().zip(negatives) {
        for (g, x) in grad_q.iter_mut().zip(n.iter()) {
            *g += p * x / t;
        }
    }
    let grad_k = q.iter().map(|x| (probs[0] - 1.0) * x / t).collect();
    Ok(InfoNce {
        loss: lse - logits[0],
        grad_q,
        grad_k,
        retrieved: logits[1..].iter().all(|&l| logits[0] > l),
    })
}

/// `theta_k <- m theta_k + (1 - m) theta_q`, in place.
pub fn ema_update(key: &mut EncoderParams, query: &EncoderParams, m: f64) -> Result<(), TrainError> {
    if key.dims != query.dims {
        return Err(TrainError::DimensionMismatch);
    }
    for (k, q) in key.blocks_mut().into_iter().zip(query.blocks()) {
        for (a, b) in k.iter_mut().zip(q.iter()) {
            *a = m * *a + (1.0 - m) * b;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegativeQueue {
    capacity: usize,
    keys: VecDeque<Vec<f64>>,
    /// Base method of each key.
    tags: VecDeque<usize>,
}

impl NegativeQueue {
    pub fn new(capacity: usize) -> Self {
        NegativeQueue { capacity, keys: VecDeque::new(), tags: VecDeque::new() }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Append, evicting the oldest entries beyond capacity.
    pub fn push(&mut self, key: Vec<f64>, tag: usize) {
        self.keys.push_back(key);
        self.tags.push_back(tag);
        while self.keys.len() > self.capacity {
            self.keys.pop_front();
            self.tags.pop_front();
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], usize)> {
        self.keys.iter().map(Vec::as_slice).zip(self.tags.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: u64,
    pub loss: f64,
    pub acc: f64,
    pub queue_fill: usize,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub query: EncoderParams,
    pub key: EncoderParams,
    /// SGD momentum buffer, shaped like the parameters.
    pub velocity: EncoderParams,
    pub queue: NegativeQueue,
    pub step: u64,
}

impl TrainState {
    pub fn new(dims: Dims, cfg: &TrainConfig) -> Self {
        let query = init_params(dims, seed::derive_str(cfg.seed, "init"));
        let mut velocity = query.clone();
        velocity.blocks_mut().into_iter().for_each(|b| b.iter_mut().for_each(|x| *x = 0.0));
        TrainState { key: query.clone(), query, velocity, queue: NegativeQueue::new(cfg.queue_capacity), step: 0 }
    }

    pub fn to_container(&self, cfg: &TrainConfig) -> Container {
        let d_out = self.query.dims.d_out;
        let mut tensors = self.query.to_tensors("q.");
        tensors.extend(self.key.to_tensors("k."));
        tensors.extend(self.velocity.to_tensors("v."));
        let flat: Vec<f64> = self.queue.keys.iter().flatten().copied().collect();
        tensors.push(Tensor::new("queue", vec![self.queue.len(), d_out], flat));
        Container {
            meta: serde_json::json!({
                "kind": "contrastive",
                "schema_version": 1,
                "dims": self.query.dims,
                "step": self.step,
                "config": cfg,
                "queue_tags": self.queue.tags,
            }),
            tensors,
        }
    }

    pub fn from_container(c: &Container) -> Result<(Self, TrainConfig), CheckpointError> {
        let field = |k: &str| c.meta.get(k).cloned().ok_or_else(|| CheckpointError::Format(format!("missing `{k}`")));
        let parse = |e: serde_json::Error| CheckpointError::Format(e.to_string());
        let dims: Dims = serde_json::from_value(field("dims")?).map_err(parse)?;
        let cfg: TrainConfig = serde_json::from_value(field("config")?).map_err(parse)?;
        let step: u64 = serde_json::from_value(field("step")?).map_err(parse)?;
        let tags: Vec<usize> = serde_json::from_value(field("queue_tags")?).map_err(parse)?;
        let queue_data = c.take("queue", &[tags.len(), dims.d_out])?;
        let mut queue = NegativeQueue::new(cfg.queue_capacity);
        for (chunk, tag) in queue_data.chunks(dims.d_out.max(1)).zip(&tags) {
            queue.push(chunk.to_vec(), *tag);
        }
        Ok((
            TrainState {
                query: EncoderParams::from_tensors(c, "q.", dims)?,
                key: EncoderParams::from_tensors(c, "k.", dims)?,
                velocity: EncoderParams::from_tensors(c, "v.", dims)?,
                queue,
                step,
            },
            cfg,
        ))
    }
}

/// One positive pair: two tokenized views of the same base method.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    pub query: TokenIds,
    pub key: TokenIds,
    pub base: usize,
}

/// One optimization step on `batch`.
pub fn train_step(state: &mut TrainState, batch: &[PairSample], cfg: &TrainConfig) -> Result<StepReport, TrainError> {
    if cfg.queue_refill > batch.len() {
        return Err(TrainError::Config(format!(
            "queue refill {} exceeds batch of {}",
            cfg.queue_refill,
            batch.len()
        )));
    }
    let query_traces = batch
        .par_iter()
        .map(|p| forward(&state.query, &p.query, cfg.pooling, cfg.normalize))
        .collect::<Result<Vec<_>, _>>()?;
    let keys = batch
        .par_iter()
        .map(|p| forward(&state.key, &p.key, cfg.pooling, cfg.normalize).map(|t| t.output))
        .collect::<Result<Vec<_>, _>>()?;

    let n = batch.len() as f64;
    let per_item: Vec<(InfoNce, Grads)> = query_traces
        .par_iter()
        .zip(&keys)
        .zip(batch)
        .map(|((trace, key), pair)| {
            let negatives: Vec<&[f64]> = state
                .queue
                .iter()
                .filter(|(_, tag)| !cfg.mask_same_base || *tag != pair.base)
                .map(|(k, _)| k)
                .collect();
            let nce = info_nce(&trace.output, key, &negatives, cfg.temperature)?;
            let upstream: Vec<f64> = nce.grad_q.iter().map(|g| g / n).collect();
            let grads = backward(&state.query, trace, &upstream);
            Ok((nce, grads))
        })
        .collect::<Result<Vec<_>, TrainError>>()?;

    let mut grads = Grads::zeros(state.query.dims);
    let (mut loss, mut hits) = (0.0, 0usize);
    for (nce, g) in &per_item {
        grads.add(g);
        loss += nce.loss;
        hits += usize::from(nce.retrieved);
    }

    let lr = cfg.learning_rate_at(state.step);
    sgd_update(state, &grads, lr, cfg.sgd_momentum);
    ema_update(&mut state.key, &state.query, cfg.momentum)?;
    for (key, pair) in keys.into_iter().zip(batch).take(cfg.queue_refill) {
        state.queue.push(key, pair.base);
    }
    state.step += 1;
    Ok(StepReport { step: state.step, loss: loss / n, acc: hits as f64 / n, queue_fill: state.queue.len(), lr })
}

fn sgd_update(state: &mut TrainState, g: &Grads, lr: f64, mu: f64) {
    let d_tok = state.query.dims.d_tok;
    state.velocity.emb.iter_mut().for_each(|v| *v *= mu);
    for (id, row) in &g.emb {
        let at = *id as usize * d_tok;
        for (v, x) in state.velocity.emb[at..at + d_tok].iter_mut().zip(row) {
            *v += x;
        }
    }
    let dense = [(&g.w1, 1), (&g.b1, 2), (&g.w2, 3), (&g.b2, 4)];
    for (grad, block) in dense {
        let v = &mut state.velocity.blocks_mut()[block];
        for (vi, gi) in v.iter_mut().zip(grad.iter()) {
            *vi = mu * *vi + gi;
        }
    }
    for (p, v) in state.query.blocks_mut().into_iter().zip(state.velocity.blocks()) {
        for (pi, vi) in p.iter_mut().zip(v.iter()) {
            *pi -= lr * vi;
        }
    }
}

/// Draws batches of positive pairs from an augmented corpus.
pub struct PairSampler<'a> {
    corpus: &'a [VariantRecord],
    tokenizer: &'a Tokenizer,
    alpha: f64,
    seed: u64,
}

impl<'a> PairSampler<'a> {
    pub fn new(corpus: &'a [VariantRecord], tokenizer: &'a Tokenizer, cfg: &TrainConfig) -> Result<Self, TrainError> {
        if corpus.is_empty() {
            return Err(TrainError::Data("empty corpus".into()));
        }
        if !corpus.iter().any(|r| r.set_size() >= 2) {
            return Err(TrainError::Data("no method has two or more variants".into()));
        }
        Ok(PairSampler { corpus, tokenizer, alpha: cfg.sampling_alpha, seed: cfg.seed })
    }

    /// Batch for `step`: distinct methods where the corpus allows, two
    /// distinct variants each when available (otherwise the same text twice,
    /// left to subword sampling to differ), each view tokenized by sampling.
    pub fn batch(&self, step: u64, size: usize) -> Vec<PairSample> {
        let mut rng = seed::rng(seed::derive_index(self.seed, "batch", step));
        let picks: Vec<usize> = if size <= self.corpus.len() {
            sample(&mut rng, self.corpus.len(), size).into_vec()
        } else {
            (0..size).map(|_| rng.gen_range(0..self.corpus.len())).collect()
        };
        let plan: Vec<(usize, usize, usize, u64)> = picks
            .into_iter()
            .map(|m| {
                let n = self.corpus[m].set_size();
                let (a, b) = if n >= 2 {
                    let v = sample(&mut rng, n, 2);
                    (v.index(0), v.index(1))
                } else {
                    (0, 0)
                };
                (m, a, b, rng.gen())
            })
            .collect();
        plan.par_iter()
            .map(|&(m, a, b, s)| {
                let rec = &self.corpus[m];
                let mut r = seed::rng(s);
                PairSample {
                    query: self.tokenizer.encode_sampled(rec.member(a), self.alpha, &mut r),
                    key: self.tokenizer.encode_sampled(rec.member(b), self.alpha, &mut r),
                    base: m,
                }
            })
            .collect()
    }
}

pub const CHECKPOINT_NAME: &str = "last.ckpt";
pub const METRICS_NAME: &str = "metrics.jsonl";

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub checkpoint: PathBuf,
    pub reports: Vec<StepReport>,
}

/// Train for `cfg.steps`, logging every step to `metrics.jsonl` and saving
/// `last.ckpt` every `checkpoint_every` steps and at the end. With `resume`,
/// training continues from an existing `last.ckpt`.
pub fn pretrain(
    corpus: &[VariantRecord],
    tokenizer: &Tokenizer,
    cfg: &TrainConfig,
    out_dir: &Path,
    resume: bool,
) -> Result<PretrainOutcome, TrainError> {
    cfg.validate()?;
    let sampler = PairSampler::new(corpus, tokenizer, cfg)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let ckpt = out_dir.join(CHECKPOINT_NAME);
    let metrics = out_dir.join(METRICS_NAME);
    let mut state = if resume && ckpt.exists() {
        let (state, saved) = TrainState::from_container(&Container::load(&ckpt)?)?;
        let expected = TrainConfig { steps: cfg.steps, checkpoint_every: cfg.checkpoint_every, ..saved };
        if expected != *cfg {
            return Err(TrainError::Config("resumed run must keep the saved training config".into()));
        }
        truncate_metrics(&metrics, state.step)?;
        state
    } else {
        let _ = fs::remove_file(&metrics);
        TrainState::new(cfg.dims(tokenizer.vocab().len()), cfg)
    };
    let mut log = OpenOptions::new().create(true).append(true).open(&metrics).map_err(io_err(&metrics))?;
    let mut reports = Vec::new();
    while state.step < cfg.steps {
        let batch = sampler.batch(state.step, cfg.batch_size);
        let report = train_step(&mut state, &batch, cfg)?;
        writeln!(log, "{}", serde_json::to_string(&report).expect("report serializes")).map_err(io_err(&metrics))?;
        if report.step % 100 == 0 {
            log::info!("step {} loss {:.4} acc {:.3} queue {}", report.step, report.loss, report.acc, report.queue_fill);
        }
        reports.push(report);
        if cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0 && state.step < cfg.steps {
            state.to_container(cfg).save(&ckpt)?;
        }
    }
    state.to_container(cfg).save(&ckpt)?;
    Ok(PretrainOutcome { checkpoint: ckpt, reports })
}

fn truncate_metrics(path: &Path, step: u64) -> Result<(), TrainError> {
    if !path.exists() {
        return Ok(());
    }
    let kept: Vec<String> = BufReader::new(File::open(path).map_err(io_err(path))?)
        .lines()
        .map_while(Result::ok)
        .filter(|l| serde_json::from_str::<StepReport>(l).is_ok_and(|r| r.step <= step))
        .collect();
    let mut text = kept.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    fs::write(path, text).map_err(io_err(path))
}

/// Fraction of pairs whose query embedding is closer to its own key than to
/// every other pair's key.
pub fn retrieval_accuracy(params: &EncoderParams, pairs: &[PairSample], pooling: Pooling) -> Result<f64, TrainError> {
    let embed = |ids: &TokenIds| forward(params, ids, pooling, true).map(|t| t.output);
    let qs = pairs.par_iter().map(|p| embed(&p.query)).collect::<Result<Vec<_>, _>>()?;
    let ks = pairs.par_iter().map(|p| embed(&p.key)).collect::<Result<Vec<_>, _>>()?;
    let hits = qs
        .iter()
        .enumerate()
        .filter(|(i, q)| {
            let own = dot(q, &ks[*i]);
            ks.iter().enumerate().all(|(j, k)| j == *i || pairs[j].base == pairs[*i].base || dot(q, k) < own)
        })
        .count();
    Ok(hits as f64 / pairs.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(v: Vec<f64>) -> Vec<f64> {
        let n = dot(&v, &v).sqrt();
        v.into_iter().map(|x| x / n).collect()
    }

    #[test]
    fn info_nce_known_values() {
        let q = [1.0, 0.0, 0.0];
        let n1 = [0.0, 1.0, 0.0];
        let n2 = [0.0, 0.0, 1.0];
        let r = info_nce(&q, &q, &[&n1, &n2], 1.0).unwrap();
        let e = std::f64::consts::E;
        assert!((r.loss + (e / (e + 2.0)).ln()).abs() < 1e-12);
        assert!((r.loss - 0.5514).abs() < 1e-4);
        assert_eq!(info_nce(&[0.3, 0.2], &[-1.0, 5.0], &[], 0.07).unwrap().loss, 0.0);
        let hot = info_nce(&q, &[0.5, 0.5, 0.0], &[&n1, &n2], 1e6).unwrap();
        assert!((hot.loss - 3f64.ln()).abs() < 1e-3);
        assert!(info_nce(&q, &[1.0], &[], 1.0).is_err());
    }

    #[test]
    fn info_nce_is_softmax_cross_entropy() {
        let mut rng = seed::rng(4);
        for _ in 0..20 {
            let v = |rng: &mut rand_chacha::ChaCha8Rng| unit((0..6).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let q = v(&mut rng);
            let k = v(&mut rng);
            let negs: Vec<Vec<f64>> = (0..5).map(|_| v(&mut rng)).collect();
            let refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
            let t = 0.07;
            let logits: Vec<f64> = std::iter::once(dot(&q, &k) / t).chain(negs.iter().map(|n| dot(&q, n) / t)).collect();
            let z: f64 = logits.iter().map(|l| l.exp()).sum();
            let ce = -(logits[0].exp() / z).ln();
            assert!((info_nce(&q, &k, &refs, t).unwrap().loss - ce).abs() < 1e-10);
        }
    }

    #[test]
    fn info_nce_gradients_match_finite_differences() {
        let mut rng = seed::rng(9);
        for _ in 0..5 {
            let mut v = || (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
            let (q, k, a, b) = (v(), v(), v(), v());
            let negs: [&[f64]; 2] = [&a, &b];
            let r = info_nce(&q, &k, &negs, 0.5).unwrap();
            let h = 1e-6;
            for i in 0..5 {
                for (target, analytic) in [(0, &r.grad_q), (1, &r.grad_k)] {
                    let bump = |d: f64| {
                        let (mut q2, mut k2) = (q.clone(), k.clone());
                        if target == 0 { q2[i] += d } else { k2[i] += d }
                        info_nce(&q2, &k2, &negs, 0.5).unwrap().loss
                    };
                    let numeric = (bump(h) - bump(-h)) / (2.0 * h);
                    let err = (numeric - analytic[i]).abs() / numeric.abs().max(analytic[i].abs()).max(1e-8);
                    assert!(err < 1e-4, "{numeric} vs {}", analytic[i]);
                }
            }
        }
    }

    fn tiny_dims() -> Dims {
        Dims { vocab: 10, d_tok: 4, d_hid: 3, d_out: 2 }
    }

    #[test]
    fn ema_formula_and_convergence() {
        let dims = tiny_dims();
        let mut k = init_params(dims, 0);
        k.blocks_mut().into_iter().for_each(|b| b.iter_mut().for_each(|x| *x = 0.0));
        let mut q = k.clone();
        q.blocks_mut().into_iter().for_each(|b| b.iter_mut().for_each(|x| *x = 1.0));
        let mut one = k.clone();
        ema_update(&mut one, &q, 0.999).unwrap();
        assert!((one.w1[0] - 0.001).abs() < 1e-15);
        let mut zero = k.clone();
        ema_update(&mut zero, &q, 0.0).unwrap();
        assert_eq!(zero, q);
        let mut run = k.clone();
        for n in 1..=100 {
            ema_update(&mut run, &q, 0.9).unwrap();
            assert!(((1.0 - run.b2[0]) - 0.9f64.powi(n)).abs() < 1e-12);
        }
        assert!(ema_update(&mut run, &init_params(Dims { vocab: 3, ..dims }, 0), 0.5).is_err());
    }

    #[test]
    fn queue_is_fifo_and_bounded() {
        let mut q = NegativeQueue::new(3);
        for i in 0..5 {
            q.push(vec![i as f64], i);
        }
        assert_eq!(q.len(), 3);
        assert_eq!(q.iter().map(|(_, t)| t).collect::<Vec<_>>(), vec![2, 3, 4]);
    }

    fn toy_batch(step: u64) -> Vec<PairSample> {
        // Two methods with disjoint token sets; views are random subsets.
        let mut rng = seed::rng(step);
        (0..4)
            .map(|i| {
                let base = i % 2;
                let pool: Vec<u32> = if base == 0 { vec![4, 5, 6] } else { vec![7, 8, 9] };
                let mut view = || (0..3).map(|_| pool[rng.gen_range(0..3)]).collect::<Vec<_>>();
                PairSample { query: view(), key: view(), base }
            })
            .collect()
    }

    fn toy_cfg() -> TrainConfig {
        TrainConfig {
            batch_size: 4,
            queue_capacity: 8,
            queue_refill: 2,
            d_tok: 8,
            d_hid: 8,
            d_out: 4,
            temperature: 0.2,
            momentum: 0.9,
            learning_rate: 0.1,
            warmup_steps: 5,
            mask_same_base: false,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn first_step_and_queue_fill() {
        let cfg = toy_cfg();
        let mut s = TrainState::new(Dims { vocab: 10, ..cfg.dims(10) }, &cfg);
        assert_eq!(s.key, s.query);
        let r = train_step(&mut s, &toy_batch(0), &cfg).unwrap();
        assert_eq!((r.loss, r.acc, r.queue_fill), (0.0, 1.0, 2));
        for t in 1..10 {
            let r = train_step(&mut s, &toy_batch(t), &cfg).unwrap();
            assert_eq!(r.queue_fill, ((t + 1) as usize * 2).min(8));
        }
        let bad = TrainConfig { queue_refill: 5, ..cfg.clone() };
        assert!(train_step(&mut s, &toy_batch(0), &bad).is_err());
    }

    #[test]
    fn training_separates_two_programs() {
        let cfg = toy_cfg();
        let mut s = TrainState::new(cfg.dims(10), &cfg);
        for t in 0..500 {
            train_step(&mut s, &toy_batch(t), &cfg).unwrap();
        }
        let emb = |ids: &[u32]| forward(&s.query, ids, cfg.pooling, true).unwrap().output;
        let (a, a2, b) = (emb(&[4, 5]), emb(&[6, 4]), emb(&[7, 9]));
        assert!(dot(&a, &a2) > dot(&a, &b), "{} vs {}", dot(&a, &a2), dot(&a, &b));
    }

    #[test]
    fn checkpoint_restores_exact_state() {
        let cfg = toy_cfg();
        let mut s = TrainState::new(cfg.dims(10), &cfg);
        for t in 0..6 {
            train_step(&mut s, &toy_batch(t), &cfg).unwrap();
        }
        let (back, cfg2) = TrainState::from_container(&Container::from_bytes(&s.to_container(&cfg).to_bytes()).unwrap()).unwrap();
        assert_eq!(back, s);
        assert_eq!(cfg2, cfg);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { temperature: 0.0, ..Default::default() },
            TrainConfig { momentum: 1.0, ..Default::default() },
            TrainConfig { queue_refill: 33, ..Default::default() },
            TrainConfig { queue_capacity: 16, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
