//! Pooled subword-embedding encoder with a two-layer projection head.
//!
//! Token embeddings are mean- or max-pooled over the sequence, passed
//! through `W1 -> ReLU -> W2` and optionally L2-normalized. Token order is
//! ignored; the contrastive trainer only needs `forward`, `backward` and the
//! parameter arithmetic below, so a sequence model can replace this one.

pub mod checkpoint;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::tokenizer::PAD;
use checkpoint::{CheckpointError, Container, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub vocab: usize,
    pub d_tok: usize,
    pub d_hid: usize,
    pub d_out: usize,
}

impl Dims {
    pub fn new(vocab: usize) -> Self {
        Dims { vocab, d_tok: 512, d_hid: 512, d_out: 128 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Mean,
    #[default]
    Max,
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pooling::Mean => "mean",
            Pooling::Max => "max",
        })
    }
}

impl FromStr for Pooling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mean" => Ok(Pooling::Mean),
            "max" => Ok(Pooling::Max),
            _ => Err(format!("unknown pooling `{s}` (expected mean or max)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EncoderError {
    #[error("token sequence has no non-padding ids")]
    EmptySequence,
    #[error("token id {id} outside vocabulary of size {vocab}")]
    UnknownId { id: u32, vocab: usize },
    #[error("parameter shapes differ")]
    DimensionMismatch,
}

/// Row-major matrices: `emb` is vocab x d_tok, `w1` d_tok x d_hid, `w2`
/// d_hid x d_out.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub dims: Dims,
    pub emb: Vec<f64>,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledEmbedding {
    pub vector: Vec<f64>,
    pub normalized: bool,
}

fn uniform<R: Rng>(rng: &mut R, n: usize, fan_in: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
}

/// Entries uniform in `±1/sqrt(fan_in)`; embedding rows use `d_tok` as
/// fan-in.
pub fn init_params(dims: Dims, seed: u64) -> EncoderParams {
    let mut rng = crate::seed::rng(seed);
    let Dims { vocab, d_tok, d_hid, d_out } = dims;
    EncoderParams {
        dims,
        emb: uniform(&mut rng, vocab * d_tok, d_tok),
        w1: uniform(&mut rng, d_tok * d_hid, d_tok),
        b1: uniform(&mut rng, d_hid, d_tok),
        w2: uniform(&mut rng, d_hid * d_out, d_hid),
        b2: uniform(&mut rng, d_out, d_hid),
    }
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    tokens: Vec<u32>,
    pooling: Pooling,
    normalize: bool,
    pooled: Vec<f64>,
    /// Position in `tokens` that won the max, per dimension.
    argmax: Vec<usize>,
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
    z_norm: f64,
    pub output: Vec<f64>,
}

impl Trace {
    pub fn embedding(&self) -> PooledEmbedding {
        PooledEmbedding { vector: self.output.clone(), normalized: self.normalize }
    }
}

/// `out = x W + b` for row vector `x`.
fn affine(x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let cols = b.len();
    let mut out = b.to_vec();
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &w[i * cols..(i + 1) * cols];
        for (o, &wij) in out.iter_mut().zip(row) {
            *o += xi * wij;
        }
    }
    out
}

pub fn forward(
    params: &EncoderParams,
    ids: &[u32],
    pooling: Pooling,
    normalize: bool,
) -> Result<Trace, EncoderError> {
    let Dims { vocab, d_tok, .. } = params.dims;
    let tokens: Vec<u32> = ids.iter().copied().filter(|&t| t != PAD).collect();
    if tokens.is_empty() {
        return Err(EncoderError::EmptySequence);
    }
    if let Some(&id) = tokens.iter().find(|&&t| t as usize >= vocab) {
        return Err(EncoderError::UnknownId { id, vocab });
    }
    let row = |t: u32| &params.emb[t as usize * d_tok..(t as usize + 1) * d_tok];
    let mut pooled = vec![0.0; d_tok];
    let mut argmax = Vec::new();
    match pooling {
        Pooling::Mean => {
            for &t in &tokens {
                for (p, e) in pooled.iter_mut().zip(row(t)) {
                    *p += e;
                }
            }
            let n = tokens.len() as f64;
            pooled.iter_mut().for_each(|p| *p /= n);
        }
        Pooling::Max => {
            pooled.copy_from_slice(row(tokens[0]));
            argmax = vec![0; d_tok];
            for (pos, &t) in tokens.iter().enumerate().skip(1) {
                for (d, &e) in row(t).iter().enumerate() {
                    if e > pooled[d] {
                        pooled[d] = e;
                        argmax[d] = pos;
                    }
                }
            }
        }
    }
    let hidden_pre = affine(&pooled, &params.w1, &params.b1);
    let hidden: Vec<f64> = hidden_pre.iter().map(|&x| x.max(0.0)).collect();
    let z = affine(&hidden, &params.w2, &params.b2);
    let z_norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
    let output = if normalize && z_norm > 0.0 { z.iter().map(|x| x / z_norm).collect() } else { z };
    Ok(Trace { tokens, pooling, normalize, pooled, argmax, hidden_pre, hidden, z_norm, output })
}

pub fn encode_program(
    params: &EncoderParams,
    ids: &[u32],
    pooling: Pooling,
    normalize: bool,
) -> Result<PooledEmbedding, EncoderError> {
    Ok(forward(params, ids, pooling, normalize)?.embedding())
}

/// Parameter gradients; embedding rows are stored sparsely.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub emb: BTreeMap<u32, Vec<f64>>,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Grads {
    pub fn zeros(dims: Dims) -> Self {
        Grads {
            emb: BTreeMap::new(),
            w1: vec![0.0; dims.d_tok * dims.d_hid],
            b1: vec![0.0; dims.d_hid],
            w2: vec![0.0; dims.d_hid * dims.d_out],
            b2: vec![0.0; dims.d_out],
        }
    }

    pub fn add(&mut self, other: &Grads) {
        for (id, row) in &other.emb {
            let mine = self.emb.entry(*id).or_insert_with(|| vec![0.0; row.len()]);
            mine.iter_mut().zip(row).for_each(|(a, b)| *a += b);
        }
        for (a, b) in [
            (&mut self.w1, &other.w1),
            (&mut self.b1, &other.b1),
            (&mut self.w2, &other.w2),
            (&mut self.b2, &other.b2),
        ] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.emb.values_mut().flatten().for_each(|x| *x *= s);
        for v in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            v.iter_mut().for_each(|x| *x *= s);
        }
    }
}

/// Reverse-mode gradients of the traced output against `upstream`.
pub fn backward(params: &EncoderParams, trace: &Trace, upstream: &[f64]) -> Grads {
    let Dims { d_tok, d_hid, d_out, .. } = params.dims;
    let mut g = Grads::zeros(params.dims);
    // Through the normalization: (I - y y^T) g / |z|.
    let gz: Vec<f64> = if trace.normalize && trace.z_norm > 0.0 {
        let dot: f64 = trace.output.iter().zip(upstream).map(|(y, u)| y * u).sum();
        trace.output.iter().zip(upstream).map(|(y, u)| (u - y * dot) / trace.z_norm).collect()
    } else {
        upstream.to_vec()
    };
    g.b2.copy_from_slice(&gz);
    let mut gh = vec![0.0; d_hid];
    for i in 0..d_hid {
        let h = trace.hidden[i];
        let row = &params.w2[i * d_out..(i + 1) * d_out];
        let grow = &mut g.w2[i * d_out..(i + 1) * d_out];
        let mut acc = 0.0;
        for k in 0..d_out {
            grow[k] = h * gz[k];
            acc += row[k] * gz[k];
        }
        gh[i] = acc;
    }
    let gpre: Vec<f64> =
        gh.iter().zip(&trace.hidden_pre).map(|(g, &p)| if p > 0.0 { *g } else { 0.0 }).collect();
    g.b1.copy_from_slice(&gpre);
    let mut gpooled = vec![0.0; d_tok];
    for i in 0..d_tok {
        let x = trace.pooled[i];
        let row = &params.w1[i * d_hid..(i + 1) * d_hid];
        let grow = &mut g.w1[i * d_hid..(i + 1) * d_hid];
        let mut acc = 0.0;
        for k in 0..d_hid {
            grow[k] = x * gpre[k];
            acc += row[k] * gpre[k];
        }
        gpooled[i] = acc;
    }
    match trace.pooling {
        Pooling::Mean => {
            let n = trace.tokens.len() as f64;
            for &t in &trace.tokens {
                let row = g.emb.entry(t).or_insert_with(|| vec![0.0; d_tok]);
                row.iter_mut().zip(&gpooled).for_each(|(r, gp)| *r += gp / n);
            }
        }
        Pooling::Max => {
            for (d, &pos) in trace.argmax.iter().enumerate() {
                let t = trace.tokens[pos];
                g.emb.entry(t).or_insert_with(|| vec![0.0; d_tok])[d] += gpooled[d];
            }
        }
    }
    g
}

pub fn encode_backward(
    params: &EncoderParams,
    ids: &[u32],
    pooling: Pooling,
    normalize: bool,
    upstream: &[f64],
) -> Result<Grads, EncoderError> {
    let trace = forward(params, ids, pooling, normalize)?;
    Ok(backward(params, &trace, upstream))
}

impl EncoderParams {
    pub fn blocks(&self) -> [&Vec<f64>; 5] {
        [&self.emb, &self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn blocks_mut(&mut self) -> [&mut Vec<f64>; 5] {
        [&mut self.emb, &mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    pub fn to_tensors(&self, prefix: &str) -> Vec<Tensor> {
        let Dims { vocab, d_tok, d_hid, d_out } = self.dims;
        vec![
            Tensor::new(&format!("{prefix}emb"), vec![vocab, d_tok], self.emb.clone()),
            Tensor::new(&format!("{prefix}w1"), vec![d_tok, d_hid], self.w1.clone()),
            Tensor::new(&format!("{prefix}b1"), vec![d_hid], self.b1.clone()),
            Tensor::new(&format!("{prefix}w2"), vec![d_hid, d_out], self.w2.clone()),
            Tensor::new(&format!("{prefix}b2"), vec![d_out], self.b2.clone()),
        ]
    }

    pub fn from_tensors(c: &Container, prefix: &str, dims: Dims) -> Result<Self, CheckpointError> {
        let Dims { vocab, d_tok, d_hid, d_out } = dims;
        Ok(EncoderParams {
            dims,
            emb: c.take(&format!("{prefix}emb"), &[vocab, d_tok])?,
            w1: c.take(&format!("{prefix}w1"), &[d_tok, d_hid])?,
            b1: c.take(&format!("{prefix}b1"), &[d_hid])?,
            w2: c.take(&format!("{prefix}w2"), &[d_hid, d_out])?,
            b2: c.take(&format!("{prefix}b2"), &[d_out])?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        Container {
            meta: serde_json::json!({"kind": "encoder", "dims": self.dims}),
            tensors: self.to_tensors(""),
        }
        .save(path)
    }
}

/// Query-encoder parameters from an encoder file or a training checkpoint.
pub fn load_encoder(path: &Path) -> Result<EncoderParams, CheckpointError> {
    let c = Container::load(path)?;
    let dims: Dims = serde_json::from_value(c.meta["dims"].clone())
        .map_err(|e| CheckpointError::Format(format!("dims: {e}")))?;
    let prefix = if c.meta["kind"] == "encoder" { "" } else { "q." };
    EncoderParams::from_tensors(&c, prefix, dims)
}
