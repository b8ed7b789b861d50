use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use equivar::augment::{token_dissimilarity as dissimilarity, transform_dropout as dropout, AugmentRequest};
use equivar::contrastive;
use equivar::eval::{self, ScoredPair};
use equivar::interp::{self, Verdict};
use equivar::syntax::{self, PrintStyle};
use equivar::tokenizer::{self, EncodeMode, SubwordVocab, VocabConfig};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn scored(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<Vec<ScoredPair>> {
    if scores.len() != labels.len() {
        return Err(PyValueError::new_err("scores and labels differ in length"));
    }
    Ok(scores.into_iter().zip(labels).map(|(score, label)| ScoredPair { score, label }).collect())
}

/// Parse and reprint a program in `beautified`, `reformatted` or `compact` style.
#[pyfunction]
#[pyo3(signature = (source, style = "beautified"))]
fn format_program(source: &str, style: &str) -> PyResult<String> {
    let style = match style {
        "beautified" => PrintStyle::Beautified,
        "reformatted" => PrintStyle::Reformatted,
        "compact" => PrintStyle::Compact,
        other => return Err(PyValueError::new_err(format!("unknown style `{other}`"))),
    };
    Ok(syntax::print(&syntax::parse(source).map_err(value_err)?, style))
}

/// Differential test of two programs on random inputs: returns
/// `"equivalent"`, `"diverged"` or `"inconclusive"`.
#[pyfunction]
#[pyo3(signature = (a, b, trials = 10, seed = 0))]
fn check_equivalence(a: &str, b: &str, trials: usize, seed: u64) -> PyResult<&'static str> {
    let pa = syntax::parse(a).map_err(value_err)?;
    let pb = syntax::parse(b).map_err(value_err)?;
    let arity = interp::entry_arity(&pa).unwrap_or(0);
    let inputs = interp::random_inputs(arity, trials, seed);
    Ok(match interp::check_equivalence(&pa, &pb, &inputs, interp::DEFAULT_STEP_LIMIT) {
        Verdict::Equivalent => "equivalent",
        Verdict::Diverged { .. } => "diverged",
        Verdict::Inconclusive => "inconclusive",
    })
}

/// Distinct variants of `source` (the source itself first) from `n`
/// transform-dropout attempts with the default pipeline.
#[pyfunction]
#[pyo3(signature = (source, n = 20, seed = 0))]
fn transform_dropout(source: &str, n: usize, seed: u64) -> PyResult<Vec<String>> {
    let req = AugmentRequest::with_defaults(n, seed).map_err(value_err)?;
    Ok(dropout(source, &req).map_err(value_err)?.variants)
}

#[pyfunction]
fn token_dissimilarity(a: &str, b: &str) -> PyResult<f64> {
    dissimilarity(a, b).map_err(value_err)
}

#[pyfunction]
fn edit_distance_score(a: &str, b: &str) -> PyResult<f64> {
    eval::edit_distance_score(a, b).map_err(value_err)
}

#[pyfunction]
fn cosine_similarity(u: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
    eval::cosine_similarity(&u, &v).map_err(value_err)
}

/// (AUROC, standard error).
#[pyfunction]
fn auroc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<(f64, f64)> {
    eval::auroc(&scored(scores, labels)?).map_err(value_err)
}

#[pyfunction]
fn average_precision(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    eval::average_precision(&scored(scores, labels)?).map_err(value_err)
}

/// (loss, d loss / d q, d loss / d k_pos).
#[pyfunction]
fn info_nce(q: Vec<f64>, k_pos: Vec<f64>, negatives: Vec<Vec<f64>>, temperature: f64) -> PyResult<(f64, Vec<f64>, Vec<f64>)> {
    if !(temperature > 0.0) {
        return Err(PyValueError::new_err("temperature must be positive"));
    }
    let negs: Vec<&[f64]> = negatives.iter().map(Vec::as_slice).collect();
    let r = contrastive::info_nce(&q, &k_pos, &negs, temperature).map_err(value_err)?;
    Ok((r.loss, r.grad_q, r.grad_k))
}

/// Synthetic methods as (id, family, source) tuples.
#[pyfunction]
fn generate_synthetic_corpus(count: usize, seed: u64) -> PyResult<Vec<(String, String, String)>> {
    if count == 0 {
        return Err(PyValueError::new_err("count must be at least 1"));
    }
    Ok(eval::synth::generate_synthetic_corpus(count, seed).into_iter().map(|m| (m.id, m.family, m.source)).collect())
}

/// Run the command-line interface with `args` (without the program name)
/// and return its exit code.
#[pyfunction]
fn run_cli(args: Vec<String>) -> u8 {
    equivar::cli::main_with_args(std::iter::once("equivar".to_string()).chain(args))
}

/// Unigram subword tokenizer.
#[pyclass(frozen)]
struct Tokenizer {
    inner: tokenizer::Tokenizer,
}

#[pymethods]
impl Tokenizer {
    #[staticmethod]
    #[pyo3(signature = (texts, size = 8000))]
    fn train(texts: Vec<String>, size: usize) -> PyResult<Self> {
        let vocab = tokenizer::train_vocab(&texts, &VocabConfig { size, ..VocabConfig::default() }).map_err(value_err)?;
        Ok(Tokenizer { inner: tokenizer::Tokenizer::new(vocab) })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let vocab = SubwordVocab::load(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Ok(Tokenizer { inner: tokenizer::Tokenizer::new(vocab) })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.vocab().save(&path).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    /// Most likely segmentation.
    fn encode(&self, text: &str) -> Vec<u32> {
        self.inner.encode(text, EncodeMode::Best)
    }

    /// A sampled segmentation; lower `alpha` samples more broadly.
    fn encode_sampled(&self, text: &str, alpha: f64, seed: u64) -> Vec<u32> {
        self.inner.encode(text, EncodeMode::Sample { alpha, seed })
    }

    fn decode(&self, ids: Vec<u32>) -> PyResult<String> {
        self.inner.decode(&ids).map_err(value_err)
    }

    fn __len__(&self) -> usize {
        self.inner.vocab().len()
    }
}

#[pymodule(name = "equivar")]
fn equivar_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(format_program, m)?)?;
    m.add_function(wrap_pyfunction!(check_equivalence, m)?)?;
    m.add_function(wrap_pyfunction!(transform_dropout, m)?)?;
    m.add_function(wrap_pyfunction!(token_dissimilarity, m)?)?;
    m.add_function(wrap_pyfunction!(edit_distance_score, m)?)?;
    m.add_function(wrap_pyfunction!(cosine_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(auroc, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(info_nce, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add_class::<Tokenizer>()?;
    Ok(())
}
