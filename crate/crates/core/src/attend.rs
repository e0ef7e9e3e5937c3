//! Sentence-level attention forward pass and primary-question tagging.
//!
//! Each sentence of a transcript is embedded by an [`EncoderProvider`], offset
//! by a sinusoidal position embedding keyed on its distance from the agent's
//! first reply, and scored against a single key vector. The customer sentence
//! with the highest weight near the agent's first reply is the primary
//! question.

use std::collections::HashMap;
use std::fs;
use std::hash::Hasher;
use std::path::Path;

use fnv::FnvHasher;
use ndarray::{Array1, Array2, ArrayView1};
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::corpus::{RunConfig, Speaker, Transcript};
use crate::error::{Error, Result};

/// Sinusoidal embedding of an already-shifted sentence index.
///
/// Component `2p` is `sin(i / 10000^(2p/d_pos))`, component `2p+1` the
/// matching cosine.
pub fn position_embedding(shifted_index: usize, d_pos: usize) -> Result<Vec<f64>> {
    if d_pos == 0 || !d_pos.is_multiple_of(2) {
        return Err(Error::OddDimension(d_pos));
    }
    let i = shifted_index as f64;
    let mut out = vec![0.0; d_pos];
    for p in 0..d_pos / 2 {
        let angle = i / 10000f64.powf((2 * p) as f64 / d_pos as f64);
        let (s, c) = angle.sin_cos();
        out[2 * p] = s;
        out[2 * p + 1] = c;
    }
    Ok(out)
}

/// Maps an offset from the agent's first sentence into `[0, 2 * n_as]`.
pub fn shift_index(raw_offset: i64, n_as: usize) -> Result<usize> {
    let n = n_as as i64;
    if raw_offset < -n || raw_offset > n {
        return Err(Error::OffsetOutOfRange {
            offset: raw_offset,
            n_as,
        });
    }
    Ok((raw_offset + n) as usize)
}

/// Adds the position embedding of `shifted_indices[i]` to row `i`.
pub fn add_position(q_prime: &Array2<f64>, shifted_indices: &[usize]) -> Result<Array2<f64>> {
    if shifted_indices.len() != q_prime.nrows() {
        return Err(Error::LengthMismatch {
            expected: q_prime.nrows(),
            actual: shifted_indices.len(),
        });
    }
    let mut q = q_prime.clone();
    for (mut row, &idx) in q.rows_mut().into_iter().zip(shifted_indices) {
        let e = position_embedding(idx, row.len())?;
        row.iter_mut().zip(e).for_each(|(x, e)| *x += e);
    }
    Ok(q)
}

/// The single learned key of the sentence attention layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionHead {
    d_k: usize,
    key: Vec<f64>,
}

impl AttentionHead {
    pub fn new(key: Vec<f64>) -> Result<Self> {
        if key.is_empty() {
            return Err(Error::ShapeMismatch("attention key is empty".into()));
        }
        if key.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue("attention key".into()));
        }
        Ok(AttentionHead {
            d_k: key.len(),
            key,
        })
    }

    /// Standard-normal key, reproducible from `seed`.
    pub fn random(d_k: usize, seed: u64) -> Self {
        let mut rng = SplitMix64::seed_from_u64(seed);
        let key = (0..d_k).map(|_| StandardNormal.sample(&mut rng)).collect();
        AttentionHead { d_k, key }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let head: AttentionHead =
            serde_json::from_str(&raw).map_err(|e| Error::MalformedRecord {
                line: e.line(),
                reason: e.to_string(),
            })?;
        if head.d_k != head.key.len() {
            return Err(Error::ShapeMismatch(format!(
                "d_k = {} but key has {} components",
                head.d_k,
                head.key.len()
            )));
        }
        AttentionHead::new(head.key)
    }

    pub fn d_k(&self) -> usize {
        self.d_k
    }

    pub fn key(&self) -> &[f64] {
        &self.key
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionResult {
    /// Softmax weight per sentence.
    pub sigma: Vec<f64>,
    /// Weighted sum of value rows.
    pub chi: Vec<f64>,
}

/// Numerically stable softmax (max subtracted before exponentiation).
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= total);
    out
}

/// `sigma = softmax(Q K / sqrt(d_k))`, `chi = sigma . V`.
pub fn attention(
    q: &Array2<f64>,
    head: &AttentionHead,
    v: &Array2<f64>,
) -> Result<AttentionResult> {
    if q.dim() != v.dim() {
        return Err(Error::ShapeMismatch(format!(
            "query is {:?} but value is {:?}",
            q.dim(),
            v.dim()
        )));
    }
    if q.ncols() != head.d_k {
        return Err(Error::ShapeMismatch(format!(
            "sentence dimension {} but d_k = {}",
            q.ncols(),
            head.d_k
        )));
    }
    if q.nrows() == 0 {
        return Err(Error::ShapeMismatch("no sentences".into()));
    }
    let key = ArrayView1::from(&head.key[..]);
    let scale = (head.d_k as f64).sqrt();
    let scores: Vec<f64> = q.rows().into_iter().map(|r| r.dot(&key) / scale).collect();
    let sigma = softmax(&scores);
    let chi: Array1<f64> = Array1::from(sigma.clone()).dot(v);
    Ok(AttentionResult {
        sigma,
        chi: chi.to_vec(),
    })
}

/// Highest-weight customer sentence within `n` steps of the agent's first
/// sentence. Ties go to the smaller index.
pub fn tag_primary_question(
    sigma: &[f64],
    speakers: &[Speaker],
    agent_first_index: usize,
    n: usize,
) -> Result<usize> {
    if sigma.len() != speakers.len() {
        return Err(Error::LengthMismatch {
            expected: speakers.len(),
            actual: sigma.len(),
        });
    }
    if agent_first_index >= speakers.len() {
        return Err(Error::LengthMismatch {
            expected: speakers.len(),
            actual: agent_first_index,
        });
    }
    let lo = agent_first_index.saturating_sub(n);
    let hi = agent_first_index.saturating_add(n).min(speakers.len() - 1);
    let mut best: Option<usize> = None;
    for j in lo..=hi {
        if speakers[j] != Speaker::Customer {
            continue;
        }
        match best {
            Some(b) if sigma[j] <= sigma[b] => {}
            _ => best = Some(j),
        }
    }
    best.ok_or(Error::NoCandidate)
}

/// Lowercased alphanumeric word tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric() && c != '\'')
        .map(|t| t.trim_matches('\'').to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Sentence encoder seam. Any pretrained model plugs in here; it must be
/// deterministic for a fixed input.
pub trait EncoderProvider: Send + Sync {
    /// Output dimension.
    fn dim(&self) -> usize;

    fn encode(&self, tokens: &[String]) -> Result<Vec<f64>>;
}

/// Signed feature hashing of unigrams, L2-normalised.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashingEncoder {
    dim: usize,
    seed: u64,
}

impl HashingEncoder {
    pub fn new(dim: usize, seed: u64) -> Self {
        HashingEncoder { dim, seed }
    }
}

impl EncoderProvider for HashingEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, tokens: &[String]) -> Result<Vec<f64>> {
        if self.dim == 0 {
            return Err(Error::EncoderFailure("dimension is zero".into()));
        }
        let mut v = vec![0.0; self.dim];
        for tok in tokens {
            let mut h = FnvHasher::with_key(0xcbf2_9ce4_8422_2325 ^ self.seed);
            h.write(tok.as_bytes());
            let h = h.finish();
            let slot = (h % self.dim as u64) as usize;
            v[slot] += if h >> 63 == 0 { 1.0 } else { -1.0 };
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }
}

/// Precomputed sentence vectors keyed by their normalised token sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupEncoder {
    dim: usize,
    table: HashMap<String, Vec<f64>>,
}

impl LookupEncoder {
    pub fn new(vectors: HashMap<String, Vec<f64>>) -> Result<Self> {
        let dim = vectors.values().next().map(Vec::len).unwrap_or(0);
        let mut table = HashMap::with_capacity(vectors.len());
        for (text, v) in vectors {
            if v.len() != dim {
                return Err(Error::DimensionMismatch(text));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteValue(text));
            }
            table.insert(tokenize(&text).join(" "), v);
        }
        Ok(LookupEncoder { dim, table })
    }
}

impl EncoderProvider for LookupEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, tokens: &[String]) -> Result<Vec<f64>> {
        let key = tokens.join(" ");
        self.table
            .get(&key)
            .cloned()
            .ok_or_else(|| Error::EncoderFailure(format!("no vector for sentence {key:?}")))
    }
}

/// Encoder description as stored on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EncoderSpec {
    Hashing {
        dim: usize,
        #[serde(default)]
        seed: u64,
    },
    Lookup {
        vectors: HashMap<String, Vec<f64>>,
    },
}

impl EncoderSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&raw).map_err(|e| Error::MalformedRecord {
            line: e.line(),
            reason: e.to_string(),
        })
    }

    pub fn build(self) -> Result<Box<dyn EncoderProvider>> {
        Ok(match self {
            EncoderSpec::Hashing { dim, seed } => Box::new(HashingEncoder::new(dim, seed)),
            EncoderSpec::Lookup { vectors } => Box::new(LookupEncoder::new(vectors)?),
        })
    }
}

/// Result of tagging one transcript.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedQuestion {
    pub index: usize,
    /// Encoder output of the tagged sentence, without position embedding.
    pub vector: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// Encode, add position embeddings, attend and pick the primary question.
/// Offsets are shifted by the transcript length.
pub fn tag_transcript(
    t: &Transcript,
    encoder: &dyn EncoderProvider,
    head: &AttentionHead,
    cfg: &RunConfig,
) -> Result<TaggedQuestion> {
    let n_as = t.sentences.len();
    let d = encoder.dim();
    let mut q_prime = Array2::zeros((n_as, d));
    for (mut row, s) in q_prime.rows_mut().into_iter().zip(&t.sentences) {
        let v = encoder.encode(&tokenize(&s.text))?;
        if v.len() != d {
            return Err(Error::EncoderFailure(format!(
                "encoder returned {} components, expected {d}",
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::EncoderFailure(
                "encoder returned a non-finite value".into(),
            ));
        }
        row.assign(&ArrayView1::from(&v[..]));
    }
    let shifted = t
        .sentences
        .iter()
        .map(|s| shift_index(s.index as i64 - t.agent_first_index as i64, n_as))
        .collect::<Result<Vec<_>>>()?;
    let q = add_position(&q_prime, &shifted)?;
    let att = attention(&q, head, &q)?;
    let index = tag_primary_question(
        &att.sigma,
        &t.speakers(),
        t.agent_first_index,
        cfg.tag_window_n,
    )?;
    Ok(TaggedQuestion {
        index,
        vector: q_prime.row(index).to_vec(),
        sigma: att.sigma,
    })
}
