//! Frozen sources of contextual embeddings.
//!
//! [`toy_encode`] stands in for a pre-trained encoder: every word gets a
//! hashed unit vector and neighbours are mixed in for mild contextuality.
//! Externally computed embeddings travel in the `SPFE` binary format.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::ContextualEmbeddings;
use crate::error::{shape, Error, Result};
use crate::rng::{hash_bytes, mix64};

const WORD_DOMAIN: u64 = 0x5750_4f52_4400_0001;
const CLS_DOMAIN: u64 = 0x434c_5300_0000_0002;
const COUNTER_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyEncoderConfig {
    pub d: usize,
    pub seed: u64,
    /// Weight of each neighbour in `[0, 1)`.
    pub context_mix: f64,
}

impl Default for ToyEncoderConfig {
    fn default() -> Self {
        Self {
            d: 32,
            seed: 42,
            context_mix: 0.5,
        }
    }
}

impl ToyEncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::Argument(format!(
                "toy encoder needs d >= 2, got {}",
                self.d
            )));
        }
        if !(0.0..1.0).contains(&self.context_mix) {
            return Err(Error::Argument(format!(
                "context_mix must be in [0, 1), got {}",
                self.context_mix
            )));
        }
        Ok(())
    }
}

/// Expands a 64-bit key into `d` values in `(-1, 1)` by counter-mode
/// rehashing, then scales to unit length.
fn unit_vector(key: u64, d: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..d as u64)
        .map(|j| {
            let bits = mix64(key.wrapping_add((j + 1).wrapping_mul(COUNTER_GAMMA))) >> 11;
            (bits as f64 + 0.5) / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect();
    normalize(&mut v);
    v
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v {
            *x /= norm;
        }
    }
}

/// Static (context-free) embedding of one normalized word.
pub fn word_vector(word: &str, config: &ToyEncoderConfig) -> Vec<f64> {
    unit_vector(
        hash_bytes(config.seed ^ WORD_DOMAIN, word.as_bytes()),
        config.d,
    )
}

pub fn cls_vector(config: &ToyEncoderConfig) -> Vec<f64> {
    unit_vector(hash_bytes(config.seed ^ CLS_DOMAIN, b"[CLS]"), config.d)
}

/// `[CLS]` followed by `t_i = normalize(e_i + mix * (e_{i-1} + e_{i+1}))`.
pub fn toy_encode<S: AsRef<str>>(
    words: &[S],
    config: &ToyEncoderConfig,
) -> Result<ContextualEmbeddings> {
    config.validate()?;
    if words.is_empty() {
        return Err(Error::EmptySentence);
    }
    let d = config.d;
    let base: Vec<Vec<f64>> = words
        .iter()
        .map(|w| word_vector(w.as_ref(), config))
        .collect();
    let mut data = Vec::with_capacity((words.len() + 1) * d);
    data.extend(cls_vector(config));
    for i in 0..base.len() {
        let mut t = base[i].clone();
        if config.context_mix != 0.0 {
            for neighbour in [i.checked_sub(1), Some(i + 1)].into_iter().flatten() {
                if let Some(e) = base.get(neighbour) {
                    for (x, y) in t.iter_mut().zip(e) {
                        *x += config.context_mix * y;
                    }
                }
            }
            normalize(&mut t);
        }
        data.extend(t);
    }
    ContextualEmbeddings::new(words.len() + 1, d, data)
}

/// One sentence worth of single-precision embeddings, `rows x cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_embeddings(t: &ContextualEmbeddings) -> Self {
        Self {
            rows: t.rows(),
            cols: t.dim(),
            data: t.as_slice().iter().map(|&x| x as f32).collect(),
        }
    }

    pub fn to_embeddings(&self) -> Result<ContextualEmbeddings> {
        ContextualEmbeddings::new(
            self.rows,
            self.cols,
            self.data.iter().map(|&x| x as f64).collect(),
        )
    }
}

const MAGIC: &[u8; 4] = b"SPFE";
const VERSION: u32 = 1;

/// Writes the `SPFE` container: magic, `u32` version, `u32 d`, `u32`
/// sentence count, then per sentence `u32 m` and `m * d` little-endian
/// `f32` values.
pub fn write_embeddings<W: Write>(mut w: W, d: usize, sentences: &[EmbeddingMatrix]) -> Result<()> {
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::Argument(format!("{what} {v} exceeds u32")))
    };
    if let Some(bad) = sentences.iter().find(|s| s.cols != d) {
        return Err(shape(format!(
            "matrix with {} columns in a d={d} file",
            bad.cols
        )));
    }
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&to_u32(d, "d")?.to_le_bytes())?;
    w.write_all(&to_u32(sentences.len(), "sentence count")?.to_le_bytes())?;
    for s in sentences {
        w.write_all(&to_u32(s.rows, "row count")?.to_le_bytes())?;
        for v in &s.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.bytes.len() - self.at < n {
            return Err(Error::Length(format!(
                "{what} needs {n} bytes at offset {}, {} remain",
                self.at,
                self.bytes.len() - self.at
            )));
        }
        let out = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }
}

/// Reads an `SPFE` container, returning `d` and the matrices.
pub fn read_embeddings<R: Read>(mut r: R) -> Result<(usize, Vec<EmbeddingMatrix>)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut cur = Cursor {
        bytes: &bytes,
        at: 0,
    };
    if cur.take(4, "magic")? != MAGIC {
        return Err(Error::Format("bad magic, expected SPFE".into()));
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let d = cur.u32("d")? as usize;
    let count = cur.u32("sentence count")? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for i in 0..count {
        let m = cur.u32("row count")? as usize;
        let raw = cur.take(m * d * 4, &format!("sentence {i}"))?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        out.push(EmbeddingMatrix {
            rows: m,
            cols: d,
            data,
        });
    }
    if cur.at != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes",
            bytes.len() - cur.at
        )));
    }
    Ok((d, out))
}

pub fn save_embeddings(
    path: impl AsRef<Path>,
    d: usize,
    sentences: &[EmbeddingMatrix],
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::from(e).in_file(path))?;
    write_embeddings(BufWriter::new(file), d, sentences).map_err(|e| e.in_file(path))
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<(usize, Vec<EmbeddingMatrix>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
    read_embeddings(BufReader::new(file)).map_err(|e| e.in_file(path))
}
