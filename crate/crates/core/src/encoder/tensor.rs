use std::ops::Range;

use crate::error::{shape, Error, Result};

/// Contextual token vectors, `m x d`, row-major. Row 0 is the `[CLS]` vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextualEmbeddings {
    m: usize,
    d: usize,
    data: Vec<f64>,
}

impl ContextualEmbeddings {
    pub fn new(m: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if m < 2 {
            return Err(shape(format!(
                "need [CLS] plus at least one token, got {m} rows"
            )));
        }
        if d == 0 || data.len() != m * d {
            return Err(shape(format!("{} values for a {m}x{d} matrix", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("contextual embeddings".into()));
        }
        Ok(Self { m, d, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(shape("ragged rows"));
        }
        Self::new(rows.len(), d, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn cls(&self) -> &[f64] {
        self.row(0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// Span-grouped token vectors padded to `r x l x d`.
///
/// Valid slots form a prefix of each span row, valid spans form a prefix of
/// the rows, and every masked slot holds zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanTensor {
    pub(crate) r: usize,
    pub(crate) l: usize,
    pub(crate) d: usize,
    pub(crate) data: Vec<f64>,
    pub(crate) mask: Vec<bool>,
    pub(crate) span_lengths: Vec<usize>,
    pub(crate) span_count: usize,
    /// Source row in `T` of every valid slot.
    pub(crate) positions: Vec<usize>,
}

impl SpanTensor {
    pub fn max_spans(&self) -> usize {
        self.r
    }

    pub fn max_span_len(&self) -> usize {
        self.l
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn span_count(&self) -> usize {
        self.span_count
    }

    pub fn span_lengths(&self) -> &[usize] {
        &self.span_lengths
    }

    pub fn mask(&self, span: usize, slot: usize) -> bool {
        self.mask[span * self.l + slot]
    }

    pub fn slot(&self, span: usize, slot: usize) -> &[f64] {
        let at = (span * self.l + slot) * self.d;
        &self.data[at..at + self.d]
    }

    /// The valid rows of span `i`, `len x d`.
    pub fn span_rows(&self, i: usize) -> &[f64] {
        let at = i * self.l * self.d;
        &self.data[at..at + self.span_lengths[i] * self.d]
    }

    pub(crate) fn span_positions(&self, i: usize) -> &[usize] {
        &self.positions[i * self.l..i * self.l + self.span_lengths[i]]
    }
}

/// Copies the tokens of each subword range into a padded span tensor.
///
/// Spans past `r` and tokens past `l` within a span are dropped.
/// `boundaries` must not include position 0.
pub fn gather_spans(
    t: &ContextualEmbeddings,
    boundaries: &[Range<usize>],
    r: usize,
    l: usize,
) -> Result<SpanTensor> {
    if r == 0 || l == 0 {
        return Err(Error::Argument(format!(
            "r and l must be positive, got r={r} l={l}"
        )));
    }
    for b in boundaries {
        if b.start == 0 || b.end <= b.start || b.end > t.rows() {
            return Err(shape(format!(
                "span [{}, {}) invalid for {} rows with [CLS] at 0",
                b.start,
                b.end,
                t.rows()
            )));
        }
    }
    if boundaries.is_empty() {
        return Err(Error::EmptySpans);
    }
    let d = t.dim();
    let mut st = SpanTensor {
        r,
        l,
        d,
        data: vec![0.0; r * l * d],
        mask: vec![false; r * l],
        span_lengths: vec![0; r],
        span_count: boundaries.len().min(r),
        positions: vec![0; r * l],
    };
    for (i, b) in boundaries.iter().take(r).enumerate() {
        let len = b.len().min(l);
        st.span_lengths[i] = len;
        for (j, pos) in b.clone().take(len).enumerate() {
            let slot = i * l + j;
            st.mask[slot] = true;
            st.positions[slot] = pos;
            st.data[slot * d..(slot + 1) * d].copy_from_slice(t.row(pos));
        }
    }
    Ok(st)
}

/// Stage-one output: one vector per span row plus which rows are valid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanVectors {
    pub(crate) r: usize,
    pub(crate) d: usize,
    pub(crate) data: Vec<f64>,
    pub(crate) valid: Vec<bool>,
}

impl SpanVectors {
    pub fn new(r: usize, d: usize, data: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        if data.len() != r * d || valid.len() != r {
            return Err(shape(format!(
                "span vectors: {} values, {} flags for r={r} d={d}",
                data.len(),
                valid.len()
            )));
        }
        Ok(Self { r, d, data, valid })
    }

    pub fn rows(&self) -> usize {
        self.r
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.valid[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn valid_prefix(&self) -> usize {
        self.valid.iter().take_while(|&&v| v).count()
    }
}

/// `s* = [s ; t1]`, length `2d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceRepresentation {
    d: usize,
    data: Vec<f64>,
}

impl SentenceRepresentation {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn span_part(&self) -> &[f64] {
        &self.data[..self.d]
    }

    pub fn cls_part(&self) -> &[f64] {
        &self.data[self.d..]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

pub fn concat_cls(s: &[f64], t: &ContextualEmbeddings) -> Result<SentenceRepresentation> {
    if s.len() != t.dim() {
        return Err(shape(format!(
            "s has {} components, t1 has {}",
            s.len(),
            t.dim()
        )));
    }
    let mut data = Vec::with_capacity(2 * s.len());
    data.extend_from_slice(s);
    data.extend_from_slice(t.cls());
    Ok(SentenceRepresentation { d: s.len(), data })
}
