//! Sentence segmentation into contiguous word spans.
//!
//! Three sources of spans are supported: greedy longest match against an
//! [`NgramDictionary`], seeded random span lengths, and externally produced
//! segmentations read from JSON lines. Word spans are projected onto subword
//! positions through a [`SubwordAlignment`].

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dict::NgramDictionary;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::text::normalize_words;

/// A normalized, non-empty sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordSequence {
    words: Vec<String>,
    raw: String,
}

impl WordSequence {
    pub fn from_words(words: Vec<String>, raw: impl Into<String>) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::EmptySentence);
        }
        if words.iter().any(|w| w.is_empty()) {
            return Err(Error::Argument("empty word in sentence".into()));
        }
        Ok(Self {
            words,
            raw: raw.into(),
        })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

pub fn normalize_and_tokenize(text: &str) -> Result<WordSequence> {
    WordSequence::from_words(normalize_words(text), text)
}

/// Contiguous, covering, non-overlapping half-open word ranges.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpanPartition {
    spans: Vec<Range<usize>>,
}

impl SpanPartition {
    /// Validates that `spans` exactly tile `0..word_count`.
    pub fn new(spans: Vec<Range<usize>>, word_count: usize) -> Result<Self> {
        if let Some(msg) = partition_violation(&spans, word_count) {
            return Err(Error::Validation {
                record: 0,
                message: msg,
            });
        }
        Ok(Self { spans })
    }

    /// One span per word.
    pub fn singletons(word_count: usize) -> Self {
        Self {
            spans: (0..word_count).map(|i| i..i + 1).collect(),
        }
    }

    pub fn spans(&self) -> &[Range<usize>] {
        &self.spans
    }

    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn word_count(&self) -> usize {
        self.spans.last().map_or(0, |s| s.end)
    }

    /// Pairs of `[start, end]` as written to segmentation files.
    pub fn to_pairs(&self) -> Vec<[usize; 2]> {
        self.spans.iter().map(|s| [s.start, s.end]).collect()
    }

    /// Shifts every span by `offset` words and appends `other` after `self`.
    pub fn concat(&self, other: &SpanPartition) -> SpanPartition {
        let offset = self.word_count();
        let mut spans = self.spans.clone();
        spans.extend(other.spans.iter().map(|s| s.start + offset..s.end + offset));
        SpanPartition { spans }
    }
}

fn partition_violation(spans: &[Range<usize>], word_count: usize) -> Option<String> {
    if word_count == 0 {
        return Some("partition over zero words".into());
    }
    let mut expected = 0;
    for (i, s) in spans.iter().enumerate() {
        if s.start != expected {
            return Some(format!(
                "span {i} starts at {} but previous span ends at {expected}",
                s.start
            ));
        }
        if s.end <= s.start {
            return Some(format!("span {i} [{}, {}) is empty", s.start, s.end));
        }
        expected = s.end;
    }
    if expected != word_count {
        return Some(format!("spans cover {expected} of {word_count} words"));
    }
    None
}

/// Greedy longest-match segmentation.
///
/// From the current position the longest dictionary n-gram starting there is
/// taken as one span; a word with no match becomes a singleton.
pub fn segment_greedy(dict: &NgramDictionary, words: &WordSequence) -> SpanPartition {
    let w = words.words();
    let n = w.len();
    let mut spans = Vec::new();
    let mut key = String::new();
    let mut p = 0;
    while p < n {
        let longest = n - p;
        let mut best = 1;
        if !dict.is_empty() {
            for len in (2..=dict.max_n().min(longest)).rev() {
                key.clear();
                for (i, word) in w[p..p + len].iter().enumerate() {
                    if i > 0 {
                        key.push(' ');
                    }
                    key.push_str(word);
                }
                if dict.contains_key(&key) {
                    best = len;
                    break;
                }
            }
        }
        spans.push(p..p + best);
        p += best;
    }
    SpanPartition { spans }
}

/// Random segmentation: span lengths drawn uniformly from `1..=max_len` by a
/// SplitMix64 stream seeded with `seed`; the last span is clipped.
pub fn segment_random(words: &WordSequence, seed: u64, max_len: usize) -> Result<SpanPartition> {
    if max_len == 0 {
        return Err(Error::Argument("max_len must be at least 1".into()));
    }
    let n = words.len();
    let mut rng = SplitMix64::new(seed);
    let mut spans = Vec::new();
    let mut p = 0;
    while p < n {
        let len = 1 + rng.below(max_len as u64) as usize;
        let end = (p + len).min(n);
        spans.push(p..end);
        p = end;
    }
    Ok(SpanPartition { spans })
}

/// One line of a segmentation file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentationRecord {
    pub tokens: Vec<String>,
    pub spans: Vec<[usize; 2]>,
}

impl SegmentationRecord {
    pub fn new(words: &WordSequence, partition: &SpanPartition) -> Self {
        Self {
            tokens: words.words().to_vec(),
            spans: partition.to_pairs(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }

    fn validate(self, record: usize) -> Result<(WordSequence, SpanPartition)> {
        let invalid = |message: String| Error::Validation { record, message };
        let raw = self.tokens.join(" ");
        let words =
            WordSequence::from_words(self.tokens, raw).map_err(|e| invalid(e.to_string()))?;
        let spans: Vec<Range<usize>> = self.spans.iter().map(|[a, b]| *a..*b).collect();
        if let Some(msg) = partition_violation(&spans, words.len()) {
            return Err(invalid(msg));
        }
        Ok((words, SpanPartition { spans }))
    }
}

/// Reads JSON-lines segmentation records, validating each partition.
/// Blank lines are skipped; record numbers are 1-based line numbers.
pub fn read_segmentation<R: BufRead>(reader: R) -> Result<Vec<(WordSequence, SpanPartition)>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: SegmentationRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        out.push(record.validate(line_no)?);
    }
    Ok(out)
}

pub fn load_external_segmentation(
    path: impl AsRef<Path>,
) -> Result<Vec<(WordSequence, SpanPartition)>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
    read_segmentation(BufReader::new(file)).map_err(|e| e.in_file(path))
}

pub fn write_segmentation<W: Write>(
    mut w: W,
    records: &[(WordSequence, SpanPartition)],
) -> Result<()> {
    for (words, partition) in records {
        writeln!(w, "{}", SegmentationRecord::new(words, partition).to_json())?;
    }
    w.flush()?;
    Ok(())
}

/// Maps each word to its half-open range of subword positions.
///
/// Ranges are relative to the first non-special position; `cls_offset` counts
/// the special tokens in front of them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordAlignment {
    ranges: Vec<Range<usize>>,
    cls_offset: usize,
}

impl SubwordAlignment {
    pub fn new(ranges: Vec<Range<usize>>, cls_offset: usize) -> Result<Self> {
        let mut expected = 0;
        for (i, r) in ranges.iter().enumerate() {
            if r.start != expected || r.end <= r.start {
                return Err(Error::Alignment(format!(
                    "word {i} maps to [{}, {}), expected a non-empty range starting at {expected}",
                    r.start, r.end
                )));
            }
            expected = r.end;
        }
        Ok(Self { ranges, cls_offset })
    }

    /// One subword per word.
    pub fn identity(word_count: usize, cls_offset: usize) -> Self {
        Self {
            ranges: (0..word_count).map(|i| i..i + 1).collect(),
            cls_offset,
        }
    }

    /// Builds an alignment from per-word subword counts.
    pub fn from_counts(counts: &[usize], cls_offset: usize) -> Result<Self> {
        let mut start = 0;
        let ranges = counts
            .iter()
            .map(|&c| {
                let r = start..start + c;
                start += c;
                r
            })
            .collect();
        Self::new(ranges, cls_offset)
    }

    pub fn word_count(&self) -> usize {
        self.ranges.len()
    }

    pub fn cls_offset(&self) -> usize {
        self.cls_offset
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    /// Number of non-special subword positions.
    pub fn subword_count(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }
}

/// Maps word spans to absolute subword ranges: `[a, b)` becomes
/// `[ranges[a].start, ranges[b-1].end)` shifted by the special-token offset.
pub fn project_to_subwords(
    partition: &SpanPartition,
    alignment: &SubwordAlignment,
) -> Result<Vec<Range<usize>>> {
    if partition.word_count() != alignment.word_count() {
        return Err(Error::Alignment(format!(
            "partition covers {} words but alignment describes {}",
            partition.word_count(),
            alignment.word_count()
        )));
    }
    let off = alignment.cls_offset;
    Ok(partition
        .spans()
        .iter()
        .map(|s| alignment.ranges[s.start].start + off..alignment.ranges[s.end - 1].end + off)
        .collect())
}

/// Span-count summary over a set of sentences.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanStats {
    pub dict_size: usize,
    pub sentences: usize,
    pub total_spans: usize,
    /// Spans per sentence to number of sentences.
    pub histogram: BTreeMap<usize, usize>,
}

impl SpanStats {
    pub fn avg_spans(&self) -> f64 {
        self.total_spans as f64 / self.sentences as f64
    }

    /// `dict_size<TAB>avg_spans<TAB>sentences`
    pub fn report_line(&self) -> String {
        format!(
            "{}\t{:.6}\t{}",
            self.dict_size,
            self.avg_spans(),
            self.sentences
        )
    }
}

pub const STATS_HEADER: &str = "dict_size\tavg_spans\tsentences";

/// Greedy span counts over normalized sentences.
pub fn span_stats(sentences: &[WordSequence], dict: &NgramDictionary) -> Result<SpanStats> {
    if sentences.is_empty() {
        return Err(Error::EmptyInput("no sentences".into()));
    }
    let mut histogram = BTreeMap::new();
    let mut total = 0;
    for s in sentences {
        let n = segment_greedy(dict, s).len();
        total += n;
        *histogram.entry(n).or_insert(0) += 1;
    }
    Ok(SpanStats {
        dict_size: dict.size(),
        sentences: sentences.len(),
        total_spans: total,
        histogram,
    })
}

/// Normalizes raw lines, skipping blank ones.
pub fn sentences_from_lines<I, S>(lines: I) -> Vec<WordSequence>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    lines
        .into_iter()
        .filter_map(|l| normalize_and_tokenize(l.as_ref()).ok())
        .collect()
}

/// Span statistics for the dictionary pruned to each of `sizes`, in order.
pub fn span_count_curve(
    sentences: &[WordSequence],
    dict: &NgramDictionary,
    sizes: &[usize],
) -> Result<Vec<SpanStats>> {
    sizes
        .iter()
        .map(|&size| span_stats(sentences, &dict.prune_to_size(size)))
        .collect()
}
