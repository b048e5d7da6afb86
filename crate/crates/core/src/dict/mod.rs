//! Frequency-thresholded word n-gram dictionary.
//!
//! A dictionary stores word n-grams of length `2..=max_n` whose corpus count
//! reached `min_count`. Unigrams are never stored: an unmatched word already
//! forms a span of its own during segmentation.

mod count;
mod format;

use std::collections::HashMap;

pub use count::{
    count_ngrams, count_ngrams_lines, feed_reader, CountConfig, MergedCounts, NgramCounter,
    NgramCounts,
};

use crate::error::{Error, Result};
use crate::text::normalize_token;

pub const DEFAULT_MAX_N: usize = 5;
pub const DEFAULT_MIN_COUNT: u64 = 10;

/// A normalized word n-gram with at least two tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ngram {
    tokens: Vec<String>,
}

impl Ngram {
    /// Normalizes `tokens` and checks the length bounds.
    pub fn new<S: AsRef<str>>(tokens: &[S], max_n: usize) -> Result<Self> {
        let tokens: Vec<String> = tokens.iter().map(|t| normalize_token(t.as_ref())).collect();
        if tokens.len() < 2 || tokens.len() > max_n {
            return Err(Error::Argument(format!(
                "n-gram length {} outside [2, {max_n}]",
                tokens.len()
            )));
        }
        if let Some(bad) = tokens
            .iter()
            .find(|t| t.is_empty() || t.contains(char::is_whitespace))
        {
            return Err(Error::Argument(format!("invalid n-gram token {bad:?}")));
        }
        Ok(Self { tokens })
    }

    pub(crate) fn from_key(key: &str) -> Self {
        Self {
            tokens: key.split(' ').map(str::to_owned).collect(),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Space-joined form, the key used for storage and ordering.
    pub fn key(&self) -> String {
        self.tokens.join(" ")
    }
}

impl std::fmt::Display for Ngram {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.key())
    }
}

/// Immutable n-gram dictionary. Safe to share across threads for lookups.
///
/// Equality compares `max_n`, `min_count` and entries; the source fingerprint
/// is informational and is not part of the file format.
#[derive(Debug, Clone)]
pub struct NgramDictionary {
    max_n: usize,
    min_count: u64,
    entries: HashMap<String, u64>,
    source_fingerprint: String,
}

impl PartialEq for NgramDictionary {
    fn eq(&self, other: &Self) -> bool {
        self.max_n == other.max_n
            && self.min_count == other.min_count
            && self.entries == other.entries
    }
}

impl Eq for NgramDictionary {}

impl NgramDictionary {
    pub fn empty(max_n: usize, min_count: u64) -> Self {
        Self {
            max_n,
            min_count,
            entries: HashMap::new(),
            source_fingerprint: String::new(),
        }
    }

    /// Builds a dictionary directly from `(n-gram, count)` pairs, keeping
    /// those that reach `min_count`.
    pub fn from_entries<I, S>(max_n: usize, min_count: u64, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, u64)>,
        S: AsRef<str>,
    {
        if max_n < 2 {
            return Err(Error::Argument(format!(
                "max_n must be at least 2, got {max_n}"
            )));
        }
        let mut dict = Self::empty(max_n, min_count);
        for (phrase, count) in entries {
            let words: Vec<&str> = phrase.as_ref().split_whitespace().collect();
            let ngram = Ngram::new(&words, max_n)?;
            if count >= min_count && count > 0 {
                *dict.entries.entry(ngram.key()).or_insert(0) += count;
            }
        }
        Ok(dict)
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn source_fingerprint(&self) -> &str {
        &self.source_fingerprint
    }

    pub fn with_fingerprint(mut self, fingerprint: impl Into<String>) -> Self {
        self.source_fingerprint = fingerprint.into();
        self
    }

    /// True iff the normalized `tokens` form a stored n-gram.
    pub fn contains<S: AsRef<str>>(&self, tokens: &[S]) -> bool {
        self.count(tokens).is_some()
    }

    pub fn count<S: AsRef<str>>(&self, tokens: &[S]) -> Option<u64> {
        if tokens.len() < 2 || tokens.len() > self.max_n {
            return None;
        }
        let key = tokens
            .iter()
            .map(|t| normalize_token(t.as_ref()))
            .collect::<Vec<_>>()
            .join(" ");
        self.entries.get(&key).copied()
    }

    /// Lookup by an already normalized, space-joined key.
    #[inline]
    pub fn contains_key(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Entries in canonical order: descending count, then ascending key.
    pub fn sorted_entries(&self) -> Vec<(&str, u64)> {
        let mut v: Vec<(&str, u64)> = self.entries.iter().map(|(k, &c)| (k.as_str(), c)).collect();
        v.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v
    }

    pub fn ngrams(&self) -> impl Iterator<Item = (Ngram, u64)> + '_ {
        self.entries.iter().map(|(k, &c)| (Ngram::from_key(k), c))
    }

    /// Keeps the `target` highest-count entries; ties go to the smaller key.
    pub fn prune_to_size(&self, target: usize) -> Self {
        if target >= self.entries.len() {
            return self.clone();
        }
        let entries = self
            .sorted_entries()
            .into_iter()
            .take(target)
            .map(|(k, c)| (k.to_owned(), c))
            .collect();
        Self {
            max_n: self.max_n,
            min_count: self.min_count,
            entries,
            source_fingerprint: self.source_fingerprint.clone(),
        }
    }

    pub(crate) fn insert_raw(&mut self, key: String, count: u64) -> bool {
        self.entries.insert(key, count).is_none()
    }
}

/// Keeps exactly the entries of `counts` with count `>= min_count`.
pub fn build_dictionary(counts: &NgramCounts, min_count: u64) -> Result<NgramDictionary> {
    if min_count < 1 {
        return Err(Error::Argument("min_count must be at least 1".into()));
    }
    let mut dict = NgramDictionary::empty(counts.max_n(), min_count)
        .with_fingerprint(counts.fingerprint().to_owned());
    for (key, count) in counts.iter() {
        if count >= min_count {
            dict.insert_raw(key.to_owned(), count);
        }
    }
    Ok(dict)
}

/// Streams a sorted merge of counts into a dictionary without materializing
/// the full count table.
pub fn build_dictionary_streaming(merged: MergedCounts, min_count: u64) -> Result<NgramDictionary> {
    if min_count < 1 {
        return Err(Error::Argument("min_count must be at least 1".into()));
    }
    let mut dict = NgramDictionary::empty(merged.max_n(), min_count)
        .with_fingerprint(merged.fingerprint().to_owned());
    for item in merged {
        let (key, count) = item?;
        if count >= min_count {
            dict.insert_raw(key, count);
        }
    }
    Ok(dict)
}
