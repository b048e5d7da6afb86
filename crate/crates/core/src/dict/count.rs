//! Exact n-gram counting with sorted spill files.
//!
//! The corpus is consumed line by line. Once a shard has seen `shard_budget`
//! tokens its counts are sorted and written to a spill file; the spills are
//! then combined by a k-way merge that sums equal keys. Nothing is pruned
//! before the merge, so the result is exact regardless of the budget.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Lines, Write};
use std::path::PathBuf;

use rayon::prelude::*;
use tempfile::TempDir;

use crate::error::{Error, Result};
use crate::rng::hash_bytes;
use crate::text::normalize_words;

#[derive(Debug, Clone)]
pub struct CountConfig {
    pub max_n: usize,
    /// Tokens per in-memory shard before spilling to disk.
    pub shard_budget: usize,
    /// Shards counted concurrently.
    pub threads: usize,
    /// Parent directory for spill files; the system temp dir when `None`.
    pub spill_dir: Option<PathBuf>,
}

impl Default for CountConfig {
    fn default() -> Self {
        Self {
            max_n: super::DEFAULT_MAX_N,
            shard_budget: 5_000_000,
            threads: 1,
            spill_dir: None,
        }
    }
}

impl CountConfig {
    pub fn new(max_n: usize, shard_budget: usize) -> Self {
        Self {
            max_n,
            shard_budget,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_n < 2 {
            return Err(Error::Argument(format!(
                "max_n must be at least 2, got {}",
                self.max_n
            )));
        }
        if self.shard_budget == 0 {
            return Err(Error::Argument("shard_budget must be positive".into()));
        }
        Ok(())
    }
}

/// Raw n-gram count table, keyed by space-joined n-gram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramCounts {
    max_n: usize,
    counts: BTreeMap<String, u64>,
    fingerprint: String,
}

impl NgramCounts {
    pub fn from_pairs<I, S>(max_n: usize, pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        Self {
            max_n,
            counts: pairs.into_iter().map(|(k, c)| (k.into(), c)).collect(),
            fingerprint: String::new(),
        }
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<u64> {
        self.counts.get(key).copied()
    }

    /// Entries in ascending key order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(k, &c)| (k.as_str(), c))
    }

    pub fn into_map(self) -> BTreeMap<String, u64> {
        self.counts
    }
}

/// Accumulates counts for one line of normalized words.
fn count_line(words: &[String], max_n: usize, counts: &mut HashMap<String, u64>) {
    let mut key = String::new();
    for i in 0..words.len() {
        key.clear();
        key.push_str(&words[i]);
        for word in words.iter().skip(i + 1).take(max_n - 1) {
            key.push(' ');
            key.push_str(word);
            if let Some(c) = counts.get_mut(key.as_str()) {
                *c += 1;
            } else {
                counts.insert(key.clone(), 1);
            }
        }
    }
}

fn count_shard(lines: &[Vec<String>], max_n: usize) -> Vec<(String, u64)> {
    let mut counts = HashMap::new();
    for words in lines {
        count_line(words, max_n, &mut counts);
    }
    let mut sorted: Vec<_> = counts.into_iter().collect();
    sorted.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    sorted
}

fn write_spill(path: &PathBuf, entries: &[(String, u64)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (k, c) in entries {
        writeln!(w, "{k}\t{c}")?;
    }
    w.flush()?;
    Ok(())
}

/// Incremental counter: feed lines, then call [`NgramCounter::finish`].
pub struct NgramCounter {
    config: CountConfig,
    pending: Vec<Vec<Vec<String>>>,
    current: Vec<Vec<String>>,
    current_tokens: usize,
    spills: Vec<PathBuf>,
    spill_dir: Option<TempDir>,
    fingerprint: u64,
    total_tokens: u64,
    total_lines: u64,
}

impl NgramCounter {
    pub fn new(config: CountConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            pending: Vec::new(),
            current: Vec::new(),
            current_tokens: 0,
            spills: Vec::new(),
            spill_dir: None,
            fingerprint: 0,
            total_tokens: 0,
            total_lines: 0,
        })
    }

    pub fn push_line(&mut self, line: &str) -> Result<()> {
        self.fingerprint = hash_bytes(self.fingerprint, line.as_bytes());
        self.total_lines += 1;
        let words = normalize_words(line);
        if words.is_empty() {
            return Ok(());
        }
        self.total_tokens += words.len() as u64;
        self.current_tokens += words.len();
        self.current.push(words);
        if self.current_tokens >= self.config.shard_budget {
            self.seal_shard()?;
        }
        Ok(())
    }

    fn seal_shard(&mut self) -> Result<()> {
        if self.current.is_empty() {
            return Ok(());
        }
        self.pending.push(std::mem::take(&mut self.current));
        self.current_tokens = 0;
        if self.pending.len() >= self.config.threads.max(1) {
            self.spill_pending()?;
        }
        Ok(())
    }

    fn spill_pending(&mut self) -> Result<()> {
        if self.pending.is_empty() {
            return Ok(());
        }
        if self.spill_dir.is_none() {
            let dir = match &self.config.spill_dir {
                Some(parent) => tempfile::Builder::new()
                    .prefix("spanft-spill")
                    .tempdir_in(parent)?,
                None => tempfile::Builder::new().prefix("spanft-spill").tempdir()?,
            };
            self.spill_dir = Some(dir);
        }
        let dir = self
            .spill_dir
            .as_ref()
            .expect("spill dir")
            .path()
            .to_path_buf();
        let first = self.spills.len();
        let paths: Vec<PathBuf> = (0..self.pending.len())
            .map(|i| dir.join(format!("shard-{:06}.tsv", first + i)))
            .collect();
        let max_n = self.config.max_n;
        let shards = std::mem::take(&mut self.pending);
        shards
            .par_iter()
            .zip(paths.par_iter())
            .map(|(shard, path)| write_spill(path, &count_shard(shard, max_n)))
            .collect::<Result<Vec<()>>>()?;
        self.spills.extend(paths);
        Ok(())
    }

    /// Completes counting and returns the merged counts in ascending key order.
    pub fn finish(mut self) -> Result<MergedCounts> {
        let fingerprint = format!(
            "splitmix64:{:016x} lines={} tokens={}",
            self.fingerprint, self.total_lines, self.total_tokens
        );
        let max_n = self.config.max_n;
        if self.spills.is_empty() && self.pending.is_empty() {
            // Everything fits in one shard.
            let entries = count_shard(&self.current, max_n);
            return Ok(MergedCounts {
                max_n,
                fingerprint,
                source: Source::Memory(entries.into_iter()),
            });
        }
        if !self.current.is_empty() {
            self.pending.push(std::mem::take(&mut self.current));
        }
        self.spill_pending()?;
        let mut readers = Vec::with_capacity(self.spills.len());
        for path in &self.spills {
            readers.push(SpillReader::open(path)?);
        }
        let mut merge = KWayMerge {
            readers,
            heap: BinaryHeap::new(),
            _dir: self.spill_dir.take(),
        };
        merge.prime()?;
        Ok(MergedCounts {
            max_n,
            fingerprint,
            source: Source::Spilled(merge),
        })
    }
}

struct SpillReader {
    path: PathBuf,
    lines: Lines<BufReader<File>>,
    line_no: usize,
}

impl SpillReader {
    fn open(path: &PathBuf) -> Result<Self> {
        Ok(Self {
            path: path.clone(),
            lines: BufReader::new(File::open(path)?).lines(),
            line_no: 0,
        })
    }

    fn next_entry(&mut self) -> Result<Option<(String, u64)>> {
        let Some(line) = self.lines.next() else {
            return Ok(None);
        };
        let line = line?;
        self.line_no += 1;
        let parsed = line
            .rsplit_once('\t')
            .and_then(|(k, c)| c.parse::<u64>().ok().map(|c| (k.to_owned(), c)));
        match parsed {
            Some(entry) => Ok(Some(entry)),
            None => Err(Error::Parse {
                line: self.line_no,
                message: "corrupt spill entry".into(),
            }
            .in_file(&self.path)),
        }
    }
}

struct KWayMerge {
    readers: Vec<SpillReader>,
    heap: BinaryHeap<Reverse<(String, usize, u64)>>,
    _dir: Option<TempDir>,
}

impl KWayMerge {
    fn prime(&mut self) -> Result<()> {
        for i in 0..self.readers.len() {
            self.advance(i)?;
        }
        Ok(())
    }

    fn advance(&mut self, i: usize) -> Result<()> {
        if let Some((k, c)) = self.readers[i].next_entry()? {
            self.heap.push(Reverse((k, i, c)));
        }
        Ok(())
    }

    fn next_merged(&mut self) -> Result<Option<(String, u64)>> {
        let Some(Reverse((key, i, mut total))) = self.heap.pop() else {
            return Ok(None);
        };
        self.advance(i)?;
        while let Some(Reverse((k, _, _))) = self.heap.peek() {
            if *k != key {
                break;
            }
            let Reverse((_, j, c)) = self.heap.pop().expect("peeked");
            total += c;
            self.advance(j)?;
        }
        Ok(Some((key, total)))
    }
}

enum Source {
    Memory(std::vec::IntoIter<(String, u64)>),
    Spilled(KWayMerge),
}

/// Exact merged counts, yielded in ascending key order.
pub struct MergedCounts {
    max_n: usize,
    fingerprint: String,
    source: Source,
}

impl MergedCounts {
    pub fn max_n(&self) -> usize {
        self.max_n
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn collect_counts(self) -> Result<NgramCounts> {
        let max_n = self.max_n;
        let fingerprint = self.fingerprint.clone();
        let counts = self.collect::<Result<BTreeMap<_, _>>>()?;
        Ok(NgramCounts {
            max_n,
            counts,
            fingerprint,
        })
    }
}

impl Iterator for MergedCounts {
    type Item = Result<(String, u64)>;

    fn next(&mut self) -> Option<Self::Item> {
        match &mut self.source {
            Source::Memory(it) => it.next().map(Ok),
            Source::Spilled(merge) => merge.next_merged().transpose(),
        }
    }
}

/// Feeds a byte stream into a counter, rejecting invalid UTF-8 with the byte
/// offset of the first bad byte.
pub fn feed_reader<R: BufRead>(mut reader: R, counter: &mut NgramCounter) -> Result<()> {
    let mut buf = Vec::new();
    let mut offset = 0u64;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf)?;
        if n == 0 {
            return Ok(());
        }
        let line = std::str::from_utf8(&buf).map_err(|e| Error::Decode {
            offset: offset + e.valid_up_to() as u64,
        })?;
        counter.push_line(line.trim_end_matches(['\n', '\r']))?;
        offset += n as u64;
    }
}

/// Counts every word n-gram of length `2..=max_n` in a UTF-8 corpus.
/// N-grams never cross line boundaries.
pub fn count_ngrams<R: BufRead>(reader: R, config: &CountConfig) -> Result<NgramCounts> {
    let mut counter = NgramCounter::new(config.clone())?;
    feed_reader(reader, &mut counter)?;
    counter.finish()?.collect_counts()
}

pub fn count_ngrams_lines<I, S>(lines: I, config: &CountConfig) -> Result<NgramCounts>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut counter = NgramCounter::new(config.clone())?;
    for line in lines {
        counter.push_line(line.as_ref())?;
    }
    counter.finish()?.collect_counts()
}
