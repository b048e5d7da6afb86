use std::fs::File;
use std::io::{BufRead, BufReader};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dict::NgramDictionary;
use crate::encoder::ContextualEmbeddings;
use crate::error::{Error, Result};
use crate::frozen::{toy_encode, ToyEncoderConfig};
use crate::rng::mix64;
use crate::segment::{
    normalize_and_tokenize, project_to_subwords, segment_greedy, segment_random, SpanPartition,
    SubwordAlignment, WordSequence,
};

/// Text of one example: a sentence, a sentence pair, or pre-tokenized words
/// with an optional segmentation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExampleInput {
    Pair {
        text_a: String,
        text_b: String,
    },
    Single {
        text: String,
    },
    Tokens {
        tokens: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spans: Option<Vec<[usize; 2]>>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    #[serde(flatten)]
    pub input: ExampleInput,
    pub label: usize,
}

impl LabeledExample {
    pub fn text(text: impl Into<String>, label: usize) -> Self {
        Self {
            input: ExampleInput::Single { text: text.into() },
            label,
        }
    }

    pub fn pair(a: impl Into<String>, b: impl Into<String>, label: usize) -> Self {
        Self {
            input: ExampleInput::Pair {
                text_a: a.into(),
                text_b: b.into(),
            },
            label,
        }
    }
}

/// Reads `{"text": .., "label": ..}` or `{"text_a": .., "text_b": .., "label": ..}`
/// records, one per line. Blank lines are skipped.
pub fn read_dataset<R: BufRead>(reader: R) -> Result<Vec<LabeledExample>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: LabeledExample = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(ex);
    }
    Ok(out)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<LabeledExample>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
    read_dataset(BufReader::new(file)).map_err(|e| e.in_file(path))
}

/// How sentences are cut into spans before encoding.
#[derive(Debug, Clone, Copy)]
pub enum Segmentation<'a> {
    Greedy(&'a NgramDictionary),
    /// Per-sentence seeds are derived from `seed` and the sentence index.
    Random {
        seed: u64,
        max_len: usize,
    },
    Singletons,
}

impl Segmentation<'_> {
    /// Partition for the sentence at `sentence_index`; the index only
    /// matters for random segmentation.
    pub fn partition(&self, words: &WordSequence, sentence_index: u64) -> Result<SpanPartition> {
        match *self {
            Segmentation::Greedy(dict) => Ok(segment_greedy(dict, words)),
            Segmentation::Random { seed, max_len } => {
                segment_random(words, mix64(seed ^ mix64(sentence_index)), max_len)
            }
            Segmentation::Singletons => Ok(SpanPartition::singletons(words.len())),
        }
    }
}

/// Where frozen contextual embeddings come from.
#[derive(Debug, Clone)]
pub enum EmbeddingSource {
    Toy(ToyEncoderConfig),
    /// One matrix per example, `[CLS]` plus one row per word.
    Precomputed(Vec<ContextualEmbeddings>),
}

impl EmbeddingSource {
    pub fn dim(&self) -> Option<usize> {
        match self {
            EmbeddingSource::Toy(c) => Some(c.d),
            EmbeddingSource::Precomputed(m) => m.first().map(ContextualEmbeddings::dim),
        }
    }
}

/// An example reduced to frozen embeddings plus subword span boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedExample {
    pub embeddings: ContextualEmbeddings,
    pub boundaries: Vec<Range<usize>>,
    pub words: Vec<String>,
    pub label: usize,
}

/// Normalizes, segments and encodes examples. Pair sentences are segmented
/// independently and their spans concatenated in order.
pub fn prepare(
    examples: &[LabeledExample],
    segmentation: Segmentation<'_>,
    source: &EmbeddingSource,
    index_offset: u64,
) -> Result<Vec<PreparedExample>> {
    if let EmbeddingSource::Precomputed(m) = source {
        if m.len() != examples.len() {
            return Err(Error::Argument(format!(
                "{} precomputed matrices for {} examples",
                m.len(),
                examples.len()
            )));
        }
    }
    examples
        .iter()
        .enumerate()
        .map(|(i, ex)| {
            let record = i + 1;
            let at = |e: Error| Error::Validation {
                record,
                message: e.to_string(),
            };
            let sentence = 2 * (index_offset + i as u64);
            let (words, partition) = match &ex.input {
                ExampleInput::Single { text } => {
                    let w = normalize_and_tokenize(text).map_err(at)?;
                    let p = segmentation.partition(&w, sentence).map_err(at)?;
                    (w, p)
                }
                ExampleInput::Pair { text_a, text_b } => {
                    let a = normalize_and_tokenize(text_a).map_err(at)?;
                    let b = normalize_and_tokenize(text_b).map_err(at)?;
                    let pa = segmentation.partition(&a, sentence).map_err(at)?;
                    let pb = segmentation.partition(&b, sentence + 1).map_err(at)?;
                    let mut joined = a.words().to_vec();
                    joined.extend_from_slice(b.words());
                    let w = WordSequence::from_words(joined, format!("{text_a} {text_b}"))
                        .map_err(at)?;
                    (w, pa.concat(&pb))
                }
                ExampleInput::Tokens { tokens, spans } => {
                    let w =
                        WordSequence::from_words(tokens.clone(), tokens.join(" ")).map_err(at)?;
                    let p = match spans {
                        Some(s) => {
                            SpanPartition::new(s.iter().map(|[a, b]| *a..*b).collect(), w.len())
                                .map_err(at)?
                        }
                        None => segmentation.partition(&w, sentence).map_err(at)?,
                    };
                    (w, p)
                }
            };
            let embeddings = match source {
                EmbeddingSource::Toy(cfg) => toy_encode(words.words(), cfg).map_err(at)?,
                EmbeddingSource::Precomputed(m) => {
                    let t = m[i].clone();
                    if t.rows() != words.len() + 1 {
                        return Err(at(Error::Alignment(format!(
                            "{} embedding rows for {} words plus [CLS]",
                            t.rows(),
                            words.len()
                        ))));
                    }
                    t
                }
            };
            let alignment = SubwordAlignment::identity(words.len(), 1);
            let boundaries = project_to_subwords(&partition, &alignment).map_err(at)?;
            Ok(PreparedExample {
                embeddings,
                boundaries,
                words: words.words().to_vec(),
                label: ex.label,
            })
        })
        .collect()
}
