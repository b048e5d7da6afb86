//! Deterministic synthetic corpora for desk-scale experiments.

use crate::dict::NgramDictionary;
use crate::rng::SplitMix64;
use crate::train::LabeledExample;

const DETERMINERS: &[&str] = &["the", "a", "this", "every", "that", "some"];

const NOUNS: &[&str] = &[
    "city", "team", "river", "company", "band", "school", "film", "player", "station", "village",
    "album", "church", "road", "game", "army", "ship", "party", "season", "bridge", "museum",
    "family", "novel", "league", "castle", "island", "market", "court", "garden", "tower", "coach",
    "singer", "border", "harbour", "festival", "council", "library", "battle", "engine", "valley",
    "theatre",
];

const ADJECTIVES: &[&str] = &[
    "new", "old", "small", "large", "local", "national", "early", "final", "famous", "northern",
    "southern", "first", "second", "royal", "public", "modern", "ancient", "major", "popular",
    "young",
];

const VERBS: &[&str] = &[
    "visited",
    "built",
    "joined",
    "left",
    "won",
    "opened",
    "crossed",
    "released",
    "played",
    "founded",
    "reached",
    "defeated",
    "described",
    "replaced",
    "entered",
    "supported",
    "recorded",
    "moved",
    "signed",
    "named",
];

const PREPOSITIONS: &[&str] = &[
    "in", "near", "after", "before", "during", "with", "from", "across", "under", "for",
];

const ENTITIES: &[&str] = &[
    "new york city",
    "the united states",
    "world war ii",
    "the british army",
    "los angeles",
    "the royal navy",
    "the european union",
    "the new york times",
    "the second world war",
    "the soviet union",
    "the football league",
    "the city council",
    "the united kingdom",
    "the prime minister",
    "the national park",
    "the world cup",
    "the river thames",
    "the catholic church",
    "the first season",
    "the summer olympics",
];

const TIMES: &[&str] = &[
    "in 1998",
    "in the following year",
    "later that season",
    "in the early years",
    "in 2005",
];

/// Index drawn with probability proportional to `1 / (rank + 1)`.
fn zipf(rng: &mut SplitMix64, n: usize) -> usize {
    let total: f64 = (1..=n).map(|r| 1.0 / r as f64).sum();
    let mut u = rng.unit_f64() * total;
    for r in 0..n {
        u -= 1.0 / (r + 1) as f64;
        if u < 0.0 {
            return r;
        }
    }
    n - 1
}

fn pick<'a>(rng: &mut SplitMix64, words: &[&'a str]) -> &'a str {
    words[zipf(rng, words.len())]
}

fn chance(rng: &mut SplitMix64, p: f64) -> bool {
    rng.unit_f64() < p
}

fn noun_phrase(rng: &mut SplitMix64, out: &mut Vec<String>) {
    if chance(rng, 0.35) {
        out.push(pick(rng, ENTITIES).to_string());
        return;
    }
    out.push(pick(rng, DETERMINERS).to_string());
    if chance(rng, 0.5) {
        out.push(pick(rng, ADJECTIVES).to_string());
    }
    out.push(pick(rng, NOUNS).to_string());
}

/// One English-like sentence with recurring multiword entities.
pub fn sentence(rng: &mut SplitMix64) -> String {
    let mut parts = Vec::new();
    noun_phrase(rng, &mut parts);
    parts.push(pick(rng, VERBS).to_string());
    noun_phrase(rng, &mut parts);
    if chance(rng, 0.6) {
        parts.push(pick(rng, PREPOSITIONS).to_string());
        noun_phrase(rng, &mut parts);
    }
    if chance(rng, 0.3) {
        parts.push(",".into());
        parts.push(pick(rng, TIMES).to_string());
    }
    let mut s = parts.join(" ");
    s = s.replace(" ,", ",");
    if let Some(first) = s.get(..1) {
        s = first.to_uppercase() + &s[1..];
    }
    s.push('.');
    s
}

/// `n` sentences from a fixed seed.
pub fn corpus(n: usize, seed: u64) -> Vec<String> {
    let mut rng = SplitMix64::new(seed);
    (0..n).map(|_| sentence(&mut rng)).collect()
}

/// Bigrams of the phrase-detection task. Every component word also occurs
/// on its own as filler.
pub const TASK_PHRASES: &[[&str; 2]] = &[
    ["ice", "cream"],
    ["high", "school"],
    ["cold", "war"],
    ["red", "cross"],
    ["real", "estate"],
    ["prime", "minister"],
    ["train", "station"],
    ["free", "trade"],
    ["town", "hall"],
    ["open", "source"],
    ["black", "market"],
    ["side", "effect"],
    ["fire", "truck"],
    ["short", "story"],
    ["dark", "horse"],
    ["sea", "level"],
];

const TASK_FILLERS: &[&str] = &[
    "she", "he", "they", "we", "saw", "liked", "said", "took", "the", "a", "of", "to", "and",
    "near", "big", "blue", "quiet", "long", "day", "night", "dog", "car", "house", "book", "river",
    "friend", "song", "letter", "city", "game", "paper", "door",
];

#[derive(Debug, Clone)]
pub struct PhraseTask {
    /// Contains exactly the task bigrams.
    pub dictionary: NgramDictionary,
    pub train: Vec<LabeledExample>,
    pub dev: Vec<LabeledExample>,
}

/// True when some adjacent word pair is a dictionary entry.
pub fn has_dictionary_bigram<S: AsRef<str>>(dict: &NgramDictionary, words: &[S]) -> bool {
    words.windows(2).any(|w| dict.contains(w))
}

pub fn phrase_dictionary() -> NgramDictionary {
    let entries = TASK_PHRASES
        .iter()
        .map(|[a, b]| (format!("{a} {b}"), 100u64));
    NgramDictionary::from_entries(5, 10, entries)
        .expect("task phrases are valid bigrams")
        .with_fingerprint("synth:phrase-task")
}

fn phrase_sentence(rng: &mut SplitMix64, positive: bool) -> Vec<&'static str> {
    let vocab: Vec<&str> = TASK_FILLERS
        .iter()
        .copied()
        .chain(TASK_PHRASES.iter().flatten().copied())
        .collect();
    let len = 6 + rng.below(7) as usize;
    let mut words: Vec<&str> = (0..len)
        .map(|_| vocab[rng.below(vocab.len() as u64) as usize])
        .collect();
    let [a, b] = TASK_PHRASES[rng.below(TASK_PHRASES.len() as u64) as usize];
    let at = rng.below(words.len() as u64 - 1) as usize;
    if positive {
        words[at] = a;
        words[at + 1] = b;
    } else if chance(rng, 0.5) {
        // Same words, wrong order.
        words[at] = b;
        words[at + 1] = a;
    }
    words
}

/// Balanced phrase-detection data; label 1 iff a dictionary bigram occurs.
/// Candidates are resampled until their label matches the intended class.
pub fn phrase_task(n: usize, dev_fraction: f64, seed: u64) -> PhraseTask {
    let dictionary = phrase_dictionary();
    let mut rng = SplitMix64::new(seed);
    let mut examples = Vec::with_capacity(n);
    for i in 0..n {
        let positive = i % 2 == 1;
        let words = loop {
            let w = phrase_sentence(&mut rng, positive);
            if has_dictionary_bigram(&dictionary, &w) == positive {
                break w;
            }
        };
        examples.push(LabeledExample::text(words.join(" "), usize::from(positive)));
    }
    let dev_len = ((n as f64) * dev_fraction).round() as usize;
    let dev = examples.split_off(n - dev_len.min(n));
    PhraseTask {
        dictionary,
        train: examples,
        dev,
    }
}
