//! Greedy longest-match segmentation against a small dictionary.

use spanft::dict::NgramDictionary;
use spanft::segment::{normalize_and_tokenize, segment_greedy, SegmentationRecord};

fn main() -> spanft::Result<()> {
    let dict = NgramDictionary::from_entries(
        5,
        10,
        [
            ("new york", 120u64),
            ("new york city", 45),
            ("ice cream", 30),
            ("in the", 900),
        ],
    )?;
    for text in [
        "I moved to New York City in the spring.",
        "Ice cream, new shoes, New York!",
    ] {
        let words = normalize_and_tokenize(text)?;
        let spans = segment_greedy(&dict, &words);
        let shown: Vec<String> = spans
            .spans()
            .iter()
            .map(|r| words.words()[r.clone()].join(" "))
            .collect();
        println!("{text}");
        println!("  [{}]", shown.join("] ["));
        println!("  {}", SegmentationRecord::new(&words, &spans).to_json());
    }
    Ok(())
}
