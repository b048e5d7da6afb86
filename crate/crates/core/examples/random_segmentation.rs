//! Random span boundaries, the ablation that ignores the dictionary.

use spanft::segment::{normalize_and_tokenize, segment_random};

fn main() -> spanft::Result<()> {
    let words =
        normalize_and_tokenize("the quick brown fox jumps over the lazy dog near the river bank")?;
    for seed in [1, 2, 3] {
        let p = segment_random(&words, seed, 4)?;
        let shown: Vec<String> = p
            .spans()
            .iter()
            .map(|r| words.words()[r.clone()].join(" "))
            .collect();
        println!("seed {seed}: [{}]", shown.join("] ["));
    }
    // Same seed, same spans.
    assert_eq!(segment_random(&words, 7, 4)?, segment_random(&words, 7, 4)?);
    Ok(())
}
