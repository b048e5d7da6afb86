//! Maps word spans onto subword positions after a leading [CLS] token.

use spanft::segment::{project_to_subwords, SpanPartition, SubwordAlignment};

fn main() -> spanft::Result<()> {
    // "unbelievable new york" split by some tokenizer into 3 + 1 + 1 pieces.
    let alignment = SubwordAlignment::from_counts(&[3, 1, 1], 1)?;
    let words = SpanPartition::new(vec![0..1, 1..3], 3)?;
    let subwords = project_to_subwords(&words, &alignment)?;
    println!("word spans    {:?}", words.spans());
    println!("subword spans {subwords:?}");
    assert_eq!(subwords, [1..4, 4..6]);

    let mismatch = SubwordAlignment::from_counts(&[1, 1], 1)?;
    if let Err(e) = project_to_subwords(&words, &mismatch) {
        println!("mismatch: {e}");
    }
    Ok(())
}
