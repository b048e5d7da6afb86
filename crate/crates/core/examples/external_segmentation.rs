//! Reads spans produced by an outside tool, such as a phrase chunker, from
//! JSON lines and rejects malformed partitions.

use spanft::segment::read_segmentation;

fn main() -> spanft::Result<()> {
    let chunked = r#"{"tokens": ["the", "red", "fox", "ran", "away"], "spans": [[0, 3], [3, 4], [4, 5]]}
{"tokens": ["new", "york", "is", "big"], "spans": [[0, 2], [2, 3], [3, 4]]}
"#;
    for (words, spans) in read_segmentation(chunked.as_bytes())? {
        println!("{:?} -> {:?}", words.words(), spans.to_pairs());
    }

    let gap = r#"{"tokens": ["a", "b", "c"], "spans": [[0, 1], [2, 3]]}"#;
    match read_segmentation(gap.as_bytes()) {
        Ok(_) => unreachable!("a gap is not a partition"),
        Err(e) => println!("rejected: {e}"),
    }
    Ok(())
}
