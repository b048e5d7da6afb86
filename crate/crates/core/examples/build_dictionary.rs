//! Counts n-grams in the bundled sample, keeps those seen at least twice,
//! and writes, reloads and prunes the dictionary.

use std::fs::File;
use std::io::BufReader;

use spanft::dict::{build_dictionary, count_ngrams, CountConfig, NgramDictionary};

fn main() -> spanft::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/sample_1k.txt");
    let mut config = CountConfig::new(5, 20_000);
    config.threads = 2;
    let counts = count_ngrams(BufReader::new(File::open(path)?), &config)?;
    let dict = build_dictionary(&counts, 2)?;
    println!("distinct n-grams: {}", counts.len());
    println!("entries with count >= 2: {}", dict.size());
    for (key, count) in dict.sorted_entries().into_iter().take(5) {
        println!("  {count:>4}  {key}");
    }

    let dir = tempfile::tempdir()?;
    let file = dir.path().join("dict.txt");
    dict.save(&file)?;
    let back = NgramDictionary::load(&file)?;
    assert_eq!(back, dict);
    println!("reloaded from {}", back.source_fingerprint());

    let top = dict.prune_to_size(100);
    println!(
        "pruned to {} entries; contains \"new york\": {}",
        top.size(),
        top.contains(&["new", "york"])
    );
    Ok(())
}
