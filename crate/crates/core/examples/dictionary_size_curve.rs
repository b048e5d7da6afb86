//! Average spans per sentence as the dictionary grows.

use spanft::dict::{build_dictionary, count_ngrams_lines, CountConfig};
use spanft::segment::{sentences_from_lines, span_count_curve, STATS_HEADER};

fn main() -> spanft::Result<()> {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/data/sample_1k.txt"))?;
    let lines: Vec<&str> = text.lines().collect();
    let counts = count_ngrams_lines(&lines, &CountConfig::new(5, 1_000_000))?;
    let dict = build_dictionary(&counts, 2)?;
    let sentences = sentences_from_lines(&lines);

    println!("{STATS_HEADER}");
    for row in span_count_curve(&sentences, &dict, &[0, 10, 100, 1000, 10_000, 100_000])? {
        println!("{}", row.report_line());
    }
    Ok(())
}
