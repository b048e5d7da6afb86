//! Runs every encoder variant on the same sentence and prints `s* = [s ; t1]`.

use spanft::dict::NgramDictionary;
use spanft::encoder::{forward, EncoderParams, SpanLimits, Variant};
use spanft::frozen::{toy_encode, ToyEncoderConfig};
use spanft::rng::SplitMix64;
use spanft::segment::{
    normalize_and_tokenize, project_to_subwords, segment_greedy, SubwordAlignment,
};

fn main() -> spanft::Result<()> {
    let dict = NgramDictionary::from_entries(5, 1, [("new york city", 3u64), ("last year", 2)])?;
    let words = normalize_and_tokenize("She moved to New York City last year")?;
    let spans = segment_greedy(&dict, &words);
    let boundaries = project_to_subwords(&spans, &SubwordAlignment::identity(words.len(), 1))?;

    let toy = ToyEncoderConfig {
        d: 6,
        ..Default::default()
    };
    let t = toy_encode(words.words(), &toy)?;
    let params = EncoderParams::init(6, 3, 0.5, &mut SplitMix64::new(42));
    let limits = SpanLimits::new(16, 8);

    for variant in Variant::SPAN_VARIANTS {
        let (rep, _) = forward(&t, &boundaries, limits, &params, variant)?;
        let s: Vec<String> = rep.span_part().iter().map(|v| format!("{v:+.3}")).collect();
        println!("{:<9} s = [{}]", variant.name(), s.join(", "));
    }
    Ok(())
}
