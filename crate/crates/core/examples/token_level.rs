//! Span-level encoding against the token-level mode that skips the
//! within-span pooling and convolves over all tokens.

use spanft::encoder::{
    encode_token_level, forward, gather_spans, EncoderParams, SpanLimits, Variant,
};
use spanft::frozen::{toy_encode, ToyEncoderConfig};
use spanft::rng::SplitMix64;

fn main() -> spanft::Result<()> {
    let words = ["prices", "rose", "in", "new", "york", "city"];
    let t = toy_encode(
        &words,
        &ToyEncoderConfig {
            d: 4,
            ..Default::default()
        },
    )?;
    let params = EncoderParams::init(4, 3, 0.5, &mut SplitMix64::new(1));
    let boundaries = [1..2, 2..3, 3..4, 4..7];
    let limits = SpanLimits::new(8, 4);

    let spans = gather_spans(&t, &boundaries, limits.r, limits.l)?;
    let token_rows = encode_token_level(&spans, &params)?;
    let valid = (0..token_rows.rows())
        .filter(|&i| token_rows.is_valid(i))
        .count();
    println!(
        "token-level output: {} span rows, {valid} valid",
        token_rows.rows()
    );

    for variant in [Variant::CnnCnn, Variant::TokenCnn] {
        let (rep, _) = forward(&t, &boundaries, limits, &params, variant)?;
        println!("{:<9} s = {:?}", variant.name(), rep.span_part());
    }
    Ok(())
}
