//! Prints a deterministic English-like corpus, one sentence per line.
//! The bundled `data/sample_1k.txt` is the output for 1000 sentences, seed 42.
//!
//!     cargo run --example synthetic_corpus -- 1000 42 > sample.txt

fn main() {
    let mut args = std::env::args().skip(1);
    let n: usize = args
        .next()
        .map_or(1000, |s| s.parse().expect("sentence count"));
    let seed: u64 = args.next().map_or(42, |s| s.parse().expect("seed"));
    for line in spanft::synth::corpus(n, seed) {
        println!("{line}");
    }
}
