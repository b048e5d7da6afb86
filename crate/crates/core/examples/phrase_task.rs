//! Trains a span model and a CLS-only baseline on the synthetic
//! phrase-detection task and prints dev accuracy per epoch.
//!
//!     cargo run --release --example phrase_task [lr] [epochs]

use spanft::encoder::{SpanLimits, Variant};
use spanft::frozen::ToyEncoderConfig;
use spanft::synth::phrase_task;
use spanft::train::{
    prepare, train_with, Architecture, EmbeddingSource, Segmentation, TrainConfig,
};

fn main() -> spanft::Result<()> {
    let mut args = std::env::args().skip(1);
    let lr: f64 = args
        .next()
        .map_or(1e-3, |s| s.parse().expect("learning rate"));
    let epochs: usize = args.next().map_or(5, |s| s.parse().expect("epochs"));

    let task = phrase_task(2000, 0.2, 42);
    let source = EmbeddingSource::Toy(ToyEncoderConfig {
        d: 32,
        ..Default::default()
    });
    let seg = Segmentation::Greedy(&task.dictionary);
    let train_set = prepare(&task.train, seg, &source, 0)?;
    let dev_set = prepare(&task.dev, seg, &source, task.train.len() as u64)?;

    for architecture in [Architecture::Span(Variant::CnnCnn), Architecture::ClsOnly] {
        let config = TrainConfig {
            architecture,
            limits: SpanLimits::new(16, 8),
            lr,
            epochs,
            seed: 42,
            ..Default::default()
        };
        println!("{architecture}");
        train_with(&train_set, Some(&dev_set), 2, &config, |m| {
            let acc = m.dev.map_or(f64::NAN, |d| d.accuracy);
            println!(
                "  epoch {}  loss {:.4}  dev acc {:.4}",
                m.epoch, m.train_loss, acc
            );
        })?;
    }
    Ok(())
}
