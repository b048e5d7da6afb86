//! Toy contextual embeddings written to and read back from the binary
//! embedding file.

use spanft::frozen::{
    load_embeddings, save_embeddings, toy_encode, EmbeddingMatrix, ToyEncoderConfig,
};

fn main() -> spanft::Result<()> {
    let config = ToyEncoderConfig {
        d: 8,
        ..Default::default()
    };
    let sentences = [vec!["hello", "world"], vec!["new", "york", "city", "!"]];
    let matrices: Vec<EmbeddingMatrix> = sentences
        .iter()
        .map(|w| toy_encode(w, &config).map(|t| EmbeddingMatrix::from_embeddings(&t)))
        .collect::<spanft::Result<_>>()?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("toy.spfe");
    save_embeddings(&path, config.d, &matrices)?;
    let (d, back) = load_embeddings(&path)?;
    assert_eq!(back, matrices);
    println!(
        "{} sentences, d={d}, {} bytes",
        back.len(),
        std::fs::metadata(&path)?.len()
    );
    for m in &back {
        println!("  {} rows (CLS + {} words)", m.rows, m.rows - 1);
    }
    Ok(())
}
