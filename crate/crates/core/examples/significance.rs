//! Metrics for two systems on the same examples and a McNemar test on their
//! disagreements.

use spanft::metrics::{binary_report, mcnemar_test, pearson_corr, PairedPredictions};

fn main() -> spanft::Result<()> {
    let gold = vec![1, 0, 1, 1, 0, 1, 0, 0, 1, 1, 0, 1, 1, 0, 1, 0, 1, 1, 0, 1];
    let a = vec![1, 0, 1, 1, 0, 1, 0, 0, 1, 1, 0, 1, 1, 0, 1, 0, 1, 0, 0, 1];
    let b = vec![1, 1, 0, 1, 0, 0, 0, 1, 1, 0, 0, 1, 0, 0, 1, 1, 1, 0, 0, 1];

    for (name, preds) in [("A", &a), ("B", &b)] {
        println!("{name}: {:?}", binary_report(preds, &gold)?);
    }
    let result = mcnemar_test(&PairedPredictions::new(gold, a, b)?)?;
    println!(
        "McNemar b={} c={} ({:?}) p={:.6}",
        result.b, result.c, result.method, result.p_value
    );

    let x = [1.0, 2.0, 3.0];
    let y = [1.0, 3.0, 2.0];
    println!("Pearson {:.3}", pearson_corr(&x, &y)?);
    Ok(())
}
