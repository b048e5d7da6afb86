//! Finite-difference check of the hand-written backward pass.

use spanft::encoder::{grad_check, GradCheckDims, Variant};

fn main() -> spanft::Result<()> {
    for variant in Variant::SPAN_VARIANTS {
        let dims = GradCheckDims {
            d: 4,
            r: 3,
            l: 4,
            k: 3,
            variant,
        };
        let report = grad_check(dims, 42, 1e-5, 1e-4)?;
        println!(
            "{:<9} max rel {:.2e}  max abs {:.2e}  over {} coords  {}",
            variant.name(),
            report.max_rel_error,
            report.max_abs_error,
            report.checked,
            if report.passed { "ok" } else { "FAIL" }
        );
    }
    Ok(())
}
