//! One PASS/FAIL line per criterion; exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};

use acceptance::{Outcome, CRITERIA};

fn main() {
    // Criterion 12 drives the CLI in-process; its configuration must come from flags alone.
    for (key, _) in std::env::vars() {
        if key.starts_with("CLARK_OCONE_") {
            std::env::remove_var(key);
        }
    }
    let mut failed = 0;
    for (i, (name, run)) in CRITERIA.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome {
                pass: false,
                detail: format!("panicked: {msg}"),
            }
        });
        if !result.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<32} {}  {}",
            i + 1,
            name,
            if result.pass { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        CRITERIA.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
