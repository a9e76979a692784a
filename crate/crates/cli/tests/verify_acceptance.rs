//! Acceptance suite: one PASS/FAIL line per criterion, with measured values.

use eqkernel::verify::{run_check, VerifyConfig, CHECK_COUNT};

#[test]
fn acceptance_criteria() {
    let cfg = VerifyConfig::default();
    let mut failed = Vec::new();
    for id in 1..=CHECK_COUNT {
        let r = run_check(id, &cfg).expect("every id has a check");
        println!("{r}");
        if !r.passed() {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
