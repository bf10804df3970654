use std::io::Write;
use std::time::Instant;

use riemheat::suites::{criterion_name, run_criterion};

// Written to the stderr handle, which the test harness does not capture, so
// the table shows up in plain `cargo test` output.
#[test]
fn acceptance() {
    let mut err = std::io::stderr();
    let mut failed = Vec::new();
    for id in 1..=13 {
        let start = Instant::now();
        let o = run_criterion(id);
        let secs = start.elapsed().as_secs_f64();
        let mark = if o.passed { "PASS" } else { "FAIL" };
        writeln!(err, "criterion {id:>2} {mark} {} ({secs:.1}s)", criterion_name(id)).unwrap();
        if !o.passed {
            writeln!(err, "    {}", o.details).unwrap();
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
