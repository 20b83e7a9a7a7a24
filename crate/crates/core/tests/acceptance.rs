//! Runs every acceptance criterion at its pinned tolerance.

use std::io::Write;

use planelike::acceptance::{self, Context, Status};
use planelike::config::Suite;

#[test]
fn all_criteria_pass() {
    let ids: Vec<u8> = (1..=13).collect();
    let report = acceptance::run_with(&Context::new(), &ids, Suite::Full, |o| {
        // Straight to the handle so the lines show without --nocapture.
        let _ = writeln!(std::io::stderr(), "{o}");
    });
    let failed: Vec<String> =
        report.outcomes.iter().filter(|o| o.status == Status::Fail).map(|o| format!("{} {}", o.id, o.key)).collect();
    assert_eq!(report.outcomes.len(), 13);
    assert!(report.outcomes.iter().all(|o| o.status != Status::Skipped));
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
    assert!(report.passed);
}
