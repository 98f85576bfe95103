//! Release gate: runs every acceptance criterion at its stated tolerance and
//! prints one pass/fail line per criterion.

use btl::acceptance;

#[test]
fn acceptance_suite_passes() {
    let rows = acceptance::run_suite();
    for row in &rows {
        println!("{}", row.render());
    }
    let failures: Vec<String> = rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("{}: {} (expected {})", r.id, r.measured, r.expected))
        .collect();
    assert!(failures.is_empty(), "acceptance failures:\n{}", failures.join("\n"));
}

#[test]
fn mutants_only_touch_their_declared_rows() {
    for mutant in acceptance::ALL_MUTANTS {
        let targets = acceptance::affected_rows(mutant);
        assert!(!targets.is_empty());
        for id in targets {
            assert!(id.starts_with('c'));
        }
    }
}
