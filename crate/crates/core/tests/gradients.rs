use gma_core::gradsuite::{self, CHECKS, SUITE_TOL};

#[test]
fn full_suite_passes() {
    let results = gradsuite::run(&["all"], 11).unwrap();
    assert_eq!(results.len(), CHECKS.len());
    for r in &results {
        println!("{:<28} {:.3e}", r.name, r.max_rel_error);
        assert!(r.max_rel_error < SUITE_TOL, "{}: {}", r.name, r.max_rel_error);
    }
}
