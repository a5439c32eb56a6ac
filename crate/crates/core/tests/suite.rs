use qmvt::scenario::Status;
use qmvt::suite::{run_suite_timed, suite_config, suite_scenarios};

#[test]
fn suite_runs_with_expected_outcomes() {
    let (report, seconds) = run_suite_timed(&suite_config(1e-9)).unwrap();
    println!("{}", report.to_table());
    println!("suite time {seconds:.2} s");
    assert_eq!(report.entries.len(), suite_scenarios().len());
    for e in &report.entries {
        let expected = if e.name.starts_with("cte_") {
            Status::HypothesisFailure
        } else {
            Status::Verified
        };
        assert_eq!(e.status, expected, "{}", e.name);
    }
    assert_eq!(report.raised_errata(), 6);
    assert!(seconds < 60.0);
}
