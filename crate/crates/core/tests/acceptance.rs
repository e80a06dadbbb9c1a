//! The acceptance gate: every criterion of the verification suite at its
//! frozen tolerance, one pass/fail line per check.

use gcinf::suite::{all_criteria, SuiteConfig};

#[test]
fn acceptance_suite() {
    let cfg = SuiteConfig::default();
    let criteria = all_criteria(&cfg).expect("suite construction");
    let mut failures = Vec::new();
    for (criterion, checks) in &criteria {
        for check in checks {
            println!("criterion {criterion:2}: {}", check.one_line());
            if !check.pass {
                failures.push(format!("criterion {criterion}: {}", check.name));
            }
        }
    }
    assert!(
        failures.is_empty(),
        "failed acceptance checks:\n{}",
        failures.join("\n")
    );
}

#[test]
fn suite_report_is_deterministic() {
    let cfg = SuiteConfig { points: 6, ..SuiteConfig::default() };
    let a = gcinf::suite::run_suite(&cfg).unwrap();
    let b = gcinf::suite::run_suite(&cfg).unwrap();
    assert_eq!(a.canonical_json(), b.canonical_json());
    assert!(a.pass);
}
