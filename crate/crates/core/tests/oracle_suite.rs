use memlab_core::oracle::{run_suite, SuiteConfig};

#[test]
fn default_suite_passes() {
    let report = run_suite(&SuiteConfig::default()).unwrap();
    for c in &report.checks {
        println!("{:<40} {:<5} value={:.3e} threshold={:.1e} {}", c.name, c.passed, c.value, c.threshold, c.detail);
    }
    assert!(report.passed, "failed: {:?}", report.failed().map(|c| &c.name).collect::<Vec<_>>());
}
