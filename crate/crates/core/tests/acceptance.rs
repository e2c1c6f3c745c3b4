//! One line per acceptance criterion. Criteria in `KNOWN_FAILURES` are
//! implemented as stated and allowed to fail.

use pcrtbp::verify::{run_all, VerifyConfig, KNOWN_FAILURES};

fn main() {
    // `cargo test -- --list` and filters are passed through by cargo; a filter
    // that is not ours means another target was selected
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    if let Some(filter) = args.iter().find(|a| !a.starts_with('-')) {
        if !"acceptance".contains(filter.as_str()) {
            return;
        }
    }

    let outcomes = run_all(&VerifyConfig::default(), |o| println!("{o}"));
    let unexpected: Vec<u32> = outcomes.iter().filter(|o| !o.pass && !KNOWN_FAILURES.contains(&o.id)).map(|o| o.id).collect();
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("acceptance: {passed}/{} criteria pass; known failures {KNOWN_FAILURES:?}", outcomes.len());
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
