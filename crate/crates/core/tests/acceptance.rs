use bosegas_core::checks::{run_all, Scale};

#[test]
fn acceptance_criteria() {
    let outcomes = run_all(Scale::Full);
    assert_eq!(outcomes.len(), 12);
    println!();
    for o in &outcomes {
        println!("{}", o.summary_line());
    }
    let failed: Vec<String> = outcomes.iter().filter_map(|o| o.first_failure()).collect();
    assert!(failed.is_empty(), "failing criteria:\n{}", failed.join("\n"));
}
