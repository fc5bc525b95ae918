use dynperc::experiments::{run_experiment, ExperimentConfig, ExperimentKind};

fn empty_fraction(side: usize) -> (f64, f64, f64) {
    let mut cfg = ExperimentConfig::new(ExperimentKind::EmptyPivotal, 2, side, 0.95);
    cfg.samples = 500;
    cfg.replicas = 2;
    cfg.seed = 5;
    let out = run_experiment(&cfg).unwrap();
    let f = &out.summary["empty_fraction"];
    (
        f["estimate"].as_f64().unwrap(),
        f["ci_low"].as_f64().unwrap(),
        f["ci_high"].as_f64().unwrap(),
    )
}

#[test]
fn empty_pivotal_frequency_does_not_grow_with_the_box() {
    let fractions: Vec<_> = [4, 8, 16].into_iter().map(empty_fraction).collect();
    for pair in fractions.windows(2) {
        // The larger box's interval may not sit entirely above the smaller one's.
        assert!(pair[1].1 <= pair[0].2, "{fractions:?}");
    }
}

#[test]
fn empty_pivotal_rows_agree_with_summary() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::EmptyPivotal, 2, 3, 0.7);
    cfg.samples = 200;
    cfg.seed = 9;
    let out = run_experiment(&cfg).unwrap();
    let empties = out.column_f64("pivotal_empty").unwrap().iter().filter(|&&v| v == 1.0).count();
    assert_eq!(out.summary["empty_fraction"]["count"], empties as u64);
    let sizes = out.column_f64("pivotal_count").unwrap();
    assert!(sizes.iter().zip(out.column_f64("pivotal_empty").unwrap()).all(|(s, e)| (*s == 0.0) == (e == 1.0)));
}
