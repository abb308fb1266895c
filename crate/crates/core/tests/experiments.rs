use ris_locate::experiments::{
    parse_csv, read_csv, run_experiment, to_csv_string, write_csv, ExperimentSpec, FigureId,
};
use ris_locate::par::Execution;
use ris_locate::pipeline::ScenarioConfig;

fn spec(figure: FigureId, sweep: &[f64], trials: usize) -> ExperimentSpec {
    let mut s = ExperimentSpec::new(figure);
    s.sweep = sweep.to_vec();
    s.trials = trials;
    s.seed = 3;
    s
}

#[test]
fn one_row_per_point_and_method() {
    let cfg = ScenarioConfig::baseline();
    for (figure, sweep, methods) in [
        (FigureId::MseVsSigma, vec![1e-7, 1e-6], 4),
        (FigureId::NmseVsSigma, vec![1e-7], 3),
        (FigureId::DistRmse, vec![10.0], 4),
        (FigureId::SnrVsX, vec![4.0], 3),
    ] {
        let t = run_experiment(&spec(figure, &sweep, 4), &cfg, Execution::Parallel).unwrap();
        assert_eq!(t.rows.len(), sweep.len() * methods, "{figure}");
        assert!(t.rows.iter().all(|r| r.stderr.is_finite()));
        assert!(t.metadata.as_ref().unwrap().contains(&format!("figure={figure}")));
    }
}

#[test]
fn single_noiseless_trial_has_zero_stderr() {
    let mut cfg = ScenarioConfig::baseline();
    cfg.budget.noise_psd = 0.0;
    let t = run_experiment(&spec(FigureId::MseVsSigma, &[1e-30], 1), &cfg, Execution::Sequential).unwrap();
    assert!(t.rows.iter().all(|r| r.stderr == 0.0));
}

#[test]
fn cml_sits_between_the_bound_and_wls() {
    let t = run_experiment(
        &spec(FigureId::MseVsSigma, &[1e-8, 1e-6, 1e-4], 3000),
        &ScenarioConfig::baseline(),
        Execution::Parallel,
    )
    .unwrap();
    for s in [1e-8, 1e-6, 1e-4] {
        let cml = t.get(s, "CML").unwrap().metric;
        assert!(cml >= 0.95 * t.get(s, "CRLB").unwrap().metric);
        assert!(cml < t.get(s, "WLS").unwrap().metric);
    }
}

#[test]
fn csv_file_round_trips() {
    let t = run_experiment(
        &spec(FigureId::MseVsSigma, &[1e-6], 5),
        &ScenarioConfig::baseline(),
        Execution::Parallel,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    write_csv(&t, &path).unwrap();
    let back = read_csv(&path).unwrap();
    assert_eq!(back, t);
    assert_eq!(to_csv_string(&back).unwrap(), std::fs::read_to_string(&path).unwrap());
    assert_eq!(parse_csv(&std::fs::read_to_string(&path).unwrap()).unwrap(), t);
}
