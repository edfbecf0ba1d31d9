use xtalk_core::mitigation::{ExperimentSeries, SeriesMeta, SeriesRow};
use xtalk_core::runner::{run, summarize_series, Pipeline, RunConfig};

#[test]
fn reference_grid_has_fourteen_fifteen_step_series() {
    let mut cfg = RunConfig::reference();
    assert_eq!((cfg.rc.count, cfg.shots, cfg.bcs.n_steps), (300, 32000, 15));
    cfg.rc.count = 2;
    cfg.nec.count = Some(2);
    cfg.shots = 200;
    let dir = tempfile::tempdir().unwrap();
    let manifest = run(&cfg, dir.path()).unwrap();
    let csvs: Vec<_> = manifest.outputs.iter().filter(|f| f.ends_with(".csv")).collect();
    assert_eq!(csvs.len(), 14);
    for f in csvs {
        let text = std::fs::read_to_string(dir.path().join(f)).unwrap();
        assert_eq!(text.lines().count(), 16, "{f}");
    }
    let per_experiment: Vec<usize> = Pipeline::new(cfg)
        .unwrap()
        .experiments
        .iter()
        .map(|e| e.observables.len())
        .collect();
    assert_eq!(per_experiment, vec![7, 7]);
}

#[test]
fn perfect_pipeline_scores_zero() {
    let row = |v: f64| {
        let mut r = SeriesRow {
            time: 0.2,
            observable: "X0".into(),
            raw: v,
            rc_mean: v,
            rc_stderr: 0.0,
            nec_mean: 1.0,
            nec_stderr: 0.0,
            mitigated: 0.0,
            mitigated_err: 0.0,
            trotter_ideal: v,
            exact: v,
            reliable_flag: false,
        };
        r.finish();
        r
    };
    let s = ExperimentSeries {
        meta: SeriesMeta {
            experiment: "xyz".into(),
            observable: "X0".into(),
            rc_mode: "crosstalk".into(),
            shots: 1,
            twirls: 1,
            master_seed: 0,
        },
        rows: vec![row(0.3), row(-0.7), row(0.0)],
    };
    let sum = summarize_series([&s]);
    for v in sum.variants.values() {
        assert_eq!(v.mean_relative_error, 0.0);
        assert_eq!((v.cells, v.skipped), (2, 1));
    }
}
