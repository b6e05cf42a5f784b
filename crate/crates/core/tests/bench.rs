use dfpas_core::bench::{emit_csv, run_sweep, Pipeline, ScenarioConfig, SchemeId, SweepAxis};

fn p0_sweep(values: Vec<f64>) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(Pipeline::SingleTdma);
    cfg.name = "p0".into();
    cfg.seeds = vec![0, 1, 2];
    cfg.record_runtime = false;
    cfg.sweep = Some(SweepAxis {
        parameter: "transmit_power_dbm".into(),
        values,
    });
    cfg
}

#[test]
fn dual_feed_row_dominates_single_feed_row() {
    let cfg = p0_sweep(vec![20.0, 25.0, 30.0, 35.0, 40.0]);
    let rows = run_sweep(&cfg).unwrap();
    assert_eq!(rows.len(), 5 * 2 * 3);
    for cell in rows.chunks(6) {
        let (df, sf) = cell.split_at(3);
        for (d, s) in df.iter().zip(sf) {
            assert_eq!((d.scheme.as_str(), s.scheme.as_str()), ("DF-PAS", "SF-PAS"));
            assert_eq!((d.seed, d.swept_value), (s.seed, s.swept_value));
            assert!(d.value >= s.value, "{d:?} vs {s:?}");
        }
    }
}

#[test]
fn rerun_is_byte_identical_after_the_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = p0_sweep(vec![30.0]);
    cfg.schemes = SchemeId::ALL.to_vec();
    let mut texts = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let path = dir.path().join(name);
        emit_csv(&run_sweep(&cfg).unwrap(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let (stamp, rest) = text.split_once('\n').unwrap();
        assert!(stamp.starts_with('#'));
        texts.push(rest.to_owned());
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn empty_sweep_values_give_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.csv");
    emit_csv(&run_sweep(&p0_sweep(vec![])).unwrap(), &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 2);
}

#[test]
fn unknown_axis_names_the_field() {
    let mut cfg = p0_sweep(vec![1.0]);
    cfg.sweep.as_mut().unwrap().parameter = "bogus".into();
    let err = run_sweep(&cfg).unwrap_err().to_string();
    assert!(err.contains("sweep.parameter") && err.contains("bogus"), "{err}");
}
