use rockrelax::experiments::{
    compare_expected, presets, registered_expectations, run_preset, run_rate, select_claims, ChanceSetting, RunOptions,
    SolveReport, COLUMNS,
};
use rockrelax::{Error, XReal};

#[test]
fn exact_rate_run_has_zero_error() {
    let opts = RunOptions { exact: true, ..RunOptions::default() };
    let r = run_rate(ChanceSetting::S1, &presets::rate_s1(), 20, &opts).unwrap();
    for row in &r.rows {
        assert_eq!(row.d_tv, Some(0.0));
        assert_eq!(row.inf_plugin, XReal::ZERO);
        assert_eq!(row.inf_stabilized, XReal::ZERO);
        assert_eq!(row.eta_proxy, Some(0.0));
    }
}

#[test]
fn registered_claims_hold_on_default_runs() {
    for name in ["discrete-I", "discrete-II", "rate-s1"] {
        let r = run_preset(name, 50, &RunOptions::default()).unwrap();
        for v in compare_expected(&r, &registered_expectations(&r)).unwrap() {
            assert!(v.pass, "{name}: {v:?}");
        }
    }
}

#[test]
fn unknown_claim_is_rejected() {
    let r = run_preset("finite-II", 5, &RunOptions::default()).unwrap();
    assert!(matches!(select_claims(&r, &["no-such-claim".into()]), Err(Error::UnknownClaim(_))));
}

#[test]
fn report_round_trips_through_json() {
    let r = run_preset("finite-I", 5, &RunOptions::default()).unwrap();
    let text = serde_json::to_string(&r).unwrap();
    let back: SolveReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, r);
    assert!(text.contains("\"+inf\""));
}

#[test]
fn csv_has_fixed_header_and_one_line_per_row() {
    let r = run_preset("discrete-II", 6, &RunOptions::default()).unwrap();
    let csv = r.to_csv().unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), COLUMNS.join(","));
    assert_eq!(lines.count(), r.rows.len());
    assert!(!csv.contains("-0,"));
}

#[test]
fn horizon_below_minimum_is_rejected() {
    assert!(run_preset("finite-I", 4, &RunOptions::default()).is_err());
    assert!(run_preset("no-such-preset", 10, &RunOptions::default()).is_err());
}
