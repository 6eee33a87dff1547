use proptest::prelude::*;

use switching_diffusion::config::RunConfig;
use switching_diffusion::experiments::{DriftRow, RunOutput, SuiteReport, Verdict};
use switching_diffusion::report::{ReportBundle, DRIFT_COLUMNS, REPORT_COLUMNS};
use switching_diffusion::stats::CiMethod;

fn config() -> RunConfig {
    RunConfig::from_toml_str("schema_version = 1\nsuites = [\"conditions\"]\n[model]\npreset = \"canonical-1d\"\nm1 = 8.0\n").unwrap()
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e300f64..1e300, -1.0f64..1.0, Just(0.0), Just(f64::MIN_POSITIVE), Just(f64::MAX)]
}

fn verdict() -> impl Strategy<Value = Verdict> {
    prop_oneof![Just(Verdict::Pass), Just(Verdict::Fail), Just(Verdict::Diagnostic)]
}

fn report() -> impl Strategy<Value = SuiteReport> {
    (
        "[a-z0-9.-]{1,20}",
        "[ -~]{0,40}",
        prop::array::uniform4(finite()),
        prop::option::of(finite()),
        prop::option::of(finite()),
        0usize..1_000_000,
        0.0f64..1.0,
        prop_oneof![Just(CiMethod::Normal), Just(CiMethod::Bootstrap), Just(CiMethod::Exact)],
        verdict(),
        any::<u64>(),
    )
        .prop_map(|(id, claim, [estimate, se, lo, hi], threshold, margin, n, cens, method, verdict, seed)| SuiteReport {
            check_id: id.clone(),
            suite: id.split('.').next().unwrap().to_string(),
            claim,
            estimate,
            se: se.abs(),
            threshold,
            margin,
            ci: [lo, hi],
            n,
            censored_fraction: cens,
            ci_method: method,
            verdict,
            config_hash: "ab".repeat(32),
            seed,
        })
}

fn drift_row() -> impl Strategy<Value = DriftRow> {
    (1u32..=3, prop::array::uniform5(finite()), 0usize..1_000_000, verdict()).prop_map(|(m, [y, e, se, lo, hi], n, verdict)| DriftRow {
        suite: "lemma9".into(),
        y_radius: y,
        m,
        estimate: e,
        se,
        ci_lo: lo,
        ci_hi: hi,
        n,
        verdict,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn json_round_trips(reports in prop::collection::vec(report(), 0..8), rows in prop::collection::vec(drift_row(), 0..4), m1 in 0.1f64..1e4) {
        let cfg = config();
        let out = RunOutput { model: cfg.resolved_model().unwrap(), m1, m1_search: None, reports, drift_table: rows };
        let bundle = ReportBundle::new(&cfg, &cfg.suites, out);
        let text = bundle.to_json();
        let back = ReportBundle::from_json(&text).unwrap();
        prop_assert_eq!(&back, &bundle);
        prop_assert_eq!(back.to_json(), text);
    }

    #[test]
    fn csv_has_fixed_columns(reports in prop::collection::vec(report(), 1..8), rows in prop::collection::vec(drift_row(), 1..4)) {
        let cfg = config();
        let out = RunOutput { model: cfg.resolved_model().unwrap(), m1: 8.0, m1_search: None, reports: reports.clone(), drift_table: rows.clone() };
        let bundle = ReportBundle::new(&cfg, &cfg.suites, out);
        let text = bundle.reports_csv();
        let mut r = csv::Reader::from_reader(text.as_bytes());
        prop_assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), REPORT_COLUMNS.to_vec());
        let recs: Vec<_> = r.records().map(|x| x.unwrap()).collect();
        prop_assert_eq!(recs.len(), reports.len());
        for (rec, rep) in recs.iter().zip(&reports) {
            prop_assert_eq!(&rec[1], rep.check_id.as_str());
            prop_assert_eq!(rec[4].parse::<f64>().unwrap(), rep.estimate);
            prop_assert_eq!(&rec[15], rep.claim.as_str());
        }
        let text = bundle.drift_csv();
        let mut r = csv::Reader::from_reader(text.as_bytes());
        prop_assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), DRIFT_COLUMNS.to_vec());
        prop_assert_eq!(r.records().count(), rows.len());
    }
}

#[test]
fn run_id_depends_on_seed_and_suites() {
    let cfg = config();
    let mk = |cfg: &RunConfig, suites: &[String]| {
        let out = RunOutput { model: cfg.resolved_model().unwrap(), m1: 8.0, m1_search: None, reports: vec![], drift_table: vec![] };
        ReportBundle::new(cfg, suites, out).run_id
    };
    let a = mk(&cfg, &cfg.suites);
    assert_eq!(a, mk(&cfg, &cfg.suites));
    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(a, mk(&other, &cfg.suites));
    assert_ne!(a, mk(&cfg, &["lemma11".to_string()]));
}
