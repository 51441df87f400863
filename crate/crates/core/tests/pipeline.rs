use std::collections::HashMap;

use rcdaq::analysis::{compare_runs, lap_segmentation, summarize, AnalysisConfig, AnalysisError, SummaryDelta};
use rcdaq::link::channel::ChannelConfig;
use rcdaq::link::{transmit_records, transmit_records_pipelined};
use rcdaq::record::serialize_record;
use rcdaq::session_log::SessionLog;
use rcdaq::sim::{run_scenario, Scenario, ScenarioKind, SimRun, Track};

fn run(kind: ScenarioKind, seed: u64) -> SimRun {
    run_scenario(&Scenario::preset(kind).with_seed(seed), &Track::builtin()).unwrap()
}

#[test]
fn detected_laps_line_up_with_truth() {
    let r = run(ScenarioKind::FastLap, 42);
    let cfg = AnalysisConfig::default();
    let laps = lap_segmentation(r.log.records(), &cfg.start_line, &cfg.origin, cfg.lap_debounce_s).unwrap();
    assert_eq!(laps.len(), r.truth.lap_boundaries_ms.len());
    for (b, t) in laps.iter().zip(&r.truth.lap_boundaries_ms) {
        assert!((b.t_ms as i64 - *t as i64).abs() <= 1000, "{} vs {t}", b.t_ms);
    }
}

#[test]
fn gps_dropout_does_not_change_lap_count() {
    let cfg = AnalysisConfig::default();
    for kind in [ScenarioKind::SlowLap, ScenarioKind::FastLap] {
        let clean = Scenario::preset(kind);
        let mut patchy = clean.clone();
        patchy.gps.dropout_prob = 0.01;
        let track = Track::builtin();
        let a = summarize(&run_scenario(&clean, &track).unwrap().log, &cfg);
        let run_b = run_scenario(&patchy, &track).unwrap();
        assert!(run_b.log.records().iter().any(|r| !r.has_gps_fix()));
        let b = summarize(&run_b.log, &cfg);
        assert_eq!(a.laps, b.laps, "{kind}");
    }
}

#[test]
fn simulated_log_survives_a_hostile_link() {
    let r = run(ScenarioKind::FastLap, 7);
    let records = r.log.records().to_vec();
    let originals: HashMap<u32, _> = records.iter().map(|x| (x.seq, serialize_record(x).unwrap())).collect();
    let cfg = ChannelConfig {
        drop_prob: 0.03,
        duplicate_prob: 0.05,
        reorder_window: 6,
        corrupt_prob: 0.02,
        seed: 11,
        ..ChannelConfig::default()
    };
    let report = transmit_records(&records, &cfg).unwrap();
    let s = report.stats;
    assert_eq!(s.records_sent, records.len() as u64);
    assert_eq!(s.records_delivered + s.records_lost, s.records_sent);
    assert!(s.records_delivered > 0 && s.records_lost > 0);
    for (rec, bytes) in report.delivered.iter().zip(&report.delivered_bytes) {
        assert_eq!(&originals[&rec.seq], bytes);
    }
    let seqs: Vec<u32> = report.delivered.iter().map(|x| x.seq).collect();
    assert!(seqs.windows(2).all(|w| w[0] < w[1]));

    let threaded = transmit_records_pipelined(records, &cfg).unwrap();
    assert_eq!(threaded.delivered, report.delivered);
    assert_eq!(threaded.stats, report.stats);
}

#[test]
fn saved_log_analyses_the_same() {
    let r = run(ScenarioKind::SlowLap, 3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("slow.trgy");
    r.log.save(&path).unwrap();
    let back = SessionLog::load(&path).unwrap();
    assert_eq!(back.records(), r.log.records());
    let cfg = AnalysisConfig::default();
    assert_eq!(summarize(&back, &cfg), summarize(&r.log, &cfg));
}

#[test]
fn comparison_is_antisymmetric() {
    let a = run(ScenarioKind::SlowLap, 1).log;
    let b = run(ScenarioKind::FastLap, 1).log;
    let cfg = AnalysisConfig::default();
    let ab = compare_runs(&a, &b, &cfg).unwrap().delta;
    let ba = compare_runs(&b, &a, &cfg).unwrap().delta;
    let sum = |x: &SummaryDelta, y: &SummaryDelta| {
        [
            x.duration_s + y.duration_s,
            (x.laps + y.laps) as f64,
            x.mean_speed_kmh + y.mean_speed_kmh,
            (x.steering_corrections + y.steering_corrections) as f64,
            x.temp_delta_c.iter().zip(&y.temp_delta_c).map(|(p, q)| p + q).sum(),
            x.gps_spacing_mean_m + y.gps_spacing_mean_m,
            x.charge_mah + y.charge_mah,
        ]
    };
    assert!(sum(&ab, &ba).iter().all(|v| v.abs() < 1e-9));
    assert!(ab.laps > 0);

    let mut other = SessionLog::new("other", 20);
    other.append(a.records()[0]).unwrap();
    assert_eq!(
        compare_runs(&a, &other, &cfg).unwrap_err(),
        AnalysisError::IncomparableRuns { a: 10, b: 20 }
    );
}
