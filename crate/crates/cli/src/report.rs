//! Text and CSV renderings of summaries, events and link statistics.

use std::fmt::Write as _;

use anyhow::Result;
use serde::Serialize;

use rcdaq::analysis::{Comparison, DetectionEvent, EventDetail, EventKind, RunSummary};
use rcdaq::link::channel::ChannelStats;
use rcdaq::link::reassembly::ReassemblyStats;

#[derive(Debug, Serialize)]
pub struct LinkStats {
    pub link: ReassemblyStats,
    pub channel: ChannelStats,
}

fn kind_name(kind: EventKind) -> &'static str {
    match kind {
        EventKind::DiffFailure => "diff_failure",
        EventKind::Crash => "crash",
        EventKind::ThermalCritical => "thermal_critical",
        EventKind::BatteryLow => "battery_low",
    }
}

fn detail_text(detail: &EventDetail) -> String {
    match *detail {
        EventDetail::WheelDifference { normalized } => format!("front-rear {normalized:+.3}"),
        EventDetail::Tumbles { count } => format!("tumbles={count}"),
        EventDetail::TemperatureShift { sensor, spread_c } => format!("sensor={sensor} spread={spread_c:.1}C"),
        EventDetail::Voltage { volts } => format!("{volts:.2}V"),
    }
}

fn summary_rows(s: &RunSummary) -> Vec<(&'static str, String)> {
    vec![
        ("records", s.records.to_string()),
        ("tick_rate_hz", s.tick_rate_hz.to_string()),
        ("duration_s", format!("{:.2}", s.duration_s)),
        ("laps", s.laps.to_string()),
        ("mean_speed_kmh", format!("{:.2}", s.mean_speed_kmh)),
        ("max_speed_kmh", format!("{:.2}", s.max_speed_kmh)),
        ("steering_corrections", s.steering_corrections.to_string()),
        ("temp_delta_servo_c", format!("{:.3}", s.temp_delta_c[0])),
        ("temp_delta_esc_c", format!("{:.3}", s.temp_delta_c[1])),
        ("temp_delta_motor_c", format!("{:.3}", s.temp_delta_c[2])),
        ("temp_delta_battery_c", format!("{:.3}", s.temp_delta_c[3])),
        ("gps_spacing_mean_m", format!("{:.3}", s.gps_spacing_mean_m)),
        ("charge_mah", format!("{:.1}", s.charge_mah)),
        ("straight_lr_norm", format!("{:+.4}", s.straight.mean_lr_norm)),
        ("left_turn_lr_norm", format!("{:+.4}", s.left.mean_lr_norm)),
        ("right_turn_lr_norm", format!("{:+.4}", s.right.mean_lr_norm)),
    ]
}

pub fn summary_text(s: &RunSummary) -> String {
    let mut out = format!("scenario {}\n", s.scenario);
    for (k, v) in summary_rows(s) {
        let _ = writeln!(out, "  {k:<22} {v}");
    }
    out
}

fn csv_string(rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn summary_csv(s: &RunSummary) -> Result<String> {
    let header = vec!["metric".to_string(), "value".to_string()];
    let mut rows = vec![header, vec!["scenario".into(), s.scenario.clone()]];
    rows.extend(summary_rows(s).into_iter().map(|(k, v)| vec![k.to_string(), v]));
    csv_string(rows)
}

pub fn analysis_text(s: &RunSummary, events: &[DetectionEvent]) -> String {
    let mut out = summary_text(s);
    if events.is_empty() {
        out.push_str("no events\n");
    }
    for e in events {
        let mark = if e.is_critical() { "CRITICAL" } else { "warning" };
        let _ = writeln!(
            out,
            "{mark:<8} {:>9.1} s  {:<16} {}",
            e.t_ms as f64 / 1000.0,
            kind_name(e.kind),
            detail_text(&e.detail)
        );
    }
    out
}

pub fn events_csv(events: &[DetectionEvent]) -> Result<String> {
    let header = ["t_ms", "kind", "critical", "detail"].map(String::from).to_vec();
    let rows = events.iter().map(|e| {
        vec![
            e.t_ms.to_string(),
            kind_name(e.kind).to_string(),
            e.is_critical().to_string(),
            detail_text(&e.detail),
        ]
    });
    csv_string(std::iter::once(header).chain(rows))
}

pub fn link_text(st: &LinkStats) -> String {
    let l = &st.link;
    let c = &st.channel;
    format!(
        "records  sent {} delivered {} lost {} (corrupt {})\n\
         packets  in {} out {} dropped {} duplicated {} corrupted {} rejected {} dup-ignored {} late {}\n\
         airtime  {:.3} s\n",
        l.records_sent,
        l.records_delivered,
        l.records_lost,
        l.records_corrupt,
        c.packets_in,
        c.packets_out,
        c.dropped,
        c.duplicated,
        c.corrupted,
        l.packets_corrupt_rejected,
        l.duplicates_ignored,
        l.late_ignored,
        c.airtime_s
    )
}

pub fn link_csv(st: &LinkStats) -> Result<String> {
    let l = &st.link;
    let c = &st.channel;
    let pairs: [(&str, String); 14] = [
        ("records_sent", l.records_sent.to_string()),
        ("records_delivered", l.records_delivered.to_string()),
        ("records_lost", l.records_lost.to_string()),
        ("records_corrupt", l.records_corrupt.to_string()),
        ("packets_dropped", l.packets_dropped.to_string()),
        ("packets_corrupt_rejected", l.packets_corrupt_rejected.to_string()),
        ("duplicates_ignored", l.duplicates_ignored.to_string()),
        ("late_ignored", l.late_ignored.to_string()),
        ("packets_in", c.packets_in.to_string()),
        ("packets_out", c.packets_out.to_string()),
        ("dropped", c.dropped.to_string()),
        ("duplicated", c.duplicated.to_string()),
        ("corrupted", c.corrupted.to_string()),
        ("airtime_s", c.airtime_s.to_string()),
    ];
    let header = vec!["metric".to_string(), "value".to_string()];
    csv_string(std::iter::once(header).chain(pairs.into_iter().map(|(k, v)| vec![k.to_string(), v])))
}

fn comparison_rows(c: &Comparison) -> Vec<(&'static str, f64, f64, f64)> {
    let (a, b, d) = (&c.a, &c.b, &c.delta);
    vec![
        ("duration_s", a.duration_s, b.duration_s, d.duration_s),
        ("laps", a.laps as f64, b.laps as f64, d.laps as f64),
        ("mean_speed_kmh", a.mean_speed_kmh, b.mean_speed_kmh, d.mean_speed_kmh),
        ("max_speed_kmh", a.max_speed_kmh, b.max_speed_kmh, d.max_speed_kmh),
        (
            "steering_corrections",
            a.steering_corrections as f64,
            b.steering_corrections as f64,
            d.steering_corrections as f64,
        ),
        ("temp_delta_servo_c", a.temp_delta_c[0], b.temp_delta_c[0], d.temp_delta_c[0]),
        ("temp_delta_esc_c", a.temp_delta_c[1], b.temp_delta_c[1], d.temp_delta_c[1]),
        ("temp_delta_motor_c", a.temp_delta_c[2], b.temp_delta_c[2], d.temp_delta_c[2]),
        ("temp_delta_battery_c", a.temp_delta_c[3], b.temp_delta_c[3], d.temp_delta_c[3]),
        ("gps_spacing_mean_m", a.gps_spacing_mean_m, b.gps_spacing_mean_m, d.gps_spacing_mean_m),
        ("charge_mah", a.charge_mah, b.charge_mah, d.charge_mah),
        ("straight_lr_norm", a.straight.mean_lr_norm, b.straight.mean_lr_norm, d.straight_lr_norm),
        ("left_turn_lr_norm", a.left.mean_lr_norm, b.left.mean_lr_norm, d.left_lr_norm),
        ("right_turn_lr_norm", a.right.mean_lr_norm, b.right.mean_lr_norm, d.right_lr_norm),
    ]
}

pub fn comparison_text(c: &Comparison) -> String {
    let mut out = format!("{:<22} {:>12} {:>12} {:>12}\n", "metric", c.a.scenario, c.b.scenario, "b - a");
    for (k, a, b, d) in comparison_rows(c) {
        let _ = writeln!(out, "{k:<22} {a:>12.3} {b:>12.3} {d:>+12.3}");
    }
    out
}

pub fn comparison_csv(c: &Comparison) -> Result<String> {
    let header = ["metric", "a", "b", "delta"].map(String::from).to_vec();
    let rows = comparison_rows(c)
        .into_iter()
        .map(|(k, a, b, d)| vec![k.to_string(), a.to_string(), b.to_string(), d.to_string()]);
    csv_string(std::iter::once(header).chain(rows))
}
