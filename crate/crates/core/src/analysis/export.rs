//! Per-tick CSV export for external plotting.

use std::io::Write;

use crate::encoder::DEFAULT_WHEEL_DIAMETER_M;
use crate::record::TelemetryRecord;

use super::summary::LapBoundary;
use super::{wheel_differences, wheel_kmh, AnalysisError};

pub const CSV_COLUMNS: [&str; 17] = [
    "t_ms",
    "v_fl",
    "v_fr",
    "v_rl",
    "v_rr",
    "yaw",
    "pitch",
    "roll",
    "diff_lr_norm",
    "diff_fr_norm",
    "t_ss",
    "t_esc1",
    "t_m1",
    "t_bp",
    "servo_us",
    "throttle_us",
    "lap",
];

/// Writes one row per record. Wheel speeds are km/h; `lap` counts the
/// boundaries at or before the record.
pub fn export_csv<W: Write>(
    records: &[TelemetryRecord],
    laps: &[LapBoundary],
    out: W,
) -> Result<(), AnalysisError> {
    let err = |e: csv::Error| AnalysisError::Csv(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS).map_err(err)?;
    for r in records {
        let v = wheel_kmh(r, DEFAULT_WHEEL_DIAMETER_M);
        let (lr, fr) = wheel_differences(r);
        let lap = laps.iter().filter(|b| b.seq <= r.seq).count();
        let row: [String; 17] = [
            r.timestamp_ms.to_string(),
            v[0].to_string(),
            v[1].to_string(),
            v[2].to_string(),
            v[3].to_string(),
            r.euler_deg[0].to_string(),
            r.euler_deg[1].to_string(),
            r.euler_deg[2].to_string(),
            lr.to_string(),
            fr.to_string(),
            r.temps_c[0].to_string(),
            r.temps_c[1].to_string(),
            r.temps_c[2].to_string(),
            r.temps_c[3].to_string(),
            r.servo_pwm_us.to_string(),
            r.throttle_pwm_us.to_string(),
            lap.to_string(),
        ];
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| AnalysisError::Csv(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::tests::rec;
    use std::f64::consts::PI;

    #[test]
    fn header_only_for_empty() {
        let mut buf = Vec::new();
        export_csv(&[], &[], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(text.trim_end(), CSV_COLUMNS.join(","));
    }

    #[test]
    fn wheel_column_is_kmh() {
        let mut r = rec(0);
        r.wheel_speed_rpm = [500.0, 0.0, 0.0, 0.0];
        let mut buf = Vec::new();
        export_csv(&[r, rec(1)], &[LapBoundary { t_ms: 150, seq: 1 }], &mut buf).unwrap();
        let mut rdr = csv::Reader::from_reader(buf.as_slice());
        let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
        assert_eq!(rows.len(), 2);
        let v_fl: f64 = rows[0][1].parse().unwrap();
        // independent: circumference × rev/min × 60 min/h
        let oracle = 0.12 * PI * 500.0 * 60.0 / 1000.0;
        assert!((v_fl - oracle).abs() < 1e-9);
        assert_eq!(&rows[0][16], "0");
        assert_eq!(&rows[1][16], "1");
    }
}
