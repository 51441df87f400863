#![allow(dead_code)]

use rand::Rng;
use rcdaq::record::TelemetryRecord;

/// A record with every field drawn from its valid range.
pub fn random_record<R: Rng>(rng: &mut R, seq: u32) -> TelemetryRecord {
    let mut q = [0f32; 4];
    for c in q.iter_mut() {
        *c = rng.random_range(-1.0..1.0);
    }
    TelemetryRecord {
        seq,
        timestamp_ms: (seq as u64 + 1) * 100,
        wheel_speed_rpm: std::array::from_fn(|_| rng.random_range(0.0..5000.0)),
        motor_speed_rpm: rng.random_range(0.0..60000.0),
        quat: q,
        euler_deg: std::array::from_fn(|_| rng.random_range(-180.0..180.0)),
        accel_mps2: std::array::from_fn(|_| rng.random_range(-50.0..50.0)),
        gps_lat: rng.random_range(-90.0..90.0),
        gps_lon: rng.random_range(-180.0..180.0),
        gps_speed_kmh: rng.random_range(0.0..120.0),
        temps_c: std::array::from_fn(|_| rng.random_range(-20.0..120.0)),
        rail_v: std::array::from_fn(|_| rng.random_range(0.0..20.0)),
        rail_i: std::array::from_fn(|_| rng.random_range(0.0..300.0)),
        servo_pwm_us: rng.random_range(1000..=2000),
        throttle_pwm_us: rng.random_range(1000..=2000),
        status_flags: rng.random_range(0..32),
        gps_fix: rng.random_range(0..3),
        gps_sats: rng.random_range(0..20),
    }
}

pub fn random_records(seed: u64, n: usize) -> Vec<TelemetryRecord> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n as u32).map(|s| random_record(&mut rng, s)).collect()
}
