use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn rcdaq(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rcdaq")).args(args).current_dir(dir).output().expect("spawn rcdaq")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn simulate(dir: &Path, scenario: &str, name: &str, extra: &[&str]) -> PathBuf {
    let mut args = vec!["simulate", "--scenario", scenario, "--out", name];
    args.extend_from_slice(extra);
    let out = rcdaq(&args, dir);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    dir.join(name)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = simulate(dir.path(), "slow_lap", "a.trgy", &["--seed", "42"]);
    let b = simulate(dir.path(), "slow_lap", "b.trgy", &["--seed", "42"]);
    let c = simulate(dir.path(), "slow_lap", "c.trgy", &["--seed", "43"]);
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes.len(), 46 + 2337 * 228);
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    assert_ne!(bytes, std::fs::read(&c).unwrap());
}

#[test]
fn crash_sidecar_passes_tumbles_through() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("crash.toml"), "[scenario]\nname = \"crash\"\n[crash]\ntumbles = 2\n").unwrap();
    let out = rcdaq(&["simulate", "--config", "crash.toml", "--out", "crash.trgy"], dir.path());
    assert_eq!(code(&out), 0);
    let truth = json(&dir.path().join("crash.trgy.truth.json"));
    let crashes = truth["crashes"].as_array().unwrap();
    assert_eq!(crashes.len(), 1);
    assert_eq!(crashes[0]["tumbles"], 2);
}

#[test]
fn input_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[scenario]\nname = \"slow_lap\"\n[track]\nfile = \"missing.txt\"\n")
        .unwrap();
    let out = rcdaq(&["simulate", "--config", "bad.toml", "--out", "x.trgy"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    std::fs::write(dir.path().join("junk.trgy"), b"not a log at all").unwrap();
    for cmd in ["analyze", "export"] {
        assert_eq!(code(&rcdaq(&[cmd, "junk.trgy"], dir.path())), 2, "{cmd}");
    }
    assert_eq!(code(&rcdaq(&["transmit", "absent.trgy", "--out", "r.trgy"], dir.path())), 2);
    assert_eq!(code(&rcdaq(&["transmit", "junk.trgy", "--out", "r.trgy", "--drop-prob", "2"], dir.path())), 2);
    assert_eq!(code(&rcdaq(&["no-such-command"], dir.path())), 2);
}

#[test]
fn analyze_exit_codes_gate_on_critical_events() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path(), "slow_lap", "slow.trgy", &[]);
    simulate(dir.path(), "locked_rear_diff", "diff.trgy", &[]);
    simulate(dir.path(), "crash", "crash.trgy", &[]);

    let slow = rcdaq(&["analyze", "slow.trgy"], dir.path());
    assert_eq!(code(&slow), 0);
    assert!(String::from_utf8_lossy(&slow.stdout).contains("no events"));

    let diff = rcdaq(&["analyze", "diff.trgy", "--format", "csv"], dir.path());
    assert_eq!(code(&diff), 3);
    let text = String::from_utf8(diff.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.contains(",diff_failure,")).count(), 1);

    let crash = rcdaq(&["analyze", "crash.trgy", "--format", "csv", "--out", "events.csv"], dir.path());
    assert_eq!(code(&crash), 3);
    let written = std::fs::read_to_string(dir.path().join("events.csv")).unwrap();
    assert!(written.lines().any(|l| l.contains(",crash,") && l.ends_with("tumbles=2")));
}

#[test]
fn transmit_conserves_records_and_filters_corruption() {
    let dir = TempDir::new().unwrap();
    let log = simulate(dir.path(), "fast_lap", "fast.trgy", &[]);

    let clean = rcdaq(&["transmit", "fast.trgy", "--out", "clean.trgy"], dir.path());
    assert_eq!(code(&clean), 0);
    assert_eq!(std::fs::read(&log).unwrap(), std::fs::read(dir.path().join("clean.trgy")).unwrap());

    let args = ["transmit", "fast.trgy", "--out", "rx.trgy", "--drop-prob", "0.05", "--corrupt-prob", "0.01"];
    let lossy = rcdaq(&[&args[..], &["--reorder", "4", "--seed", "5"]].concat(), dir.path());
    assert_eq!(code(&lossy), 0);
    let stats = json(&dir.path().join("rx.trgy.stats.json"));
    let link = &stats["link"];
    let sent = link["records_sent"].as_u64().unwrap();
    let delivered = link["records_delivered"].as_u64().unwrap();
    assert_eq!(sent, 2337);
    assert_eq!(delivered + link["records_lost"].as_u64().unwrap(), sent);
    assert!(stats["channel"]["corrupted"].as_u64().unwrap() > 0);

    // every record in the received log passed its CRC and matches the original
    let original = std::fs::read(&log).unwrap();
    let received = std::fs::read(dir.path().join("rx.trgy")).unwrap();
    assert_eq!(received.len() as u64, 46 + delivered * 228);
    for rec in received[46..].chunks(228) {
        let seq = u32::from_le_bytes(rec[..4].try_into().unwrap()) as usize;
        assert_eq!(rec, &original[46 + seq * 228..46 + (seq + 1) * 228]);
    }

    let again = rcdaq(&[&args[..], &["--reorder", "4", "--seed", "5"]].concat(), dir.path());
    assert_eq!(lossy.stdout, again.stdout);
}

#[test]
fn export_row_counts() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path(), "slow_lap", "slow.trgy", &[]);
    let out = rcdaq(&["export", "slow.trgy", "--out", "slow.csv"], dir.path());
    assert_eq!(code(&out), 0);
    let csv = std::fs::read_to_string(dir.path().join("slow.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2337 + 1);
    assert!(csv.starts_with("t_ms,v_fl,v_fr,v_rl,v_rr,"));
    assert!(csv.lines().last().unwrap().ends_with(",3"));

    // an empty log (header only) exports just the column row
    let bytes = std::fs::read(dir.path().join("slow.trgy")).unwrap();
    std::fs::write(dir.path().join("empty.trgy"), &bytes[..46]).unwrap();
    let empty = rcdaq(&["export", "empty.trgy"], dir.path());
    assert_eq!(code(&empty), 0);
    assert_eq!(String::from_utf8(empty.stdout).unwrap().lines().count(), 1);
}

#[test]
fn compare_is_antisymmetric() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path(), "slow_lap", "slow.trgy", &[]);
    simulate(dir.path(), "fast_lap", "fast.trgy", &[]);
    let run = |a: &str, b: &str, out: &str| {
        let o = rcdaq(&["compare", a, b, "--out", out], dir.path());
        assert_eq!(code(&o), 0);
        json(&dir.path().join(out))["delta"].clone()
    };
    let same = run("slow.trgy", "slow.trgy", "same.json");
    for (_, v) in same.as_object().unwrap() {
        let all_zero = match v {
            serde_json::Value::Array(xs) => xs.iter().all(|x| x.as_f64() == Some(0.0)),
            x => x.as_f64() == Some(0.0),
        };
        assert!(all_zero, "{v}");
    }
    let sf = run("slow.trgy", "fast.trgy", "sf.json");
    let fs = run("fast.trgy", "slow.trgy", "fs.json");
    for (k, v) in sf.as_object().unwrap() {
        let flat = |x: &serde_json::Value| -> Vec<f64> {
            match x {
                serde_json::Value::Array(xs) => xs.iter().map(|y| y.as_f64().unwrap()).collect(),
                y => vec![y.as_f64().unwrap()],
            }
        };
        for (p, q) in flat(v).iter().zip(flat(&fs[k])) {
            assert!((p + q).abs() < 1e-9, "{k}: {p} vs {q}");
        }
    }
    let motor = sf["temp_delta_c"][2].as_f64().unwrap();
    assert!(motor > 0.0);
}

#[test]
fn compare_rejects_mismatched_tick_rates() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path(), "slow_lap", "slow.trgy", &[]);
    std::fs::write(dir.path().join("hz20.toml"), "[scenario]\nname = \"slow_lap\"\ntick_rate_hz = 20\nduration_s = 5.0\n")
        .unwrap();
    assert_eq!(code(&rcdaq(&["simulate", "--config", "hz20.toml", "--out", "hz20.trgy"], dir.path())), 0);
    assert_eq!(code(&rcdaq(&["compare", "slow.trgy", "hz20.trgy"], dir.path())), 2);
}
