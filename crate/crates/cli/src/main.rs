use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use rcdaq::analysis::{
    compare_runs, detect_all, export_csv, lap_segmentation, summarize, AnalysisConfig, DetectionEvent,
};
use rcdaq::link::channel::ChannelConfig;
use rcdaq::link::transmit_records_pipelined;
use rcdaq::session_log::SessionLog;
use rcdaq::sim::{load_track, run_scenario, Scenario, ScenarioKind};

mod report;

/// Exit status when a critical event (crash, diff failure, thermal) is found.
const EXIT_CRITICAL: u8 = 3;
const EXIT_INPUT: u8 = 2;

#[derive(Parser)]
#[command(name = "rcdaq", version, about = "RC vehicle telemetry: simulate, transmit, analyse")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write the session log plus a ground-truth sidecar.
    Simulate {
        /// Scenario TOML file; overrides --scenario.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Built-in scenario when no config is given.
        #[arg(long, default_value = "slow_lap")]
        scenario: ScenarioKind,
        #[arg(long)]
        seed: Option<u64>,
        /// Log file to write; `<out>.truth.json` is written next to it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Send a log through the simulated radio link and write what arrives.
    Transmit {
        input: PathBuf,
        /// Scenario TOML whose [channel] table sets the link parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Channel seed.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        channel: ChannelArgs,
        /// Received log; link statistics go to `<out>.stats.json`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run all detectors and summarise a log. Exits 3 on critical events.
    Analyze {
        log: PathBuf,
        /// Scenario TOML giving the track and GPS origin used for laps.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Summarise two logs and report b minus a.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the comparison as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Write one CSV row per record.
    Export {
        log: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// CSV file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ChannelArgs {
    #[arg(long)]
    drop_prob: Option<f64>,
    #[arg(long)]
    corrupt_prob: Option<f64>,
    #[arg(long)]
    duplicate_prob: Option<f64>,
    /// Reorder window in packets.
    #[arg(long)]
    reorder: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Simulate { config, scenario, seed, out, format } => {
            let mut sc = match config {
                Some(path) => Scenario::load(&path)?,
                None => Scenario::preset(scenario),
            };
            if let Some(seed) = seed {
                sc = sc.with_seed(seed);
            }
            sc.validate()?;
            let track = load_track(&sc)?;
            let sim = run_scenario(&sc, &track)?;
            sim.log.save(&out).with_context(|| format!("writing {}", out.display()))?;
            write_json(&sidecar(&out, "truth.json"), &sim.truth)?;
            let cfg = analysis_config(&sc)?;
            let summary = summarize(&sim.log, &cfg);
            let text = match format {
                Format::Text => report::summary_text(&summary),
                Format::Csv => report::summary_csv(&summary)?,
            };
            print!("{text}");
            Ok(0)
        }
        Command::Transmit { input, config, seed, channel, out, format } => {
            let log = read_log(&input)?;
            let mut cfg = match config {
                Some(path) => Scenario::load(&path)?.channel,
                None => ChannelConfig::default(),
            };
            apply_channel_args(&mut cfg, &channel);
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            cfg.validate()?;
            let report = transmit_records_pipelined(log.records().to_vec(), &cfg)?;
            let mut received = SessionLog::new(&log.header().scenario, log.tick_rate_hz());
            for rec in &report.delivered {
                received.append(*rec)?;
            }
            received.save(&out).with_context(|| format!("writing {}", out.display()))?;
            let stats = report::LinkStats { link: report.stats, channel: report.channel };
            write_json(&sidecar(&out, "stats.json"), &stats)?;
            let text = match format {
                Format::Text => report::link_text(&stats),
                Format::Csv => report::link_csv(&stats)?,
            };
            print!("{text}");
            Ok(0)
        }
        Command::Analyze { log, config, out, format } => {
            let log = read_log(&log)?;
            let cfg = analysis_config_from(config.as_deref())?;
            let events = detect_all(log.records(), &cfg.diff, &cfg.crash);
            let summary = summarize(&log, &cfg);
            let text = match format {
                Format::Text => report::analysis_text(&summary, &events),
                Format::Csv => report::events_csv(&events)?,
            };
            print!("{text}");
            if let Some(path) = out {
                std::fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(if events.iter().any(DetectionEvent::is_critical) { EXIT_CRITICAL } else { 0 })
        }
        Command::Compare { a, b, config, out, format } => {
            let (la, lb) = (read_log(&a)?, read_log(&b)?);
            let cfg = analysis_config_from(config.as_deref())?;
            let cmp = compare_runs(&la, &lb, &cfg)?;
            let text = match format {
                Format::Text => report::comparison_text(&cmp),
                Format::Csv => report::comparison_csv(&cmp)?,
            };
            print!("{text}");
            if let Some(path) = out {
                write_json(&path, &cmp)?;
            }
            Ok(0)
        }
        Command::Export { log, config, out } => {
            let log = read_log(&log)?;
            let cfg = analysis_config_from(config.as_deref())?;
            let laps = lap_segmentation(log.records(), &cfg.start_line, &cfg.origin, cfg.lap_debounce_s)
                .unwrap_or_default();
            match out {
                Some(path) => {
                    let file = File::create(&path).with_context(|| format!("writing {}", path.display()))?;
                    export_csv(log.records(), &laps, BufWriter::new(file))?;
                }
                None => export_csv(log.records(), &laps, io::stdout().lock())?,
            }
            Ok(0)
        }
    }
}

fn apply_channel_args(cfg: &mut ChannelConfig, args: &ChannelArgs) {
    if let Some(p) = args.drop_prob {
        cfg.drop_prob = p;
    }
    if let Some(p) = args.corrupt_prob {
        cfg.corrupt_prob = p;
    }
    if let Some(p) = args.duplicate_prob {
        cfg.duplicate_prob = p;
    }
    if let Some(w) = args.reorder {
        cfg.reorder_window = w;
    }
}

fn read_log(path: &Path) -> Result<SessionLog> {
    SessionLog::load(path).with_context(|| format!("reading {}", path.display()))
}

fn analysis_config(sc: &Scenario) -> Result<AnalysisConfig> {
    let track = load_track(sc)?;
    Ok(AnalysisConfig { start_line: track.start_line(), origin: sc.gps.origin, ..AnalysisConfig::default() })
}

fn analysis_config_from(config: Option<&Path>) -> Result<AnalysisConfig> {
    match config {
        Some(path) => analysis_config(&Scenario::load(path)?),
        None => Ok(AnalysisConfig::default()),
    }
}

/// `run.trgy` → `run.trgy.<suffix>`.
fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".");
    name.push(suffix);
    PathBuf::from(name)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("writing {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_appends_suffix() {
        assert_eq!(sidecar(Path::new("runs/a.trgy"), "truth.json"), PathBuf::from("runs/a.trgy.truth.json"));
    }

    #[test]
    fn channel_flags_override_config() {
        let mut cfg = ChannelConfig { drop_prob: 0.5, reorder_window: 9, ..ChannelConfig::default() };
        let args = ChannelArgs { drop_prob: Some(0.1), corrupt_prob: None, duplicate_prob: None, reorder: Some(2) };
        apply_channel_args(&mut cfg, &args);
        assert_eq!((cfg.drop_prob, cfg.reorder_window, cfg.corrupt_prob), (0.1, 2, 0.0));
    }
}
