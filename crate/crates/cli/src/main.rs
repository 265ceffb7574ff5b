use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use spamsim::dynamics::{simulate_offresonant_shelving_of_zero, simulate_shelving, Mode, ShelvingScheme};
use spamsim::experiment::{error_budget, qubit_capacity, run_spam};
use spamsim::pulse::{area_plateaus, area_scan, asymmetry, cp_robust_180, detuning_plateaus, detuning_scan, ScanPoint};
use spamsim::spectroscopy::{run_spectroscopy, scan_to_csv, ScanKind};
use spamsim::{Config, Error};

mod output;

use output::{config_hash, manifest, OutputSet};

const EXIT_USAGE: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_RUNTIME: u8 = 4;
const EXIT_IO: u8 = 5;

#[derive(Parser)]
#[command(name = "spamsim", version, about = "Simulate state preparation and measurement of a hyperfine ion qubit")]
struct Cli {
    /// TOML configuration; omitted sections take their defaults.
    #[arg(long, global = true, env = "SPAMSIM_CONFIG")]
    config: Option<PathBuf>,

    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    workers: Option<u16>,

    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, ValueEnum)]
enum ScanAxis {
    Detuning,
    Area,
}

#[derive(Copy, Clone, ValueEnum)]
enum ModeArg {
    Rate,
    Jump,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Rate => Mode::Rate,
            ModeArg::Jump => Mode::Jump,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum SchemeArg {
    #[value(name = "bare-455")]
    Bare455,
    WithRepumps,
    WithRepumpsPiPol,
}

impl From<SchemeArg> for ShelvingScheme {
    fn from(s: SchemeArg) -> ShelvingScheme {
        match s {
            SchemeArg::Bare455 => ShelvingScheme::Bare455,
            SchemeArg::WithRepumps => ShelvingScheme::WithRepumps,
            SchemeArg::WithRepumpsPiPol => ShelvingScheme::WithRepumpsPiPol,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum KindArg {
    #[value(name = "455")]
    Shelve455,
    #[value(name = "614")]
    Deshelve614,
}

impl From<KindArg> for ScanKind {
    fn from(k: KindArg) -> ScanKind {
        match k {
            KindArg::Shelve455 => ScanKind::Shelve455,
            KindArg::Deshelve614 => ScanKind::Deshelve614,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Transfer probability of the composite microwave sequence.
    PulseScan {
        #[arg(long, value_enum, default_value = "detuning")]
        scan: ScanAxis,
        #[arg(long)]
        rabi_khz: Option<f64>,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        points: Option<u64>,
    },
    /// Shelving fidelity of `|1>` and off-resonant shelving of `|0>`.
    Shelve {
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
        #[arg(long, value_enum, default_value = "jump")]
        mode: ModeArg,
        #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
    },
    /// Full preparation and measurement run.
    Spam {
        #[arg(long, value_enum, default_value = "rate")]
        mode: ModeArg,
        /// Trials per qubit state.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        trials: Option<u64>,
    },
    /// Synthetic scans of both hyperfine components and their fits.
    Spectroscopy {
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Report exact expectations instead of binomial draws.
        #[arg(long)]
        no_noise: bool,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        trials: Option<u64>,
        /// Grid points per line, at least 4.
        #[arg(long, value_parser = clap::value_parser!(u64).range(4..))]
        points: Option<u64>,
    },
    /// Error budget at the configured settings.
    Budget,
    /// Largest register read out correctly with probability above one half.
    Capacity {
        /// Per-qubit readout error.
        eps: f64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::PulseScan { .. } => "pulse-scan",
            Command::Shelve { .. } => "shelve",
            Command::Spam { .. } => "spam",
            Command::Spectroscopy { .. } => "spectroscopy",
            Command::Budget => "budget",
            Command::Capacity { .. } => "capacity",
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Unknown { .. } => EXIT_CONFIG,
            Error::InvalidArgument(_) => EXIT_USAGE,
            _ => EXIT_RUNTIME,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: EXIT_IO, message: e.to_string() }
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, Failure> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| Failure { code: EXIT_CONFIG, message: format!("cannot read {}: {}", path.display(), e) })?;
    Config::from_toml_str(&text)
        .map_err(|e| Failure { code: EXIT_CONFIG, message: format!("{}: {}", path.display(), e) })
}

/// Applies flag overrides so that the echoed configuration is the one used.
fn apply_overrides(cfg: &mut Config, cmd: &Command) -> Result<(), Failure> {
    match *cmd {
        Command::PulseScan { rabi_khz, points, .. } => {
            if let Some(r) = rabi_khz {
                if !(r > 0.0 && r.is_finite()) {
                    return Err(Failure { code: EXIT_USAGE, message: "--rabi-khz must be positive".into() });
                }
                cfg.pulse.rabi_khz = r;
            }
            if let Some(n) = points {
                cfg.pulse.points = n as usize;
            }
        }
        Command::Shelve { scheme: Some(s), .. } => cfg.shelving.scheme = s.into(),
        Command::Spam { trials: Some(n), .. } => {
            cfg.spam.trials_zero = n;
            cfg.spam.trials_one = n;
        }
        Command::Spectroscopy { kind, trials, points, .. } => {
            if let Some(n) = trials {
                cfg.spectroscopy.trials = n;
            }
            if let Some(n) = points {
                let s = &mut cfg.spectroscopy;
                match ScanKind::from(kind) {
                    ScanKind::Shelve455 => s.step_455 = s.span_455 / (n - 1) as f64,
                    ScanKind::Deshelve614 => s.step_614 = s.span_614 / (n - 1) as f64,
                }
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(())
}

/// Header fields shared by every JSON output.
fn stamp(seed: u64, hash: &str, cfg: &Config) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("seed".into(), json!(seed));
    m.insert("config_sha256".into(), json!(hash));
    m.insert("config".into(), serde_json::to_value(cfg).expect("config serializes"));
    m
}

fn with_stamp(mut base: serde_json::Map<String, Value>, body: Value) -> Value {
    if let Value::Object(fields) = body {
        base.extend(fields);
    }
    Value::Object(base)
}

fn evenly(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![(lo + hi) / 2.0];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn pulse_csv(axis: ScanAxis, points: &[ScanPoint<f64>]) -> String {
    let mut s = String::from(match axis {
        ScanAxis::Detuning => "detuning_kHz,composite,single_pi\n",
        ScanAxis::Area => "area_scale,composite,single_pi\n",
    });
    for p in points {
        let x = match axis {
            ScanAxis::Detuning => p.x / TAU / 1e3,
            ScanAxis::Area => p.x,
        };
        s.push_str(&format!("{},{},{}\n", x, p.composite, p.single_pi));
    }
    s
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build_global()
            .map_err(|e| Failure { code: EXIT_RUNTIME, message: e.to_string() })?;
    }
    let mut cfg = load_config(cli.config.as_deref())?;
    apply_overrides(&mut cfg, &cli.command)?;
    let spec = cfg.atom_spec()?;
    let seed = cli.seed;
    let hash = config_hash(&cfg);
    let csv_header = format!("# seed={} config_sha256={}", seed, hash);
    let base = stamp(seed, &hash, &cfg);
    let mut out = OutputSet::new(&cli.out, cli.force);

    match cli.command {
        Command::PulseScan { scan, .. } => {
            let rabi = TAU * cfg.pulse.rabi_khz * 1e3;
            let n = cfg.pulse.points;
            let seq = cp_robust_180::<f64>();
            let (points, plateaus) = match scan {
                ScanAxis::Detuning => {
                    let half = TAU * cfg.pulse.detuning_span_khz * 1e3 / 2.0;
                    (detuning_scan(&seq, rabi, &evenly(-half, half, n))?, detuning_plateaus(&seq)?)
                }
                ScanAxis::Area => {
                    let grid = evenly(cfg.pulse.area_min, cfg.pulse.area_max, n);
                    (area_scan(&seq, rabi, &grid)?, area_plateaus(&seq)?)
                }
            };
            let asym = match scan {
                ScanAxis::Detuning => json!(asymmetry(&points)),
                ScanAxis::Area => Value::Null,
            };
            let peak = points.iter().map(|p| p.composite).fold(f64::NEG_INFINITY, f64::max);
            out.add_csv("pulse_scan.csv", &csv_header, &pulse_csv(scan, &points));
            out.add_json(
                "pulse_summary.json",
                &with_stamp(
                    base,
                    json!({
                        "scan": match scan { ScanAxis::Detuning => "detuning", ScanAxis::Area => "area" },
                        "points": points.len(),
                        "max_composite": peak,
                        "plateau_widths": plateaus,
                        "asymmetry": asym,
                    }),
                ),
            );
            println!("pulse-scan: {} points, peak transfer {:.12}", points.len(), peak);
        }
        Command::Shelve { mode, trials, .. } => {
            let mode = Mode::from(mode);
            let scheme = cfg.shelving.scheme;
            let one = simulate_shelving(&spec, &cfg.shelving, scheme, mode, trials, seed)?;
            let zero = simulate_offresonant_shelving_of_zero(&spec, &cfg.shelving, scheme, mode, trials, seed)?;
            out.add_json(
                "shelve.json",
                &with_stamp(
                    base,
                    json!({
                        "scheme": scheme.name(),
                        "mode": mode,
                        "trials": trials,
                        "shelving_fidelity": one,
                        "offresonant_shelving_of_zero": zero,
                    }),
                ),
            );
            println!("shelve {}: fidelity {:.6} (+/- {:.1e}), |0> shelved {:.3e}", scheme, one.value, one.sigma, zero.value);
        }
        Command::Spam { mode, .. } => {
            let report = run_spam(&spec, &cfg, mode.into(), seed)?;
            let mut body = serde_json::to_value(&report).expect("report serializes");
            if let Value::Object(m) = &mut body {
                m.remove("config");
                m.remove("seed");
            }
            out.add_json("spam_report.json", &with_stamp(base, body));
            out.add_csv("histogram_zero.csv", &csv_header, &report.histogram_zero.to_csv());
            out.add_csv("histogram_one.csv", &csv_header, &report.histogram_one.to_csv());
            out.add_csv("budget.csv", &csv_header, &report.budget.to_csv());
            out.add("budget.txt", format!("{}\n{}", csv_header, report.budget.to_table()));
            println!(
                "spam ({}): eps0 {}  eps1 {}  F {}",
                report.mode, report.eps_zero.formatted, report.eps_one.formatted, report.fidelity_formatted
            );
        }
        Command::Spectroscopy { kind, no_noise, .. } => {
            let report = run_spectroscopy(&spec, &cfg.spectroscopy, kind.into(), !no_noise, seed)?;
            for scan in &report.scans {
                out.add_csv(&format!("scan_{}.csv", scan.line.name()), &csv_header, &scan_to_csv(&scan.points));
            }
            let fits: Vec<Value> =
                report.scans.iter().map(|s| json!({ "line": s.line.name(), "fit": s.fit })).collect();
            out.add_json(
                "fit.json",
                &with_stamp(
                    base,
                    json!({
                        "kind": report.kind.name(),
                        "noise": !no_noise,
                        "fits": fits,
                        "splitting_MHz": report.splitting,
                        "isotope_shift_MHz": report.isotope_shift,
                        "injected_splitting_MHz": report.injected_splitting,
                        "injected_isotope_shift_MHz": report.injected_isotope_shift,
                    }),
                ),
            );
            println!(
                "spectroscopy {}: splitting {:.2} +/- {:.2} MHz, isotope shift {:.2} +/- {:.2} MHz",
                report.kind.name(),
                report.splitting.value,
                report.splitting.sigma,
                report.isotope_shift.value,
                report.isotope_shift.sigma
            );
        }
        Command::Budget => {
            let budget = error_budget(&spec, &cfg)?;
            out.add("budget.txt", format!("{}\n{}", csv_header, budget.to_table()));
            out.add_csv("budget.csv", &csv_header, &budget.to_csv());
            out.add_json("budget.json", &with_stamp(base, json!({ "budget": budget })));
            print!("{}", budget.to_table());
        }
        Command::Capacity { eps } => {
            let n = qubit_capacity(eps)?;
            out.add_json("capacity.json", &with_stamp(base, json!({ "eps": eps, "qubits": n })));
            println!("{}", n);
        }
    }

    out.add_json("manifest.json", &manifest(cli.command.name(), cli.config.as_deref(), seed, &cli.out, &hash));
    out.write()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
