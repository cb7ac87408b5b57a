use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sdm_shcd::harness::{
    replay, run_scenario, validate_config, Preset, ResultRow, ScenarioConfig, SweepResult,
    RESULTS_FILE,
};

const EXIT_INVALID: u8 = 1;
const EXIT_PARTIAL: u8 = 2;

#[derive(Parser)]
#[command(name = "sdm-shcd", version, about = "SDM self-homodyne coherent detection simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Toml,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario sweep and write results.csv, taps.csv, constellations and manifest.json.
    Run {
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a scenario file and report the aggregate bit rate.
    Validate { config: PathBuf },
    /// Show or emit a starter configuration.
    Preset {
        name: String,
        /// Print the full configuration instead of a summary.
        #[arg(long)]
        emit: bool,
        #[arg(long, value_enum, default_value = "toml")]
        format: Format,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run a manifest and compare results.csv byte for byte.
    Replay {
        manifest: PathBuf,
        /// Output directory (default: replay/ next to the manifest).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &std::path::Path) -> Result<ScenarioConfig, ExitCode> {
    ScenarioConfig::load(path).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_INVALID)
    })
}

fn print_summary(result: &SweepResult) {
    let mut groups: BTreeMap<(String, &'static str), Vec<&ResultRow>> = BTreeMap::new();
    let mut order = Vec::new();
    for r in result.aggregate_rows().filter(|r| r.status == "ok") {
        let key = (format!("{}", r.sweep_value), r.scheme.name());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    println!("{:>12}  {:>8}  {:>11}  {:>9}", "sweep", "scheme", "mean BER", "EVM dB");
    for key in order {
        let rows = &groups[&key];
        let n = rows.len() as f64;
        let ber = rows.iter().map(|r| r.ber).sum::<f64>() / n;
        let evm = rows.iter().map(|r| r.evm_db).sum::<f64>() / n;
        println!("{:>12}  {:>8}  {:>11.3e}  {:>9.2}", key.0, key.1, ber, evm);
    }
    if result.failures > 0 {
        println!("{} run(s) failed; see the status column", result.failures);
    }
}

fn run(config: PathBuf, out: Option<PathBuf>) -> ExitCode {
    let mut cfg = match load(&config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    let v = validate_config(&cfg);
    if !v.is_ok() {
        for msg in &v.violations {
            eprintln!("violation: {msg}");
        }
        return ExitCode::from(EXIT_INVALID);
    }
    match run_scenario(&cfg) {
        Ok(result) => {
            print_summary(&result);
            println!("wrote {}", cfg.output_dir.join(RESULTS_FILE).display());
            if result.failures > 0 {
                ExitCode::from(EXIT_PARTIAL)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}

fn validate(config: PathBuf) -> ExitCode {
    let cfg = match load(&config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let v = validate_config(&cfg);
    println!("aggregate bit rate: {} Gbps", v.aggregate_bit_rate_gbps);
    if v.is_ok() {
        println!("ok");
        ExitCode::SUCCESS
    } else {
        for msg in &v.violations {
            println!("violation: {msg}");
        }
        ExitCode::from(EXIT_INVALID)
    }
}

fn preset(name: String, emit: bool, format: Format, out: Option<PathBuf>) -> ExitCode {
    let p = match Preset::from_name(&name) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID);
        }
    };
    let cfg = ScenarioConfig::preset(p);
    if !emit {
        let v = validate_config(&cfg);
        println!(
            "{}: {} channels at {} GBaud ({} Gbps), sweep {} over {:?}, {} trials per point",
            cfg.name,
            cfg.tx.n_signal_channels,
            cfg.tx.symbol_rate / 1e9,
            v.aggregate_bit_rate_gbps,
            cfg.sweep.variable.name(),
            cfg.sweep.values,
            cfg.trials_per_point
        );
        println!("use --emit to print the configuration");
        return ExitCode::SUCCESS;
    }
    let text = match format {
        Format::Toml => cfg.to_toml_string(),
        Format::Json => cfg.to_json_string(),
    };
    let text = match text {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID);
        }
    };
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, text) {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(EXIT_INVALID);
            }
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    ExitCode::SUCCESS
}

fn replay_cmd(manifest: PathBuf, out: Option<PathBuf>) -> ExitCode {
    match replay(&manifest, out.as_deref()) {
        Ok(o) => {
            print_summary(&o.result);
            match o.identical {
                Some(true) => println!("results.csv identical to the original"),
                Some(false) => {
                    println!("results.csv DIFFERS from the original");
                    return ExitCode::from(EXIT_PARTIAL);
                }
                None => println!("no original results.csv to compare against"),
            }
            println!("wrote {}", o.output_dir.join(RESULTS_FILE).display());
            if o.result.failures > 0 {
                ExitCode::from(EXIT_PARTIAL)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out } => run(config, out),
        Command::Validate { config } => validate(config),
        Command::Preset {
            name,
            emit,
            format,
            out,
        } => preset(name, emit, format, out),
        Command::Replay { manifest, out } => replay_cmd(manifest, out),
    }
}
