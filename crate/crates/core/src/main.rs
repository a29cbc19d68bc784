use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fcofdm::fcfb::Scheme;
use fcofdm::scenario::{
    builtin_config, builtin_scenarios, export, read_config, run_scenario, RxKind, Scenario,
    ScenarioConfig, TxKind,
};
use fcofdm::Error;

#[derive(Parser)]
#[command(
    name = "fcofdm",
    version,
    about = "Fast-convolution filtered mixed-numerology OFDM"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or builtin and write the results.
    Run {
        /// Path to a scenario file, or the name of a builtin.
        scenario: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        scheme: Option<Scheme>,
        #[arg(long)]
        tx: Option<TxKind>,
        #[arg(long)]
        rx: Option<RxKind>,
        /// Also write SVG plots.
        #[arg(long)]
        plots: bool,
    },
    /// List the builtin scenarios.
    ListBuiltins,
    /// Check a scenario file without running it.
    Validate { scenario: String },
}

fn load(arg: &str) -> Result<(ScenarioConfig, Option<PathBuf>), Error> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Ok(cfg) = builtin_config(arg) {
            return Ok((cfg, None));
        }
    }
    let cfg = read_config(path)?;
    Ok((cfg, path.parent().map(Path::to_path_buf)))
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn fail(e: &Error, code: i32) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListBuiltins => {
            let mut text = String::new();
            for (name, about) in builtin_scenarios() {
                let _ = writeln!(text, "{name:10} {about}");
            }
            emit(&text);
            ExitCode::SUCCESS
        }
        Command::Validate { scenario } => {
            match load(&scenario).and_then(|(cfg, dir)| Scenario::prepare(cfg, dir.as_deref())) {
                Ok(s) => {
                    emit(&format!(
                        "{}: valid, {} subbands, {} samples at {} Hz\n",
                        s.config.name,
                        s.subbands.len(),
                        s.timeline_len(),
                        s.channel.sample_rate_hz
                    ));
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e, e.exit_code()),
            }
        }
        Command::Run {
            scenario,
            out,
            seed,
            scheme,
            tx,
            rx,
            plots,
        } => {
            let prepared = load(&scenario).and_then(|(mut cfg, dir)| {
                if let Some(s) = seed {
                    cfg.seed = s;
                }
                if let Some(s) = scheme {
                    cfg.fc.scheme = s;
                }
                if let Some(t) = tx {
                    cfg.tx = t;
                }
                if let Some(r) = rx {
                    cfg.rx = r;
                }
                Scenario::prepare(cfg, dir.as_deref())
            });
            let s = match prepared {
                Ok(s) => s,
                Err(e) => return fail(&e, e.exit_code()),
            };
            let result = match run_scenario(&s) {
                Ok(r) => r,
                Err(e) => return fail(&e, if matches!(e, Error::Io { .. }) { 3 } else { 2 }),
            };
            if let Err(e) = export(&s, &result, &out, plots) {
                return fail(&e, 3);
            }
            let mut text = String::new();
            let _ = writeln!(
                text,
                "{}: channel edge level {:.2} dB",
                s.config.name, result.edge_level_db
            );
            if let Some(m) = &result.mask {
                let _ = writeln!(
                    text,
                    "  emission mask {} (worst margin {:.2} dB at {:.3} MHz)",
                    if m.pass { "pass" } else { "FAIL" },
                    m.worst_margin_db,
                    m.worst_freq_hz / 1e6
                );
            }
            for r in &result.subbands {
                for (u, set) in r.evm.sets.iter().enumerate() {
                    let _ = writeln!(
                        text,
                        "  {} set {u} ({} kHz, {} SCs): EVM low/ref/high {:.2} / {:.2} / {:.2} dB",
                        r.name,
                        r.set_keys[u].0 / 1000,
                        set.l_act,
                        set.evm_db[0],
                        set.evm_db[1],
                        set.evm_db[2]
                    );
                }
            }
            let _ = writeln!(text, "results written to {}", out.display());
            emit(&text);
            ExitCode::SUCCESS
        }
    }
}
