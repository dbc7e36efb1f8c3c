use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, CommandFactory, Parser, Subcommand};
use limitlens::glm::Link;
use limitlens::features::parse_bp;
use limitlens::pipeline::VariantKind;
use limitlens_cli::{cmd_detect, cmd_report, cmd_run, cmd_synth, config::CONFIG_ENV, NoSessions, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "limitlens", version, about = "Price-limit hit event study")]
struct Cli {
    /// TOML config file.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Config override as key=value; any other `--key value` pair is read the same way.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Directory with ticks.csv, sessions.csv and index.csv.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// CSV of start,end,state rows replacing the bull/bear calendar.
    #[arg(long)]
    calendar: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Write a seeded synthetic data tree.
    Synth {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        stocks: Option<usize>,
        #[arg(long)]
        days: Option<usize>,
        /// Target directory (defaults to the configured data directory).
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Overwrite a non-empty target directory.
        #[arg(long)]
        force: bool,
    },
    /// Detect first limit hits and write events.csv.
    Detect {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Run detection, fits and all reports.
    Run {
        #[command(flatten)]
        data: DataArgs,
        /// Restrict to these model variants.
        #[arg(long, value_delimiter = ',')]
        variant: Vec<VariantKind>,
        /// Conditional thresholds in percent, e.g. 7 or 2.5.
        #[arg(long, value_delimiter = ',')]
        m: Vec<String>,
        /// Links to fit; disables the automatic probit twin.
        #[arg(long, value_delimiter = ',')]
        link: Vec<Link>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Summarise a finished run directory.
    Report {
        /// Run directory (defaults to the configured output directory).
        dir: Option<PathBuf>,
    },
    /// Print the effective configuration as TOML.
    Config,
}

/// Turns `--key value` / `--key=value` pairs clap does not know into `--set key=value`.
fn rewrite_overrides(args: Vec<OsString>) -> Vec<OsString> {
    let cmd = Cli::command();
    let mut known: Vec<String> = vec!["help".into(), "version".into()];
    let mut collect = |c: &clap::Command| {
        for a in c.get_arguments() {
            if let Some(l) = a.get_long() {
                known.push(l.to_string());
            }
        }
    };
    collect(&cmd);
    for sub in cmd.get_subcommands() {
        collect(sub);
    }
    let mut out = Vec::with_capacity(args.len());
    let mut it = args.into_iter().peekable();
    if let Some(first) = it.next() {
        out.push(first);
    }
    while let Some(a) = it.next() {
        let Some(s) = a.to_str().and_then(|s| s.strip_prefix("--")).map(str::to_string) else {
            out.push(a);
            continue;
        };
        let (name, inline) = match s.split_once('=') {
            Some((n, v)) => (n.to_string(), Some(v.to_string())),
            None => (s.clone(), None),
        };
        if name.is_empty() || known.contains(&name) {
            out.push(a);
            continue;
        }
        let value = inline.or_else(|| it.next().and_then(|v| v.into_string().ok()));
        out.push("--set".into());
        out.push(format!("{name}={}", value.unwrap_or_default()).into());
    }
    out
}

fn percent_to_bp(s: &str) -> Result<u32> {
    Ok(parse_bp(s)?)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?.apply_overrides(&cli.set)?;
    let apply_data = |cfg: &mut RunConfig, d: DataArgs| {
        if let Some(p) = d.data {
            cfg.paths.data_dir = p;
        }
        if let Some(p) = d.output {
            cfg.paths.output = p;
        }
        if let Some(p) = d.calendar {
            cfg.paths.calendar = Some(p);
        }
    };
    match cli.cmd {
        Cmd::Synth { seed, stocks, days, output, force } => {
            if let Some(s) = seed {
                cfg.synth.seed = s;
            }
            if let Some(n) = stocks {
                cfg.synth.n_stocks = n;
            }
            if let Some(n) = days {
                cfg.synth.n_days = n;
            }
            if let Some(p) = output {
                cfg.paths.data_dir = p;
            }
            let s = cmd_synth(&cfg, force)?;
            println!("wrote {} sessions with {} injected hits to {}", s.sessions, s.hits, s.dir.display());
            for (name, digest) in s.digests {
                println!("{digest}  {name}");
            }
        }
        Cmd::Detect { data } => {
            apply_data(&mut cfg, data);
            let s = cmd_detect(&cfg)?;
            println!("{} sessions, {} events, {} session issues", s.sessions, s.events.len(), s.issues);
            for ((state, dir), n) in s.counts {
                println!("  {state:<8} {dir:<5} {n}");
            }
            println!("wrote {}", cfg.paths.output.join("events.csv").display());
        }
        Cmd::Run { data, variant, m, link, workers } => {
            apply_data(&mut cfg, data);
            if !variant.is_empty() {
                cfg.study.variants = variant;
            }
            if !m.is_empty() {
                cfg.study.m_filter = Some(m.iter().map(|s| percent_to_bp(s)).collect::<Result<_>>()?);
            }
            if !link.is_empty() {
                cfg.study.links = link;
                cfg.study.probit_twin = false;
            }
            if workers.is_some() {
                cfg.study.workers = workers;
            }
            let s = cmd_run(&cfg)?;
            let m = &s.manifest;
            println!(
                "{} sessions, {} events ({} opening hits), {} fits",
                m.sessions,
                m.events,
                m.opening_hits,
                s.output.fits.len()
            );
            for (v, counts) in &m.fits {
                let parts: Vec<String> = counts.iter().map(|(k, n)| format!("{k}={n}")).collect();
                println!("  {v:<28} {}", parts.join(" "));
            }
            println!("reports in {} (config {})", cfg.paths.output.display(), &m.config_sha256[..12]);
        }
        Cmd::Report { dir } => {
            let dir = dir.unwrap_or_else(|| cfg.paths.output.clone());
            cmd_report(&dir, &cfg, std::io::stdout().lock())?;
        }
        Cmd::Config => print!("{}", cfg.to_toml()?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse_from(rewrite_overrides(std::env::args_os().collect()));
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<NoSessions>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
