//! Subcommands behind the `limitlens` binary. Each one reads a [`RunConfig`]
//! and writes plain files, so stages can be run and inspected separately.

pub mod config;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use limitlens::limits::{Direction, LimitHitEvent, MarketState};
use limitlens::marketdata::{parse_index_file, parse_session_meta, parse_tick_file, DailySession, IndexData, TickSchema};
use limitlens::pipeline::{self, FitStatus, StudyOutput};
use limitlens::synth::gen_sessions;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::RunConfig;

/// Failure that maps to exit code 2.
#[derive(Debug)]
pub struct NoSessions(pub String);

impl fmt::Display for NoSessions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "no sessions found ({})", self.0)
    }
}

impl std::error::Error for NoSessions {}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn sha256_str(s: &str) -> String {
    hex::encode(Sha256::digest(s.as_bytes()))
}

fn dir_is_nonempty(dir: &Path) -> Result<bool> {
    match fs::read_dir(dir) {
        Ok(mut it) => Ok(it.next().is_some()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(false),
        Err(e) => Err(e).with_context(|| format!("reading {}", dir.display())),
    }
}

/// Files written by `synth`, in write order.
pub const SYNTH_FILES: [&str; 4] = ["ticks.csv", "sessions.csv", "index.csv", "truth.json"];

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSummary {
    pub dir: PathBuf,
    pub sessions: usize,
    pub hits: usize,
    /// (file name, SHA-256) per written file.
    pub digests: Vec<(String, String)>,
}

/// Generates a synthetic data tree into `paths.data_dir`.
pub fn cmd_synth(cfg: &RunConfig, force: bool) -> Result<SynthSummary> {
    cfg.synth.validate()?;
    let dir = &cfg.paths.data_dir;
    if !force && dir_is_nonempty(dir)? {
        anyhow::bail!("output directory {} is not empty; pass --force to overwrite", dir.display());
    }
    let data = gen_sessions(&cfg.synth)?;
    data.write_tree(dir, cfg.synth.seed)
        .with_context(|| format!("writing {}", dir.display()))?;
    let digests = SYNTH_FILES
        .iter()
        .map(|f| Ok((f.to_string(), sha256_file(&dir.join(f))?)))
        .collect::<Result<_>>()?;
    Ok(SynthSummary {
        dir: dir.clone(),
        sessions: data.sessions.len(),
        hits: data.truth.len(),
        digests,
    })
}

/// Parsed inputs plus their digests.
pub struct Inputs {
    pub sessions: Vec<DailySession>,
    pub index: IndexData,
    pub digests: BTreeMap<String, String>,
    pub rejected: usize,
}

/// Loads sessions and index data; missing tick input or zero parsed
/// sessions yields [`NoSessions`].
pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let ticks = cfg.paths.ticks();
    if !ticks.is_file() {
        return Err(NoSessions(format!("{} does not exist", ticks.display())).into());
    }
    let mut digests = BTreeMap::new();
    let sessions_path = cfg.paths.sessions();
    let meta = parse_session_meta(open(&sessions_path)?).with_context(|| format!("{}", sessions_path.display()))?;
    digests.insert("sessions".to_string(), sha256_file(&sessions_path)?);
    let tf = parse_tick_file(open(&ticks)?, TickSchema::V1, &meta).with_context(|| format!("{}", ticks.display()))?;
    digests.insert("ticks".to_string(), sha256_file(&ticks)?);
    let rejected = tf.report.rejected_total();
    if rejected > 0 {
        log::warn!("{}: {rejected} rows rejected by validation", ticks.display());
    }
    if tf.sessions.is_empty() {
        return Err(NoSessions(ticks.display().to_string()).into());
    }
    let index_path = cfg.paths.index();
    let index = if index_path.is_file() {
        digests.insert("index".to_string(), sha256_file(&index_path)?);
        parse_index_file(open(&index_path)?).with_context(|| format!("{}", index_path.display()))?
    } else {
        log::warn!("{} not found; market-lag features unavailable", index_path.display());
        IndexData::new()
    };
    if let Some(cal) = &cfg.paths.calendar {
        digests.insert("calendar".to_string(), sha256_file(cal)?);
    }
    Ok(Inputs {
        sessions: tf.sessions,
        index,
        digests,
        rejected,
    })
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).with_context(|| format!("opening {}", path.display()))
}

/// Replaces the study calendar with `paths.calendar` when set.
pub fn effective_config(cfg: &RunConfig) -> Result<RunConfig> {
    let mut cfg = cfg.clone();
    if let Some(path) = &cfg.paths.calendar {
        cfg.study.calendar = config::read_calendar_csv(path)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectSummary {
    pub sessions: usize,
    pub events: Vec<LimitHitEvent>,
    pub issues: usize,
    pub counts: BTreeMap<(MarketState, Direction), usize>,
}

pub fn event_counts(events: &[LimitHitEvent]) -> BTreeMap<(MarketState, Direction), usize> {
    let mut counts = BTreeMap::new();
    for e in events {
        *counts.entry((e.market_state, e.direction)).or_default() += 1;
    }
    counts
}

/// Detects first hits and writes `events.csv` under `paths.output`.
pub fn cmd_detect(cfg: &RunConfig) -> Result<DetectSummary> {
    let cfg = effective_config(cfg)?;
    let inputs = load_inputs(&cfg)?;
    let (events, issues) = pipeline::detect_events(&inputs.sessions, &cfg.study);
    for i in &issues {
        log::warn!("{} {}: {}", i.stock_id, i.date, i.message);
    }
    let out = &cfg.paths.output;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join("events.csv");
    pipeline::write_events(&events, fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?)?;
    Ok(DetectSummary {
        sessions: inputs.sessions.len(),
        counts: event_counts(&events),
        issues: issues.len(),
        events,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// SHA-256 of the echoed config with `paths` removed.
    pub config_sha256: String,
    pub config: RunConfig,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub sessions: usize,
    pub rejected_rows: usize,
    pub session_issues: usize,
    pub events: usize,
    pub opening_hits: usize,
    pub fits: BTreeMap<String, BTreeMap<String, usize>>,
}

/// Hash of everything in the config that can change results.
pub fn config_hash(cfg: &RunConfig) -> Result<String> {
    #[derive(Serialize)]
    struct Hashed<'a> {
        study: &'a limitlens::pipeline::StudyConfig,
    }
    let mut study = cfg.study.clone();
    study.workers = None;
    Ok(sha256_str(&toml::to_string(&Hashed { study: &study })?))
}

pub struct RunSummary {
    pub output: StudyOutput,
    pub manifest: RunManifest,
}

/// Runs the full study and writes every report plus `run_manifest.json`.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunSummary> {
    let cfg = effective_config(cfg)?;
    let inputs = load_inputs(&cfg)?;
    let output = pipeline::run_study(&inputs.sessions, &inputs.index, &cfg.study)?;
    for i in &output.session_issues {
        log::warn!("{} {}: {}", i.stock_id, i.date, i.message);
    }
    let dir = &cfg.paths.output;
    let names = pipeline::write_reports(dir, &output).with_context(|| format!("writing reports to {}", dir.display()))?;
    let outputs = names
        .iter()
        .map(|n| Ok((n.clone(), sha256_file(&dir.join(n))?)))
        .collect::<Result<_>>()?;
    let manifest = RunManifest {
        tool: "limitlens".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: config_hash(&cfg)?,
        config: cfg.clone(),
        inputs: inputs.digests,
        outputs,
        sessions: output.sessions,
        rejected_rows: inputs.rejected,
        session_issues: output.session_issues.len(),
        events: output.events.len(),
        opening_hits: output.events.iter().filter(|e| e.opening_hit).count(),
        fits: pipeline::fit_counts(&output.fits),
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(dir.join("run_manifest.json"), json)?;
    Ok(RunSummary { output, manifest })
}

/// Prints a text digest of a finished run directory.
pub fn cmd_report<W: Write>(run_dir: &Path, alpha_cfg: &RunConfig, mut out: W) -> Result<()> {
    let path = run_dir.join("fits.jsonl");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let fits = pipeline::read_fits(&text).with_context(|| format!("{}", path.display()))?;
    let mut statuses: BTreeMap<(String, FitStatus), usize> = BTreeMap::new();
    for f in &fits {
        let v = match &f.m {
            Some(m) => format!("{}(m={m}) {}", f.variant, f.link),
            None => format!("{} {}", f.variant, f.link),
        };
        *statuses.entry((v, f.status)).or_default() += 1;
    }
    writeln!(out, "fits: {}", fits.len())?;
    let mut last = String::new();
    for ((v, s), n) in &statuses {
        if *v != last {
            write!(out, "\n  {v:<28}")?;
            last = v.clone();
        }
        write!(out, " {}={n}", serde_json::to_value(s)?.as_str().unwrap_or_default())?;
    }
    writeln!(out)?;

    let rows = pipeline::aggregate(&fits, &alpha_cfg.study);
    writeln!(out, "\nyield1 significance (+/-/0/fail) and odds change per 0.1% yield move toward the limit:")?;
    for r in rows.iter().filter(|r| r.coefficient == "yield1") {
        let k = &r.key;
        let m = k.m.as_deref().map(|m| format!("(m={m})")).unwrap_or_default();
        let odds = r.odds_mean.map(|o| format!("{:+.1}%", 100.0 * o)).unwrap_or_else(|| "n/a".into());
        writeln!(
            out,
            "  {:<6} {:<11}{:<7} {:<17} {:<8} {:<4}  {}/{}/{}/{}  odds {}",
            k.link.to_string(),
            k.variant,
            m,
            k.stock_class.to_string(),
            k.market_state.to_string(),
            k.direction.to_string(),
            r.n_pos,
            r.n_neg,
            r.n_zero,
            r.failures,
            odds
        )?;
    }
    let rb = pipeline::robustness_delta(&fits, alpha_cfg.study.hist_bin_width);
    if let (Some(mean), Some(mean_abs)) = (rb.mean, rb.mean_abs) {
        writeln!(
            out,
            "\nlogit - probit accuracy: {} pairs, mean {mean:.4}, mean |delta| {mean_abs:.4}",
            rb.deltas.len()
        )?;
    }
    Ok(())
}
