//! Run configuration: a sectioned TOML file plus `key=value` overrides.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use limitlens::limits::{CalendarInterval, MarketCalendar, MarketState};
use limitlens::pipeline::StudyConfig;
use limitlens::synth::SynthConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

/// Environment variable naming a default config file.
pub const CONFIG_ENV: &str = "LIMITLENS_CONFIG";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Directory holding `ticks.csv`, `sessions.csv` and `index.csv`.
    pub data_dir: PathBuf,
    /// Explicit file locations; each falls back to `data_dir`.
    pub ticks: Option<PathBuf>,
    pub sessions: Option<PathBuf>,
    pub index: Option<PathBuf>,
    /// CSV of `start,end,state` rows replacing the study calendar.
    pub calendar: Option<PathBuf>,
    pub output: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            data_dir: "data".into(),
            ticks: None,
            sessions: None,
            index: None,
            calendar: None,
            output: "out".into(),
        }
    }
}

impl Paths {
    pub fn ticks(&self) -> PathBuf {
        self.ticks.clone().unwrap_or_else(|| self.data_dir.join("ticks.csv"))
    }

    pub fn sessions(&self) -> PathBuf {
        self.sessions.clone().unwrap_or_else(|| self.data_dir.join("sessions.csv"))
    }

    pub fn index(&self) -> PathBuf {
        self.index.clone().unwrap_or_else(|| self.data_dir.join("index.csv"))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub study: StudyConfig,
    pub synth: SynthConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Reads `path`, or `$LIMITLENS_CONFIG`, or falls back to defaults.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let path = match path {
            Some(p) => Some(p.to_path_buf()),
            None => std::env::var_os(CONFIG_ENV).map(PathBuf::from),
        };
        match path {
            Some(p) => {
                let text = fs::read_to_string(&p).with_context(|| format!("reading config {}", p.display()))?;
                Self::from_toml(&text).with_context(|| format!("parsing config {}", p.display()))
            }
            None => Ok(Self::default()),
        }
    }

    /// Applies `key=value` overrides in order. Keys may be full dotted
    /// paths (`study.features.min_rows`) or a bare field name matched
    /// against the shallowest field of that name; dashes read as underscores.
    pub fn apply_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut root: Table = toml::from_str(&self.to_toml()?)?;
        for o in overrides {
            let o = o.as_ref();
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| anyhow!("override `{o}` is not of the form key=value"))?;
            let key = key.trim().replace('-', "_");
            let path = resolve_key(&root, &key)?;
            let current = lookup(&root, &path);
            let value = parse_value(raw.trim(), current);
            insert(&mut root, &path, value)?;
        }
        let cfg: RunConfig = Value::Table(root)
            .try_into()
            .context("applying overrides")?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.study.validate()?;
        self.synth.validate()?;
        Ok(())
    }
}

fn leaves(table: &Table, prefix: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
    for (k, v) in table {
        prefix.push(k.clone());
        match v {
            Value::Table(t) => leaves(t, prefix, out),
            _ => out.push(prefix.clone()),
        }
        prefix.pop();
    }
}

fn resolve_key(root: &Table, key: &str) -> Result<Vec<String>> {
    if key.contains('.') {
        return Ok(key.split('.').map(String::from).collect());
    }
    let mut all = Vec::new();
    leaves(root, &mut Vec::new(), &mut all);
    let mut hits: Vec<Vec<String>> = all.into_iter().filter(|p| p.last().map(String::as_str) == Some(key)).collect();
    let Some(depth) = hits.iter().map(Vec::len).min() else {
        bail!("unknown config key `{key}`");
    };
    hits.retain(|p| p.len() == depth);
    if hits.len() > 1 {
        let names: Vec<String> = hits.iter().map(|p| p.join(".")).collect();
        bail!("config key `{key}` is ambiguous: {}", names.join(", "));
    }
    Ok(hits.remove(0))
}

fn lookup<'a>(root: &'a Table, path: &[String]) -> Option<&'a Value> {
    let (last, parents) = path.split_last()?;
    let mut t = root;
    for p in parents {
        t = t.get(p)?.as_table()?;
    }
    t.get(last)
}

fn insert(root: &mut Table, path: &[String], value: Value) -> Result<()> {
    let (last, parents) = path.split_last().ok_or_else(|| anyhow!("empty key"))?;
    let mut t = root;
    for p in parents {
        t = t
            .entry(p.clone())
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .ok_or_else(|| anyhow!("`{p}` is not a section"))?;
    }
    t.insert(last.clone(), value);
    Ok(())
}

/// Reads `raw` as a TOML literal unless the field being replaced holds a string.
fn parse_value(raw: &str, current: Option<&Value>) -> Value {
    if let Some(Value::String(_)) = current {
        return Value::String(raw.trim_matches('"').to_string());
    }
    match toml::from_str::<Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Reads a calendar file of `start,end,state` rows (header required).
pub fn read_calendar_csv(path: &Path) -> Result<MarketCalendar> {
    #[derive(Deserialize)]
    struct Row {
        start: chrono::NaiveDate,
        end: chrono::NaiveDate,
        state: MarketState,
    }
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening calendar {}", path.display()))?;
    let mut intervals = Vec::new();
    for (i, row) in r.deserialize::<Row>().enumerate() {
        let row = row.with_context(|| format!("{}: line {}", path.display(), i + 2))?;
        intervals.push(CalendarInterval {
            start: row.start,
            end: row.end,
            state: row.state,
        });
    }
    MarketCalendar::new(intervals).with_context(|| format!("calendar {}", path.display()))
}
