//! Study orchestration: event detection, per-event fits, aggregation and the
//! descriptive tables, plus writers for the run directory.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    build_feature_matrix, depth, depth_levels, format_bp, spread, suboptimal_flag,
    yield_and_volatility, DummyState, FeatureConfig, FeatureMatrix, ModelVariant,
};
use crate::glm::{fit, odds_effect, FitOptions, GlmSpec, Link, Significance};
use crate::limits::{
    compute_limits, detect_first_hit, Direction, LimitHitEvent, LimitRate, MarketCalendar,
    MarketState, RoundingMode,
};
use crate::marketdata::{DailySession, IndexData, StockClass};

/// Regressor change used for odds effects on the yield coefficient.
pub const ODDS_DX: f64 = 0.001;

/// Model families selectable for a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    Base,
    Suboptimal,
    Conditional,
}

impl std::str::FromStr for VariantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(VariantKind::Base),
            "suboptimal" => Ok(VariantKind::Suboptimal),
            "conditional" => Ok(VariantKind::Conditional),
            _ => Err(Error::InvalidArgument(format!("unknown variant `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub alpha: f64,
    pub rounding: RoundingMode,
    /// Daily limit rates in basis points.
    pub limit_rate_common: LimitRate,
    pub limit_rate_st: LimitRate,
    /// Conditional thresholds in basis points.
    pub m_grid_common: Vec<u32>,
    pub m_grid_st: Vec<u32>,
    pub prehit_window_common: usize,
    pub prehit_window_st: usize,
    pub features: FeatureConfig,
    pub max_iter: usize,
    pub variants: Vec<VariantKind>,
    /// Restricts the conditional grid to these thresholds when set.
    pub m_filter: Option<Vec<u32>>,
    pub links: Vec<Link>,
    /// Also fit the base model under probit when probit is not in `links`.
    pub probit_twin: bool,
    pub hist_bin_width: f64,
    /// Shares per lot for the trade-size column of the pre-hit table.
    pub lot_size: u64,
    pub workers: Option<usize>,
    pub calendar: MarketCalendar,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            alpha: 0.05,
            rounding: RoundingMode::HalfAwayFromZero,
            limit_rate_common: LimitRate::COMMON,
            limit_rate_st: LimitRate::SPECIAL_TREATMENT,
            m_grid_common: vec![500, 600, 700, 800, 900],
            m_grid_st: vec![250, 300, 350, 400, 450],
            prehit_window_common: 16,
            prehit_window_st: 20,
            features: FeatureConfig::default(),
            max_iter: 100,
            variants: vec![VariantKind::Base, VariantKind::Suboptimal, VariantKind::Conditional],
            m_filter: None,
            links: vec![Link::Logit],
            probit_twin: true,
            hist_bin_width: 0.005,
            lot_size: 1,
            workers: None,
            calendar: MarketCalendar::default(),
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if self.hist_bin_width.is_nan() || self.hist_bin_width <= 0.0 {
            return bad("hist_bin_width must be positive");
        }
        if self.lot_size == 0 {
            return bad("lot_size must be positive");
        }
        if self.links.is_empty() {
            return bad("at least one link is required");
        }
        for r in [self.limit_rate_common, self.limit_rate_st] {
            if r.0 == 0 || r.0 >= 10_000 {
                return bad("limit rates must lie in (0, 10000) basis points");
            }
        }
        if self.workers == Some(0) {
            return bad("workers must be positive");
        }
        Ok(())
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            max_iter: self.max_iter,
            alpha: self.alpha,
            ..FitOptions::default()
        }
    }

    pub fn m_grid(&self, class: StockClass) -> Vec<u32> {
        let grid = match class {
            StockClass::Common => &self.m_grid_common,
            StockClass::SpecialTreatment => &self.m_grid_st,
        };
        match &self.m_filter {
            Some(keep) => grid.iter().copied().filter(|m| keep.contains(m)).collect(),
            None => grid.clone(),
        }
    }

    pub fn limit_rate(&self, class: StockClass) -> LimitRate {
        match class {
            StockClass::Common => self.limit_rate_common,
            StockClass::SpecialTreatment => self.limit_rate_st,
        }
    }

    pub fn prehit_window(&self, class: StockClass) -> usize {
        match class {
            StockClass::Common => self.prehit_window_common,
            StockClass::SpecialTreatment => self.prehit_window_st,
        }
    }

    /// The (variant, link) pairs fitted for an event of `class`.
    pub fn fit_plan(&self, class: StockClass) -> Vec<(ModelVariant, Link)> {
        let mut variants = Vec::new();
        for kind in &self.variants {
            match kind {
                VariantKind::Base => variants.push(ModelVariant::Base),
                VariantKind::Suboptimal => variants.push(ModelVariant::Suboptimal),
                VariantKind::Conditional => variants.extend(
                    self.m_grid(class)
                        .into_iter()
                        .map(|m_bp| ModelVariant::Conditional { m_bp }),
                ),
            }
        }
        let mut plan: Vec<(ModelVariant, Link)> = variants
            .iter()
            .flat_map(|&v| self.links.iter().map(move |&l| (v, l)))
            .collect();
        if self.probit_twin
            && !self.links.contains(&Link::Probit)
            && variants.contains(&ModelVariant::Base)
        {
            plan.push((ModelVariant::Base, Link::Probit));
        }
        plan
    }
}

/// A session that could not be turned into an event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionIssue {
    pub stock_id: String,
    pub date: NaiveDate,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Ok,
    Failed,
    Skipped,
}

/// Estimates of a converged fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub n_obs: usize,
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub z_stats: Vec<f64>,
    pub significance: Vec<Significance>,
    pub loglik: f64,
    pub loglik_null: f64,
    pub rho_square: f64,
    pub accuracy: f64,
    pub iterations: usize,
    pub condition_number: f64,
    pub ridge_applied: bool,
}

impl FitSummary {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.coefficients[i])
    }

    pub fn significance_of(&self, name: &str) -> Option<Significance> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.significance[i])
    }
}

/// One planned fit, keyed by (stock, date, direction, variant, m, link).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub stock_id: String,
    pub date: NaiveDate,
    pub direction: Direction,
    pub variant: String,
    /// Conditional threshold as a percentage string.
    pub m: Option<String>,
    pub link: Link,
    pub stock_class: StockClass,
    pub market_state: MarketState,
    pub status: FitStatus,
    pub reason: Option<String>,
    /// `dummy_inactive` / `dummy_saturated` when the interaction was dropped.
    pub flags: Vec<String>,
    pub fit: Option<FitSummary>,
}

impl FitRecord {
    pub fn event_key(&self) -> (&str, NaiveDate, Direction) {
        (&self.stock_id, self.date, self.direction)
    }
}

fn fit_one(
    event: &LimitHitEvent,
    base: &std::result::Result<FeatureMatrix, crate::features::Skip>,
    variant: ModelVariant,
    link: Link,
    opts: &FitOptions,
) -> FitRecord {
    let mut rec = FitRecord {
        stock_id: event.stock_id.clone(),
        date: event.date,
        direction: event.direction,
        variant: variant.name().into(),
        m: variant.m_bp().map(format_bp),
        link,
        stock_class: event.stock_class,
        market_state: event.market_state,
        status: FitStatus::Skipped,
        reason: None,
        flags: Vec::new(),
        fit: None,
    };
    let base = match base {
        Ok(m) => m,
        Err(skip) => {
            rec.reason = Some(skip.reason.as_str().into());
            return rec;
        }
    };
    let matrix = base.with_variant(variant, event.prev_close);
    let with_interaction = match matrix.dummy_state() {
        None | Some(DummyState::Varying) => true,
        Some(DummyState::Inactive) => {
            rec.flags.push("dummy_inactive".into());
            false
        }
        Some(DummyState::Saturated) => {
            rec.flags.push("dummy_saturated".into());
            false
        }
    };
    let x = matrix.design(with_interaction);
    let y = matrix.responses();
    let spec = GlmSpec::new(link, matrix.columns(with_interaction));
    match fit(&spec, &x, &y, opts) {
        Ok(f) if f.converged => {
            rec.status = FitStatus::Ok;
            rec.fit = Some(FitSummary {
                n_obs: f.n_obs,
                names: f.names,
                coefficients: f.coefficients,
                std_errors: f.std_errors,
                z_stats: f.z_stats,
                significance: f.significance,
                loglik: f.loglik,
                loglik_null: f.loglik_null,
                rho_square: f.rho_square,
                accuracy: f.accuracy,
                iterations: f.iterations,
                condition_number: f.diagnostics.condition_number,
                ridge_applied: f.diagnostics.ridge_applied,
            });
        }
        Ok(f) => {
            rec.status = FitStatus::Failed;
            rec.reason = Some(f.reason.unwrap_or_else(|| "not_converged".into()));
        }
        Err(Error::DegenerateResponse) => {
            rec.status = FitStatus::Failed;
            rec.reason = Some("degenerate_response".into());
        }
        Err(e) => {
            rec.status = FitStatus::Failed;
            rec.reason = Some(e.to_string());
        }
    }
    rec
}

/// Everything a run produces, in deterministic order.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyOutput {
    pub sessions: usize,
    pub events: Vec<LimitHitEvent>,
    pub session_issues: Vec<SessionIssue>,
    pub fits: Vec<FitRecord>,
    pub aggregates: Vec<AggregateRow>,
    pub prehit: Vec<PrehitCell>,
    pub suboptimal: Vec<SuboptimalStats>,
    pub robustness: RobustnessStats,
}

/// Detects the first hit of every session.
pub fn detect_events(
    sessions: &[DailySession],
    cfg: &StudyConfig,
) -> (Vec<LimitHitEvent>, Vec<SessionIssue>) {
    let results: Vec<_> = sessions
        .par_iter()
        .map(|s| {
            let limits = compute_limits(s.prev_close, cfg.limit_rate(s.stock_class), cfg.rounding);
            detect_first_hit(s, limits, &cfg.calendar).map_err(|e| SessionIssue {
                stock_id: s.stock_id.clone(),
                date: s.date,
                message: e.to_string(),
            })
        })
        .collect();
    let mut events = Vec::new();
    let mut issues = Vec::new();
    for r in results {
        match r {
            Ok(Some(e)) => events.push(e),
            Ok(None) => {}
            Err(i) => issues.push(i),
        }
    }
    (events, issues)
}

/// Runs detection, all planned fits and the summaries.
pub fn run_study(
    sessions: &[DailySession],
    index: &IndexData,
    cfg: &StudyConfig,
) -> Result<StudyOutput> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    pool.install(|| {
        let (events, session_issues) = detect_events(sessions, cfg);
        let opts = cfg.fit_options();
        let fits: Vec<FitRecord> = events
            .par_iter()
            .flat_map_iter(|e| {
                let base = build_feature_matrix(
                    e,
                    index.get(&e.exchange),
                    ModelVariant::Base,
                    &cfg.features,
                );
                cfg.fit_plan(e.stock_class)
                    .into_iter()
                    .map(|(v, l)| fit_one(e, &base, v, l, &opts))
                    .collect::<Vec<_>>()
            })
            .collect();
        let aggregates = aggregate(&fits, cfg);
        let prehit = prehit_summary(&events, cfg);
        let suboptimal = events.iter().filter_map(suboptimal_ratios).collect();
        let robustness = robustness_delta(&fits, cfg.hist_bin_width);
        Ok(StudyOutput {
            sessions: sessions.len(),
            events,
            session_issues,
            fits,
            aggregates,
            prehit,
            suboptimal,
            robustness,
        })
    })
}

/// Aggregation cell.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PartitionKey {
    pub link: Link,
    pub variant: String,
    pub m: Option<String>,
    pub stock_class: StockClass,
    pub market_state: MarketState,
    pub direction: Direction,
}

/// Per-coefficient counts for one partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub key: PartitionKey,
    pub coefficient: String,
    /// Fits attempted in the partition (skips excluded).
    pub n_events: usize,
    pub n_pos: usize,
    pub n_neg: usize,
    pub n_zero: usize,
    /// Failed fits plus converged fits where this coefficient was dropped.
    pub failures: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub n_skipped: usize,
    /// `reason:count` pairs for failures and drops, `;`-separated.
    pub failure_reasons: String,
    /// Mean of yield1 plus the interaction (yield1 alone for base).
    pub mean_yield_effect: Option<f64>,
    /// Odds change for a 0.1% yield move toward the limit.
    pub odds_mean: Option<f64>,
}

/// Sum of values after sorting, so the result does not depend on input order.
fn sorted_mean(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

fn sorted_median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Direction-signed regressor change: yield rising for up-limit models,
/// falling for down-limit models.
pub fn odds_dx(direction: Direction) -> f64 {
    direction.sign() as f64 * ODDS_DX
}

/// Counts significance per coefficient and partition.
pub fn aggregate(fits: &[FitRecord], cfg: &StudyConfig) -> Vec<AggregateRow> {
    let _ = cfg;
    let mut cells: BTreeMap<PartitionKey, Vec<&FitRecord>> = BTreeMap::new();
    for f in fits {
        let key = PartitionKey {
            link: f.link,
            variant: f.variant.clone(),
            m: f.m.clone(),
            stock_class: f.stock_class,
            market_state: f.market_state,
            direction: f.direction,
        };
        cells.entry(key).or_default().push(f);
    }
    let mut rows = Vec::new();
    for (key, recs) in cells {
        let variant = match key.variant.as_str() {
            "base" => ModelVariant::Base,
            "suboptimal" => ModelVariant::Suboptimal,
            _ => ModelVariant::Conditional { m_bp: 0 },
        };
        let names: Vec<String> = std::iter::once("const")
            .chain(variant.columns())
            .map(String::from)
            .collect();
        let attempted: Vec<&&FitRecord> = recs.iter().filter(|r| r.status != FitStatus::Skipped).collect();
        let n_skipped = recs.len() - attempted.len();

        let mut reasons: BTreeMap<String, usize> = BTreeMap::new();
        for r in &attempted {
            if r.status == FitStatus::Failed {
                *reasons.entry(r.reason.clone().unwrap_or_default()).or_default() += 1;
            }
            for flag in &r.flags {
                *reasons.entry(flag.clone()).or_default() += 1;
            }
        }
        let failure_reasons = reasons
            .iter()
            .map(|(k, v)| format!("{k}:{v}"))
            .collect::<Vec<_>>()
            .join(";");

        let mut effect: Vec<f64> = attempted
            .iter()
            .filter_map(|r| {
                let s = r.fit.as_ref()?;
                let b5 = s.coefficient("yield1")?;
                match variant.interaction() {
                    None => Some(b5),
                    Some(name) => Some(b5 + s.coefficient(name)?),
                }
            })
            .collect();
        let mean_yield_effect = sorted_mean(&mut effect);
        let odds_mean = mean_yield_effect.map(|m| odds_effect(m, odds_dx(key.direction)));

        for name in &names {
            let (mut pos, mut neg, mut zero, mut failures) = (0, 0, 0, 0);
            let mut values = Vec::new();
            for r in &attempted {
                match r.fit.as_ref().and_then(|s| Some((s.significance_of(name)?, s.coefficient(name)?))) {
                    Some((sig, beta)) => {
                        match sig {
                            Significance::Positive => pos += 1,
                            Significance::Negative => neg += 1,
                            Significance::Insignificant => zero += 1,
                        }
                        values.push(beta);
                    }
                    None => failures += 1,
                }
            }
            rows.push(AggregateRow {
                key: key.clone(),
                coefficient: name.clone(),
                n_events: attempted.len(),
                n_pos: pos,
                n_neg: neg,
                n_zero: zero,
                failures,
                mean: sorted_mean(&mut values.clone()),
                median: sorted_median(&mut values),
                n_skipped,
                failure_reasons: failure_reasons.clone(),
                mean_yield_effect,
                odds_mean,
            });
        }
    }
    rows
}

/// Quantities tabulated along the last trades before a hit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrehitQuantity {
    V,
    Yield,
    Volatility,
    Spread,
    Depth,
}

impl PrehitQuantity {
    pub const ALL: [PrehitQuantity; 5] = [
        PrehitQuantity::V,
        PrehitQuantity::Yield,
        PrehitQuantity::Volatility,
        PrehitQuantity::Spread,
        PrehitQuantity::Depth,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PrehitQuantity::V => "V",
            PrehitQuantity::Yield => "yield",
            PrehitQuantity::Volatility => "volatility",
            PrehitQuantity::Spread => "spread",
            PrehitQuantity::Depth => "depth",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrehitCell {
    pub stock_class: StockClass,
    pub direction: Direction,
    pub market_state: MarketState,
    /// 1 is the last trade before the hitting trade.
    pub k: usize,
    pub quantity: PrehitQuantity,
    pub n: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
}

impl PrehitCell {
    /// `mean(median)` with four significant digits, empty when absent.
    pub fn display(&self) -> String {
        match (self.mean, self.median) {
            (Some(a), Some(b)) => format!("{}({})", sig4(a), sig4(b)),
            _ => String::new(),
        }
    }
}

fn sig4(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.abs() >= 1e-2 && x.abs() < 1e5 {
        let decimals = (3 - x.abs().log10().floor() as i32).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.3e}")
    }
}

/// Per-event values of the tabulated quantities for trades 1..=W before the hit.
pub fn prehit_values(
    event: &LimitHitEvent,
    window: usize,
    lot_size: u64,
) -> Vec<(usize, PrehitQuantity, f64)> {
    let ticks = &event.prehit_ticks;
    // (tick index, trade) for trades before the hit
    let trades: Vec<usize> = (0..event.hit_index).filter(|&i| ticks[i].is_trade()).collect();
    let levels = depth_levels(event.date);
    let mut out = Vec::new();
    for k in 1..=window.min(trades.len()) {
        let pos = trades.len() - k;
        let i = trades[pos];
        let t = &ticks[i];
        out.push((k, PrehitQuantity::V, (t.volume as f64).ln() - (lot_size as f64).ln()));
        if pos > 0 {
            let (y, v) = yield_and_volatility(t.price, ticks[trades[pos - 1]].price);
            out.push((k, PrehitQuantity::Yield, y));
            out.push((k, PrehitQuantity::Volatility, v));
        }
        if let Some(book) = i.checked_sub(1).map(|j| &ticks[j]) {
            if let (Some(a), Some(b)) = (book.best_ask(), book.best_bid()) {
                out.push((k, PrehitQuantity::Spread, spread(a, b)));
            }
            if let Some(d) = depth(&book.bids, &book.asks, event.direction, levels) {
                out.push((k, PrehitQuantity::Depth, d));
            }
        }
    }
    out
}

/// Mean and median per (class, direction, state, k, quantity). Cells with no
/// contributing trade are kept with `n = 0` and no values.
pub fn prehit_summary(events: &[LimitHitEvent], cfg: &StudyConfig) -> Vec<PrehitCell> {
    type Key = (StockClass, Direction, MarketState);
    let mut groups: BTreeMap<Key, BTreeMap<(usize, PrehitQuantity), Vec<f64>>> = BTreeMap::new();
    for e in events {
        let window = cfg.prehit_window(e.stock_class);
        let cells = groups
            .entry((e.stock_class, e.direction, e.market_state))
            .or_default();
        for (k, q, v) in prehit_values(e, window, cfg.lot_size) {
            cells.entry((k, q)).or_default().push(v);
        }
    }
    let mut out = Vec::new();
    for ((class, direction, state), mut cells) in groups {
        for k in 1..=cfg.prehit_window(class) {
            for q in PrehitQuantity::ALL {
                let mut vals = cells.remove(&(k, q)).unwrap_or_default();
                out.push(PrehitCell {
                    stock_class: class,
                    direction,
                    market_state: state,
                    k,
                    quantity: q,
                    n: vals.len(),
                    mean: sorted_mean(&mut vals),
                    median: sorted_median(&mut vals),
                });
            }
        }
    }
    out
}

/// Share of pre-hit trades printed outside the prevailing quotes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuboptimalStats {
    pub stock_id: String,
    pub date: NaiveDate,
    pub direction: Direction,
    pub market_state: MarketState,
    /// Pre-hit trades with both quotes available.
    pub n_trades: usize,
    /// Pre-hit trades left out for lack of quotes.
    pub n_unquoted: usize,
    pub w: f64,
    pub wt: f64,
}

/// W and WT over the trades before the hitting trade. `None` for opening
/// hits and events with no quoted pre-hit trade.
pub fn suboptimal_ratios(event: &LimitHitEvent) -> Option<SuboptimalStats> {
    if event.opening_hit {
        return None;
    }
    let ticks = &event.prehit_ticks;
    let (mut n, mut unquoted, mut n_is) = (0usize, 0usize, 0usize);
    let (mut vol, mut vol_is) = (0u128, 0u128);
    for i in 0..event.hit_index {
        let t = &ticks[i];
        if !t.is_trade() {
            continue;
        }
        let quotes = i
            .checked_sub(1)
            .and_then(|j| Some((ticks[j].best_ask()?, ticks[j].best_bid()?)));
        let Some((a, b)) = quotes else {
            unquoted += 1;
            continue;
        };
        n += 1;
        vol += t.volume as u128;
        if suboptimal_flag(t.price, a, b) {
            n_is += 1;
            vol_is += t.volume as u128;
        }
    }
    if n == 0 {
        return None;
    }
    Some(SuboptimalStats {
        stock_id: event.stock_id.clone(),
        date: event.date,
        direction: event.direction,
        market_state: event.market_state,
        n_trades: n,
        n_unquoted: unquoted,
        w: n_is as f64 / n as f64,
        wt: vol_is as f64 / vol as f64,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaAccuracy {
    pub stock_id: String,
    pub date: NaiveDate,
    pub direction: Direction,
    pub market_state: MarketState,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub density: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RobustnessStats {
    pub deltas: Vec<DeltaAccuracy>,
    /// Converged base fits without a converged twin under the other link.
    pub unpaired: usize,
    pub mean: Option<f64>,
    pub mean_abs: Option<f64>,
    pub bin_width: f64,
    /// Non-empty bins in increasing order.
    pub histogram: Vec<HistBin>,
}

/// Pairs converged base logit and probit fits of the same event and
/// tabulates the accuracy difference.
pub fn robustness_delta(fits: &[FitRecord], bin_width: f64) -> RobustnessStats {
    type Key<'a> = (&'a str, NaiveDate, Direction);
    let mut pairs: BTreeMap<Key, (Option<&FitRecord>, Option<&FitRecord>)> = BTreeMap::new();
    for f in fits.iter().filter(|f| f.variant == "base" && f.status == FitStatus::Ok) {
        let slot = pairs.entry(f.event_key()).or_default();
        match f.link {
            Link::Logit => slot.0 = Some(f),
            Link::Probit => slot.1 = Some(f),
        }
    }
    let mut stats = RobustnessStats {
        bin_width,
        ..RobustnessStats::default()
    };
    for (_, pair) in pairs {
        match pair {
            (Some(l), Some(p)) => {
                let acc = |r: &FitRecord| r.fit.as_ref().expect("ok fits carry estimates").accuracy;
                stats.deltas.push(DeltaAccuracy {
                    stock_id: l.stock_id.clone(),
                    date: l.date,
                    direction: l.direction,
                    market_state: l.market_state,
                    delta: acc(l) - acc(p),
                });
            }
            _ => stats.unpaired += 1,
        }
    }
    let mut d: Vec<f64> = stats.deltas.iter().map(|x| x.delta).collect();
    stats.mean = sorted_mean(&mut d);
    let mut abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    stats.mean_abs = sorted_mean(&mut abs);
    let mut bins: BTreeMap<i64, usize> = BTreeMap::new();
    for x in &d {
        *bins.entry((x / bin_width).floor() as i64).or_default() += 1;
    }
    let n = d.len() as f64;
    stats.histogram = bins
        .into_iter()
        .map(|(b, count)| HistBin {
            lo: b as f64 * bin_width,
            hi: (b + 1) as f64 * bin_width,
            count,
            density: count as f64 / (n * bin_width),
        })
        .collect();
    stats
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(dir.join(name))?))
}

pub fn write_events<W: Write>(events: &[LimitHitEvent], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "stock_id", "exchange", "date", "stock_class", "prev_close", "up_limit", "down_limit",
        "direction", "hit_index", "hit_trade_ordinal", "hit_time", "market_state", "opening_hit",
    ])?;
    for e in events {
        w.write_record([
            e.stock_id.clone(),
            e.exchange.to_string(),
            e.date.to_string(),
            e.stock_class.to_string(),
            e.prev_close.to_string(),
            e.limits.up.to_string(),
            e.limits.down.to_string(),
            e.direction.to_string(),
            e.hit_index.to_string(),
            e.hit_trade_ordinal.to_string(),
            e.hit_time.time().to_string(),
            e.market_state.to_string(),
            e.opening_hit.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_fits<W: Write>(fits: &[FitRecord], mut sink: W) -> Result<()> {
    for f in fits {
        serde_json::to_writer(&mut sink, f)?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    Ok(())
}

/// Reads `fits.jsonl` back.
pub fn read_fits(text: &str) -> Result<Vec<FitRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i as u64 + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

pub fn write_aggregate<W: Write>(rows: &[&AggregateRow], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "link", "variant", "m", "stock_class", "market_state", "direction", "coefficient",
        "n_events", "n_pos", "n_neg", "n_zero", "failures", "mean", "median", "n_skipped",
        "failure_reasons", "mean_yield_effect", "odds_mean",
    ])?;
    for r in rows {
        let k = &r.key;
        w.write_record([
            k.link.to_string(),
            k.variant.clone(),
            k.m.clone().unwrap_or_default(),
            k.stock_class.to_string(),
            k.market_state.to_string(),
            k.direction.to_string(),
            r.coefficient.clone(),
            r.n_events.to_string(),
            r.n_pos.to_string(),
            r.n_neg.to_string(),
            r.n_zero.to_string(),
            r.failures.to_string(),
            opt(r.mean),
            opt(r.median),
            r.n_skipped.to_string(),
            r.failure_reasons.clone(),
            opt(r.mean_yield_effect),
            opt(r.odds_mean),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_prehit<W: Write>(cells: &[PrehitCell], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "stock_class", "direction", "market_state", "k", "quantity", "n", "mean", "median",
        "mean(median)",
    ])?;
    for c in cells {
        w.write_record([
            c.stock_class.to_string(),
            c.direction.to_string(),
            c.market_state.to_string(),
            c.k.to_string(),
            c.quantity.as_str().to_string(),
            c.n.to_string(),
            opt(c.mean),
            opt(c.median),
            c.display(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_suboptimal<W: Write>(stats: &[SuboptimalStats], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "stock_id", "date", "direction", "market_state", "n_trades", "n_unquoted", "W", "WT",
    ])?;
    for s in stats {
        w.write_record([
            s.stock_id.clone(),
            s.date.to_string(),
            s.direction.to_string(),
            s.market_state.to_string(),
            s.n_trades.to_string(),
            s.n_unquoted.to_string(),
            s.w.to_string(),
            s.wt.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_histogram<W: Write>(stats: &RobustnessStats, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["bin_lo", "bin_hi", "count", "density"])?;
    for b in &stats.histogram {
        w.write_record([
            b.lo.to_string(),
            b.hi.to_string(),
            b.count.to_string(),
            b.density.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Variant names that get an `aggregate_<variant>.csv`.
pub const AGGREGATE_VARIANTS: [&str; 3] = ["base", "suboptimal", "conditional"];

/// Writes every report file except the manifest; returns the file names.
pub fn write_reports(dir: &Path, out: &StudyOutput) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let mut names = Vec::new();
    let mut track = |n: &str| {
        names.push(n.to_string());
        n.to_string()
    };
    write_events(&out.events, create(dir, &track("events.csv"))?)?;
    write_fits(&out.fits, create(dir, &track("fits.jsonl"))?)?;
    for v in AGGREGATE_VARIANTS {
        let rows: Vec<&AggregateRow> = out.aggregates.iter().filter(|r| r.key.variant == v).collect();
        write_aggregate(&rows, create(dir, &track(&format!("aggregate_{v}.csv")))?)?;
    }
    write_prehit(&out.prehit, create(dir, &track("prehit_summary.csv"))?)?;
    write_suboptimal(&out.suboptimal, create(dir, &track("suboptimal.csv"))?)?;
    write_histogram(&out.robustness, create(dir, &track("delta_accuracy_hist.csv"))?)?;
    Ok(names)
}

/// Fit counts by variant and status, for the manifest.
pub fn fit_counts(fits: &[FitRecord]) -> BTreeMap<String, BTreeMap<String, usize>> {
    let mut out: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for f in fits {
        let variant = match &f.m {
            Some(m) => format!("{}_{}_m{}", f.variant, f.link, m),
            None => format!("{}_{}", f.variant, f.link),
        };
        let status = match f.status {
            FitStatus::Ok => "ok",
            FitStatus::Failed => "failed",
            FitStatus::Skipped => "skipped",
        };
        *out.entry(variant).or_default().entry(status.into()).or_default() += 1;
    }
    out
}
