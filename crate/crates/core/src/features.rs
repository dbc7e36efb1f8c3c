//! Per-trade regressors and responses for the pre-hit window of an event.
//!
//! Quotes associated with trade k are the book of the tick row immediately
//! before the trade print in the session stream. Index returns come from the
//! one-minute series of the stock's own exchange.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime, Timelike};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::{Direction, LimitHitEvent};
use crate::marketdata::{IndexSeries, Level, Ticks, TradeTick};

/// First day with five visible book levels; earlier data carries three.
pub fn five_level_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2003, 12, 5).expect("valid date")
}

/// Number of book levels used by [`depth`] on `date`.
pub fn depth_levels(date: NaiveDate) -> usize {
    if date < five_level_start() {
        3
    } else {
        5
    }
}

/// Number of lagged trades needed before a row can be formed.
pub const LAGS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Only trades strictly after this time enter the sample.
    pub sample_start: NaiveTime,
    pub min_rows: usize,
    /// Cap on the trade duration in seconds (e.g. to neutralise the lunch break).
    pub gap_clamp_seconds: Option<u32>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            sample_start: NaiveTime::from_hms_opt(9, 33, 0).expect("valid time"),
            min_rows: 30,
            gap_clamp_seconds: None,
        }
    }
}

/// Which regression is being assembled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "variant")]
pub enum ModelVariant {
    Base,
    Suboptimal,
    /// Excursion threshold `m` in basis points of the previous close.
    Conditional { m_bp: u32 },
}

impl ModelVariant {
    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::Base => "base",
            ModelVariant::Suboptimal => "suboptimal",
            ModelVariant::Conditional { .. } => "conditional",
        }
    }

    pub fn m_bp(self) -> Option<u32> {
        match self {
            ModelVariant::Conditional { m_bp } => Some(m_bp),
            _ => None,
        }
    }

    /// Name of the interaction column, if the variant has one.
    pub fn interaction(self) -> Option<&'static str> {
        match self {
            ModelVariant::Base => None,
            ModelVariant::Suboptimal => Some("IS1*yield1"),
            ModelVariant::Conditional { .. } => Some("IR*yield1"),
        }
    }

    /// Regressor names (intercept excluded) in coefficient order.
    pub fn columns(self) -> Vec<&'static str> {
        let mut cols = vec!["dT", "V1*IBS1", "V2*IBS2", "V3*IBS3", "yield1"];
        cols.extend(self.interaction());
        cols.extend(["MKT1", "MKT2", "MKT3", "spread1", "depth1"]);
        cols
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelVariant::Conditional { m_bp } => write!(f, "conditional(m={})", format_bp(*m_bp)),
            other => f.write_str(other.name()),
        }
    }
}

/// Renders basis points as a percentage without trailing zeros: 500 → "5", 250 → "2.5".
pub fn format_bp(bp: u32) -> String {
    let whole = bp / 100;
    let frac = bp % 100;
    match frac {
        0 => whole.to_string(),
        f if f % 10 == 0 => format!("{whole}.{}", f / 10),
        f => format!("{whole}.{f:02}"),
    }
}

/// Parses a percentage such as "5" or "2.5" into basis points.
pub fn parse_bp(s: &str) -> Result<u32> {
    let bad = || Error::InvalidArgument(format!("bad percentage {s:?}"));
    let t: Ticks = Ticks::from_str(s.trim()).map_err(|_| bad())?;
    u32::try_from(t.get()).map_err(|_| bad())
}

/// Y: did trade k move toward the limit.
pub fn response_y(p_k: Ticks, p_prev: Ticks, ask: Ticks, bid: Ticks, dir: Direction) -> bool {
    let twice_mid = ask.get() + bid.get();
    match dir {
        Direction::Up => p_k > p_prev || (p_k == p_prev && 2 * p_k.get() > twice_mid),
        Direction::Down => p_k < p_prev || (p_k == p_prev && 2 * p_k.get() < twice_mid),
    }
}

/// Midpoint trade-direction sign, oriented toward the limit.
pub fn ibs(p: Ticks, ask: Ticks, bid: Ticks, dir: Direction) -> i8 {
    let twice_mid = ask.get() + bid.get();
    let toward = match dir {
        Direction::Up => 2 * p.get() > twice_mid,
        Direction::Down => 2 * p.get() < twice_mid,
    };
    if toward {
        1
    } else {
        -1
    }
}

pub fn log_size(volume: u64) -> f64 {
    (volume as f64).ln()
}

/// Trade-to-trade log return and its absolute value.
pub fn yield_and_volatility(p_k: Ticks, p_prev: Ticks) -> (f64, f64) {
    let y = ((p_k.get() - p_prev.get()) as f64 / p_prev.get() as f64).ln_1p();
    (y, y.abs())
}

/// Relative quoted spread.
pub fn spread(ask: Ticks, bid: Ticks) -> f64 {
    2.0 * (ask.get() - bid.get()) as f64 / (ask.get() + bid.get()) as f64
}

/// Signed log of the value imbalance between the first `levels` bid and ask
/// levels, in currency units. `None` when both sides are empty.
pub fn depth(bids: &[Level], asks: &[Level], dir: Direction, levels: usize) -> Option<f64> {
    if bids.is_empty() && asks.is_empty() {
        return None;
    }
    let side = |ls: &[Level]| -> i128 {
        ls.iter()
            .take(levels)
            .map(|l| l.price.get() as i128 * l.volume as i128)
            .sum()
    };
    let s = dir.sign() as i128 * (side(bids) - side(asks));
    Some(match s.signum() {
        0 => 0.0,
        sign => sign as f64 * (s.unsigned_abs() as f64 / 100.0).ln(),
    })
}

/// IS: the trade printed strictly outside the prevailing best quotes.
pub fn suboptimal_flag(p: Ticks, ask: Ticks, bid: Ticks) -> bool {
    p < bid || p > ask
}

/// Return of `p` relative to the previous close.
pub fn excursion(p: Ticks, prev_close: Ticks) -> f64 {
    (p.get() - prev_close.get()) as f64 / prev_close.get() as f64
}

/// IR^m: the return from the previous close has reached `m_bp` basis points
/// toward the limit. Compared exactly in integers.
pub fn excursion_dummy(p: Ticks, prev_close: Ticks, dir: Direction, m_bp: u32) -> bool {
    let lhs = (p.get() - prev_close.get()) as i128 * 10_000;
    let rhs = m_bp as i128 * prev_close.get() as i128;
    match dir {
        Direction::Up => lhs >= rhs,
        Direction::Down => lhs <= -rhs,
    }
}

fn lunch_gap(prev: NaiveDateTime, next: NaiveDateTime) -> bool {
    prev.time() == NaiveTime::from_hms_opt(11, 30, 0).expect("valid time")
        && (next.time() == NaiveTime::from_hms_opt(13, 0, 0).expect("valid time")
            || next.time() == NaiveTime::from_hms_opt(13, 1, 0).expect("valid time"))
}

/// One-minute index log returns over the last three bar intervals ending
/// strictly before `t`, most recent first.
///
/// Needs four same-day bars in an unbroken minute sequence (the 11:30 to
/// 13:00/13:01 lunch gap counts as one step). Returns `None` otherwise.
pub fn mkt_lags(t: NaiveDateTime, index: &IndexSeries) -> Option<[f64; 3]> {
    let end = index.bars.partition_point(|&(ts, _)| ts < t);
    if end < LAGS + 1 {
        return None;
    }
    let window = &index.bars[end - LAGS - 1..end];
    for w in window.windows(2) {
        let (a, b) = (w[0].0, w[1].0);
        if a.date() != t.date() || b.date() != t.date() {
            return None;
        }
        if (b - a).num_seconds() != 60 && !lunch_gap(a, b) {
            return None;
        }
    }
    let r = |i: usize| window[i + 1].1.ln() - window[i].1.ln();
    Some([r(2), r(1), r(0)])
}

/// Regressors for one trade k. All `_prev`/lag fields refer to earlier trades.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    /// 1-based ordinal of the trade among the day's trades.
    pub k: usize,
    pub time: NaiveDateTime,
    pub y: bool,
    pub dt: f64,
    /// `V_{k-l} * IBS_{k-l}` for l = 1, 2, 3.
    pub dirvol_lags: [f64; 3],
    pub yield_prev: f64,
    /// Index returns, most recent first.
    pub mkt_lags: [f64; 3],
    pub spread_prev: f64,
    pub depth_prev: f64,
    pub is_prev: bool,
    /// IR^m for the matrix's variant; false unless conditional.
    pub ir_prev: bool,
    pub r_excursion: f64,
    /// Price of trade k-1, kept so IR can be re-evaluated for other thresholds.
    pub price_prev: Ticks,
}

/// Rows dropped while building a matrix, by cause.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropCounts {
    /// Sample trades without three earlier sample trades.
    pub burn_in: usize,
    pub missing_quotes: usize,
    pub missing_index: usize,
}

impl DropCounts {
    pub fn total(&self) -> usize {
        self.burn_in + self.missing_quotes + self.missing_index
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub stock_id: String,
    pub date: NaiveDate,
    pub direction: Direction,
    pub variant: ModelVariant,
    pub rows: Vec<FeatureRow>,
    /// Trades after the sample start through the hit, inclusive.
    pub sample_trades: usize,
    pub dropped: DropCounts,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    OpeningHit,
    InsufficientRows,
    NoIndex,
}

impl SkipReason {
    pub fn as_str(self) -> &'static str {
        match self {
            SkipReason::OpeningHit => "opening_hit",
            SkipReason::InsufficientRows => "insufficient_rows",
            SkipReason::NoIndex => "no_index",
        }
    }
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Why an event produced no matrix, with the counts that led there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Skip {
    pub reason: SkipReason,
    pub usable_rows: usize,
    pub dropped: DropCounts,
}

struct TradeView<'a> {
    tick: &'a TradeTick,
    /// Book row right before the trade, if any.
    book: Option<&'a TradeTick>,
    ordinal: usize,
}

impl TradeView<'_> {
    fn quotes(&self) -> Option<(Ticks, Ticks)> {
        let b = self.book?;
        Some((b.best_ask()?, b.best_bid()?))
    }
}

/// Builds the regression rows for `event`.
///
/// `index` must be the series of the event's exchange; `None` skips the
/// event with [`SkipReason::NoIndex`].
pub fn build_feature_matrix(
    event: &LimitHitEvent,
    index: Option<&IndexSeries>,
    variant: ModelVariant,
    cfg: &FeatureConfig,
) -> std::result::Result<FeatureMatrix, Skip> {
    let skip = |reason, usable_rows, dropped| Skip {
        reason,
        usable_rows,
        dropped,
    };
    if event.opening_hit {
        return Err(skip(SkipReason::OpeningHit, 0, DropCounts::default()));
    }
    let Some(index) = index else {
        return Err(skip(SkipReason::NoIndex, 0, DropCounts::default()));
    };

    let ticks = &event.prehit_ticks;
    let mut ordinal = 0;
    let sample: Vec<TradeView> = ticks
        .iter()
        .enumerate()
        .filter(|(_, t)| t.is_trade())
        .filter_map(|(i, t)| {
            ordinal += 1;
            (t.time.time() > cfg.sample_start).then(|| TradeView {
                tick: t,
                book: i.checked_sub(1).map(|j| &ticks[j]).filter(|b| b.has_book()),
                ordinal,
            })
        })
        .collect();

    let dir = event.direction;
    let levels = depth_levels(event.date);
    let mut dropped = DropCounts {
        burn_in: sample.len().min(LAGS),
        ..DropCounts::default()
    };
    let mut rows = Vec::with_capacity(sample.len().saturating_sub(LAGS));
    for s in LAGS..sample.len() {
        let cur = &sample[s];
        let lag = |l: usize| &sample[s - l];
        let quotes = (cur.quotes(), lag(1).quotes(), lag(2).quotes(), lag(3).quotes());
        let (Some((a_k, b_k)), Some(q1), Some(q2), Some(q3)) = quotes else {
            dropped.missing_quotes += 1;
            continue;
        };
        let Some(mkt) = mkt_lags(cur.tick.time, index) else {
            dropped.missing_index += 1;
            continue;
        };
        let prev = lag(1).tick;
        let book1 = lag(1).book.expect("quotes imply a book");
        let depth_prev = depth(&book1.bids, &book1.asks, dir, levels).expect("book has a side");
        let dirvol = |l: usize, (a, b): (Ticks, Ticks)| {
            let t = lag(l).tick;
            log_size(t.volume) * ibs(t.price, a, b, dir) as f64
        };
        let mut dt = (cur.tick.time - prev.time).num_seconds() as f64;
        if let Some(cap) = cfg.gap_clamp_seconds {
            dt = dt.min(cap as f64);
        }
        rows.push(FeatureRow {
            k: cur.ordinal,
            time: cur.tick.time,
            y: response_y(cur.tick.price, prev.price, a_k, b_k, dir),
            dt,
            dirvol_lags: [dirvol(1, q1), dirvol(2, q2), dirvol(3, q3)],
            yield_prev: yield_and_volatility(prev.price, lag(2).tick.price).0,
            mkt_lags: mkt,
            spread_prev: spread(q1.0, q1.1),
            depth_prev,
            is_prev: suboptimal_flag(prev.price, q1.0, q1.1),
            ir_prev: false,
            r_excursion: excursion(prev.price, event.prev_close),
            price_prev: prev.price,
        });
    }

    if rows.len() < cfg.min_rows {
        return Err(skip(SkipReason::InsufficientRows, rows.len(), dropped));
    }
    let mut m = FeatureMatrix {
        stock_id: event.stock_id.clone(),
        date: event.date,
        direction: dir,
        variant: ModelVariant::Base,
        rows,
        sample_trades: sample.len(),
        dropped,
    };
    m.set_variant(variant, event.prev_close);
    Ok(m)
}

/// State of a 0/1 interaction dummy over a matrix's rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DummyState {
    Varying,
    /// Zero on every row.
    Inactive,
    /// One on every row.
    Saturated,
}

impl FeatureMatrix {
    /// Re-labels the matrix for another variant, recomputing IR.
    pub fn set_variant(&mut self, variant: ModelVariant, prev_close: Ticks) {
        let dir = self.direction;
        for r in &mut self.rows {
            r.ir_prev = match variant {
                ModelVariant::Conditional { m_bp } => {
                    excursion_dummy(r.price_prev, prev_close, dir, m_bp)
                }
                _ => false,
            };
        }
        self.variant = variant;
    }

    pub fn with_variant(&self, variant: ModelVariant, prev_close: Ticks) -> FeatureMatrix {
        let mut m = self.clone();
        m.set_variant(variant, prev_close);
        m
    }

    fn dummy(&self, r: &FeatureRow) -> Option<bool> {
        match self.variant {
            ModelVariant::Base => None,
            ModelVariant::Suboptimal => Some(r.is_prev),
            ModelVariant::Conditional { .. } => Some(r.ir_prev),
        }
    }

    /// Whether the variant's dummy varies over the rows. `None` for base.
    pub fn dummy_state(&self) -> Option<DummyState> {
        let mut ones = 0;
        for r in &self.rows {
            ones += self.dummy(r)? as usize;
        }
        Some(match ones {
            0 => DummyState::Inactive,
            n if n == self.rows.len() => DummyState::Saturated,
            _ => DummyState::Varying,
        })
    }

    pub fn responses(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.y).collect()
    }

    /// Regressor names of [`FeatureMatrix::design`] (intercept excluded).
    pub fn columns(&self, with_interaction: bool) -> Vec<&'static str> {
        let mut cols = self.variant.columns();
        if !with_interaction {
            if let Some(name) = self.variant.interaction() {
                cols.retain(|c| *c != name);
            }
        }
        cols
    }

    /// Design matrix with a leading column of ones. The interaction column is
    /// left out when `with_interaction` is false.
    pub fn design(&self, with_interaction: bool) -> DMatrix<f64> {
        let cols = self.columns(with_interaction).len() + 1;
        let mut x = DMatrix::zeros(self.rows.len(), cols);
        for (i, r) in self.rows.iter().enumerate() {
            let mut vals = vec![1.0, r.dt, r.dirvol_lags[0], r.dirvol_lags[1], r.dirvol_lags[2]];
            vals.push(r.yield_prev);
            if with_interaction {
                if let Some(d) = self.dummy(r) {
                    vals.push(if d { r.yield_prev } else { 0.0 });
                }
            }
            vals.extend(r.mkt_lags);
            vals.extend([r.spread_prev, r.depth_prev]);
            debug_assert_eq!(vals.len(), cols);
            for (j, v) in vals.into_iter().enumerate() {
                x[(i, j)] = v;
            }
        }
        x
    }

    /// Writes the rows as CSV: `k,time,Y` followed by the regressor columns.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        let cols = self.columns(true);
        let mut header = vec!["k", "time", "Y"];
        header.extend(&cols);
        w.write_record(&header)?;
        let x = self.design(true);
        for (i, r) in self.rows.iter().enumerate() {
            let mut rec = vec![
                r.k.to_string(),
                format!("{:02}:{:02}:{:02}", r.time.hour(), r.time.minute(), r.time.second()),
                (r.y as u8).to_string(),
            ];
            rec.extend((1..x.ncols()).map(|j| format!("{:e}", x[(i, j)])));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limits::{compute_limits, LimitRate, MarketState, RoundingMode};
    use crate::marketdata::{Exchange, StockClass};
    use proptest::prelude::*;

    fn t(s: &str) -> Ticks {
        s.parse().unwrap()
    }

    fn dt(h: u32, m: u32, s: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2007, 1, 15)
            .unwrap()
            .and_hms_opt(h, m, s)
            .unwrap()
    }

    #[test]
    fn response_examples() {
        assert!(response_y(t("10.05"), t("10.04"), t("10.06"), t("10.04"), Direction::Up));
        assert!(response_y(t("10.05"), t("10.05"), t("10.05"), t("10.03"), Direction::Up));
        assert!(response_y(t("10.03"), t("10.03"), t("10.05"), t("10.03"), Direction::Down));
        // at the mid both models say "not toward"
        assert!(!response_y(t("10.04"), t("10.04"), t("10.05"), t("10.03"), Direction::Up));
        assert!(!response_y(t("10.04"), t("10.04"), t("10.05"), t("10.03"), Direction::Down));
    }

    #[test]
    fn ibs_examples() {
        let (a, b) = (t("10.05"), t("10.03"));
        assert_eq!(ibs(t("10.04"), a, b, Direction::Up), -1);
        assert_eq!(ibs(t("10.04"), a, b, Direction::Down), -1);
        assert_eq!(ibs(a, a, b, Direction::Up), 1);
        assert_eq!(ibs(b, a, b, Direction::Down), 1);
    }

    #[test]
    fn scalar_examples() {
        assert_eq!(log_size(1), 0.0);
        assert!((log_size(100) - 4.605_170_185_988_091).abs() < 1e-15);
        assert!((log_size(22026) - 10.0).abs() < 1e-4);
        assert_eq!(yield_and_volatility(t("10.05"), t("10.05")), (0.0, 0.0));
        let (y, v) = yield_and_volatility(t("10.01"), t("10.00"));
        assert!((y - 9.995_003_330_835_33e-4).abs() < 1e-15);
        assert_eq!(v, y);
        assert_eq!(spread(t("10.00"), t("10.00")), 0.0);
        assert!((spread(t("10.02"), t("10.00")) - 0.04 / 20.02).abs() < 1e-17);
        assert!((spread(t("5.01"), t("4.99")) - 4.0e-3).abs() < 1e-17);
    }

    #[test]
    fn depth_examples() {
        let bids = [Level::new(t("10.00"), 1000)];
        let asks = [Level::new(t("10.02"), 100)];
        let up = depth(&bids, &asks, Direction::Up, 5).unwrap();
        assert!((up - 8998f64.ln()).abs() < 1e-12);
        assert!((up - 9.105).abs() < 1e-3);
        assert_eq!(depth(&bids, &asks, Direction::Down, 5).unwrap(), -up);
        let sym = [Level::new(t("10.00"), 100)];
        assert_eq!(depth(&sym, &sym, Direction::Up, 5), Some(0.0));
        assert_eq!(depth(&[], &[], Direction::Up, 5), None);
        // only the first J levels count
        let deep = [Level::new(t("9.99"), 10), Level::new(t("9.98"), 10), Level::new(t("9.97"), 10), Level::new(t("9.96"), 10_000)];
        let three = depth(&deep, &[], Direction::Up, 3).unwrap();
        assert!((three - (9.99f64 * 10.0 + 9.98 * 10.0 + 9.97 * 10.0).ln()).abs() < 1e-12);
        assert_eq!(depth_levels(NaiveDate::from_ymd_opt(2003, 12, 4).unwrap()), 3);
        assert_eq!(depth_levels(NaiveDate::from_ymd_opt(2003, 12, 5).unwrap()), 5);
    }

    #[test]
    fn suboptimal_examples() {
        let (a, b) = (t("10.05"), t("10.03"));
        assert!(!suboptimal_flag(t("10.04"), a, b));
        assert!(!suboptimal_flag(a, a, b));
        assert!(!suboptimal_flag(b, a, b));
        assert!(suboptimal_flag(t("10.06"), a, b));
        assert!(suboptimal_flag(t("10.02"), a, b));
    }

    #[test]
    fn excursion_examples() {
        assert!(excursion_dummy(t("10.95"), t("10.00"), Direction::Up, 900));
        assert!(!excursion_dummy(t("10.40"), t("10.00"), Direction::Up, 500));
        assert!(excursion_dummy(t("3.86"), t("4.00"), Direction::Down, 350));
        assert!(!excursion_dummy(t("3.87"), t("4.00"), Direction::Down, 350));
        assert!(excursion_dummy(t("10.50"), t("10.00"), Direction::Up, 500));
        assert!((excursion(t("10.95"), t("10.00")) - 0.095).abs() < 1e-15);
    }

    #[test]
    fn bp_formatting() {
        assert_eq!(format_bp(500), "5");
        assert_eq!(format_bp(250), "2.5");
        assert_eq!(format_bp(1025), "10.25");
        assert_eq!(parse_bp("2.5").unwrap(), 250);
        assert_eq!(parse_bp("9").unwrap(), 900);
        assert!(parse_bp("2.555").is_err());
    }

    fn series(bars: &[((u32, u32), f64)]) -> IndexSeries {
        IndexSeries::new(
            Exchange::Shse,
            bars.iter().map(|&((h, m), l)| (dt(h, m, 0), l)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn mkt_lag_examples() {
        let flat = series(&[((9, 30), 3000.0), ((9, 31), 3000.0), ((9, 32), 3000.0), ((9, 33), 3000.0)]);
        assert_eq!(mkt_lags(dt(9, 33, 5), &flat), Some([0.0; 3]));
        // the bar stamped at the trade's own minute is not yet complete
        assert_eq!(mkt_lags(dt(9, 33, 0), &flat), None);

        let s = series(&[((9, 32), 3000.0), ((9, 33), 3003.0), ((9, 34), 3003.0), ((9, 35), 3006.0)]);
        let l = mkt_lags(dt(9, 35, 10), &s).unwrap();
        assert!((l[0] - (3006f64 / 3003.0).ln()).abs() < 1e-15);
        assert!((l[0] - 9.990e-4).abs() < 1e-6);
        assert_eq!(l[1], 0.0);
        assert!((l[2] - 9.995e-4).abs() < 1e-6);

        let gap = series(&[((9, 30), 1.0), ((9, 31), 1.0), ((9, 33), 1.0), ((9, 34), 1.0)]);
        assert_eq!(mkt_lags(dt(9, 35, 0), &gap), None);
        let lunch = series(&[((11, 28), 1.0), ((11, 29), 1.0), ((11, 30), 1.0), ((13, 1), 2.0)]);
        let l = mkt_lags(dt(13, 1, 30), &lunch).unwrap();
        assert!((l[0] - 2f64.ln()).abs() < 1e-15);
    }

    fn quote(time: NaiveDateTime, bid: &str, ask: &str) -> TradeTick {
        TradeTick {
            time,
            price: Ticks(0),
            volume: 0,
            bids: vec![Level::new(t(bid), 500)],
            asks: vec![Level::new(t(ask), 300)],
        }
    }

    fn trade(time: NaiveDateTime, price: &str, volume: u64, bid: &str, ask: &str) -> TradeTick {
        TradeTick {
            price: t(price),
            volume,
            ..quote(time, bid, ask)
        }
    }

    /// A scripted up-hit: 2 trades before 09:33, then a climb to the limit.
    fn scripted_event() -> (LimitHitEvent, IndexSeries) {
        let prev_close = t("10.00");
        let limits = compute_limits(prev_close, LimitRate::COMMON, RoundingMode::HalfAwayFromZero);
        let mut ticks = vec![
            quote(dt(9, 30, 0), "10.00", "10.02"),
            trade(dt(9, 30, 5), "10.02", 100, "10.01", "10.03"),
            trade(dt(9, 32, 50), "10.03", 200, "10.02", "10.04"),
        ];
        let mut price = 1003;
        let mut secs = 0;
        while price < 1100 {
            secs += 7;
            let (h, m, s) = (9 + (33 * 60 + secs) / 3600, ((33 * 60 + secs) / 60) % 60, secs % 60);
            let when = dt(h, m, s);
            ticks.push(TradeTick {
                time: when,
                price: Ticks(0),
                volume: 0,
                bids: vec![Level::new(Ticks(price - 1), 400)],
                asks: vec![Level::new(Ticks(price + 1), 100)],
            });
            price += if secs % 3 == 0 { 0 } else { 2 };
            price = price.min(1100);
            ticks.push(TradeTick {
                time: when,
                price: Ticks(price),
                volume: 100 + secs as u64,
                bids: vec![Level::new(Ticks(price - 1), 400)],
                asks: vec![Level::new(Ticks((price + 1).min(1100)), 100)],
            });
        }
        let hit_index = ticks.len() - 1;
        let n_trades = ticks.iter().filter(|x| x.is_trade()).count();
        let event = LimitHitEvent {
            stock_id: "600000".into(),
            exchange: Exchange::Shse,
            date: dt(0, 0, 0).date(),
            stock_class: StockClass::Common,
            prev_close,
            limits,
            direction: Direction::Up,
            hit_index,
            hit_trade_ordinal: n_trades,
            hit_time: ticks[hit_index].time,
            prehit_ticks: ticks,
            market_state: MarketState::Bullish,
            opening_hit: false,
        };
        let bars = (0..=120)
            .map(|i| {
                let minute = 9 * 60 + 30 + i;
                (dt(minute / 60, minute % 60, 0), 3000.0 + (i % 7) as f64)
            })
            .collect();
        (event, IndexSeries::new(Exchange::Shse, bars).unwrap())
    }

    #[test]
    fn scripted_matrix_shape() {
        let (event, index) = scripted_event();
        let cfg = FeatureConfig::default();
        let m = build_feature_matrix(&event, Some(&index), ModelVariant::Base, &cfg).unwrap();
        assert_eq!(m.sample_trades, event.hit_trade_ordinal - 2);
        assert_eq!(m.rows.len(), m.sample_trades - LAGS);
        assert_eq!(m.dropped.burn_in, LAGS);
        assert_eq!(m.rows.first().unwrap().k, 2 + LAGS + 1);
        assert_eq!(m.rows.last().unwrap().k, event.hit_trade_ordinal);
        assert!(m.rows.last().unwrap().y);
        let x = m.design(true);
        assert_eq!(x.ncols(), 11);
        assert_eq!(x.nrows(), m.rows.len());
        assert!(x.column(0).iter().all(|&v| v == 1.0));
        assert_eq!(m.dummy_state(), None);

        let sub = m.with_variant(ModelVariant::Suboptimal, event.prev_close);
        assert_eq!(sub.design(true).ncols(), 12);
        // the +2 steps print above the prior ask
        assert_eq!(sub.dummy_state(), Some(DummyState::Varying));
        assert!(sub.rows.iter().any(|r| r.is_prev) && sub.rows.iter().any(|r| !r.is_prev));
        assert_eq!(sub.design(false).ncols(), 11);

        let c5 = m.with_variant(ModelVariant::Conditional { m_bp: 500 }, event.prev_close);
        assert_eq!(c5.dummy_state(), Some(DummyState::Varying));
        let x5 = c5.design(true);
        for (i, r) in c5.rows.iter().enumerate() {
            let want = if r.price_prev.get() >= 1050 { r.yield_prev } else { 0.0 };
            assert_eq!(x5[(i, 6)], want);
        }
    }

    #[test]
    fn skips() {
        let (mut event, index) = scripted_event();
        let cfg = FeatureConfig::default();
        let err = build_feature_matrix(&event, None, ModelVariant::Base, &cfg).unwrap_err();
        assert_eq!(err.reason, SkipReason::NoIndex);
        let strict = FeatureConfig { min_rows: 10_000, ..cfg.clone() };
        let err = build_feature_matrix(&event, Some(&index), ModelVariant::Base, &strict).unwrap_err();
        assert_eq!(err.reason, SkipReason::InsufficientRows);
        assert!(err.usable_rows > 0);
        event.opening_hit = true;
        let err = build_feature_matrix(&event, Some(&index), ModelVariant::Base, &cfg).unwrap_err();
        assert_eq!(err.reason.as_str(), "opening_hit");
    }

    #[test]
    fn gap_clamp() {
        let (event, index) = scripted_event();
        let cfg = FeatureConfig { gap_clamp_seconds: Some(3), ..FeatureConfig::default() };
        let m = build_feature_matrix(&event, Some(&index), ModelVariant::Base, &cfg).unwrap();
        assert!(m.rows.iter().all(|r| r.dt <= 3.0));
    }

    #[test]
    fn csv_export() {
        let (event, index) = scripted_event();
        let m = build_feature_matrix(&event, Some(&index), ModelVariant::Suboptimal, &FeatureConfig::default()).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "k,time,Y,dT,V1*IBS1,V2*IBS2,V3*IBS3,yield1,IS1*yield1,MKT1,MKT2,MKT3,spread1,depth1"
        );
        assert_eq!(lines.count(), m.rows.len());
    }

    fn book() -> impl Strategy<Value = (Vec<Level>, Vec<Level>)> {
        (
            1i64..5000,
            1i64..20,
            prop::collection::vec(1u64..100_000, 0..=5),
            prop::collection::vec(1u64..100_000, 0..=5),
        )
            .prop_map(|(bid, gap, bv, av)| {
                let bids = bv.iter().enumerate().map(|(j, &v)| Level::new(Ticks(bid + 100 - j as i64), v)).collect();
                let asks = av.iter().enumerate().map(|(j, &v)| Level::new(Ticks(bid + 100 + gap + j as i64), v)).collect();
                (bids, asks)
            })
    }

    proptest! {
        #[test]
        fn depth_antisymmetry((bids, asks) in book(), levels in prop::sample::select(vec![3usize, 5])) {
            let up = depth(&bids, &asks, Direction::Up, levels);
            let down = depth(&bids, &asks, Direction::Down, levels);
            match (up, down) {
                (Some(u), Some(d)) => prop_assert_eq!(u, -d),
                (None, None) => prop_assert!(bids.is_empty() && asks.is_empty()),
                _ => prop_assert!(false),
            }
        }

        #[test]
        fn yield_telescopes(prices in prop::collection::vec(100i64..20_000, 2..300)) {
            let sum: f64 = prices.windows(2).map(|w| yield_and_volatility(Ticks(w[1]), Ticks(w[0])).0).sum();
            let direct = (*prices.last().unwrap() as f64).ln() - (prices[0] as f64).ln();
            prop_assert!((sum - direct).abs() < 1e-12);
        }

        #[test]
        fn inside_quotes_is_optimal(bid in 1i64..10_000, gap in 1i64..50, off in 0i64..50) {
            let ask = bid + gap;
            let p = bid + off.min(gap);
            prop_assert!(!suboptimal_flag(Ticks(p), Ticks(ask), Ticks(bid)));
        }

        #[test]
        fn excursion_monotone_in_m(pc in 100i64..10_000, frac in -0.1f64..0.1, m in 1u32..1000, up in any::<bool>()) {
            let p = Ticks(((pc as f64) * (1.0 + frac)).round() as i64);
            let dir = if up { Direction::Up } else { Direction::Down };
            if excursion_dummy(p, Ticks(pc), dir, m + 50) {
                prop_assert!(excursion_dummy(p, Ticks(pc), dir, m));
            }
        }

        #[test]
        fn tie_breaking_consistent(p in 1i64..10_000, prev_off in -3i64..=3, half in 1i64..10, skew in -9i64..=9) {
            let skew = skew.clamp(-half + 1, half - 1);
            let (b, a) = (p - half + skew, p + half + skew);
            prop_assume!(b > 0);
            let p_prev = Ticks(p + prev_off);
            for dir in [Direction::Up, Direction::Down] {
                if p_prev == Ticks(p) {
                    let y = response_y(Ticks(p), p_prev, Ticks(a), Ticks(b), dir);
                    prop_assert_eq!(y, ibs(Ticks(p), Ticks(a), Ticks(b), dir) == 1);
                }
            }
        }
    }
}
