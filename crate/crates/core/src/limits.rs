//! Daily price limits, first-hit detection and bull/bear labelling.

use std::fmt;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marketdata::{DailySession, Exchange, StockClass, Ticks, TradeTick};

/// Rounding applied when a limit falls between two ticks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundingMode {
    #[default]
    HalfAwayFromZero,
    HalfEven,
}

impl FromStr for RoundingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half_away_from_zero" => Ok(RoundingMode::HalfAwayFromZero),
            "half_even" => Ok(RoundingMode::HalfEven),
            other => Err(Error::InvalidArgument(format!("unknown rounding mode {other:?}"))),
        }
    }
}

/// Daily limit rate in basis points (1000 = 10%).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LimitRate(pub u32);

impl LimitRate {
    pub const COMMON: LimitRate = LimitRate(1000);
    pub const SPECIAL_TREATMENT: LimitRate = LimitRate(500);

    pub fn for_class(class: StockClass) -> Self {
        match class {
            StockClass::Common => Self::COMMON,
            StockClass::SpecialTreatment => Self::SPECIAL_TREATMENT,
        }
    }

    /// `pct` must be a whole number of basis points, in (0, 100).
    pub fn from_percent(pct: f64) -> Result<Self> {
        let bp = (pct * 100.0).round();
        if !(bp > 0.0 && bp < 10_000.0) || (pct * 100.0 - bp).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("limit rate {pct}% is not a valid basis-point rate")));
        }
        Ok(LimitRate(bp as u32))
    }

    pub fn percent(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LimitPrices {
    pub up: Ticks,
    pub down: Ticks,
}

/// Rounds `num / den` (both non-negative, `den > 0`) to an integer.
fn round_ratio(num: i128, den: i128, mode: RoundingMode) -> i64 {
    debug_assert!(num >= 0 && den > 0);
    let q = num / den;
    let twice_rem = 2 * (num % den);
    let bump = match mode {
        RoundingMode::HalfAwayFromZero => twice_rem >= den,
        RoundingMode::HalfEven => twice_rem > den || (twice_rem == den && q % 2 == 1),
    };
    (q + bump as i128) as i64
}

/// `prev_close * (1 ± rate)` rounded to the tick grid in exact integer
/// arithmetic.
///
/// Below 1/rate ticks (e.g. a 0.09 close at 10%) the band collapses onto
/// `prev_close`; such closes never occur on the exchanges this models.
pub fn compute_limits(prev_close: Ticks, rate: LimitRate, mode: RoundingMode) -> LimitPrices {
    let p = prev_close.get() as i128;
    let r = rate.0 as i128;
    LimitPrices {
        up: Ticks(round_ratio(p * (10_000 + r), 10_000, mode)),
        down: Ticks(round_ratio(p * (10_000 - r), 10_000, mode)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
        }
    }

    /// +1 for up, -1 for down.
    pub fn sign(self) -> i64 {
        match self {
            Direction::Up => 1,
            Direction::Down => -1,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarketState {
    Bullish,
    Bearish,
}

impl MarketState {
    pub fn as_str(self) -> &'static str {
        match self {
            MarketState::Bullish => "bullish",
            MarketState::Bearish => "bearish",
        }
    }
}

impl fmt::Display for MarketState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalendarInterval {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub state: MarketState,
}

/// Contiguous, non-overlapping dated intervals of market state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<CalendarInterval>", into = "Vec<CalendarInterval>")]
pub struct MarketCalendar {
    intervals: Vec<CalendarInterval>,
}

impl MarketCalendar {
    pub fn new(intervals: Vec<CalendarInterval>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::Calendar("no intervals".into()));
        }
        for iv in &intervals {
            if iv.start > iv.end {
                return Err(Error::Calendar(format!("interval {} > {}", iv.start, iv.end)));
            }
        }
        for w in intervals.windows(2) {
            if w[0].end.succ_opt() != Some(w[1].start) {
                return Err(Error::Calendar(format!(
                    "intervals ending {} and starting {} are not contiguous",
                    w[0].end, w[1].start
                )));
            }
        }
        Ok(MarketCalendar { intervals })
    }

    /// Bull/bear segmentation of the Chinese A-share market, 2000-2011.
    pub fn china_2000_2011() -> Self {
        use MarketState::*;
        let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).expect("valid date");
        let iv = |start, end, state| CalendarInterval { start, end, state };
        MarketCalendar::new(vec![
            iv(d(2000, 1, 4), d(2001, 6, 13), Bullish),
            iv(d(2001, 6, 14), d(2005, 6, 3), Bearish),
            iv(d(2005, 6, 4), d(2007, 10, 16), Bullish),
            iv(d(2007, 10, 17), d(2008, 10, 27), Bearish),
            iv(d(2008, 10, 28), d(2009, 8, 4), Bullish),
            iv(d(2009, 8, 5), d(2011, 12, 30), Bearish),
        ])
        .expect("built-in calendar is contiguous")
    }

    pub fn intervals(&self) -> &[CalendarInterval] {
        &self.intervals
    }

    pub fn label(&self, date: NaiveDate) -> Result<MarketState> {
        label_market_state(date, self)
    }
}

impl Default for MarketCalendar {
    fn default() -> Self {
        Self::china_2000_2011()
    }
}

impl TryFrom<Vec<CalendarInterval>> for MarketCalendar {
    type Error = Error;

    fn try_from(v: Vec<CalendarInterval>) -> Result<Self> {
        MarketCalendar::new(v)
    }
}

impl From<MarketCalendar> for Vec<CalendarInterval> {
    fn from(c: MarketCalendar) -> Self {
        c.intervals
    }
}

pub fn label_market_state(date: NaiveDate, calendar: &MarketCalendar) -> Result<MarketState> {
    let ivs = &calendar.intervals;
    let i = ivs.partition_point(|iv| iv.end < date);
    match ivs.get(i) {
        Some(iv) if iv.start <= date => Ok(iv.state),
        _ => Err(Error::OutsideCalendar(date)),
    }
}

/// A stock-day whose traded price first reached a daily limit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitHitEvent {
    pub stock_id: String,
    pub exchange: Exchange,
    pub date: NaiveDate,
    pub stock_class: StockClass,
    pub prev_close: Ticks,
    pub limits: LimitPrices,
    pub direction: Direction,
    /// Index into the session's tick list (quotes included) of the hitting trade.
    pub hit_index: usize,
    /// 1-based position of the hitting trade among the day's trades.
    pub hit_trade_ordinal: usize,
    pub hit_time: NaiveDateTime,
    /// Session ticks from the open through `hit_index` inclusive.
    pub prehit_ticks: Vec<TradeTick>,
    pub market_state: MarketState,
    pub opening_hit: bool,
}

impl LimitHitEvent {
    pub fn limit_price(&self) -> Ticks {
        match self.direction {
            Direction::Up => self.limits.up,
            Direction::Down => self.limits.down,
        }
    }

    /// Number of trades from the open through the hit, inclusive.
    pub fn prehit_trade_count(&self) -> usize {
        self.hit_trade_ordinal
    }
}

/// Finds the earliest trade printing at either limit.
///
/// Quotes touching a limit without a print do not count. Any trade outside
/// the band is a data-integrity error.
pub fn detect_first_hit(
    session: &DailySession,
    limits: LimitPrices,
    calendar: &MarketCalendar,
) -> Result<Option<LimitHitEvent>> {
    let mut hit: Option<(usize, usize, Direction)> = None;
    let mut ordinal = 0usize;
    for (i, t) in session.trades() {
        ordinal += 1;
        if t.price > limits.up || t.price < limits.down {
            return Err(Error::Integrity(format!(
                "{} {} {}: trade at {} outside limits [{}, {}]",
                session.stock_id, session.date, t.time, t.price, limits.down, limits.up
            )));
        }
        if hit.is_none() {
            if t.price == limits.up {
                hit = Some((i, ordinal, Direction::Up));
            } else if t.price == limits.down {
                hit = Some((i, ordinal, Direction::Down));
            }
        }
    }
    let Some((hit_index, hit_trade_ordinal, direction)) = hit else {
        return Ok(None);
    };
    let market_state = calendar.label(session.date)?;
    Ok(Some(LimitHitEvent {
        stock_id: session.stock_id.clone(),
        exchange: session.exchange,
        date: session.date,
        stock_class: session.stock_class,
        prev_close: session.prev_close,
        limits,
        direction,
        hit_index,
        hit_trade_ordinal,
        hit_time: session.ticks[hit_index].time,
        prehit_ticks: session.ticks[..=hit_index].to_vec(),
        market_state,
        opening_hit: hit_trade_ordinal == 1,
    }))
}
