//! Tick and session data model, file formats and validation.
//!
//! Prices are integer [`Ticks`]; a tick row with `volume == 0` is a pure book
//! update and is kept so that "the book right before trade k" can be looked up
//! in the interleaved stream.

mod io;
mod ticks;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use io::{
    parse_index_file, parse_session_meta, parse_tick_file, write_index_file, write_session_meta,
    write_tick_file, MetaTable, TickFile, TickSchema,
};
pub use ticks::{price_to_ticks, ticks_to_price, Ticks};

/// Maximum number of visible book levels per side.
pub const MAX_LEVELS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Exchange {
    #[serde(rename = "SHSE")]
    Shse,
    #[serde(rename = "SZSE")]
    Szse,
}

impl Exchange {
    pub fn as_str(self) -> &'static str {
        match self {
            Exchange::Shse => "SHSE",
            Exchange::Szse => "SZSE",
        }
    }
}

impl fmt::Display for Exchange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Exchange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "SHSE" => Ok(Exchange::Shse),
            "SZSE" => Ok(Exchange::Szse),
            other => Err(Error::InvalidArgument(format!("unknown exchange {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StockClass {
    Common,
    SpecialTreatment,
}

impl StockClass {
    pub fn as_str(self) -> &'static str {
        match self {
            StockClass::Common => "common",
            StockClass::SpecialTreatment => "special_treatment",
        }
    }
}

impl fmt::Display for StockClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StockClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "common" => Ok(StockClass::Common),
            "special_treatment" => Ok(StockClass::SpecialTreatment),
            other => Err(Error::InvalidArgument(format!("unknown stock class {other:?}"))),
        }
    }
}

/// One visible price level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Level {
    pub price: Ticks,
    pub volume: u64,
}

impl Level {
    pub fn new(price: Ticks, volume: u64) -> Self {
        Level { price, volume }
    }
}

/// A quote/trade snapshot. `bids` and `asks` are best-first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TradeTick {
    pub time: NaiveDateTime,
    pub price: Ticks,
    pub volume: u64,
    pub bids: Vec<Level>,
    pub asks: Vec<Level>,
}

/// Why a tick row was refused by validation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// best bid >= best ask
    CrossedBook,
    /// level prices not strictly monotone away from the touch, or a gap
    LevelOrder,
    /// no metadata row for (stock_id, date)
    MissingMetadata,
    /// metadata exchange differs from the tick row
    MetadataMismatch,
}

impl TradeTick {
    pub fn is_trade(&self) -> bool {
        self.volume > 0
    }

    pub fn best_bid(&self) -> Option<Ticks> {
        self.bids.first().map(|l| l.price)
    }

    pub fn best_ask(&self) -> Option<Ticks> {
        self.asks.first().map(|l| l.price)
    }

    pub fn has_book(&self) -> bool {
        !self.bids.is_empty() || !self.asks.is_empty()
    }

    /// Checks the book-shape invariants.
    pub fn check_book(&self) -> Result<(), RejectReason> {
        if self.bids.len() > MAX_LEVELS || self.asks.len() > MAX_LEVELS {
            return Err(RejectReason::LevelOrder);
        }
        if self.bids.windows(2).any(|w| w[0].price <= w[1].price)
            || self.asks.windows(2).any(|w| w[0].price >= w[1].price)
        {
            return Err(RejectReason::LevelOrder);
        }
        if let (Some(b), Some(a)) = (self.best_bid(), self.best_ask()) {
            if b >= a {
                return Err(RejectReason::CrossedBook);
            }
        }
        Ok(())
    }
}

/// All ticks of one stock on one trading day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DailySession {
    pub stock_id: String,
    pub exchange: Exchange,
    pub date: NaiveDate,
    /// Previous day's closing price.
    pub prev_close: Ticks,
    pub stock_class: StockClass,
    pub ticks: Vec<TradeTick>,
    /// Set when the input rows were not in time order and had to be sorted.
    pub out_of_order: bool,
}

impl DailySession {
    pub fn trades(&self) -> impl Iterator<Item = (usize, &TradeTick)> {
        self.ticks.iter().enumerate().filter(|(_, t)| t.is_trade())
    }

    pub fn trade_count(&self) -> usize {
        self.ticks.iter().filter(|t| t.is_trade()).count()
    }
}

/// Per-session metadata row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub stock_id: String,
    pub exchange: Exchange,
    pub date: NaiveDate,
    pub prev_close: Ticks,
    pub stock_class: StockClass,
}

/// One-minute index levels for one exchange, strictly increasing in time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexSeries {
    pub exchange: Exchange,
    pub bars: Vec<(NaiveDateTime, f64)>,
}

impl IndexSeries {
    /// Validates ordering and positivity.
    pub fn new(exchange: Exchange, bars: Vec<(NaiveDateTime, f64)>) -> Result<Self, Error> {
        for (i, &(ts, level)) in bars.iter().enumerate() {
            if !(level.is_finite() && level > 0.0) {
                return Err(Error::Index(format!(
                    "{exchange} {ts}: level {level} is not positive"
                )));
            }
            if i > 0 {
                let prev = bars[i - 1].0;
                if ts == prev {
                    return Err(Error::Index(format!("{exchange} {ts}: duplicate minute")));
                }
                if ts < prev {
                    return Err(Error::Index(format!(
                        "{exchange} {ts}: timestamps not increasing (after {prev})"
                    )));
                }
            }
        }
        Ok(IndexSeries { exchange, bars })
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }
}

/// Index series keyed by exchange.
pub type IndexData = BTreeMap<Exchange, IndexSeries>;

/// Row accounting for a tick file parse. Every data row is either accepted
/// into a session or counted under exactly one [`RejectReason`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rows_read: usize,
    pub rows_accepted: usize,
    pub rejected: BTreeMap<RejectReason, usize>,
    /// Sessions whose rows arrived out of time order.
    pub flagged_sessions: Vec<(String, NaiveDate)>,
}

impl ValidationReport {
    pub fn rejected_total(&self) -> usize {
        self.rejected.values().sum()
    }

    pub fn rejected(&self, reason: RejectReason) -> usize {
        self.rejected.get(&reason).copied().unwrap_or(0)
    }
}
