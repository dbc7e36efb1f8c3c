use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{NaiveDate, NaiveDateTime, NaiveTime, Timelike};

use super::{
    DailySession, Exchange, IndexData, IndexSeries, Level, RejectReason, SessionMeta, StockClass,
    Ticks, TradeTick, ValidationReport, MAX_LEVELS,
};
use crate::error::{Error, Result};

const DATE_FMT: &str = "%Y-%m-%d";
const TIME_FMT: &str = "%H:%M:%S";

/// Tick-file layout version.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TickSchema {
    /// `stock_id,exchange,date,time,price,volume,bid1,bidvol1,..,ask5,askvol5`
    #[default]
    V1,
}

impl TickSchema {
    pub fn header(self) -> Vec<String> {
        let mut cols: Vec<String> = ["stock_id", "exchange", "date", "time", "price", "volume"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for side in ["bid", "ask"] {
            for j in 1..=MAX_LEVELS {
                cols.push(format!("{side}{j}"));
                cols.push(format!("{side}vol{j}"));
            }
        }
        cols
    }
}

/// Session metadata keyed by (stock_id, date).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MetaTable {
    rows: BTreeMap<(String, NaiveDate), SessionMeta>,
}

impl MetaTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, meta: SessionMeta) -> Option<SessionMeta> {
        self.rows
            .insert((meta.stock_id.clone(), meta.date), meta)
    }

    pub fn get(&self, stock_id: &str, date: NaiveDate) -> Option<&SessionMeta> {
        self.rows.get(&(stock_id.to_string(), date))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SessionMeta> {
        self.rows.values()
    }

    pub fn extend(&mut self, other: MetaTable) {
        self.rows.extend(other.rows);
    }
}

impl FromIterator<SessionMeta> for MetaTable {
    fn from_iter<I: IntoIterator<Item = SessionMeta>>(iter: I) -> Self {
        let mut t = MetaTable::new();
        for m in iter {
            t.insert(m);
        }
        t
    }
}

/// Result of parsing a tick file.
#[derive(Clone, Debug, PartialEq)]
pub struct TickFile {
    /// Sessions ordered by (stock_id, date).
    pub sessions: Vec<DailySession>,
    pub report: ValidationReport,
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Csv(e),
        _ => Error::parse(line, e.to_string()),
    }
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let headers = rdr.headers().map_err(csv_error)?;
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::parse(
            1,
            format!("unexpected header {:?}, expected {:?}", got, expected),
        ));
    }
    Ok(())
}

fn field(rec: &csv::StringRecord, i: usize) -> &str {
    rec.get(i).unwrap_or("").trim()
}

fn parse_date(s: &str, line: u64) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, DATE_FMT)
        .map_err(|e| Error::parse(line, format!("bad date {s:?}: {e}")))
}

fn parse_time(s: &str, line: u64) -> Result<NaiveTime> {
    NaiveTime::parse_from_str(s, TIME_FMT)
        .or_else(|_| NaiveTime::parse_from_str(s, "%H:%M"))
        .map_err(|e| Error::parse(line, format!("bad time {s:?}: {e}")))
}

fn parse_ticks(s: &str, what: &str, line: u64) -> Result<Ticks> {
    s.parse::<Ticks>()
        .map_err(|e| Error::parse(line, format!("{what}: {e}")))
}

fn parse_u64(s: &str, what: &str, line: u64) -> Result<u64> {
    s.parse::<u64>()
        .map_err(|_| Error::parse(line, format!("{what}: {s:?} is not a non-negative integer")))
}

struct Row {
    stock_id: String,
    exchange: Exchange,
    date: NaiveDate,
    tick: TradeTick,
}

enum RowOutcome {
    Ok(Row),
    Rejected(RejectReason),
}

fn parse_side(rec: &csv::StringRecord, offset: usize, side: &str, line: u64) -> Result<std::result::Result<Vec<Level>, RejectReason>> {
    let mut levels = Vec::with_capacity(MAX_LEVELS);
    let mut gap = false;
    for j in 0..MAX_LEVELS {
        let p = field(rec, offset + 2 * j);
        let v = field(rec, offset + 2 * j + 1);
        match (p.is_empty(), v.is_empty()) {
            (true, true) => gap = true,
            (false, false) => {
                let price = parse_ticks(p, &format!("{side}{}", j + 1), line)?;
                let volume = parse_u64(v, &format!("{side}vol{}", j + 1), line)?;
                if price.get() <= 0 {
                    return Err(Error::parse(line, format!("{side}{}: price must be positive", j + 1)));
                }
                if gap {
                    return Ok(Err(RejectReason::LevelOrder));
                }
                levels.push(Level::new(price, volume));
            }
            _ => {
                return Err(Error::parse(
                    line,
                    format!("{side} level {} has price without volume or vice versa", j + 1),
                ))
            }
        }
    }
    Ok(Ok(levels))
}

fn parse_tick_row(rec: &csv::StringRecord, line: u64) -> Result<RowOutcome> {
    let stock_id = field(rec, 0);
    if stock_id.is_empty() {
        return Err(Error::parse(line, "empty stock_id"));
    }
    let exchange: Exchange = field(rec, 1)
        .parse()
        .map_err(|e: Error| Error::parse(line, e.to_string()))?;
    let date = parse_date(field(rec, 2), line)?;
    let time = parse_time(field(rec, 3), line)?;
    let volume = parse_u64(field(rec, 5), "volume", line)?;
    let price_field = field(rec, 4);
    let price = if price_field.is_empty() {
        if volume > 0 {
            return Err(Error::parse(line, "trade row without price"));
        }
        Ticks::ZERO
    } else {
        parse_ticks(price_field, "price", line)?
    };
    if volume > 0 && price.get() <= 0 {
        return Err(Error::parse(line, "trade price must be positive"));
    }
    let bids = match parse_side(rec, 6, "bid", line)? {
        Ok(l) => l,
        Err(r) => return Ok(RowOutcome::Rejected(r)),
    };
    let asks = match parse_side(rec, 6 + 2 * MAX_LEVELS, "ask", line)? {
        Ok(l) => l,
        Err(r) => return Ok(RowOutcome::Rejected(r)),
    };
    let tick = TradeTick {
        time: date.and_time(time),
        price,
        volume,
        bids,
        asks,
    };
    if let Err(r) = tick.check_book() {
        return Ok(RowOutcome::Rejected(r));
    }
    Ok(RowOutcome::Ok(Row {
        stock_id: stock_id.to_string(),
        exchange,
        date,
        tick,
    }))
}

/// Parses a tick CSV, joining each row with its session metadata.
///
/// Malformed rows abort with the offending line number. Rows that are
/// well-formed but violate a book invariant, or lack metadata, are counted in
/// the returned report. Sessions with out-of-order timestamps are sorted
/// (stably) and flagged.
pub fn parse_tick_file<R: Read>(source: R, schema: TickSchema, meta: &MetaTable) -> Result<TickFile> {
    let header = schema.header();
    let expected: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(source);
    check_header(&mut rdr, &expected)?;

    let mut report = ValidationReport::default();
    let mut groups: BTreeMap<(String, NaiveDate), (Exchange, Vec<TradeTick>, bool)> = BTreeMap::new();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => return Err(csv_error(e)),
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        report.rows_read += 1;
        let row = match parse_tick_row(&record, line)? {
            RowOutcome::Ok(row) => row,
            RowOutcome::Rejected(reason) => {
                *report.rejected.entry(reason).or_default() += 1;
                continue;
            }
        };
        match meta.get(&row.stock_id, row.date) {
            None => {
                *report.rejected.entry(RejectReason::MissingMetadata).or_default() += 1;
                continue;
            }
            Some(m) if m.exchange != row.exchange => {
                *report.rejected.entry(RejectReason::MetadataMismatch).or_default() += 1;
                continue;
            }
            Some(_) => {}
        }
        let entry = groups
            .entry((row.stock_id, row.date))
            .or_insert_with(|| (row.exchange, Vec::new(), false));
        if entry.1.last().is_some_and(|last| last.time > row.tick.time) {
            entry.2 = true;
        }
        entry.1.push(row.tick);
        report.rows_accepted += 1;
    }

    let mut sessions = Vec::with_capacity(groups.len());
    for ((stock_id, date), (exchange, mut ticks, out_of_order)) in groups {
        let m = meta
            .get(&stock_id, date)
            .expect("grouped rows always have metadata");
        if out_of_order {
            ticks.sort_by_key(|t| t.time);
            report.flagged_sessions.push((stock_id.clone(), date));
        }
        sessions.push(DailySession {
            stock_id,
            exchange,
            date,
            prev_close: m.prev_close,
            stock_class: m.stock_class,
            ticks,
            out_of_order,
        });
    }
    Ok(TickFile { sessions, report })
}

/// Writes sessions in canonical tick-file form.
pub fn write_tick_file<W: Write>(sessions: &[DailySession], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(TickSchema::V1.header())?;
    let mut rec: Vec<String> = Vec::with_capacity(6 + 4 * MAX_LEVELS);
    for s in sessions {
        let date = s.date.format(DATE_FMT).to_string();
        for t in &s.ticks {
            rec.clear();
            rec.push(s.stock_id.clone());
            rec.push(s.exchange.to_string());
            rec.push(date.clone());
            rec.push(t.time.format(TIME_FMT).to_string());
            if t.volume == 0 && t.price == Ticks::ZERO {
                rec.push(String::new());
            } else {
                rec.push(t.price.to_string());
            }
            rec.push(t.volume.to_string());
            for side in [&t.bids, &t.asks] {
                for j in 0..MAX_LEVELS {
                    match side.get(j) {
                        Some(l) => {
                            rec.push(l.price.to_string());
                            rec.push(l.volume.to_string());
                        }
                        None => {
                            rec.push(String::new());
                            rec.push(String::new());
                        }
                    }
                }
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

const META_HEADER: [&str; 5] = ["stock_id", "exchange", "date", "prev_close", "stock_class"];

pub fn parse_session_meta<R: Read>(source: R) -> Result<MetaTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    check_header(&mut rdr, &META_HEADER)?;
    let mut table = MetaTable::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let stock_id = field(&rec, 0).to_string();
        if stock_id.is_empty() {
            return Err(Error::parse(line, "empty stock_id"));
        }
        let exchange: Exchange = field(&rec, 1)
            .parse()
            .map_err(|e: Error| Error::parse(line, e.to_string()))?;
        let date = parse_date(field(&rec, 2), line)?;
        let prev_close = parse_ticks(field(&rec, 3), "prev_close", line)?;
        if prev_close.get() <= 0 {
            return Err(Error::parse(line, "prev_close must be positive"));
        }
        let stock_class: StockClass = field(&rec, 4)
            .parse()
            .map_err(|e: Error| Error::parse(line, e.to_string()))?;
        let meta = SessionMeta {
            stock_id,
            exchange,
            date,
            prev_close,
            stock_class,
        };
        if table.insert(meta).is_some() {
            return Err(Error::parse(line, "duplicate (stock_id, date) metadata row"));
        }
    }
    Ok(table)
}

pub fn write_session_meta<W: Write>(meta: &MetaTable, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(META_HEADER)?;
    for m in meta.iter() {
        w.write_record([
            m.stock_id.as_str(),
            m.exchange.as_str(),
            &m.date.format(DATE_FMT).to_string(),
            &m.prev_close.to_string(),
            m.stock_class.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

const INDEX_HEADER: [&str; 4] = ["exchange", "date", "time", "level"];

/// Parses `exchange,date,time,level`. Each exchange's bars must be on whole
/// minutes, strictly increasing and positive.
pub fn parse_index_file<R: Read>(source: R) -> Result<IndexData> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    check_header(&mut rdr, &INDEX_HEADER)?;
    let mut bars: BTreeMap<Exchange, Vec<(NaiveDateTime, f64)>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let exchange: Exchange = field(&rec, 0)
            .parse()
            .map_err(|e: Error| Error::parse(line, e.to_string()))?;
        let date = parse_date(field(&rec, 1), line)?;
        let time = parse_time(field(&rec, 2), line)?;
        if time.second() != 0 {
            return Err(Error::parse(line, "index bars must fall on whole minutes"));
        }
        let level: f64 = field(&rec, 3)
            .parse()
            .map_err(|_| Error::parse(line, format!("bad level {:?}", field(&rec, 3))))?;
        let ts = date.and_time(time);
        if !(level.is_finite() && level > 0.0) {
            return Err(Error::Index(format!("line {line}: {exchange} {ts}: level {level} is not positive")));
        }
        let series = bars.entry(exchange).or_default();
        if let Some(&(prev, _)) = series.last() {
            if ts == prev {
                return Err(Error::Index(format!("line {line}: {exchange} {ts}: duplicate minute")));
            }
            if ts < prev {
                return Err(Error::Index(format!(
                    "line {line}: {exchange} {ts}: timestamps not increasing (after {prev})"
                )));
            }
        }
        series.push((ts, level));
    }
    bars.into_iter()
        .map(|(ex, b)| IndexSeries::new(ex, b).map(|s| (ex, s)))
        .collect()
}

pub fn write_index_file<W: Write>(index: &IndexData, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(INDEX_HEADER)?;
    for series in index.values() {
        for (ts, level) in &series.bars {
            w.write_record([
                series.exchange.as_str(),
                &ts.date().format(DATE_FMT).to_string(),
                &ts.time().format(TIME_FMT).to_string(),
                &level.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
