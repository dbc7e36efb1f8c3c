//! Seeded synthetic data with known ground truth.
//!
//! Every (stock, day) pair draws from its own ChaCha8 stream, selected with
//! `set_stream`, so adding stocks or days leaves existing output unchanged.
//! Stock-level attributes and the index series use reserved streams.

use std::fs;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime, Timelike, Weekday};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::depth_levels;
use crate::glm::Link;
use crate::limits::{compute_limits, Direction, LimitPrices, LimitRate, RoundingMode};
use crate::marketdata::{
    write_index_file, write_session_meta, write_tick_file, DailySession, Exchange, IndexData,
    IndexSeries, Level, MetaTable, SessionMeta, StockClass, Ticks, TradeTick,
};

const OPEN: u32 = 9 * 3600 + 30 * 60;
const MORNING_CLOSE: u32 = 11 * 3600 + 30 * 60;
const AFTERNOON_OPEN: u32 = 13 * 3600;
const CLOSE: u32 = 15 * 3600;

const STOCK_STREAM: u64 = 0xFFFF_FFFF;
const INDEX_STREAM_BIT: u64 = 1 << 63;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_stocks: usize,
    pub n_days: usize,
    /// First calendar day; trading days are the weekdays from here on.
    pub start_date: NaiveDate,
    /// Probability that a stock is special-treatment (5% limits).
    pub st_fraction: f64,
    pub up_hit_prob: f64,
    pub down_hit_prob: f64,
    /// Share of hit days whose first trade is already at the limit.
    pub opening_hit_prob: f64,
    /// Window for the scripted hit time, `HH:MM:SS`.
    pub hit_window: (NaiveTime, NaiveTime),
    /// Rows kept after the hit.
    pub post_hit_rows: usize,
    /// Mean seconds between tick rows.
    pub mean_gap_seconds: f64,
    /// Probability that a tick row is a quote update with no trade.
    pub quote_prob: f64,
    /// Log-normal trade size, in log shares.
    pub size_mu: f64,
    pub size_sigma: f64,
    /// Added to the log-size mean of the trade k positions before the hit,
    /// divided by k, for k up to `size_drift_window`.
    pub size_drift: f64,
    pub size_drift_window: usize,
    /// Probability that a trade walks past the best quote.
    pub suboptimal_prob: f64,
    /// Extra log-size for trades that walk the book.
    pub suboptimal_size_boost: f64,
    /// Log-normal volume at each book level.
    pub book_mu: f64,
    pub book_sigma: f64,
    pub rounding: RoundingMode,
    pub glm: GlmSynthConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let hms = |h, m| NaiveTime::from_hms_opt(h, m, 0).expect("valid time");
        SynthConfig {
            seed: 42,
            n_stocks: 5,
            n_days: 20,
            start_date: NaiveDate::from_ymd_opt(2007, 1, 4).expect("valid date"),
            st_fraction: 0.1,
            up_hit_prob: 0.3,
            down_hit_prob: 0.2,
            opening_hit_prob: 0.05,
            hit_window: (hms(9, 40), hms(10, 10)),
            post_hit_rows: 20,
            mean_gap_seconds: 6.0,
            quote_prob: 0.3,
            size_mu: 6.0,
            size_sigma: 1.0,
            size_drift: 0.0,
            size_drift_window: 20,
            suboptimal_prob: 0.05,
            suboptimal_size_boost: 1.0,
            book_mu: 7.0,
            book_sigma: 1.0,
            rounding: RoundingMode::HalfAwayFromZero,
            glm: GlmSynthConfig::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        for (name, p) in [
            ("st_fraction", self.st_fraction),
            ("up_hit_prob", self.up_hit_prob),
            ("down_hit_prob", self.down_hit_prob),
            ("opening_hit_prob", self.opening_hit_prob),
            ("quote_prob", self.quote_prob),
            ("suboptimal_prob", self.suboptimal_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if self.up_hit_prob + self.down_hit_prob > 1.0 {
            return bad("up_hit_prob + down_hit_prob exceeds 1".into());
        }
        if self.mean_gap_seconds.is_nan() || self.mean_gap_seconds < 1.0 {
            return bad("mean_gap_seconds must be at least 1".into());
        }
        if !(self.size_sigma >= 0.0 && self.book_sigma >= 0.0) {
            return bad("size and book sigmas must be non-negative".into());
        }
        let secs = |t: NaiveTime| t.num_seconds_from_midnight();
        let (a, b) = (secs(self.hit_window.0), secs(self.hit_window.1));
        if a < OPEN || b > CLOSE || a > b {
            return bad("hit_window must lie inside the trading day".into());
        }
        Ok(())
    }

    /// Weekdays starting at `start_date`.
    pub fn trading_days(&self) -> Vec<NaiveDate> {
        self.start_date
            .iter_days()
            .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
            .take(self.n_days)
            .collect()
    }

    /// Expected log trade size of a trade `k` positions before the hit.
    pub fn expected_log_size(&self, k: usize) -> f64 {
        if (1..=self.size_drift_window).contains(&k) {
            self.size_mu + self.size_drift / k as f64
        } else {
            self.size_mu
        }
    }
}


/// One scripted hit, as the detector should find it.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InjectedHit {
    pub stock_id: String,
    pub date: NaiveDate,
    pub direction: Direction,
    /// Index into the session's tick rows.
    pub hit_index: usize,
    /// 1-based ordinal among the day's trades.
    pub hit_trade_ordinal: usize,
    pub opening_hit: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthStock {
    pub stock_id: String,
    pub exchange: Exchange,
    pub stock_class: StockClass,
    /// Reference price the daily previous closes scatter around.
    pub base_price: Ticks,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthData {
    pub stocks: Vec<SynthStock>,
    pub sessions: Vec<DailySession>,
    pub index: IndexData,
    pub truth: Vec<InjectedHit>,
}

#[derive(Serialize, Deserialize)]
struct TruthFile {
    seed: u64,
    stocks: Vec<SynthStock>,
    hits: Vec<InjectedHit>,
}

impl SynthData {
    pub fn meta(&self) -> MetaTable {
        self.sessions
            .iter()
            .map(|s| SessionMeta {
                stock_id: s.stock_id.clone(),
                exchange: s.exchange,
                date: s.date,
                prev_close: s.prev_close,
                stock_class: s.stock_class,
            })
            .collect()
    }

    /// Writes `ticks.csv`, `sessions.csv`, `index.csv` and `truth.json`.
    pub fn write_tree(&self, dir: &Path, seed: u64) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_tick_file(&self.sessions, fs::File::create(dir.join("ticks.csv"))?)?;
        write_session_meta(&self.meta(), fs::File::create(dir.join("sessions.csv"))?)?;
        write_index_file(&self.index, fs::File::create(dir.join("index.csv"))?)?;
        let truth = TruthFile {
            seed,
            stocks: self.stocks.clone(),
            hits: self.truth.clone(),
        };
        let mut json = serde_json::to_string_pretty(&truth)?;
        json.push('\n');
        fs::write(dir.join("truth.json"), json)?;
        Ok(())
    }
}

/// Reads the hit list back from a `truth.json`.
pub fn read_truth(path: &Path) -> Result<Vec<InjectedHit>> {
    let f: TruthFile = serde_json::from_slice(&fs::read(path)?)?;
    Ok(f.hits)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn session_stream(seed: u64, stock: usize, day: usize) -> ChaCha8Rng {
    stream(seed, ((stock as u64) << 32) | day as u64)
}

fn normal(mean: f64, sd: f64) -> Normal<f64> {
    Normal::new(mean, sd).expect("finite normal parameters")
}

fn make_stock(cfg: &SynthConfig, i: usize) -> SynthStock {
    let mut rng = stream(cfg.seed, ((i as u64) << 32) | STOCK_STREAM);
    let exchange = if rng.random_bool(0.5) {
        Exchange::Shse
    } else {
        Exchange::Szse
    };
    let stock_class = if rng.random_bool(cfg.st_fraction) {
        StockClass::SpecialTreatment
    } else {
        StockClass::Common
    };
    let stock_id = match exchange {
        Exchange::Shse => format!("{:06}", 600_000 + i),
        Exchange::Szse => format!("{:06}", 1 + i),
    };
    SynthStock {
        stock_id,
        exchange,
        stock_class,
        base_price: Ticks(rng.random_range(300..3000)),
    }
}

/// Generates sessions, index bars and the hit manifest.
pub fn gen_sessions(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let days = cfg.trading_days();
    let stocks: Vec<SynthStock> = (0..cfg.n_stocks).map(|i| make_stock(cfg, i)).collect();
    let pairs: Vec<(usize, usize)> = (0..stocks.len())
        .flat_map(|s| (0..days.len()).map(move |d| (s, d)))
        .collect();
    let generated: Vec<(DailySession, Option<InjectedHit>)> = pairs
        .par_iter()
        .map(|&(s, d)| gen_day(cfg, &stocks[s], days[d], session_stream(cfg.seed, s, d)))
        .collect();

    let mut sessions = Vec::with_capacity(generated.len());
    let mut truth = Vec::new();
    for (session, hit) in generated {
        sessions.push(session);
        truth.extend(hit);
    }
    sessions.sort_by(|a, b| (&a.stock_id, a.date).cmp(&(&b.stock_id, b.date)));
    truth.sort();

    let mut index = IndexData::new();
    for exchange in [Exchange::Shse, Exchange::Szse] {
        index.insert(exchange, gen_index(cfg.seed, exchange, &days)?);
    }
    Ok(SynthData {
        stocks,
        sessions,
        index,
        truth,
    })
}

fn minute_bars() -> impl Iterator<Item = u32> {
    (OPEN..=MORNING_CLOSE)
        .step_by(60)
        .chain((AFTERNOON_OPEN + 60..=CLOSE).step_by(60))
}

fn at(date: NaiveDate, secs: u32) -> NaiveDateTime {
    date.and_time(NaiveTime::from_num_seconds_from_midnight_opt(secs, 0).expect("valid time"))
}

fn gen_index(seed: u64, exchange: Exchange, days: &[NaiveDate]) -> Result<IndexSeries> {
    let (ex_id, start) = match exchange {
        Exchange::Shse => (0u64, 3000.0),
        Exchange::Szse => (1u64, 10_000.0),
    };
    let ret = normal(0.0, 5e-4);
    let mut bars = Vec::new();
    for (d, &date) in days.iter().enumerate() {
        let mut rng = stream(seed, INDEX_STREAM_BIT | (ex_id << 32) | d as u64);
        let mut level: f64 = start * (normal(0.0, 0.02).sample(&mut rng)).exp();
        for secs in minute_bars() {
            level *= ret.sample(&mut rng).exp();
            bars.push((at(date, secs), (level * 100.0).round() / 100.0));
        }
    }
    IndexSeries::new(exchange, bars)
}

/// Mutable book state for one session: best bid and spread in ticks.
struct Book {
    bid: i64,
    spread: i64,
}

struct DayGen<'a> {
    cfg: &'a SynthConfig,
    rng: ChaCha8Rng,
    limits: LimitPrices,
    levels: usize,
    book_vol: Normal<f64>,
}

impl DayGen<'_> {
    fn level_volume(&mut self) -> u64 {
        (self.book_vol.sample(&mut self.rng).exp().round() as u64).max(1)
    }

    /// Book snapshot with the given touch, clipped to the limit band.
    fn snapshot(&mut self, bid: Option<i64>, ask: Option<i64>) -> (Vec<Level>, Vec<Level>) {
        let (down, up) = (self.limits.down.get(), self.limits.up.get());
        let mut bids = Vec::new();
        let mut asks = Vec::new();
        for j in 0..self.levels as i64 {
            if let Some(b) = bid.map(|b| b - j).filter(|&p| p >= down.max(1)) {
                let v = self.level_volume();
                bids.push(Level::new(Ticks(b), v));
            }
            if let Some(a) = ask.map(|a| a + j).filter(|&p| p <= up) {
                let v = self.level_volume();
                asks.push(Level::new(Ticks(a), v));
            }
        }
        (bids, asks)
    }

    fn size(&mut self, mean: f64) -> u64 {
        let v = normal(mean, self.cfg.size_sigma).sample(&mut self.rng).exp();
        (v.round() as u64).max(1)
    }

    /// Moves the book one step, drifting toward `target` over `remaining`
    /// rows when given, and reflecting inside `[lo, hi]` for the ask.
    fn step(&mut self, book: &mut Book, lo: i64, hi: i64, target: Option<(i64, usize)>) {
        if self.rng.random_bool(0.1) {
            book.spread = match self.rng.random_range(0..10) {
                0..=5 => 1,
                6..=8 => 2,
                _ => 3,
            };
        }
        let mut delta = 0;
        let mut drifted = false;
        if let Some((t, remaining)) = target {
            let needed = t - book.bid;
            let p = (needed.abs() as f64 / remaining.max(1) as f64).min(0.8);
            if needed != 0 && self.rng.random_bool(p) {
                delta = needed.signum();
                drifted = true;
            }
        }
        if !drifted {
            let u: f64 = self.rng.random();
            delta = if u < 0.15 {
                -1
            } else if u < 0.3 {
                1
            } else {
                0
            };
        }
        let max_bid = hi - book.spread;
        let mut b = book.bid + delta;
        if b < lo || b > max_bid {
            b = book.bid - delta;
        }
        book.bid = b.clamp(lo, max_bid.max(lo));
        if book.bid + book.spread > hi {
            book.spread = (hi - book.bid).max(1);
        }
    }
}

fn gen_day(
    cfg: &SynthConfig,
    stock: &SynthStock,
    date: NaiveDate,
    mut rng: ChaCha8Rng,
) -> (DailySession, Option<InjectedHit>) {
    let rate = LimitRate::for_class(stock.stock_class);
    let pc = ((stock.base_price.get() as f64) * normal(0.0, 0.03).sample(&mut rng).exp())
        .round()
        .max(100.0) as i64;
    let prev_close = Ticks(pc);
    let limits = compute_limits(prev_close, rate, cfg.rounding);
    let (down, up) = (limits.down.get(), limits.up.get());

    let u: f64 = rng.random();
    let direction = if u < cfg.up_hit_prob {
        Some(Direction::Up)
    } else if u < cfg.up_hit_prob + cfg.down_hit_prob {
        Some(Direction::Down)
    } else {
        None
    };
    let opening = direction.is_some() && rng.random_bool(cfg.opening_hit_prob);

    // Row times and kinds; row 0 is the opening quote.
    let gap = Exp::new(1.0 / (cfg.mean_gap_seconds - 0.5)).expect("positive rate");
    let mut kinds: Vec<(u32, bool)> = vec![(OPEN, false)];
    let mut t = OPEN as f64;
    loop {
        t += 0.5 + gap.sample(&mut rng);
        let mut secs = t as u32;
        if secs > MORNING_CLOSE && secs < AFTERNOON_OPEN {
            t += (AFTERNOON_OPEN - MORNING_CLOSE) as f64;
            secs = t as u32;
        }
        if secs >= CLOSE {
            break;
        }
        kinds.push((secs, !rng.random_bool(cfg.quote_prob)));
    }

    let hit_at = direction.map(|_| {
        if opening {
            OPEN
        } else {
            let (a, b) = (
                cfg.hit_window.0.num_seconds_from_midnight(),
                cfg.hit_window.1.num_seconds_from_midnight(),
            );
            rng.random_range(a..=b)
        }
    });
    let hit = hit_at.and_then(|h| kinds.iter().position(|&(s, tr)| tr && s >= h));
    let direction = hit.and(direction);
    if let Some(h) = hit {
        // the book just before the hit shows the limit at the touch
        kinds[h - 1].1 = false;
        kinds.truncate(h + 1 + cfg.post_hit_rows);
    }
    let hit_ordinal = hit.map(|h| kinds[..=h].iter().filter(|k| k.1).count());

    let mut g = DayGen {
        cfg,
        levels: depth_levels(date),
        limits,
        book_vol: normal(cfg.book_mu, cfg.book_sigma),
        rng,
    };
    let (lo, hi) = (down + 1, up - 1);
    let open_bid = ((pc as f64) * normal(0.0, 0.01).sample(&mut g.rng).exp()).round() as i64;
    let mut book = Book {
        bid: open_bid.clamp(lo, hi - 1),
        spread: 1,
    };
    let drift_target = direction.map(|d| match d {
        Direction::Up => hi - 1,
        Direction::Down => lo,
    });

    let limit = direction.map(|d| match d {
        Direction::Up => up,
        Direction::Down => down,
    });
    let touch_at_limit = |d: Direction| match d {
        Direction::Up => (Some(up - 1), Some(up)),
        Direction::Down => (Some(down), Some(down + 1)),
    };

    let mut ticks = Vec::with_capacity(kinds.len());
    let mut ordinal = 0usize;
    for (i, &(secs, is_trade)) in kinds.iter().enumerate() {
        let time = at(date, secs);
        if is_trade {
            ordinal += 1;
        }
        let (price, volume, bids, asks) = match (hit, direction) {
            (Some(h), Some(d)) if i == h - 1 => {
                let (b, a) = touch_at_limit(d);
                let (bids, asks) = g.snapshot(b, a);
                (Ticks::ZERO, 0, bids, asks)
            }
            (Some(h), Some(d)) if i >= h => {
                let l = limit.expect("hit has a limit");
                let price = if !is_trade {
                    Ticks::ZERO
                } else if i == h || g.rng.random_bool(0.7) {
                    Ticks(l)
                } else {
                    Ticks(l - d.sign())
                };
                let volume = if is_trade { g.size(cfg.size_mu) } else { 0 };
                // locked at the limit: only the far side keeps quoting
                let (b, a) = match d {
                    Direction::Up => (Some(up - 1), Some(up)),
                    Direction::Down => (Some(down), Some(down + 1)),
                };
                let (bids, asks) = g.snapshot(b, a);
                (price, volume, bids, asks)
            }
            _ => {
                let (price, volume) = if is_trade {
                    let k = hit_ordinal.map_or(0, |h| h - ordinal);
                    trade_at(&mut g, &book, lo, hi, direction, k)
                } else {
                    (Ticks::ZERO, 0)
                };
                let target = drift_target.zip(hit).map(|(t, h)| (t, h - i));
                g.step(&mut book, lo, hi, target);
                let (bids, asks) = g.snapshot(Some(book.bid), Some(book.bid + book.spread));
                (price, volume, bids, asks)
            }
        };
        ticks.push(TradeTick {
            time,
            price,
            volume,
            bids,
            asks,
        });
    }

    let truth = hit.zip(direction).map(|(h, d)| InjectedHit {
        stock_id: stock.stock_id.clone(),
        date,
        direction: d,
        hit_index: h,
        hit_trade_ordinal: hit_ordinal.expect("hit has an ordinal"),
        opening_hit: hit_ordinal == Some(1),
    });
    let session = DailySession {
        stock_id: stock.stock_id.clone(),
        exchange: stock.exchange,
        date,
        prev_close,
        stock_class: stock.stock_class,
        ticks,
        out_of_order: false,
    };
    (session, truth)
}

/// Price and size of a regular trade against the current book; the price
/// stays strictly inside the limit band.
fn trade_at(
    g: &mut DayGen,
    book: &Book,
    lo: i64,
    hi: i64,
    direction: Option<Direction>,
    k: usize,
) -> (Ticks, u64) {
    let (b, a) = (book.bid, book.bid + book.spread);
    let buy_prob = match direction {
        Some(Direction::Up) => 0.55,
        Some(Direction::Down) => 0.45,
        None => 0.5,
    };
    let buy = g.rng.random_bool(buy_prob);
    let mut mean = g.cfg.expected_log_size(k);
    let price = if g.rng.random_bool(g.cfg.suboptimal_prob) {
        mean += g.cfg.suboptimal_size_boost;
        let walk = g.rng.random_range(1..=2);
        if buy {
            a + walk
        } else {
            b - walk
        }
    } else if book.spread >= 2 && g.rng.random_bool(0.1) {
        g.rng.random_range(b + 1..a)
    } else if buy {
        a
    } else {
        b
    };
    (Ticks(price.clamp(lo, hi)), g.size(mean))
}

/// Regression dataset with the base-model column layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlmSynthConfig {
    pub seed: u64,
    pub n: usize,
    pub link: Link,
    /// Intercept first, then one coefficient per base-model column.
    pub true_beta: Vec<f64>,
}

/// Coefficient values on the scale of the regressors produced by
/// [`gen_glm_dataset`]: moderate effects with a strongly negative yield term.
pub fn default_true_beta() -> Vec<f64> {
    vec![
        0.2, -0.02, 0.05, 0.02, 0.01, -250.0, 100.0, 50.0, 20.0, -50.0, 0.03,
    ]
}

impl Default for GlmSynthConfig {
    fn default() -> Self {
        GlmSynthConfig {
            seed: 7,
            n: 2000,
            link: Link::Logit,
            true_beta: default_true_beta(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlmDataset {
    /// Leading intercept column, then the base-model regressors.
    pub x: DMatrix<f64>,
    pub y: Vec<bool>,
    pub true_beta: Vec<f64>,
}

/// Draws regressors at realistic scales and a Bernoulli response under the
/// configured link.
pub fn gen_glm_dataset(cfg: &GlmSynthConfig) -> Result<GlmDataset> {
    const P: usize = 11;
    if cfg.true_beta.len() != P {
        return Err(Error::InvalidArgument(format!(
            "true_beta needs {P} entries, got {}",
            cfg.true_beta.len()
        )));
    }
    if cfg.n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dt = Exp::new(1.0 / 6.0).expect("positive rate");
    let logsize = normal(9.0, 1.2);
    let yld = normal(0.0, 1e-3);
    let mkt = normal(0.0, 5e-4);
    let spread = Exp::new(1e3).expect("positive rate");
    let depth = normal(12.0, 1.5);
    let mut x = DMatrix::zeros(cfg.n, P);
    let mut y = Vec::with_capacity(cfg.n);
    let sign = |rng: &mut ChaCha8Rng| if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    for i in 0..cfg.n {
        let mut row = [0.0; P];
        row[0] = 1.0;
        row[1] = dt.sample(&mut rng);
        for v in &mut row[2..5] {
            *v = sign(&mut rng) * logsize.sample(&mut rng);
        }
        row[5] = yld.sample(&mut rng);
        for v in &mut row[6..9] {
            *v = mkt.sample(&mut rng);
        }
        row[9] = 1e-3 + spread.sample(&mut rng);
        row[10] = sign(&mut rng) * depth.sample(&mut rng);
        let eta: f64 = row.iter().zip(&cfg.true_beta).map(|(a, b)| a * b).sum();
        y.push(rng.random::<f64>() < cfg.link.probability(eta));
        for (j, v) in row.into_iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    Ok(GlmDataset {
        x,
        y,
        true_beta: cfg.true_beta.clone(),
    })
}

/// Adds `days` weekdays to `date`.
pub fn add_trading_days(date: NaiveDate, days: usize) -> NaiveDate {
    let mut d = date;
    let mut left = days;
    while left > 0 {
        d += Duration::days(1);
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            left -= 1;
        }
    }
    d
}
