//! Shared test oracles: a straight-line re-derivation of the regression rows
//! from the raw tick stream, the hand-checked limit table, and helpers that
//! turn synthetic data into events.
#![allow(dead_code)]

use chrono::{NaiveDateTime, NaiveTime, Timelike};
use limitlens::limits::{compute_limits, detect_first_hit, Direction, LimitHitEvent, MarketCalendar, RoundingMode, LimitRate};
use limitlens::marketdata::{IndexSeries, TradeTick};
use limitlens::synth::{gen_sessions, SynthConfig, SynthData};

/// (prev_close ticks, rate bp, up away, down away, up even, down even),
/// computed with exact rationals.
pub const LIMIT_TABLE: [(i64, u32, i64, i64, i64, i64); 50] = [
    (1005, 1000, 1106, 905, 1106, 904),
    (1015, 1000, 1117, 914, 1116, 914),
    (1025, 1000, 1128, 923, 1128, 922),
    (995, 1000, 1095, 896, 1094, 896),
    (5, 1000, 6, 5, 6, 4),
    (15, 1000, 17, 14, 16, 14),
    (105, 1000, 116, 95, 116, 94),
    (1000, 1000, 1100, 900, 1100, 900),
    (1234, 1000, 1357, 1111, 1357, 1111),
    (999, 1000, 1099, 899, 1099, 899),
    (1, 1000, 1, 1, 1, 1),
    (2, 1000, 2, 2, 2, 2),
    (7, 1000, 8, 6, 8, 6),
    (12345, 1000, 13580, 11111, 13580, 11110),
    (100005, 1000, 110006, 90005, 110006, 90004),
    (850, 1000, 935, 765, 935, 765),
    (2995, 1000, 3295, 2696, 3294, 2696),
    (4415, 1000, 4857, 3974, 4856, 3974),
    (3, 1000, 3, 3, 3, 3),
    (6665, 1000, 7332, 5999, 7332, 5998),
    (9999, 1000, 10999, 8999, 10999, 8999),
    (250, 1000, 275, 225, 275, 225),
    (25, 1000, 28, 23, 28, 22),
    (35, 1000, 39, 32, 38, 32),
    (45, 1000, 50, 41, 50, 40),
    (1010, 500, 1061, 960, 1060, 960),
    (1030, 500, 1082, 979, 1082, 978),
    (1050, 500, 1103, 998, 1102, 998),
    (990, 500, 1040, 941, 1040, 940),
    (10, 500, 11, 10, 10, 10),
    (30, 500, 32, 29, 32, 28),
    (110, 500, 116, 105, 116, 104),
    (1000, 500, 1050, 950, 1050, 950),
    (1234, 500, 1296, 1172, 1296, 1172),
    (999, 500, 1049, 949, 1049, 949),
    (1, 500, 1, 1, 1, 1),
    (2, 500, 2, 2, 2, 2),
    (7, 500, 7, 7, 7, 7),
    (12345, 500, 12962, 11728, 12962, 11728),
    (100010, 500, 105011, 95010, 105010, 95010),
    (850, 500, 893, 808, 892, 808),
    (2990, 500, 3140, 2841, 3140, 2840),
    (4410, 500, 4631, 4190, 4630, 4190),
    (3, 500, 3, 3, 3, 3),
    (6670, 500, 7004, 6337, 7004, 6336),
    (9999, 500, 10499, 9499, 10499, 9499),
    (250, 500, 263, 238, 262, 238),
    (50, 500, 53, 48, 52, 48),
    (70, 500, 74, 67, 74, 66),
    (90, 500, 95, 86, 94, 86),
];

/// One regression row as the oracle sees it.
#[derive(Debug)]
pub struct NaiveRow {
    pub k: usize,
    pub y: bool,
    /// dT, V1*IBS1, V2*IBS2, V3*IBS3, yield1, MKT1..3, spread1, depth1.
    pub x: [f64; 10],
    pub is_prev: bool,
    pub price_prev: i64,
}

fn yuan(t: i64) -> f64 {
    t as f64 / 100.0
}

fn best(levels: &[limitlens::marketdata::Level]) -> Option<i64> {
    levels.first().map(|l| l.price.0)
}

fn toward_mid(p: i64, ask: i64, bid: i64, dir: Direction) -> bool {
    match dir {
        Direction::Up => 2 * p > ask + bid,
        Direction::Down => 2 * p < ask + bid,
    }
}

fn index_returns(t: NaiveDateTime, bars: &[(NaiveDateTime, f64)]) -> Option<[f64; 3]> {
    let mut before: Vec<(NaiveDateTime, f64)> = Vec::new();
    for &(ts, v) in bars {
        if ts < t && ts.date() == t.date() {
            before.push((ts, v));
        }
    }
    if before.len() < 4 {
        return None;
    }
    let w = &before[before.len() - 4..];
    for i in 0..3 {
        let (a, b) = (w[i].0, w[i + 1].0);
        let step = (b - a).num_seconds();
        let hm = |x: NaiveDateTime| (x.time().hour(), x.time().minute(), x.time().second());
        let lunch = hm(a) == (11, 30, 0) && (hm(b) == (13, 0, 0) || hm(b) == (13, 1, 0));
        if step != 60 && !lunch {
            return None;
        }
    }
    Some([(w[3].1 / w[2].1).ln(), (w[2].1 / w[1].1).ln(), (w[1].1 / w[0].1).ln()])
}

/// Re-derives the base regression rows of `event`. Returns all usable rows
/// without applying the minimum-row rule.
pub fn naive_rows(event: &LimitHitEvent, index: &IndexSeries, sample_start: NaiveTime) -> Vec<NaiveRow> {
    let ticks: &[TradeTick] = &event.prehit_ticks;
    let dir = event.direction;
    let levels = if event.date < chrono::NaiveDate::from_ymd_opt(2003, 12, 5).unwrap() { 3 } else { 5 };

    // (day ordinal, tick position) of every sample trade
    let mut sample = Vec::new();
    let mut n = 0;
    for (i, t) in ticks.iter().enumerate() {
        if t.volume > 0 {
            n += 1;
            if t.time.time() > sample_start {
                sample.push((n, i));
            }
        }
    }
    let quotes = |i: usize| -> Option<(i64, i64)> {
        if i == 0 {
            return None;
        }
        let b = &ticks[i - 1];
        Some((best(&b.asks)?, best(&b.bids)?))
    };

    let mut rows = Vec::new();
    for s in 3..sample.len() {
        let (k, i0) = sample[s];
        let (i1, i2, i3) = (sample[s - 1].1, sample[s - 2].1, sample[s - 3].1);
        let (Some((a0, b0)), Some((a1, b1)), Some((a2, b2)), Some((a3, b3))) =
            (quotes(i0), quotes(i1), quotes(i2), quotes(i3))
        else {
            continue;
        };
        let Some(mkt) = index_returns(ticks[i0].time, &index.bars) else {
            continue;
        };
        let p0 = ticks[i0].price.0;
        let p1 = ticks[i1].price.0;
        let p2 = ticks[i2].price.0;
        let y = match dir {
            Direction::Up => p0 > p1 || (p0 == p1 && toward_mid(p0, a0, b0, dir)),
            Direction::Down => p0 < p1 || (p0 == p1 && toward_mid(p0, a0, b0, dir)),
        };
        let dirvol = |i: usize, a: i64, b: i64| {
            let sign = if toward_mid(ticks[i].price.0, a, b, dir) { 1.0 } else { -1.0 };
            sign * (ticks[i].volume as f64).ln()
        };
        let book = &ticks[i1 - 1];
        // value in cent-shares, summed exactly before converting to yuan
        let value = |ls: &[limitlens::marketdata::Level]| -> i128 {
            ls.iter().take(levels).map(|l| l.price.0 as i128 * l.volume as i128).sum()
        };
        let cents = match dir {
            Direction::Up => value(&book.bids) - value(&book.asks),
            Direction::Down => value(&book.asks) - value(&book.bids),
        };
        let imbalance = cents as f64 / 100.0;
        let depth = if cents == 0 { 0.0 } else { imbalance.signum() * imbalance.abs().ln() };
        rows.push(NaiveRow {
            k,
            y,
            x: [
                (ticks[i0].time - ticks[i1].time).num_seconds() as f64,
                dirvol(i1, a1, b1),
                dirvol(i2, a2, b2),
                dirvol(i3, a3, b3),
                (yuan(p1) / yuan(p2)).ln(),
                mkt[0],
                mkt[1],
                mkt[2],
                (yuan(a1) - yuan(b1)) / ((yuan(a1) + yuan(b1)) / 2.0),
                depth,
            ],
            is_prev: p1 > a1 || p1 < b1,
            price_prev: p1,
        });
    }
    rows
}

/// IR^m for the oracle: excursion from the previous close reaches m percent.
pub fn naive_ir(price: i64, prev_close: i64, dir: Direction, m_bp: u32) -> bool {
    // (price - prev_close) / prev_close >= m_bp / 10000, cross-multiplied
    let moved = (price - prev_close) * 10_000;
    let need = m_bp as i64 * prev_close;
    match dir {
        Direction::Up => moved >= need,
        Direction::Down => -moved >= need,
    }
}

pub fn synth_events(cfg: &SynthConfig) -> (SynthData, Vec<LimitHitEvent>) {
    let data = gen_sessions(cfg).expect("valid synth config");
    let calendar = MarketCalendar::default();
    let events = data
        .sessions
        .iter()
        .filter_map(|s| {
            let limits = compute_limits(s.prev_close, LimitRate::for_class(s.stock_class), RoundingMode::HalfAwayFromZero);
            detect_first_hit(s, limits, &calendar).expect("synthetic sessions are clean")
        })
        .collect();
    (data, events)
}

/// Logistic log-likelihood at (b0, b1) for rows (x, y).
pub fn logit_loglik(b0: f64, b1: f64, xs: &[f64], ys: &[bool]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let eta = b0 + b1 * x;
            // ln(1 + e^eta) without overflow
            let log1pexp = eta.max(0.0) + (-eta.abs()).exp().ln_1p();
            if y { eta - log1pexp } else { -log1pexp }
        })
        .sum()
}

/// Best log-likelihood over the grid {-10, -9.999, ..., 10}^2. For each
/// slope the intercept is maximised exactly over its grid points by integer
/// ternary search, which is valid because the objective is concave in b0.
pub fn grid_max_loglik(xs: &[f64], ys: &[bool]) -> (f64, f64, f64) {
    const N: i64 = 10_000;
    let at = |i: i64| i as f64 / 1000.0;
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for j in -N..=N {
        let b1 = at(j);
        let f = |i: i64| logit_loglik(at(i), b1, xs, ys);
        let (mut lo, mut hi) = (-N, N);
        while hi - lo > 2 {
            let m1 = lo + (hi - lo) / 3;
            let m2 = hi - (hi - lo) / 3;
            if f(m1) < f(m2) {
                lo = m1 + 1;
            } else {
                hi = m2;
            }
        }
        for i in lo..=hi {
            let v = f(i);
            if v > best.0 {
                best = (v, at(i), b1);
            }
        }
    }
    best
}

/// Seeded intercept-plus-slope logistic problem with 20 to 50 rows.
pub fn small_problem(seed: u64) -> (Vec<f64>, Vec<bool>) {
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(20..=50);
    let b0: f64 = rng.random_range(-1.0..1.0);
    let b1: f64 = rng.random_range(-1.5..1.5);
    let xs: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let ys = xs
        .iter()
        .map(|x| {
            let p = 1.0 / (1.0 + (-(b0 + b1 * x)).exp());
            rng.random_bool(p)
        })
        .collect();
    (xs, ys)
}

/// Fits `small_problem`-style data with the library's Newton solver.
pub fn fit_small(xs: &[f64], ys: &[bool]) -> limitlens::glm::GlmFit {
    use limitlens::glm::{fit, FitOptions, GlmSpec, Link};
    let x = nalgebra::DMatrix::from_fn(xs.len(), 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
    fit(&GlmSpec::new(Link::Logit, ["x"]), &x, ys, &FitOptions::default()).expect("well-posed problem")
}
