//! Lebesgue partitions of the horizontal component for grids `cℤ + r`:
//! hit sequences, quadratic variation, level crossings and truncated
//! variation, all by exact block descent.
//!
//! Grid levels are indexed relative to `θ = frac(r/c)`: level `n` is the
//! value `c·(n + θ)`. A block of depth `m` with value range
//! `[a/3^m, (a+1)/3^m]` contains level `n` iff `aQ − Dθ ≤ Dn ≤ (a+1)Q − Dθ`
//! where `c = P/Q` and `D = P·3^m`, so with `F = ⌊Dθ⌋` everything reduces to
//! integer arithmetic on `J = aQ − F`.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::curve::{
    for_each_vertex_over, interval_blocks, prefix_blocks, RawBlock, TernaryTime, MAX_BLOCK_DEPTH,
};
use crate::error::{Error, Result};
use crate::exact::{format_rational, pow3, ExactReal, Rational};
use crate::exec::{self, Exec};

/// The grid `{c·q + r : q ∈ ℤ}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grid {
    c: Rational,
    r: ExactReal,
    theta: ExactReal,
    offset: BigInt,
}

impl Grid {
    pub fn new(c: Rational, r: ExactReal) -> Result<Self> {
        if !c.is_positive() {
            return Err(Error::NotPositive(format_rational(&c)));
        }
        let ratio = &r / &c;
        let offset = ratio.floor();
        let theta = &ratio - &Rational::from_integer(offset.clone());
        Ok(Grid { c, r, theta, offset })
    }

    pub fn c(&self) -> &Rational {
        &self.c
    }

    pub fn r(&self) -> &ExactReal {
        &self.r
    }

    /// `frac(r/c) ∈ [0, 1)`.
    pub fn theta(&self) -> &ExactReal {
        &self.theta
    }

    /// Value of grid level `q`, i.e. `c·q + r`.
    pub fn level_value(&self, q: &BigInt) -> ExactReal {
        &(&ExactReal::from(Rational::from_integer(q.clone())) * &self.c) + &self.r
    }

    pub fn contains(&self, v: &ExactReal) -> bool {
        let u = &(v - &self.r) / &self.c;
        u.frac().is_zero()
    }

    /// Smallest `m` with `3^{-m} < c`.
    pub fn resolving_depth(&self) -> u32 {
        resolving_depth(&self.c)
    }

    fn true_index(&self, rel: i128) -> BigInt {
        BigInt::from(rel) - &self.offset
    }
}

/// Smallest `m ≥ 0` with `3^{-m} < c`.
pub fn resolving_depth(c: &Rational) -> u32 {
    let mut m = 0;
    let mut w = BigInt::one();
    // 3^{-m} < p/q  ⇔  q < p·3^m
    while c.denom() >= &(c.numer() * &w) {
        w *= 3;
        m += 1;
    }
    m
}

/// Levels hit by `x` on `[0, t]`, consecutive repeats collapsed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HitSequence {
    /// Grid indices `q` of the hit values `c·q + r`.
    pub levels: Vec<BigInt>,
    /// Index of the first partition time in `[0, t]`; always 1.
    pub k_index: u64,
    /// Index of the last partition time in `[0, t]`, `None` if nothing is hit.
    pub l_index: Option<u64>,
}

/// Collapsed hit summary of a stretch of path: first and last level and
/// the number of level changes in between.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Hits {
    first: i128,
    last: i128,
    moves: u64,
}

impl Hits {
    fn point(n: i128) -> Self {
        Hits { first: n, last: n, moves: 0 }
    }

    fn shift(self, by: i128) -> Self {
        Hits { first: self.first + by, last: self.last + by, moves: self.moves }
    }
}

fn join(a: Option<Hits>, b: Option<Hits>) -> Option<Hits> {
    match (a, b) {
        (None, h) | (h, None) => h,
        (Some(a), Some(b)) => Some(Hits {
            first: a.first,
            last: b.last,
            moves: a.moves + b.moves + u64::from(a.last != b.first),
        }),
    }
}

/// Per-depth tables for the integer membership test.
struct Row {
    d: i128,
    f: i128,
    exact: bool,
}

pub(crate) struct GridScan {
    q: i128,
    rows: Vec<Row>,
}

const I128_BUDGET: u32 = 120;

fn fits(v: &BigInt) -> bool {
    v.bits() < u64::from(I128_BUDGET)
}

impl GridScan {
    /// Tables for depths `0..=depth`.
    fn new(grid: &Grid, depth: u32) -> Result<Self> {
        if depth > MAX_BLOCK_DEPTH {
            return Err(Error::DepthTooLarge { depth, cap: MAX_BLOCK_DEPTH });
        }
        let top = pow3(depth) * 4;
        if !fits(&(grid.c.numer() * &top)) || !fits(&(grid.c.denom() * &top)) {
            return Err(Error::Overflow(format!(
                "spacing {} at depth {depth}",
                format_rational(&grid.c)
            )));
        }
        let q = grid.c.denom().to_i128().unwrap();
        let mut rows = Vec::with_capacity(depth as usize + 1);
        let mut d = grid.c.numer().clone();
        for _ in 0..=depth {
            let dt = &grid.theta * &Rational::from_integer(d.clone());
            let f = dt.floor();
            let exact = dt.frac().is_zero();
            rows.push(Row { d: d.to_i128().unwrap(), f: f.to_i128().unwrap(), exact });
            d *= 3;
        }
        Ok(GridScan { q, rows })
    }

    #[inline]
    fn j_of(&self, b: RawBlock) -> i128 {
        b.a * self.q - self.rows[b.depth as usize].f
    }

    /// Range of relative levels inside a depth-`m` block with offset `j`.
    #[inline]
    fn span(&self, m: u32, j: i128) -> (i128, i128) {
        let row = &self.rows[m as usize];
        let lo = -Integer::div_floor(&-j, &row.d);
        let hi = if row.exact {
            Integer::div_floor(&(j + self.q), &row.d)
        } else {
            Integer::div_floor(&(j + self.q - 1), &row.d)
        };
        (lo, hi)
    }

    /// `J` of child `i` of a block at depth `m` with offset `j`.
    #[inline]
    fn child_j(&self, m: u32, j: i128, flip: bool, i: usize) -> (i128, bool) {
        let c = RawBlock { depth: m, a: 0, flip }.child(i);
        let delta = self.rows[m as usize + 1].f - 3 * self.rows[m as usize].f;
        (3 * j + c.a * self.q - delta, c.flip)
    }

    /// Summary of the block by plain recursion.
    fn direct(&self, m: u32, j: i128, flip: bool) -> Option<Hits> {
        let (lo, hi) = self.span(m, j);
        match hi - lo {
            d if d < 0 => None,
            0 => Some(Hits::point(lo)),
            _ => {
                let mut acc = None;
                for i in 0..9 {
                    let (cj, cf) = self.child_j(m, j, flip, i);
                    acc = join(acc, self.direct(m + 1, cj, cf));
                }
                acc
            }
        }
    }

    /// Same as `direct`, memoised on `J mod D` since the summary of a block
    /// shifts by `J div D` levels.
    fn memo(&self, cache: &mut HashMap<(u32, i128, bool), Option<Hits>>, m: u32, j: i128, flip: bool) -> Option<Hits> {
        let dm = self.rows[m as usize].d;
        let (base, rem) = (Integer::div_floor(&j, &dm), Integer::mod_floor(&j, &dm));
        if let Some(h) = cache.get(&(m, rem, flip)) {
            return h.map(|h| h.shift(base));
        }
        let (lo, hi) = self.span(m, rem);
        let h = match hi - lo {
            d if d < 0 => None,
            0 => Some(Hits::point(lo)),
            _ => {
                let mut acc = None;
                for i in 0..9 {
                    let (cj, cf) = self.child_j(m, rem, flip, i);
                    acc = join(acc, self.memo(cache, m + 1, cj, cf));
                }
                acc
            }
        };
        cache.insert((m, rem, flip), h);
        h.map(|h| h.shift(base))
    }

    /// Pushes the collapsed relative levels of a block.
    fn emit(&self, m: u32, j: i128, flip: bool, out: &mut Vec<i128>) {
        let (lo, hi) = self.span(m, j);
        match hi - lo {
            d if d < 0 => {}
            0 => {
                if out.last() != Some(&lo) {
                    out.push(lo);
                }
            }
            _ => {
                for i in 0..9 {
                    let (cj, cf) = self.child_j(m, j, flip, i);
                    self.emit(m + 1, cj, cf, out);
                }
            }
        }
    }
}

/// Blocks covering `[0, t]` and a scan deep enough to resolve them.
fn setup(grid: &Grid, blocks_depth: u32) -> Result<GridScan> {
    GridScan::new(grid, grid.resolving_depth().max(blocks_depth) + 1)
}

fn start_hit(grid: &Grid) -> Option<Hits> {
    // x(0) = 0
    grid.theta.is_zero().then(|| Hits::point(0))
}

fn summary_over(grid: &Grid, blocks: &[RawBlock], with_start: bool) -> Result<Option<Hits>> {
    let depth = blocks.iter().map(|b| b.depth).max().unwrap_or(0);
    let scan = setup(grid, depth)?;
    let mut cache = HashMap::new();
    let mut acc = if with_start { start_hit_at(grid, blocks) } else { None };
    for &b in blocks {
        acc = join(acc, scan.memo(&mut cache, b.depth, scan.j_of(b), b.flip));
    }
    Ok(acc)
}

/// Hit at the first instant of `blocks`, needed when they are empty.
fn start_hit_at(grid: &Grid, blocks: &[RawBlock]) -> Option<Hits> {
    if blocks.is_empty() {
        start_hit(grid)
    } else {
        None
    }
}

pub(crate) fn prefix_summary(grid: &Grid, t: &TernaryTime) -> Result<Option<Hits>> {
    summary_over(grid, &prefix_blocks(t), true)
}

/// Number of partition times in `[0, t]`, i.e. `l(c, r, t)`; 0 if none.
pub fn level_count(grid: &Grid, t: &TernaryTime) -> Result<u64> {
    Ok(prefix_summary(grid, t)?.map_or(0, |h| h.moves + 1))
}

/// `k(c, r, s)`: index of the first partition time at or after `s`.
///
/// A triadic `s > 0` is never itself a partition time: the value at the end
/// of any block is already taken inside that block, so the level there was
/// reached earlier. Hence `k(s) = l(s) + 1`.
pub fn first_index_at(grid: &Grid, s: &TernaryTime) -> Result<u64> {
    if s.is_zero() {
        return Ok(1);
    }
    Ok(level_count(grid, s)? + 1)
}

pub fn hit_sequence(grid: &Grid, t: &TernaryTime) -> Result<HitSequence> {
    let blocks = prefix_blocks(t);
    let depth = blocks.iter().map(|b| b.depth).max().unwrap_or(0);
    let scan = setup(grid, depth)?;
    let mut rel = Vec::new();
    if blocks.is_empty() && grid.theta.is_zero() {
        rel.push(0);
    }
    for &b in &blocks {
        scan.emit(b.depth, scan.j_of(b), b.flip, &mut rel);
    }
    let levels: Vec<BigInt> = rel.into_iter().map(|n| grid.true_index(n)).collect();
    let l_index = (!levels.is_empty()).then_some(levels.len() as u64);
    Ok(HitSequence { levels, k_index: 1, l_index })
}

/// Quadratic variation of `x` on `[0, t]` along the Lebesgue partition of
/// `grid`: `(l − 1)·c²`, or 0 when no level is hit.
pub fn qv(grid: &Grid, t: &TernaryTime) -> Result<Rational> {
    let moves = prefix_summary(grid, t)?.map_or(0, |h| h.moves);
    Ok(Rational::from_integer(BigInt::from(moves)) * &grid.c * &grid.c)
}

/// `qv` by plain (non-memoised) descent, split across `exec`. Serves as the
/// reference path for the memoised engine.
pub fn qv_direct(grid: &Grid, t: &TernaryTime, exec: Exec) -> Result<Rational> {
    let blocks = prefix_blocks(t);
    let depth = blocks.iter().map(|b| b.depth).max().unwrap_or(0);
    let scan = setup(grid, depth)?;
    let tasks = split_tasks(&scan, &blocks, grid.resolving_depth());
    let acc = exec::map_reduce(
        exec,
        &tasks,
        |&(m, j, flip)| scan.direct(m, j, flip),
        || None,
        join,
    );
    let moves = join(start_hit_at(grid, &blocks), acc).map_or(0, |h| h.moves);
    Ok(Rational::from_integer(BigInt::from(moves)) * &grid.c * &grid.c)
}

/// Refines the leading blocks into enough time-ordered pieces to keep
/// several workers busy.
fn split_tasks(scan: &GridScan, blocks: &[RawBlock], stop: u32) -> Vec<(u32, i128, bool)> {
    const TARGET: usize = 512;
    let mut tasks: Vec<(u32, i128, bool)> =
        blocks.iter().map(|&b| (b.depth, scan.j_of(b), b.flip)).collect();
    while tasks.len() < TARGET {
        let mut next = Vec::with_capacity(tasks.len() * 9);
        let mut grew = false;
        for &(m, j, flip) in &tasks {
            let (lo, hi) = scan.span(m, j);
            if hi > lo && m < stop && (m as usize + 1) < scan.rows.len() {
                grew = true;
                next.extend((0..9).map(|i| {
                    let (cj, cf) = scan.child_j(m, j, flip, i);
                    (m + 1, cj, cf)
                }));
            } else {
                next.push((m, j, flip));
            }
        }
        tasks = next;
        if !grew {
            break;
        }
    }
    tasks
}

/// `[x]_{s,t}^{c,r} = (l(t) − k(s))·c²`, clamped at 0 when no partition time
/// falls in `[s, t]`.
pub fn qv_interval(grid: &Grid, s: &TernaryTime, t: &TernaryTime) -> Result<Rational> {
    if s.value() > t.value() {
        return Err(Error::InvalidArgument("qv_interval needs s ≤ t".into()));
    }
    let l = level_count(grid, t)? as i128;
    let k = first_index_at(grid, s)? as i128;
    let steps = (l - k).max(0);
    Ok(Rational::from_integer(BigInt::from(steps)) * &grid.c * &grid.c)
}

/// Level changes of `x` restricted to `[s, t]`, times `c²`.
pub fn qv_restricted(grid: &Grid, s: &TernaryTime, t: &TernaryTime) -> Result<Rational> {
    if s.value() > t.value() {
        return Err(Error::InvalidArgument("qv_restricted needs s ≤ t".into()));
    }
    let blocks = interval_blocks(s, t);
    let moves = summary_over(grid, &blocks, false)?.map_or(0, |h| h.moves);
    Ok(Rational::from_integer(BigInt::from(moves)) * &grid.c * &grid.c)
}

/// Downcrossing and upcrossing counts of `[z − c/2, z + c/2]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CrossingCounts {
    pub down: u64,
    pub up: u64,
}

impl CrossingCounts {
    pub fn total(&self) -> u64 {
        self.down + self.up
    }
}

/// Two-state counter: state 0 waits for the first event, state 1 for the
/// second, which counts one crossing and returns to state 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Machine {
    next: [u8; 2],
    count: [u64; 2],
}

impl Machine {
    const ID: Machine = Machine { next: [0, 1], count: [0, 0] };
    const FIRST: Machine = Machine { next: [1, 1], count: [0, 0] };
    const SECOND: Machine = Machine { next: [0, 0], count: [0, 1] };

    fn then(self, g: Machine) -> Machine {
        let step = |s: usize| {
            let mid = self.next[s] as usize;
            (g.next[mid], self.count[s] + g.count[mid])
        };
        let (n0, c0) = step(0);
        let (n1, c1) = step(1);
        Machine { next: [n0, n1], count: [c0, c1] }
    }
}

/// Composable effect of a stretch of path on both counters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct CrossEffect {
    down: Machine,
    up: Machine,
}

impl CrossEffect {
    const ID: CrossEffect = CrossEffect { down: Machine::ID, up: Machine::ID };

    fn then(self, g: CrossEffect) -> CrossEffect {
        CrossEffect { down: self.down.then(g.down), up: self.up.then(g.up) }
    }

    fn counts(self) -> CrossingCounts {
        CrossingCounts { down: self.down.count[0], up: self.up.count[0] }
    }
}

fn single_event(first: bool, second: bool) -> Machine {
    match (first, second) {
        (true, false) => Machine::FIRST,
        (false, true) => Machine::SECOND,
        _ => Machine::ID,
    }
}

/// Threshold positions per depth, in units of `3^{-m}` and clamped to just
/// outside `[0, 3^m]`.
pub(crate) struct CrossScan {
    ceil_h: Vec<i128>,
    ceil_l: Vec<i128>,
    floor_l: Vec<i128>,
    floor_h: Vec<i128>,
}

impl CrossScan {
    pub(crate) fn new(z: &ExactReal, c: &Rational, depth: u32) -> Result<Self> {
        if !c.is_positive() {
            return Err(Error::NotPositive(format_rational(c)));
        }
        if depth > MAX_BLOCK_DEPTH {
            return Err(Error::DepthTooLarge { depth, cap: MAX_BLOCK_DEPTH });
        }
        let half = c / Rational::from_integer(BigInt::from(2));
        let high = z + &half;
        let low = z - &half;
        let mut s = CrossScan { ceil_h: vec![], ceil_l: vec![], floor_l: vec![], floor_h: vec![] };
        for m in 0..=depth {
            let w = pow3(m);
            let clamp = |v: BigInt| -> i128 {
                let hi = &w + 2;
                if v < BigInt::from(-2) {
                    -2
                } else if v > hi {
                    hi.to_i128().unwrap()
                } else {
                    v.to_i128().unwrap()
                }
            };
            let scale = Rational::from_integer(w.clone());
            let h = &high * &scale;
            let l = &low * &scale;
            let (fh, fl) = (h.floor(), l.floor());
            let ch = if h.frac().is_zero() { fh.clone() } else { &fh + 1 };
            let cl = if l.frac().is_zero() { fl.clone() } else { &fl + 1 };
            s.ceil_h.push(clamp(ch));
            s.ceil_l.push(clamp(cl));
            s.floor_l.push(clamp(fl));
            s.floor_h.push(clamp(fh));
        }
        Ok(s)
    }

    /// Effect of a block, descending while one block holds both events of
    /// a counter (only possible while the block is wider than `c`).
    pub(crate) fn effect(&self, b: RawBlock) -> CrossEffect {
        let m = b.depth as usize;
        let a = b.a;
        // x reaches ≥ z + c/2 | goes < z − c/2 | reaches ≤ z − c/2 | goes > z + c/2
        let dh = a + 1 >= self.ceil_h[m];
        let dl = a < self.ceil_l[m];
        let ul = a <= self.floor_l[m];
        let uh = a >= self.floor_h[m];
        if (dh && dl) || (ul && uh) {
            let mut e = CrossEffect::ID;
            for i in 0..9 {
                e = e.then(self.effect(b.child(i)));
            }
            return e;
        }
        CrossEffect { down: single_event(dh, dl), up: single_event(ul, uh) }
    }
}

/// Downcrossings and upcrossings of `[z − c/2, z + c/2]` by `x` on `[0, t]`.
/// A downcrossing completes when `x` drops strictly below `z − c/2` after
/// having reached `z + c/2`; an upcrossing when `x` rises strictly above
/// `z + c/2` after having reached `z − c/2`.
pub fn crossings(z: &ExactReal, c: &Rational, t: &TernaryTime) -> Result<CrossingCounts> {
    let blocks = prefix_blocks(t);
    let depth = blocks.iter().map(|b| b.depth).max().unwrap_or(0);
    let scan = CrossScan::new(z, c, resolving_depth(c).max(depth))?;
    Ok(crossings_over(&scan, &blocks))
}

pub(crate) fn crossings_over(scan: &CrossScan, blocks: &[RawBlock]) -> CrossingCounts {
    blocks
        .iter()
        .fold(CrossEffect::ID, |e, &b| e.then(scan.effect(b)))
        .counts()
}

/// Truncated variation with its refinement history.
#[derive(Clone, Debug, PartialEq)]
pub struct TtvResult {
    pub value: Rational,
    pub depth: u32,
    /// Values at the last two depths; polygon values never decrease with
    /// depth.
    pub bracket: (Rational, Rational),
    pub history: Vec<(u32, Rational)>,
}

#[derive(Clone, Copy, Debug)]
enum Trend {
    Flat { min: i128, max: i128 },
    Up { anchor: i128, ext: i128 },
    Down { anchor: i128, ext: i128 },
}

/// Greedy truncated variation over consecutive value ranges of width at
/// most `c`, in integer units. A swing is closed once the path retreats by
/// more than `c` from its running extreme.
struct Greedy {
    /// `v > c` in units is `v·q > cp`.
    q: i128,
    cp: i128,
    trend: Option<Trend>,
    sum: i128,
    swings: i128,
}

impl Greedy {
    fn new(q: i128, cp: i128) -> Self {
        Greedy { q, cp, trend: None, sum: 0, swings: 0 }
    }

    #[inline]
    fn beyond(&self, d: i128) -> bool {
        d * self.q > self.cp
    }

    #[inline]
    fn push(&mut self, lo: i128, hi: i128) {
        let next = match self.trend {
            None => Trend::Flat { min: lo, max: hi },
            Some(Trend::Flat { min, max }) => {
                if self.beyond(hi - min) {
                    Trend::Up { anchor: min, ext: hi }
                } else if self.beyond(max - lo) {
                    Trend::Down { anchor: max, ext: lo }
                } else {
                    Trend::Flat { min: min.min(lo), max: max.max(hi) }
                }
            }
            Some(Trend::Up { anchor, ext }) => {
                if self.beyond(ext - lo) {
                    self.sum += ext - anchor;
                    self.swings += 1;
                    Trend::Down { anchor: ext, ext: lo }
                } else {
                    Trend::Up { anchor, ext: ext.max(hi) }
                }
            }
            Some(Trend::Down { anchor, ext }) => {
                if self.beyond(hi - ext) {
                    self.sum += anchor - ext;
                    self.swings += 1;
                    Trend::Up { anchor: ext, ext: hi }
                } else {
                    Trend::Down { anchor, ext: ext.min(lo) }
                }
            }
        };
        self.trend = Some(next);
    }

    /// `(Σ swing heights, number of swings)` including the open swing.
    fn finish(self) -> (i128, i128) {
        match self.trend {
            Some(Trend::Up { anchor, ext }) | Some(Trend::Down { anchor: ext, ext: anchor }) => {
                (self.sum + ext - anchor, self.swings + 1)
            }
            _ => (self.sum, self.swings),
        }
    }
}

/// Smallest `m` with `3^{-m} ≤ c`.
fn block_depth(c: &Rational) -> u32 {
    let mut m = 0;
    let mut w = BigInt::one();
    while c.denom() > &(c.numer() * &w) {
        w *= 3;
        m += 1;
    }
    m
}

fn ttv_units(c: &Rational, unit_depth: u32) -> Result<(i128, i128)> {
    let top = pow3(unit_depth);
    let cp = c.numer() * &top;
    if !fits(&(&cp * 4)) || !fits(&(c.denom() * &top * 4)) {
        return Err(Error::Overflow(format!("truncation {} at depth {unit_depth}", format_rational(c))));
    }
    Ok((c.denom().to_i128().unwrap(), cp.to_i128().unwrap()))
}

fn ttv_value(c: &Rational, unit_depth: u32, (sum, swings): (i128, i128)) -> Rational {
    Rational::new(BigInt::from(sum), pow3(unit_depth))
        - Rational::from_integer(BigInt::from(swings)) * c
}

/// `TTV^c` on `[0, t]` of the depth-`depth` polygon, by the greedy pass
/// over every vertex. Reference path for `ttv_polygon`.
pub fn ttv_polygon_streamed(c: &Rational, t: &TernaryTime, depth: u32) -> Result<Rational> {
    check_ttv_args(c, t, depth)?;
    if depth > 15 {
        return Err(Error::DepthTooLarge { depth, cap: 15 });
    }
    let (q, cp) = ttv_units(c, depth)?;
    let mut g = Greedy::new(q, cp);
    for_each_vertex_over(&prefix_blocks(t), depth, |v| g.push(v as i128, v as i128));
    Ok(ttv_value(c, depth, g.finish()))
}

fn check_ttv_args(c: &Rational, t: &TernaryTime, depth: u32) -> Result<()> {
    if !c.is_positive() {
        return Err(Error::NotPositive(format_rational(c)));
    }
    if depth < t.nine_depth() {
        return Err(Error::InvalidArgument(format!(
            "polygon depth {depth} is coarser than the time grid of t"
        )));
    }
    Ok(())
}

/// `TTV^c` on `[0, t]` of the depth-`depth` polygon.
///
/// Once blocks are no wider than `c`, the greedy pass depends on each block
/// only through its value range, and both ends of that range are polygon
/// vertices at every depth from the block's own. Such polygons are handled
/// one block at a time, and they all share one value.
pub fn ttv_polygon(c: &Rational, t: &TernaryTime, depth: u32) -> Result<Rational> {
    check_ttv_args(c, t, depth)?;
    let mc = block_depth(c);
    if depth < mc {
        return ttv_polygon_streamed(c, t, depth);
    }
    if mc > MAX_BLOCK_DEPTH {
        return Err(Error::DepthTooLarge { depth: mc, cap: MAX_BLOCK_DEPTH });
    }
    let blocks = prefix_blocks(t);
    let unit = blocks.iter().map(|b| b.depth).max().unwrap_or(0).max(mc);
    let (q, cp) = ttv_units(c, unit)?;
    let mut g = Greedy::new(q, cp);
    for &b in &blocks {
        let mut visit = |b: RawBlock| {
            let s = 3i128.pow(unit - b.depth);
            g.push(b.a * s, (b.a + 1) * s);
        };
        if b.depth >= mc {
            visit(b);
        } else {
            crate::curve::for_each_block(b, mc, &mut visit);
        }
    }
    Ok(ttv_value(c, unit, g.finish()))
}

/// `TTV^c(x)` on `[0, t]`: polygon values from the resolving depth of `c`
/// on, refined until two successive depths agree to within `rel_tol`.
pub fn truncated_variation(
    c: &Rational,
    t: &TernaryTime,
    rel_tol: f64,
    max_depth: u32,
) -> Result<TtvResult> {
    if !c.is_positive() {
        return Err(Error::NotPositive(format_rational(c)));
    }
    let start = resolving_depth(c).max(t.nine_depth());
    // two depths are needed for a bracket
    if start + 1 > max_depth {
        return Err(Error::DepthTooLarge { depth: start + 1, cap: max_depth });
    }
    let mut history: Vec<(u32, Rational)> = Vec::new();
    let mut depth = start;
    loop {
        if depth > max_depth {
            let n = history.len();
            return Err(Error::NoConvergence { lo: Box::new(history[n - 2].1.clone()), hi: Box::new(history[n - 1].1.clone()) });
        }
        let v = ttv_polygon(c, t, depth)?;
        if let Some((_, prev)) = history.last() {
            let diff = crate::exact::rational_to_f64(&(&v - prev)).abs();
            let scale = crate::exact::rational_to_f64(&v).abs();
            if diff <= rel_tol * scale || (v.is_zero() && prev.is_zero()) {
                let bracket = (prev.clone(), v.clone());
                history.push((depth, v.clone()));
                return Ok(TtvResult { value: v, depth, bracket, history });
            }
        }
        history.push((depth, v));
        depth += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::for_each_x_vertex;
    use crate::exact::{int, rat};

    fn sqrt2_over(d: i64) -> ExactReal {
        ExactReal::new(Rational::zero(), rat(1, d))
    }

    fn t_nine(k: u128, n: u32) -> TernaryTime {
        TernaryTime::from_nine(k, n).unwrap()
    }

    /// Collapsed levels of the depth-`d` polygon on `[0, k/9^d]`, with
    /// exact membership on each segment's value range.
    fn polygon_levels(grid: &Grid, d: u32, k: usize) -> Vec<BigInt> {
        let mut vs = Vec::new();
        for_each_x_vertex(d, |v| vs.push(v));
        let scale = Rational::new(BigInt::one(), pow3(d));
        let mut out: Vec<BigInt> = Vec::new();
        let mut push = |lo: i64, hi: i64, rev: bool| {
            let lo = ExactReal::from(Rational::from_integer(lo.into()) * &scale);
            let hi = ExactReal::from(Rational::from_integer(hi.into()) * &scale);
            // q with c·q + r in [lo, hi]
            let qlo = -(-&(&(&lo - grid.r()) / grid.c())).floor();
            let qhi = (&(&hi - grid.r()) / grid.c()).floor();
            let mut qs = Vec::new();
            let mut q = qlo;
            while q <= qhi {
                qs.push(q.clone());
                q += 1;
            }
            if rev {
                qs.reverse();
            }
            for q in qs {
                if out.last() != Some(&q) {
                    out.push(q);
                }
            }
        };
        if k == 0 {
            push(0, 0, false);
        }
        for w in vs[..=k].windows(2) {
            push(w[0].min(w[1]), w[0].max(w[1]), w[1] < w[0]);
        }
        out
    }

    #[test]
    fn wide_grid_single_level() {
        let g = Grid::new(int(2), rat(1, 2).into()).unwrap();
        let h = hit_sequence(&g, &TernaryTime::one()).unwrap();
        assert_eq!(h.levels, vec![BigInt::zero()]);
        assert_eq!(qv(&g, &TernaryTime::one()).unwrap(), Rational::zero());
    }

    #[test]
    fn third_grid_matches_polygon() {
        let g = Grid::new(rat(1, 3), ExactReal::zero()).unwrap();
        let h = hit_sequence(&g, &TernaryTime::one()).unwrap();
        assert_eq!(h.levels[0], BigInt::zero());
        assert!(h.levels.windows(2).all(|w| (&w[1] - &w[0]).abs() == BigInt::one()));
        assert_eq!(h.levels, polygon_levels(&g, 4, 9usize.pow(4)));
        assert_eq!(h.l_index, Some(h.levels.len() as u64));
    }

    #[test]
    fn start_time() {
        let g = Grid::new(rat(1, 3), sqrt2_over(10)).unwrap();
        let h = hit_sequence(&g, &TernaryTime::zero()).unwrap();
        assert!(h.levels.is_empty());
        assert_eq!((h.k_index, h.l_index), (1, None));
        assert_eq!(qv(&g, &TernaryTime::zero()).unwrap(), Rational::zero());
        let g0 = Grid::new(rat(1, 3), ExactReal::zero()).unwrap();
        assert_eq!(hit_sequence(&g0, &TernaryTime::zero()).unwrap().levels.len(), 1);
    }

    #[test]
    fn partial_times_match_polygon() {
        let grids = [
            Grid::new(rat(1, 9), sqrt2_over(10)).unwrap(),
            Grid::new(rat(2, 9), rat(1, 18).into()).unwrap(),
            Grid::new(rat(1, 27), ExactReal::zero()).unwrap(),
            Grid::new(rat(5, 7), ExactReal::new(rat(-3, 2), rat(1, 3))).unwrap(),
        ];
        for g in &grids {
            for k in [0usize, 1, 7, 100, 3000, 6560] {
                let t = t_nine(k as u128, 4);
                let h = hit_sequence(g, &t).unwrap();
                assert_eq!(h.levels, polygon_levels(g, 4, k), "k = {k}");
                let moves = h.levels.len().saturating_sub(1) as i64;
                assert_eq!(qv(g, &t).unwrap(), int(moves) * g.c() * g.c());
            }
        }
    }

    #[test]
    fn memo_direct_agree() {
        for (c, r) in [
            (rat(1, 81), sqrt2_over(10)),
            (rat(2, 243), ExactReal::zero()),
            (rat(1, 162), rat(1, 324).into()),
            (rat(7, 2000), ExactReal::new(rat(1, 7), rat(-1, 5))),
        ] {
            let g = Grid::new(c, r).unwrap();
            for t in [TernaryTime::one(), t_nine(12345, 5), t_nine(1, 1)] {
                let a = qv(&g, &t).unwrap();
                assert_eq!(a, qv_direct(&g, &t, Exec::Sequential).unwrap());
                assert_eq!(a, qv_direct(&g, &t, Exec::Parallel).unwrap());
            }
        }
    }

    #[test]
    fn table_quarter_row() {
        let g = Grid::new(rat(1, 9), rat(1, 18).into()).unwrap();
        let v = crate::exact::rational_to_f64(&qv(&g, &TernaryTime::one()).unwrap());
        assert!((v - 0.25).abs() / 0.25 < 0.03, "{v}");
    }

    #[test]
    fn scaling_first_block() {
        let g = Grid::new(rat(1, 3), sqrt2_over(10)).unwrap();
        let g3 = Grid::new(int(1), &ExactReal::from(int(3)) * &sqrt2_over(10)).unwrap();
        assert_eq!(
            qv(&g, &t_nine(1, 1)).unwrap(),
            qv(&g3, &TernaryTime::one()).unwrap() / int(9)
        );
    }

    #[test]
    fn block_ends_are_not_partition_times() {
        let g = Grid::new(rat(1, 27), sqrt2_over(7)).unwrap();
        let g0 = Grid::new(rat(1, 27), ExactReal::zero()).unwrap();
        for g in [&g, &g0] {
            for k in [1u128, 9, 10, 80, 81] {
                // one fine step earlier sees the same partition times
                let t = t_nine(k * 81 * 81, 6);
                let before = t_nine(k * 81 * 81 - 1, 6);
                assert_eq!(level_count(g, &t).unwrap(), level_count(g, &before).unwrap());
            }
        }
    }

    #[test]
    fn interval_qv() {
        let g = Grid::new(rat(1, 27), sqrt2_over(10)).unwrap();
        let (s, t) = (t_nine(10, 2), t_nine(50, 2));
        assert_eq!(qv_interval(&g, &t, &t).unwrap(), Rational::zero());
        assert_eq!(qv_interval(&g, &TernaryTime::zero(), &t).unwrap(), qv(&g, &t).unwrap());
        let l_t = level_count(&g, &t).unwrap() as i64;
        let l_s = level_count(&g, &s).unwrap() as i64;
        assert_eq!(qv_interval(&g, &s, &t).unwrap(), int(l_t - l_s - 1) * g.c() * g.c());
        assert!(qv_interval(&g, &t, &s).is_err());
    }

    #[test]
    fn reflected_block_contributes_equally() {
        for (c, r) in [(rat(1, 81), sqrt2_over(10)), (rat(2, 81), ExactReal::zero())] {
            let g = Grid::new(c, r).unwrap();
            let a = qv_restricted(&g, &TernaryTime::zero(), &t_nine(1, 1)).unwrap();
            let b = qv_restricted(&g, &t_nine(1, 1), &t_nine(2, 1)).unwrap();
            assert_eq!(a, b);
            assert!(a.is_positive());
        }
    }

    /// Definition-level crossing counter on the vertex sequence.
    fn crossings_oracle(z: &ExactReal, c: &Rational, d: u32, k: usize) -> CrossingCounts {
        let half = c / int(2);
        let (high, low) = (z + &half, z - &half);
        let mut vs = Vec::new();
        for_each_x_vertex(d, |v| vs.push(v));
        let scale = Rational::new(BigInt::one(), pow3(d));
        let (mut down_armed, mut up_armed) = (false, false);
        let mut out = CrossingCounts::default();
        for &v in &vs[..=k] {
            let x = ExactReal::from(Rational::from_integer(v.into()) * &scale);
            if !down_armed && x >= high {
                down_armed = true;
            } else if down_armed && x < low {
                down_armed = false;
                out.down += 1;
            }
            if !up_armed && x <= low {
                up_armed = true;
            } else if up_armed && x > high {
                up_armed = false;
                out.up += 1;
            }
        }
        out
    }

    #[test]
    fn crossings_match_vertex_simulation() {
        let cases = [
            (ExactReal::from(rat(1, 2)), rat(1, 3)),
            (ExactReal::from(rat(1, 3)), rat(1, 9)),
            (ExactReal::from(rat(5, 18)), rat(1, 9)),
            (sqrt2_over(3), rat(2, 27)),
            (ExactReal::from(rat(-1, 20)), rat(1, 5)),
        ];
        for (z, c) in &cases {
            for k in [0usize, 5, 400, 4000, 6561] {
                let got = crossings(z, c, &t_nine(k as u128, 4)).unwrap();
                assert_eq!(got, crossings_oracle(z, c, 5, k * 9), "z = {z}, c = {c}, k = {k}");
                assert!(got.down.abs_diff(got.up) <= 1);
            }
        }
        assert_eq!(
            crossings(&ExactReal::from(rat(1, 2)), &rat(1, 3), &TernaryTime::zero()).unwrap(),
            CrossingCounts::default()
        );
    }

    /// Supremum over vertex subsequences, by dynamic programming.
    fn ttv_dp(vs: &[i64], c: &Rational, d: u32) -> Rational {
        let scale = Rational::new(BigInt::one(), pow3(d));
        let mut best = vec![Rational::zero(); vs.len()];
        let mut top = Rational::zero();
        for i in 1..vs.len() {
            for j in 0..i {
                let step = Rational::from_integer((vs[i] - vs[j]).abs().into()) * &scale - c;
                let cand = &best[j] + step.max(Rational::zero());
                if cand > best[i] {
                    best[i] = cand;
                }
            }
            top = top.max(best[i].clone());
        }
        top
    }

    #[test]
    fn greedy_matches_dp() {
        for d in 1..=3 {
            let mut vs = Vec::new();
            for_each_x_vertex(d, |v| vs.push(v));
            for c in [rat(1, 2), rat(1, 3), rat(2, 9), rat(1, 9), rat(4, 27), rat(1, 30)] {
                for k in [vs.len() - 1, vs.len() / 2, 17.min(vs.len() - 1)] {
                    let t = t_nine(k as u128, d);
                    let got = ttv_polygon_streamed(&c, &t, d).unwrap();
                    assert_eq!(got, ttv_dp(&vs[..=k], &c, d), "d = {d}, c = {c}, k = {k}");
                }
            }
        }
    }

    #[test]
    fn block_ttv_matches_streamed() {
        for c in [rat(1, 3), rat(2, 9), rat(1, 9), rat(5, 81), rat(1, 27), rat(7, 10)] {
            for t in [TernaryTime::one(), t_nine(2000, 4), t_nine(5, 2)] {
                for d in t.nine_depth().max(1)..=5 {
                    let s = ttv_polygon_streamed(&c, &t, d).unwrap();
                    let b = ttv_polygon(&c, &t, d).unwrap();
                    assert_eq!(s, b, "c = {c}, d = {d}");
                }
            }
        }
    }

    #[test]
    fn ttv_basic() {
        assert_eq!(ttv_polygon(&int(1), &TernaryTime::one(), 4).unwrap(), Rational::zero());
        let r = truncated_variation(&int(2), &TernaryTime::one(), 1e-3, 8).unwrap();
        assert_eq!(r.value, Rational::zero());
        assert!(truncated_variation(&int(0), &TernaryTime::one(), 1e-3, 8).is_err());
        let a = ttv_polygon(&rat(1, 9), &TernaryTime::one(), 4).unwrap();
        let b = ttv_polygon(&rat(1, 8), &TernaryTime::one(), 4).unwrap();
        assert!(a >= b);
        let r = truncated_variation(&rat(1, 9), &TernaryTime::one(), 1e-3, 10).unwrap();
        let v = crate::exact::rational_to_f64(&(r.value * rat(1, 9)));
        assert!((v - 0.25).abs() / 0.25 < 0.05, "{v}");
    }
}
