//! The Peano curve: digit-rule evaluation of both coordinates, the nine-fold
//! block structure of the horizontal component, approximating polygons and
//! exact occupation times.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::exact::{format_rational, parse_rational, pow3, triadic_exponent, Rational};

/// Deepest block level addressable with 128-bit indices.
pub const MAX_BLOCK_DEPTH: u32 = 40;

/// Value offset (in units of the child width) of the nine time-ordered
/// children of an unreflected block.
const CHILD_SHIFT: [i128; 9] = [0, 0, 0, 1, 1, 1, 2, 2, 2];
/// Whether each child runs through its value range backwards.
const CHILD_FLIP: [bool; 9] = [false, true, false, false, true, false, false, true, false];

/// A time point `t ∈ [0, 1]` given by a finite base-3 expansion, optionally
/// followed by infinitely many trailing `2`s.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TernaryTime {
    digits: Vec<u8>,
    trailing_twos: bool,
}

impl TernaryTime {
    pub fn zero() -> Self {
        TernaryTime { digits: Vec::new(), trailing_twos: false }
    }

    pub fn one() -> Self {
        TernaryTime { digits: Vec::new(), trailing_twos: true }
    }

    pub fn from_digits(digits: Vec<u8>) -> Result<Self> {
        Self::with_tail(digits, false)
    }

    /// `0.d₁d₂…dₙ222…₃` when `trailing_twos` is set.
    pub fn with_tail(digits: Vec<u8>, trailing_twos: bool) -> Result<Self> {
        if digits.iter().any(|&d| d > 2) {
            return Err(Error::InvalidArgument("ternary digits must be 0, 1 or 2".into()));
        }
        Ok(TernaryTime { digits, trailing_twos })
    }

    /// `k / 9^n`.
    pub fn from_nine(k: u128, n: u32) -> Result<Self> {
        let t = Rational::new(BigInt::from(k), num_traits::pow(BigInt::from(9), n as usize));
        Self::from_rational(&t)
    }

    pub fn from_rational(t: &Rational) -> Result<Self> {
        if *t < Rational::zero() || *t > Rational::one() {
            return Err(Error::TimeOutOfRange(format_rational(t)));
        }
        if t.is_one() {
            return Ok(Self::one());
        }
        let e = triadic_exponent(t).ok_or_else(|| Error::NonTriadic(format_rational(t)))?;
        let mut num = t.numer().clone();
        let three = BigInt::from(3);
        let mut digits = vec![0u8; e as usize];
        for d in digits.iter_mut().rev() {
            let (q, r) = num.div_rem(&three);
            *d = r.to_u8().unwrap();
            num = q;
        }
        Ok(TernaryTime { digits, trailing_twos: false })
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::from_rational(&parse_rational(s)?)
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    pub fn has_trailing_twos(&self) -> bool {
        self.trailing_twos
    }

    pub fn value(&self) -> Rational {
        let mut num = BigInt::zero();
        for &d in &self.digits {
            num = num * 3 + d;
        }
        let den = pow3(self.digits.len() as u32);
        let mut v = Rational::new(num, den.clone());
        if self.trailing_twos {
            v += Rational::new(BigInt::one(), den);
        }
        v
    }

    pub fn is_zero(&self) -> bool {
        !self.trailing_twos && self.digits.iter().all(|&d| d == 0)
    }

    /// Finite digits of the same value, or `None` for `t = 1`.
    pub fn finite_digits(&self) -> Option<Vec<u8>> {
        if !self.trailing_twos {
            return Some(self.digits.clone());
        }
        let mut d = self.digits.clone();
        // 0.xyz222… = 0.xy(z+1)
        loop {
            match d.pop() {
                None => return None,
                Some(2) => continue,
                Some(v) => {
                    d.push(v + 1);
                    return Some(d);
                }
            }
        }
    }

    /// Base-9 digits (pairs of ternary digits) of the finite expansion.
    pub fn nine_adic_digits(&self) -> Option<Vec<u8>> {
        let mut d = self.finite_digits()?;
        while d.last() == Some(&0) {
            d.pop();
        }
        if d.len() % 2 == 1 {
            d.push(0);
        }
        Some(d.chunks(2).map(|p| 3 * p[0] + p[1]).collect())
    }

    /// Smallest `n` with `t·9^n` an integer.
    pub fn nine_depth(&self) -> u32 {
        self.nine_adic_digits().map_or(0, |d| d.len() as u32)
    }
}

#[inline]
fn k_iter(parity_odd: bool, n: u8) -> u8 {
    if parity_odd {
        2 - n
    } else {
        n
    }
}

/// `x(t)` from the digit rule `x = 0.k⁰(t₁) k^{t₂}(t₃) k^{t₂+t₄}(t₅) …₃`.
pub fn x_eval(t: &TernaryTime) -> Rational {
    let d = &t.digits;
    let tail = if t.trailing_twos { 2 } else { 0 };
    let mut num = BigInt::zero();
    let mut parity = false;
    let mut len = 0u32;
    let mut j = 0;
    while j < d.len() {
        num = num * 3 + k_iter(parity, d[j]);
        len += 1;
        let even = d.get(j + 1).copied().unwrap_or(tail);
        parity ^= even % 2 == 1;
        j += 2;
    }
    finish_digits(num, len, k_iter(parity, tail))
}

/// `y(t)` from the digit rule `y = 0.k^{t₁}(t₂) k^{t₁+t₃}(t₄) …₃`.
pub fn y_eval(t: &TernaryTime) -> Rational {
    let d = &t.digits;
    let tail = if t.trailing_twos { 2 } else { 0 };
    let mut num = BigInt::zero();
    let mut parity = false;
    let mut len = 0u32;
    let mut j = 0;
    while j < d.len() {
        parity ^= d[j] % 2 == 1;
        let even = d.get(j + 1).copied().unwrap_or(tail);
        if j + 1 < d.len() {
            num = num * 3 + k_iter(parity, even);
            len += 1;
        }
        j += 2;
    }
    finish_digits(num, len, k_iter(parity, tail))
}

/// `0.(num)(repeating tail digit)₃` where `num` has `len` digits.
fn finish_digits(num: BigInt, len: u32, tail_digit: u8) -> Rational {
    let den = pow3(len);
    let mut v = Rational::new(num, den.clone());
    if tail_digit == 2 {
        v += Rational::new(BigInt::one(), den);
    }
    // a repeating 1 cannot occur: k maps 0 and 2 to 0 or 2
    debug_assert!(tail_digit != 1);
    v
}

/// A depth-`m` time block in compact form: on `[j/9^m, (j+1)/9^m]` the curve
/// runs through `[a/3^m, (a+1)/3^m]`, backwards when `flip` is set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RawBlock {
    pub depth: u32,
    pub a: i128,
    pub flip: bool,
}

impl RawBlock {
    pub const ROOT: RawBlock = RawBlock { depth: 0, a: 0, flip: false };

    #[inline]
    pub fn child(self, i: usize) -> RawBlock {
        let (a, flip) = if self.flip {
            (3 * self.a + 2 - CHILD_SHIFT[i], !CHILD_FLIP[i])
        } else {
            (3 * self.a + CHILD_SHIFT[i], CHILD_FLIP[i])
        };
        RawBlock { depth: self.depth + 1, a, flip }
    }

    /// Integer entry and exit values in units of `3^{-depth}`.
    #[inline]
    pub fn entry_exit(self) -> (i128, i128) {
        if self.flip {
            (self.a + 1, self.a)
        } else {
            (self.a, self.a + 1)
        }
    }
}

/// Full description of a depth-`m` block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockDescriptor {
    pub depth: u32,
    pub index: u128,
    pub base: Rational,
    pub reflected: bool,
    pub entry: Rational,
    pub exit: Rational,
}

pub fn raw_block(m: u32, j: u128) -> Result<RawBlock> {
    if m > MAX_BLOCK_DEPTH {
        return Err(Error::DepthTooLarge { depth: m, cap: MAX_BLOCK_DEPTH });
    }
    let count = 9u128.pow(m);
    if j >= count {
        return Err(Error::IndexOutOfRange { m, j });
    }
    let mut b = RawBlock::ROOT;
    let mut scale = count;
    for _ in 0..m {
        scale /= 9;
        b = b.child(((j / scale) % 9) as usize);
    }
    Ok(b)
}

/// The block `[j/9^m, (j+1)/9^m]`, built from the base-9 digits of `j`.
pub fn block(m: u32, j: u128) -> Result<BlockDescriptor> {
    let b = raw_block(m, j)?;
    let den = pow3(m);
    let r = |v: i128| Rational::new(BigInt::from(v), den.clone());
    let (en, ex) = b.entry_exit();
    Ok(BlockDescriptor {
        depth: m,
        index: j,
        base: r(b.a),
        reflected: b.flip,
        entry: r(en),
        exit: r(ex),
    })
}

/// Full blocks whose union is `[0, t]`, in time order.
pub fn prefix_blocks(t: &TernaryTime) -> Vec<RawBlock> {
    let Some(nine) = t.nine_adic_digits() else {
        return vec![RawBlock::ROOT];
    };
    let mut out = Vec::new();
    let mut cur = RawBlock::ROOT;
    for e in nine {
        for c in 0..e as usize {
            out.push(cur.child(c));
        }
        cur = cur.child(e as usize);
    }
    out
}

/// Full blocks whose union is `[s, t]`, in time order. Empty when `s ≥ t`.
pub fn interval_blocks(s: &TernaryTime, t: &TernaryTime) -> Vec<RawBlock> {
    if s.is_zero() {
        return if t.is_zero() { Vec::new() } else { prefix_blocks(t) };
    }
    let n = s.nine_depth().max(t.nine_depth());
    let scale = Rational::from_integer(num_traits::pow(BigInt::from(9u32), n as usize));
    let lo = (s.value() * &scale).to_integer().to_u128().unwrap_or(u128::MAX);
    let hi = (t.value() * &scale).to_integer().to_u128().unwrap_or(0);
    let mut out = Vec::new();
    if lo < hi {
        cover(RawBlock::ROOT, 0, n, lo, hi, &mut out);
    }
    out
}

fn cover(b: RawBlock, j: u128, n: u32, lo: u128, hi: u128, out: &mut Vec<RawBlock>) {
    let w = 9u128.pow(n - b.depth);
    let (start, end) = (j * w, (j + 1) * w);
    if end <= lo || start >= hi {
        return;
    }
    if lo <= start && end <= hi {
        out.push(b);
        return;
    }
    for i in 0..9 {
        cover(b.child(i), 9 * j + i as u128, n, lo, hi, out);
    }
}

/// Streams `3^d·x(s)` at `s = i/9^d` across the time span covered by
/// `blocks` (consecutive, each of depth at most `d`), endpoints included.
pub fn for_each_vertex_over<F: FnMut(i64)>(blocks: &[RawBlock], d: u32, mut f: F) {
    const UP: [i64; 9] = [0, 1, 0, 1, 2, 1, 2, 3, 2];
    let mut last = None;
    for &root in blocks {
        assert!(root.depth <= d, "block deeper than vertex depth");
        if root.depth == d {
            let (en, ex) = root.entry_exit();
            f(en as i64);
            last = Some(ex as i64);
            continue;
        }
        for_each_block(root, d - 1, &mut |b: RawBlock| {
            let base = 3 * b.a as i64;
            for u in UP {
                f(if b.flip { base + 3 - u } else { base + u });
            }
            last = Some(if b.flip { base } else { base + 3 });
        });
    }
    if let Some(v) = last {
        f(v);
    }
}

/// Calls `f` with every block of depth `depth` below `root`, in time order.
pub fn for_each_block<F: FnMut(RawBlock)>(root: RawBlock, depth: u32, f: &mut F) {
    if root.depth >= depth {
        f(root);
        return;
    }
    for i in 0..9 {
        for_each_block(root.child(i), depth, f);
    }
}

/// Streams `3^m·x(i/9^m)` for `i = 0, …, 9^m`.
pub fn for_each_x_vertex<F: FnMut(i64)>(m: u32, mut f: F) {
    const UP: [i64; 9] = [0, 1, 0, 1, 2, 1, 2, 3, 2];
    if m == 0 {
        f(0);
        f(1);
        return;
    }
    let mut last = 0;
    for_each_block(RawBlock::ROOT, m - 1, &mut |b: RawBlock| {
        let base = 3 * b.a as i64;
        for u in UP {
            f(if b.flip { base + 3 - u } else { base + u });
        }
        last = if b.flip { base } else { base + 3 };
    });
    f(last);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolygonKind {
    /// Vertices `(t, x(t))`.
    XGraph,
    /// Vertices `(x(t), y(t))`.
    XyCurve,
}

/// Approximating polygon through the curve values at `t = i/9^m`. Coordinates
/// are stored as integer numerators: `t` over `9^m`, curve values over `3^m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polygon {
    pub depth: u32,
    pub kind: PolygonKind,
    x: Vec<u64>,
    y: Vec<u64>,
}

impl Polygon {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// The `i`-th vertex as exact rationals.
    pub fn vertex(&self, i: usize) -> (Rational, Rational) {
        let d3 = pow3(self.depth);
        let xv = Rational::new(BigInt::from(self.x[i]), d3.clone());
        match self.kind {
            PolygonKind::XGraph => {
                let d9 = &d3 * &d3;
                (Rational::new(BigInt::from(i), d9), xv)
            }
            PolygonKind::XyCurve => (xv, Rational::new(BigInt::from(self.y[i]), d3)),
        }
    }

    pub fn header(&self) -> [&'static str; 2] {
        match self.kind {
            PolygonKind::XGraph => ["t", "x"],
            PolygonKind::XyCurve => ["x", "y"],
        }
    }
}

pub fn polygon(m: u32, kind: PolygonKind, cap: u32) -> Result<Polygon> {
    if m > cap {
        return Err(Error::DepthTooLarge { depth: m, cap });
    }
    if m > 15 {
        return Err(Error::DepthTooLarge { depth: m, cap: 15 });
    }
    let mut x = Vec::with_capacity(9usize.pow(m) + 1);
    for_each_x_vertex(m, |v| x.push(v as u64));
    let y = match kind {
        PolygonKind::XGraph => Vec::new(),
        PolygonKind::XyCurve => {
            let scale = pow3(m);
            (0..x.len() as u128)
                .map(|i| {
                    let t = TernaryTime::from_nine(i, m).expect("vertex time in [0,1]");
                    (y_eval(&t) * Rational::from_integer(scale.clone())).to_integer().to_u64().unwrap()
                })
                .collect()
        }
    };
    Ok(Polygon { depth: m, kind, x, y })
}

/// Lebesgue measure of `{s ∈ [0, t] : x(s) ∈ [a, b]}` for triadic `a < b`.
pub fn occupation(t: &TernaryTime, a: &Rational, b: &Rational) -> Result<Rational> {
    let bad = || Error::NonTriadicBounds(format_rational(a), format_rational(b));
    let ea = triadic_exponent(a).ok_or_else(bad)?;
    let eb = triadic_exponent(b).ok_or_else(bad)?;
    if a >= b {
        return Err(Error::InvalidArgument(format!(
            "occupation needs a < b, got [{}, {}]",
            format_rational(a),
            format_rational(b)
        )));
    }
    let e = ea.max(eb);
    let level = e.max(t.nine_depth());
    if level > MAX_BLOCK_DEPTH {
        return Err(Error::DepthTooLarge { depth: level, cap: MAX_BLOCK_DEPTH });
    }
    let scale = Rational::from_integer(pow3(e));
    let lo = (a * &scale).to_integer().to_i128().ok_or_else(bad)?;
    let hi = (b * &scale).to_integer().to_i128().ok_or_else(bad)?;
    let occ = OccupationScan { lo, hi, e, level };
    let units: u128 = prefix_blocks(t).into_iter().map(|blk| occ.measure(blk)).sum();
    Ok(Rational::new(
        BigInt::from(units),
        num_traits::pow(BigInt::from(9u32), level as usize),
    ))
}

/// Occupation of `[lo, hi]·3^{-e}` measured in units of `9^{-level}`.
struct OccupationScan {
    lo: i128,
    hi: i128,
    e: u32,
    level: u32,
}

impl OccupationScan {
    fn measure(&self, b: RawBlock) -> u128 {
        // compare at scale 3^{max(depth, e)}
        let s = b.depth.max(self.e);
        let bs = 3i128.pow(s - b.depth);
        let es = 3i128.pow(s - self.e);
        let (blo, bhi) = (b.a * bs, (b.a + 1) * bs);
        let (lo, hi) = (self.lo * es, self.hi * es);
        if lo <= blo && bhi <= hi {
            9u128.pow(self.level - b.depth)
        } else if bhi <= lo || blo >= hi {
            0
        } else {
            (0..9).map(|i| self.measure(b.child(i))).sum()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{int, rat};

    fn tt(s: &str) -> TernaryTime {
        TernaryTime::parse(s).unwrap()
    }

    #[test]
    fn x_examples() {
        assert_eq!(x_eval(&tt("0")), int(0));
        assert_eq!(x_eval(&tt("1/3")), rat(1, 3));
        assert_eq!(x_eval(&tt("8/9")), rat(2, 3));
        assert_eq!(x_eval(&tt("1")), int(1));
        assert_eq!(x_eval(&tt("7/9")), int(1));
    }

    #[test]
    fn y_examples() {
        assert_eq!(y_eval(&tt("0")), int(0));
        assert_eq!(y_eval(&tt("1")), int(1));
        // digits (1): y₁ = k¹(0) = 2 and every later digit is k¹(0) = 2
        assert_eq!(y_eval(&tt("1/3")), int(1));
        // digits (0,1): y₁ = k⁰(1) = 1, tail k⁰(0) = 0
        assert_eq!(y_eval(&tt("1/9")), rat(1, 3));
    }

    #[test]
    fn trailing_twos_form() {
        let t = TernaryTime::with_tail(vec![0, 1], true).unwrap();
        assert_eq!(t.value(), rat(2, 9));
        assert_eq!(t.finite_digits().unwrap(), vec![0, 2]);
        assert_eq!(TernaryTime::one().value(), int(1));
        assert_eq!(TernaryTime::one().finite_digits(), None);
        assert!(TernaryTime::parse("1/2").is_err());
        assert!(TernaryTime::parse("4/3").is_err());
    }

    #[test]
    fn block_examples() {
        let b = block(0, 0).unwrap();
        assert_eq!((b.base, b.reflected, b.entry, b.exit), (int(0), false, int(0), int(1)));
        let b = block(1, 1).unwrap();
        assert_eq!((b.base, b.reflected, b.entry, b.exit), (int(0), true, rat(1, 3), int(0)));
        let b = block(1, 3).unwrap();
        assert_eq!((b.base, b.reflected, b.entry, b.exit), (rat(1, 3), false, rat(1, 3), rat(2, 3)));
        assert!(matches!(block(1, 9), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn polygon_depth_one() {
        let p = polygon(1, PolygonKind::XGraph, 7).unwrap();
        assert_eq!(p.len(), 10);
        assert_eq!(p.vertex(0), (int(0), int(0)));
        let xs: Vec<Rational> = (0..10).map(|i| p.vertex(i).1).collect();
        let expect = [0, 1, 0, 1, 2, 1, 2, 3, 2, 3].map(|n| rat(n, 3));
        assert_eq!(xs, expect);
        for i in 0..10 {
            let t = TernaryTime::from_nine(i as u128, 1).unwrap();
            assert_eq!(p.vertex(i), (t.value(), x_eval(&t)));
        }
        assert_eq!(polygon(2, PolygonKind::XGraph, 7).unwrap().len(), 82);
        assert!(matches!(polygon(8, PolygonKind::XGraph, 7), Err(Error::DepthTooLarge { .. })));
    }

    #[test]
    fn xy_polygon_matches_digit_rule() {
        let p = polygon(2, PolygonKind::XyCurve, 7).unwrap();
        for i in 0..p.len() {
            let t = TernaryTime::from_nine(i as u128, 2).unwrap();
            assert_eq!(p.vertex(i), (x_eval(&t), y_eval(&t)));
        }
    }

    #[test]
    fn occupation_examples() {
        assert_eq!(occupation(&tt("1/9"), &int(0), &rat(1, 3)).unwrap(), rat(1, 9));
        assert_eq!(occupation(&tt("1"), &int(0), &int(1)).unwrap(), int(1));
        assert_eq!(occupation(&tt("1"), &int(0), &rat(1, 3)).unwrap(), rat(1, 3));
        assert_eq!(occupation(&tt("0"), &int(0), &int(1)).unwrap(), int(0));
        assert!(matches!(
            occupation(&tt("1"), &rat(1, 2), &int(1)),
            Err(Error::NonTriadicBounds(..))
        ));
        assert!(occupation(&tt("1"), &int(1), &int(0)).is_err());
    }
}
