//! Exact arithmetic: big rationals, the quadratic extension `a + b·√2`,
//! fractional parts, modular inverses and base-3 logarithm floors.
//!
//! Rationals are `num_rational::BigRational`. Everything above that is
//! implemented here so that sign and floor decisions stay exact even for
//! irrational grid offsets.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = num_rational::BigRational;

/// `n / d` as a reduced rational. Panics on `d == 0`.
pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn pow3(e: u32) -> BigInt {
    num_traits::pow(BigInt::from(3), e as usize)
}

/// `r · 3^e` for any integer `e`.
pub fn scale_pow3(r: &Rational, e: i64) -> Rational {
    if e >= 0 {
        r * Rational::from_integer(pow3(e as u32))
    } else {
        r / Rational::from_integer(pow3((-e) as u32))
    }
}

/// Returns `e` when the reduced denominator of `r` is exactly `3^e`.
pub fn triadic_exponent(r: &Rational) -> Option<u32> {
    let mut d = r.denom().clone();
    let three = BigInt::from(3);
    let mut e = 0;
    while d > BigInt::one() {
        let (q, rem) = d.div_rem(&three);
        if !rem.is_zero() {
            return None;
        }
        d = q;
        e += 1;
    }
    Some(e)
}

pub fn is_divisible_by_three(n: &BigInt) -> bool {
    (n % BigInt::from(3)).is_zero()
}

/// A number `rat + surd·√2` with rational coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExactReal {
    rat: Rational,
    surd: Rational,
}

impl ExactReal {
    pub fn new(rat: Rational, surd: Rational) -> Self {
        ExactReal { rat, surd }
    }

    pub fn zero() -> Self {
        Self::from(Rational::zero())
    }

    pub fn sqrt2() -> Self {
        ExactReal::new(Rational::zero(), Rational::one())
    }

    pub fn rat_part(&self) -> &Rational {
        &self.rat
    }

    pub fn surd_part(&self) -> &Rational {
        &self.surd
    }

    pub fn is_zero(&self) -> bool {
        self.rat.is_zero() && self.surd.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.surd.is_zero()
    }

    pub fn as_rational(&self) -> Option<&Rational> {
        self.is_rational().then_some(&self.rat)
    }

    /// Exact sign, decided by comparing `rat²` against `2·surd²` when the
    /// two parts have opposite signs.
    pub fn signum(&self) -> Ordering {
        let a = self.rat.cmp(&Rational::zero());
        let b = self.surd.cmp(&Rational::zero());
        match (a, b) {
            (Ordering::Equal, s) | (s, Ordering::Equal) => s,
            (x, y) if x == y => x,
            (Ordering::Greater, Ordering::Less) => {
                let lhs = &self.rat * &self.rat;
                let rhs = &self.surd * &self.surd * int(2);
                lhs.cmp(&rhs)
            }
            _ => {
                let lhs = &self.surd * &self.surd * int(2);
                let rhs = &self.rat * &self.rat;
                lhs.cmp(&rhs)
            }
        }
    }

    /// `⌊self⌋`. For a nonzero surd the value is irrational, so refining
    /// `√2` through its continued-fraction convergents eventually yields a
    /// bracket containing no integer.
    pub fn floor(&self) -> BigInt {
        if self.surd.is_zero() {
            return self.rat.floor().to_integer();
        }
        // convergents p/q of √2 alternate below and above
        let (mut p, mut q) = (BigInt::one(), BigInt::one());
        loop {
            let (np, nq) = (&p + &q * BigInt::from(2), &p + &q);
            let a = Rational::new(p.clone(), q.clone());
            let b = Rational::new(np.clone(), nq.clone());
            let (lo_r, hi_r) = if a < b { (a, b) } else { (b, a) };
            let (lo, hi) = if self.surd.is_positive() {
                (&self.rat + &self.surd * &lo_r, &self.rat + &self.surd * &hi_r)
            } else {
                (&self.rat + &self.surd * &hi_r, &self.rat + &self.surd * &lo_r)
            };
            let fl = lo.floor().to_integer();
            if fl == hi.floor().to_integer() {
                return fl;
            }
            p = np;
            q = nq;
        }
    }

    /// Fractional part `self − ⌊self⌋ ∈ [0, 1)`.
    pub fn frac(&self) -> ExactReal {
        let f = self.floor();
        ExactReal::new(&self.rat - Rational::from_integer(f), self.surd.clone())
    }

    /// Nearest `f64`; advisory only.
    pub fn to_f64(&self) -> f64 {
        rational_to_f64(&self.rat) + rational_to_f64(&self.surd) * std::f64::consts::SQRT_2
    }

    pub fn recip(&self) -> Option<ExactReal> {
        if self.is_zero() {
            return None;
        }
        let norm = &self.rat * &self.rat - &self.surd * &self.surd * int(2);
        Some(ExactReal::new(&self.rat / &norm, -&self.surd / &norm))
    }
}

impl From<Rational> for ExactReal {
    fn from(r: Rational) -> Self {
        ExactReal::new(r, Rational::zero())
    }
}

impl From<&Rational> for ExactReal {
    fn from(r: &Rational) -> Self {
        ExactReal::new(r.clone(), Rational::zero())
    }
}

impl Ord for ExactReal {
    fn cmp(&self, other: &Self) -> Ordering {
        (self - other).signum()
    }
}

impl PartialOrd for ExactReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Exact trichotomous comparison.
pub fn cmp(a: &ExactReal, b: &ExactReal) -> Ordering {
    a.cmp(b)
}

pub fn frac(a: &ExactReal) -> ExactReal {
    a.frac()
}

impl<'a> Add<&'a ExactReal> for &'a ExactReal {
    type Output = ExactReal;
    fn add(self, o: &ExactReal) -> ExactReal {
        ExactReal::new(&self.rat + &o.rat, &self.surd + &o.surd)
    }
}

impl<'a> Sub<&'a ExactReal> for &'a ExactReal {
    type Output = ExactReal;
    fn sub(self, o: &ExactReal) -> ExactReal {
        ExactReal::new(&self.rat - &o.rat, &self.surd - &o.surd)
    }
}

impl<'a> Mul<&'a ExactReal> for &'a ExactReal {
    type Output = ExactReal;
    fn mul(self, o: &ExactReal) -> ExactReal {
        ExactReal::new(
            &self.rat * &o.rat + &self.surd * &o.surd * int(2),
            &self.rat * &o.surd + &self.surd * &o.rat,
        )
    }
}

impl<'a> Add<&'a Rational> for &'a ExactReal {
    type Output = ExactReal;
    fn add(self, o: &Rational) -> ExactReal {
        ExactReal::new(&self.rat + o, self.surd.clone())
    }
}

impl<'a> Sub<&'a Rational> for &'a ExactReal {
    type Output = ExactReal;
    fn sub(self, o: &Rational) -> ExactReal {
        ExactReal::new(&self.rat - o, self.surd.clone())
    }
}

impl<'a> Mul<&'a Rational> for &'a ExactReal {
    type Output = ExactReal;
    fn mul(self, o: &Rational) -> ExactReal {
        ExactReal::new(&self.rat * o, &self.surd * o)
    }
}

impl<'a> Div<&'a Rational> for &'a ExactReal {
    type Output = ExactReal;
    fn div(self, o: &Rational) -> ExactReal {
        ExactReal::new(&self.rat / o, &self.surd / o)
    }
}

impl Neg for &ExactReal {
    type Output = ExactReal;
    fn neg(self) -> ExactReal {
        ExactReal::new(-&self.rat, -&self.surd)
    }
}

impl fmt::Display for ExactReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_exact_real(self))
    }
}

/// Canonical `P/Q` serialization, including integers (`3/1`).
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// `P/Q` for rationals, `S/T*sqrt2` for pure surds, `P/Q+S/T*sqrt2` (or
/// `-`) otherwise.
pub fn format_exact_real(x: &ExactReal) -> String {
    if x.surd.is_zero() {
        return format_rational(&x.rat);
    }
    if x.rat.is_zero() {
        return format!("{}*sqrt2", format_rational(&x.surd));
    }
    let sign = if x.surd.is_negative() { '-' } else { '+' };
    format!("{}{}{}*sqrt2", format_rational(&x.rat), sign, format_rational(&x.surd.abs()))
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    // scale down huge operands before converting
    let n = r.numer();
    let d = r.denom();
    match (n.to_f64(), d.to_f64()) {
        (Some(a), Some(b)) if a.is_finite() && b.is_finite() => a / b,
        _ => {
            let shift = d.bits().max(n.bits()).saturating_sub(900);
            let n2: BigInt = n >> shift;
            let d2: BigInt = d >> shift;
            n2.to_f64().unwrap_or(f64::NAN) / d2.to_f64().unwrap_or(f64::NAN)
        }
    }
}

/// Decimal rendering rounded half away from zero.
pub fn to_decimal_string(r: &Rational, digits: u32) -> String {
    let scale = num_traits::pow(BigInt::from(10), digits as usize);
    let scaled = r.abs() * Rational::from_integer(scale.clone());
    let rounded = (scaled + rat(1, 2)).floor().to_integer();
    let (ip, fp) = rounded.div_rem(&scale);
    let sign = if r.is_negative() && !rounded.is_zero() { "-" } else { "" };
    if digits == 0 {
        format!("{sign}{ip}")
    } else {
        format!("{sign}{ip}.{:0>width$}", fp.to_string(), width = digits as usize)
    }
}

/// `Q ∈ {1, …, m−1}` with `a·Q ≡ 1 (mod m)`.
pub fn mod_inverse(a: i128, m: i128) -> Result<i128> {
    if m < 2 {
        return Err(Error::BadModulus(m));
    }
    let a = a.rem_euclid(m);
    let egcd = a.extended_gcd(&m);
    if egcd.gcd != 1 {
        return Err(Error::NotCoprime { a, m });
    }
    Ok(egcd.x.rem_euclid(m))
}

/// `⌊−log₃ p⌋` for `p > 0`, i.e. the unique `f` with `3^f·p ∈ (1/3, 1]`.
pub fn floor_neg_log3(p: &Rational) -> Result<i64> {
    if !p.is_positive() {
        return Err(Error::NotPositive(format_rational(p)));
    }
    let one = Rational::one();
    let third = rat(1, 3);
    let mut f: i64 = 0;
    let mut v = p.clone();
    while v > one {
        v /= int(3);
        f -= 1;
    }
    while v <= third {
        v *= int(3);
        f += 1;
    }
    Ok(f)
}

/// Parses the exact textual number format: integers, `P/Q`, powers such as
/// `K/9^N`, and `sqrt2` terms (`P/Q+S/T*sqrt2`, `sqrt2/10`). Decimal
/// literals are rejected.
pub fn parse_exact_real(s: &str) -> Result<ExactReal> {
    let src: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let err = |msg: &str| Error::Parse(s.to_string(), msg.to_string());
    if src.is_empty() {
        return Err(err("empty input"));
    }
    if src.contains('.') {
        return Err(err("decimal literals are not exact; use P/Q"));
    }
    let mut p = Parser { b: src.as_bytes(), i: 0 };
    let v = p.expr().map_err(|m| err(&m))?;
    if p.i != p.b.len() {
        return Err(err(&format!("unexpected character at offset {}", p.i)));
    }
    Ok(v)
}

pub fn parse_rational(s: &str) -> Result<Rational> {
    let v = parse_exact_real(s)?;
    v.as_rational()
        .cloned()
        .ok_or_else(|| Error::Parse(s.to_string(), "expected a rational number".into()))
}

struct Parser<'a> {
    b: &'a [u8],
    i: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.b.get(self.i).copied()
    }

    fn expr(&mut self) -> std::result::Result<ExactReal, String> {
        let mut neg = false;
        match self.peek() {
            Some(b'-') => {
                neg = true;
                self.i += 1;
            }
            Some(b'+') => self.i += 1,
            _ => {}
        }
        let mut acc = self.term()?;
        if neg {
            acc = -&acc;
        }
        while let Some(op) = self.peek() {
            if op != b'+' && op != b'-' {
                break;
            }
            self.i += 1;
            let t = self.term()?;
            acc = if op == b'+' { &acc + &t } else { &acc - &t };
        }
        Ok(acc)
    }

    fn term(&mut self) -> std::result::Result<ExactReal, String> {
        let mut acc = self.factor()?;
        while let Some(op) = self.peek() {
            if op != b'*' && op != b'/' {
                break;
            }
            self.i += 1;
            let f = self.factor()?;
            acc = if op == b'*' {
                &acc * &f
            } else {
                let inv = f.recip().ok_or("division by zero")?;
                &acc * &inv
            };
        }
        Ok(acc)
    }

    fn factor(&mut self) -> std::result::Result<ExactReal, String> {
        if self.b[self.i..].starts_with(b"sqrt2") {
            self.i += 5;
            return Ok(ExactReal::sqrt2());
        }
        let base = self.integer()?;
        if self.peek() == Some(b'^') {
            self.i += 1;
            let e = self.integer()?;
            let e = e.to_u32().ok_or("exponent must be a small non-negative integer")?;
            return Ok(ExactReal::from(Rational::from_integer(num_traits::pow(base, e as usize))));
        }
        Ok(ExactReal::from(Rational::from_integer(base)))
    }

    fn integer(&mut self) -> std::result::Result<BigInt, String> {
        let start = self.i;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.i += 1;
        }
        if start == self.i {
            return Err(format!("expected a number at offset {start}"));
        }
        let txt = std::str::from_utf8(&self.b[start..self.i]).unwrap();
        txt.parse::<BigInt>().map_err(|e| e.to_string())
    }
}
