//! Local time of the horizontal component on the triadic time grid, the
//! occupation identity, the normalisation `φ(c)` and the weak-limit
//! experiment for normalised crossing counts.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::curve::{occupation, prefix_blocks, TernaryTime};
use crate::error::{Error, Result};
use crate::exact::{format_rational, int, parse_rational, pow3, rational_to_f64, triadic_exponent, ExactReal, Rational};
use crate::exec::{self, Exec};
use crate::lebesgue::{crossings_over, resolving_depth, CrossScan};
use crate::limits::limit_constant;

/// Completed-children occupation per value third, in units of 1/3, before
/// child `j` starts.
const BASE_THIRDS: [[u64; 3]; 9] = [
    [0, 0, 0],
    [1, 0, 0],
    [2, 0, 0],
    [3, 0, 0],
    [3, 1, 0],
    [3, 2, 0],
    [3, 3, 0],
    [3, 3, 1],
    [3, 3, 2],
];
/// Value third of child `j` and whether its map is `(s+1) − 3z` rather
/// than `3z − s`.
const CHILD_THIRD: [usize; 9] = [0, 0, 0, 1, 1, 1, 2, 2, 2];
const CHILD_REFLECTED: [bool; 9] = [false, true, false, false, true, false, false, true, false];

/// `z ↦ L_t^z` for `t = k/9^N`, constant on the open cells
/// `(i/3^N, (i+1)/3^N)` and zero outside `(0, 1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalTimeProfile {
    t: TernaryTime,
    depth: u32,
    /// Cell values in units of `3^{-depth}`.
    cells: Vec<u64>,
}

impl LocalTimeProfile {
    pub fn t(&self) -> &TernaryTime {
        &self.t
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn value(&self, i: usize) -> Rational {
        Rational::new(BigInt::from(self.cells[i]), pow3(self.depth))
    }

    /// `(i/3^N, (i+1)/3^N)`.
    pub fn cell(&self, i: usize) -> (Rational, Rational) {
        let w = pow3(self.depth);
        (Rational::new(BigInt::from(i), w.clone()), Rational::new(BigInt::from(i + 1), w))
    }

    /// `∫₀¹ L_t^z dz`.
    pub fn mass(&self) -> Rational {
        let total: u128 = self.cells.iter().map(|&v| u128::from(v)).sum();
        Rational::new(BigInt::from(total), pow3(2 * self.depth))
    }

    /// `∫_a^b L_t^z dz` for any rational `a ≤ b`.
    pub fn integral(&self, a: &Rational, b: &Rational) -> Rational {
        let w = Rational::from_integer(pow3(self.depth));
        let zero = Rational::zero();
        let (a, b) = (a.clone().max(zero.clone()) * &w, b.clone().min(Rational::one()) * &w);
        if a >= b {
            return zero;
        }
        // cell i spans [i, i+1] after scaling
        let first = a.floor().to_integer().to_usize().unwrap();
        let last = (b.ceil().to_integer().to_usize().unwrap()).min(self.cells.len());
        let mut acc = Rational::zero();
        for i in first..last {
            let lo = a.clone().max(int(i as i64));
            let hi = b.clone().min(int(i as i64 + 1));
            if lo < hi {
                acc += (hi - lo) * Rational::from_integer(BigInt::from(self.cells[i]));
            }
        }
        acc / (&w * &w)
    }

    /// `∫₀¹ L_t^z g(z) dz`.
    pub fn integrate(&self, g: &TestFunction) -> Rational {
        (0..self.cells.len())
            .filter(|&i| self.cells[i] != 0)
            .map(|i| {
                let (lo, hi) = self.cell(i);
                self.value(i) * g.integral(&lo, &hi)
            })
            .fold(Rational::zero(), |a, b| a + b)
    }
}

/// Default cap on the profile depth.
pub const PROFILE_DEPTH_CAP: u32 = 9;

/// Profile of `L_t` at `t = k/9^N`, with `N` the base-9 depth of `t`.
pub fn local_time_profile(t: &TernaryTime, cap: u32) -> Result<LocalTimeProfile> {
    let depth = t.nine_depth();
    if depth > cap {
        return Err(Error::DepthTooLarge { depth, cap });
    }
    let k = (t.value() * Rational::from_integer(pow3(2 * depth)))
        .to_integer()
        .to_u128()
        .unwrap();
    let cells = if k == 0 { vec![0; 3usize.pow(depth)] } else { profile_cells(k, depth) };
    Ok(LocalTimeProfile { t: t.clone(), depth, cells })
}

/// Cells of `L_{k/9^n}` in units of `3^{-n}`, for `1 ≤ k ≤ 9^n`.
fn profile_cells(k: u128, n: u32) -> Vec<u64> {
    if n == 0 {
        return vec![1];
    }
    let step = 9u128.pow(n - 1);
    let j = ((k - 1) / step) as usize;
    let sub = profile_cells(k - j as u128 * step, n - 1);
    let third = 3usize.pow(n - 1);
    let unit = 3u64.pow(n - 1);
    let mut cells = Vec::with_capacity(3 * third);
    for &v in &BASE_THIRDS[j] {
        cells.extend(std::iter::repeat_n(v * unit, third));
    }
    let s = CHILD_THIRD[j];
    for (i2, &v) in sub.iter().enumerate() {
        let i = if CHILD_REFLECTED[j] { (s + 1) * third - 1 - i2 } else { s * third + i2 };
        cells[i] += v;
    }
    cells
}

/// A polynomial `Σ c_i z^i` with exact coefficients, degree at most 6.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TestFunction {
    coeffs: Vec<Rational>,
}

impl TestFunction {
    pub const MAX_DEGREE: usize = 6;

    pub fn new(coeffs: Vec<Rational>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len() > Self::MAX_DEGREE + 1 {
            return Err(Error::InvalidArgument(format!(
                "polynomial needs 1 to {} coefficients",
                Self::MAX_DEGREE + 1
            )));
        }
        Ok(TestFunction { coeffs })
    }

    /// `z^d`.
    pub fn monomial(d: usize) -> Result<Self> {
        let mut c = vec![Rational::zero(); d + 1];
        c[d] = Rational::one();
        Self::new(c)
    }

    /// `poly:c0,c1,…` with coefficients in ascending degree.
    pub fn parse(s: &str) -> Result<Self> {
        let body = s
            .trim()
            .strip_prefix("poly:")
            .ok_or_else(|| Error::Parse(s.into(), "expected `poly:c0,c1,...`".into()))?;
        let coeffs = body.split(',').map(|c| parse_rational(c.trim())).collect::<Result<Vec<_>>>()?;
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn eval(&self, z: &Rational) -> Rational {
        self.coeffs.iter().rev().fold(Rational::zero(), |acc, c| acc * z + c)
    }

    /// `∫_u^v g(z) dz`.
    pub fn integral(&self, u: &Rational, v: &Rational) -> Rational {
        let prim = |z: &Rational| {
            self.coeffs
                .iter()
                .enumerate()
                .rev()
                .fold(Rational::zero(), |acc, (i, c)| (acc + c / int(i as i64 + 1)) * z)
        };
        prim(v) - prim(u)
    }
}

impl std::fmt::Display for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.coeffs.iter().map(format_rational).collect();
        write!(f, "poly:{}", parts.join(","))
    }
}

/// Both sides of the occupation identity on `[a, b]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OccupationReport {
    pub occupation: Rational,
    pub profile_integral: Rational,
}

impl OccupationReport {
    pub fn residual(&self) -> Rational {
        &self.occupation - &self.profile_integral
    }

    pub fn holds(&self) -> bool {
        self.occupation == self.profile_integral
    }
}

/// Time spent by `x` in `[a, b]` up to `t`, against `∫_a^b L_t^z dz`.
pub fn occupation_identity_check(
    t: &TernaryTime,
    a: &Rational,
    b: &Rational,
) -> Result<OccupationReport> {
    if triadic_exponent(a).is_none() || triadic_exponent(b).is_none() {
        return Err(Error::NonTriadicBounds(format_rational(a), format_rational(b)));
    }
    if a >= b {
        return Err(Error::InvalidArgument("need a < b".into()));
    }
    let profile = local_time_profile(t, u32::MAX)?;
    Ok(OccupationReport {
        occupation: occupation(t, a, b)?,
        profile_integral: profile.integral(a, b),
    })
}

/// `φ(c) = c / C_c` with `C_c = u(1 − 3u/4)`, `u = 3^{⌊−log₃c⌋}c`.
pub fn phi(c: &Rational) -> Result<Rational> {
    if !c.is_positive() {
        return Err(Error::NotPositive(format_rational(c)));
    }
    if *c > Rational::one() {
        return Err(Error::InvalidArgument(format!("φ needs c ≤ 1, got {}", format_rational(c))));
    }
    Ok(c / limit_constant(c)?)
}

/// `z ↦` total crossings of `[z − c/2, z + c/2]` on `[0, t]`, as the list of
/// open intervals where it is a nonzero constant.
pub fn crossing_profile(c: &Rational, t: &TernaryTime, exec: Exec) -> Result<Vec<(Rational, Rational, u64)>> {
    if !c.is_positive() {
        return Err(Error::NotPositive(format_rational(c)));
    }
    let blocks = prefix_blocks(t);
    if blocks.is_empty() {
        return Ok(Vec::new());
    }
    // every comparison is between z ± c/2 and a multiple of 3^{-depth}
    let depth = resolving_depth(c).max(blocks.iter().map(|b| b.depth).max().unwrap_or(0));
    if depth > 14 {
        return Err(Error::DepthTooLarge { depth, cap: 14 });
    }
    let w = pow3(depth);
    let half = c / int(2);
    let mut points: Vec<Rational> = Vec::new();
    let top = w.to_u64().unwrap();
    for k in 0..=top {
        let v = Rational::new(BigInt::from(k), w.clone());
        points.push(&v - &half);
        points.push(&v + &half);
    }
    points.sort();
    points.dedup();
    let cells: Vec<(Rational, Rational)> =
        points.windows(2).map(|p| (p[0].clone(), p[1].clone())).collect();
    let counted = exec::map(exec, cells, |(lo, hi)| -> Result<(Rational, Rational, u64)> {
        let mid = ExactReal::from((&lo + &hi) / int(2));
        let scan = CrossScan::new(&mid, c, depth)?;
        Ok((lo, hi, crossings_over(&scan, &blocks).total()))
    });
    let mut out = Vec::new();
    for cell in counted {
        let cell = cell?;
        if cell.2 > 0 {
            out.push(cell);
        }
    }
    Ok(out)
}

/// `∫ n^{z,c}(x, [0, t]) g(z) dz` for several test functions at once.
pub fn crossing_integrals(
    c: &Rational,
    gs: &[TestFunction],
    t: &TernaryTime,
    exec: Exec,
) -> Result<Vec<Rational>> {
    let cells = crossing_profile(c, t, exec)?;
    Ok(gs
        .iter()
        .map(|g| {
            cells.iter().fold(Rational::zero(), |acc, (lo, hi, n)| {
                acc + g.integral(lo, hi) * Rational::from_integer(BigInt::from(*n))
            })
        })
        .collect())
}

/// `∫ n^{z,c}(x, [0, t]) g(z) dz`, where `n^{z,c}` counts crossings of
/// `[z − c/2, z + c/2]`.
pub fn crossing_integral(c: &Rational, g: &TestFunction, t: &TernaryTime, exec: Exec) -> Result<Rational> {
    Ok(crossing_integrals(c, std::slice::from_ref(g), t, exec)?.remove(0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeakLimitRow {
    pub c: Rational,
    pub phi: Rational,
    pub crossing_integral: Rational,
    /// `φ(c)·crossing_integral`.
    pub normalized: Rational,
    /// `∫ L_t^z g(z) dz`.
    pub limit: Rational,
    pub abs_error: f64,
    pub rel_error: f64,
}

/// Normalised crossing integrals against the local-time integral, one row
/// per `c`.
pub fn weak_limit_check(
    g: &TestFunction,
    t: &TernaryTime,
    c_list: &[Rational],
    exec: Exec,
) -> Result<Vec<WeakLimitRow>> {
    if c_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("c list must be strictly decreasing".into()));
    }
    let limit = local_time_profile(t, PROFILE_DEPTH_CAP)?.integrate(g);
    c_list
        .iter()
        .map(|c| {
            let f = phi(c)?;
            let ci = crossing_integral(c, g, t, exec)?;
            let normalized = &f * &ci;
            let abs_error = rational_to_f64(&(&normalized - &limit).abs());
            let rel_error = if limit.is_zero() { abs_error } else { abs_error / rational_to_f64(&limit.abs()) };
            Ok(WeakLimitRow { c: c.clone(), phi: f, crossing_integral: ci, normalized, limit: limit.clone(), abs_error, rel_error })
        })
        .collect()
}
