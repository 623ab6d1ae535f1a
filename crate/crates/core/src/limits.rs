//! The limit constant `C_p`, exact checks of the block recursions for grid
//! quadratic variation, the counting lemma behind the limit, and
//! convergence sweeps over grid families `(p/3^n)ℤ + r/3^n`.

use std::collections::HashMap;
use std::sync::Mutex;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::curve::TernaryTime;
use crate::error::{Error, Result};
use crate::exact::{
    floor_neg_log3, format_exact_real, format_rational, int, is_divisible_by_three, pow3,
    rational_to_f64, scale_pow3, ExactReal, Rational,
};
use crate::exec::{self, Exec};
use crate::lebesgue::{qv, qv_direct, Grid};

/// `u = 3^{⌊−log₃p⌋}·p`, the representative of `p` in `(1/3, 1]`.
pub fn scaled_unit(p: &Rational) -> Result<Rational> {
    Ok(scale_pow3(p, floor_neg_log3(p)?))
}

/// `u·(1 − 3u/4)` for any `p > 0`, without the divisibility requirement.
pub fn limit_constant(p: &Rational) -> Result<Rational> {
    let u = scaled_unit(p)?;
    Ok(&u * (Rational::one() - &u * Rational::new(3.into(), 4.into())))
}

/// The limit of `[x]_1` along grids `(p/3^n)ℤ + r/3^n` for generic `r`.
pub fn c_p_limit(p: &Rational) -> Result<Rational> {
    check_coprime_to_three(p)?;
    limit_constant(p)
}

fn check_coprime_to_three(p: &Rational) -> Result<()> {
    if !p.is_positive() {
        return Err(Error::NotPositive(format_rational(p)));
    }
    if is_divisible_by_three(p.numer()) || is_divisible_by_three(p.denom()) {
        return Err(Error::DivisibleByThree(format_rational(p)));
    }
    Ok(())
}

/// Both sides of an exact identity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdentityReport {
    pub lhs: Rational,
    pub rhs: Rational,
}

impl IdentityReport {
    pub fn residual(&self) -> Rational {
        &self.lhs - &self.rhs
    }

    pub fn holds(&self) -> bool {
        self.lhs == self.rhs
    }
}

fn indicator(v: &ExactReal) -> Rational {
    if v.frac().is_zero() {
        Rational::zero()
    } else {
        Rational::one()
    }
}

/// `[x]_1^{c,r}` against the split into thirds: the three rescaled grids
/// plus `c²` for each of `1/3`, `2/3` that is not a grid value.
/// Needs `c ≤ 1/3` so that every third meets the grid.
pub fn one_step_check(c: &Rational, r: &ExactReal) -> Result<IdentityReport> {
    if c * int(3) > Rational::one() {
        return Err(Error::InvalidArgument(format!("one-step split needs c ≤ 1/3, got {c}")));
    }
    let one = TernaryTime::one();
    let grid = Grid::new(c.clone(), r.clone())?;
    let lhs = qv(&grid, &one)?;
    let c3 = c * int(3);
    let r3 = r * &int(3);
    let mut rhs = Rational::zero();
    for s in 0..3 {
        let sub = Grid::new(c3.clone(), &r3 - &int(s))?;
        rhs += qv_direct(&sub, &one, Exec::Sequential)? / int(3);
    }
    let c2 = c * c;
    for v in [Rational::new(1.into(), 3.into()), Rational::new(2.into(), 3.into())] {
        // 1 unless v lies on the grid
        rhs += indicator(&(&(&ExactReal::from(v) - r) / c)) * &c2;
    }
    Ok(IdentityReport { lhs, rhs })
}

/// Parameters `c_n = p'/(3^n q')`, offset `θ·c_n` of the k-step recursion.
#[derive(Clone, Debug)]
struct KStep {
    n: i64,
    k: u32,
    theta: ExactReal,
    p1: BigInt,
    q1: BigInt,
}

impl KStep {
    fn new(n: i64, k: u32, theta: &ExactReal, p1: u64, q1: u64) -> Result<Self> {
        let p = Rational::new(p1.into(), q1.into());
        check_coprime_to_three(&p)?;
        if p.numer() != &BigInt::from(p1) {
            return Err(Error::InvalidArgument(format!("{p1}/{q1} is not in lowest terms")));
        }
        // n − (k − 1) ∈ 𝕄, i.e. p/3^{n−k+1} ≤ 1/3
        let m_edge = n - i64::from(k) + 1;
        if scale_pow3(&p, -m_edge) > Rational::new(1.into(), 3.into()) {
            return Err(Error::OutOfM { n: m_edge });
        }
        Ok(KStep { n, k, theta: theta.clone(), p1: p1.into(), q1: q1.into() })
    }

    fn p(&self) -> Rational {
        Rational::new(self.p1.clone(), self.q1.clone())
    }

    /// `3^n q' / (3^v p')`.
    fn rho(&self, v: u32) -> Rational {
        scale_pow3(&Rational::new(self.q1.clone(), self.p1.clone()), self.n - i64::from(v))
    }

    /// `θ − Σ_v i_v ρ_v` over all digit strings of length `len`, with the
    /// last digit nonzero when `last_nonzero` is set.
    fn offsets(&self, len: u32, last_nonzero: bool) -> Vec<ExactReal> {
        let mut out = vec![self.theta.clone()];
        for v in 1..=len {
            let rho = &self.rho(v);
            let digits: &[i64] = if last_nonzero && v == len { &[1, 2] } else { &[0, 1, 2] };
            out = out
                .iter()
                .flat_map(|o| digits.iter().map(move |&i| o - &(rho * int(i))))
                .collect();
        }
        out
    }
}

/// Maximal `k` with `n − (k − 1) ∈ 𝕄`: `n + ⌊log₃(q'/p')⌋`.
pub fn max_k(n: i64, p1: u64, q1: u64) -> Result<i64> {
    let p = Rational::new(p1.into(), q1.into());
    Ok(n + floor_neg_log3(&p)?)
}

/// The indicator double sum of the k-step recursion.
pub fn indicator_sum(n: i64, k: u32, theta: &ExactReal, p1: u64, q1: u64) -> Result<Rational> {
    if k == 0 {
        return Ok(Rational::zero());
    }
    let ks = KStep::new(n, k, theta, p1, q1)?;
    Ok(indicator_sum_of(&ks))
}

fn indicator_sum_of(ks: &KStep) -> Rational {
    let base = scale_pow3(&ks.p(), -ks.n);
    let mut total = Rational::zero();
    for m in 1..=ks.k {
        let hits: usize = ks
            .offsets(m, true)
            .iter()
            .filter(|o| !o.frac().is_zero())
            .count();
        let weight = scale_pow3(&base, i64::from(m) - 1);
        total += scale_pow3(&(&weight * &weight), -(i64::from(m) - 1))
            * Rational::from_integer(BigInt::from(hits));
    }
    total
}

/// `(9^k − 1)/(4·9^n)·(p'/q')²`, the indicator sum when no offset is an
/// integer.
pub fn indicator_sum_closed_form(n: i64, k: u32, p1: u64, q1: u64) -> Rational {
    let p = Rational::new(p1.into(), q1.into());
    let nine_k = Rational::from_integer(pow3(2 * k));
    (nine_k - Rational::one()) / int(4) * scale_pow3(&(&p * &p), -2 * n)
}

/// The k-step recursion at the maximal `k`.
pub fn kstep_identity_check(n: i64, theta: &ExactReal, p1: u64, q1: u64) -> Result<IdentityReport> {
    let k = max_k(n, p1, q1)?;
    if k < 1 {
        return Err(Error::OutOfM { n });
    }
    kstep_identity_check_k(n, k as u32, theta, p1, q1, Exec::Parallel)
}

/// `[x]_1^{c_n, θc_n}` (memoised engine) against `3^{-k}·Σ` of the sub-grid
/// variations (plain descent) plus the indicator sum.
pub fn kstep_identity_check_k(
    n: i64,
    k: u32,
    theta: &ExactReal,
    p1: u64,
    q1: u64,
    exec: Exec,
) -> Result<IdentityReport> {
    let ks = KStep::new(n, k, theta, p1, q1)?;
    let one = TernaryTime::one();
    let cn = scale_pow3(&ks.p(), -n);
    let lhs = qv(&Grid::new(cn.clone(), &ks.theta * &cn)?, &one)?;
    let ck = scale_pow3(&cn, i64::from(k));
    let grids = ks
        .offsets(k, false)
        .into_iter()
        .map(|o| Grid::new(ck.clone(), &o.frac() * &ck))
        .collect::<Result<Vec<_>>>()?;
    let parts = exec::map(exec, grids, |g| qv_direct(&g, &one, Exec::Sequential));
    let mut sum = Rational::zero();
    for p in parts {
        sum += p?;
    }
    let rhs = scale_pow3(&sum, -i64::from(k)) + indicator_sum_of(&ks);
    Ok(IdentityReport { lhs, rhs })
}

/// Whether `θ` avoids every value `{q'·a·3^b/p'}` with `3 ∤ a` and
/// `b ≥ −⌊log₃(q'/p')⌋`, i.e. `θ` is not a multiple of
/// `1/(3^{⌊log₃(q'/p')⌋}·p')`.
pub fn theta_is_generic(theta: &ExactReal, p1: u64, q1: u64) -> Result<bool> {
    let p = Rational::new(p1.into(), q1.into());
    let f = -floor_neg_log3(&p)?;
    let step = scale_pow3(&Rational::new(BigInt::one(), BigInt::from(p1)), -f);
    let ratio = theta / &step;
    Ok(!ratio.frac().is_zero())
}

/// Shape of the counting problem: `m0 = 3^s p'`, `ρ = 3^n q'/(3^k p')`.
struct Counting {
    s: u32,
    e: u32,
    m0: BigInt,
    rho: Rational,
}

impl Counting {
    fn new(n: i64, k: i64, p1: u64, q1: u64) -> Result<Self> {
        let p = Rational::new(p1.into(), q1.into());
        check_coprime_to_three(&p)?;
        let s = (k - n).max(0);
        let e = s - (k - n);
        let rho = scale_pow3(&Rational::new(q1.into(), p1.into()), n - k);
        let (s, e) = (u32::try_from(s), u32::try_from(e));
        let (Ok(s), Ok(e)) = (s, e) else {
            return Err(Error::InvalidArgument("k − n out of range".into()));
        };
        Ok(Counting { s, e, m0: pow3(s) * p1, rho })
    }

    fn count_with(&self, start: &ExactReal) -> u64 {
        let bound = ExactReal::from(&self.rho - Rational::one());
        let m0 = self.m0.to_u64().expect("period fits in u64");
        (0..m0)
            .filter(|&m| {
                let v = start - &(&self.rho * &int(m as i64));
                v.frac() <= bound
            })
            .count() as u64
    }
}

/// Whether `3^k p'/(3^n q') > 1/2`.
pub fn is_first_case(n: i64, k: i64, p1: u64, q1: u64) -> bool {
    let r = scale_pow3(&Rational::new(p1.into(), q1.into()), k - n);
    r > Rational::new(1.into(), 2.into())
}

/// Number of `M ∈ [0, 3^{max(k−n,0)}p')` with `{θ − ρM} ≤ ρ − 1`.
pub fn count_m(n: i64, k: i64, theta: &ExactReal, p1: u64, q1: u64) -> Result<u64> {
    Ok(Counting::new(n, k, p1, q1)?.count_with(theta))
}

/// `N = 3^{max(k−n,0)−(k−n)}q' − 3^{max(k−n,0)}p'`.
pub fn count_m_formula(n: i64, k: i64, p1: u64, q1: u64) -> Result<BigInt> {
    let c = Counting::new(n, k, p1, q1)?;
    Ok(pow3(c.e) * q1 - pow3(c.s) * p1)
}

/// The same count started from the left end `l/m0` of the cell of
/// width `1/m0` that contains `θ`.
pub fn window_count(n: i64, k: i64, theta: &ExactReal, p1: u64, q1: u64) -> Result<u64> {
    let c = Counting::new(n, k, p1, q1)?;
    let cell = (&theta.frac() * &Rational::from_integer(c.m0.clone())).floor();
    let left = ExactReal::from(Rational::new(cell, c.m0.clone()));
    Ok(c.count_with(&left))
}

/// Grids `(p/3^n)ℤ + r/3^n` with `p = p'/q'`, `3 ∤ p'q'`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridFamily {
    p: Rational,
    r: ExactReal,
}

impl GridFamily {
    pub fn new(p: Rational, r: ExactReal) -> Result<Self> {
        check_coprime_to_three(&p)?;
        Ok(GridFamily { p, r })
    }

    pub fn p(&self) -> &Rational {
        &self.p
    }

    pub fn r(&self) -> &ExactReal {
        &self.r
    }

    pub fn c_n(&self, n: i64) -> Rational {
        scale_pow3(&self.p, -n)
    }

    pub fn r_n(&self, n: i64) -> ExactReal {
        &self.r * &scale_pow3(&Rational::one(), -n)
    }

    pub fn grid(&self, n: i64) -> Result<Grid> {
        Grid::new(self.c_n(n), self.r_n(n))
    }

    /// `r/p` reduced mod 1: the offset in units of the spacing.
    pub fn theta(&self) -> ExactReal {
        (&self.r / &self.p).frac()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub n: i64,
    pub c_n: Rational,
    pub r_n: ExactReal,
    pub t: TernaryTime,
    pub qv: Rational,
    pub limit: Rational,
    /// `|qv − limit| / limit`, or `|qv|` when the limit is 0.
    pub rel_error: f64,
}

type SweepKey = (String, String, i64, String);

/// Quadratic variations already computed, keyed by spacing, offset, `n`
/// and time.
#[derive(Debug, Default)]
pub struct SweepCache {
    map: Mutex<HashMap<SweepKey, Rational>>,
}

impl SweepCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get_or_compute(&self, family: &GridFamily, n: i64, t: &TernaryTime) -> Result<Rational> {
        let key = (
            format_rational(&family.p),
            format_exact_real(&family.theta()),
            n,
            format_rational(&t.value()),
        );
        if let Some(v) = self.map.lock().unwrap().get(&key) {
            return Ok(v.clone());
        }
        let v = qv(&family.grid(n)?, t)?;
        self.map.lock().unwrap().insert(key, v.clone());
        Ok(v)
    }
}

/// One row per `n ∈ [n_min, n_max]`: `qv` along the `n`-th grid on `[0, t]`
/// against `C_p·t`. Rows are computed independently and returned in order
/// of `n`.
pub fn convergence_sweep(
    family: &GridFamily,
    t: &TernaryTime,
    n_min: i64,
    n_max: i64,
    cap: i64,
    cache: &SweepCache,
    exec: Exec,
) -> Result<Vec<SweepRow>> {
    if n_max > cap {
        return Err(Error::DepthTooLarge {
            depth: n_max.max(0) as u32,
            cap: cap.max(0) as u32,
        });
    }
    if n_min > n_max {
        return Err(Error::InvalidArgument(format!("empty range {n_min}..={n_max}")));
    }
    let limit = c_p_limit(&family.p)? * t.value();
    let ns: Vec<i64> = (n_min..=n_max).collect();
    let rows = exec::map(exec, ns, |n| -> Result<SweepRow> {
        let v = cache.get_or_compute(family, n, t)?;
        let rel_error = if limit.is_zero() {
            rational_to_f64(&v).abs()
        } else {
            rational_to_f64(&((&v - &limit).abs() / &limit))
        };
        Ok(SweepRow {
            n,
            c_n: family.c_n(n),
            r_n: family.r_n(n),
            t: t.clone(),
            qv: v,
            limit: limit.clone(),
            rel_error,
        })
    });
    rows.into_iter().collect()
}

/// Whether `t ↦ qv` is non-decreasing over `t = i/9^m`, `i = 0..=9^m`, for
/// the `n`-th grid of the family.
pub fn monotone_spot_check(family: &GridFamily, n: i64, m: u32) -> Result<bool> {
    let grid = family.grid(n)?;
    let mut prev = Rational::zero();
    for i in 0..=9u128.pow(m) {
        let v = qv(&grid, &TernaryTime::from_nine(i, m)?)?;
        if v < prev {
            return Ok(false);
        }
        prev = v;
    }
    Ok(true)
}
