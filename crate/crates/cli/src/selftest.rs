//! Exact-identity suites small enough to run on every invocation.

use std::fmt;

use anyhow::Result;

use peano_core::exact::{int, rat, ExactReal, Rational};
use peano_core::limits::{
    c_p_limit, count_m, count_m_formula, is_first_case, kstep_identity_check, max_k, one_step_check, window_count,
};
use peano_core::local_time::{local_time_profile, occupation_identity_check};
use peano_core::TernaryTime;

use crate::output::{Cell, Table};

#[derive(Debug)]
pub struct Failed(pub String);

impl fmt::Display for Failed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "self-test suite `{}` failed", self.0)
    }
}

impl std::error::Error for Failed {}

fn sqrt2_over(d: i64) -> ExactReal {
    ExactReal::new(Rational::default(), rat(1, d))
}

/// Cases run and whether all of them held.
type Suite = (&'static str, fn() -> peano_core::Result<(usize, bool)>);

fn closed_form() -> peano_core::Result<(usize, bool)> {
    let table = [(int(1), rat(1, 4)), (int(2), rat(1, 3)), (rat(1, 2), rat(5, 16)), (int(8), rat(8, 27))];
    let mut ok = true;
    for (p, want) in &table {
        ok &= c_p_limit(p)? == *want;
    }
    Ok((table.len(), ok))
}

fn one_step() -> peano_core::Result<(usize, bool)> {
    let mut n = 0;
    let mut ok = true;
    for c in [rat(1, 9), rat(1, 4), rat(2, 27), rat(1, 5)] {
        for r in [ExactReal::zero(), rat(1, 18).into(), sqrt2_over(10)] {
            ok &= one_step_check(&c, &r)?.holds();
            n += 1;
        }
    }
    Ok((n, ok))
}

fn kstep() -> peano_core::Result<(usize, bool)> {
    let mut n = 0;
    let mut ok = true;
    for (p1, q1) in [(1, 1), (2, 1), (1, 2)] {
        for theta in [ExactReal::zero(), rat(1, 2).into(), sqrt2_over(10)] {
            ok &= kstep_identity_check(2, &theta, p1, q1)?.holds();
            n += 1;
        }
    }
    Ok((n, ok))
}

fn counting() -> peano_core::Result<(usize, bool)> {
    let theta = sqrt2_over(10);
    let mut n = 0;
    let mut ok = true;
    for (p1, q1) in [(1, 1), (2, 1), (8, 1), (5, 7), (7, 4), (13, 20)] {
        for level in [3, 5] {
            let k = max_k(level, p1, q1)?;
            if !is_first_case(level, k, p1, q1) {
                continue;
            }
            let count = count_m(level, k, &theta, p1, q1)?;
            ok &= count_m_formula(level, k, p1, q1)? == count.into();
            ok &= window_count(level, k, &theta, p1, q1)? == count + 1;
            n += 1;
        }
    }
    Ok((n, ok))
}

fn occupation() -> peano_core::Result<(usize, bool)> {
    let mut n = 0;
    let mut ok = true;
    for k in 1..=81u128 {
        let t = TernaryTime::from_nine(k, 2)?;
        let profile = local_time_profile(&t, 2)?;
        ok &= profile.mass() == t.value();
        for i in 0..9 {
            for j in i + 1..=9 {
                ok &= occupation_identity_check(&t, &rat(i, 9), &rat(j, 9))?.holds();
                n += 1;
            }
        }
    }
    Ok((n, ok))
}

const SUITES: [Suite; 5] = [
    ("closed_form", closed_form),
    ("one_step_identity", one_step),
    ("kstep_identity", kstep),
    ("counting", counting),
    ("occupation_identity", occupation),
];

pub fn run() -> Result<Table> {
    let mut table = Table::new(["suite", "cases", "status"]);
    for (name, suite) in SUITES {
        let (cases, ok) = suite()?;
        table.push(vec![
            Cell::Text(name.into()),
            Cell::Int(cases as i128),
            Cell::Text(if ok { "pass" } else { "fail" }.into()),
        ]);
    }
    Ok(table)
}

pub fn first_failure(table: &Table) -> Option<String> {
    table.rows.iter().find_map(|row| match (&row[0], &row[2]) {
        (Cell::Text(name), Cell::Text(status)) if status == "fail" => Some(name.clone()),
        _ => None,
    })
}
