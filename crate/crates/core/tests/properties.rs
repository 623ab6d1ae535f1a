use num_traits::{One, Zero};
use proptest::prelude::*;

use peano_core::curve::{x_eval, y_eval, TernaryTime};
use peano_core::exact::{int, rat, ExactReal, Rational};
use peano_core::lebesgue::{crossings, qv, qv_direct, ttv_polygon, Grid};
use peano_core::limits::one_step_check;
use peano_core::local_time::local_time_profile;
use peano_core::Exec;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 256, ..ProptestConfig::default() }
}

fn digits(max: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..3, 0..=max)
}

fn time(max: usize) -> impl Strategy<Value = TernaryTime> {
    digits(max).prop_map(|d| TernaryTime::from_digits(d).unwrap())
}

fn offset() -> impl Strategy<Value = ExactReal> {
    (-60i64..60, 1i64..40, -8i64..8, 1i64..20)
        .prop_map(|(a, b, s, d)| ExactReal::new(rat(a, b), rat(s, d)))
}

fn scale() -> impl Strategy<Value = Rational> {
    (1i64..30, 2i64..400).prop_map(|(p, q)| rat(p, q)).prop_filter("c ≤ 1", |c| *c <= Rational::one())
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn self_similarity(d in digits(10), j in 0usize..9) {
        let u = TernaryTime::from_digits(d.clone()).unwrap();
        let mut child = vec![(j / 3) as u8, (j % 3) as u8];
        child.extend(d);
        let t = TernaryTime::from_digits(child).unwrap();
        prop_assert_eq!(t.value(), (u.value() + int(j as i64)) / int(9));
        let xu = x_eval(&u);
        let inner = if j % 3 == 1 { Rational::one() - xu } else { xu };
        prop_assert_eq!(x_eval(&t), (int((j / 3) as i64) + inner) / int(3));
    }

    #[test]
    fn reflection(t in time(12)) {
        let m = TernaryTime::from_rational(&(Rational::one() - t.value())).unwrap();
        prop_assert_eq!(x_eval(&m), Rational::one() - x_eval(&t));
        prop_assert_eq!(y_eval(&m), Rational::one() - y_eval(&t));
    }

    #[test]
    fn trailing_twos_are_well_defined(d in digits(12)) {
        let tail = TernaryTime::with_tail(d, true).unwrap();
        let v = tail.value();
        let finite = TernaryTime::from_rational(&v).unwrap();
        prop_assert_eq!(x_eval(&tail), x_eval(&finite));
        prop_assert_eq!(y_eval(&tail), y_eval(&finite));
    }

    #[test]
    fn values_in_unit_square(t in time(14)) {
        let (x, y) = (x_eval(&t), y_eval(&t));
        prop_assert!(!(x < Rational::zero()) && x <= Rational::one());
        prop_assert!(!(y < Rational::zero()) && y <= Rational::one());
    }

    #[test]
    fn qv_is_monotone_in_t(c in scale(), r in offset(), a in time(8), b in time(8)) {
        let grid = Grid::new(c, r).unwrap();
        let (s, t) = if a.value() <= b.value() { (a, b) } else { (b, a) };
        prop_assert!(qv(&grid, &s).unwrap() <= qv(&grid, &t).unwrap());
    }

    #[test]
    fn memoised_matches_direct(c in scale(), r in offset(), t in time(6)) {
        let grid = Grid::new(c, r).unwrap();
        prop_assert_eq!(qv(&grid, &t).unwrap(), qv_direct(&grid, &t, Exec::Sequential).unwrap());
    }

    #[test]
    fn one_step_identity(c in scale(), r in offset()) {
        prop_assume!(&c * int(3) <= Rational::one());
        prop_assert!(one_step_check(&c, &r).unwrap().holds());
    }

    #[test]
    fn ttv_is_monotone_in_c(p in 1i64..27, q in 1i64..27, t in time(6)) {
        let (lo, hi) = (p.min(q), p.max(q));
        let (c1, c2) = (rat(lo, 81), rat(hi, 81));
        prop_assert!(ttv_polygon(&c2, &t, 8).unwrap() <= ttv_polygon(&c1, &t, 8).unwrap());
    }

    #[test]
    fn crossing_parity(zn in -20i64..120, zs in -4i64..5, c in scale(), t in time(6)) {
        let z = ExactReal::new(rat(zn, 100), rat(zs, 101));
        let n = crossings(&z, &c, &t).unwrap();
        prop_assert!(n.down.abs_diff(n.up) <= 1);
    }

    #[test]
    fn profile_is_monotone_in_t(a in 0u128..=729, b in 0u128..=729, i in 0i64..27, w in 1i64..28) {
        let (s, t) = (a.min(b), a.max(b));
        let ls = local_time_profile(&TernaryTime::from_nine(s, 3).unwrap(), 3).unwrap();
        let lt = local_time_profile(&TernaryTime::from_nine(t, 3).unwrap(), 3).unwrap();
        let (lo, hi) = (rat(i, 27), rat((i + w).min(27), 27));
        prop_assert!(ls.integral(&lo, &hi) <= lt.integral(&lo, &hi));
    }
}
