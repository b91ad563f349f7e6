use std::cmp::Ordering;

use finegrain::matrix::Matrix;
use finegrain::numeric::*;
use proptest::prelude::*;

fn all_intervals(l: u32) -> Vec<DyadicInterval> {
    let mut out = Vec::new();
    for level in 0..=l {
        for index in 0..(1u64 << (l - level)) {
            out.push(DyadicInterval { level, index, universe_log: l });
        }
    }
    out
}

fn brute_separating(a: u64, b: u64, l: u32) -> Vec<DyadicInterval> {
    all_intervals(l)
        .into_iter()
        .filter(|iv| iv.half_contains(Side::Left, a) && iv.half_contains(Side::Right, b))
        .collect()
}

fn brute_covering(r: u64, l: u32, side: Side) -> Vec<DyadicInterval> {
    let mut v: Vec<_> = all_intervals(l).into_iter().filter(|iv| iv.half_contains(side, r)).collect();
    v.sort();
    v
}

fn sorted(mut v: Vec<DyadicInterval>) -> Vec<DyadicInterval> {
    v.sort();
    v
}

fn iv(level: u32, index: u64, universe_log: u32) -> DyadicInterval {
    DyadicInterval { level, index, universe_log }
}

#[test]
fn compare4_examples() {
    let c = Comparisons::new();
    let r = RestrictedReal::int;
    assert_eq!(c.compare4(&r(1), &r(2), &r(1), &r(3)), Ordering::Less);
    assert_eq!(c.compare4(&r(1), &RestrictedReal::infinity(), &r(5), &r(5)), Ordering::Greater);
    assert_eq!(c.compare4(&r(2), &r(3), &r(4), &r(1)), Ordering::Equal);
    assert_eq!(c.count(), 3);
    c.reset();
    assert_eq!(c.count(), 0);
}

#[test]
fn rational_arithmetic_is_exact() {
    let c = Comparisons::new();
    let third = RestrictedReal::ratio(1, 3).unwrap();
    let sum = third.add(&third).add(&third);
    assert_eq!(c.compare2(&sum, &RestrictedReal::int(1)), Ordering::Equal);
    let big = RestrictedReal::int(i64::MAX);
    let over = big.add(&big);
    assert_eq!(c.compare4(&big, &big, &over, &RestrictedReal::zero()), Ordering::Equal);
    assert_eq!(over.to_string(), "18446744073709551614");
}

#[test]
fn infinity_absorbs() {
    let c = Comparisons::new();
    let inf = RestrictedReal::infinity();
    let x = RestrictedReal::int(-7).add(&inf);
    assert!(x.is_infinite());
    assert_eq!(c.compare4(&inf, &RestrictedReal::zero(), &x, &RestrictedReal::int(3)), Ordering::Equal);
    assert!(inf.checked_neg().is_none());
}

#[test]
fn text_round_trip() {
    for s in ["5", "-3/7", "inf", "0"] {
        let x: RestrictedReal = s.parse().unwrap();
        assert_eq!(x.to_string(), s);
    }
    assert_eq!("4/2".parse::<RestrictedReal>().unwrap().to_string(), "2");
    assert!("1/0".parse::<RestrictedReal>().is_err());
    assert!("x".parse::<RestrictedReal>().is_err());
}

#[test]
#[should_panic(expected = "outside the comparison interface")]
fn tattling_value_refuses_reads() {
    let x = RestrictedReal::int(3).tattling();
    let _ = x.add(&RestrictedReal::int(1)).to_string();
}

#[test]
fn tattling_value_still_compares() {
    let c = Comparisons::new();
    let x = RestrictedReal::int(3).tattling();
    assert_eq!(c.compare3(&x, &x, &RestrictedReal::int(6)), Ordering::Equal);
    assert_eq!(format!("{x:?}"), "RestrictedReal(<sealed>)");
}

#[test]
fn perturbed_comparison_breaks_ties_by_eps() {
    let c = Comparisons::new();
    let p = |v, e| PerturbedReal::new(RestrictedReal::int(v), e);
    assert_eq!(c.compare4_perturbed(&p(1, 0), &p(1, 2), &p(2, 0), &p(0, 1)), Ordering::Greater);
    assert_eq!(c.compare4_perturbed(&p(1, 0), &p(0, 5), &p(2, 0), &p(0, 0)), Ordering::Less);
    assert_eq!(c.count(), 2);
}

#[test]
fn separating_interval_examples() {
    assert_eq!(separating_interval(3, 5, 3).unwrap(), iv(3, 0, 3));
    assert_eq!(brute_separating(3, 5, 3), vec![iv(3, 0, 3)]);
    assert_eq!(separating_interval(4, 5, 3).unwrap(), iv(1, 2, 3));
    assert_eq!(brute_separating(4, 5, 3), vec![iv(1, 2, 3)]);
    let found = separating_interval(4, 5, 3).unwrap();
    assert_eq!((found.start(), found.end()), (4, 6));
    assert_eq!(separating_interval(5, 5, 3), Err(NumericError::EqualRanks));
    assert_eq!(separating_interval(6, 5, 3), Err(NumericError::NotSeparable));
    assert!(matches!(separating_interval(1, 9, 3), Err(NumericError::OutOfRange { .. })));
}

#[test]
fn separating_interval_unique_exhaustive() {
    for l in 0..=7 {
        for a in 0..(1u64 << l) {
            for b in a + 1..(1u64 << l) {
                let brute = brute_separating(a, b, l);
                assert_eq!(brute.len(), 1, "a={a} b={b} l={l}");
                assert_eq!(separating_interval(a, b, l).unwrap(), brute[0]);
            }
        }
    }
}

#[test]
fn covering_halves_examples() {
    // 3 sits in the right half of [2,4), so only [0,8) has it on the left
    assert_eq!(brute_covering(3, 3, Side::Left), vec![iv(3, 0, 3)]);
    assert_eq!(covering_halves(3, 3, Side::Left), vec![iv(3, 0, 3)]);
    assert_eq!(covering_halves(0, 1, Side::Left), vec![iv(1, 0, 1)]);
    assert_eq!(covering_halves(0, 0, Side::Left), vec![]);
    assert_eq!(covering_halves(0, 0, Side::Right), vec![]);
}

#[test]
fn covering_halves_matches_brute_force() {
    for l in 0..=6 {
        for r in 0..(1u64 << l) {
            for side in [Side::Left, Side::Right] {
                let got = sorted(covering_halves(r, l, side));
                assert_eq!(got, brute_covering(r, l, side));
                assert!(got.len() <= l as usize);
            }
            let both = covering_halves(r, l, Side::Left).len() + covering_halves(r, l, Side::Right).len();
            assert_eq!(both, l as usize);
        }
    }
}

#[test]
fn covering_intersection_is_separating_interval() {
    for l in 0..=6 {
        for a in 0..(1u64 << l) {
            let left = covering_halves(a, l, Side::Left);
            for b in a + 1..(1u64 << l) {
                let right = covering_halves(b, l, Side::Right);
                let common: Vec<_> = left.iter().filter(|x| right.contains(x)).copied().collect();
                assert_eq!(common, vec![separating_interval(a, b, l).unwrap()]);
            }
        }
    }
}

#[test]
fn rank_list_examples() {
    let c = Comparisons::new();
    let vals: Vec<RestrictedReal> = [-2, 0, 1, 5].iter().map(|&v| RestrictedReal::int(v)).collect();
    let zero = RestrictedReal::zero();
    let items: Vec<_> = vals.iter().map(|v| Difference::new(v, &zero)).collect();
    let (list, ranks) = RankList::build(&items, &c).unwrap();
    assert_eq!(ranks, vec![0, 1, 2, 3]);
    assert_eq!(list.rank_of(&Difference::new(&vals[2], &zero), &c), Ok(2));
    let seven = RestrictedReal::int(7);
    assert_eq!(list.rank_of(&Difference::new(&seven, &zero), &c), Err(NumericError::NotAMember));

    let dup: Vec<RestrictedReal> = [0, 0, 3].iter().map(|&v| RestrictedReal::int(v)).collect();
    let items: Vec<_> = dup.iter().map(|v| Difference::new(v, &zero)).collect();
    let (list, ranks) = RankList::build(&items, &c).unwrap();
    assert_eq!(ranks, vec![0, 0, 1]);
    assert_eq!(list.len(), 2);
    assert_eq!(list.size(), 3);
    assert_eq!(list.rank_of(&Difference::new(&dup[2], &zero), &c), Ok(1));
}

#[test]
fn rank_list_rejects_infinite_items() {
    let c = Comparisons::new();
    let inf = RestrictedReal::infinity();
    let z = RestrictedReal::zero();
    assert!(RankList::build(&[Difference::new(&inf, &z)], &c).is_err());
}

#[test]
fn universe_log_is_tight() {
    assert_eq!(universe_log_for(0), 0);
    assert_eq!(universe_log_for(1), 0);
    assert_eq!(universe_log_for(2), 1);
    assert_eq!(universe_log_for(5), 3);
    assert_eq!(universe_log_for(8), 3);
    assert_eq!(universe_log_for(9), 4);
}

fn real_strategy() -> impl Strategy<Value = RestrictedReal> {
    prop_oneof![
        8 => (-20i64..20).prop_map(RestrictedReal::int),
        2 => ((-20i64..20), (1i64..5)).prop_map(|(p, q)| RestrictedReal::ratio(p, q).unwrap()),
        1 => Just(RestrictedReal::infinity()),
    ]
}

fn matrix_strategy(rows: usize, cols: usize) -> impl Strategy<Value = Matrix<RestrictedReal>> {
    prop::collection::vec(real_strategy(), rows * cols).prop_map(move |v| Matrix::from_vec(rows, cols, v).unwrap())
}

proptest! {
    #[test]
    fn rank_list_order_isomorphic(vals in prop::collection::vec((-30i64..30, -30i64..30), 1..40)) {
        let c = Comparisons::new();
        let reals: Vec<(RestrictedReal, RestrictedReal)> =
            vals.iter().map(|&(p, m)| (RestrictedReal::int(p), RestrictedReal::int(m))).collect();
        let items: Vec<_> = reals.iter().map(|(p, m)| Difference::new(p, m)).collect();
        let (_, ranks) = RankList::build(&items, &c).unwrap();
        for x in 0..vals.len() {
            for y in 0..vals.len() {
                let dx = vals[x].0 - vals[x].1;
                let dy = vals[y].0 - vals[y].1;
                prop_assert_eq!(dx.cmp(&dy), ranks[x].cmp(&ranks[y]));
            }
        }
    }

    #[test]
    fn pair_ranks_implement_fredman_trick(
        (a, b) in (1usize..5, 1usize..5, 1usize..5)
            .prop_flat_map(|(n1, d, n2)| (matrix_strategy(n1, d), matrix_strategy(d, n2)))
    ) {
        let (n1, d, n2) = (a.rows(), a.cols(), b.cols());
        let c = Comparisons::new();
        let ranks = PairRanks::build(&a, &b, &c);
        let ref_c = Comparisons::new();
        for r in 0..d {
            for k in 0..d {
                if r == k { continue; }
                let l = ranks.universe_log(r, k);
                for i in 0..n1 {
                    for j in 0..n2 {
                        let better = ref_c.compare4(a.get(i, k), b.get(k, j), a.get(i, r), b.get(r, j)) == Ordering::Less;
                        let ra = ranks.a_rank(r, k, i);
                        let rb = ranks.b_rank(r, k, j);
                        prop_assert!(ra < (1u64 << l) && rb < (1u64 << l));
                        prop_assert_eq!(better, ra < rb);
                    }
                }
            }
        }
    }
}
