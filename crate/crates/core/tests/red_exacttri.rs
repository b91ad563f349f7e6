mod common;

use std::cmp::Ordering;

use common::*;
use finegrain::instances::*;
use finegrain::ledger::ReductionError;
use finegrain::matrix::Matrix;
use finegrain::numeric::Comparisons;
use finegrain::oracles::*;
use finegrain::red_apsp::LasVegas;
use finegrain::red_exacttri::*;
use proptest::prelude::*;

fn cfg() -> LasVegas {
    LasVegas::default()
}

fn sum(a: &Matrix<Real>, b: &Matrix<Real>, i: usize, j: usize, k: usize) -> Real {
    a.get(i, k).add(b.get(k, j))
}

fn less(c: &Comparisons, x: &Real, y: &Real) -> bool {
    c.compare2(x, y) == Ordering::Less
}

/// Indices whose sum lies strictly inside the bracket, by direct scan.
fn scan_between(a: &Matrix<Real>, b: &Matrix<Real>, st: &PredSuccState, i: usize, j: usize, c: &Comparisons) -> Vec<usize> {
    (0..a.cols())
        .filter(|&k| {
            let s = sum(a, b, i, j, k);
            st.lo.get(i, j).map_or(true, |l| less(c, &sum(a, b, i, j, l), &s))
                && st.hi.get(i, j).map_or(true, |h| less(c, &s, &sum(a, b, i, j, h)))
        })
        .collect()
}

/// A random bracket consistent with `C`, built from a scan.
fn random_state(a: &Matrix<Real>, b: &Matrix<Real>, seed: u64, c: &Comparisons) -> PredSuccState {
    use rand::Rng;
    let mut rng = rng_for(seed);
    let (n1, n2, d) = (a.rows(), b.cols(), a.cols());
    let target = Matrix::from_fn(n1, n2, |i, j| sum(a, b, i, j, rng.gen_range(0..d)));
    let mut st = PredSuccState::open(target);
    for i in 0..n1 {
        for j in 0..n2 {
            let t = st.c.get(i, j).clone();
            let below: Vec<usize> = (0..d).filter(|&k| c.compare2(&sum(a, b, i, j, k), &t) != Ordering::Greater).collect();
            let above: Vec<usize> = (0..d).filter(|&k| c.compare2(&sum(a, b, i, j, k), &t) == Ordering::Greater).collect();
            if !below.is_empty() && rng.gen_bool(0.8) {
                st.lo.set(i, j, Some(below[rng.gen_range(0..below.len())]));
            }
            if !above.is_empty() && (st.lo.get(i, j).is_none() || rng.gen_bool(0.8)) {
                st.hi.set(i, j, Some(above[rng.gen_range(0..above.len())]));
            }
        }
    }
    st
}

fn same_sum(a: &Matrix<Real>, b: &Matrix<Real>, i: usize, j: usize, x: Option<usize>, y: Option<usize>, c: &Comparisons) -> bool {
    match (x, y) {
        (None, None) => true,
        (Some(x), Some(y)) => same(c, &sum(a, b, i, j, x), &sum(a, b, i, j, y)),
        _ => false,
    }
}

fn check_pred_succ(a: &Matrix<Real>, b: &Matrix<Real>, t: &Matrix<Real>, got: &PredSuccState, c: &Comparisons) {
    let want = pred_succ_scan(a, b, t, c);
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let w = want.get(i, j);
            assert!(same_sum(a, b, i, j, *got.lo.get(i, j), w.pred, c), "pred at ({i},{j}): {:?} vs {:?}", got.lo.get(i, j), w.pred);
            assert!(same_sum(a, b, i, j, *got.hi.get(i, j), w.succ, c), "succ at ({i},{j}): {:?} vs {:?}", got.hi.get(i, j), w.succ);
        }
    }
}

#[test]
fn adjacent_bracket_has_no_triangles() {
    let c = Comparisons::new();
    let a = imat(&[&[1, 2, 3]]);
    let b = imat(&[&[0], &[0], &[0]]);
    let mut st = PredSuccState::open(imat(&[&[1]]));
    st.lo.set(0, 0, Some(0));
    st.hi.set(0, 0, Some(1));
    let out = build_exacttri_graphs(&a, &b, &st, &c).unwrap();
    for t in &out.targets {
        assert_eq!(ae_sparse_tri(&t.graph).count, vec![0]);
    }
}

#[test]
fn planted_middle_value_gives_one_triangle() {
    let c = Comparisons::new();
    // sums 0, 10, 5, 20: only index 2 sits strictly between 0 and 10
    let a = imat(&[&[0, 4, 2, 9]]);
    let b = imat(&[&[0], &[6], &[3], &[11]]);
    let mut st = PredSuccState::open(imat(&[&[1]]));
    st.lo.set(0, 0, Some(0));
    st.hi.set(0, 0, Some(1));
    assert_eq!(scan_between(&a, &b, &st, 0, 0, &c), vec![2]);
    let out = build_exacttri_graphs(&a, &b, &st, &c).unwrap();
    assert_eq!(out.targets.len(), 1);
    let t = &out.targets[0];
    let ans = ae_sparse_tri(&t.graph);
    assert_eq!(ans.count, vec![1]);
    assert_eq!(t.middle_index(ans.witness[0].unwrap()), Some(2));
}

#[test]
fn triangle_counts_equal_bracket_scan() {
    let c = Comparisons::new();
    for seed in 0..20 {
        let a = random_matrix(7, 4, 5, 0.1, seed);
        let b = random_matrix(4, 6, 5, 0.1, seed + 100);
        let st = random_state(&a, &b, seed, &c);
        let out = build_exacttri_graphs(&a, &b, &st, &c).unwrap();
        for t in &out.targets {
            let ans = ae_sparse_tri(&t.graph);
            for (q, &(i, j)) in t.pairs.iter().enumerate() {
                let want = scan_between(&a, &b, &st, i as usize, j as usize, &c).len() as u64;
                assert_eq!(ans.count[q], want, "seed {seed} pair ({i},{j})");
            }
        }
    }
}

#[test]
fn ledger_bounds_hold_n32_d4() {
    let c = Comparisons::new();
    let a = random_matrix(32, 4, 50, 0.0, 7);
    let b = random_matrix(4, 32, 50, 0.0, 8);
    let st = random_state(&a, &b, 9, &c);
    let out = build_exacttri_graphs(&a, &b, &st, &c).unwrap();
    assert!(out.ledger.checks.iter().any(|k| k.name == "edges per two-sided graph"));
    for k in &out.ledger.checks {
        assert!(k.holds(), "{k:?}");
    }
}

#[test]
fn shape_mismatch_is_rejected() {
    let c = Comparisons::new();
    let st = PredSuccState::open(imat(&[&[0]]));
    let err = build_exacttri_graphs(&imat(&[&[1, 2]]), &imat(&[&[1]]), &st, &c).unwrap_err();
    assert!(matches!(err, ReductionError::ShapeMismatch(_)));
    let bad = PredSuccState::open(imat(&[&[0, 0]]));
    let err = build_exacttri_graphs(&imat(&[&[1]]), &imat(&[&[1]]), &bad, &c).unwrap_err();
    assert!(matches!(err, ReductionError::ShapeMismatch(_)));
}

#[test]
fn single_inner_index_has_nothing_between() {
    let c = Comparisons::new();
    let a = random_matrix(4, 1, 5, 0.0, 1);
    let b = random_matrix(1, 4, 5, 0.0, 2);
    let mut st = PredSuccState::open(Matrix::from_fn(4, 4, |_, _| Real::zero()));
    st.hi = Matrix::from_fn(4, 4, |_, _| Some(0));
    let got = solve_variant2(&a, &b, &st, &ReferenceTriangles, &c).unwrap();
    assert!(got.data().iter().all(Option::is_none));
}

#[test]
fn sorted_rows_match_binary_search() {
    let c = Comparisons::new();
    // sums along the inner index are 0, 2, 4, ..., 14 for every pair
    let d = 8;
    let a = Matrix::from_fn(3, d, |_, k| Real::int(2 * k as i64));
    let b = Matrix::from_fn(d, 3, |_, _| Real::zero());
    for (lo, hi) in [(0, 7), (2, 3), (1, 5), (6, 7)] {
        let mut st = PredSuccState::open(Matrix::from_fn(3, 3, |_, _| Real::int(2 * lo as i64)));
        st.lo = Matrix::from_fn(3, 3, |_, _| Some(lo));
        st.hi = Matrix::from_fn(3, 3, |_, _| Some(hi));
        let got = solve_variant2(&a, &b, &st, &ReferenceTriangles, &c).unwrap();
        for g in got.data() {
            match g {
                Some(k) => assert!(lo < *k && *k < hi),
                None => assert_eq!(hi, lo + 1),
            }
        }
    }
}

#[test]
fn variant2_matches_scan_n16_d4() {
    let c = Comparisons::new();
    for seed in 0..10 {
        let a = random_matrix(16, 4, 8, 0.05, seed);
        let b = random_matrix(4, 16, 8, 0.05, seed + 50);
        let st = random_state(&a, &b, seed, &c);
        let got = solve_variant2(&a, &b, &st, &ReferenceTriangles, &c).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                let want = scan_between(&a, &b, &st, i, j, &c);
                match got.get(i, j) {
                    Some(k) => assert!(want.contains(k), "seed {seed} ({i},{j})"),
                    None => assert!(want.is_empty(), "seed {seed} ({i},{j})"),
                }
            }
        }
    }
}

/// Reports a middle node that is not inside the bracket.
struct LyingOracle;

impl TriangleOracle for LyingOracle {
    fn witnesses(&self, g: &SparseGraph) -> Vec<Option<u32>> {
        let parts = g.parts.as_ref().unwrap();
        let fake = (0..g.node_count as u32).find(|&v| parts[v as usize] == MIDDLE);
        vec![fake; g.query_count()]
    }
    fn counts(&self, g: &SparseGraph) -> Vec<u64> {
        vec![1; g.query_count()]
    }
}

#[test]
fn lying_witness_is_caught() {
    let c = Comparisons::new();
    // index 2 is inside the bracket for row 0 only, so row 1 gets a bad witness
    let a = imat(&[&[0, 10, 5], &[0, 10, 20]]);
    let b = imat(&[&[0], &[0], &[0]]);
    let mut st = PredSuccState::open(imat(&[&[0], &[0]]));
    st.lo = Matrix::from_fn(2, 1, |_, _| Some(0));
    st.hi = Matrix::from_fn(2, 1, |_, _| Some(1));
    let err = solve_variant2(&a, &b, &st, &LyingOracle, &c).unwrap_err();
    assert!(matches!(err, ReductionError::OracleProtocol(_)));
    let err = variant2_via_counts(&a, &b, &st, &LyingOracle, 1, cfg(), &c).unwrap_err();
    assert!(matches!(err, ReductionError::OracleProtocol(_)));
}

#[test]
fn target_below_everything() {
    let c = Comparisons::new();
    let a = imat(&[&[3, 1, 2]]);
    let b = imat(&[&[0, 1], &[0, 1], &[0, 1]]);
    let t = imat(&[&[-5, -5]]);
    for route in [Route::Witnesses, Route::Counts] {
        let r = pred_succ(&a, &b, &t, &ReferenceTriangles, 3, cfg(), route, &c).unwrap();
        for j in 0..2 {
            assert_eq!(*r.state.lo.get(0, j), None);
            assert_eq!(*r.state.hi.get(0, j), Some(1));
        }
    }
}

#[test]
fn target_equal_to_a_sum_is_its_own_predecessor() {
    let c = Comparisons::new();
    let a = imat(&[&[5, 1, 9, 3]]);
    let b = imat(&[&[0], &[0], &[0], &[0]]);
    for route in [Route::Witnesses, Route::Counts] {
        let r = pred_succ(&a, &b, &imat(&[&[3]]), &ReferenceTriangles, 11, cfg(), route, &c).unwrap();
        assert_eq!(*r.state.lo.get(0, 0), Some(3));
        assert_eq!(*r.state.hi.get(0, 0), Some(0));
    }
}

#[test]
fn infinite_successor_becomes_sentinel() {
    let c = Comparisons::new();
    let a = Matrix::from_rows(vec![vec![Real::int(0), Real::infinity()]]).unwrap();
    let b = imat(&[&[0], &[0]]);
    for route in [Route::Witnesses, Route::Counts] {
        let r = pred_succ(&a, &b, &imat(&[&[1]]), &ReferenceTriangles, 5, cfg(), route, &c).unwrap();
        assert_eq!(*r.state.lo.get(0, 0), Some(0));
        assert_eq!(*r.state.hi.get(0, 0), None);
    }
}

#[test]
fn pred_succ_matches_scan_on_random_instances() {
    let c = Comparisons::new();
    for seed in 0..25 {
        let (n1, d, n2) = (3 + seed as usize % 6, 1 + seed as usize % 9, 2 + seed as usize % 5);
        let a = random_matrix(n1, d, 6, 0.1, seed);
        let b = random_matrix(d, n2, 6, 0.1, seed + 1000);
        let t = random_matrix(n1, n2, 8, 0.0, seed + 2000);
        for route in [Route::Witnesses, Route::Counts] {
            let r = pred_succ(&a, &b, &t, &ReferenceTriangles, seed, cfg(), route, &c).unwrap();
            check_pred_succ(&a, &b, &t, &r.state, &c);
        }
    }
}

#[test]
fn nothing_strictly_between_pred_and_target_or_target_and_succ() {
    let c = Comparisons::new();
    for seed in 0..8 {
        let a = random_matrix(16, 16, 10, 0.05, seed);
        let b = random_matrix(16, 16, 10, 0.05, seed + 7);
        let t = random_matrix(16, 16, 12, 0.0, seed + 9);
        let r = pred_succ(&a, &b, &t, &ReferenceTriangles, seed, cfg(), Route::Witnesses, &c).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                let tv = t.get(i, j);
                for k in 0..16 {
                    let s = sum(&a, &b, i, j, k);
                    if let Some(p) = r.state.lo.get(i, j) {
                        let ps = sum(&a, &b, i, j, *p);
                        assert!(!(less(&c, &ps, &s) && c.compare2(&s, tv) != Ordering::Greater));
                    } else {
                        assert!(less(&c, tv, &s));
                    }
                    if let Some(h) = r.state.hi.get(i, j) {
                        let hs = sum(&a, &b, i, j, *h);
                        assert!(!(less(&c, tv, &s) && less(&c, &s, &hs)));
                    } else {
                        assert!(s.is_infinite() || c.compare2(&s, tv) != Ordering::Greater);
                    }
                }
            }
        }
    }
}

#[test]
fn planted_zero_triangle_is_found() {
    let c = Comparisons::new();
    let g = match generate("exacttri", &params(&["n=9", "range=20", "planted=true"]), 4).unwrap() {
        Instance::ExactTri(g) => g,
        _ => unreachable!(),
    };
    let want = exact_tri_decide(&g, &c);
    assert!(want.data().iter().any(|&x| x));
    for route in [Route::Witnesses, Route::Counts] {
        let (got, _) = ae_exact_tri_via_sparse(&g, 3, &ReferenceTriangles, 1, cfg(), route, &c).unwrap();
        assert_eq!(got, want);
    }
}

#[test]
fn positive_weights_have_no_zero_triangle() {
    let c = Comparisons::new();
    let pos = |r, k, s| random_matrix(r, k, 5, 0.0, s).map(|x: &Real| x.add(&Real::int(20)));
    let g = WeightedTripartiteGraph { w_ij: pos(5, 5, 1), w_ik: pos(5, 6, 2), w_kj: pos(6, 5, 3) };
    let (got, _) = ae_exact_tri_via_sparse(&g, 3, &ReferenceTriangles, 1, cfg(), Route::Witnesses, &c).unwrap();
    assert!(got.data().iter().all(|&x| !x));
}

#[test]
fn exact_tri_matches_oracle_on_30_instances() {
    let c = Comparisons::new();
    for seed in 0..30 {
        let g = match generate("exacttri", &params(&["n=12", "range=4", "inf_rate=0.1"]), seed).unwrap() {
            Instance::ExactTri(g) => g,
            _ => unreachable!(),
        };
        let want = exact_tri_decide(&g, &c);
        let (got, ledger) = ae_exact_tri_via_sparse(&g, 3, &ReferenceTriangles, seed, cfg(), Route::Witnesses, &c).unwrap();
        assert_eq!(got, want, "seed {seed}");
        assert!(ledger.violations().is_empty(), "{:?}", ledger.violations());
    }
}

#[test]
fn exact_tri_count_route_matches_oracle() {
    let c = Comparisons::new();
    for seed in 0..8 {
        let g = match generate("exacttri", &params(&["n=8", "range=3", "inf_rate=0.1"]), seed).unwrap() {
            Instance::ExactTri(g) => g,
            _ => unreachable!(),
        };
        let want = exact_tri_decide(&g, &c);
        let (got, _) = ae_exact_tri_via_sparse(&g, 3, &ReferenceTriangles, seed, cfg(), Route::Counts, &c).unwrap();
        assert_eq!(got, want, "seed {seed}");
    }
}

#[test]
fn count_below_argmin_is_zero() {
    let c = Comparisons::new();
    let a = random_matrix(6, 5, 9, 0.0, 3);
    let b = random_matrix(5, 6, 9, 0.0, 4);
    let k = min_plus(&a, &b, &c).map(|e| e.argmin);
    let got = count_below(&a, &b, &k, &ReferenceTriangles, &c).unwrap();
    assert!(got.data().iter().all(|&x| x == 0));
}

#[test]
fn count_below_argmax_with_distinct_sums() {
    let c = Comparisons::new();
    // sums A[i,k] + B[k,j] = 10k + i + j are distinct per pair
    let d = 6;
    let a = Matrix::from_fn(4, d, |i, k| Real::int(10 * k as i64 + i as i64));
    let b = Matrix::from_fn(d, 4, |_, j| Real::int(j as i64));
    let k = Matrix::from_fn(4, 4, |_, _| d - 1);
    let got = count_below(&a, &b, &k, &ReferenceTriangles, &c).unwrap();
    assert!(got.data().iter().all(|&x| x == d as u64 - 1));
}

fn brute_count(a: &Matrix<Real>, b: &Matrix<Real>, k: &Matrix<usize>, keep: Ordering, or_equal: bool, c: &Comparisons) -> Matrix<u64> {
    Matrix::from_fn(a.rows(), b.cols(), |i, j| {
        let r = sum(a, b, i, j, *k.get(i, j));
        (0..a.cols())
            .filter(|&x| {
                let o = c.compare2(&sum(a, b, i, j, x), &r);
                o == keep || (or_equal && o == Ordering::Equal)
            })
            .count() as u64
    })
}

fn random_index(r: usize, cc: usize, d: usize, seed: u64) -> Matrix<usize> {
    use rand::Rng;
    let mut rng = rng_for(seed);
    Matrix::from_fn(r, cc, |_, _| rng.gen_range(0..d))
}

#[test]
fn counts_match_brute_force_with_and_without_infinities() {
    let c = Comparisons::new();
    for seed in 0..20 {
        let inf = if seed % 2 == 0 { 0.0 } else { 0.2 };
        let a = random_matrix(6, 7, 4, inf, seed);
        let b = random_matrix(7, 5, 4, inf, seed + 1);
        let k = random_index(6, 5, 7, seed + 2);
        let below = count_below(&a, &b, &k, &ReferenceTriangles, &c).unwrap();
        assert_eq!(below, brute_count(&a, &b, &k, Ordering::Less, false, &c), "seed {seed}");
        let at_most = count_at_most(&a, &b, &k, &ReferenceTriangles, &c).unwrap();
        assert_eq!(at_most, brute_count(&a, &b, &k, Ordering::Less, true, &c), "seed {seed}");
    }
}

#[test]
fn unique_between_index_is_recovered() {
    let c = Comparisons::new();
    let a = imat(&[&[0, 4, 2, 9, 12, 1]]);
    let b = imat(&[&[0], &[6], &[3], &[11], &[0], &[100]]);
    let mut st = PredSuccState::open(imat(&[&[1]]));
    st.lo.set(0, 0, Some(0));
    st.hi.set(0, 0, Some(1));
    let got = variant2_via_counts(&a, &b, &st, &ReferenceTriangles, 2, cfg(), &c).unwrap();
    assert_eq!(*got.get(0, 0), Some(2));
}

#[test]
fn no_between_index_gives_none_via_counts() {
    let c = Comparisons::new();
    let a = imat(&[&[1, 2, 3]]);
    let b = imat(&[&[0], &[0], &[0]]);
    let mut st = PredSuccState::open(imat(&[&[1]]));
    st.lo.set(0, 0, Some(0));
    st.hi.set(0, 0, Some(1));
    let got = variant2_via_counts(&a, &b, &st, &ReferenceTriangles, 2, cfg(), &c).unwrap();
    assert_eq!(*got.get(0, 0), None);
}

#[test]
fn several_between_indices_give_a_valid_one() {
    let c = Comparisons::new();
    for seed in 0..10 {
        let a = random_matrix(5, 9, 10, 0.1, seed);
        let b = random_matrix(9, 5, 10, 0.1, seed + 3);
        let st = random_state(&a, &b, seed, &c);
        let got = variant2_via_counts(&a, &b, &st, &ReferenceTriangles, seed, cfg(), &c).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let want = scan_between(&a, &b, &st, i, j, &c);
                match got.get(i, j) {
                    Some(k) => assert!(want.contains(k)),
                    None => assert!(want.is_empty()),
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn both_variant2_routes_agree_on_existence(seed in 0u64..10_000, d in 1usize..7, n in 1usize..6) {
        let c = Comparisons::new();
        let a = random_matrix(n, d, 5, 0.1, seed);
        let b = random_matrix(d, n, 5, 0.1, seed ^ 0x55);
        let st = random_state(&a, &b, seed, &c);
        let w = solve_variant2(&a, &b, &st, &ReferenceTriangles, &c).unwrap();
        let k = variant2_via_counts(&a, &b, &st, &ReferenceTriangles, seed, cfg(), &c).unwrap();
        for (x, y) in w.data().iter().zip(k.data()) {
            prop_assert_eq!(x.is_some(), y.is_some());
        }
    }

    #[test]
    fn count_below_matches_brute_force(seed in 0u64..10_000, d in 1usize..8) {
        let c = Comparisons::new();
        let a = random_matrix(4, d, 3, 0.15, seed);
        let b = random_matrix(d, 4, 3, 0.15, seed + 9);
        let k = random_index(4, 4, d, seed);
        let got = count_below(&a, &b, &k, &ReferenceTriangles, &c).unwrap();
        prop_assert_eq!(got, brute_count(&a, &b, &k, Ordering::Less, false, &c));
    }
}
