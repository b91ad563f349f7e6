mod common;

use std::cmp::Ordering;

use common::*;
use finegrain::instances::*;
use finegrain::ledger::ReductionError;
use finegrain::numeric::Comparisons;
use finegrain::oracles::*;
use finegrain::red_3sum::*;
use finegrain::red_apsp::LasVegas;
use finegrain::red_exacttri::Route;
use proptest::prelude::*;
use rand::Rng;

fn cfg() -> LasVegas {
    LasVegas::default()
}

fn bsum(bp: &BucketedPair, i: usize, j: usize, k: usize, l: usize) -> Real {
    bp.a[i][k].add(&bp.b[j][l])
}

fn cells(bp: &BucketedPair, i: usize, j: usize) -> Vec<(usize, usize)> {
    (0..bp.a[i].len()).flat_map(|k| (0..bp.b[j].len()).map(move |l| (k, l))).collect()
}

/// Exhaustive predecessor and successor values of `c` in `A_i + B_j`.
fn scan_bracket(bp: &BucketedPair, i: usize, j: usize, c: &Real, cmp: &Comparisons) -> (Option<Real>, Option<Real>) {
    let mut pred: Option<Real> = None;
    let mut succ: Option<Real> = None;
    for (k, l) in cells(bp, i, j) {
        let s = bsum(bp, i, j, k, l);
        if cmp.compare2(&s, c) != Ordering::Greater {
            if pred.as_ref().is_none_or(|p| cmp.compare2(p, &s) == Ordering::Less) {
                pred = Some(s);
            }
        } else if succ.as_ref().is_none_or(|p| cmp.compare2(&s, p) == Ordering::Less) {
            succ = Some(s);
        }
    }
    (pred, succ)
}

fn strictly_inside(bp: &BucketedPair, t: &Quad, k: usize, l: usize, cmp: &Comparisons) -> bool {
    let s = bsum(bp, t.i, t.j, k, l);
    t.lo.is_none_or(|(a, b)| cmp.compare2(&bsum(bp, t.i, t.j, a, b), &s) == Ordering::Less)
        && t.hi.is_none_or(|(a, b)| cmp.compare2(&s, &bsum(bp, t.i, t.j, a, b)) == Ordering::Less)
}

fn random_list(n: usize, range: i64, rng: &mut impl Rng) -> Vec<Real> {
    (0..n)
        .map(|_| {
            if rng.gen_bool(0.2) {
                Real::ratio(rng.gen_range(-2 * range..=2 * range), 2).unwrap()
            } else {
                Real::int(rng.gen_range(-range..=range))
            }
        })
        .collect()
}

fn random_quad(bp: &BucketedPair, rng: &mut impl Rng) -> Quad {
    let i = rng.gen_range(0..bp.a.len());
    let j = rng.gen_range(0..bp.b.len());
    let mut pick = || {
        rng.gen_bool(0.8).then(|| (rng.gen_range(0..bp.a[i].len()), rng.gen_range(0..bp.b[j].len())))
    };
    Quad { i, j, lo: pick(), hi: pick() }
}

fn three_sum(n: usize, m: usize, seed: u64, planted: bool) -> ThreeSumInstance {
    let mut p = vec![format!("n={n}"), format!("m={m}")];
    if planted {
        p.push("planted=true".into());
    }
    match generate("3sum", &GenParams::from_pairs(&p).unwrap(), seed).unwrap() {
        Instance::ThreeSum(x) => x,
        _ => unreachable!(),
    }
}

// ---------------------------------------------------------------- staircase

#[test]
fn staircase_empty_below_every_sum() {
    let cmp = Comparisons::new();
    let bp = BucketedPair::new(&ints(&[1, 2, 3, 4]), &ints(&[5, 6, 7, 8]), 2, &cmp).unwrap();
    assert!(staircase_pairs(&bp, &Real::int(5), &cmp).is_empty());
    assert!(staircase_pairs(&bp, &Real::int(13), &cmp).is_empty());
}

#[test]
fn staircase_single_bucket() {
    let cmp = Comparisons::new();
    let bp = BucketedPair::new(&ints(&[3, 1, 2]), &ints(&[0, 9]), 4, &cmp).unwrap();
    assert_eq!(staircase_pairs(&bp, &Real::int(5), &cmp), vec![(0, 0)]);
    assert!(staircase_pairs(&bp, &Real::int(20), &cmp).len() <= 1);
}

#[test]
fn buckets_are_sorted_and_ragged_at_the_end() {
    let cmp = Comparisons::new();
    let bp = BucketedPair::new(&ints(&[5, -1, 3, 0, 9]), &ints(&[2]), 2, &cmp).unwrap();
    assert_eq!(bp.a, vec![ints(&[-1, 0]), ints(&[3, 5]), ints(&[9])]);
    assert_eq!(bp.b, vec![ints(&[2])]);
    assert!(matches!(BucketedPair::new(&ints(&[1]), &ints(&[1]), 0, &cmp), Err(ReductionError::BadBlock(0))));
}

#[test]
fn staircase_covers_every_solution_value_pair() {
    let cmp = Comparisons::new();
    let mut rng = rng_for(11);
    for _ in 0..40 {
        let n = rng.gen_range(1..30);
        let d = rng.gen_range(1..6);
        let a = random_list(n, 8, &mut rng);
        let b = random_list(rng.gen_range(1..30), 8, &mut rng);
        let bp = BucketedPair::new(&a, &b, d, &cmp).unwrap();
        for x in &a {
            for y in &b {
                let c = x.add(y);
                let st = staircase_pairs(&bp, &c, &cmp);
                assert!(st.len() < bp.a.len() + bp.b.len());
                for &(i, j) in &st {
                    let (amin, amax) = (&bp.a[i][0], bp.a[i].last().unwrap());
                    let (bmin, bmax) = (&bp.b[j][0], bp.b[j].last().unwrap());
                    assert_ne!(cmp.compare3(amin, bmin, &c), Ordering::Greater);
                    assert_ne!(cmp.compare3(amax, bmax, &c), Ordering::Less);
                }
                let held = |bucket: &Vec<Real>, v: &Real| bucket.iter().any(|w| same(&cmp, w, v));
                assert!(st.iter().any(|&(i, j)| held(&bp.a[i], x) && held(&bp.b[j], y)), "{x:?}+{y:?} unrouted");
            }
        }
    }
}

// ---------------------------------------------------------------- graphs

#[test]
fn single_value_buckets_have_nothing_strictly_between() {
    let cmp = Comparisons::new();
    let bp = BucketedPair::new(&ints(&[1, 4, 6]), &ints(&[0, 2]), 1, &cmp).unwrap();
    let ranks = SumRanks::build(&bp, &cmp).unwrap();
    let mut quads = Vec::new();
    for i in 0..3 {
        for j in 0..2 {
            quads.push(Quad { i, j, lo: Some((0, 0)), hi: None });
            quads.push(Quad { i, j, lo: None, hi: Some((0, 0)) });
            quads.push(Quad { i, j, lo: Some((0, 0)), hi: Some((0, 0)) });
        }
    }
    let n = quads.len();
    let out = build_3sum_graph(&bp, &ranks, &QuadrupleSets::Quads(quads), &[0], n).unwrap();
    assert!(ae_sparse_tri(&out.targets[0].graph).count.iter().all(|&c| c == 0));
}

#[test]
fn planted_middle_pair_closes_a_triangle() {
    let cmp = Comparisons::new();
    let bp = BucketedPair::new(&ints(&[0, 1, 2, 3]), &ints(&[0, 10, 20, 30]), 4, &cmp).unwrap();
    let ranks = SumRanks::build(&bp, &cmp).unwrap();
    let open = || QuadrupleSets::Quads(vec![Quad { i: 0, j: 0, lo: Some((0, 0)), hi: Some((3, 0)) }]);
    let out = build_3sum_graph(&bp, &ranks, &open(), &[0, 1, 2, 3], 1).unwrap();
    assert!(ae_sparse_tri(&out.targets[0].graph).count[0] > 0);
    // positions 1 and 2 are the only ones inside; without them nothing is left
    let out = build_3sum_graph(&bp, &ranks, &open(), &[0, 3], 1).unwrap();
    assert_eq!(ae_sparse_tri(&out.targets[0].graph).count[0], 0);
    let adj = QuadrupleSets::Quads(vec![Quad { i: 0, j: 0, lo: Some((0, 0)), hi: Some((1, 0)) }]);
    let out = build_3sum_graph(&bp, &ranks, &adj, &[0, 1, 2, 3], 1).unwrap();
    assert_eq!(ae_sparse_tri(&out.targets[0].graph).count[0], 0);
}

#[test]
fn quad_graph_decides_like_a_scan() {
    let cmp = Comparisons::new();
    let mut rng = rng_for(5);
    for d in [2, 3, 4] {
        let a = random_list(16, 10, &mut rng);
        let b = random_list(12, 10, &mut rng);
        let bp = BucketedPair::new(&a, &b, d, &cmp).unwrap();
        let ranks = SumRanks::build(&bp, &cmp).unwrap();
        let quads: Vec<Quad> = (0..60).map(|_| random_quad(&bp, &mut rng)).collect();
        let cols: Vec<usize> = (0..d).filter(|_| rng.gen_bool(0.7)).collect();
        let out = build_3sum_graph(&bp, &ranks, &QuadrupleSets::Quads(quads.clone()), &cols, 60).unwrap();
        let ans = ae_sparse_tri(&out.targets[0].graph);
        for (t, &c) in quads.iter().zip(&ans.count) {
            let expect = cells(&bp, t.i, t.j).into_iter().any(|(k, l)| cols.contains(&k) && strictly_inside(&bp, t, k, l, &cmp));
            assert_eq!(c > 0, expect, "{t:?} cols {cols:?}");
        }
        for c in &out.ledger.checks {
            assert!(c.holds(), "{c:?}");
        }
    }
}

#[test]
fn pair_counts_match_exhaustive_scan() {
    let cmp = Comparisons::new();
    let mut rng = rng_for(8);
    for (n, d) in [(16, 2), (16, 4), (13, 3)] {
        let a = random_list(n, 6, &mut rng);
        let b = random_list(n, 6, &mut rng);
        let bp = BucketedPair::new(&a, &b, d, &cmp).unwrap();
        let ranks = SumRanks::build(&bp, &cmp).unwrap();
        let mut queries = Vec::new();
        for i in 0..bp.a.len() {
            for j in 0..bp.b.len() {
                for (k, l) in cells(&bp, i, j) {
                    queries.push(PairQuery { i, j, k, l });
                }
            }
        }
        let cols: Vec<usize> = (0..d).collect();
        for negated in [false, true] {
            let q = QuadrupleSets::Pairs { queries: queries.clone(), negated };
            let out = build_3sum_graph(&bp, &ranks, &q, &cols, queries.len()).unwrap();
            let ans = ae_sparse_tri(&out.targets[0].graph);
            let want = if negated { Ordering::Greater } else { Ordering::Less };
            for (p, &c) in queries.iter().zip(&ans.count) {
                let me = bsum(&bp, p.i, p.j, p.k, p.l);
                let expect =
                    cells(&bp, p.i, p.j).into_iter().filter(|&(k, l)| cmp.compare2(&bsum(&bp, p.i, p.j, k, l), &me) == want).count();
                assert_eq!(c as usize, expect, "{p:?} negated {negated}");
            }
            for c in &out.ledger.checks {
                assert!(c.holds(), "{c:?}");
            }
        }
    }
}

#[test]
fn quadruple_budget_is_enforced() {
    let cmp = Comparisons::new();
    let bp = BucketedPair::new(&ints(&[0, 1]), &ints(&[0, 1]), 2, &cmp).unwrap();
    let ranks = SumRanks::build(&bp, &cmp).unwrap();
    let q = QuadrupleSets::Quads(vec![Quad { i: 0, j: 0, lo: None, hi: None }; 3]);
    assert!(matches!(
        build_3sum_graph(&bp, &ranks, &q, &[0, 1], 2),
        Err(ReductionError::QuadBudgetExceeded { total: 3, budget: 2 })
    ));
}

#[test]
fn out_of_bucket_queries_are_rejected() {
    let cmp = Comparisons::new();
    let bp = BucketedPair::new(&ints(&[0, 1, 2]), &ints(&[0, 1]), 2, &cmp).unwrap();
    let ranks = SumRanks::build(&bp, &cmp).unwrap();
    let q = QuadrupleSets::Quads(vec![Quad { i: 1, j: 0, lo: Some((1, 0)), hi: None }]);
    assert!(matches!(build_3sum_graph(&bp, &ranks, &q, &[0, 1], 1), Err(ReductionError::ShapeMismatch(_))));
}

// ---------------------------------------------------------------- variant 1

fn check_variant1(route: Route, seed: u64) {
    let cmp = Comparisons::new();
    let mut rng = rng_for(seed);
    for d in [2, 3, 4] {
        let a = random_list(14, 8, &mut rng);
        let b = random_list(11, 8, &mut rng);
        let bp = BucketedPair::new(&a, &b, d, &cmp).unwrap();
        let mut queries = Vec::new();
        for _ in 0..40 {
            let i = rng.gen_range(0..bp.a.len());
            let j = rng.gen_range(0..bp.b.len());
            let c = if rng.gen_bool(0.5) {
                let k = rng.gen_range(0..bp.a[i].len());
                let l = rng.gen_range(0..bp.b[j].len());
                bsum(&bp, i, j, k, l)
            } else {
                Real::ratio(rng.gen_range(-40..=40), 2).unwrap()
            };
            queries.push(SumQuery { i, j, c });
        }
        let res = solve_3sum_variant1(&bp, &queries, &ReferenceTriangles, seed, cfg(), route, &cmp).unwrap();
        for (q, s) in queries.iter().zip(&res.answers) {
            let (pred, succ) = scan_bracket(&bp, q.i, q.j, &q.c, &cmp);
            let got = |x: Option<(usize, usize)>| x.map(|(k, l)| bsum(&bp, q.i, q.j, k, l));
            assert_eq!(got(s.pred).is_some(), pred.is_some(), "{q:?}");
            assert_eq!(got(s.succ).is_some(), succ.is_some(), "{q:?}");
            if let (Some(x), Some(y)) = (got(s.pred), pred) {
                assert!(same(&cmp, &x, &y), "{q:?}");
            }
            if let (Some(x), Some(y)) = (got(s.succ), succ) {
                assert!(same(&cmp, &x, &y), "{q:?}");
            }
        }
        for c in &res.ledger.checks {
            assert!(c.holds(), "{c:?}");
        }
    }
}

#[test]
fn variant1_matches_exhaustive_brackets() {
    check_variant1(Route::Witnesses, 21);
}

#[test]
fn variant1_through_counts_matches_exhaustive_brackets() {
    check_variant1(Route::Counts, 22);
}

#[test]
fn target_in_the_sum_set_is_its_own_predecessor() {
    let cmp = Comparisons::new();
    let bp = BucketedPair::new(&ints(&[0, 4, 9]), &ints(&[1, 2, 7]), 4, &cmp).unwrap();
    for route in [Route::Witnesses, Route::Counts] {
        let q = [SumQuery { i: 0, j: 0, c: Real::int(11) }, SumQuery { i: 0, j: 0, c: Real::int(0) }];
        let res = solve_3sum_variant1(&bp, &q, &ReferenceTriangles, 3, cfg(), route, &cmp).unwrap();
        let (k, l) = res.answers[0].pred.unwrap();
        assert!(same(&cmp, &bsum(&bp, 0, 0, k, l), &Real::int(11)));
        let (k, l) = res.answers[0].succ.unwrap();
        assert!(same(&cmp, &bsum(&bp, 0, 0, k, l), &Real::int(16)));
        assert_eq!(res.answers[1].pred, None);
        let (k, l) = res.answers[1].succ.unwrap();
        assert!(same(&cmp, &bsum(&bp, 0, 0, k, l), &Real::int(1)));
    }
}

// ---------------------------------------------------------------- all-nums

#[test]
fn planted_triple_is_found() {
    let cmp = Comparisons::new();
    for seed in 0..6 {
        let inst = three_sum(20, 20, seed, true);
        let want = all_nums_3sum(&inst, &cmp);
        assert!(want.iter().any(|&x| x));
        for route in [Route::Witnesses, Route::Counts] {
            let (got, _) = all_nums_3sum_via_sparse(&inst, 3, &ReferenceTriangles, seed, cfg(), route, &cmp).unwrap();
            assert_eq!(got, want, "seed {seed} {route:?}");
        }
    }
}

#[test]
fn huge_targets_are_all_no() {
    let cmp = Comparisons::new();
    let inst = ThreeSumInstance { a: ints(&[1, 2, 3]), b: ints(&[4, 5, 6]), c: ints(&[1000, -1000, 500]) };
    let (got, _) = all_nums_3sum_via_sparse(&inst, 2, &ReferenceTriangles, 1, cfg(), Route::Witnesses, &cmp).unwrap();
    assert_eq!(got, vec![false; 3]);
}

#[test]
fn fifty_random_instances_match_the_oracle() {
    let cmp = Comparisons::new();
    for seed in 0..50u64 {
        let d = [2, 3, 4][seed as usize % 3];
        let inst = three_sum(24, 24, 100 + seed, seed % 2 == 0);
        let want = all_nums_3sum(&inst, &cmp);
        let (got, ledger) = all_nums_3sum_via_sparse(&inst, d, &ReferenceTriangles, seed, cfg(), Route::Witnesses, &cmp).unwrap();
        assert_eq!(got, want, "seed {seed} d {d}");
        for c in &ledger.checks {
            assert!(c.holds(), "{c:?}");
        }
    }
}

#[test]
fn counting_route_matches_the_oracle() {
    let cmp = Comparisons::new();
    for seed in 0..12u64 {
        let d = [2, 3, 4][seed as usize % 3];
        let inst = three_sum(16, 16, 300 + seed, seed % 2 == 1);
        let want = all_nums_3sum(&inst, &cmp);
        let (got, ledger) = all_nums_3sum_via_sparse(&inst, d, &ReferenceTriangles, seed, cfg(), Route::Counts, &cmp).unwrap();
        assert_eq!(got, want, "seed {seed} d {d}");
        for c in &ledger.checks {
            assert!(c.holds(), "{c:?}");
        }
    }
}

#[test]
fn empty_lists_give_all_no() {
    let cmp = Comparisons::new();
    let inst = ThreeSumInstance { a: vec![], b: ints(&[1]), c: ints(&[-1, 0]) };
    let (got, _) = all_nums_3sum_via_sparse(&inst, 2, &ReferenceTriangles, 1, cfg(), Route::Counts, &cmp).unwrap();
    assert_eq!(got, vec![false, false]);
}

// ---------------------------------------------------------------- exact triangle

fn via_exact_tri(inst: &ThreeSumInstance, g: usize, eps: f64, cmp: &Comparisons) -> (Vec<bool>, ExactTriReduction) {
    let red = real3sum_to_exact_tri(inst, g, eps, cmp).unwrap();
    let answers: Vec<_> = red.graphs.iter().map(|x| exact_tri_decide(x, cmp)).collect();
    (red.decode(inst, &answers, cmp).unwrap(), red)
}

#[test]
fn planted_zero_triple_is_detected_through_exact_triangle() {
    let cmp = Comparisons::new();
    for seed in 0..10 {
        let inst = three_sum(18, 18, 40 + seed, true);
        for (g, eps) in [(3, 0.5), (6, 0.3), (2, 0.9)] {
            let (got, red) = via_exact_tri(&inst, g, eps, &cmp);
            assert_eq!(got, all_nums_3sum(&inst, &cmp), "seed {seed} g {g} eps {eps}");
            assert!(red.valid_triples <= 3 * g * g);
        }
    }
}

#[test]
fn no_solution_means_no_triangles_and_empty_partial() {
    let cmp = Comparisons::new();
    // all sums are positive
    let inst = ThreeSumInstance { a: ints(&[1, 2, 3, 4, 5, 6]), b: ints(&[1, 3, 5, 7, 9, 11]), c: ints(&[0, 2, 4, 8, 16, 32]) };
    let red = real3sum_to_exact_tri(&inst, 3, 0.5, &cmp).unwrap();
    assert!(red.partial.iter().all(|&x| !x));
    assert!(red.graphs.iter().all(|g| exact_tri_decide(g, &cmp).data().iter().all(|&x| !x)));
}

#[test]
fn unit_buckets_decode_directly() {
    let cmp = Comparisons::new();
    let inst = ThreeSumInstance { a: ints(&[1, -4, 2]), b: ints(&[3, 0, 5]), c: ints(&[-4, 4, 1]) };
    let (got, _) = via_exact_tri(&inst, 3, 0.5, &cmp);
    assert_eq!(got, all_nums_3sum(&inst, &cmp));
    assert_eq!(got, vec![true, true, true]);
}

#[test]
fn bucket_count_is_checked() {
    let cmp = Comparisons::new();
    let inst = ThreeSumInstance { a: ints(&[1, 2]), b: ints(&[1, 2, 3]), c: ints(&[0, 1, 2]) };
    assert!(matches!(real3sum_to_exact_tri(&inst, 0, 0.5, &cmp), Err(ReductionError::BadBucketCount(0))));
    assert!(matches!(real3sum_to_exact_tri(&inst, 3, 0.5, &cmp), Err(ReductionError::BadBucketCount(3))));
}

#[test]
fn random_instances_match_through_exact_triangle() {
    let cmp = Comparisons::new();
    let mut rng = rng_for(77);
    for seed in 0..30u64 {
        let n = rng.gen_range(4..26);
        let inst = three_sum(n, n, 500 + seed, seed % 3 == 0);
        let g = rng.gen_range(1..=n);
        let eps = [0.0, 0.3, 0.5, 0.8][seed as usize % 4];
        let (got, red) = via_exact_tri(&inst, g, eps, &cmp);
        assert_eq!(got, all_nums_3sum(&inst, &cmp), "seed {seed} n {n} g {g} eps {eps}");
        for c in &red.ledger.checks {
            assert!(c.holds(), "{c:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solution_bucket_pairs_are_routed(a in prop::collection::vec(-12i64..12, 1..20),
                                        b in prop::collection::vec(-12i64..12, 1..20),
                                        d in 1usize..6) {
        let cmp = Comparisons::new();
        let bp = BucketedPair::new(&ints(&a), &ints(&b), d, &cmp).unwrap();
        for i in 0..bp.a.len() {
            for j in 0..bp.b.len() {
                for (k, l) in cells(&bp, i, j) {
                    let c = bsum(&bp, i, j, k, l);
                    let st = staircase_pairs(&bp, &c, &cmp);
                    let held = |v: &Vec<Real>, x: &Real| v.iter().any(|w| same(&cmp, w, x));
                    prop_assert!(st.iter().any(|&(p, q)| held(&bp.a[p], &bp.a[i][k]) && held(&bp.b[q], &bp.b[j][l])));
                }
            }
        }
    }

    #[test]
    fn emitted_quadruples_stay_within_rounds_times_routings(seed in 0u64..1000, d in 2usize..5, count in any::<bool>()) {
        let cmp = Comparisons::new();
        let inst = three_sum(12, 12, seed, seed % 2 == 0);
        let route = if count { Route::Counts } else { Route::Witnesses };
        let (got, ledger) = all_nums_3sum_via_sparse(&inst, d, &ReferenceTriangles, seed, cfg(), route, &cmp).unwrap();
        prop_assert_eq!(got, all_nums_3sum(&inst, &cmp));
        let check = ledger.checks.iter().find(|c| c.name == "quadruples emitted");
        prop_assert!(check.is_some_and(|c| c.holds()));
    }

    #[test]
    fn valid_bucket_triples_stay_quadratic(seed in 0u64..1000, g in 1usize..9) {
        let cmp = Comparisons::new();
        let inst = three_sum(16, 16, seed, false);
        let red = real3sum_to_exact_tri(&inst, g, 0.5, &cmp).unwrap();
        prop_assert!(red.valid_triples <= 3 * g * g);
    }
}
