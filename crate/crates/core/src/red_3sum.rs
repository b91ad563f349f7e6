//! Real 3SUM through all-edges sparse triangle detection: sorted buckets,
//! staircase routing of targets, dyadic rank tables of in-bucket
//! differences, and the bucket reduction to exact triangle.

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::hash::Hash;

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;

use crate::instances::{rng_for, Real, SparseGraph, ThreeSumInstance, WeightedTripartiteGraph, LEFT, MIDDLE, RIGHT};
use crate::ledger::{ceil_div, log2_budget, LedgerRow, ReductionError, ReductionOutput};
use crate::matrix::Matrix;
use crate::numeric::{covering_halves, Comparisons, Difference, DyadicInterval, RankList, Side};
use crate::oracles::TriangleOracle;
use crate::red_apsp::{prepare, random_half, LasVegas, RoundStats};
use crate::red_exacttri::Route;

/// Sorted `A` and `B` cut into consecutive buckets of at most `d` values;
/// only the last bucket of each list may be short.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BucketedPair {
    pub d: usize,
    pub a: Vec<Vec<Real>>,
    pub b: Vec<Vec<Real>>,
}

fn bucketize(v: &[Real], size: usize, cmp: &Comparisons) -> Vec<Vec<Real>> {
    let mut s = v.to_vec();
    s.sort_by(|x, y| cmp.compare2(x, y));
    s.chunks(size).map(|c| c.to_vec()).collect()
}

impl BucketedPair {
    pub fn new(a: &[Real], b: &[Real], d: usize, cmp: &Comparisons) -> Result<Self, ReductionError> {
        if d == 0 {
            return Err(ReductionError::BadBlock(0));
        }
        if let Some(x) = a.iter().chain(b).find(|x| x.is_infinite()) {
            return Err(ReductionError::InfiniteEntry(format!("3SUM value {x:?}")));
        }
        Ok(BucketedPair { d, a: bucketize(a, d, cmp), b: bucketize(b, d, cmp) })
    }

    fn first_last(bucket: &[Real]) -> (&Real, &Real) {
        (&bucket[0], &bucket[bucket.len() - 1])
    }

    fn sum_cmp(&self, x: (usize, usize, usize, usize), y: (usize, usize, usize, usize), cmp: &Comparisons) -> Ordering {
        cmp.compare4(&self.a[x.0][x.2], &self.b[x.1][x.3], &self.a[y.0][y.2], &self.b[y.1][y.3])
    }

    /// Number of `ℓ` in `B_j` with `A_i[k] + B_j[ℓ] ≤ c`.
    fn at_most_in_row(&self, i: usize, j: usize, k: usize, c: &Real, cmp: &Comparisons) -> usize {
        let a = &self.a[i][k];
        self.b[j].partition_point(|b| cmp.compare3(a, b, c) != Ordering::Greater)
    }

    /// Number of `ℓ` in `B_j` with `A_i[k] + B_j[ℓ] ≤ A_i[k2] + B_j[ℓ2]`.
    fn at_most_pair(&self, i: usize, j: usize, k: usize, (k2, l2): (usize, usize), cmp: &Comparisons) -> usize {
        let (a, a2, b2) = (&self.a[i][k], &self.a[i][k2], &self.b[j][l2]);
        self.b[j].partition_point(|b| cmp.compare4(a, b, a2, b2) != Ordering::Greater)
    }
}

/// Bucket pairs `(i, j)` that a monotone two-pointer walk visits with
/// `min(A_i) + min(B_j) ≤ c ≤ max(A_i) + max(B_j)`.
///
/// Every value pair `a + b = c` lands in some returned pair of buckets
/// holding `a` and `b`. Output length is at most `|A buckets| + |B buckets| - 1`.
pub fn staircase_pairs(bp: &BucketedPair, c: &Real, cmp: &Comparisons) -> Vec<(usize, usize)> {
    let (na, nb) = (bp.a.len(), bp.b.len());
    let mut out = Vec::new();
    if na == 0 || nb == 0 {
        return out;
    }
    let (mut i, mut j) = (0, nb - 1);
    loop {
        let (amin, amax) = BucketedPair::first_last(&bp.a[i]);
        let (bmin, bmax) = BucketedPair::first_last(&bp.b[j]);
        let step_i = if cmp.compare3(amin, bmin, c) == Ordering::Greater {
            false
        } else if cmp.compare3(amax, bmax, c) == Ordering::Less {
            true
        } else {
            out.push((i, j));
            cmp.compare3(amax, bmin, c) == Ordering::Less
        };
        if step_i {
            i += 1;
            if i == na {
                break;
            }
        } else {
            if j == 0 {
                break;
            }
            j -= 1;
        }
    }
    out
}

/// Dense ranks of every in-bucket difference `A_i[p] - A_i[q]` and
/// `B_j[p] - B_j[q]`, all sorted in one list.
#[derive(Clone, Debug)]
pub struct SumRanks {
    a: Vec<Matrix<u64>>,
    b: Vec<Matrix<u64>>,
    distinct: u64,
    universe_log: u32,
}

impl SumRanks {
    pub fn build(bp: &BucketedPair, cmp: &Comparisons) -> Result<SumRanks, ReductionError> {
        let mut items = Vec::new();
        for bucket in bp.a.iter().chain(&bp.b) {
            for p in bucket {
                for q in bucket {
                    items.push(Difference::new(p, q));
                }
            }
        }
        let (list, ranks) = RankList::build(&items, cmp)?;
        let mut it = ranks.into_iter().map(|r| r as u64);
        let mut tables = |side: &[Vec<Real>]| -> Vec<Matrix<u64>> {
            side.iter()
                .map(|bucket| {
                    let n = bucket.len();
                    Matrix::from_vec(n, n, it.by_ref().take(n * n).collect()).expect("n*n ranks")
                })
                .collect()
        };
        let a = tables(&bp.a);
        let b = tables(&bp.b);
        Ok(SumRanks { a, b, distinct: list.len() as u64, universe_log: list.universe_log() })
    }

    /// Rank of `A_i[p] - A_i[q]`; reversed when `neg`.
    fn ra(&self, i: usize, p: usize, q: usize, neg: bool) -> u64 {
        self.flip(*self.a[i].get(p, q), neg)
    }

    /// Rank of `B_j[p] - B_j[q]`; reversed when `neg`.
    fn rb(&self, j: usize, p: usize, q: usize, neg: bool) -> u64 {
        self.flip(*self.b[j].get(p, q), neg)
    }

    // reversing ranks is the rank order of the negated lists
    fn flip(&self, r: u64, neg: bool) -> u64 {
        if neg {
            self.distinct - 1 - r
        } else {
            r
        }
    }

    pub fn universe_log(&self) -> u32 {
        self.universe_log
    }

    fn levels(&self) -> usize {
        self.universe_log as usize + 1
    }
}

/// One query of the bracket form: find `(k', ℓ')` with
/// `sum(lo) < A_i[k'] + B_j[ℓ'] < sum(hi)`; a missing side is open.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Quad {
    pub i: usize,
    pub j: usize,
    pub lo: Option<(usize, usize)>,
    pub hi: Option<(usize, usize)>,
}

/// One counting query: the number of `(k', ℓ')` with
/// `A_i[k'] + B_j[ℓ'] < A_i[k] + B_j[ℓ]` (or `>` on the negated side).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PairQuery {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub l: usize,
}

/// The queries of one target graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QuadrupleSets {
    Quads(Vec<Quad>),
    Pairs { queries: Vec<PairQuery>, negated: bool },
}

impl QuadrupleSets {
    pub fn len(&self) -> usize {
        match self {
            QuadrupleSets::Quads(q) => q.len(),
            QuadrupleSets::Pairs { queries, .. } => queries.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

type MiddleKey = (Option<DyadicInterval>, Option<DyadicInterval>);

/// A target graph with its decode data. Nodes are laid out as left, then
/// right, then middle; query `q` is edge `q`.
#[derive(Clone, Debug)]
pub struct SumGraph {
    pub graph: SparseGraph,
    pub middle: Vec<MiddleKey>,
    pub middle_start: u32,
}

impl SumGraph {
    fn middle_key(&self, node: u32) -> Option<&MiddleKey> {
        node.checked_sub(self.middle_start).and_then(|m| self.middle.get(m as usize))
    }
}

fn intern<K: Hash + Eq + Clone>(map: &mut HashMap<K, u32>, list: &mut Vec<K>, k: K) -> u32 {
    *map.entry(k.clone()).or_insert_with(|| {
        list.push(k);
        (list.len() - 1) as u32
    })
}

fn halves(r: Option<u64>, log: u32, side: Side) -> Vec<Option<DyadicInterval>> {
    match r {
        None => vec![None],
        Some(r) => covering_halves(r, log, side).into_iter().map(Some).collect(),
    }
}

fn keys(lo: Vec<Option<DyadicInterval>>, hi: Vec<Option<DyadicInterval>>) -> Vec<MiddleKey> {
    lo.iter().flat_map(|&l| hi.iter().map(move |&h| (l, h))).collect()
}

/// Middle keys reached from `x[i, k⁻, k⁺]` through the candidate `k'`.
fn x_keys(r: &SumRanks, i: usize, lo: Option<usize>, hi: Option<usize>, kp: usize) -> Vec<MiddleKey> {
    let log = r.universe_log;
    keys(
        halves(lo.map(|k| r.ra(i, k, kp, false)), log, Side::Left),
        halves(hi.map(|k| r.ra(i, kp, k, false)), log, Side::Left),
    )
}

/// Middle keys reached from `z[j, ℓ⁻, ℓ⁺]` through the candidate `ℓ'`.
fn z_keys(r: &SumRanks, j: usize, lo: Option<usize>, hi: Option<usize>, lp: usize) -> Vec<MiddleKey> {
    let log = r.universe_log;
    keys(
        halves(lo.map(|l| r.rb(j, lp, l, false)), log, Side::Right),
        halves(hi.map(|l| r.rb(j, l, lp, false)), log, Side::Right),
    )
}

fn check_queries(bp: &BucketedPair, q: &QuadrupleSets) -> Result<(), ReductionError> {
    let ok = |i: usize, j: usize, kl: Option<(usize, usize)>| {
        i < bp.a.len() && j < bp.b.len() && kl.is_none_or(|(k, l)| k < bp.a[i].len() && l < bp.b[j].len())
    };
    let good = match q {
        QuadrupleSets::Quads(v) => v.iter().all(|x| ok(x.i, x.j, x.lo) && ok(x.i, x.j, x.hi)),
        QuadrupleSets::Pairs { queries, .. } => queries.iter().all(|x| ok(x.i, x.j, Some((x.k, x.l)))),
    };
    if good {
        Ok(())
    } else {
        Err(ReductionError::ShapeMismatch("query outside the buckets".into()))
    }
}

/// One target graph for the given queries, with candidate `k'` restricted
/// to the in-bucket positions `cols`.
///
/// Quad mode: left `x[i,k⁻,k⁺]`, middle `y[I⁻,I⁺]`, right `z[j,ℓ⁻,ℓ⁺]`;
/// a query edge lies on a triangle exactly when some `(k', ℓ')` sits
/// strictly inside its bracket. Edges are deduplicated.
///
/// Pair mode: left `x[i,k]`, middle `y[I]`, right `z[j,ℓ]`, one edge per
/// contributing `k'` or `ℓ'`, so parallel edges occur and the triangle
/// count of a query (with multiplicity) is the number of `(k', ℓ')` below
/// it (above it when negated).
pub fn build_3sum_graph(
    bp: &BucketedPair,
    ranks: &SumRanks,
    q: &QuadrupleSets,
    cols: &[usize],
    budget: usize,
) -> Result<ReductionOutput<SumGraph>, ReductionError> {
    if q.len() > budget {
        return Err(ReductionError::QuadBudgetExceeded { total: q.len(), budget });
    }
    check_queries(bp, q)?;
    let d = bp.d as u64;
    let lv = ranks.universe_log.max(1) as u64;
    let buckets = (bp.a.len() + bp.b.len()) as u64;
    let mut ledger = LedgerRow::default();
    let mut query_edges = Vec::with_capacity(q.len());
    let mut xz_mid: Vec<(u32, u32)> = Vec::new();
    let mut z_mid: Vec<(u32, u32)> = Vec::new();
    let mut middle: Vec<MiddleKey> = Vec::new();
    let mut mids: HashMap<MiddleKey, u32> = HashMap::new();
    let (nx, nz);
    match q {
        QuadrupleSets::Quads(quads) => {
            type Key = (usize, Option<usize>, Option<usize>);
            let (mut xs, mut zs): (HashMap<Key, u32>, HashMap<Key, u32>) = Default::default();
            let (mut xl, mut zl): (Vec<Key>, Vec<Key>) = Default::default();
            for t in quads {
                let x = intern(&mut xs, &mut xl, (t.i, t.lo.map(|p| p.0), t.hi.map(|p| p.0)));
                let z = intern(&mut zs, &mut zl, (t.j, t.lo.map(|p| p.1), t.hi.map(|p| p.1)));
                query_edges.push((x, z));
            }
            for (x, &(i, lo, hi)) in xl.iter().enumerate() {
                let mut seen = HashSet::new();
                for &kp in cols.iter().filter(|&&k| k < bp.a[i].len()) {
                    for key in x_keys(ranks, i, lo, hi, kp) {
                        let m = intern(&mut mids, &mut middle, key);
                        if seen.insert(m) {
                            xz_mid.push((x as u32, m));
                        }
                    }
                }
            }
            for (z, &(j, lo, hi)) in zl.iter().enumerate() {
                let mut seen = HashSet::new();
                for lp in 0..bp.b[j].len() {
                    for key in z_keys(ranks, j, lo, hi, lp) {
                        if let Some(&m) = mids.get(&key) {
                            if seen.insert(m) {
                                z_mid.push((z as u32, m));
                            }
                        }
                    }
                }
            }
            (nx, nz) = (xl.len(), zl.len());
            let bound = q.len() as u64 + buckets * (d + 1) * (d + 1) * d * lv * lv;
            let measured = (query_edges.len() + xz_mid.len() + z_mid.len()) as u64;
            ledger.check("edges per 3sum quad graph", measured, bound, "|Q|+(nA+nB)*(d+1)^2*d*L^2");
        }
        QuadrupleSets::Pairs { queries, negated } => {
            let neg = *negated;
            let (mut xs, mut zs): (HashMap<(usize, usize), u32>, HashMap<(usize, usize), u32>) = Default::default();
            let (mut xl, mut zl): (Vec<(usize, usize)>, Vec<(usize, usize)>) = Default::default();
            for t in queries {
                let x = intern(&mut xs, &mut xl, (t.i, t.k));
                let z = intern(&mut zs, &mut zl, (t.j, t.l));
                query_edges.push((x, z));
            }
            let log = ranks.universe_log;
            for (x, &(i, k)) in xl.iter().enumerate() {
                for &kp in cols.iter().filter(|&&k| k < bp.a[i].len()) {
                    for iv in covering_halves(ranks.ra(i, kp, k, neg), log, Side::Left) {
                        let m = intern(&mut mids, &mut middle, (Some(iv), None));
                        xz_mid.push((x as u32, m));
                    }
                }
            }
            for (z, &(j, l)) in zl.iter().enumerate() {
                for lp in 0..bp.b[j].len() {
                    for iv in covering_halves(ranks.rb(j, l, lp, neg), log, Side::Right) {
                        if let Some(&m) = mids.get(&(Some(iv), None)) {
                            z_mid.push((z as u32, m));
                        }
                    }
                }
            }
            (nx, nz) = (xl.len(), zl.len());
            let bound = q.len() as u64 + buckets * d * d * lv;
            let measured = (query_edges.len() + xz_mid.len() + z_mid.len()) as u64;
            ledger.check("edges per 3sum pair graph", measured, bound, "|Q|+(nA+nB)*d^2*L");
        }
    }
    let (zo, mo) = (nx as u32, (nx + nz) as u32);
    let mut edges: Vec<(u32, u32)> = query_edges.iter().map(|&(x, z)| (x, z + zo)).collect();
    edges.extend(xz_mid.iter().map(|&(x, m)| (x, m + mo)));
    edges.extend(z_mid.iter().map(|&(z, m)| (z + zo, m + mo)));
    let mut parts = vec![LEFT; nx];
    parts.extend(std::iter::repeat_n(RIGHT, nz));
    parts.extend(std::iter::repeat_n(MIDDLE, middle.len()));
    let graph = SparseGraph {
        node_count: parts.len(),
        edges,
        parts: Some(parts),
        queries: Some((0..query_edges.len() as u32).collect()),
    };
    ledger.record_graph(&graph);
    Ok(ReductionOutput { targets: vec![SumGraph { graph, middle, middle_start: mo }], ledger })
}

/// A target `c` routed to the bucket pair `(i, j)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SumQuery {
    pub i: usize,
    pub j: usize,
    pub c: Real,
}

/// Predecessor (largest sum `≤ c`) and successor (smallest sum `> c`)
/// among `A_i[k] + B_j[ℓ]`, as in-bucket positions `(k, ℓ)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SumBracket {
    pub pred: Option<(usize, usize)>,
    pub succ: Option<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct Variant1Result {
    pub answers: Vec<SumBracket>,
    pub stats: RoundStats,
    pub ledger: LedgerRow,
}

struct Ctx<'s> {
    bp: &'s BucketedPair,
    ranks: &'s SumRanks,
    queries: &'s [SumQuery],
    oracle: &'s dyn TriangleOracle,
    cfg: LasVegas,
    route: Route,
    cmp: &'s Comparisons,
    emitted: Cell<u64>,
    builds: Cell<u64>,
}

struct Overrun;

impl Ctx<'_> {
    fn split(&self) -> usize {
        if self.cfg.split {
            self.bp.d
        } else {
            0
        }
    }

    fn key(&self, q: usize, (k, l): (usize, usize)) -> (usize, usize, usize, usize) {
        (self.queries[q].i, self.queries[q].j, k, l)
    }

    fn strictly_inside(&self, q: usize, s: &SumBracket, kl: (usize, usize)) -> bool {
        let x = self.key(q, kl);
        s.pred.is_none_or(|p| self.bp.sum_cmp(self.key(q, p), x, self.cmp) == Ordering::Less)
            && s.succ.is_none_or(|h| self.bp.sum_cmp(x, self.key(q, h), self.cmp) == Ordering::Less)
    }

    /// Bracket from a single A-side position by binary search in `B_j`.
    fn anchor(&self, q: usize, k: usize) -> SumBracket {
        let SumQuery { i, j, c } = &self.queries[q];
        if k >= self.bp.a[*i].len() {
            return SumBracket::default();
        }
        let p = self.bp.at_most_in_row(*i, *j, k, c, self.cmp);
        SumBracket {
            pred: p.checked_sub(1).map(|l| (k, l)),
            succ: (p < self.bp.b[*j].len()).then_some((k, p)),
        }
    }

    fn emit(&self, n: usize) {
        self.emitted.set(self.emitted.get() + n as u64);
        self.builds.set(self.builds.get() + 1);
    }

    fn witness_round(
        &self,
        cols: &[usize],
        state: &[SumBracket],
        active: &[usize],
        ledger: &mut LedgerRow,
    ) -> Result<Vec<Option<(usize, usize)>>, ReductionError> {
        let quads = active
            .iter()
            .map(|&q| Quad { i: self.queries[q].i, j: self.queries[q].j, lo: state[q].pred, hi: state[q].succ })
            .collect();
        let out = build_3sum_graph(self.bp, self.ranks, &QuadrupleSets::Quads(quads), cols, active.len())?;
        self.emit(active.len());
        let levels = self.ranks.levels();
        let t = &out.targets[0];
        let graphs = prepare(vec![&t.graph], self.split(), levels * levels, ledger);
        let ans = self.oracle.witnesses(&graphs[0]);
        ledger.absorb(out.ledger.clone());
        if ans.len() != active.len() {
            return Err(ReductionError::OracleProtocol("answer count differs from query count".into()));
        }
        let mut result = vec![None; active.len()];
        for (p, (&q, w)) in active.iter().zip(ans).enumerate() {
            let Some(w) = w else { continue };
            let &key = t
                .middle_key(w)
                .ok_or_else(|| ReductionError::OracleProtocol(format!("witness {w} is not a middle node")))?;
            let SumQuery { i, j, .. } = self.queries[q];
            let (lo, hi) = (state[q].pred, state[q].succ);
            let kp = cols
                .iter()
                .copied()
                .filter(|&k| k < self.bp.a[i].len())
                .find(|&k| x_keys(self.ranks, i, lo.map(|p| p.0), hi.map(|p| p.0), k).contains(&key));
            let lp = (0..self.bp.b[j].len()).find(|&l| z_keys(self.ranks, j, lo.map(|p| p.1), hi.map(|p| p.1), l).contains(&key));
            match (kp, lp) {
                (Some(kp), Some(lp)) if self.strictly_inside(q, &state[q], (kp, lp)) => result[p] = Some((kp, lp)),
                _ => return Err(ReductionError::OracleProtocol(format!("witness {w} does not decode inside the bracket"))),
            }
        }
        Ok(result)
    }

    /// Triangle counts of one pair-mode graph, `None` entries answered as 0.
    fn pair_counts(
        &self,
        cols: &[usize],
        queries: Vec<Option<PairQuery>>,
        negated: bool,
        ledger: &mut LedgerRow,
    ) -> Result<Vec<u64>, ReductionError> {
        let live: Vec<PairQuery> = queries.iter().flatten().copied().collect();
        let mut result = vec![0; queries.len()];
        if live.is_empty() {
            return Ok(result);
        }
        let n = live.len();
        let out = build_3sum_graph(self.bp, self.ranks, &QuadrupleSets::Pairs { queries: live, negated }, cols, n)?;
        self.emit(n);
        let graphs = prepare(vec![&out.targets[0].graph], self.split(), self.ranks.levels(), ledger);
        let ans = self.oracle.counts(&graphs[0]);
        ledger.absorb(out.ledger);
        if ans.len() != n {
            return Err(ReductionError::OracleProtocol("answer count differs from query count".into()));
        }
        let mut it = ans.into_iter();
        for (r, q) in result.iter_mut().zip(&queries) {
            if q.is_some() {
                *r = it.next().expect("one answer per live query");
            }
        }
        Ok(result)
    }

    /// `#{(k', ℓ') : k' ∈ cols, sum(pred) < A_i[k'] + B_j[ℓ'] < sum(succ)}`
    /// as strictly below `succ` minus at most `pred`.
    fn between_count(
        &self,
        cols: &[usize],
        state: &[SumBracket],
        active: &[usize],
        ledger: &mut LedgerRow,
    ) -> Result<Vec<u64>, ReductionError> {
        let all: Vec<u64> = active
            .iter()
            .map(|&q| {
                let SumQuery { i, j, .. } = self.queries[q];
                (cols.iter().filter(|&&k| k < self.bp.a[i].len()).count() * self.bp.b[j].len()) as u64
            })
            .collect();
        let pq = |q: usize, kl: Option<(usize, usize)>| {
            kl.map(|(k, l)| PairQuery { i: self.queries[q].i, j: self.queries[q].j, k, l })
        };
        let below = self.pair_counts(cols, active.iter().map(|&q| pq(q, state[q].succ)).collect(), false, ledger)?;
        let above = self.pair_counts(cols, active.iter().map(|&q| pq(q, state[q].pred)).collect(), true, ledger)?;
        let mut out = Vec::with_capacity(active.len());
        for (p, &q) in active.iter().enumerate() {
            if below[p] > all[p] || above[p] > all[p] {
                return Err(ReductionError::OracleProtocol(format!("count exceeds the {} candidate pairs", all[p])));
            }
            let below = if state[q].succ.is_some() { below[p] } else { all[p] };
            let at_most = if state[q].pred.is_some() { all[p] - above[p] } else { 0 };
            out.push(
                below
                    .checked_sub(at_most)
                    .ok_or_else(|| ReductionError::OracleProtocol("counts contradict the bracket order".into()))?,
            );
        }
        Ok(out)
    }

    /// Bracket search through counts. A random subset of A-side positions
    /// whose inside pairs all share one `k'` reveals it bit by bit; `ℓ'`
    /// then comes from a binary search in `B_j`.
    fn counts_round(
        &self,
        cols: &[usize],
        state: &[SumBracket],
        active: &[usize],
        rng: &mut ChaCha8Rng,
        ledger: &mut LedgerRow,
    ) -> Result<Vec<Option<(usize, usize)>>, ReductionError> {
        let exist = self.between_count(cols, state, active, ledger)?;
        let mut pending: Vec<usize> = (0..active.len()).filter(|&p| exist[p] > 0).collect();
        let mut result = vec![None; active.len()];
        let m = cols.len();
        let sizes = usize::BITS - (m - 1).leading_zeros();
        let reps = log2_budget(1.0, self.bp.a.len().max(self.bp.b.len()) * self.bp.d).max(1);
        for _ in 0..=self.cfg.c_retry {
            for e in 0..=sizes {
                let size = (1usize << e).min(m);
                for _ in 0..reps {
                    if pending.is_empty() {
                        return Ok(result);
                    }
                    let mut t: Vec<usize> = sample(rng, m, size).into_iter().map(|p| cols[p]).collect();
                    t.sort_unstable();
                    let sub: Vec<usize> = pending.iter().map(|&p| active[p]).collect();
                    let total = self.between_count(&t, state, &sub, ledger)?;
                    let hit: Vec<usize> = (0..pending.len()).filter(|&x| total[x] > 0).collect();
                    if hit.is_empty() {
                        continue;
                    }
                    let sub: Vec<usize> = hit.iter().map(|&x| active[pending[x]]).collect();
                    let mut pos = vec![0usize; hit.len()];
                    let mut mixed = vec![false; hit.len()];
                    let bits = usize::BITS - (t.len() - 1).leading_zeros();
                    for bit in 0..bits {
                        let tb: Vec<usize> = t.iter().enumerate().filter(|(q, _)| q >> bit & 1 == 1).map(|(_, &k)| k).collect();
                        let ones = self.between_count(&tb, state, &sub, ledger)?;
                        for (h, &x) in hit.iter().enumerate() {
                            let zeros = total[x]
                                .checked_sub(ones[h])
                                .ok_or_else(|| ReductionError::OracleProtocol("subset count exceeds its superset".into()))?;
                            match (zeros > 0, ones[h] > 0) {
                                (true, true) => mixed[h] = true,
                                (false, true) => pos[h] |= 1 << bit,
                                _ => {}
                            }
                        }
                    }
                    for (h, &x) in hit.iter().enumerate() {
                        if mixed[h] {
                            continue;
                        }
                        let p = pending[x];
                        let q = active[p];
                        let SumQuery { i, j, .. } = self.queries[q];
                        let kp = *t.get(pos[h]).ok_or_else(|| ReductionError::OracleProtocol("bit pattern out of range".into()))?;
                        let lp = match (kp < self.bp.a[i].len(), state[q].pred) {
                            (false, _) => None,
                            (true, None) => Some(0),
                            (true, Some(lo)) => Some(self.bp.at_most_pair(i, j, kp, lo, self.cmp)),
                        };
                        match lp {
                            Some(lp) if lp < self.bp.b[j].len() && self.strictly_inside(q, &state[q], (kp, lp)) => {
                                result[p] = Some((kp, lp))
                            }
                            _ => return Err(ReductionError::OracleProtocol(format!("recovered {kp} has no pair inside the bracket"))),
                        }
                    }
                    pending.retain(|p| result[*p].is_none());
                }
            }
            if pending.is_empty() {
                return Ok(result);
            }
        }
        Err(ReductionError::RetryBudgetExhausted { attempts: self.cfg.c_retry + 1 })
    }

    fn round(
        &self,
        cols: &[usize],
        state: &[SumBracket],
        active: &[usize],
        rng: &mut ChaCha8Rng,
        ledger: &mut LedgerRow,
    ) -> Result<Vec<Option<(usize, usize)>>, ReductionError> {
        match self.route {
            Route::Witnesses => self.witness_round(cols, state, active, ledger),
            Route::Counts => self.counts_round(cols, state, active, rng, ledger),
        }
    }
}

fn recurse(
    ctx: &Ctx<'_>,
    cols: &[usize],
    active: &[usize],
    budget: usize,
    rng: &mut ChaCha8Rng,
    ledger: &mut LedgerRow,
    stats: &mut RoundStats,
) -> Result<Result<Vec<SumBracket>, Overrun>, ReductionError> {
    let mut state = vec![SumBracket::default(); ctx.queries.len()];
    if cols.len() == 1 {
        for &q in active {
            state[q] = ctx.anchor(q, cols[0]);
        }
        return Ok(Ok(state));
    }
    let half = random_half(cols, rng);
    state = match recurse(ctx, &half, active, budget, rng, ledger, stats)? {
        Ok(x) => x,
        Err(o) => return Ok(Err(o)),
    };
    let mut active = active.to_vec();
    let mut rounds = 0;
    loop {
        stats.oracle_rounds += 1;
        let found = ctx.round(cols, &state, &active, rng, ledger)?;
        let mut next = Vec::new();
        for (&q, f) in active.iter().zip(found) {
            let Some((kp, lp)) = f else { continue };
            // re-anchor: the best pair through k' on the side that moved
            let a = ctx.anchor(q, kp);
            let SumQuery { i, j, c } = &ctx.queries[q];
            if ctx.cmp.compare3(&ctx.bp.a[*i][kp], &ctx.bp.b[*j][lp], c) == Ordering::Greater {
                state[q].succ = a.succ;
            } else {
                state[q].pred = a.pred;
            }
            next.push(q);
        }
        if next.is_empty() {
            break;
        }
        rounds += 1;
        stats.improvement_rounds += 1;
        stats.max_level_rounds = stats.max_level_rounds.max(rounds);
        if rounds > budget {
            return Ok(Err(Overrun));
        }
        active = next;
    }
    Ok(Ok(state))
}

/// Predecessor and successor of every routed target among the sums of its
/// bucket pair, by recursion on random halves of the A-side positions.
pub fn solve_3sum_variant1(
    bp: &BucketedPair,
    queries: &[SumQuery],
    oracle: &dyn TriangleOracle,
    seed: u64,
    cfg: LasVegas,
    route: Route,
    cmp: &Comparisons,
) -> Result<Variant1Result, ReductionError> {
    if queries.iter().any(|q| q.i >= bp.a.len() || q.j >= bp.b.len()) {
        return Err(ReductionError::ShapeMismatch("query outside the buckets".into()));
    }
    let ranks = SumRanks::build(bp, cmp)?;
    let ctx = Ctx { bp, ranks: &ranks, queries, oracle, cfg, route, cmp, emitted: Cell::new(0), builds: Cell::new(0) };
    let mut ledger = LedgerRow::default();
    let mut stats = RoundStats::default();
    let active: Vec<usize> = (0..queries.len()).collect();
    if queries.is_empty() {
        return Ok(Variant1Result { answers: Vec::new(), stats, ledger });
    }
    let cols: Vec<usize> = (0..bp.d).collect();
    let budget = log2_budget(cfg.c_iter, (bp.a.len() + bp.b.len()) * bp.d);
    let mut rng = rng_for(seed);
    for attempt in 0..=cfg.c_retry {
        stats.restarts = attempt;
        if let Ok(answers) = recurse(&ctx, &cols, &active, budget, &mut rng, &mut ledger, &mut stats)? {
            for (q, s) in answers.iter().enumerate() {
                let c = &queries[q].c;
                let (i, j) = (queries[q].i, queries[q].j);
                let side = |kl: (usize, usize)| cmp.compare3(&bp.a[i][kl.0], &bp.b[j][kl.1], c);
                if s.pred.is_some_and(|p| side(p) == Ordering::Greater) || s.succ.is_some_and(|h| side(h) != Ordering::Greater) {
                    return Err(ReductionError::OracleProtocol(format!("bracket of query {q} is not around its target")));
                }
            }
            ledger.rounds += stats.oracle_rounds as u64;
            ledger.check(
                "quadruples emitted",
                ctx.emitted.get(),
                4 * ctx.builds.get() * queries.len() as u64,
                "4*oracle calls*routings",
            );
            return Ok(Variant1Result { answers, stats, ledger });
        }
    }
    Err(ReductionError::RetryBudgetExhausted { attempts: cfg.c_retry + 1 })
}

/// For each `c`, whether some `a + b + c = 0`: targets `-c` are routed
/// along the staircase of `A`-bucket × `B`-bucket pairs, and `c` is a yes
/// when one of its predecessors equals the target.
pub fn all_nums_3sum_via_sparse(
    inst: &ThreeSumInstance,
    d: usize,
    oracle: &dyn TriangleOracle,
    seed: u64,
    cfg: LasVegas,
    route: Route,
    cmp: &Comparisons,
) -> Result<(Vec<bool>, LedgerRow), ReductionError> {
    let targets: Vec<Real> = inst
        .c
        .iter()
        .map(|c| c.checked_neg().ok_or_else(|| ReductionError::InfiniteEntry(format!("3SUM value {c:?}"))))
        .collect::<Result<_, _>>()?;
    let bp = BucketedPair::new(&inst.a, &inst.b, d, cmp)?;
    let mut answer = vec![false; targets.len()];
    let mut ledger = LedgerRow::default();
    let (mut queries, mut owner) = (Vec::new(), Vec::new());
    for (o, c) in targets.iter().enumerate() {
        for (i, j) in staircase_pairs(&bp, c, cmp) {
            queries.push(SumQuery { i, j, c: c.clone() });
            owner.push(o);
        }
    }
    let per = (bp.a.len() + bp.b.len()).saturating_sub(1);
    ledger.check("routings", queries.len() as u64, (targets.len() * per) as u64, "|C|*(nA+nB-1)");
    let res = solve_3sum_variant1(&bp, &queries, oracle, seed, cfg, route, cmp)?;
    ledger.absorb(res.ledger);
    for ((q, s), &o) in queries.iter().zip(&res.answers).zip(&owner) {
        if let Some((k, l)) = s.pred {
            if cmp.compare3(&bp.a[q.i][k], &bp.b[q.j][l], &q.c) == Ordering::Equal {
                answer[o] = true;
            }
        }
    }
    Ok((answer, ledger))
}

// ---------------------------------------------------------------- exact triangle

/// 3SUM instance cut into bucket triples and re-encoded as exact-triangle
/// instances, with the part already settled by brute force.
#[derive(Clone, Debug)]
pub struct ExactTriReduction {
    /// Per `c`: found directly on the heavy bucket pairs.
    pub partial: Vec<bool>,
    pub graphs: Vec<WeightedTripartiteGraph>,
    pub valid_triples: usize,
    pub heavy_pairs: usize,
    pub ledger: LedgerRow,
}

impl ExactTriReduction {
    /// Answers per `c` from per-graph `I–J` exact-triangle answers.
    pub fn decode(&self, inst: &ThreeSumInstance, answers: &[Matrix<bool>], cmp: &Comparisons) -> Result<Vec<bool>, ReductionError> {
        if answers.len() != self.graphs.len() {
            return Err(ReductionError::ShapeMismatch(format!("{} answers for {} graphs", answers.len(), self.graphs.len())));
        }
        let mut out = self.partial.clone();
        for (g, ans) in self.graphs.iter().zip(answers) {
            if ans.rows() != g.w_ij.rows() || ans.cols() != g.w_ij.cols() {
                return Err(ReductionError::ShapeMismatch("answer matrix".into()));
            }
            for p in 0..ans.rows() {
                for q in 0..ans.cols() {
                    if !*ans.get(p, q) {
                        continue;
                    }
                    let v = g.w_ij.get(p, q);
                    if v.is_infinite() {
                        return Err(ReductionError::OracleProtocol(format!("triangle on absent edge ({p},{q})")));
                    }
                    for (o, c) in inst.c.iter().enumerate() {
                        if cmp.compare2(c, v) == Ordering::Equal {
                            out[o] = true;
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Sorts each list into `g` buckets, finds the bucket triples whose value
/// ranges admit a zero sum, brute-forces the bucket pairs with at least
/// `ceil(n^eps)` such triples and encodes the rest as exact-triangle
/// instances: parts are `A` buckets, `B` buckets and in-bucket position
/// pairs `(s, t)`, and each instance fixes one position in the `q`-th valid
/// `C` bucket of every pair.
pub fn real3sum_to_exact_tri(inst: &ThreeSumInstance, g: usize, eps: f64, cmp: &Comparisons) -> Result<ExactTriReduction, ReductionError> {
    let mut ledger = LedgerRow::default();
    let partial = vec![false; inst.c.len()];
    if inst.a.is_empty() || inst.b.is_empty() || inst.c.is_empty() {
        return Ok(ExactTriReduction { partial, graphs: Vec::new(), valid_triples: 0, heavy_pairs: 0, ledger });
    }
    let smallest = inst.a.len().min(inst.b.len()).min(inst.c.len());
    if g == 0 || g > smallest {
        return Err(ReductionError::BadBucketCount(g));
    }
    let neg_c: Vec<Real> = inst
        .c
        .iter()
        .map(|c| c.checked_neg().ok_or_else(|| ReductionError::InfiniteEntry(format!("3SUM value {c:?}"))))
        .collect::<Result<_, _>>()?;
    if let Some(x) = inst.a.iter().chain(&inst.b).find(|x| x.is_infinite()) {
        return Err(ReductionError::InfiniteEntry(format!("3SUM value {x:?}")));
    }
    let sz = |n: usize| ceil_div(n, g);
    let (sa, sb, sc) = (sz(inst.a.len()), sz(inst.b.len()), sz(inst.c.len()));
    let a = bucketize(&inst.a, sa, cmp);
    let b = bucketize(&inst.b, sb, cmp);
    let nc = bucketize(&neg_c, sc, cmp);

    // with x = -c in bucket r: valid iff min a + min b ≤ max x and
    // min x ≤ max a + max b; both ends of the range of r only grow with q
    let (ga, gb, gc) = (a.len(), b.len(), nc.len());
    let mut valid: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); gb]; ga];
    let mut triples = 0;
    for (p, ap) in a.iter().enumerate() {
        let (amin, amax) = BucketedPair::first_last(ap);
        let (mut lo, mut hi) = (0, 0);
        for (q, bq) in b.iter().enumerate() {
            let (bmin, bmax) = BucketedPair::first_last(bq);
            while lo < gc && cmp.compare3(amin, bmin, BucketedPair::first_last(&nc[lo]).1) == Ordering::Greater {
                lo += 1;
            }
            while hi < gc && cmp.compare3(amax, bmax, BucketedPair::first_last(&nc[hi]).0) != Ordering::Less {
                hi += 1;
            }
            valid[p][q] = (lo..hi).collect();
            triples += hi.saturating_sub(lo);
        }
    }
    ledger.check("valid bucket triples", triples as u64, (3 * g * g) as u64, "3*g^2");
    let n = inst.a.len().max(inst.b.len()).max(inst.c.len());
    let h = ((n as f64).powf(eps).ceil() as usize).max(1);

    let mut partial = partial;
    let mut sorted_c: Vec<(usize, &Real)> = inst.c.iter().enumerate().collect();
    sorted_c.sort_by(|x, y| cmp.compare2(x.1, y.1));
    let mut heavy = 0;
    for p in 0..ga {
        for q in 0..gb {
            if valid[p][q].len() < h {
                continue;
            }
            heavy += 1;
            for x in &a[p] {
                for y in &b[q] {
                    let s = x.add(y);
                    let Some(target) = s.checked_neg() else { continue };
                    let start = sorted_c.partition_point(|c| cmp.compare2(c.1, &target) == Ordering::Less);
                    for &(o, c) in &sorted_c[start..] {
                        if cmp.compare2(c, &target) != Ordering::Equal {
                            break;
                        }
                        partial[o] = true;
                    }
                }
            }
        }
    }

    let nk = sa * sb;
    let w_ik = Matrix::from_fn(ga, nk, |p, st| a[p].get(st / sb).cloned().unwrap_or_else(Real::infinity));
    let w_kj = Matrix::from_fn(nk, gb, |st, q| b[q].get(st % sb).cloned().unwrap_or_else(Real::infinity));
    let mut graphs = Vec::new();
    for idx in 0..h - 1 {
        for t in 0..sc {
            let w_ij = Matrix::from_fn(ga, gb, |p, q| {
                let v = &valid[p][q];
                if v.len() >= h {
                    return Real::infinity();
                }
                v.get(idx)
                    .and_then(|&r| nc[r].get(t))
                    .and_then(Real::checked_neg)
                    .unwrap_or_else(Real::infinity)
            });
            graphs.push(WeightedTripartiteGraph { w_ij, w_ik: w_ik.clone(), w_kj: w_kj.clone() });
        }
    }
    for gr in &graphs {
        let (i, j, k) = gr.sizes();
        ledger.record_sizes(1, (i + j + k) as u64, (i * j + i * k + k * j) as u64);
    }
    ledger.check("exact-triangle instances", graphs.len() as u64, ((h - 1) * sc) as u64, "(n^eps-1)*(n/g)");
    ledger.note("heavy pairs", heavy as u64);
    Ok(ExactTriReduction { partial, graphs, valid_triples: triples, heavy_pairs: heavy, ledger })
}
