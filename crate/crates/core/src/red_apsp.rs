//! Min-plus products and shortest paths through all-edges sparse triangle
//! detection, with Fredman-style rank tables and dyadic intervals.

use std::borrow::Cow;
use std::cmp::Ordering;
use std::collections::HashMap;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::instances::{rng_for, Real, SetDisjointnessInstance, SparseGraph, WeightedDigraph, LEFT, MIDDLE, RIGHT};
use crate::ledger::{ceil_div, log2_budget, LedgerRow, ReductionError, ReductionOutput};
use crate::matrix::Matrix;
use crate::numeric::{covering_halves, Comparisons, PairRanks, Side};
use crate::oracles::{sparse_degeneracy, TriangleOracle};

/// Knobs of the Las Vegas driver.
#[derive(Clone, Copy, Debug)]
pub struct LasVegas {
    /// Improvement rounds per recursion level are capped at `c_iter·log2(n+2)`.
    pub c_iter: f64,
    /// Full restarts before giving up.
    pub c_retry: usize,
    /// Split high-degree left nodes before calling the oracle.
    pub split: bool,
}

impl Default for LasVegas {
    fn default() -> Self {
        LasVegas { c_iter: 30.0, c_retry: 5, split: true }
    }
}

/// Round counts of one driver run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RoundStats {
    /// Oracle rounds, including the final one that finds nothing.
    pub oracle_rounds: usize,
    /// Rounds in which at least one pair improved, summed over levels.
    pub improvement_rounds: usize,
    /// Largest improvement-round count at a single recursion level.
    pub max_level_rounds: usize,
    pub restarts: usize,
}

impl RoundStats {
    pub(crate) fn merge(&mut self, o: RoundStats) {
        self.oracle_rounds += o.oracle_rounds;
        self.improvement_rounds += o.improvement_rounds;
        self.max_level_rounds = self.max_level_rounds.max(o.max_level_rounds);
        self.restarts += o.restarts;
    }
}

/// One tripartite graph `G_{k,P}` with its decode data.
///
/// Nodes are laid out as left `x[i]`, then right `z[j]`, then middle
/// `y[k', I]`; queries are the `x–z` edges in the order of `pairs`.
#[derive(Clone, Debug)]
pub struct VariantGraph {
    pub k: usize,
    pub chunk: usize,
    pub graph: SparseGraph,
    pub pairs: Vec<(u32, u32)>,
    /// Inner index of each middle node, offset by `middle_start`.
    pub middle_col: Vec<u32>,
    pub middle_start: u32,
}

impl VariantGraph {
    pub fn middle_index(&self, node: u32) -> Option<usize> {
        node.checked_sub(self.middle_start).and_then(|m| self.middle_col.get(m as usize)).map(|&c| c as usize)
    }
}

/// Rank tables of one strip, reused through the whole recursion.
pub struct Strip<'a> {
    pub a: &'a Matrix<Real>,
    pub b: &'a Matrix<Real>,
    pub ranks: PairRanks,
}

impl<'a> Strip<'a> {
    pub fn new(a: &'a Matrix<Real>, b: &'a Matrix<Real>, cmp: &Comparisons) -> Result<Self, ReductionError> {
        if a.cols() != b.rows() || a.cols() == 0 {
            return Err(ReductionError::ShapeMismatch(format!(
                "A is {}x{}, B is {}x{}",
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols()
            )));
        }
        Ok(Strip { a, b, ranks: PairRanks::build(a, b, cmp) })
    }

    /// `A[i,cand] + B[cand,j] < A[i,k] + B[k,j]`.
    pub fn improves(&self, i: usize, j: usize, k: usize, cand: usize, cmp: &Comparisons) -> bool {
        cmp.compare4(self.a.get(i, cand), self.b.get(cand, j), self.a.get(i, k), self.b.get(k, j)) == Ordering::Less
    }
}

/// The graphs for the index matrix `k` over candidate columns `cols`,
/// restricted to the pairs in `active`.
pub fn variant_graphs(
    strip: &Strip<'_>,
    cols: &[usize],
    k: &Matrix<usize>,
    active: &[(u32, u32)],
) -> ReductionOutput<VariantGraph> {
    let (n1, n2) = (strip.a.rows(), strip.b.cols());
    let d = cols.len();
    let chunk = ceil_div(n1 * n2, d).max(1);
    let mut by_k: Vec<Vec<(u32, u32)>> = vec![Vec::new(); strip.a.cols()];
    for &(i, j) in active {
        by_k[*k.get(i as usize, j as usize)].push((i, j));
    }
    let mut jobs = Vec::new();
    for (kk, pairs) in by_k.iter().enumerate() {
        for (c, part) in pairs.chunks(chunk).enumerate() {
            jobs.push((kk, c, part));
        }
    }
    let targets: Vec<VariantGraph> =
        jobs.par_iter().map(|&(kk, c, part)| build_one(strip, cols, kk, c, part)).collect();

    let mut ledger = LedgerRow::default();
    let levels = strip.ranks.max_universe_log() as usize + 1;
    let n = n1.max(n2);
    // counting callers may place k outside the strip; then each distinct k
    // adds at most one partial chunk
    let distinct = by_k.iter().filter(|p| !p.is_empty()).count();
    let in_strip = by_k.iter().enumerate().all(|(kk, p)| p.is_empty() || cols.contains(&kk));
    if in_strip {
        ledger.check("graphs per round", targets.len() as u64, 2 * d as u64, "2*d");
    } else {
        ledger.check("graphs per round, outside k", targets.len() as u64, (distinct + d) as u64, "distinct k + d");
    }
    for t in &targets {
        // degeneracy is measured later, on the graph the oracle receives
        ledger.record_sizes(1, t.graph.node_count as u64, t.graph.edges.len() as u64);
        ledger.check(
            "edges per graph",
            t.graph.edges.len() as u64,
            (ceil_div(n1 * n2, d) + 2 * n * d * levels) as u64,
            "ceil(n^2/d) + 2*n*d*levels",
        );
        ledger.check("query edges per graph", t.pairs.len() as u64, chunk as u64, "ceil(n^2/d)");
    }
    ledger.note("levels", levels);
    ledger.note("universe_log_loose", crate::numeric::universe_log_for(4 * d * d * n));
    ReductionOutput { targets, ledger }
}

fn build_one(strip: &Strip<'_>, cols: &[usize], k: usize, chunk: usize, pairs: &[(u32, u32)]) -> VariantGraph {
    let mut rows: Vec<u32> = pairs.iter().map(|p| p.0).collect();
    let mut colsj: Vec<u32> = pairs.iter().map(|p| p.1).collect();
    rows.sort_unstable();
    rows.dedup();
    colsj.sort_unstable();
    colsj.dedup();
    let nx = rows.len() as u32;
    let nz = colsj.len() as u32;
    let x_of: HashMap<u32, u32> = rows.iter().enumerate().map(|(p, &i)| (i, p as u32)).collect();
    let z_of: HashMap<u32, u32> = colsj.iter().enumerate().map(|(p, &j)| (j, nx + p as u32)).collect();
    let start = nx + nz;
    let mut edges: Vec<(u32, u32)> = pairs.iter().map(|(i, j)| (x_of[i], z_of[j])).collect();
    let mut middle: HashMap<(u32, u32, u64), u32> = HashMap::new();
    let mut middle_col = Vec::new();
    for (xi, &i) in rows.iter().enumerate() {
        for &kp in cols {
            if kp == k {
                continue;
            }
            let l = strip.ranks.universe_log(k, kp);
            for iv in covering_halves(strip.ranks.a_rank(k, kp, i as usize), l, Side::Left) {
                let id = *middle.entry((kp as u32, iv.level, iv.index)).or_insert_with(|| {
                    middle_col.push(kp as u32);
                    start + middle_col.len() as u32 - 1
                });
                edges.push((xi as u32, id));
            }
        }
    }
    for (zj, &j) in colsj.iter().enumerate() {
        for &kp in cols {
            if kp == k {
                continue;
            }
            let l = strip.ranks.universe_log(k, kp);
            for iv in covering_halves(strip.ranks.b_rank(k, kp, j as usize), l, Side::Right) {
                // a middle node with no left neighbour closes no triangle
                if let Some(&id) = middle.get(&(kp as u32, iv.level, iv.index)) {
                    edges.push((id, nx + zj as u32));
                }
            }
        }
    }
    let node_count = (start as usize) + middle_col.len();
    let mut parts = vec![MIDDLE; node_count];
    parts[..nx as usize].fill(LEFT);
    parts[nx as usize..start as usize].fill(RIGHT);
    let graph = SparseGraph {
        node_count,
        edges,
        parts: Some(parts),
        queries: Some((0..pairs.len() as u32).collect()),
    };
    VariantGraph { k, chunk, graph, pairs: pairs.to_vec(), middle_col, middle_start: start }
}

/// Builds the graphs for `k` over every pair and every inner index.
pub fn build_variant_graphs(
    a: &Matrix<Real>,
    b: &Matrix<Real>,
    k: &Matrix<usize>,
    cmp: &Comparisons,
) -> Result<ReductionOutput<VariantGraph>, ReductionError> {
    let strip = Strip::new(a, b, cmp)?;
    if k.rows() != a.rows() || k.cols() != b.cols() || k.data().iter().any(|&x| x >= a.cols()) {
        return Err(ReductionError::ShapeMismatch("index matrix".into()));
    }
    let cols: Vec<usize> = (0..a.cols()).collect();
    Ok(variant_graphs(&strip, &cols, k, &all_pairs(a.rows(), b.cols())))
}

pub(crate) fn all_pairs(n1: usize, n2: usize) -> Vec<(u32, u32)> {
    (0..n1 as u32).flat_map(|i| (0..n2 as u32).map(move |j| (i, j))).collect()
}

/// The graphs as the oracle sees them: split to degeneracy `O(d·levels)`
/// when `split` is nonzero, with the measured degeneracy checked.
pub(crate) fn prepare<'g>(
    graphs: Vec<&'g SparseGraph>,
    split: usize,
    levels: usize,
    ledger: &mut LedgerRow,
) -> Vec<Cow<'g, SparseGraph>> {
    let out: Vec<(Cow<'g, SparseGraph>, usize)> = graphs
        .into_par_iter()
        .map(|g| {
            let g = if split > 0 { Cow::Owned(split_for_degeneracy(g, split).graph) } else { Cow::Borrowed(g) };
            let dg = sparse_degeneracy(&g);
            (g, dg)
        })
        .collect();
    let mut v = Vec::with_capacity(out.len());
    for (g, dg) in out {
        ledger.degeneracy = ledger.degeneracy.max(dg as u64);
        if split > 0 {
            ledger.check("degeneracy after split", dg as u64, (3 * split * levels) as u64, "3*d*levels");
        }
        v.push(g);
    }
    v
}

/// One oracle round: an improving index per active pair, or `None`.
pub fn solve_variant_on(
    strip: &Strip<'_>,
    cols: &[usize],
    k: &Matrix<usize>,
    active: &[(u32, u32)],
    oracle: &dyn TriangleOracle,
    split: bool,
    cmp: &Comparisons,
    ledger: &mut LedgerRow,
) -> Result<Vec<Option<usize>>, ReductionError> {
    let out = variant_graphs(strip, cols, k, active);
    let levels = strip.ranks.max_universe_log() as usize + 1;
    let graphs = prepare(out.targets.iter().map(|t| &t.graph).collect(), if split { cols.len() } else { 0 }, levels, ledger);
    let answers: Vec<Vec<Option<u32>>> = graphs.par_iter().map(|g| oracle.witnesses(g)).collect();
    ledger.absorb(out.ledger);
    let index: HashMap<(u32, u32), usize> = active.iter().enumerate().map(|(p, &q)| (q, p)).collect();
    let mut result = vec![None; active.len()];
    for (t, ans) in out.targets.iter().zip(answers) {
        if ans.len() != t.pairs.len() {
            return Err(ReductionError::OracleProtocol("answer count differs from query count".into()));
        }
        for (&(i, j), w) in t.pairs.iter().zip(ans) {
            let Some(w) = w else { continue };
            let kp = t
                .middle_index(w)
                .ok_or_else(|| ReductionError::OracleProtocol(format!("witness {w} is not a middle node")))?;
            if !strip.improves(i as usize, j as usize, t.k, kp, cmp) {
                return Err(ReductionError::OracleProtocol(format!("witness {kp} does not improve ({i},{j})")));
            }
            result[index[&(i, j)]] = Some(kp);
        }
    }
    Ok(result)
}

/// For each pair, some index strictly better than `k[i,j]`, if one exists.
pub fn solve_variant(
    a: &Matrix<Real>,
    b: &Matrix<Real>,
    k: &Matrix<usize>,
    oracle: &dyn TriangleOracle,
    cmp: &Comparisons,
) -> Result<Matrix<Option<usize>>, ReductionError> {
    let strip = Strip::new(a, b, cmp)?;
    let cols: Vec<usize> = (0..a.cols()).collect();
    let pairs = all_pairs(a.rows(), b.cols());
    let mut ledger = LedgerRow::default();
    let found = solve_variant_on(&strip, &cols, k, &pairs, oracle, false, cmp, &mut ledger)?;
    Ok(Matrix::from_vec(a.rows(), b.cols(), found).expect("one answer per pair"))
}

/// Result of a Las Vegas min-plus run.
#[derive(Clone, Debug)]
pub struct MinPlusResult {
    pub values: Matrix<Real>,
    pub argmin: Matrix<usize>,
    pub stats: RoundStats,
    pub ledger: LedgerRow,
}

struct Overrun;

/// Min-plus product of an `n1×d` and a `d×n2` matrix: recurse on a random
/// half of the columns, then improve through oracle rounds until stable.
pub fn min_plus_rect(
    a: &Matrix<Real>,
    b: &Matrix<Real>,
    oracle: &dyn TriangleOracle,
    seed: u64,
    cfg: LasVegas,
    cmp: &Comparisons,
) -> Result<MinPlusResult, ReductionError> {
    let strip = Strip::new(a, b, cmp)?;
    let mut rng = rng_for(seed);
    let budget = log2_budget(cfg.c_iter, a.rows().max(b.cols()));
    let cols: Vec<usize> = (0..a.cols()).collect();
    let mut ledger = LedgerRow::default();
    let mut stats = RoundStats::default();
    for attempt in 0..=cfg.c_retry {
        stats.restarts = attempt;
        match recurse(&strip, &cols, &mut rng, oracle, budget, cfg.split, cmp, &mut ledger, &mut stats)? {
            Ok(argmin) => {
                let values = Matrix::from_fn(a.rows(), b.cols(), |i, j| {
                    let k = *argmin.get(i, j);
                    a.get(i, k).add(b.get(k, j))
                });
                ledger.rounds += stats.oracle_rounds as u64;
                return Ok(MinPlusResult { values, argmin, stats, ledger });
            }
            Err(Overrun) => continue,
        }
    }
    Err(ReductionError::RetryBudgetExhausted { attempts: cfg.c_retry + 1 })
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    strip: &Strip<'_>,
    cols: &[usize],
    rng: &mut ChaCha8Rng,
    oracle: &dyn TriangleOracle,
    budget: usize,
    split: bool,
    cmp: &Comparisons,
    ledger: &mut LedgerRow,
    stats: &mut RoundStats,
) -> Result<Result<Matrix<usize>, Overrun>, ReductionError> {
    let (n1, n2) = (strip.a.rows(), strip.b.cols());
    if cols.len() == 1 {
        return Ok(Ok(Matrix::from_fn(n1, n2, |_, _| cols[0])));
    }
    let half = random_half(cols, rng);
    let mut k = match recurse(strip, &half, rng, oracle, budget, split, cmp, ledger, stats)? {
        Ok(k) => k,
        Err(o) => return Ok(Err(o)),
    };
    let mut active = all_pairs(n1, n2);
    let mut rounds = 0;
    loop {
        stats.oracle_rounds += 1;
        let found = solve_variant_on(strip, cols, &k, &active, oracle, split, cmp, ledger)?;
        let mut next = Vec::new();
        for (&(i, j), f) in active.iter().zip(found) {
            if let Some(kp) = f {
                k.set(i as usize, j as usize, kp);
                next.push((i, j));
            }
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
        // pairs without an improvement are final at this level
        active = next;
    }
    Ok(Ok(k))
}

pub(crate) fn random_half(cols: &[usize], rng: &mut impl Rng) -> Vec<usize> {
    let m = cols.len().div_ceil(2);
    let mut idx: Vec<usize> = sample(rng, cols.len(), m).into_iter().map(|p| cols[p]).collect();
    idx.sort_unstable();
    idx
}

/// Splits the inner dimension into strips of width `d` (the last may be
/// short), solves each through [`min_plus_rect`], and keeps the best.
pub fn min_plus_square(
    a: &Matrix<Real>,
    b: &Matrix<Real>,
    d: usize,
    oracle: &dyn TriangleOracle,
    seed: u64,
    cfg: LasVegas,
    cmp: &Comparisons,
) -> Result<MinPlusResult, ReductionError> {
    if d == 0 || a.cols() != b.rows() || a.cols() == 0 {
        return Err(ReductionError::ShapeMismatch("strip width or inner dimension".into()));
    }
    let m = a.cols();
    let strips: Vec<Vec<usize>> = (0..m).step_by(d).map(|s| (s..(s + d).min(m)).collect()).collect();
    let mut rng = rng_for(seed);
    let seeds: Vec<u64> = strips.iter().map(|_| rng.gen()).collect();
    let parts: Vec<Result<MinPlusResult, ReductionError>> = strips
        .par_iter()
        .zip(seeds.par_iter())
        .map(|(cols, &s)| min_plus_rect(&a.select_cols(cols), &b.select_rows(cols), oracle, s, cfg, cmp))
        .collect();
    let mut best: Option<Matrix<usize>> = None;
    let mut ledger = LedgerRow::default();
    let mut stats = RoundStats::default();
    for (cols, part) in strips.iter().zip(parts) {
        let part = part?;
        stats.merge(part.stats);
        ledger.absorb(part.ledger);
        let local = part.argmin.map(|&k| cols[k]);
        best = Some(match best {
            None => local,
            Some(cur) => Matrix::from_fn(a.rows(), b.cols(), |i, j| {
                let (x, y) = (*cur.get(i, j), *local.get(i, j));
                if cmp.compare4(a.get(i, y), b.get(y, j), a.get(i, x), b.get(x, j)) == Ordering::Less {
                    y
                } else {
                    x
                }
            }),
        });
    }
    let argmin = best.expect("at least one strip");
    let values = Matrix::from_fn(a.rows(), b.cols(), |i, j| {
        let k = *argmin.get(i, j);
        a.get(i, k).add(b.get(k, j))
    });
    Ok(MinPlusResult { values, argmin, stats, ledger })
}

/// All-pairs distances by repeated min-plus squaring.
pub fn apsp(
    g: &WeightedDigraph,
    d: usize,
    oracle: &dyn TriangleOracle,
    seed: u64,
    cfg: LasVegas,
    cmp: &Comparisons,
) -> Result<(Matrix<Real>, LedgerRow), ReductionError> {
    let n = g.node_count;
    let mut dist = g.adjacency(cmp);
    let mut ledger = LedgerRow::default();
    if n == 0 {
        return Ok((dist, ledger));
    }
    let squarings = (n as f64).log2().ceil() as usize;
    let mut rng = rng_for(seed);
    for _ in 0..squarings {
        let r = min_plus_square(&dist, &dist, d.min(n), oracle, rng.gen(), cfg, cmp)?;
        ledger.absorb(r.ledger);
        dist = r.values;
    }
    let zero = Real::zero();
    if (0..n).any(|i| cmp.compare2(dist.get(i, i), &zero) == Ordering::Less) {
        return Err(ReductionError::NegativeCycleDetected);
    }
    Ok((dist, ledger))
}

/// A graph after left-node splitting. Queries keep their order, and the
/// original nodes keep their ids, so middle-node witnesses carry over.
#[derive(Clone, Debug)]
pub struct SplitGraph {
    pub graph: SparseGraph,
    /// Original node of every node.
    pub origin: Vec<u32>,
}

/// Gives every left node with more than `d` right neighbours
/// `ceil(deg/d)` copies, each holding up to `d` of the right edges and all
/// of the middle edges.
pub fn split_for_degeneracy(g: &SparseGraph, d: usize) -> SplitGraph {
    let d = d.max(1);
    let parts = g.parts.as_ref().expect("tripartite graph");
    let n = g.node_count;
    let mut right_edges: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut middle_edges: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (e, &(u, v)) in g.edges.iter().enumerate() {
        let (l, other) = match (parts[u as usize], parts[v as usize]) {
            (LEFT, _) => (u, v),
            (_, LEFT) => (v, u),
            _ => continue,
        };
        if parts[other as usize] == RIGHT {
            right_edges[l as usize].push(e);
        } else {
            middle_edges[l as usize].push(e);
        }
    }
    let mut origin: Vec<u32> = (0..n as u32).collect();
    let mut new_parts = parts.clone();
    // copy index of each left endpoint per edge
    let mut owner: Vec<u32> = vec![u32::MAX; g.edges.len()];
    let mut extra_middle: Vec<(u32, u32)> = Vec::new();
    for x in 0..n {
        if parts[x] != LEFT || right_edges[x].len() <= d {
            continue;
        }
        for (c, group) in right_edges[x].chunks(d).enumerate() {
            let id = if c == 0 {
                x as u32
            } else {
                origin.push(x as u32);
                new_parts.push(LEFT);
                (origin.len() - 1) as u32
            };
            for &e in group {
                owner[e] = id;
            }
            if c > 0 {
                for &e in &middle_edges[x] {
                    let (u, v) = g.edges[e];
                    let m = if u as usize == x { v } else { u };
                    extra_middle.push((id, m));
                }
            }
        }
    }
    let mut edges: Vec<(u32, u32)> = g
        .edges
        .iter()
        .enumerate()
        .map(|(e, &(u, v))| {
            if owner[e] == u32::MAX {
                (u, v)
            } else if parts[u as usize] == LEFT {
                (owner[e], v)
            } else {
                (u, owner[e])
            }
        })
        .collect();
    edges.extend(extra_middle);
    let graph = SparseGraph { node_count: origin.len(), edges, parts: Some(new_parts), queries: g.queries.clone() };
    SplitGraph { graph, origin }
}

/// A graph with its low-degree middle nodes removed and their query
/// answers resolved directly.
#[derive(Clone, Debug)]
pub struct Pruned {
    pub graph: SparseGraph,
    /// Original id of every kept node.
    pub node_map: Vec<u32>,
    /// Per query (in order): a middle witness among the pruned nodes.
    pub resolved: Vec<Option<u32>>,
    pub remaining_middle: usize,
}

impl Pruned {
    /// Resolved answers merged with oracle witnesses on the pruned graph,
    /// in original node ids.
    pub fn combine(&self, oracle_witness: &[Option<u32>]) -> Vec<Option<u32>> {
        self.resolved
            .iter()
            .zip(oracle_witness)
            .map(|(r, w)| r.or_else(|| w.map(|w| self.node_map[w as usize])))
            .collect()
    }
}

/// Enumerates the left×right neighbour pairs of every middle node with
/// degree at most `threshold`, resolves the query edges they close, and
/// deletes those nodes.
pub fn prune_low_degree_middle(g: &SparseGraph, threshold: usize) -> Pruned {
    let parts = g.parts.as_ref().expect("tripartite graph");
    let n = g.node_count;
    let queries = g.query_edges();
    let qindex: HashMap<(u32, u32), usize> = queries
        .iter()
        .enumerate()
        .map(|(q, &e)| {
            let (u, v) = g.edges[e];
            ((u.min(v), u.max(v)), q)
        })
        .collect();
    let mut nbrs: Vec<Vec<u32>> = vec![Vec::new(); n];
    for &(u, v) in &g.edges {
        if parts[u as usize] == MIDDLE {
            nbrs[u as usize].push(v);
        }
        if parts[v as usize] == MIDDLE {
            nbrs[v as usize].push(u);
        }
    }
    let mut resolved = vec![None; queries.len()];
    let mut removed = vec![false; n];
    if threshold > 0 {
        for y in 0..n {
            if parts[y] != MIDDLE || nbrs[y].len() > threshold {
                continue;
            }
            removed[y] = true;
            let (ls, rs): (Vec<u32>, Vec<u32>) = nbrs[y].iter().partition(|&&w| parts[w as usize] == LEFT);
            for &l in &ls {
                for &r in &rs {
                    if let Some(&q) = qindex.get(&(l.min(r), l.max(r))) {
                        resolved[q].get_or_insert(y as u32);
                    }
                }
            }
        }
    }
    let mut new_id = vec![u32::MAX; n];
    let mut node_map = Vec::new();
    for v in 0..n {
        if !removed[v] {
            new_id[v] = node_map.len() as u32;
            node_map.push(v as u32);
        }
    }
    let mut edges = Vec::new();
    let mut edge_new = vec![u32::MAX; g.edges.len()];
    for (e, &(u, v)) in g.edges.iter().enumerate() {
        if !removed[u as usize] && !removed[v as usize] {
            edge_new[e] = edges.len() as u32;
            edges.push((new_id[u as usize], new_id[v as usize]));
        }
    }
    let remaining_middle =
        node_map.iter().filter(|&&v| parts[v as usize] == MIDDLE && !nbrs[v as usize].is_empty()).count();
    let graph = SparseGraph {
        node_count: node_map.len(),
        edges,
        parts: Some(node_map.iter().map(|&v| parts[v as usize]).collect()),
        // query edges are left–right, never incident to a pruned node
        queries: Some(queries.iter().map(|&e| edge_new[e]).collect()),
    };
    Pruned { graph, node_map, resolved, remaining_middle }
}

/// Set-Disjointness view of a tripartite graph: the universe is the middle
/// part, each left or right node contributes its middle neighbourhood, and
/// each query edge asks whether its endpoints' sets are disjoint.
pub fn sparse_tri_to_set_disjointness(g: &SparseGraph) -> (SetDisjointnessInstance, Vec<u32>) {
    let parts = g.parts.as_ref().expect("tripartite graph");
    let mut middle_id = vec![u32::MAX; g.node_count];
    let mut set_id = vec![u32::MAX; g.node_count];
    let mut members = Vec::new();
    let mut universe = 0;
    for v in 0..g.node_count {
        if parts[v] == MIDDLE {
            middle_id[v] = universe as u32;
            universe += 1;
        } else {
            set_id[v] = members.len() as u32;
            members.push(v as u32);
        }
    }
    let mut family: Vec<Vec<u32>> = vec![Vec::new(); members.len()];
    for &(u, v) in &g.edges {
        match (parts[u as usize] == MIDDLE, parts[v as usize] == MIDDLE) {
            (true, false) => family[set_id[v as usize] as usize].push(middle_id[u as usize]),
            (false, true) => family[set_id[u as usize] as usize].push(middle_id[v as usize]),
            _ => {}
        }
    }
    for s in &mut family {
        s.sort_unstable();
    }
    let queries = g
        .query_edges()
        .into_iter()
        .map(|e| {
            let (u, v) = g.edges[e];
            (set_id[u as usize], set_id[v as usize])
        })
        .collect();
    (SetDisjointnessInstance { universe, family, queries }, members)
}
