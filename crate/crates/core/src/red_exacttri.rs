//! Exact triangle through sparse triangle detection: predecessor and
//! successor search over a strip of inner indices, plus the counting route
//! with sampled witness recovery.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::instances::{rng_for, Real, SparseGraph, WeightedTripartiteGraph, LEFT, MIDDLE, RIGHT};
use crate::ledger::{ceil_div, log2_budget, LedgerRow, ReductionError, ReductionOutput};
use crate::matrix::Matrix;
use crate::numeric::{covering_halves, Comparisons, Side};
use crate::oracles::{PredSucc, TriangleOracle};
use crate::red_apsp::{all_pairs, prepare, random_half, variant_graphs, LasVegas, RoundStats, Strip};

/// Current bracket of every pair: `lo` has sum `≤ C[i,j]`, `hi` has sum
/// `> C[i,j]`. `None` is the `-inf` / `+inf` sentinel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredSuccState {
    pub lo: Matrix<Option<usize>>,
    pub hi: Matrix<Option<usize>>,
    pub c: Matrix<Real>,
}

impl PredSuccState {
    /// Both sides unset for every pair.
    pub fn open(c: Matrix<Real>) -> Self {
        let (r, k) = (c.rows(), c.cols());
        PredSuccState { lo: Matrix::from_fn(r, k, |_, _| None), hi: Matrix::from_fn(r, k, |_, _| None), c }
    }

    pub fn to_pred_succ(&self) -> Matrix<PredSucc> {
        Matrix::from_fn(self.c.rows(), self.c.cols(), |i, j| PredSucc { pred: *self.lo.get(i, j), succ: *self.hi.get(i, j) })
    }
}

/// How a round finds an index strictly inside the bracket.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// Witness triangles on the bracket graphs.
    Witnesses,
    /// Triangle counts on the single-index graphs, then sampling.
    Counts,
}

/// One bracket graph `G_{k⁻,k⁺,P}` with its decode data. Layout as in
/// [`crate::red_apsp::VariantGraph`].
#[derive(Clone, Debug)]
pub struct ExactTriGraph {
    pub lo: Option<usize>,
    pub hi: Option<usize>,
    pub chunk: usize,
    pub graph: SparseGraph,
    pub pairs: Vec<(u32, u32)>,
    pub middle_col: Vec<u32>,
    pub middle_start: u32,
}

impl ExactTriGraph {
    pub fn middle_index(&self, node: u32) -> Option<usize> {
        node.checked_sub(self.middle_start).and_then(|m| self.middle_col.get(m as usize)).map(|&c| c as usize)
    }
}

fn sum_cmp(strip: &Strip<'_>, i: usize, j: usize, x: usize, y: usize, cmp: &Comparisons) -> Ordering {
    cmp.compare4(strip.a.get(i, x), strip.b.get(x, j), strip.a.get(i, y), strip.b.get(y, j))
}

fn strictly_between(
    strip: &Strip<'_>,
    i: usize,
    j: usize,
    lo: Option<usize>,
    hi: Option<usize>,
    kp: usize,
    cmp: &Comparisons,
) -> bool {
    lo.map_or(true, |l| sum_cmp(strip, i, j, l, kp, cmp) == Ordering::Less)
        && hi.map_or(true, |h| sum_cmp(strip, i, j, kp, h, cmp) == Ordering::Less)
}

const OPEN: (u32, u64) = (u32::MAX, 0);

/// Graphs whose triangles through `x[i] z[j]` are exactly the indices of
/// `cols` strictly between `lo[i,j]` and `hi[i,j]`.
pub fn between_graphs(
    strip: &Strip<'_>,
    cols: &[usize],
    lo: &Matrix<Option<usize>>,
    hi: &Matrix<Option<usize>>,
    active: &[(u32, u32)],
) -> ReductionOutput<ExactTriGraph> {
    let (n1, n2) = (strip.a.rows(), strip.b.cols());
    let d = cols.len();
    let chunk2 = ceil_div(n1 * n2, d * d).max(1);
    let chunk1 = ceil_div(n1 * n2, d).max(1);
    let mut groups: BTreeMap<(Option<usize>, Option<usize>), Vec<(u32, u32)>> = BTreeMap::new();
    for &(i, j) in active {
        groups.entry((*lo.get(i as usize, j as usize), *hi.get(i as usize, j as usize))).or_default().push((i, j));
    }
    let mut jobs = Vec::new();
    for (&(l, h), pairs) in &groups {
        let chunk = if l.is_some() && h.is_some() { chunk2 } else { chunk1 };
        for part in pairs.chunks(chunk) {
            jobs.push((l, h, chunk, part));
        }
    }
    let targets: Vec<ExactTriGraph> =
        jobs.par_iter().map(|&(l, h, chunk, part)| build_between(strip, cols, l, h, chunk, part)).collect();

    let mut ledger = LedgerRow::default();
    let levels = strip.ranks.max_universe_log() as usize + 1;
    let n = n1.max(n2);
    let (two, one): (Vec<&ExactTriGraph>, Vec<&ExactTriGraph>) =
        targets.iter().partition(|t| t.lo.is_some() && t.hi.is_some());
    ledger.check("two-sided graphs per round", two.len() as u64, (2 * d * d) as u64, "2*d^2");
    ledger.check("one-sided graphs per round", one.len() as u64, (3 * d + 1) as u64, "3*d+1");
    for t in &two {
        ledger.check(
            "edges per two-sided graph",
            t.graph.edges.len() as u64,
            (chunk2 + 2 * n * d * levels * levels) as u64,
            "ceil(n^2/d^2) + 2*n*d*levels^2",
        );
    }
    for t in &one {
        ledger.check(
            "edges per one-sided graph",
            t.graph.edges.len() as u64,
            (chunk1 + 2 * n * d * levels) as u64,
            "ceil(n^2/d) + 2*n*d*levels",
        );
    }
    for t in &targets {
        ledger.record_sizes(1, t.graph.node_count as u64, t.graph.edges.len() as u64);
    }
    ledger.note("levels", levels);
    ReductionOutput { targets, ledger }
}

type MiddleKey = (u32, (u32, u64), (u32, u64));

fn side_keys(strip: &Strip<'_>, kp: usize, lo: Option<usize>, hi: Option<usize>, at: usize, side: Side) -> Vec<MiddleKey> {
    let r = &strip.ranks;
    let rank = |reference: usize, candidate: usize| match side {
        Side::Left => r.a_rank(reference, candidate, at),
        Side::Right => r.b_rank(reference, candidate, at),
    };
    let below: Vec<(u32, u64)> = match lo {
        Some(l) => covering_halves(rank(kp, l), r.universe_log(kp, l), side).iter().map(|v| (v.level, v.index)).collect(),
        None => vec![OPEN],
    };
    let above: Vec<(u32, u64)> = match hi {
        Some(h) => covering_halves(rank(h, kp), r.universe_log(h, kp), side).iter().map(|v| (v.level, v.index)).collect(),
        None => vec![OPEN],
    };
    let mut out = Vec::with_capacity(below.len() * above.len());
    for &b in &below {
        for &a in &above {
            out.push((kp as u32, b, a));
        }
    }
    out
}

fn build_between(
    strip: &Strip<'_>,
    cols: &[usize],
    lo: Option<usize>,
    hi: Option<usize>,
    chunk: usize,
    pairs: &[(u32, u32)],
) -> ExactTriGraph {
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
    let mut middle: HashMap<MiddleKey, u32> = HashMap::new();
    let mut middle_col = Vec::new();
    let inner = cols.iter().copied().filter(|&kp| Some(kp) != lo && Some(kp) != hi);
    for (xi, &i) in rows.iter().enumerate() {
        for kp in inner.clone() {
            for key in side_keys(strip, kp, lo, hi, i as usize, Side::Left) {
                let id = *middle.entry(key).or_insert_with(|| {
                    middle_col.push(kp as u32);
                    start + middle_col.len() as u32 - 1
                });
                edges.push((xi as u32, id));
            }
        }
    }
    for (zj, &j) in colsj.iter().enumerate() {
        for kp in inner.clone() {
            for key in side_keys(strip, kp, lo, hi, j as usize, Side::Right) {
                if let Some(&id) = middle.get(&key) {
                    edges.push((id, nx + zj as u32));
                }
            }
        }
    }
    let node_count = start as usize + middle_col.len();
    let mut parts = vec![MIDDLE; node_count];
    parts[..nx as usize].fill(LEFT);
    parts[nx as usize..start as usize].fill(RIGHT);
    let graph =
        SparseGraph { node_count, edges, parts: Some(parts), queries: Some((0..pairs.len() as u32).collect()) };
    ExactTriGraph { lo, hi, chunk, graph, pairs: pairs.to_vec(), middle_col, middle_start: start }
}

fn check_state(a: &Matrix<Real>, b: &Matrix<Real>, state: &PredSuccState) -> Result<(), ReductionError> {
    let (n1, n2, d) = (a.rows(), b.cols(), a.cols());
    for m in [&state.lo, &state.hi] {
        if m.rows() != n1 || m.cols() != n2 || m.data().iter().flatten().any(|&k| k >= d) {
            return Err(ReductionError::ShapeMismatch("bracket matrix".into()));
        }
    }
    if state.c.rows() != n1 || state.c.cols() != n2 {
        return Err(ReductionError::ShapeMismatch(format!("C is {}x{}, expected {n1}x{n2}", state.c.rows(), state.c.cols())));
    }
    Ok(())
}

/// Builds the bracket graphs for `state` over every pair and every inner index.
pub fn build_exacttri_graphs(
    a: &Matrix<Real>,
    b: &Matrix<Real>,
    state: &PredSuccState,
    cmp: &Comparisons,
) -> Result<ReductionOutput<ExactTriGraph>, ReductionError> {
    let strip = Strip::new(a, b, cmp)?;
    check_state(a, b, state)?;
    let cols: Vec<usize> = (0..a.cols()).collect();
    Ok(between_graphs(&strip, &cols, &state.lo, &state.hi, &all_pairs(a.rows(), b.cols())))
}

#[allow(clippy::too_many_arguments)]
fn solve_between_on(
    strip: &Strip<'_>,
    cols: &[usize],
    lo: &Matrix<Option<usize>>,
    hi: &Matrix<Option<usize>>,
    active: &[(u32, u32)],
    oracle: &dyn TriangleOracle,
    split: bool,
    cmp: &Comparisons,
    ledger: &mut LedgerRow,
) -> Result<Vec<Option<usize>>, ReductionError> {
    let out = between_graphs(strip, cols, lo, hi, active);
    let levels = strip.ranks.max_universe_log() as usize + 1;
    let split = if split { cols.len() } else { 0 };
    let graphs = prepare(out.targets.iter().map(|t| &t.graph).collect(), split, levels * levels, ledger);
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
            if !strictly_between(strip, i as usize, j as usize, t.lo, t.hi, kp, cmp) {
                return Err(ReductionError::OracleProtocol(format!("witness {kp} is not inside the bracket of ({i},{j})")));
            }
            result[index[&(i, j)]] = Some(kp);
        }
    }
    Ok(result)
}

/// For each pair, some index strictly between `lo` and `hi`, if one exists.
pub fn solve_variant2(
    a: &Matrix<Real>,
    b: &Matrix<Real>,
    state: &PredSuccState,
    oracle: &dyn TriangleOracle,
    cmp: &Comparisons,
) -> Result<Matrix<Option<usize>>, ReductionError> {
    let strip = Strip::new(a, b, cmp)?;
    check_state(a, b, state)?;
    let cols: Vec<usize> = (0..a.cols()).collect();
    let pairs = all_pairs(a.rows(), b.cols());
    let mut ledger = LedgerRow::default();
    let found = solve_between_on(&strip, &cols, &state.lo, &state.hi, &pairs, oracle, false, cmp, &mut ledger)?;
    Ok(Matrix::from_vec(a.rows(), b.cols(), found).expect("one answer per pair"))
}

// ---------------------------------------------------------------- counting

fn collect_counts(
    targets: Vec<(&SparseGraph, &[(u32, u32)])>,
    active: &[(u32, u32)],
    limit: usize,
    oracle: &dyn TriangleOracle,
    split: usize,
    levels: usize,
    ledger: &mut LedgerRow,
) -> Result<Vec<u64>, ReductionError> {
    let graphs = prepare(targets.iter().map(|t| t.0).collect(), split, levels, ledger);
    let answers: Vec<Vec<u64>> = graphs.par_iter().map(|g| oracle.counts(g)).collect();
    let index: HashMap<(u32, u32), usize> = active.iter().enumerate().map(|(p, &q)| (q, p)).collect();
    let mut result = vec![0; active.len()];
    for ((_, pairs), ans) in targets.iter().zip(answers) {
        if ans.len() != pairs.len() {
            return Err(ReductionError::OracleProtocol("answer count differs from query count".into()));
        }
        for (q, c) in pairs.iter().zip(ans) {
            if c as usize > limit {
                return Err(ReductionError::OracleProtocol(format!("count {c} exceeds the {limit} candidates")));
            }
            result[index[q]] = c;
        }
    }
    Ok(result)
}

/// `#{k' ∈ cols : A[i,k'] + B[k',j] < A[i,k] + B[k,j]}`, one triangle count
/// per pair on the single-index graphs.
#[allow(clippy::too_many_arguments)]
fn count_less_on(
    strip: &Strip<'_>,
    cols: &[usize],
    k: &Matrix<usize>,
    active: &[(u32, u32)],
    oracle: &dyn TriangleOracle,
    split: bool,
    ledger: &mut LedgerRow,
) -> Result<Vec<u64>, ReductionError> {
    if active.is_empty() {
        return Ok(Vec::new());
    }
    let out = variant_graphs(strip, cols, k, active);
    let levels = strip.ranks.max_universe_log() as usize + 1;
    let targets = out.targets.iter().map(|t| (&t.graph, t.pairs.as_slice())).collect();
    let r = collect_counts(targets, active, cols.len(), oracle, if split { cols.len() } else { 0 }, levels, ledger);
    ledger.absorb(out.ledger);
    r
}

/// Triangle counts on the bracket graphs.
#[allow(clippy::too_many_arguments)]
fn count_between_on(
    strip: &Strip<'_>,
    cols: &[usize],
    lo: &Matrix<Option<usize>>,
    hi: &Matrix<Option<usize>>,
    active: &[(u32, u32)],
    oracle: &dyn TriangleOracle,
    split: bool,
    ledger: &mut LedgerRow,
) -> Result<Vec<u64>, ReductionError> {
    if active.is_empty() {
        return Ok(Vec::new());
    }
    let out = between_graphs(strip, cols, lo, hi, active);
    let levels = strip.ranks.max_universe_log() as usize + 1;
    let targets = out.targets.iter().map(|t| (&t.graph, t.pairs.as_slice())).collect();
    let r = collect_counts(targets, active, cols.len(), oracle, if split { cols.len() } else { 0 }, levels * levels, ledger);
    ledger.absorb(out.ledger);
    r
}

fn negated(m: &Matrix<Real>) -> Option<Matrix<Real>> {
    let data: Option<Vec<Real>> = m.data().iter().map(Real::checked_neg).collect();
    data.map(|d| Matrix::from_vec(m.rows(), m.cols(), d).expect("same shape"))
}

/// A strip together with its negation, when every entry is finite.
struct CountStrips<'s> {
    pos: &'s Strip<'s>,
    neg: Option<&'s Strip<'s>>,
}

impl CountStrips<'_> {
    /// `#{k' ∈ cols : sum(k') ≤ sum(k)}` as `|cols| - #{sum(k') > sum(k)}`.
    /// The `>` count runs the `<` construction on the negated matrices; with
    /// infinite entries it falls back to the lower one-sided bracket graphs.
    fn count_at_most(
        &self,
        cols: &[usize],
        k: &Matrix<usize>,
        active: &[(u32, u32)],
        oracle: &dyn TriangleOracle,
        split: bool,
        ledger: &mut LedgerRow,
    ) -> Result<Vec<u64>, ReductionError> {
        let above = match self.neg {
            Some(neg) => count_less_on(neg, cols, k, active, oracle, split, ledger)?,
            None => {
                let lo = k.map(|&x| Some(x));
                let hi = k.map(|_| None);
                count_between_on(self.pos, cols, &lo, &hi, active, oracle, split, ledger)?
            }
        };
        Ok(above.into_iter().map(|c| cols.len() as u64 - c).collect())
    }
}

fn shape_of_k(a: &Matrix<Real>, b: &Matrix<Real>, k: &Matrix<usize>) -> Result<(), ReductionError> {
    if k.rows() != a.rows() || k.cols() != b.cols() || k.data().iter().any(|&x| x >= a.cols()) {
        return Err(ReductionError::ShapeMismatch("index matrix".into()));
    }
    Ok(())
}

/// Per pair, the number of inner indices with sum strictly below index `k[i,j]`.
pub fn count_below(
    a: &Matrix<Real>,
    b: &Matrix<Real>,
    k: &Matrix<usize>,
    oracle: &dyn TriangleOracle,
    cmp: &Comparisons,
) -> Result<Matrix<u64>, ReductionError> {
    let strip = Strip::new(a, b, cmp)?;
    shape_of_k(a, b, k)?;
    let cols: Vec<usize> = (0..a.cols()).collect();
    let pairs = all_pairs(a.rows(), b.cols());
    let c = count_less_on(&strip, &cols, k, &pairs, oracle, false, &mut LedgerRow::default())?;
    Ok(Matrix::from_vec(a.rows(), b.cols(), c).expect("one count per pair"))
}

/// Per pair, the number of inner indices with sum at most that of `k[i,j]`.
pub fn count_at_most(
    a: &Matrix<Real>,
    b: &Matrix<Real>,
    k: &Matrix<usize>,
    oracle: &dyn TriangleOracle,
    cmp: &Comparisons,
) -> Result<Matrix<u64>, ReductionError> {
    let strip = Strip::new(a, b, cmp)?;
    shape_of_k(a, b, k)?;
    let (na, nb) = (negated(a), negated(b));
    let neg = match (&na, &nb) {
        (Some(x), Some(y)) => Some(Strip::new(x, y, cmp)?),
        _ => None,
    };
    let strips = CountStrips { pos: &strip, neg: neg.as_ref() };
    let cols: Vec<usize> = (0..a.cols()).collect();
    let pairs = all_pairs(a.rows(), b.cols());
    let c = strips.count_at_most(&cols, k, &pairs, oracle, false, &mut LedgerRow::default())?;
    Ok(Matrix::from_vec(a.rows(), b.cols(), c).expect("one count per pair"))
}

struct Ctx<'s> {
    strips: CountStrips<'s>,
    c: &'s Matrix<Real>,
    oracle: &'s dyn TriangleOracle,
    cfg: LasVegas,
    route: Route,
    cmp: &'s Comparisons,
}

impl Ctx<'_> {
    fn strip(&self) -> &Strip<'_> {
        self.strips.pos
    }

    /// `#{k' ∈ cols : sum(lo) < sum(k') < sum(hi)}` from two single-index
    /// counts: strictly below `hi` minus at most `lo`.
    fn between_count(
        &self,
        cols: &[usize],
        lo: &Matrix<Option<usize>>,
        hi: &Matrix<Option<usize>>,
        active: &[(u32, u32)],
        ledger: &mut LedgerRow,
    ) -> Result<Vec<u64>, ReductionError> {
        let s = self.strip();
        let (with_hi, no_hi): (Vec<usize>, Vec<usize>) =
            (0..active.len()).partition(|&p| hi.get(active[p].0 as usize, active[p].1 as usize).is_some());
        let with_lo: Vec<usize> =
            (0..active.len()).filter(|&p| lo.get(active[p].0 as usize, active[p].1 as usize).is_some()).collect();
        let mut below = vec![0u64; active.len()];
        let khi = hi.map(|x| x.unwrap_or(0));
        let sub: Vec<(u32, u32)> = with_hi.iter().map(|&p| active[p]).collect();
        for (&p, c) in with_hi.iter().zip(count_less_on(s, cols, &khi, &sub, self.oracle, self.cfg.split, ledger)?) {
            below[p] = c;
        }
        // the open upper side sits above every sum, infinite ones included
        for &p in &no_hi {
            below[p] = cols.len() as u64;
        }
        let mut at_most = vec![0u64; active.len()];
        let klo = lo.map(|x| x.unwrap_or(0));
        let sub: Vec<(u32, u32)> = with_lo.iter().map(|&p| active[p]).collect();
        for (&p, c) in with_lo.iter().zip(self.strips.count_at_most(cols, &klo, &sub, self.oracle, self.cfg.split, ledger)?) {
            at_most[p] = c;
        }
        below
            .into_iter()
            .zip(at_most)
            .map(|(b, m)| {
                b.checked_sub(m).ok_or_else(|| ReductionError::OracleProtocol("counts contradict the bracket order".into()))
            })
            .collect()
    }

    /// Bracket search through counts: existence first, then witness bits
    /// on random subsets where the witness is unique.
    fn between_by_counts(
        &self,
        cols: &[usize],
        lo: &Matrix<Option<usize>>,
        hi: &Matrix<Option<usize>>,
        active: &[(u32, u32)],
        rng: &mut ChaCha8Rng,
        ledger: &mut LedgerRow,
    ) -> Result<Vec<Option<usize>>, ReductionError> {
        let s = self.strip();
        let exist = self.between_count(cols, lo, hi, active, ledger)?;
        let mut pending: Vec<usize> = (0..active.len()).filter(|&p| exist[p] > 0).collect();
        let mut result = vec![None; active.len()];
        let m = cols.len();
        let sizes = usize::BITS - (m - 1).leading_zeros();
        let reps = log2_budget(1.0, s.a.rows().max(s.b.cols())).max(1);
        for _ in 0..=self.cfg.c_retry {
            for e in 0..=sizes {
                let size = (1usize << e).min(m);
                for _ in 0..reps {
                    if pending.is_empty() {
                        return Ok(result);
                    }
                    let mut t: Vec<usize> = sample(rng, m, size).into_iter().map(|p| cols[p]).collect();
                    t.sort_unstable();
                    let sub: Vec<(u32, u32)> = pending.iter().map(|&p| active[p]).collect();
                    let cnt = self.between_count(&t, lo, hi, &sub, ledger)?;
                    let unique: Vec<usize> = pending.iter().zip(&cnt).filter(|(_, &c)| c == 1).map(|(&p, _)| p).collect();
                    if unique.is_empty() {
                        continue;
                    }
                    let sub: Vec<(u32, u32)> = unique.iter().map(|&p| active[p]).collect();
                    let mut pos = vec![0usize; unique.len()];
                    let bits = usize::BITS - (t.len() - 1).leading_zeros();
                    for bit in 0..bits {
                        let tb: Vec<usize> = t.iter().enumerate().filter(|(q, _)| q >> bit & 1 == 1).map(|(_, &k)| k).collect();
                        for (q, c) in self.between_count(&tb, lo, hi, &sub, ledger)?.into_iter().enumerate() {
                            match c {
                                0 => {}
                                1 => pos[q] |= 1 << bit,
                                _ => return Err(ReductionError::OracleProtocol("subset count exceeds its superset".into())),
                            }
                        }
                    }
                    for (&p, &q) in unique.iter().zip(&pos) {
                        let (i, j) = (active[p].0 as usize, active[p].1 as usize);
                        let kp = *t.get(q).ok_or_else(|| ReductionError::OracleProtocol("bit pattern out of range".into()))?;
                        if !strictly_between(s, i, j, *lo.get(i, j), *hi.get(i, j), kp, self.cmp) {
                            return Err(ReductionError::OracleProtocol(format!("recovered {kp} is not inside the bracket")));
                        }
                        result[p] = Some(kp);
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
        lo: &Matrix<Option<usize>>,
        hi: &Matrix<Option<usize>>,
        active: &[(u32, u32)],
        rng: &mut ChaCha8Rng,
        ledger: &mut LedgerRow,
    ) -> Result<Vec<Option<usize>>, ReductionError> {
        match self.route {
            Route::Witnesses => {
                solve_between_on(self.strip(), cols, lo, hi, active, self.oracle, self.cfg.split, self.cmp, ledger)
            }
            Route::Counts => self.between_by_counts(cols, lo, hi, active, rng, ledger),
        }
    }
}

/// Same contract as [`solve_variant2`], answered through triangle counts.
pub fn variant2_via_counts(
    a: &Matrix<Real>,
    b: &Matrix<Real>,
    state: &PredSuccState,
    oracle: &dyn TriangleOracle,
    seed: u64,
    cfg: LasVegas,
    cmp: &Comparisons,
) -> Result<Matrix<Option<usize>>, ReductionError> {
    let strip = Strip::new(a, b, cmp)?;
    check_state(a, b, state)?;
    let (na, nb) = (negated(a), negated(b));
    let neg = match (&na, &nb) {
        (Some(x), Some(y)) => Some(Strip::new(x, y, cmp)?),
        _ => None,
    };
    let ctx = Ctx {
        strips: CountStrips { pos: &strip, neg: neg.as_ref() },
        c: &state.c,
        oracle,
        cfg,
        route: Route::Counts,
        cmp,
    };
    let cols: Vec<usize> = (0..a.cols()).collect();
    let pairs = all_pairs(a.rows(), b.cols());
    let found = ctx.between_by_counts(&cols, &state.lo, &state.hi, &pairs, &mut rng_for(seed), &mut LedgerRow::default())?;
    Ok(Matrix::from_vec(a.rows(), b.cols(), found).expect("one answer per pair"))
}

// ---------------------------------------------------------------- driver

struct Overrun;

type Bracket = (Matrix<Option<usize>>, Matrix<Option<usize>>);

fn recurse(
    ctx: &Ctx<'_>,
    cols: &[usize],
    active: &[(u32, u32)],
    budget: usize,
    rng: &mut ChaCha8Rng,
    ledger: &mut LedgerRow,
    stats: &mut RoundStats,
) -> Result<Result<Bracket, Overrun>, ReductionError> {
    let s = ctx.strip();
    let (n1, n2) = (s.a.rows(), s.b.cols());
    let mut lo: Matrix<Option<usize>> = Matrix::from_fn(n1, n2, |_, _| None);
    let mut hi = lo.clone();
    if cols.len() == 1 {
        let k = cols[0];
        for &(i, j) in active {
            let (i, j) = (i as usize, j as usize);
            if ctx.cmp.compare3(s.a.get(i, k), s.b.get(k, j), ctx.c.get(i, j)) == Ordering::Greater {
                hi.set(i, j, Some(k));
            } else {
                lo.set(i, j, Some(k));
            }
        }
        return Ok(Ok((lo, hi)));
    }
    let half = random_half(cols, rng);
    (lo, hi) = match recurse(ctx, &half, active, budget, rng, ledger, stats)? {
        Ok(x) => x,
        Err(o) => return Ok(Err(o)),
    };
    let mut active = active.to_vec();
    let mut rounds = 0;
    loop {
        stats.oracle_rounds += 1;
        let found = ctx.round(cols, &lo, &hi, &active, rng, ledger)?;
        let mut next = Vec::new();
        for (&(i, j), f) in active.iter().zip(found) {
            let Some(kp) = f else { continue };
            let (iu, ju) = (i as usize, j as usize);
            if ctx.cmp.compare3(s.a.get(iu, kp), s.b.get(kp, ju), ctx.c.get(iu, ju)) == Ordering::Greater {
                hi.set(iu, ju, Some(kp));
            } else {
                lo.set(iu, ju, Some(kp));
            }
            next.push((i, j));
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
    Ok(Ok((lo, hi)))
}

/// Turns an internal bracket into the final answer: a successor with an
/// infinite sum becomes the sentinel, and both sides are re-checked against
/// `C`, so a target equal to some sum is its own predecessor.
fn finalize(ctx: &Ctx<'_>, active: &[(u32, u32)], bracket: &mut Bracket) -> Result<(), ReductionError> {
    let s = ctx.strip();
    let (lo, hi) = bracket;
    for &(i, j) in active {
        let (i, j) = (i as usize, j as usize);
        let c = ctx.c.get(i, j);
        if let Some(l) = *lo.get(i, j) {
            if ctx.cmp.compare3(s.a.get(i, l), s.b.get(l, j), c) == Ordering::Greater {
                return Err(ReductionError::OracleProtocol(format!("predecessor of ({i},{j}) is above the target")));
            }
        }
        if let Some(h) = *hi.get(i, j) {
            if s.a.get(i, h).is_infinite() || s.b.get(h, j).is_infinite() {
                hi.set(i, j, None);
            } else if ctx.cmp.compare3(s.a.get(i, h), s.b.get(h, j), c) != Ordering::Greater {
                return Err(ReductionError::OracleProtocol(format!("successor of ({i},{j}) is not above the target")));
            }
        }
    }
    Ok(())
}

fn drive(
    ctx: &Ctx<'_>,
    active: &[(u32, u32)],
    seed: u64,
    ledger: &mut LedgerRow,
    stats: &mut RoundStats,
) -> Result<Bracket, ReductionError> {
    let s = ctx.strip();
    let cols: Vec<usize> = (0..s.a.cols()).collect();
    let budget = log2_budget(ctx.cfg.c_iter, s.a.rows().max(s.b.cols()));
    let mut rng = rng_for(seed);
    for attempt in 0..=ctx.cfg.c_retry {
        stats.restarts = attempt;
        if let Ok(mut bracket) = recurse(ctx, &cols, active, budget, &mut rng, ledger, stats)? {
            finalize(ctx, active, &mut bracket)?;
            return Ok(bracket);
        }
    }
    Err(ReductionError::RetryBudgetExhausted { attempts: ctx.cfg.c_retry + 1 })
}

/// Result of a predecessor/successor run.
#[derive(Clone, Debug)]
pub struct PredSuccResult {
    pub state: PredSuccState,
    pub stats: RoundStats,
    pub ledger: LedgerRow,
}

/// Predecessor (largest sum `≤ C[i,j]`) and successor (smallest finite sum
/// `> C[i,j]`) of every target among `A[i,k] + B[k,j]`.
#[allow(clippy::too_many_arguments)]
pub fn pred_succ(
    a: &Matrix<Real>,
    b: &Matrix<Real>,
    c: &Matrix<Real>,
    oracle: &dyn TriangleOracle,
    seed: u64,
    cfg: LasVegas,
    route: Route,
    cmp: &Comparisons,
) -> Result<PredSuccResult, ReductionError> {
    let strip = Strip::new(a, b, cmp)?;
    if c.rows() != a.rows() || c.cols() != b.cols() {
        return Err(ReductionError::ShapeMismatch(format!("C is {}x{}", c.rows(), c.cols())));
    }
    let (na, nb) = if route == Route::Counts { (negated(a), negated(b)) } else { (None, None) };
    let neg = match (&na, &nb) {
        (Some(x), Some(y)) => Some(Strip::new(x, y, cmp)?),
        _ => None,
    };
    let ctx = Ctx { strips: CountStrips { pos: &strip, neg: neg.as_ref() }, c, oracle, cfg, route, cmp };
    let mut ledger = LedgerRow::default();
    let mut stats = RoundStats::default();
    let (lo, hi) = drive(&ctx, &all_pairs(a.rows(), b.cols()), seed, &mut ledger, &mut stats)?;
    ledger.rounds += stats.oracle_rounds as u64;
    Ok(PredSuccResult { state: PredSuccState { lo, hi, c: c.clone() }, stats, ledger })
}

/// Per `I–J` edge, whether some `k` closes a triangle of total weight zero.
/// Inner indices are cut into strips of width `d`; each strip runs the
/// bracket search with target `-w_ij`.
#[allow(clippy::too_many_arguments)]
pub fn ae_exact_tri_via_sparse(
    g: &WeightedTripartiteGraph,
    d: usize,
    oracle: &dyn TriangleOracle,
    seed: u64,
    cfg: LasVegas,
    route: Route,
    cmp: &Comparisons,
) -> Result<(Matrix<bool>, LedgerRow), ReductionError> {
    let (ni, nj, nk) = g.sizes();
    if d == 0 {
        return Err(ReductionError::ShapeMismatch("strip width 0".into()));
    }
    if g.w_ik.rows() != ni || g.w_kj.rows() != nk || g.w_kj.cols() != nj {
        return Err(ReductionError::ShapeMismatch("weight slabs disagree".into()));
    }
    let c = g.w_ij.map(|w| w.checked_neg().unwrap_or_else(Real::infinity));
    let active: Vec<(u32, u32)> =
        all_pairs(ni, nj).into_iter().filter(|&(i, j)| !g.w_ij.get(i as usize, j as usize).is_infinite()).collect();
    let mut answer = Matrix::from_fn(ni, nj, |_, _| false);
    let mut ledger = LedgerRow::default();
    if nk == 0 || active.is_empty() {
        return Ok((answer, ledger));
    }
    let strips: Vec<Vec<usize>> = (0..nk).step_by(d).map(|s| (s..(s + d).min(nk)).collect()).collect();
    let mut rng = rng_for(seed);
    let seeds: Vec<u64> = strips.iter().map(|_| rng.gen()).collect();
    let parts: Vec<Result<(Matrix<bool>, LedgerRow), ReductionError>> = strips
        .par_iter()
        .zip(seeds.par_iter())
        .map(|(cols, &s)| {
            let a = g.w_ik.select_cols(cols);
            let b = g.w_kj.select_rows(cols);
            let strip = Strip::new(&a, &b, cmp)?;
            let (na, nb) = if route == Route::Counts { (negated(&a), negated(&b)) } else { (None, None) };
            let neg = match (&na, &nb) {
                (Some(x), Some(y)) => Some(Strip::new(x, y, cmp)?),
                _ => None,
            };
            let ctx = Ctx { strips: CountStrips { pos: &strip, neg: neg.as_ref() }, c: &c, oracle, cfg, route, cmp };
            let mut ledger = LedgerRow::default();
            let mut stats = RoundStats::default();
            let (lo, _) = drive(&ctx, &active, s, &mut ledger, &mut stats)?;
            ledger.rounds += stats.oracle_rounds as u64;
            let hit = Matrix::from_fn(ni, nj, |i, j| {
                lo.get(i, j).is_some_and(|p| cmp.compare3(a.get(i, p), b.get(p, j), c.get(i, j)) == Ordering::Equal)
            });
            Ok((hit, ledger))
        })
        .collect();
    for part in parts {
        let (hit, row) = part?;
        ledger.absorb(row);
        for &(i, j) in &active {
            if *hit.get(i as usize, j as usize) {
                answer.set(i as usize, j as usize, true);
            }
        }
    }
    Ok((answer, ledger))
}
