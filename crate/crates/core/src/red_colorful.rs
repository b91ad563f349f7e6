//! Colorful Boolean products: building them from orthogonal vectors and
//! from min-plus products, and turning them into triangle collection,
//! string similarity, colorful sparse triangles and distinct-equality
//! products.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use crate::instances::{
    ColorfulBmmInstance, MinPlusInstance, OvInstance, Real, SparseGraph, StringPair, Symbol, TriCoInstance,
    TriCoVariant, LEFT, MIDDLE, RIGHT,
};
use crate::ledger::{ceil_div, LedgerRow, ReductionError};
use crate::matrix::Matrix;
use crate::numeric::{covering_halves, universe_log_for, Comparisons, DyadicInterval, PairRanks, Side};
use crate::oracles::{similarity_at, TriCoAnswer};

// ---------------------------------------------------------------- orthogonal vectors

/// How to read a colorful product built from a vector set.
#[derive(Clone, Debug)]
pub struct OvDecode {
    pub vectors: usize,
    pub group: usize,
    /// Coordinates per vector after padding.
    pub dim: usize,
}

impl OvDecode {
    /// An orthogonal pair exists iff some group pair misses a color.
    pub fn decode(&self, out: &Matrix<bool>) -> bool {
        self.vectors >= 2 && out.data().iter().any(|&x| !x)
    }
}

/// Groups the vectors `d` at a time; entry `(i, j)` asks whether every
/// `(k, ℓ)` pair of group `i` against group `j` shares a coordinate.
///
/// When `d` does not divide `n` the list is padded with all-ones vectors
/// and two coordinates are appended: originals get `(1, 0)` on the row side
/// and `(0, 1)` on the column side, padding gets `(1, 1)` on both. Original
/// pairs keep their inner products; every pair involving padding is covered.
pub fn ov_to_colorful_bmm(inst: &OvInstance, d: usize) -> Result<(ColorfulBmmInstance, OvDecode, LedgerRow), ReductionError> {
    let n = inst.vectors.len();
    if d == 0 || d > n {
        return Err(ReductionError::BadBlock(d));
    }
    let f = inst.dim;
    let groups = ceil_div(n, d);
    let padded = groups * d != n;
    let dim = if padded { f + 2 } else { f };
    let side = |v: usize, row: bool| -> Vec<bool> {
        if v >= n {
            return vec![true; dim];
        }
        let mut x = inst.vectors[v].clone();
        if padded {
            x.extend([row, !row]);
        }
        x
    };
    let rows: Vec<Vec<bool>> = (0..groups * d).map(|v| side(v, true)).collect();
    let cols: Vec<Vec<bool>> = (0..groups * d).map(|v| side(v, false)).collect();
    let inner = d * d * dim;
    let a = Matrix::from_fn(groups, inner, |i, t| {
        let (k, s) = (t / dim / d, t % dim);
        rows[i * d + k][s]
    });
    let b = Matrix::from_fn(inner, groups, |t, j| {
        let (l, s) = ((t / dim) % d, t % dim);
        cols[j * d + l][s]
    });
    let color = (0..inner).map(|t| Some((t / dim) as u32)).collect();
    let out = ColorfulBmmInstance::new(a, b, color);
    let mut ledger = LedgerRow::default();
    ledger.record_sizes(1, (2 * groups + inner) as u64, (2 * groups * inner) as u64);
    ledger.check("cbmm inner dimension", inner as u64, (d * d * dim) as u64, "d^2*f");
    ledger.check("cbmm colors", out.palette.len() as u64, (d * d) as u64, "d^2");
    ledger.note("padded", padded);
    Ok((out, OvDecode { vectors: n, group: d, dim }, ledger))
}

// ---------------------------------------------------------------- min-plus

/// One bit position of the argmin: either settled without a product or
/// asked of a colorful product whose entries are the bit.
#[derive(Clone, Debug)]
pub enum BitRound {
    Forced(bool),
    Product(ColorfulBmmInstance),
}

/// The products of a min-plus reduction plus the pairs left to brute force.
#[derive(Clone, Debug)]
pub struct MinPlusCbmm {
    pub rounds: Vec<BitRound>,
    /// Pairs witnessed by some low-degree triple.
    pub bad: Matrix<bool>,
    pub ledger: LedgerRow,
}

/// Min-plus result through colorful products.
#[derive(Clone, Debug)]
pub struct MinPlusViaCbmm {
    pub values: Matrix<Real>,
    pub argmin: Matrix<usize>,
    pub ledger: LedgerRow,
}

/// `⌊√n / d²⌋`, the left-degree cutoff between brute force and products.
pub fn default_threshold(n: usize, d: usize) -> usize {
    ((n as f64).sqrt() / (d * d).max(1) as f64).floor() as usize
}

fn perturbed_argmin(a: &Matrix<Real>, b: &Matrix<Real>, i: usize, j: usize, cmp: &Comparisons) -> usize {
    let mut best = 0;
    for k in 1..a.cols() {
        if cmp.compare4(a.get(i, k), b.get(k, j), a.get(i, best), b.get(best, j)) == Ordering::Less {
            best = k;
        }
    }
    best
}

/// The colorful product for bit `t`: colors are the columns without bit
/// `t`, inner indices are triples `(k, k', I)` with `k'` having bit `t` and
/// `I` a dyadic interval of the ranks of `A[i,k'] - A[i,k]` against
/// `B[k,j] - B[k',j]`. Entry `(i, j)` is yes iff every such `k` is beaten
/// by some `k'`, i.e. bit `t` of the argmin is 1.
///
/// With no candidates the bit is 0; with no references it is 1. Triples
/// whose left degree is at most `threshold` are dropped and their pairs
/// flagged in `bad`.
pub fn bit_round(
    ranks: &PairRanks,
    n1: usize,
    n2: usize,
    t: u32,
    threshold: usize,
    bad: &mut Matrix<bool>,
    ledger: &mut LedgerRow,
) -> BitRound {
    let d = ranks.inner();
    let (refs, cands): (Vec<usize>, Vec<usize>) = (0..d).partition(|&k| (k >> t) & 1 == 0);
    if cands.is_empty() {
        return BitRound::Forced(false);
    }
    if refs.is_empty() {
        return BitRound::Forced(true);
    }
    let mut a_cols: Vec<Vec<usize>> = Vec::new();
    let mut b_rows: Vec<Vec<usize>> = Vec::new();
    let mut color = Vec::new();
    let (mut low, mut enumerated, mut max_log) = (0u64, 0u64, 0u32);
    for &k in &refs {
        for &kp in &cands {
            let l = ranks.universe_log(k, kp);
            max_log = max_log.max(l);
            let mut left: BTreeMap<DyadicInterval, Vec<usize>> = BTreeMap::new();
            let mut right: HashMap<DyadicInterval, Vec<usize>> = HashMap::new();
            for i in 0..n1 {
                for iv in covering_halves(ranks.a_rank(k, kp, i), l, Side::Left) {
                    left.entry(iv).or_default().push(i);
                }
            }
            for j in 0..n2 {
                for iv in covering_halves(ranks.b_rank(k, kp, j), l, Side::Right) {
                    right.entry(iv).or_default().push(j);
                }
            }
            for (iv, is) in left {
                let Some(js) = right.get(&iv) else { continue };
                if is.len() <= threshold {
                    low += 1;
                    for &i in &is {
                        for &j in js {
                            bad.set(i, j, true);
                        }
                    }
                    enumerated += (is.len() * js.len()) as u64;
                } else {
                    a_cols.push(is);
                    b_rows.push(js.clone());
                    color.push(Some(k as u32));
                }
            }
        }
    }
    let high = a_cols.len();
    // a color with no high triple still has to be covered
    for &k in &refs {
        if !color.contains(&Some(k as u32)) {
            a_cols.push(Vec::new());
            b_rows.push(Vec::new());
            color.push(Some(k as u32));
        }
    }
    let inner = color.len();
    let mut a = Matrix::from_fn(n1, inner, |_, _| false);
    let mut b = Matrix::from_fn(inner, n2, |_, _| false);
    for (x, is) in a_cols.iter().enumerate() {
        for &i in is {
            a.set(i, x, true);
        }
    }
    for (x, js) in b_rows.iter().enumerate() {
        for &j in js {
            b.set(x, j, true);
        }
    }
    let pairs = (refs.len() * cands.len()) as u64;
    ledger.check(
        "high triples",
        high as u64,
        (n1 as u64 * pairs * max_log as u64) / (threshold as u64).saturating_add(1),
        "n*|K_t|*(d-|K_t|)*L/(threshold+1)",
    );
    ledger.check(
        "low-triple pairs",
        enumerated,
        low.saturating_mul(threshold.min(n1) as u64).saturating_mul(n2 as u64),
        "low*threshold*n",
    );
    BitRound::Product(ColorfulBmmInstance::new(a, b, color))
}

/// Builds one colorful product per argmin bit of the min-plus product of
/// `A` (`n1 × d`) and `B` (`d × n2`). Column `k` of `A` is perturbed by
/// `k·δ`, so the argmin is unique and ties go to the smallest `k`.
pub fn minplus_to_colorful_bmm_instances(
    inst: &MinPlusInstance,
    threshold: usize,
    cmp: &Comparisons,
) -> Result<MinPlusCbmm, ReductionError> {
    let (a, b) = (&inst.a, &inst.b);
    if a.cols() != b.rows() || a.cols() == 0 {
        return Err(ReductionError::ShapeMismatch(format!(
            "A is {}x{}, B is {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let (n1, d, n2) = (a.rows(), a.cols(), b.cols());
    let before = cmp.count();
    let eps: Vec<i64> = (0..d as i64).collect();
    let ranks = PairRanks::build_perturbed(a, b, &eps, cmp);
    let mut bad = Matrix::from_fn(n1, n2, |_, _| false);
    let mut ledger = LedgerRow::default();
    let rounds: Vec<BitRound> =
        (0..universe_log_for(d)).map(|t| bit_round(&ranks, n1, n2, t, threshold, &mut bad, &mut ledger)).collect();
    for r in &rounds {
        if let BitRound::Product(p) = r {
            ledger.record_sizes(1, (n1 + p.inner() + n2) as u64, p.palette.len() as u64);
            ledger.check("cbmm colors", p.palette.len() as u64, d as u64, "d");
        }
    }
    ledger.check("bit rounds", rounds.len() as u64, universe_log_for(d) as u64, "ceil(log2 d)");
    ledger.comparisons += cmp.count() - before;
    ledger.note("threshold", threshold);
    Ok(MinPlusCbmm { rounds, bad, ledger })
}

impl MinPlusCbmm {
    /// `answers` has one matrix per product round, in round order.
    pub fn decode(
        &self,
        inst: &MinPlusInstance,
        answers: &[Matrix<bool>],
        cmp: &Comparisons,
    ) -> Result<(Matrix<Real>, Matrix<usize>), ReductionError> {
        let products = self.rounds.iter().filter(|r| matches!(r, BitRound::Product(_))).count();
        if answers.len() != products {
            return Err(ReductionError::OracleProtocol(format!("{} answers for {products} products", answers.len())));
        }
        let (a, b) = (&inst.a, &inst.b);
        let mut bits: Vec<Box<dyn Fn(usize, usize) -> bool + '_>> = Vec::new();
        let mut next = answers.iter();
        for r in &self.rounds {
            match r {
                BitRound::Forced(v) => {
                    let v = *v;
                    bits.push(Box::new(move |_, _| v));
                }
                BitRound::Product(_) => {
                    let m = next.next().expect("counted above");
                    if (m.rows(), m.cols()) != (a.rows(), b.cols()) {
                        return Err(ReductionError::OracleProtocol("answer shape".into()));
                    }
                    bits.push(Box::new(move |i, j| *m.get(i, j)));
                }
            }
        }
        let mut argmin = Matrix::from_fn(a.rows(), b.cols(), |_, _| 0usize);
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let k = if *self.bad.get(i, j) {
                    perturbed_argmin(a, b, i, j, cmp)
                } else {
                    bits.iter().enumerate().map(|(t, f)| (f(i, j) as usize) << t).sum()
                };
                if k >= a.cols() {
                    return Err(ReductionError::OracleProtocol(format!("argmin {k} out of range at ({i},{j})")));
                }
                argmin.set(i, j, k);
            }
        }
        let values = Matrix::from_fn(a.rows(), b.cols(), |i, j| {
            let k = *argmin.get(i, j);
            a.get(i, k).add(b.get(k, j))
        });
        Ok((values, argmin))
    }
}

/// Min-plus product of a rectangular pair through colorful products
/// answered by `oracle`.
pub fn minplus_to_colorful_bmm(
    inst: &MinPlusInstance,
    oracle: &dyn Fn(&ColorfulBmmInstance) -> Matrix<bool>,
    threshold: usize,
    cmp: &Comparisons,
) -> Result<MinPlusViaCbmm, ReductionError> {
    let red = minplus_to_colorful_bmm_instances(inst, threshold, cmp)?;
    let answers: Vec<Matrix<bool>> = red
        .rounds
        .iter()
        .filter_map(|r| match r {
            BitRound::Product(p) => Some(oracle(p)),
            BitRound::Forced(_) => None,
        })
        .collect();
    let before = cmp.count();
    let (values, argmin) = red.decode(inst, &answers, cmp)?;
    let mut ledger = red.ledger;
    ledger.comparisons += cmp.count() - before;
    ledger.note("bad pairs", red.bad.data().iter().filter(|&&x| x).count());
    Ok(MinPlusViaCbmm { values, argmin, ledger })
}

/// Splits the inner dimension into strips of width `d`, solves each
/// through [`minplus_to_colorful_bmm`] and keeps the best per entry.
pub fn minplus_square_via_cbmm(
    inst: &MinPlusInstance,
    d: usize,
    oracle: &dyn Fn(&ColorfulBmmInstance) -> Matrix<bool>,
    threshold: usize,
    cmp: &Comparisons,
) -> Result<MinPlusViaCbmm, ReductionError> {
    let (a, b) = (&inst.a, &inst.b);
    if d == 0 || a.cols() != b.rows() || a.cols() == 0 {
        return Err(ReductionError::ShapeMismatch("strip width or inner dimension".into()));
    }
    let m = a.cols();
    let mut best: Option<Matrix<usize>> = None;
    let mut ledger = LedgerRow::default();
    for s in (0..m).step_by(d) {
        let cols: Vec<usize> = (s..(s + d).min(m)).collect();
        let strip = MinPlusInstance { a: a.select_cols(&cols), b: b.select_rows(&cols) };
        let part = minplus_to_colorful_bmm(&strip, oracle, threshold, cmp)?;
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
    Ok(MinPlusViaCbmm { values, argmin, ledger })
}

// ---------------------------------------------------------------- triangle collection

/// Reads entry `(i, j)` from the all-color-pairs answer of rows against
/// columns.
#[derive(Clone, Debug)]
pub struct CbmmAcpDecode {
    pub rows: usize,
    pub cols: usize,
}

impl CbmmAcpDecode {
    pub fn decode(&self, ans: &TriCoAnswer) -> Result<Matrix<bool>, ReductionError> {
        let mut out = Matrix::from_fn(self.rows, self.cols, |_, _| false);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let key = (i as u32, (self.rows + j) as u32);
                let v = ans.acp.get(&key).ok_or_else(|| ReductionError::OracleProtocol(format!("no pair {key:?}")))?;
                out.set(i, j, *v);
            }
        }
        Ok(out)
    }
}

/// Rows in part A, columns in part B, one node per non-padding inner index
/// in part C. Row and column nodes get colors of their own; an inner node
/// gets `rows + cols + (palette position of its color)`.
///
/// The variant is light with `p` the largest number of inner indices of
/// one color (at least 1).
pub fn colorful_bmm_to_acp_trico(inst: &ColorfulBmmInstance) -> (TriCoInstance, CbmmAcpDecode, LedgerRow) {
    let (n1, n2) = (inst.a.rows(), inst.b.cols());
    let pos: HashMap<u32, u32> = inst.palette.iter().enumerate().map(|(x, &c)| (c, x as u32)).collect();
    let mut colors: Vec<u32> = (0..(n1 + n2) as u32).collect();
    let mut parts: Vec<u8> = [vec![0u8; n1], vec![1u8; n2]].concat();
    let mut edges = Vec::new();
    for i in 0..n1 {
        for j in 0..n2 {
            edges.push((i as u32, (n1 + j) as u32));
        }
    }
    let mut mult: HashMap<u32, usize> = HashMap::new();
    for t in 0..inst.inner() {
        let Some(c) = inst.color[t] else { continue };
        let v = colors.len() as u32;
        colors.push((n1 + n2) as u32 + pos[&c]);
        parts.push(2);
        *mult.entry(c).or_default() += 1;
        for i in 0..n1 {
            if *inst.a.get(i, t) {
                edges.push((i as u32, v));
            }
        }
        for j in 0..n2 {
            if *inst.b.get(t, j) {
                edges.push(((n1 + j) as u32, v));
            }
        }
    }
    let p = mult.values().copied().max().unwrap_or(1).max(1);
    let out = TriCoInstance { variant: TriCoVariant::Light { p }, colors, edges, parts: Some(parts), components: None };
    let mut ledger = LedgerRow::default();
    ledger.record_sizes(1, out.node_count() as u64, out.edges.len() as u64);
    ledger.check("trico nodes", out.node_count() as u64, (n1 + n2 + inst.inner()) as u64, "n1+n2+K");
    (out, CbmmAcpDecode { rows: n1, cols: n2 }, ledger)
}

/// Decision bit of the composed reduction, plus the trivial cases.
#[derive(Clone, Debug)]
pub struct OvTricoDecode {
    pub vectors: usize,
}

impl OvTricoDecode {
    /// Orthogonal pair exists iff some color triple has no triangle.
    pub fn decode(&self, trico_yes: bool) -> bool {
        self.vectors >= 2 && !trico_yes
    }
}

/// Vectors to a light triangle-collection instance: every color triple
/// has a triangle exactly when no two vectors are orthogonal.
pub fn ov_to_trico_light(inst: &OvInstance, d: usize) -> Result<(TriCoInstance, OvTricoDecode, LedgerRow), ReductionError> {
    let (cbmm, dec, mut ledger) = ov_to_colorful_bmm(inst, d)?;
    let (tc, _, tl) = colorful_bmm_to_acp_trico(&cbmm);
    ledger.absorb(tl);
    let groups = cbmm.a.rows();
    ledger.check("trico nodes", tc.node_count() as u64, (2 * groups + d * d * dec.dim) as u64, "2n/d+d^2*f");
    if let TriCoVariant::Light { p } = tc.variant {
        ledger.check("trico light parameter", p as u64, dec.dim.max(1) as u64, "f");
    }
    Ok((tc, OvTricoDecode { vectors: dec.vectors }, ledger))
}

// ---------------------------------------------------------------- strings

/// Where each output entry sits among the similarity shifts.
#[derive(Clone, Debug)]
pub struct StringDecode {
    pub rows: usize,
    pub cols: usize,
    pub colors: usize,
    /// Period of the remapped inner indices.
    pub modulus: usize,
    /// Inner length per row string.
    pub width: usize,
    pub pad: usize,
}

impl StringDecode {
    /// Shift that aligns pattern block `j` with text block `i`.
    pub fn shift(&self, i: usize, j: usize) -> usize {
        self.pad + i * self.width - j * (self.width + 1)
    }

    pub fn decode_from(&self, similarity: impl Fn(usize) -> usize) -> Matrix<bool> {
        Matrix::from_fn(self.rows, self.cols, |i, j| similarity(self.shift(i, j)) == self.colors)
    }

    /// From the similarity at every shift.
    pub fn decode(&self, per_shift: &[usize]) -> Matrix<bool> {
        self.decode_from(|s| per_shift[s])
    }

    /// Computes only the aligned shifts.
    pub fn decode_direct(&self, s: &StringPair) -> Matrix<bool> {
        self.decode_from(|x| similarity_at(s, x))
    }
}

/// Text of row strings and pattern of column strings, padded by `$` and
/// separated by `#`, so pattern block `j` can only match text block `i`
/// at the shift aligning them.
///
/// The `c`-th index of palette color `ℓ` moves to slot `c·m + ℓ`,
/// `m = max(n1, n2, |Γ|)`. A true `A[i,k]` writes the symbol of `k`'s color
/// into the text, false writes `$`; `B` likewise with `#`. Padding indices
/// and empty slots are never true, so `!` does not appear.
pub fn colorful_bmm_to_strings(inst: &ColorfulBmmInstance, f: usize) -> Result<(StringPair, StringDecode, LedgerRow), ReductionError> {
    let (n1, n2, d) = (inst.a.rows(), inst.b.cols(), inst.palette.len());
    let pos: HashMap<u32, usize> = inst.palette.iter().enumerate().map(|(x, &c)| (c, x)).collect();
    let mut by_color: Vec<Vec<usize>> = vec![Vec::new(); d];
    for (t, c) in inst.color.iter().enumerate() {
        if let Some(c) = c {
            by_color[pos[c]].push(t);
        }
    }
    for (x, ts) in by_color.iter().enumerate() {
        if ts.len() > f {
            return Err(ReductionError::TooManyPerColor { color: inst.palette[x], count: ts.len(), limit: f });
        }
    }
    let m = n1.max(n2).max(d).max(1);
    let width = m * f;
    let mut slot: Vec<Option<(usize, usize)>> = vec![None; width];
    for (l, ts) in by_color.iter().enumerate() {
        for (c, &t) in ts.iter().enumerate() {
            slot[c * m + l] = Some((t, l));
        }
    }
    let pad = n2 * (width + 1);
    let mut text = vec![Symbol::Dollar; pad];
    for i in 0..n1 {
        text.extend(slot.iter().map(|s| match s {
            Some((t, l)) if *inst.a.get(i, *t) => Symbol::Data(*l as u32),
            _ => Symbol::Dollar,
        }));
    }
    text.extend(std::iter::repeat_n(Symbol::Dollar, pad));
    let mut pattern = Vec::new();
    for j in 0..n2 {
        if j > 0 {
            pattern.push(Symbol::Hash);
        }
        pattern.extend(slot.iter().map(|s| match s {
            Some((t, l)) if *inst.b.get(*t, j) => Symbol::Data(*l as u32),
            _ => Symbol::Hash,
        }));
    }
    let out = StringPair { text, pattern };
    let mut ledger = LedgerRow::default();
    ledger.record_sizes(1, (out.text.len() + out.pattern.len()) as u64, 0);
    ledger.check("text length", out.text.len() as u64, (n1 * width + 2 * pad) as u64, "n1*m*f+2*n2*(m*f+1)");
    ledger.check("alphabet", d as u64 + 2, d as u64 + 3, "d+3");
    ledger.note("modulus", m);
    Ok((out, StringDecode { rows: n1, cols: n2, colors: d, modulus: m, width, pad }, ledger))
}

// ---------------------------------------------------------------- colorful sparse triangles

/// Graph, node colors and palette of a colorful sparse-triangle instance.
#[derive(Clone, Debug)]
pub struct ColorfulSparse {
    pub graph: SparseGraph,
    pub node_color: Vec<Option<u32>>,
    pub palette: Vec<u32>,
    pub rows: usize,
    pub cols: usize,
}

impl ColorfulSparse {
    /// Query `q` is entry `(q / cols, q % cols)`.
    pub fn decode(&self, per_query: &[bool]) -> Matrix<bool> {
        Matrix::from_fn(self.rows, self.cols, |i, j| per_query[i * self.cols + j])
    }
}

/// Rows on the left, inner indices in the middle (colored), columns on
/// the right; the left–right edges are the queries, in row-major order.
pub fn colorful_bmm_to_colorful_sparse_tri(inst: &ColorfulBmmInstance) -> (ColorfulSparse, LedgerRow) {
    let (n1, k, n2) = (inst.a.rows(), inst.inner(), inst.b.cols());
    let mid = |t: usize| (n1 + t) as u32;
    let right = |j: usize| (n1 + k + j) as u32;
    let mut edges = Vec::new();
    for i in 0..n1 {
        for j in 0..n2 {
            edges.push((i as u32, right(j)));
        }
    }
    for t in 0..k {
        for i in 0..n1 {
            if *inst.a.get(i, t) {
                edges.push((i as u32, mid(t)));
            }
        }
        for j in 0..n2 {
            if *inst.b.get(t, j) {
                edges.push((mid(t), right(j)));
            }
        }
    }
    let parts = [vec![LEFT; n1], vec![MIDDLE; k], vec![RIGHT; n2]].concat();
    let graph = SparseGraph {
        node_count: n1 + k + n2,
        edges,
        parts: Some(parts),
        queries: Some((0..(n1 * n2) as u32).collect()),
    };
    let node_color = [vec![None; n1], inst.color.clone(), vec![None; n2]].concat();
    let mut ledger = LedgerRow::default();
    ledger.record_graph(&graph);
    ledger.check("colorful sparse edges", graph.edges.len() as u64, (n1 * n2 + (n1 + n2) * k) as u64, "n1*n2+(n1+n2)*K");
    ledger.check("colorful sparse degeneracy", ledger.degeneracy, (k + n1.min(n2)) as u64, "K+min(n1,n2)");
    (ColorfulSparse { graph, node_color, palette: inst.palette.clone(), rows: n1, cols: n2 }, ledger)
}

// ---------------------------------------------------------------- distinct-equality product

/// Token written where `A` is false.
pub const A_FALSE: i64 = -1;
/// Token written where `B` is false.
pub const B_FALSE: i64 = -2;

/// Integer matrices whose distinct-equality count per entry is the number
/// of witnessed colors; the entry is yes iff that count is `|Γ|`.
pub fn colorful_bmm_to_distinct_eq(inst: &ColorfulBmmInstance) -> (Matrix<i64>, Matrix<i64>, usize) {
    let a = Matrix::from_fn(inst.a.rows(), inst.inner(), |i, k| match inst.color[k] {
        Some(c) if *inst.a.get(i, k) => c as i64,
        _ => A_FALSE,
    });
    let b = Matrix::from_fn(inst.inner(), inst.b.cols(), |k, j| match inst.color[k] {
        Some(c) if *inst.b.get(k, j) => c as i64,
        _ => B_FALSE,
    });
    (a, b, inst.palette.len())
}

/// Entry yes iff the count reaches the palette size.
pub fn decode_distinct_eq(counts: &Matrix<usize>, palette: usize) -> Matrix<bool> {
    counts.map(|&c| c == palette)
}
