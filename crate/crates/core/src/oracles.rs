//! Reference solvers. Everything here is direct enumeration; reals are read
//! only through [`Comparisons`], so oracles also run on tattling inputs.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};

use thiserror::Error;

use crate::instances::*;
use crate::matrix::Matrix;
use crate::numeric::{Comparisons, RestrictedReal};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("negative cycle detected")]
    NegativeCycleDetected,
    #[error("instance is not tripartite")]
    NotTripartite,
}

/// For each `c`, whether some `a + b + c = 0`.
pub fn all_nums_3sum(inst: &ThreeSumInstance, cmp: &Comparisons) -> Vec<bool> {
    let mut b: Vec<&RestrictedReal> = inst.b.iter().collect();
    b.sort_by(|x, y| cmp.compare2(x, y));
    inst.c
        .iter()
        .map(|c| {
            let target = c.checked_neg().expect("3SUM values are finite");
            inst.a.iter().any(|a| {
                b.binary_search_by(|x| cmp.compare3(a, x, &target)).is_ok()
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct MinPlusEntry {
    pub value: RestrictedReal,
    pub argmin: usize,
}

/// `C[i,j] = min_k A[i,k] + B[k,j]`, ties to the smallest `k`.
pub fn min_plus(a: &Matrix<RestrictedReal>, b: &Matrix<RestrictedReal>, cmp: &Comparisons) -> Matrix<MinPlusEntry> {
    assert_eq!(a.cols(), b.rows());
    assert!(a.cols() > 0, "empty inner dimension");
    Matrix::from_fn(a.rows(), b.cols(), |i, j| {
        let mut best = 0;
        for k in 1..a.cols() {
            if cmp.compare4(a.get(i, k), b.get(k, j), a.get(i, best), b.get(best, j)) == Ordering::Less {
                best = k;
            }
        }
        MinPlusEntry { value: a.get(i, best).add(b.get(best, j)), argmin: best }
    })
}

/// Floyd–Warshall distances; diagonal 0.
pub fn apsp_reference(g: &WeightedDigraph, cmp: &Comparisons) -> Result<Matrix<RestrictedReal>, OracleError> {
    let n = g.node_count;
    let mut d = g.adjacency(cmp);
    let zero = RestrictedReal::zero();
    for k in 0..n {
        for i in 0..n {
            if d.get(i, k).is_infinite() {
                continue;
            }
            for j in 0..n {
                if cmp.compare4(d.get(i, k), d.get(k, j), d.get(i, j), &zero) == Ordering::Less {
                    let v = d.get(i, k).add(d.get(k, j));
                    d.set(i, j, v);
                }
            }
        }
        if (0..n).any(|i| cmp.compare2(d.get(i, i), &zero) == Ordering::Less) {
            return Err(OracleError::NegativeCycleDetected);
        }
    }
    Ok(d)
}

/// Per `(i,j)` on the `I–J` slab: is there `k` with a zero-weight triangle.
pub fn exact_tri_decide(g: &WeightedTripartiteGraph, cmp: &Comparisons) -> Matrix<bool> {
    exact_tri_count(g, cmp).map(|&c| c > 0)
}

pub fn exact_tri_count(g: &WeightedTripartiteGraph, cmp: &Comparisons) -> Matrix<u64> {
    let (ni, nj, nk) = g.sizes();
    Matrix::from_fn(ni, nj, |i, j| {
        let wij = g.w_ij.get(i, j);
        let Some(target) = wij.checked_neg() else { return 0 };
        (0..nk)
            .filter(|&k| cmp.compare3(g.w_ik.get(i, k), g.w_kj.get(k, j), &target) == Ordering::Equal)
            .count() as u64
    })
}

/// Predecessor and successor indices of a target among `A[i,k] + B[k,j]`.
/// `None` stands for the `-inf` (pred) or `+inf` (succ) sentinel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PredSucc {
    pub pred: Option<usize>,
    pub succ: Option<usize>,
}

/// Largest sum `≤ C[i,j]` (the target is its own predecessor when present)
/// and smallest finite sum `> C[i,j]`; ties go to the smallest index.
pub fn pred_succ_scan(
    a: &Matrix<RestrictedReal>,
    b: &Matrix<RestrictedReal>,
    c: &Matrix<RestrictedReal>,
    cmp: &Comparisons,
) -> Matrix<PredSucc> {
    Matrix::from_fn(a.rows(), b.cols(), |i, j| {
        let mut out = PredSucc::default();
        for k in 0..a.cols() {
            let (x, y) = (a.get(i, k), b.get(k, j));
            if cmp.compare3(x, y, c.get(i, j)) != Ordering::Greater {
                let better = match out.pred {
                    None => true,
                    Some(p) => cmp.compare4(x, y, a.get(i, p), b.get(p, j)) == Ordering::Greater,
                };
                if better {
                    out.pred = Some(k);
                }
            } else if !x.is_infinite() && !y.is_infinite() {
                let better = match out.succ {
                    None => true,
                    Some(s) => cmp.compare4(x, y, a.get(i, s), b.get(s, j)) == Ordering::Less,
                };
                if better {
                    out.succ = Some(k);
                }
            }
        }
        out
    })
}

// ---------------------------------------------------------------- sparse triangles

/// Degeneracy and a min-degree elimination order (bin-sort core
/// decomposition, linear time).
pub fn degeneracy(node_count: usize, edges: &[(u32, u32)]) -> (usize, Vec<u32>) {
    let n = node_count;
    let (start, adj, _) = csr(n, edges);
    let mut deg: Vec<usize> = (0..n).map(|v| start[v + 1] - start[v]).collect();
    let maxd = deg.iter().copied().max().unwrap_or(0);
    // bins: nodes sorted by current degree, with the first slot of each degree
    let mut bin = vec![0usize; maxd + 2];
    for &dv in &deg {
        bin[dv + 1] += 1;
    }
    for x in 1..bin.len() {
        bin[x] += bin[x - 1];
    }
    let mut vert = vec![0u32; n];
    let mut pos = vec![0usize; n];
    {
        let mut next = bin.clone();
        for v in 0..n {
            pos[v] = next[deg[v]];
            vert[pos[v]] = v as u32;
            next[deg[v]] += 1;
        }
    }
    let mut d = 0;
    for p in 0..n {
        let v = vert[p] as usize;
        d = d.max(deg[v]);
        for &w in &adj[start[v]..start[v + 1]] {
            let w = w as usize;
            if deg[w] > deg[v] {
                // swap w to the front of its bin, then shrink the bin
                let dw = deg[w];
                let pw = pos[w];
                let front = bin[dw];
                let u = vert[front] as usize;
                if u != w {
                    vert.swap(pw, front);
                    pos[u] = pw;
                    pos[w] = front;
                }
                bin[dw] += 1;
                deg[w] -= 1;
            }
        }
    }
    (d, vert)
}

pub fn sparse_degeneracy(g: &SparseGraph) -> usize {
    degeneracy(g.node_count, &g.edges).0
}

/// Compressed adjacency: neighbours of `v` are `adj[start[v]..start[v+1]]`
/// with matching edge ids in `eid`.
fn csr(n: usize, edges: &[(u32, u32)]) -> (Vec<usize>, Vec<u32>, Vec<u32>) {
    let mut start = vec![0usize; n + 1];
    for &(u, v) in edges {
        start[u as usize + 1] += 1;
        start[v as usize + 1] += 1;
    }
    for x in 1..=n {
        start[x] += start[x - 1];
    }
    let mut fill = start.clone();
    let mut adj = vec![0u32; 2 * edges.len()];
    let mut eid = vec![0u32; 2 * edges.len()];
    for (e, &(u, v)) in edges.iter().enumerate() {
        for (a, b) in [(u, v), (v, u)] {
            let slot = fill[a as usize];
            adj[slot] = b;
            eid[slot] = e as u32;
            fill[a as usize] += 1;
        }
    }
    (start, adj, eid)
}

/// Calls `f(u, v, w, e_uv, e_uw, e_vw)` once per triangle (once per edge
/// combination when edges are parallel), orienting edges
/// along a degeneracy order so each node has at most `D` out-neighbours.
pub fn for_each_triangle(node_count: usize, edges: &[(u32, u32)], mut f: impl FnMut(u32, u32, u32, u32, u32, u32)) {
    let n = node_count;
    let (_, order) = degeneracy(n, edges);
    let mut pos = vec![0u32; n];
    for (p, &v) in order.iter().enumerate() {
        pos[v as usize] = p as u32;
    }
    // out-lists in CSR form, targets sorted by position
    let mut start = vec![0usize; n + 1];
    for &(u, v) in edges {
        let src = if pos[u as usize] < pos[v as usize] { u } else { v };
        start[src as usize + 1] += 1;
    }
    for x in 1..=n {
        start[x] += start[x - 1];
    }
    let mut fill = start.clone();
    let mut out = vec![(0u32, 0u32); edges.len()];
    for (e, &(u, v)) in edges.iter().enumerate() {
        let (src, dst) = if pos[u as usize] < pos[v as usize] { (u, v) } else { (v, u) };
        out[fill[src as usize]] = (pos[dst as usize], e as u32);
        fill[src as usize] += 1;
    }
    for v in 0..n {
        out[start[v]..start[v + 1]].sort_unstable();
    }
    for u in 0..n {
        let ou = &out[start[u]..start[u + 1]];
        for &(pv, e_uv) in ou {
            let v = order[pv as usize] as usize;
            let ov = &out[start[v]..start[v + 1]];
            let (mut x, mut y) = (0, 0);
            while x < ou.len() && y < ov.len() {
                match ou[x].0.cmp(&ov[y].0) {
                    Ordering::Less => x += 1,
                    Ordering::Greater => y += 1,
                    Ordering::Equal => {
                        // parallel edges: every combination is its own triangle
                        let p = ou[x].0;
                        let rx = ou[x..].iter().take_while(|o| o.0 == p).count();
                        let ry = ov[y..].iter().take_while(|o| o.0 == p).count();
                        for a in &ou[x..x + rx] {
                            for b in &ov[y..y + ry] {
                                f(u as u32, v as u32, order[p as usize], e_uv, a.1, b.1);
                            }
                        }
                        x += rx;
                        y += ry;
                    }
                }
            }
        }
    }
}

/// All triangles as sorted node triples.
pub fn list_triangles(node_count: usize, edges: &[(u32, u32)]) -> Vec<[u32; 3]> {
    let mut out = Vec::new();
    for_each_triangle(node_count, edges, |u, v, w, _, _, _| {
        let mut t = [u, v, w];
        t.sort_unstable();
        out.push(t);
    });
    out.sort_unstable();
    out
}

/// Per-query-edge triangle counts and one completing node each.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseTriAnswers {
    pub count: Vec<u64>,
    pub witness: Vec<Option<u32>>,
}

impl SparseTriAnswers {
    pub fn decide(&self) -> Vec<bool> {
        self.count.iter().map(|&c| c > 0).collect()
    }
}

/// All-edges sparse triangle oracle, answers in query order.
pub fn ae_sparse_tri(g: &SparseGraph) -> SparseTriAnswers {
    let m = g.edges.len();
    let mut count = vec![0u64; m];
    let mut witness: Vec<Option<u32>> = vec![None; m];
    for_each_triangle(g.node_count, &g.edges, |u, v, w, e_uv, e_uw, e_vw| {
        for (e, apex) in [(e_uv, w), (e_uw, v), (e_vw, u)] {
            count[e as usize] += 1;
            witness[e as usize].get_or_insert(apex);
        }
    });
    let q = g.query_edges();
    SparseTriAnswers { count: q.iter().map(|&e| count[e]).collect(), witness: q.iter().map(|&e| witness[e]).collect() }
}

/// The interface reductions use to ask triangle questions of a target graph.
pub trait TriangleOracle: Sync {
    /// One completing node per query edge, or `None`.
    fn witnesses(&self, g: &SparseGraph) -> Vec<Option<u32>>;
    /// Number of triangles through each query edge.
    fn counts(&self, g: &SparseGraph) -> Vec<u64>;
}

/// [`ae_sparse_tri`] as a [`TriangleOracle`].
#[derive(Clone, Copy, Debug, Default)]
pub struct ReferenceTriangles;

impl TriangleOracle for ReferenceTriangles {
    fn witnesses(&self, g: &SparseGraph) -> Vec<Option<u32>> {
        ae_sparse_tri(g).witness
    }

    fn counts(&self, g: &SparseGraph) -> Vec<u64> {
        ae_sparse_tri(g).count
    }
}

// ---------------------------------------------------------------- monochromatic

/// Per-edge monochromatic triangle counts and witnesses.
pub fn ae_mono_tri(g: &EdgeColoredMultigraph) -> SparseTriAnswers {
    let m = g.edges.len();
    let mut count = vec![0u64; m];
    let mut witness = vec![None; m];
    let mut by_color: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (e, &(_, _, c)) in g.edges.iter().enumerate() {
        by_color.entry(c).or_default().push(e);
    }
    for ids in by_color.values() {
        let edges: Vec<(u32, u32)> = ids.iter().map(|&e| (g.edges[e].0, g.edges[e].1)).collect();
        for_each_triangle(g.node_count, &edges, |u, v, w, a, b, c| {
            for (e, apex) in [(a, w), (b, v), (c, u)] {
                let orig = ids[e as usize];
                count[orig] += 1;
                witness[orig].get_or_insert(apex);
            }
        });
    }
    SparseTriAnswers { count, witness }
}

// ---------------------------------------------------------------- colorful and co.

/// Whether the witnessed colors of each entry cover the palette.
pub fn colorful_bmm(inst: &ColorfulBmmInstance) -> Matrix<bool> {
    let index: HashMap<u32, usize> = inst.palette.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    Matrix::from_fn(inst.a.rows(), inst.b.cols(), |i, j| {
        let mut seen = vec![false; inst.palette.len()];
        let mut left = inst.palette.len();
        for k in 0..inst.inner() {
            if let Some(c) = inst.color[k] {
                if *inst.a.get(i, k) && *inst.b.get(k, j) && !seen[index[&c]] {
                    seen[index[&c]] = true;
                    left -= 1;
                }
            }
        }
        left == 0
    })
}

/// Triangle-collection answers: the decision bit and the per-pair table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TriCoAnswer {
    pub decide: bool,
    /// Keyed by `(color in A, color in B)`.
    pub acp: BTreeMap<(u32, u32), bool>,
}

fn covered_triples(inst: &TriCoInstance) -> HashSet<(u32, u32, u32)> {
    let parts = inst.parts.as_ref().expect("tripartite");
    let mut covered = HashSet::new();
    for t in list_triangles(inst.node_count(), &inst.edges) {
        let mut by_part = [0u32; 3];
        for &v in &t {
            by_part[parts[v as usize] as usize] = inst.colors[v as usize];
        }
        covered.insert((by_part[0], by_part[1], by_part[2]));
    }
    covered
}

/// Tripartite Tri-Co: all color triples across `A × B × C` realized?
pub fn tri_co(inst: &TriCoInstance) -> Result<TriCoAnswer, OracleError> {
    if matches!(inst.variant, TriCoVariant::General) || inst.parts.is_none() {
        return Err(OracleError::NotTripartite);
    }
    let (ka, kb, kc) = (inst.part_colors(0), inst.part_colors(1), inst.part_colors(2));
    let covered = covered_triples(inst);
    let mut acp = BTreeMap::new();
    for &a in &ka {
        for &b in &kb {
            acp.insert((a, b), kc.iter().all(|&c| covered.contains(&(a, b, c))));
        }
    }
    let decide = acp.values().all(|&v| v);
    Ok(TriCoAnswer { decide, acp })
}

/// Original Tri-Co on an arbitrary colored graph: every triple of distinct
/// colors realized? The table is keyed by ordered pairs of distinct colors.
pub fn tri_co_general(inst: &TriCoInstance) -> TriCoAnswer {
    let colors = inst.all_colors();
    let mut covered = HashSet::new();
    for t in list_triangles(inst.node_count(), &inst.edges) {
        let mut c = t.map(|v| inst.colors[v as usize]);
        c.sort_unstable();
        if c[0] != c[1] && c[1] != c[2] {
            covered.insert((c[0], c[1], c[2]));
        }
    }
    let has = |x: u32, y: u32, z: u32| {
        let mut c = [x, y, z];
        c.sort_unstable();
        covered.contains(&(c[0], c[1], c[2]))
    };
    let mut acp = BTreeMap::new();
    for &a in &colors {
        for &b in &colors {
            if a != b {
                acp.insert((a, b), colors.iter().filter(|&&c| c != a && c != b).all(|&c| has(a, b, c)));
            }
        }
    }
    let decide = acp.values().all(|&v| v);
    TriCoAnswer { decide, acp }
}

/// Some pair of distinct vectors with zero inner product.
pub fn ov(inst: &OvInstance) -> Option<(usize, usize)> {
    let v = &inst.vectors;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            if v[i].iter().zip(&v[j]).all(|(x, y)| !(x & y)) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Distinct Hamming similarity of the pattern against the text at `shift`.
pub fn similarity_at(s: &StringPair, shift: usize) -> usize {
    let mut seen = HashSet::new();
    for (j, p) in s.pattern.iter().enumerate() {
        if *p == s.text[shift + j] {
            seen.insert(*p);
        }
    }
    seen.len()
}

/// Similarity at every shift `0..=N-M`.
pub fn distinct_hamming_similarity(s: &StringPair) -> Vec<usize> {
    if s.pattern.len() > s.text.len() {
        return Vec::new();
    }
    (0..=s.text.len() - s.pattern.len()).map(|i| similarity_at(s, i)).collect()
}

/// Per query edge: do the apex colors of its triangles equal the palette.
pub fn ae_colorful_sparse_tri(g: &SparseGraph, node_color: &[Option<u32>], palette: &[u32]) -> Vec<bool> {
    let mut apex_colors: Vec<HashSet<u32>> = vec![HashSet::new(); g.edges.len()];
    for_each_triangle(g.node_count, &g.edges, |u, v, w, e_uv, e_uw, e_vw| {
        for (e, apex) in [(e_uv, w), (e_uw, v), (e_vw, u)] {
            if let Some(c) = node_color[apex as usize] {
                apex_colors[e as usize].insert(c);
            }
        }
    });
    let want: HashSet<u32> = palette.iter().copied().collect();
    g.query_edges().into_iter().map(|e| apex_colors[e] == want).collect()
}

/// Per query: are the two sets disjoint.
pub fn set_disjointness(inst: &SetDisjointnessInstance) -> Vec<bool> {
    let sets: Vec<HashSet<u32>> = inst.family.iter().map(|s| s.iter().copied().collect()).collect();
    inst.queries.iter().map(|&(a, b)| sets[a as usize].is_disjoint(&sets[b as usize])).collect()
}

/// Number of distinct values `v` with `A[i,k] = B[k,j] = v` for some `k`.
pub fn distinct_eq_product(a: &Matrix<i64>, b: &Matrix<i64>) -> Matrix<usize> {
    Matrix::from_fn(a.rows(), b.cols(), |i, j| {
        (0..a.cols()).filter(|&k| a.get(i, k) == b.get(k, j)).map(|k| *a.get(i, k)).collect::<HashSet<_>>().len()
    })
}
