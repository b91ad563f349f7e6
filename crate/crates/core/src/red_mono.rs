//! Monochromatic triangles: overlaying many sparse instances as colors of
//! one multigraph, and encoding tripartite edge-colored graphs as
//! triangle-collection and integer exact-triangle instances.

use std::collections::HashMap;

use rand::seq::SliceRandom;

use crate::instances::{rng_for, EdgeColoredMultigraph, Real, SparseGraph, TriCoInstance, TriCoVariant, WeightedTripartiteGraph};
use crate::ledger::{LedgerRow, ReductionError};
use crate::matrix::Matrix;
use crate::oracles::{SparseTriAnswers, TriCoAnswer};

// ---------------------------------------------------------------- overlay

/// Maps multigraph edges back to the instances they came from.
#[derive(Clone, Debug)]
pub struct OverlayDecode {
    /// Per instance: new node of every old node.
    pub perm: Vec<Vec<u32>>,
    /// Per instance: its query edges as multigraph edge ids, in query order.
    pub queries: Vec<Vec<usize>>,
}

impl OverlayDecode {
    /// Per-instance answers in each instance's query order, apexes in the
    /// instance's own node ids.
    pub fn decode(&self, mono: &SparseTriAnswers) -> Vec<SparseTriAnswers> {
        self.perm
            .iter()
            .zip(&self.queries)
            .map(|(perm, q)| {
                let mut inv = vec![0u32; perm.iter().map(|&x| x as usize + 1).max().unwrap_or(0)];
                for (old, &new) in perm.iter().enumerate() {
                    inv[new as usize] = old as u32;
                }
                SparseTriAnswers {
                    count: q.iter().map(|&e| mono.count[e]).collect(),
                    witness: q.iter().map(|&e| mono.witness[e].map(|w| inv[w as usize])).collect(),
                }
            })
            .collect()
    }
}

/// Puts instance `i` on the node set `[n]` through an independent uniform
/// permutation and gives its edges color `i`.
///
/// When every instance is tripartite the permutation stays inside each
/// part, so the overlay is tripartite too; part `p` then takes as many
/// slots as its largest instance needs. Colored edges are kept apart, so a
/// color-`i` triangle through an edge is exactly a triangle of instance `i`.
pub fn overlay(instances: &[SparseGraph], n: usize, seed: u64) -> Result<(EdgeColoredMultigraph, OverlayDecode), ReductionError> {
    let mut rng = rng_for(seed);
    let typed = !instances.is_empty() && instances.iter().all(|g| g.parts.is_some());
    let (node_count, parts) = if typed {
        let mut slots = [0usize; 3];
        for g in instances {
            for &p in g.parts.as_ref().expect("typed") {
                if p > 2 {
                    return Err(ReductionError::NotTripartite(format!("part tag {p}")));
                }
            }
            for (p, s) in slots.iter_mut().enumerate() {
                *s = (*s).max(g.parts.as_ref().expect("typed").iter().filter(|&&x| x as usize == p).count());
            }
        }
        let total: usize = slots.iter().sum();
        let parts: Vec<u8> = (0..3u8).flat_map(|p| std::iter::repeat_n(p, slots[p as usize])).collect();
        (total, Some(parts))
    } else {
        (n, None)
    };
    if let Some(g) = instances.iter().find(|g| g.node_count > n) {
        return Err(ReductionError::TooManyNodes { nodes: g.node_count, limit: n });
    }
    if node_count > n {
        return Err(ReductionError::TooManyNodes { nodes: node_count, limit: n });
    }
    let mut edges = Vec::new();
    let mut perm_all = Vec::with_capacity(instances.len());
    let mut queries = Vec::with_capacity(instances.len());
    for (color, g) in instances.iter().enumerate() {
        let perm: Vec<u32> = match (&parts, &g.parts) {
            (Some(layout), Some(own)) => {
                let mut perm = vec![0u32; g.node_count];
                for p in 0..3u8 {
                    let mut slots: Vec<u32> = (0..layout.len() as u32).filter(|&s| layout[s as usize] == p).collect();
                    slots.shuffle(&mut rng);
                    for (v, s) in (0..g.node_count).filter(|&v| own[v] == p).zip(slots) {
                        perm[v] = s;
                    }
                }
                perm
            }
            _ => {
                let mut slots: Vec<u32> = (0..n as u32).collect();
                slots.shuffle(&mut rng);
                slots.truncate(g.node_count);
                slots
            }
        };
        let base = edges.len();
        edges.extend(g.edges.iter().map(|&(u, v)| (perm[u as usize], perm[v as usize], color as u32)));
        queries.push(g.query_edges().into_iter().map(|e| base + e).collect());
        perm_all.push(perm);
    }
    Ok((EdgeColoredMultigraph { node_count, edges, parts }, OverlayDecode { perm: perm_all, queries }))
}

// ---------------------------------------------------------------- tripartite views

/// Part roles `[I, J, K]`: queries are the `I–J` edges, apexes lie in `K`.
pub type Roles = [u8; 3];

/// The three role assignments whose `I–J` edges together cover every edge.
pub const ROTATIONS: [Roles; 3] = [[0, 1, 2], [1, 2, 0], [0, 2, 1]];

/// Simple tripartite view of an edge-colored graph under given roles.
#[derive(Clone, Debug)]
struct View {
    /// Nodes of each role, in id order.
    nodes: [Vec<u32>; 3],
    /// Role and index inside the role of every node.
    slot: Vec<Option<(usize, usize)>>,
    color: HashMap<(u32, u32), u32>,
}

impl View {
    fn new(g: &EdgeColoredMultigraph, roles: Roles) -> Result<View, ReductionError> {
        let parts = g.parts.as_ref().ok_or_else(|| ReductionError::NotTripartite("missing part tags".into()))?;
        if parts.len() != g.node_count {
            return Err(ReductionError::NotTripartite("part tag count".into()));
        }
        let mut sorted = roles;
        sorted.sort_unstable();
        if sorted != [0, 1, 2] {
            return Err(ReductionError::NotTripartite(format!("roles {roles:?}")));
        }
        let mut nodes: [Vec<u32>; 3] = Default::default();
        let mut slot = vec![None; g.node_count];
        for (v, &p) in parts.iter().enumerate() {
            let r = roles.iter().position(|&x| x == p).ok_or_else(|| ReductionError::NotTripartite(format!("part tag {p}")))?;
            slot[v] = Some((r, nodes[r].len()));
            nodes[r].push(v as u32);
        }
        let mut color = HashMap::new();
        for &(u, v, c) in &g.edges {
            if u as usize >= g.node_count || v as usize >= g.node_count || parts[u as usize] == parts[v as usize] {
                return Err(ReductionError::NotTripartite(format!("edge ({u},{v})")));
            }
            if color.insert((u.min(v), u.max(v)), c).is_some() {
                return Err(ReductionError::NotTripartite(format!("several colors on pair ({u},{v})")));
            }
        }
        Ok(View { nodes, slot, color })
    }

    fn color(&self, u: u32, v: u32) -> Option<u32> {
        self.color.get(&(u.min(v), u.max(v))).copied()
    }
}

/// Per edge of the source graph: `Some(answer)` for the `I–J` edges a
/// decode covers, `None` elsewhere.
pub type PartialEdgeAnswers = Vec<Option<bool>>;

/// Merges decodes of several role assignments into one answer per edge.
pub fn merge_edge_answers(parts: &[PartialEdgeAnswers]) -> Option<Vec<bool>> {
    let m = parts.first()?.len();
    (0..m).map(|e| parts.iter().find_map(|p| p[e])).collect()
}

fn query_pairs(g: &EdgeColoredMultigraph, view: &View) -> Vec<Option<(usize, usize)>> {
    g.edges
        .iter()
        .map(|&(u, v, _)| match (view.slot[u as usize], view.slot[v as usize]) {
            (Some((0, a)), Some((1, b))) | (Some((1, b)), Some((0, a))) => Some((a, b)),
            _ => None,
        })
        .collect()
}

// ---------------------------------------------------------------- triangle collection

/// Decode data of the triangle-collection encoding.
#[derive(Clone, Debug)]
pub struct AcpDecode {
    /// Per source edge: the `(I node, J node)` color pair, for `I–J` edges.
    pub pairs: Vec<Option<(u32, u32)>>,
}

impl AcpDecode {
    /// An `I–J` edge has a monochromatic triangle exactly when some apex
    /// color is left uncovered for its color pair.
    pub fn decode(&self, ans: &TriCoAnswer) -> Result<PartialEdgeAnswers, ReductionError> {
        self.pairs
            .iter()
            .map(|p| match p {
                None => Ok(None),
                Some(key) => ans
                    .acp
                    .get(key)
                    .map(|&all| Some(!all))
                    .ok_or_else(|| ReductionError::OracleProtocol(format!("no answer for color pair {key:?}"))),
            })
            .collect()
    }
}

/// Bits needed to write every color.
fn color_bits(g: &EdgeColoredMultigraph) -> usize {
    let top = g.edges.iter().map(|e| e.2).max().unwrap_or(0) as u64;
    ((u64::BITS - top.leading_zeros()) as usize).max(1)
}

/// Disjoint union over color bits `t` of graphs `G_t`. Apex nodes `z` keep
/// their own color; every `I` or `J` node `v` has copies `v_0, v_1` of color
/// `v`. An `I/J–K` edge of color `x` joins `v_{bit_t(x)}` to `z`; a missing
/// `I/J–K` pair joins both copies, so that triple is covered in every `G_t`.
/// Every `I–J` pair gets the cross edges `v_p – v'_{1-p}`, and an `I–J` edge
/// of color `x` also gets `v_b – v'_b` for `b ≠ bit_t(x)`. A triple then has
/// no triangle in `G_t` exactly when all three colors agree on bit `t`.
pub fn mono_to_acp_trico_light(
    g: &EdgeColoredMultigraph,
    roles: Roles,
) -> Result<(TriCoInstance, AcpDecode, LedgerRow), ReductionError> {
    let view = View::new(g, roles)?;
    let bits = color_bits(g);
    let [ni, nj, nk] = [view.nodes[0].len(), view.nodes[1].len(), view.nodes[2].len()];
    let per = nk + 2 * (ni + nj);
    let (mut colors, mut parts, mut edges) = (Vec::new(), Vec::new(), Vec::new());
    for t in 0..bits {
        let base = (t * per) as u32;
        let z = |k: usize| base + k as u32;
        let copy = |r: usize, a: usize, b: usize| base + (nk + 2 * (if r == 0 { a } else { ni + a }) + b) as u32;
        for &node in &view.nodes[2] {
            colors.push(node);
            parts.push(2);
        }
        for r in 0..2 {
            for &node in &view.nodes[r] {
                colors.extend([node, node]);
                parts.extend([r as u8, r as u8]);
            }
        }
        for r in 0..2 {
            for (a, &v) in view.nodes[r].iter().enumerate() {
                for (k, &w) in view.nodes[2].iter().enumerate() {
                    match view.color(v, w) {
                        Some(x) => edges.push((copy(r, a, (x >> t & 1) as usize), z(k))),
                        None => edges.extend([(copy(r, a, 0), z(k)), (copy(r, a, 1), z(k))]),
                    }
                }
            }
        }
        for (a, &v) in view.nodes[0].iter().enumerate() {
            for (b, &w) in view.nodes[1].iter().enumerate() {
                edges.extend([(copy(0, a, 0), copy(1, b, 1)), (copy(0, a, 1), copy(1, b, 0))]);
                if let Some(x) = view.color(v, w) {
                    let nb = (1 - (x >> t & 1)) as usize;
                    edges.push((copy(0, a, nb), copy(1, b, nb)));
                }
            }
        }
    }
    let inst = TriCoInstance {
        variant: TriCoVariant::Light { p: 2 * bits },
        colors,
        edges,
        parts: Some(parts),
        components: None,
    };
    let pairs = query_pairs(g, &view)
        .into_iter()
        .map(|p| p.map(|(a, b)| (view.nodes[0][a], view.nodes[1][b])))
        .collect();
    let mut ledger = LedgerRow::default();
    ledger.record_sizes(1, inst.node_count() as u64, inst.edges.len() as u64);
    let bound = bits * (nk + 2 * (ni + nj));
    ledger.check("trico nodes", inst.node_count() as u64, bound as u64, "T*(nK+2(nI+nJ))");
    ledger.check("trico edges", inst.edges.len() as u64, (bits * (2 * (ni + nj) * nk + 3 * ni * nj)) as u64, "T*(2(nI+nJ)nK+3nInJ)");
    Ok((inst, AcpDecode { pairs }, ledger))
}

// ---------------------------------------------------------------- Salem-Spencer sets

/// A digit-vector family: numbers `Σ d_i b^i` with `k` digits in `[0, m]`,
/// `2m < b`, and `Σ d_i² = r` (any digit sum of squares when `r` is `None`,
/// which is only 3-AP-free for `m = 1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BehrendParams {
    pub base: u64,
    pub dim: u32,
    pub max_digit: u64,
    pub radius: Option<u64>,
    pub size: u64,
}

/// Number of vectors in `[0, m]^k` with each sum of squares.
fn shell_counts(k: u32, m: u64) -> Vec<u64> {
    let mut cnt = vec![1u64];
    for _ in 0..k {
        let mut next = vec![0u64; cnt.len() + (m * m) as usize];
        for (s, &c) in cnt.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for d in 0..=m {
                next[s + (d * d) as usize] += c;
            }
        }
        cnt = next;
    }
    cnt
}

/// Largest `b` with `b^k ≤ n`.
fn kth_root(n: u64, k: u32) -> u64 {
    let mut b = (n as f64).powf(1.0 / k as f64).round() as u64 + 1;
    while b > 0 && b.checked_pow(k).is_none_or(|p| p > n) {
        b -= 1;
    }
    b
}

/// The parameters `behrend_set(n)` uses: for each dimension `k`, the 0/1
/// cube in base 3 and the fullest sphere shell in the largest base with
/// `b^k ≤ n`. Ties keep the smaller dimension and radius.
pub fn behrend_params(n: u64) -> Result<BehrendParams, ReductionError> {
    if n < 1 {
        return Err(ReductionError::ShapeMismatch("the range [N] needs N >= 1".into()));
    }
    if n <= 2 {
        return Ok(BehrendParams { base: n.max(2), dim: 1, max_digit: n - 1, radius: None, size: n });
    }
    let mut best: Option<BehrendParams> = None;
    let mut k = 1;
    loop {
        let b = kth_root(n, k);
        if b < 3 {
            break;
        }
        let m = (b - 1) / 2;
        // base 3 with 0/1 digits covers every smaller base's cube
        let cube = BehrendParams { base: 3, dim: k, max_digit: 1, radius: None, size: 1 << k };
        let shell = if m >= 2 && k >= 2 {
            let (r, &c) = shell_counts(k, m).iter().enumerate().rev().max_by_key(|&(_, &c)| c).expect("nonempty");
            Some(BehrendParams { base: b, dim: k, max_digit: m, radius: Some(r as u64), size: c })
        } else {
            None
        };
        for cand in std::iter::once(cube).chain(shell) {
            if best.is_none_or(|x| cand.size > x.size) {
                best = Some(cand);
            }
        }
        k += 1;
    }
    Ok(best.expect("n >= 3 admits base 3"))
}

/// A 3-AP-free subset of `[0, n)`, sorted.
pub fn behrend_set(n: u64) -> Result<Vec<u64>, ReductionError> {
    let p = behrend_params(n)?;
    if n <= 2 {
        return Ok((0..n).collect());
    }
    let mut out = Vec::with_capacity(p.size as usize);
    fn walk(p: &BehrendParams, pos: u32, value: u64, scale: u64, sq: u64, out: &mut Vec<u64>) {
        if pos == p.dim {
            if p.radius.is_none_or(|r| r == sq) {
                out.push(value);
            }
            return;
        }
        for d in 0..=p.max_digit {
            let s = sq + d * d;
            if p.radius.is_some_and(|r| s > r) {
                break;
            }
            walk(p, pos + 1, value + d * scale, scale * p.base, s, out);
        }
    }
    walk(&p, 0, 0, 1, 0, &mut out);
    out.sort_unstable();
    Ok(out)
}

/// Smallest `N ≤ limit` whose set holds `colors` elements.
pub fn smallest_adequate(colors: usize, limit: u64) -> Result<u64, ReductionError> {
    let size = |n: u64| behrend_params(n).map(|p| p.size);
    let capacity = size(limit.max(1))?;
    if (colors as u64) > capacity || limit == 0 {
        return Err(ReductionError::TooManyColors { colors, capacity: capacity as usize });
    }
    let (mut lo, mut hi) = (1u64, limit);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if size(mid)? >= colors as u64 {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

// ---------------------------------------------------------------- integer exact triangle

/// Decode data of the integer exact-triangle encoding.
#[derive(Clone, Debug)]
pub struct IntExactDecode {
    pub pairs: Vec<Option<(usize, usize)>>,
    /// Color of the `i`-th smallest used color maps to `image[i]`.
    pub image: Vec<(u32, u64)>,
    pub universe: u64,
}

impl IntExactDecode {
    pub fn decode(&self, ans: &Matrix<bool>) -> PartialEdgeAnswers {
        self.pairs.iter().map(|p| p.map(|(a, b)| *ans.get(a, b))).collect()
    }
}

/// Maps colors injectively into a 3-AP-free set `S ⊆ [N]` with the
/// smallest adequate `N ≤ limit`; `I–K` and `K–J` edges weigh `f(color)`,
/// `I–J` edges `-2·f(color)`, missing pairs `+inf`. A triangle then sums to
/// zero exactly when its three colors agree.
pub fn mono_to_int_exact_tri(
    g: &EdgeColoredMultigraph,
    roles: Roles,
    limit: u64,
) -> Result<(WeightedTripartiteGraph, IntExactDecode, LedgerRow), ReductionError> {
    let view = View::new(g, roles)?;
    let mut used: Vec<u32> = g.edges.iter().map(|e| e.2).collect();
    used.sort_unstable();
    used.dedup();
    let n = smallest_adequate(used.len(), limit)?;
    let s = behrend_set(n)?;
    let f: HashMap<u32, i64> = used.iter().zip(&s).map(|(&c, &x)| (c, x as i64)).collect();
    let weight = |u: u32, v: u32, scale: i64| view.color(u, v).map_or_else(Real::infinity, |c| Real::int(scale * f[&c]));
    let [vi, vj, vk] = &view.nodes;
    let w_ij = Matrix::from_fn(vi.len(), vj.len(), |a, b| weight(vi[a], vj[b], -2));
    let w_ik = Matrix::from_fn(vi.len(), vk.len(), |a, k| weight(vi[a], vk[k], 1));
    let w_kj = Matrix::from_fn(vk.len(), vj.len(), |k, b| weight(vk[k], vj[b], 1));
    let out = WeightedTripartiteGraph { w_ij, w_ik, w_kj };
    let mut ledger = LedgerRow::default();
    let (ni, nj, nk) = out.sizes();
    ledger.record_sizes(1, (ni + nj + nk) as u64, g.edges.len() as u64);
    ledger.check("weight magnitude", 2 * s.last().copied().unwrap_or(0), 2 * n, "2*N");
    ledger.note("universe", n);
    let image = used.iter().zip(&s).map(|(&c, &x)| (c, x)).collect();
    Ok((out, IntExactDecode { pairs: query_pairs(g, &view), image, universe: n }, ledger))
}
