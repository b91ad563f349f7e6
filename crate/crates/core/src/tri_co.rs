//! Conversions between triangle-collection variants: arbitrary colored
//! graphs against tripartite ones, light instances against disjoint
//! unions of one-node-per-color components, and splitting off frequent
//! colors by matrix products.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::instances::{TriCoInstance, TriCoVariant};
use crate::ledger::{LedgerRow, ReductionError};
use crate::oracles::TriCoAnswer;

// ---------------------------------------------------------------- general and tripartite

/// Maps tripartite answers back to the colors of the general instance.
#[derive(Clone, Debug)]
pub struct TripartiteDecode {
    /// Sorted colors of the general instance; color `colors[x]` becomes
    /// `3x + part` in the tripartite instance.
    pub colors: Vec<u32>,
}

impl TripartiteDecode {
    /// Pairs of equal colors exist only because of the gadget and are
    /// dropped.
    pub fn decode(&self, ans: &TriCoAnswer) -> TriCoAnswer {
        let mut acp = BTreeMap::new();
        for (x, &a) in self.colors.iter().enumerate() {
            for (y, &b) in self.colors.iter().enumerate() {
                if x != y {
                    acp.insert((a, b), ans.acp.get(&(3 * x as u32, 3 * y as u32 + 1)).copied().unwrap_or(true));
                }
            }
        }
        TriCoAnswer { decide: ans.decide, acp }
    }
}

/// A general instance asks about triples of distinct colors. A gadget
/// `k, k', k''` per color covers every triple with a repeated color, then
/// three copies of the graph with edges between different copies turn
/// triangles into one node per part.
pub fn original_to_tripartite(g: &TriCoInstance) -> (TriCoInstance, TripartiteDecode) {
    let colors = g.all_colors();
    let idx: HashMap<u32, usize> = colors.iter().enumerate().map(|(x, &c)| (c, x)).collect();
    let n = g.node_count();
    let kc = colors.len();
    // nodes of G*: originals, then plain, primed and double-primed gadgets
    let star: Vec<usize> =
        g.colors.iter().map(|c| idx[c]).chain((0..3).flat_map(|_| 0..kc)).collect();
    let (plain, prime, dprime) = (n, n + kc, n + 2 * kc);
    let mut edges: Vec<(usize, usize)> = g.edges.iter().map(|&(u, v)| (u as usize, v as usize)).collect();
    for k in 0..kc {
        edges.push((prime + k, dprime + k));
        for l in 0..kc {
            edges.push((plain + k, prime + l));
            edges.push((plain + k, dprime + l));
        }
    }
    let m = star.len();
    let mut out_colors = Vec::with_capacity(3 * m);
    let mut parts = Vec::with_capacity(3 * m);
    for copy in 0..3u8 {
        for &c in &star {
            out_colors.push(3 * c as u32 + copy as u32);
            parts.push(copy);
        }
    }
    let mut out_edges = Vec::with_capacity(6 * edges.len());
    for &(u, v) in &edges {
        for i in 0..3 {
            for j in 0..3 {
                if i < j {
                    out_edges.push(((i * m + u) as u32, (j * m + v) as u32));
                    out_edges.push(((i * m + v) as u32, (j * m + u) as u32));
                }
            }
        }
    }
    let out = TriCoInstance {
        variant: TriCoVariant::Tripartite,
        colors: out_colors,
        edges: out_edges,
        parts: Some(parts),
        components: None,
    };
    (out, TripartiteDecode { colors })
}

/// For each part `X`, a clique on one new node per color outside `X`.
/// Every distinct triple that is not one color per part then has a
/// triangle inside some clique; the genuine triples are untouched. Color
/// ids are unchanged, so answers read off directly.
pub fn tripartite_to_original(g: &TriCoInstance) -> Result<TriCoInstance, ReductionError> {
    if matches!(g.variant, TriCoVariant::General) || g.parts.is_none() {
        return Err(ReductionError::NotTripartite("instance has no parts".into()));
    }
    let all = g.all_colors();
    let mut colors = g.colors.clone();
    let mut edges = g.edges.clone();
    for x in 0..3u8 {
        let own: HashSet<u32> = g.part_colors(x).into_iter().collect();
        let start = colors.len() as u32;
        colors.extend(all.iter().copied().filter(|c| !own.contains(c)));
        let end = colors.len() as u32;
        for u in start..end {
            for v in u + 1..end {
                edges.push((u, v));
            }
        }
    }
    Ok(TriCoInstance { variant: TriCoVariant::General, colors, edges, parts: None, components: None })
}

// ---------------------------------------------------------------- light to components

/// Index of each node among the nodes of its color, in node order.
fn copy_index(g: &TriCoInstance) -> Vec<usize> {
    let mut seen: HashMap<u32, usize> = HashMap::new();
    g.colors
        .iter()
        .map(|&c| {
            let e = seen.entry(c).or_default();
            *e += 1;
            *e - 1
        })
        .collect()
}

/// One component per `(i, j, k) ∈ [p]³`, holding the `i`-th node of every
/// A color, the `j`-th of every B color and the `k`-th of every C color,
/// with the edges among them. A color triple has a triangle here iff it
/// has one in the input.
pub fn light_to_star2(g: &TriCoInstance) -> Result<(TriCoInstance, LedgerRow), ReductionError> {
    let TriCoVariant::Light { p } = g.variant else {
        return Err(ReductionError::NotLight(format!("variant {:?}", g.variant)));
    };
    let Some(parts) = &g.parts else {
        return Err(ReductionError::NotLight("instance has no parts".into()));
    };
    let copy = copy_index(g);
    if let Some(v) = copy.iter().position(|&c| c >= p) {
        return Err(ReductionError::NotLight(format!("color {} has more than {p} nodes", g.colors[v])));
    }
    let t = p * p * p;
    let comp_of = |part: u8, c: usize, a: usize, b: usize| match part {
        0 => c * p * p + a * p + b,
        1 => a * p * p + c * p + b,
        _ => a * p * p + b * p + c,
    };
    // new id of node v in component q, when v belongs there
    let mut ids: HashMap<(usize, usize), u32> = HashMap::new();
    let (mut colors, mut out_parts, mut comps) = (Vec::new(), Vec::new(), Vec::new());
    for v in 0..g.node_count() {
        for a in 0..p {
            for b in 0..p {
                let q = comp_of(parts[v], copy[v], a, b);
                ids.insert((v, q), colors.len() as u32);
                colors.push(g.colors[v]);
                out_parts.push(parts[v]);
                comps.push(q as u32);
            }
        }
    }
    let mut edges = Vec::new();
    for &(u, v) in &g.edges {
        let (u, v) = (u as usize, v as usize);
        for a in 0..p {
            for b in 0..p {
                let q = comp_of(parts[u], copy[u], a, b);
                if let Some(&nv) = ids.get(&(v, q)) {
                    edges.push((ids[&(u, q)], nv));
                }
            }
        }
    }
    let out = TriCoInstance {
        variant: TriCoVariant::Star2 { t },
        colors,
        edges,
        parts: Some(out_parts),
        components: Some(comps),
    };
    let mut ledger = LedgerRow::default();
    ledger.record_sizes(1, out.node_count() as u64, out.edges.len() as u64);
    ledger.check("star2 components", t as u64, (p * p * p) as u64, "p^3");
    ledger.check("star2 nodes", out.node_count() as u64, (g.all_colors().len() * p * p * p) as u64, "colors*p^3");
    Ok((out, ledger))
}

// ---------------------------------------------------------------- heavy colors

/// Triples through frequent colors, found by products, to be combined with
/// an answer for the rest.
#[derive(Clone, Debug)]
pub struct HeavySplit {
    pub heavy: HashSet<u32>,
    /// Covered `(A, B, C)` color triples with at least one heavy color.
    pub covered: HashSet<(u32, u32, u32)>,
    pub part_colors: [Vec<u32>; 3],
    pub threshold: usize,
}

impl HeavySplit {
    /// Full answer from the residual instance's answer.
    pub fn combine(&self, residual: &TriCoAnswer) -> TriCoAnswer {
        let [ka, kb, kc] = &self.part_colors;
        let mut acp = BTreeMap::new();
        for &a in ka {
            for &b in kb {
                let pair_light = !self.heavy.contains(&a) && !self.heavy.contains(&b);
                let ok = kc.iter().all(|&c| {
                    if pair_light && !self.heavy.contains(&c) {
                        true
                    } else {
                        self.covered.contains(&(a, b, c))
                    }
                }) && (!pair_light || residual.acp.get(&(a, b)).copied().unwrap_or(true));
                acp.insert((a, b), ok);
            }
        }
        let decide = acp.values().all(|&v| v);
        TriCoAnswer { decide, acp }
    }
}

/// Smallest integer at least `n^eps`.
pub fn frequency_threshold(n: usize, eps: f64) -> usize {
    let x = (n as f64).powf(eps);
    let mut t = x.ceil() as usize;
    // guard against powf landing just above an integer
    if t > 0 && ((t - 1) as f64 - x).abs() < 1e-9 {
        t -= 1;
    }
    t.max(1)
}

/// Colors with at least `n^eps` nodes are settled by naive integer
/// products of the incidence matrices; the nodes of the other colors form
/// a light instance.
pub fn trico_to_light(g: &TriCoInstance, eps: f64) -> Result<(HeavySplit, TriCoInstance, LedgerRow), ReductionError> {
    if matches!(g.variant, TriCoVariant::General) || g.parts.is_none() {
        return Err(ReductionError::NotTripartite("instance has no parts".into()));
    }
    let parts = g.parts.as_ref().expect("checked");
    let n = g.node_count();
    let threshold = frequency_threshold(n, eps);
    let mut freq: HashMap<u32, usize> = HashMap::new();
    for &c in &g.colors {
        *freq.entry(c).or_default() += 1;
    }
    let heavy: HashSet<u32> = freq.iter().filter(|(_, &f)| f >= threshold).map(|(&c, _)| c).collect();
    let mut adj: Vec<HashSet<u32>> = vec![HashSet::new(); n];
    for &(u, v) in &g.edges {
        adj[u as usize].insert(v);
        adj[v as usize].insert(u);
    }
    let mut covered = HashSet::new();
    let mut products = 0u64;
    let mut heavy_sorted: Vec<u32> = heavy.iter().copied().collect();
    heavy_sorted.sort_unstable();
    for &c in &heavy_sorted {
        let members: Vec<usize> = (0..n).filter(|&v| g.colors[v] == c).collect();
        let x = parts[members[0]];
        let others: Vec<usize> = (0..n).filter(|&v| parts[v] != x).collect();
        // paths[u][v] = Σ_i inc[u][i]·inc[i][v] over the members of color c
        let inc: Vec<Vec<u64>> =
            others.iter().map(|&u| members.iter().map(|&m| adj[u].contains(&(m as u32)) as u64).collect()).collect();
        for (a, &u) in others.iter().enumerate() {
            for (b, &v) in others.iter().enumerate() {
                if parts[u] == parts[v] || !adj[u].contains(&(v as u32)) {
                    continue;
                }
                let paths: u64 = (0..members.len()).map(|i| inc[a][i] * inc[b][i]).sum();
                products += 1;
                if paths > 0 {
                    let mut by_part = [0u32; 3];
                    by_part[x as usize] = c;
                    by_part[parts[u] as usize] = g.colors[u];
                    by_part[parts[v] as usize] = g.colors[v];
                    covered.insert((by_part[0], by_part[1], by_part[2]));
                }
            }
        }
    }
    let keep: Vec<usize> = (0..n).filter(|&v| !heavy.contains(&g.colors[v])).collect();
    let mut new_id = vec![u32::MAX; n];
    for (x, &v) in keep.iter().enumerate() {
        new_id[v] = x as u32;
    }
    let edges = g
        .edges
        .iter()
        .filter(|&&(u, v)| new_id[u as usize] != u32::MAX && new_id[v as usize] != u32::MAX)
        .map(|&(u, v)| (new_id[u as usize], new_id[v as usize]))
        .collect();
    let residual = TriCoInstance {
        variant: TriCoVariant::Light { p: (threshold - 1).max(1) },
        colors: keep.iter().map(|&v| g.colors[v]).collect(),
        edges,
        parts: Some(keep.iter().map(|&v| parts[v]).collect()),
        components: None,
    };
    let mut ledger = LedgerRow::default();
    ledger.record_sizes(1, residual.node_count() as u64, residual.edges.len() as u64);
    ledger.check("heavy colors", heavy.len() as u64, (n / threshold) as u64, "n/n^eps");
    ledger.check("residual nodes", residual.node_count() as u64, n as u64, "n");
    ledger.note("product entries", products);
    let split = HeavySplit { heavy, covered, part_colors: [g.part_colors(0), g.part_colors(1), g.part_colors(2)], threshold };
    Ok((split, residual, ledger))
}
