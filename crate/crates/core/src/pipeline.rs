//! Named reduction chains. Each id maps a source instance through one
//! reduction, answers the targets with reference oracles, decodes, and
//! compares against the source oracle.

use std::cmp::Ordering;
use std::sync::Mutex;

use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::instances::*;
use crate::ledger::{LedgerRow, ReductionError};
use crate::matrix::Matrix;
use crate::numeric::Comparisons;
use crate::oracles::*;
use crate::red_3sum::{all_nums_3sum_via_sparse, real3sum_to_exact_tri};
use crate::red_apsp::{apsp, min_plus_square, LasVegas, RoundStats};
use crate::red_colorful::*;
use crate::red_exacttri::{ae_exact_tri_via_sparse, Route};
use crate::red_mono::*;
use crate::tri_co::*;

/// One registered chain.
#[derive(Clone, Copy, Debug)]
pub struct Pipeline {
    pub id: &'static str,
    /// Instance kind the chain consumes.
    pub source: &'static str,
    /// Instance kind of the produced targets.
    pub target: &'static str,
    /// Library operations the chain runs, in order.
    pub chain: &'static str,
    /// Whether the reduction itself draws random bits.
    pub randomized: bool,
}

pub const PIPELINES: &[Pipeline] = &[
    Pipeline { id: "apsp-sparse", source: "minplus", target: "sparse", chain: "red_apsp::min_plus_square (digraph input: red_apsp::apsp)", randomized: true },
    Pipeline { id: "exacttri-sparse", source: "exacttri", target: "sparse", chain: "red_exacttri::ae_exact_tri_via_sparse, witness route", randomized: true },
    Pipeline { id: "exacttri-count", source: "exacttri", target: "sparse", chain: "red_exacttri::ae_exact_tri_via_sparse, counting route", randomized: true },
    Pipeline { id: "3sum-sparse", source: "3sum", target: "sparse", chain: "red_3sum::all_nums_3sum_via_sparse, witness route", randomized: true },
    Pipeline { id: "3sum-count", source: "3sum", target: "sparse", chain: "red_3sum::all_nums_3sum_via_sparse, counting route", randomized: true },
    Pipeline { id: "3sum-exacttri", source: "3sum", target: "exacttri", chain: "red_3sum::real3sum_to_exact_tri", randomized: false },
    Pipeline { id: "mono-overlay", source: "sparse-bundle", target: "mono", chain: "red_mono::overlay", randomized: true },
    Pipeline { id: "mono-acptrico", source: "mono", target: "trico", chain: "red_mono::mono_to_acp_trico_light per rotation, red_mono::merge_edge_answers", randomized: false },
    Pipeline { id: "mono-intexact", source: "mono", target: "exacttri", chain: "red_mono::mono_to_int_exact_tri per rotation, red_mono::merge_edge_answers", randomized: false },
    Pipeline { id: "ov-cbmm", source: "ov", target: "cbmm", chain: "red_colorful::ov_to_colorful_bmm", randomized: false },
    Pipeline { id: "minplus-cbmm", source: "minplus", target: "cbmm", chain: "red_colorful::minplus_to_colorful_bmm_instances, MinPlusCbmm::decode", randomized: false },
    Pipeline { id: "cbmm-acptrico", source: "cbmm", target: "trico", chain: "red_colorful::colorful_bmm_to_acp_trico", randomized: false },
    Pipeline { id: "ov-trico", source: "ov", target: "trico", chain: "red_colorful::ov_to_trico_light", randomized: false },
    Pipeline { id: "cbmm-strings", source: "cbmm", target: "strings", chain: "red_colorful::colorful_bmm_to_strings", randomized: false },
    Pipeline { id: "cbmm-colorsparse", source: "cbmm", target: "sparse", chain: "red_colorful::colorful_bmm_to_colorful_sparse_tri", randomized: false },
    Pipeline { id: "trico-tripartite", source: "trico", target: "trico", chain: "tri_co::original_to_tripartite", randomized: false },
    Pipeline { id: "trico-light", source: "trico", target: "trico", chain: "tri_co::trico_to_light, HeavySplit::combine", randomized: false },
    Pipeline { id: "light-star2", source: "trico", target: "trico", chain: "tri_co::light_to_star2", randomized: false },
];

pub fn lookup(id: &str) -> Result<&'static Pipeline, PipelineError> {
    PIPELINES.iter().find(|p| p.id == id).ok_or_else(|| PipelineError::UnknownPipeline(id.to_string()))
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("unknown pipeline {0:?}")]
    UnknownPipeline(String),
    #[error("pipeline {pipeline} takes {expected} instances, got {got}")]
    WrongKind { pipeline: String, expected: String, got: String },
    #[error("pipeline {pipeline} takes {expected} instances, got variant {got}")]
    WrongVariant { pipeline: String, expected: String, got: String },
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

impl From<OracleError> for PipelineError {
    fn from(e: OracleError) -> Self {
        PipelineError::Reduction(e.into())
    }
}

/// Per-run knobs. Unset values take per-pipeline defaults.
#[derive(Clone, Debug, Default)]
pub struct Options {
    /// Strip width, block size or bucket parameter.
    pub d: Option<usize>,
    /// Bucket count of the 3SUM to exact-triangle split.
    pub g: Option<usize>,
    /// Exponent of the heavy cutoffs.
    pub eps: Option<f64>,
    /// Low-triple threshold of the min-plus bit rounds.
    pub threshold: Option<usize>,
    /// Largest range searched for a progression-free color set.
    pub limit: Option<u64>,
    /// Seal every source real so only counted comparisons can read it.
    pub tattle: bool,
    /// Corrupt the decoded answer. Exercises the mismatch path.
    pub fault: bool,
}

pub const DEFAULT_LIMIT: u64 = 1 << 12;

/// Decoded or reference answer of a source instance.
#[derive(Clone, Debug)]
pub enum Answer {
    Bool(bool),
    Bits(Vec<bool>),
    Grid(Matrix<bool>),
    /// Per bundled graph, triangles through each query edge.
    Counts(Vec<Vec<u64>>),
    /// Argmins are compared only when both sides carry them.
    MinPlus { values: Matrix<Real>, argmin: Option<Matrix<usize>> },
    TriCo(TriCoAnswer),
}

impl Answer {
    pub fn agrees(&self, other: &Answer, cmp: &Comparisons) -> bool {
        use Answer::*;
        match (self, other) {
            (Bool(x), Bool(y)) => x == y,
            (Bits(x), Bits(y)) => x == y,
            (Grid(x), Grid(y)) => x == y,
            (Counts(x), Counts(y)) => x == y,
            (TriCo(x), TriCo(y)) => x == y,
            (MinPlus { values: v, argmin: a }, MinPlus { values: w, argmin: b }) => {
                let same_shape = (v.rows(), v.cols()) == (w.rows(), w.cols());
                let vals = same_shape && v.data().iter().zip(w.data()).all(|(x, y)| cmp.compare2(x, y) == Ordering::Equal);
                let args = match (a, b) {
                    (Some(a), Some(b)) => a == b,
                    _ => true,
                };
                vals && args
            }
            _ => false,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Answer::Bool(x) => json!(x),
            Answer::Bits(x) => json!(x),
            Answer::Grid(m) => json!(m.to_rows()),
            Answer::Counts(c) => json!(c),
            Answer::MinPlus { values, argmin } => {
                let mut v = json!({ "values": values.map(|x| x.to_string()).to_rows() });
                if let Some(a) = argmin {
                    v["argmin"] = json!(a.to_rows());
                }
                v
            }
            Answer::TriCo(t) => {
                let acp: Vec<(u32, u32, bool)> = t.acp.iter().map(|(&(a, b), &v)| (a, b, v)).collect();
                json!({ "decide": t.decide, "acp": acp })
            }
        }
    }

    fn corrupt(&mut self) {
        match self {
            Answer::Bool(x) => *x = !*x,
            Answer::Bits(x) => match x.first_mut() {
                Some(b) => *b = !*b,
                None => x.push(true),
            },
            Answer::Grid(m) => {
                if m.rows() > 0 && m.cols() > 0 {
                    let v = !*m.get(0, 0);
                    m.set(0, 0, v);
                } else {
                    *self = Answer::Bool(true);
                }
            }
            Answer::Counts(c) => match c.iter_mut().find(|v| !v.is_empty()) {
                Some(v) => v[0] += 1,
                None => c.push(vec![1]),
            },
            Answer::MinPlus { values, .. } => {
                if values.rows() > 0 && values.cols() > 0 {
                    let v = values.get(0, 0).add(&Real::int(1));
                    let v = if v.is_infinite() { Real::zero() } else { v };
                    values.set(0, 0, v);
                }
            }
            Answer::TriCo(t) => t.decide = !t.decide,
        }
    }
}

/// One reduction run: the decoded answer, the targets it produced and the
/// accounting. Targets of interactive chains are kept only when recording.
#[derive(Clone, Debug)]
pub struct Run {
    pub answer: Answer,
    pub targets: Vec<Instance>,
    pub ledger: LedgerRow,
    pub stats: RoundStats,
}

/// Passes graphs to the reference oracle, optionally keeping copies.
struct Recording {
    seen: Option<Mutex<Vec<SparseGraph>>>,
}

impl TriangleOracle for Recording {
    fn witnesses(&self, g: &SparseGraph) -> Vec<Option<u32>> {
        self.keep(g);
        ReferenceTriangles.witnesses(g)
    }

    fn counts(&self, g: &SparseGraph) -> Vec<u64> {
        self.keep(g);
        ReferenceTriangles.counts(g)
    }
}

impl Recording {
    fn new(record: bool) -> Self {
        Recording { seen: record.then(|| Mutex::new(Vec::new())) }
    }

    fn keep(&self, g: &SparseGraph) {
        if let Some(s) = &self.seen {
            s.lock().expect("recorder lock").push(g.clone());
        }
    }

    /// Recorded graphs in a schedule-independent order.
    fn into_targets(self) -> Vec<Instance> {
        let Some(s) = self.seen else { return Vec::new() };
        let mut graphs: Vec<(String, SparseGraph)> = s
            .into_inner()
            .expect("recorder lock")
            .into_iter()
            .map(|g| (serde_json::to_string(&g).expect("graphs serialize"), g))
            .collect();
        graphs.sort_by(|a, b| a.0.cmp(&b.0));
        graphs.into_iter().map(|(_, g)| Instance::Sparse(g)).collect()
    }
}

fn wrong(id: &str, src: &Instance) -> PipelineError {
    let expected = lookup(id).map(|p| p.source).unwrap_or("?");
    PipelineError::WrongKind { pipeline: id.to_string(), expected: expected.to_string(), got: src.kind().to_string() }
}

/// Copy of `src` with every real sealed.
pub fn tattled(src: &Instance) -> Instance {
    let seal = |m: &Matrix<Real>| m.map(|x| x.tattling());
    let seal_v = |v: &[Real]| v.iter().map(|x| x.tattling()).collect::<Vec<_>>();
    match src {
        Instance::ThreeSum(x) => Instance::ThreeSum(ThreeSumInstance { a: seal_v(&x.a), b: seal_v(&x.b), c: seal_v(&x.c) }),
        Instance::MinPlus(x) => Instance::MinPlus(MinPlusInstance { a: seal(&x.a), b: seal(&x.b) }),
        Instance::ExactTri(x) => Instance::ExactTri(WeightedTripartiteGraph { w_ij: seal(&x.w_ij), w_ik: seal(&x.w_ik), w_kj: seal(&x.w_kj) }),
        Instance::Digraph(x) => Instance::Digraph(WeightedDigraph {
            node_count: x.node_count,
            arcs: x.arcs.iter().map(|(u, v, w)| (*u, *v, w.tattling())).collect(),
        }),
        other => other.clone(),
    }
}

fn multiplicity(cb: &ColorfulBmmInstance) -> usize {
    let mut count = std::collections::HashMap::new();
    for c in cb.color.iter().flatten() {
        *count.entry(*c).or_insert(0usize) += 1;
    }
    count.values().copied().max().unwrap_or(1)
}

fn default_buckets(inst: &ThreeSumInstance) -> usize {
    let smallest = inst.a.len().min(inst.b.len()).min(inst.c.len()).max(1);
    ((smallest as f64).sqrt().ceil() as usize).clamp(1, smallest)
}

/// Runs the reduction of `id` on `src` and decodes the target answers.
pub fn run(id: &str, src: &Instance, opts: &Options, seed: u64, record: bool) -> Result<Run, PipelineError> {
    lookup(id)?;
    let sealed;
    let src = if opts.tattle {
        sealed = tattled(src);
        &sealed
    } else {
        src
    };
    let cmp = Comparisons::new();
    let cfg = LasVegas::default();
    let d = opts.d.unwrap_or(2);
    let eps = opts.eps.unwrap_or(0.5);
    let mut ledger = LedgerRow::new(id, seed);
    let mut stats = RoundStats::default();
    let mut targets = Vec::new();
    let answer = match (id, src) {
        ("apsp-sparse", Instance::MinPlus(x)) => {
            let oracle = Recording::new(record);
            let r = min_plus_square(&x.a, &x.b, d, &oracle, seed, cfg, &cmp)?;
            ledger.absorb(r.ledger);
            stats = r.stats;
            targets = oracle.into_targets();
            Answer::MinPlus { values: r.values, argmin: None }
        }
        ("apsp-sparse", Instance::Digraph(g)) => {
            let oracle = Recording::new(record);
            let (dist, led) = apsp(g, d, &oracle, seed, cfg, &cmp)?;
            ledger.absorb(led);
            targets = oracle.into_targets();
            Answer::MinPlus { values: dist, argmin: None }
        }
        ("exacttri-sparse" | "exacttri-count", Instance::ExactTri(g)) => {
            let route = if id == "exacttri-count" { Route::Counts } else { Route::Witnesses };
            let oracle = Recording::new(record);
            let (ans, led) = ae_exact_tri_via_sparse(g, d, &oracle, seed, cfg, route, &cmp)?;
            ledger.absorb(led);
            targets = oracle.into_targets();
            Answer::Grid(ans)
        }
        ("3sum-sparse" | "3sum-count", Instance::ThreeSum(x)) => {
            let route = if id == "3sum-count" { Route::Counts } else { Route::Witnesses };
            let oracle = Recording::new(record);
            let (ans, led) = all_nums_3sum_via_sparse(x, d, &oracle, seed, cfg, route, &cmp)?;
            ledger.absorb(led);
            targets = oracle.into_targets();
            Answer::Bits(ans)
        }
        ("3sum-exacttri", Instance::ThreeSum(x)) => {
            let g = opts.g.unwrap_or_else(|| default_buckets(x));
            let mut red = real3sum_to_exact_tri(x, g, eps, &cmp)?;
            let answers: Vec<Matrix<bool>> = red.graphs.par_iter().map(|w| exact_tri_decide(w, &cmp)).collect();
            let ans = red.decode(x, &answers, &cmp)?;
            ledger.absorb(std::mem::take(&mut red.ledger));
            ledger.note("heavy bucket pairs", red.heavy_pairs);
            targets = red.graphs.into_iter().map(Instance::ExactTri).collect();
            Answer::Bits(ans)
        }
        ("mono-overlay", Instance::SparseBundle(b)) => {
            let (mg, dec) = overlay(&b.graphs, b.node_count, seed)?;
            let per = dec.decode(&ae_mono_tri(&mg));
            ledger.record_sizes(1, mg.node_count as u64, mg.edges.len() as u64);
            let mut simple: Vec<(u32, u32)> = mg.edges.iter().map(|&(u, v, _)| (u.min(v), u.max(v))).collect();
            simple.sort_unstable();
            simple.dedup();
            ledger.degeneracy = degeneracy(mg.node_count, &simple).0 as u64;
            ledger.check("overlay nodes", mg.node_count as u64, b.node_count as u64, "n");
            let total: usize = b.graphs.iter().map(|g| g.edges.len()).sum();
            ledger.check("overlay edges", mg.edges.len() as u64, total as u64, "sum of edges");
            targets.push(Instance::Mono(mg));
            Answer::Counts(per.into_iter().map(|a| a.count).collect())
        }
        ("mono-acptrico", Instance::Mono(g)) => {
            let mut parts = Vec::new();
            for roles in ROTATIONS {
                let (tc, dec, led) = mono_to_acp_trico_light(g, roles)?;
                parts.push(dec.decode(&tri_co(&tc)?)?);
                ledger.absorb(led);
                targets.push(Instance::TriCo(tc));
            }
            let merged = merge_edge_answers(&parts).ok_or_else(|| ReductionError::OracleProtocol("edge left undecided".into()))?;
            Answer::Bits(merged)
        }
        ("mono-intexact", Instance::Mono(g)) => {
            let limit = opts.limit.unwrap_or(DEFAULT_LIMIT);
            let mut parts = Vec::new();
            for roles in ROTATIONS {
                let (w, dec, led) = mono_to_int_exact_tri(g, roles, limit)?;
                parts.push(dec.decode(&exact_tri_decide(&w, &cmp)));
                ledger.absorb(led);
                targets.push(Instance::ExactTri(w));
            }
            let merged = merge_edge_answers(&parts).ok_or_else(|| ReductionError::OracleProtocol("edge left undecided".into()))?;
            Answer::Bits(merged)
        }
        ("ov-cbmm", Instance::Ov(x)) => {
            let (cb, dec, led) = ov_to_colorful_bmm(x, d)?;
            ledger.absorb(led);
            let yes = dec.decode(&colorful_bmm(&cb));
            targets.push(Instance::ColorfulBmm(cb));
            Answer::Bool(yes)
        }
        ("minplus-cbmm", Instance::MinPlus(x)) => {
            let n = x.a.rows().max(x.b.cols());
            let th = opts.threshold.unwrap_or_else(|| default_threshold(n, x.a.cols()));
            let mut mp = minplus_to_colorful_bmm_instances(x, th, &cmp)?;
            let products: Vec<&ColorfulBmmInstance> = mp
                .rounds
                .iter()
                .filter_map(|r| match r {
                    BitRound::Product(p) => Some(p),
                    BitRound::Forced(_) => None,
                })
                .collect();
            let answers: Vec<Matrix<bool>> = products.par_iter().map(|p| colorful_bmm(p)).collect();
            targets = products.into_iter().map(|p| Instance::ColorfulBmm(p.clone())).collect();
            let (values, argmin) = mp.decode(x, &answers, &cmp)?;
            ledger.absorb(std::mem::take(&mut mp.ledger));
            Answer::MinPlus { values, argmin: Some(argmin) }
        }
        ("cbmm-acptrico", Instance::ColorfulBmm(cb)) => {
            let (tc, dec, led) = colorful_bmm_to_acp_trico(cb);
            ledger.absorb(led);
            let ans = dec.decode(&tri_co(&tc)?)?;
            targets.push(Instance::TriCo(tc));
            Answer::Grid(ans)
        }
        ("ov-trico", Instance::Ov(x)) => {
            let (tc, dec, led) = ov_to_trico_light(x, d)?;
            ledger.absorb(led);
            let yes = dec.decode(tri_co(&tc)?.decide);
            targets.push(Instance::TriCo(tc));
            Answer::Bool(yes)
        }
        ("cbmm-strings", Instance::ColorfulBmm(cb)) => {
            let (sp, dec, led) = colorful_bmm_to_strings(cb, multiplicity(cb))?;
            ledger.absorb(led);
            let ans = dec.decode(&distinct_hamming_similarity(&sp));
            targets.push(Instance::Strings(sp));
            Answer::Grid(ans)
        }
        ("cbmm-colorsparse", Instance::ColorfulBmm(cb)) => {
            let (cs, led) = colorful_bmm_to_colorful_sparse_tri(cb);
            ledger.absorb(led);
            let ans = cs.decode(&ae_colorful_sparse_tri(&cs.graph, &cs.node_color, &cs.palette));
            targets.push(Instance::Sparse(cs.graph));
            Answer::Grid(ans)
        }
        ("trico-tripartite", Instance::TriCo(g)) if matches!(g.variant, TriCoVariant::General) => {
            let (tp, dec) = original_to_tripartite(g);
            ledger.record_sizes(1, tp.node_count() as u64, tp.edges.len() as u64);
            let k = g.all_colors().len();
            ledger.check("tripartite nodes", tp.node_count() as u64, (3 * (g.node_count() + 3 * k)) as u64, "3*(n+3k)");
            let ans = dec.decode(&tri_co(&tp)?);
            targets.push(Instance::TriCo(tp));
            Answer::TriCo(ans)
        }
        ("trico-light", Instance::TriCo(g)) => {
            let (split, res, led) = trico_to_light(g, eps)?;
            ledger.absorb(led);
            let ans = split.combine(&tri_co(&res)?);
            targets.push(Instance::TriCo(res));
            Answer::TriCo(ans)
        }
        ("light-star2", Instance::TriCo(g)) => {
            let (s, led) = light_to_star2(g)?;
            ledger.absorb(led);
            let ans = tri_co(&s)?;
            targets.push(Instance::TriCo(s));
            Answer::TriCo(ans)
        }
        ("trico-tripartite", Instance::TriCo(g)) => {
            return Err(PipelineError::WrongVariant { pipeline: id.into(), expected: "general trico".into(), got: format!("{:?}", g.variant) })
        }
        _ => return Err(wrong(id, src)),
    };
    ledger.pipeline = id.to_string();
    ledger.seed = seed;
    ledger.comparisons = cmp.count();
    if stats.oracle_rounds > 0 {
        ledger.rounds = ledger.rounds.max(stats.oracle_rounds as u64);
    }
    let mut answer = answer;
    if opts.fault {
        answer.corrupt();
    }
    Ok(Run { answer, targets, ledger, stats })
}

/// Reference answer of the source instance.
pub fn expected(id: &str, src: &Instance) -> Result<Answer, PipelineError> {
    lookup(id)?;
    let cmp = Comparisons::new();
    Ok(match (id, src) {
        ("apsp-sparse" | "minplus-cbmm", Instance::MinPlus(x)) => {
            let e = min_plus(&x.a, &x.b, &cmp);
            let argmin = (id == "minplus-cbmm").then(|| e.map(|m| m.argmin));
            Answer::MinPlus { values: e.map(|m| m.value.clone()), argmin }
        }
        ("apsp-sparse", Instance::Digraph(g)) => Answer::MinPlus { values: apsp_reference(g, &cmp)?, argmin: None },
        ("exacttri-sparse" | "exacttri-count", Instance::ExactTri(g)) => Answer::Grid(exact_tri_decide(g, &cmp)),
        ("3sum-sparse" | "3sum-count" | "3sum-exacttri", Instance::ThreeSum(x)) => Answer::Bits(all_nums_3sum(x, &cmp)),
        ("mono-overlay", Instance::SparseBundle(b)) => Answer::Counts(b.graphs.iter().map(|g| ae_sparse_tri(g).count).collect()),
        ("mono-acptrico" | "mono-intexact", Instance::Mono(g)) => Answer::Bits(ae_mono_tri(g).decide()),
        ("ov-cbmm" | "ov-trico", Instance::Ov(x)) => Answer::Bool(ov(x).is_some()),
        ("cbmm-acptrico" | "cbmm-strings" | "cbmm-colorsparse", Instance::ColorfulBmm(cb)) => Answer::Grid(colorful_bmm(cb)),
        ("trico-tripartite", Instance::TriCo(g)) => Answer::TriCo(tri_co_general(g)),
        ("trico-light" | "light-star2", Instance::TriCo(g)) => Answer::TriCo(tri_co(g)?),
        _ => return Err(wrong(id, src)),
    })
}

/// Outcome of one verification trial.
#[derive(Clone, Debug)]
pub struct Trial {
    pub agree: bool,
    pub run: Run,
    pub expected: Answer,
}

pub fn verify(id: &str, src: &Instance, opts: &Options, seed: u64) -> Result<Trial, PipelineError> {
    let run = run(id, src, opts, seed, false)?;
    let expected = expected(id, src)?;
    let agree = run.answer.agrees(&expected, &Comparisons::new());
    Ok(Trial { agree, run, expected })
}

/// Generator settings giving a source instance of size about `n`.
pub fn source_pairs(id: &str, n: usize) -> Result<Vec<String>, PipelineError> {
    let n = n.max(1);
    let third = n.div_ceil(3).max(1);
    let v: Vec<String> = match id {
        "apsp-sparse" => vec![format!("n={n}"), format!("d={n}")],
        "exacttri-sparse" | "exacttri-count" | "3sum-sparse" | "3sum-count" | "3sum-exacttri" => vec![format!("n={n}")],
        "mono-overlay" => vec![format!("n={n}"), "count=3".into()],
        "mono-acptrico" | "mono-intexact" => vec![format!("n={third}"), "colors=3".into()],
        "ov-cbmm" | "ov-trico" => vec![format!("n={n}"), "f=4".into()],
        "minplus-cbmm" => vec![format!("n={n}"), "d=4".into()],
        "cbmm-acptrico" | "cbmm-strings" | "cbmm-colorsparse" => vec![format!("n={n}"), "colors=3".into(), "f=2".into()],
        "trico-tripartite" => vec!["variant=general".into(), format!("n={n}"), format!("colors={}", (n / 4).max(2))],
        "trico-light" => vec!["variant=tripartite".into(), "colors=2".into(), format!("p={}", (n / 4).max(1))],
        "light-star2" => vec!["variant=light".into(), format!("colors={}", (n / 8).max(1)), "p=2".into()],
        other => return Err(PipelineError::UnknownPipeline(other.to_string())),
    };
    Ok(v)
}

/// Seeded source instance for `id`; `overrides` are applied after the
/// size defaults.
pub fn generate_source(id: &str, n: usize, overrides: &[String], seed: u64) -> Result<Instance, PipelineError> {
    let p = lookup(id)?;
    let mut pairs = source_pairs(id, n)?;
    pairs.extend(overrides.iter().cloned());
    Ok(generate(p.source, &GenParams::from_pairs(&pairs)?, seed)?)
}

// ---------------------------------------------------------------- shrinking

/// Keeps the nodes flagged in `keep`, renumbered in order.
fn renumber(keep: &[bool]) -> Vec<Option<u32>> {
    let mut next = 0;
    keep.iter()
        .map(|&k| {
            k.then(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

/// Keeps the first half of each part (or of all nodes when untyped).
fn half_nodes(n: usize, parts: Option<&[u8]>) -> Vec<bool> {
    match parts {
        None => (0..n).map(|v| v < n.div_ceil(2)).collect(),
        Some(parts) => {
            let mut size = [0usize; 3];
            for &p in parts {
                size[p as usize] += 1;
            }
            let mut seen = [0usize; 3];
            parts
                .iter()
                .map(|&p| {
                    seen[p as usize] += 1;
                    seen[p as usize] <= size[p as usize].div_ceil(2)
                })
                .collect()
        }
    }
}

fn half(len: usize) -> usize {
    len.div_ceil(2)
}

fn induced_sparse(g: &SparseGraph, limit: usize) -> SparseGraph {
    let n = g.node_count.min(limit);
    let keep: Vec<usize> = (0..g.edges.len()).filter(|&e| (g.edges[e].0 as usize) < n && (g.edges[e].1 as usize) < n).collect();
    let old_to_new: std::collections::HashMap<usize, u32> = keep.iter().enumerate().map(|(x, &e)| (e, x as u32)).collect();
    SparseGraph {
        node_count: n,
        edges: keep.iter().map(|&e| g.edges[e]).collect(),
        parts: g.parts.as_ref().map(|p| p[..n].to_vec()),
        queries: g.queries.as_ref().map(|q| q.iter().filter_map(|e| old_to_new.get(&(*e as usize)).copied()).collect()),
    }
}

/// `src` with its sizes roughly halved, or `None` when nothing shrinks.
pub fn halve(src: &Instance) -> Option<Instance> {
    let out = match src {
        Instance::ThreeSum(x) => Instance::ThreeSum(ThreeSumInstance {
            a: x.a[..half(x.a.len())].to_vec(),
            b: x.b[..half(x.b.len())].to_vec(),
            c: x.c[..half(x.c.len())].to_vec(),
        }),
        Instance::MinPlus(x) => {
            let rows: Vec<usize> = (0..half(x.a.rows())).collect();
            let inner: Vec<usize> = (0..half(x.a.cols())).collect();
            let cols: Vec<usize> = (0..half(x.b.cols())).collect();
            Instance::MinPlus(MinPlusInstance { a: x.a.select_rows(&rows).select_cols(&inner), b: x.b.select_rows(&inner).select_cols(&cols) })
        }
        Instance::ExactTri(g) => {
            let (ni, nj, nk) = g.sizes();
            let (i, j, k): (Vec<usize>, Vec<usize>, Vec<usize>) = ((0..half(ni)).collect(), (0..half(nj)).collect(), (0..half(nk)).collect());
            Instance::ExactTri(WeightedTripartiteGraph {
                w_ij: g.w_ij.select_rows(&i).select_cols(&j),
                w_ik: g.w_ik.select_rows(&i).select_cols(&k),
                w_kj: g.w_kj.select_rows(&k).select_cols(&j),
            })
        }
        Instance::Ov(x) => Instance::Ov(OvInstance { dim: x.dim, vectors: x.vectors[..half(x.vectors.len())].to_vec() }),
        Instance::SparseBundle(b) => {
            let n = half(b.node_count);
            Instance::SparseBundle(SparseBundle { node_count: n, graphs: b.graphs.iter().map(|g| induced_sparse(g, n)).collect() })
        }
        Instance::Mono(g) => {
            let new = renumber(&half_nodes(g.node_count, g.parts.as_deref()));
            let edges = g
                .edges
                .iter()
                .filter_map(|&(u, v, c)| Some((new[u as usize]?, new[v as usize]?, c)))
                .collect();
            let parts = g.parts.as_ref().map(|p| p.iter().zip(&new).filter(|(_, n)| n.is_some()).map(|(&p, _)| p).collect());
            Instance::Mono(EdgeColoredMultigraph { node_count: new.iter().flatten().count(), edges, parts })
        }
        Instance::ColorfulBmm(cb) => {
            let rows: Vec<usize> = (0..half(cb.a.rows())).collect();
            let cols: Vec<usize> = (0..half(cb.b.cols())).collect();
            Instance::ColorfulBmm(ColorfulBmmInstance::new(cb.a.select_rows(&rows), cb.b.select_cols(&cols), cb.color.clone()))
        }
        Instance::TriCo(g) => {
            let new = renumber(&half_nodes(g.node_count(), g.parts.as_deref()));
            let filter = |xs: &[u32]| xs.iter().zip(&new).enumerate().filter(|(_, (_, n))| n.is_some()).map(|(_, (&x, _))| x).collect::<Vec<u32>>();
            Instance::TriCo(TriCoInstance {
                variant: g.variant,
                colors: filter(&g.colors),
                edges: g.edges.iter().filter_map(|&(u, v)| Some((new[u as usize]?, new[v as usize]?))).collect(),
                parts: g.parts.as_ref().map(|p| p.iter().zip(&new).filter(|(_, n)| n.is_some()).map(|(&p, _)| p).collect()),
                components: g.components.as_ref().map(|c| filter(c)),
            })
        }
        Instance::Digraph(g) => {
            let n = half(g.node_count);
            Instance::Digraph(WeightedDigraph {
                node_count: n,
                arcs: g.arcs.iter().filter(|a| (a.0 as usize) < n && (a.1 as usize) < n).cloned().collect(),
            })
        }
        _ => return None,
    };
    (out != *src).then_some(out)
}

/// Halves a failing instance while it keeps failing. Halvings the
/// reduction rejects count as passing.
pub fn shrink(id: &str, src: &Instance, opts: &Options, seed: u64) -> Instance {
    let mut cur = src.clone();
    while let Some(h) = halve(&cur) {
        match verify(id, &h, opts, seed) {
            Ok(t) if !t.agree => cur = h,
            _ => break,
        }
    }
    cur
}
