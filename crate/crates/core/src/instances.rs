//! Problem instances, validators, seeded generators and the JSON document format.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::matrix::Matrix;
use crate::numeric::RestrictedReal;

pub type Real = RestrictedReal;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("parse error at line {line}, field `{field}`: {message}")]
    ParseError { line: usize, field: String, message: String },
    #[error("unknown instance kind {0:?}")]
    UnknownKind(String),
    #[error("{0}")]
    Invalid(#[from] Violation),
}

/// The first broken invariant of an instance.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{rule} at {location}")]
pub struct Violation {
    pub rule: String,
    pub location: String,
}

fn violation<T>(rule: &str, location: impl fmt::Display) -> Result<T, Violation> {
    Err(Violation { rule: rule.to_string(), location: location.to_string() })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreeSumInstance {
    pub a: Vec<Real>,
    pub b: Vec<Real>,
    pub c: Vec<Real>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinPlusInstance {
    pub a: Matrix<Real>,
    pub b: Matrix<Real>,
}

/// Tripartite graph on parts `I`, `J`, `K` with a weight per pair across
/// parts; `+inf` marks an absent edge. Queries live on the `I–J` slab.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedTripartiteGraph {
    pub w_ij: Matrix<Real>,
    pub w_ik: Matrix<Real>,
    pub w_kj: Matrix<Real>,
}

impl WeightedTripartiteGraph {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.w_ij.rows(), self.w_ij.cols(), self.w_ik.cols())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OvInstance {
    pub dim: usize,
    pub vectors: Vec<Vec<bool>>,
}

/// Part tags used by tripartite graphs.
pub const LEFT: u8 = 0;
pub const MIDDLE: u8 = 1;
pub const RIGHT: u8 = 2;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseGraph {
    pub node_count: usize,
    pub edges: Vec<(u32, u32)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parts: Option<Vec<u8>>,
    /// Indices into `edges`; `None` means every edge is a query.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queries: Option<Vec<u32>>,
}

impl SparseGraph {
    pub fn query_edges(&self) -> Vec<usize> {
        match &self.queries {
            Some(q) => q.iter().map(|&e| e as usize).collect(),
            None => (0..self.edges.len()).collect(),
        }
    }

    pub fn query_count(&self) -> usize {
        self.queries.as_ref().map_or(self.edges.len(), |q| q.len())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseBundle {
    pub node_count: usize,
    pub graphs: Vec<SparseGraph>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeColoredMultigraph {
    pub node_count: usize,
    pub edges: Vec<(u32, u32, u32)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parts: Option<Vec<u8>>,
}

/// Inner index colors; `None` is the padding color `!`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorfulBmmInstance {
    pub a: Matrix<bool>,
    pub b: Matrix<bool>,
    pub color: Vec<Option<u32>>,
    pub palette: Vec<u32>,
}

impl ColorfulBmmInstance {
    /// Palette computed as the sorted image of the non-padding colors.
    pub fn new(a: Matrix<bool>, b: Matrix<bool>, color: Vec<Option<u32>>) -> Self {
        let mut palette: Vec<u32> = color.iter().flatten().copied().collect();
        palette.sort_unstable();
        palette.dedup();
        ColorfulBmmInstance { a, b, color, palette }
    }

    pub fn inner(&self) -> usize {
        self.color.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TriCoVariant {
    General,
    Tripartite,
    Light { p: usize },
    Star2 { t: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriCoInstance {
    pub variant: TriCoVariant,
    pub colors: Vec<u32>,
    pub edges: Vec<(u32, u32)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parts: Option<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<u32>>,
}

impl TriCoInstance {
    pub fn node_count(&self) -> usize {
        self.colors.len()
    }

    /// Sorted distinct colors of the nodes in part `part`.
    pub fn part_colors(&self, part: u8) -> Vec<u32> {
        let parts = self.parts.as_ref().expect("tripartite instance");
        let mut v: Vec<u32> =
            self.colors.iter().zip(parts).filter(|(_, &p)| p == part).map(|(&c, _)| c).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn all_colors(&self) -> Vec<u32> {
        let mut v = self.colors.clone();
        v.sort_unstable();
        v.dedup();
        v
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetDisjointnessInstance {
    pub universe: usize,
    pub family: Vec<Vec<u32>>,
    pub queries: Vec<(u32, u32)>,
}

/// A string symbol: a small integer or one of the reserved separators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Data(u32),
    Bang,
    Hash,
    Dollar,
}

impl Serialize for Symbol {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Symbol::Data(v) => s.serialize_u32(*v),
            Symbol::Bang => s.serialize_str("!"),
            Symbol::Hash => s.serialize_str("#"),
            Symbol::Dollar => s.serialize_str("$"),
        }
    }
}

impl<'de> Deserialize<'de> for Symbol {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::Number(n) => n
                .as_u64()
                .and_then(|v| u32::try_from(v).ok())
                .map(Symbol::Data)
                .ok_or_else(|| serde::de::Error::custom("symbol out of range")),
            Value::String(s) => match s.as_str() {
                "!" => Ok(Symbol::Bang),
                "#" => Ok(Symbol::Hash),
                "$" => Ok(Symbol::Dollar),
                _ => Err(serde::de::Error::custom(format!("unknown symbol {s:?}"))),
            },
            _ => Err(serde::de::Error::custom("symbol must be an integer or a separator")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StringPair {
    pub text: Vec<Symbol>,
    pub pattern: Vec<Symbol>,
}

/// Directed graph with real arc weights, for shortest paths.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedDigraph {
    pub node_count: usize,
    pub arcs: Vec<(u32, u32, Real)>,
}

impl WeightedDigraph {
    /// Adjacency matrix with zero diagonal, `+inf` off arcs, and the
    /// cheapest of parallel arcs.
    pub fn adjacency(&self, cmp: &crate::numeric::Comparisons) -> Matrix<Real> {
        let n = self.node_count;
        let mut m = Matrix::from_fn(n, n, |i, j| if i == j { Real::zero() } else { Real::infinity() });
        for (u, v, w) in &self.arcs {
            let (u, v) = (*u as usize, *v as usize);
            if cmp.compare2(w, m.get(u, v)) == std::cmp::Ordering::Less {
                m.set(u, v, w.clone());
            }
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Instance {
    ThreeSum(ThreeSumInstance),
    MinPlus(MinPlusInstance),
    ExactTri(WeightedTripartiteGraph),
    Ov(OvInstance),
    Sparse(SparseGraph),
    SparseBundle(SparseBundle),
    Mono(EdgeColoredMultigraph),
    ColorfulBmm(ColorfulBmmInstance),
    TriCo(TriCoInstance),
    SetDisjointness(SetDisjointnessInstance),
    Strings(StringPair),
    Digraph(WeightedDigraph),
}

pub const KINDS: &[&str] =
    &["3sum", "minplus", "exacttri", "ov", "sparse", "sparse-bundle", "mono", "cbmm", "trico", "setdisj", "strings", "digraph"];

impl Instance {
    pub fn kind(&self) -> &'static str {
        match self {
            Instance::ThreeSum(_) => "3sum",
            Instance::MinPlus(_) => "minplus",
            Instance::ExactTri(_) => "exacttri",
            Instance::Ov(_) => "ov",
            Instance::Sparse(_) => "sparse",
            Instance::SparseBundle(_) => "sparse-bundle",
            Instance::Mono(_) => "mono",
            Instance::ColorfulBmm(_) => "cbmm",
            Instance::TriCo(_) => "trico",
            Instance::SetDisjointness(_) => "setdisj",
            Instance::Strings(_) => "strings",
            Instance::Digraph(_) => "digraph",
        }
    }

    /// Size summary written into the document `params` field.
    pub fn params(&self) -> Value {
        use serde_json::json;
        match self {
            Instance::ThreeSum(x) => json!({"n_a": x.a.len(), "n_b": x.b.len(), "n_c": x.c.len()}),
            Instance::MinPlus(x) => json!({"n1": x.a.rows(), "d": x.a.cols(), "n2": x.b.cols()}),
            Instance::ExactTri(x) => {
                let (i, j, k) = x.sizes();
                json!({"n_i": i, "n_j": j, "n_k": k})
            }
            Instance::Ov(x) => json!({"n": x.vectors.len(), "f": x.dim}),
            Instance::Sparse(x) => json!({"nodes": x.node_count, "edges": x.edges.len(), "queries": x.query_count()}),
            Instance::SparseBundle(x) => json!({"nodes": x.node_count, "graphs": x.graphs.len()}),
            Instance::Mono(x) => json!({"nodes": x.node_count, "edges": x.edges.len()}),
            Instance::ColorfulBmm(x) => {
                json!({"n1": x.a.rows(), "inner": x.inner(), "n2": x.b.cols(), "colors": x.palette.len()})
            }
            Instance::TriCo(x) => json!({"nodes": x.node_count(), "edges": x.edges.len()}),
            Instance::SetDisjointness(x) => {
                json!({"universe": x.universe, "sets": x.family.len(), "queries": x.queries.len()})
            }
            Instance::Strings(x) => json!({"text": x.text.len(), "pattern": x.pattern.len()}),
            Instance::Digraph(x) => json!({"nodes": x.node_count, "arcs": x.arcs.len()}),
        }
    }

    fn payload(&self) -> Value {
        let v = match self {
            Instance::ThreeSum(x) => serde_json::to_value(x),
            Instance::MinPlus(x) => serde_json::to_value(x),
            Instance::ExactTri(x) => serde_json::to_value(x),
            Instance::Ov(x) => serde_json::to_value(x),
            Instance::Sparse(x) => serde_json::to_value(x),
            Instance::SparseBundle(x) => serde_json::to_value(x),
            Instance::Mono(x) => serde_json::to_value(x),
            Instance::ColorfulBmm(x) => serde_json::to_value(x),
            Instance::TriCo(x) => serde_json::to_value(x),
            Instance::SetDisjointness(x) => serde_json::to_value(x),
            Instance::Strings(x) => serde_json::to_value(x),
            Instance::Digraph(x) => serde_json::to_value(x),
        };
        v.expect("instance payloads always serialize")
    }
}

/// Provenance header of an instance document.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub construction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct Document {
    kind: String,
    params: Value,
    payload: Value,
    provenance: Provenance,
}

/// Pretty JSON document for `instance`.
pub fn serialize(instance: &Instance, provenance: &Provenance) -> String {
    let doc = Document {
        kind: instance.kind().to_string(),
        params: instance.params(),
        payload: instance.payload(),
        provenance: provenance.clone(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("document serializes");
    s.push('\n');
    s
}

pub fn deserialize(text: &str) -> Result<(Instance, Provenance), InstanceError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: Document = serde_path_to_error::deserialize(de).map_err(|e| InstanceError::ParseError {
        line: e.inner().line(),
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    let instance = payload_from(&doc.kind, doc.payload, text)?;
    Ok((instance, doc.provenance))
}

fn payload_from(kind: &str, payload: Value, text: &str) -> Result<Instance, InstanceError> {
    fn parse<T: serde::de::DeserializeOwned>(v: Value, text: &str) -> Result<T, InstanceError> {
        serde_path_to_error::deserialize(v).map_err(|e| {
            let field = format!("payload.{}", e.path());
            let line = text.lines().position(|l| l.contains("\"payload\"")).map_or(0, |p| p + 1);
            InstanceError::ParseError { line, field, message: e.inner().to_string() }
        })
    }
    Ok(match kind {
        "3sum" => Instance::ThreeSum(parse(payload, text)?),
        "minplus" => Instance::MinPlus(parse(payload, text)?),
        "exacttri" => Instance::ExactTri(parse(payload, text)?),
        "ov" => Instance::Ov(parse(payload, text)?),
        "sparse" => Instance::Sparse(parse(payload, text)?),
        "sparse-bundle" => Instance::SparseBundle(parse(payload, text)?),
        "mono" => Instance::Mono(parse(payload, text)?),
        "cbmm" => Instance::ColorfulBmm(parse(payload, text)?),
        "trico" => Instance::TriCo(parse(payload, text)?),
        "setdisj" => Instance::SetDisjointness(parse(payload, text)?),
        "strings" => Instance::Strings(parse(payload, text)?),
        "digraph" => Instance::Digraph(parse(payload, text)?),
        other => return Err(InstanceError::UnknownKind(other.to_string())),
    })
}

// ---------------------------------------------------------------- validation

pub fn validate(instance: &Instance) -> Result<(), Violation> {
    match instance {
        Instance::ThreeSum(_) => Ok(()),
        Instance::MinPlus(x) => validate_minplus(x),
        Instance::ExactTri(x) => validate_exacttri(x),
        Instance::Ov(x) => validate_ov(x),
        Instance::Sparse(x) => validate_sparse(x),
        Instance::SparseBundle(x) => {
            for (i, g) in x.graphs.iter().enumerate() {
                if g.node_count > x.node_count {
                    return violation("graph larger than bundle node count", format!("graph {i}"));
                }
                validate_sparse(g).map_err(|v| Violation { location: format!("graph {i}: {}", v.location), ..v })?;
            }
            Ok(())
        }
        Instance::Mono(x) => validate_mono(x),
        Instance::ColorfulBmm(x) => validate_cbmm(x),
        Instance::TriCo(x) => validate_trico(x),
        Instance::SetDisjointness(x) => validate_setdisj(x),
        Instance::Strings(x) => {
            if x.pattern.len() > x.text.len() {
                return violation("pattern longer than text", "pattern");
            }
            Ok(())
        }
        Instance::Digraph(x) => {
            for (e, (u, v, _)) in x.arcs.iter().enumerate() {
                if *u as usize >= x.node_count || *v as usize >= x.node_count {
                    return violation("arc endpoint out of range", format!("arc {e}"));
                }
            }
            Ok(())
        }
    }
}

pub fn validate_minplus(x: &MinPlusInstance) -> Result<(), Violation> {
    if x.a.cols() != x.b.rows() {
        return violation("inner dimensions differ", "A columns vs B rows");
    }
    Ok(())
}

pub fn validate_exacttri(x: &WeightedTripartiteGraph) -> Result<(), Violation> {
    let (i, j, k) = x.sizes();
    if x.w_ik.rows() != i || x.w_kj.rows() != k || x.w_kj.cols() != j {
        return violation("slab shapes disagree", "w_ik / w_kj");
    }
    Ok(())
}

pub fn validate_ov(x: &OvInstance) -> Result<(), Violation> {
    for (i, v) in x.vectors.iter().enumerate() {
        if v.len() != x.dim {
            return violation("vector dimension", format!("vector {i}"));
        }
    }
    Ok(())
}

pub fn validate_sparse(g: &SparseGraph) -> Result<(), Violation> {
    let mut seen = HashSet::new();
    for (e, &(u, v)) in g.edges.iter().enumerate() {
        if u as usize >= g.node_count || v as usize >= g.node_count {
            return violation("edge endpoint out of range", format!("edge {e}"));
        }
        if u == v {
            return violation("self-loop", format!("edge {e}"));
        }
        if !seen.insert((u.min(v), u.max(v))) {
            return violation("duplicate edge", format!("edge {e}"));
        }
    }
    if let Some(parts) = &g.parts {
        if parts.len() != g.node_count {
            return violation("part tag count", "parts");
        }
        for (e, &(u, v)) in g.edges.iter().enumerate() {
            if parts[u as usize] == parts[v as usize] {
                return violation("intra-part edge", format!("edge {e}"));
            }
        }
    }
    if let Some(q) = &g.queries {
        let mut qs = HashSet::new();
        for (i, &e) in q.iter().enumerate() {
            if e as usize >= g.edges.len() {
                return violation("query edge out of range", format!("query {i}"));
            }
            if !qs.insert(e) {
                return violation("duplicate query edge", format!("query {i}"));
            }
        }
    }
    Ok(())
}

pub fn validate_mono(g: &EdgeColoredMultigraph) -> Result<(), Violation> {
    let mut seen = HashSet::new();
    for (e, &(u, v, c)) in g.edges.iter().enumerate() {
        if u as usize >= g.node_count || v as usize >= g.node_count {
            return violation("edge endpoint out of range", format!("edge {e}"));
        }
        if u == v {
            return violation("self-loop", format!("edge {e}"));
        }
        if !seen.insert((u.min(v), u.max(v), c)) {
            return violation("duplicate colored edge", format!("edge {e}"));
        }
    }
    if let Some(parts) = &g.parts {
        if parts.len() != g.node_count {
            return violation("part tag count", "parts");
        }
        for (e, &(u, v, _)) in g.edges.iter().enumerate() {
            if parts[u as usize] == parts[v as usize] {
                return violation("intra-part edge", format!("edge {e}"));
            }
        }
    }
    Ok(())
}

pub fn validate_cbmm(x: &ColorfulBmmInstance) -> Result<(), Violation> {
    if x.a.cols() != x.inner() || x.b.rows() != x.inner() {
        return violation("inner dimension differs from color count", "color");
    }
    let mut image: Vec<u32> = x.color.iter().flatten().copied().collect();
    image.sort_unstable();
    image.dedup();
    if image != x.palette {
        return violation("palette differs from color image", "palette");
    }
    Ok(())
}

pub fn validate_trico(x: &TriCoInstance) -> Result<(), Violation> {
    let n = x.node_count();
    let mut seen = HashSet::new();
    for (e, &(u, v)) in x.edges.iter().enumerate() {
        if u as usize >= n || v as usize >= n {
            return violation("edge endpoint out of range", format!("edge {e}"));
        }
        if u == v {
            return violation("self-loop", format!("edge {e}"));
        }
        if !seen.insert((u.min(v), u.max(v))) {
            return violation("duplicate edge", format!("edge {e}"));
        }
    }
    if matches!(x.variant, TriCoVariant::General) {
        return Ok(());
    }
    let Some(parts) = &x.parts else {
        return violation("missing part tags", "parts");
    };
    if parts.len() != n {
        return violation("part tag count", "parts");
    }
    if let Some(v) = parts.iter().position(|&p| p > 2) {
        return violation("unknown part", format!("node {v}"));
    }
    for (e, &(u, v)) in x.edges.iter().enumerate() {
        if parts[u as usize] == parts[v as usize] {
            return violation("intra-part edge", format!("edge {e}"));
        }
    }
    let mut part_of_color: HashMap<u32, u8> = HashMap::new();
    for (v, (&c, &p)) in x.colors.iter().zip(parts).enumerate() {
        if *part_of_color.entry(c).or_insert(p) != p {
            return violation("color shared across parts", format!("node {v}"));
        }
    }
    match x.variant {
        TriCoVariant::Light { p } => {
            let mut mult: HashMap<u32, usize> = HashMap::new();
            for (v, &c) in x.colors.iter().enumerate() {
                let m = mult.entry(c).or_insert(0);
                *m += 1;
                if *m > p {
                    return violation("color multiplicity", format!("node {v}"));
                }
            }
        }
        TriCoVariant::Star2 { t } => {
            let Some(comp) = &x.components else {
                return violation("missing component tags", "components");
            };
            if comp.len() != n {
                return violation("component tag count", "components");
            }
            if let Some(v) = comp.iter().position(|&c| c as usize >= t) {
                return violation("component index out of range", format!("node {v}"));
            }
            for (e, &(u, v)) in x.edges.iter().enumerate() {
                if comp[u as usize] != comp[v as usize] {
                    return violation("cross-component edge", format!("edge {e}"));
                }
            }
            let mut seen = HashSet::new();
            for v in 0..n {
                if !seen.insert((comp[v], x.colors[v])) {
                    return violation("color repeated within component", format!("node {v}"));
                }
            }
        }
        _ => {}
    }
    Ok(())
}

pub fn validate_setdisj(x: &SetDisjointnessInstance) -> Result<(), Violation> {
    for (i, s) in x.family.iter().enumerate() {
        if let Some(e) = s.iter().find(|&&e| e as usize >= x.universe) {
            return violation("set element outside universe", format!("set {i}, element {e}"));
        }
    }
    for (q, &(a, b)) in x.queries.iter().enumerate() {
        if a as usize >= x.family.len() || b as usize >= x.family.len() {
            return violation("query indexes outside family", format!("query {q}"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- generation

/// Size and shape knobs for [`generate`]; unset fields take per-kind defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub d: Option<usize>,
    pub f: Option<usize>,
    pub p: Option<usize>,
    pub colors: Option<usize>,
    pub count: Option<usize>,
    pub range: Option<i64>,
    pub density: Option<f64>,
    pub inf_rate: Option<f64>,
    pub variant: Option<String>,
    #[serde(default)]
    pub planted: bool,
}

impl GenParams {
    /// Parses `key=value` pairs.
    pub fn from_pairs<S: AsRef<str>>(pairs: &[S]) -> Result<GenParams, InstanceError> {
        let mut g = GenParams::default();
        for pair in pairs {
            let pair = pair.as_ref();
            let (k, v) = pair.split_once('=').ok_or_else(|| InstanceError::BadParams(format!("expected key=value, got {pair:?}")))?;
            let bad = || InstanceError::BadParams(format!("bad value for {k}: {v:?}"));
            let int = || v.parse::<usize>().map_err(|_| bad());
            match k {
                "n" => g.n = Some(int()?),
                "m" => g.m = Some(int()?),
                "d" => g.d = Some(int()?),
                "f" => g.f = Some(int()?),
                "p" => g.p = Some(int()?),
                "colors" => g.colors = Some(int()?),
                "count" => g.count = Some(int()?),
                "range" => g.range = Some(v.parse().map_err(|_| bad())?),
                "density" => g.density = Some(v.parse().map_err(|_| bad())?),
                "inf_rate" => g.inf_rate = Some(v.parse().map_err(|_| bad())?),
                "variant" => g.variant = Some(v.to_string()),
                "planted" => g.planted = v.parse().map_err(|_| bad())?,
                _ => return Err(InstanceError::BadParams(format!("unknown parameter {k:?}"))),
            }
        }
        Ok(g)
    }

    fn n(&self, default: usize) -> Result<usize, InstanceError> {
        let n = self.n.unwrap_or(default);
        if n == 0 {
            return Err(InstanceError::BadParams("n must be at least 1".into()));
        }
        Ok(n)
    }

    fn density(&self, default: f64) -> Result<f64, InstanceError> {
        let p = self.density.unwrap_or(default);
        if !(0.0..=1.0).contains(&p) {
            return Err(InstanceError::BadParams("density must lie in [0,1]".into()));
        }
        Ok(p)
    }

    fn inf_rate(&self) -> Result<f64, InstanceError> {
        let p = self.inf_rate.unwrap_or(0.0);
        if !(0.0..=1.0).contains(&p) {
            return Err(InstanceError::BadParams("inf_rate must lie in [0,1]".into()));
        }
        Ok(p)
    }
}

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Integer or half-integer value in `[-range, range]`.
fn random_real(rng: &mut impl Rng, range: i64) -> Real {
    if rng.gen_bool(0.15) {
        Real::ratio(rng.gen_range(-2 * range..=2 * range), 2).expect("nonzero denominator")
    } else {
        Real::int(rng.gen_range(-range..=range))
    }
}

fn random_entry(rng: &mut impl Rng, range: i64, inf_rate: f64) -> Real {
    if inf_rate > 0.0 && rng.gen_bool(inf_rate) {
        Real::infinity()
    } else {
        random_real(rng, range)
    }
}

/// Deterministic seeded instance of `kind`.
pub fn generate(kind: &str, params: &GenParams, seed: u64) -> Result<Instance, InstanceError> {
    let mut rng = rng_for(seed);
    let rng = &mut rng;
    let inst = match kind {
        "3sum" => Instance::ThreeSum(gen_3sum(params, rng)?),
        "minplus" => Instance::MinPlus(gen_minplus(params, rng)?),
        "exacttri" => Instance::ExactTri(gen_exacttri(params, rng)?),
        "ov" => Instance::Ov(gen_ov(params, rng)?),
        "sparse" => Instance::Sparse(gen_sparse(params, rng)?),
        "sparse-bundle" => {
            let count = params.count.unwrap_or(3);
            let n = params.n(8)?;
            let graphs = (0..count).map(|_| gen_sparse(params, rng)).collect::<Result<_, _>>()?;
            Instance::SparseBundle(SparseBundle { node_count: n, graphs })
        }
        "mono" => Instance::Mono(gen_mono(params, rng)?),
        "cbmm" => Instance::ColorfulBmm(gen_cbmm(params, rng)?),
        "trico" => Instance::TriCo(gen_trico(params, rng)?),
        "setdisj" => Instance::SetDisjointness(gen_setdisj(params, rng)?),
        "strings" => Instance::Strings(gen_strings(params, rng)?),
        "digraph" => Instance::Digraph(gen_digraph(params, rng)?),
        other => return Err(InstanceError::UnknownKind(other.to_string())),
    };
    debug_assert!(validate(&inst).is_ok(), "generator produced an invalid {kind} instance");
    Ok(inst)
}

fn gen_3sum(p: &GenParams, rng: &mut impl Rng) -> Result<ThreeSumInstance, InstanceError> {
    let n = p.n(8)?;
    let m = p.m.unwrap_or(n);
    let range = p.range.unwrap_or(2 * n as i64 + 2);
    let a: Vec<Real> = (0..n).map(|_| random_real(rng, range)).collect();
    let b: Vec<Real> = (0..n).map(|_| random_real(rng, range)).collect();
    let mut c: Vec<Real> = (0..m).map(|_| random_real(rng, 2 * range)).collect();
    if p.planted && m > 0 {
        let s = a[rng.gen_range(0..n)].add(&b[rng.gen_range(0..n)]);
        let slot = rng.gen_range(0..m);
        c[slot] = s.checked_neg().expect("finite");
    }
    Ok(ThreeSumInstance { a, b, c })
}

fn gen_minplus(p: &GenParams, rng: &mut impl Rng) -> Result<MinPlusInstance, InstanceError> {
    let n = p.n(8)?;
    let d = p.d.unwrap_or(n);
    if d == 0 {
        return Err(InstanceError::BadParams("d must be at least 1".into()));
    }
    let range = p.range.unwrap_or(10);
    let inf = p.inf_rate()?;
    let a = Matrix::from_fn(n, d, |_, _| random_entry(rng, range, inf));
    let b = Matrix::from_fn(d, n, |_, _| random_entry(rng, range, inf));
    Ok(MinPlusInstance { a, b })
}

fn gen_exacttri(p: &GenParams, rng: &mut impl Rng) -> Result<WeightedTripartiteGraph, InstanceError> {
    let n = p.n(8)?;
    let nk = p.m.unwrap_or(n);
    let range = p.range.unwrap_or(6);
    let inf = p.inf_rate()?;
    let w_ij = Matrix::from_fn(n, n, |_, _| random_entry(rng, range, inf));
    let w_ik = Matrix::from_fn(n, nk, |_, _| random_entry(rng, range, inf));
    let w_kj = Matrix::from_fn(nk, n, |_, _| random_entry(rng, range, inf));
    let mut g = WeightedTripartiteGraph { w_ij, w_ik, w_kj };
    if p.planted && nk > 0 {
        let (i, j, k) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..nk));
        let wij = random_real(rng, range);
        let wik = random_real(rng, range);
        g.w_kj.set(k, j, wij.add(&wik).checked_neg().expect("finite"));
        g.w_ij.set(i, j, wij);
        g.w_ik.set(i, k, wik);
    }
    Ok(g)
}

fn gen_ov(p: &GenParams, rng: &mut impl Rng) -> Result<OvInstance, InstanceError> {
    let n = p.n(8)?;
    let f = p.f.unwrap_or(4);
    let dens = p.density(0.6)?;
    let mut vectors: Vec<Vec<bool>> = (0..n).map(|_| (0..f).map(|_| rng.gen_bool(dens)).collect()).collect();
    if p.planted {
        if n < 2 {
            return Err(InstanceError::BadParams("planted OV needs n ≥ 2".into()));
        }
        let u = rng.gen_range(0..n);
        let mut v = rng.gen_range(0..n - 1);
        if v >= u {
            v += 1;
        }
        for s in 0..f {
            if vectors[u][s] && vectors[v][s] {
                if rng.gen_bool(0.5) {
                    vectors[u][s] = false;
                } else {
                    vectors[v][s] = false;
                }
            }
        }
    }
    Ok(OvInstance { dim: f, vectors })
}

fn random_pairs(n: usize, dens: f64, rng: &mut impl Rng, parts: Option<&[u8]>) -> Vec<(u32, u32)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if parts.is_some_and(|p| p[u] == p[v]) {
                continue;
            }
            if rng.gen_bool(dens) {
                edges.push((u as u32, v as u32));
            }
        }
    }
    edges
}

fn gen_sparse(p: &GenParams, rng: &mut impl Rng) -> Result<SparseGraph, InstanceError> {
    let n = p.n(8)?;
    let dens = p.density(0.35)?;
    let tripartite = p.variant.as_deref() == Some("tripartite");
    let parts: Option<Vec<u8>> = tripartite.then(|| (0..n).map(|v| (v % 3) as u8).collect());
    let edges = random_pairs(n, dens, rng, parts.as_deref());
    let queries = match &parts {
        Some(pt) => Some(
            edges
                .iter()
                .enumerate()
                .filter(|(_, &(u, v))| {
                    let (a, b) = (pt[u as usize], pt[v as usize]);
                    a.min(b) == LEFT && a.max(b) == RIGHT
                })
                .map(|(e, _)| e as u32)
                .collect(),
        ),
        None => None,
    };
    Ok(SparseGraph { node_count: n, edges, parts, queries })
}

fn gen_mono(p: &GenParams, rng: &mut impl Rng) -> Result<EdgeColoredMultigraph, InstanceError> {
    let n = p.n(4)?;
    let colors = p.colors.unwrap_or(3).max(1) as u32;
    let dens = p.density(0.6)?;
    match p.variant.as_deref().unwrap_or("tripartite") {
        "tripartite" => {
            let node_count = 3 * n;
            let parts: Vec<u8> = (0..node_count).map(|v| (v / n) as u8).collect();
            let mut edges = Vec::new();
            for u in 0..node_count {
                for v in u + 1..node_count {
                    if parts[u] != parts[v] && rng.gen_bool(dens) {
                        edges.push((u as u32, v as u32, rng.gen_range(0..colors)));
                    }
                }
            }
            if p.planted && n > 0 {
                let (i, j, k) = (rng.gen_range(0..n), n + rng.gen_range(0..n), 2 * n + rng.gen_range(0..n));
                let c = rng.gen_range(0..colors);
                for (a, b) in [(i, j), (i, k), (j, k)] {
                    edges.retain(|&(u, v, _)| (u as usize, v as usize) != (a, b));
                    edges.push((a as u32, b as u32, c));
                }
            }
            Ok(EdgeColoredMultigraph { node_count, edges, parts: Some(parts) })
        }
        "multi" => {
            let mut edges = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    for c in 0..colors {
                        if rng.gen_bool(dens / colors as f64) {
                            edges.push((u as u32, v as u32, c));
                        }
                    }
                }
            }
            Ok(EdgeColoredMultigraph { node_count: n, edges, parts: None })
        }
        other => Err(InstanceError::BadParams(format!("unknown mono variant {other:?}"))),
    }
}

fn gen_cbmm(p: &GenParams, rng: &mut impl Rng) -> Result<ColorfulBmmInstance, InstanceError> {
    let n = p.n(4)?;
    let colors = p.colors.unwrap_or(2).max(1) as u32;
    let f = p.f.unwrap_or(2).max(1);
    let inner = p.m.unwrap_or(colors as usize * f);
    let dens = p.density(0.7)?;
    // every color gets at most f indices; the first `colors` indices cover the palette
    let mut color: Vec<Option<u32>> = (0..inner).map(|k| Some((k as u32) % colors)).collect();
    color.shuffle(rng);
    let a = Matrix::from_fn(n, inner, |_, _| rng.gen_bool(dens));
    let b = Matrix::from_fn(inner, n, |_, _| rng.gen_bool(dens));
    Ok(ColorfulBmmInstance::new(a, b, color))
}

fn gen_trico(p: &GenParams, rng: &mut impl Rng) -> Result<TriCoInstance, InstanceError> {
    let colors_per_part = p.colors.unwrap_or(2).max(1);
    let dens = p.density(0.5)?;
    match p.variant.as_deref().unwrap_or("tripartite") {
        "general" => {
            let n = p.n(6)?;
            let k = colors_per_part as u32;
            let colors: Vec<u32> = (0..n).map(|v| if (v as u32) < k { v as u32 } else { rng.gen_range(0..k) }).collect();
            let edges = random_pairs(n, dens, rng, None);
            Ok(TriCoInstance { variant: TriCoVariant::General, colors, edges, parts: None, components: None })
        }
        "tripartite" | "light" => {
            let light = p.variant.as_deref() == Some("light");
            let mult = p.p.unwrap_or(2).max(1);
            let mut colors = Vec::new();
            let mut parts = Vec::new();
            for part in 0..3u8 {
                for c in 0..colors_per_part {
                    let count = if light { rng.gen_range(1..=mult) } else { rng.gen_range(1..=mult + 1) };
                    for _ in 0..count {
                        colors.push((part as usize * colors_per_part + c) as u32);
                        parts.push(part);
                    }
                }
            }
            let edges = random_pairs(colors.len(), dens, rng, Some(&parts));
            let variant = if light { TriCoVariant::Light { p: mult } } else { TriCoVariant::Tripartite };
            Ok(TriCoInstance { variant, colors, edges, parts: Some(parts), components: None })
        }
        "star2" => {
            let t = p.p.unwrap_or(2).max(1);
            let mut colors = Vec::new();
            let mut parts = Vec::new();
            let mut comps = Vec::new();
            for comp in 0..t {
                for part in 0..3u8 {
                    for c in 0..colors_per_part {
                        if rng.gen_bool(0.8) {
                            colors.push((part as usize * colors_per_part + c) as u32);
                            parts.push(part);
                            comps.push(comp as u32);
                        }
                    }
                }
            }
            let mut edges = Vec::new();
            for u in 0..colors.len() {
                for v in u + 1..colors.len() {
                    if parts[u] != parts[v] && comps[u] == comps[v] && rng.gen_bool(dens) {
                        edges.push((u as u32, v as u32));
                    }
                }
            }
            Ok(TriCoInstance { variant: TriCoVariant::Star2 { t }, colors, edges, parts: Some(parts), components: Some(comps) })
        }
        other => Err(InstanceError::BadParams(format!("unknown trico variant {other:?}"))),
    }
}

fn gen_setdisj(p: &GenParams, rng: &mut impl Rng) -> Result<SetDisjointnessInstance, InstanceError> {
    let n = p.n(6)?;
    let universe = p.m.unwrap_or(8);
    let dens = p.density(0.3)?;
    let family: Vec<Vec<u32>> =
        (0..n).map(|_| (0..universe as u32).filter(|_| rng.gen_bool(dens)).collect()).collect();
    let queries = (0..n * 2).map(|_| (rng.gen_range(0..n) as u32, rng.gen_range(0..n) as u32)).collect();
    Ok(SetDisjointnessInstance { universe, family, queries })
}

fn gen_strings(p: &GenParams, rng: &mut impl Rng) -> Result<StringPair, InstanceError> {
    let n = p.n(12)?;
    let m = p.m.unwrap_or(n / 2).min(n);
    let sigma = p.colors.unwrap_or(3).max(1) as u32;
    let sym = |rng: &mut _| Symbol::Data(Rng::gen_range(rng, 0..sigma));
    let text = (0..n).map(|_| sym(rng)).collect();
    let pattern = (0..m).map(|_| sym(rng)).collect();
    Ok(StringPair { text, pattern })
}

fn gen_digraph(p: &GenParams, rng: &mut impl Rng) -> Result<WeightedDigraph, InstanceError> {
    let n = p.n(8)?;
    let dens = p.density(0.35)?;
    let range = p.range.unwrap_or(20);
    // arc weights are shifted by node potentials, so negative arcs occur
    // but every cycle keeps a nonnegative total
    let potential: Vec<i64> = (0..n).map(|_| rng.gen_range(0..=range / 2)).collect();
    let mut arcs = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.gen_bool(dens) {
                let w = rng.gen_range(0..=range / 2) + potential[u] - potential[v];
                arcs.push((u as u32, v as u32, Real::int(w)));
            }
        }
    }
    Ok(WeightedDigraph { node_count: n, arcs })
}
