//! Size and comparison accounting for reduction runs, plus the error type
//! shared by every reduction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instances::{SparseGraph, Violation};
use crate::numeric::NumericError;
use crate::oracles::{sparse_degeneracy, OracleError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReductionError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("oracle protocol violation: {0}")]
    OracleProtocol(String),
    #[error("retry budget exhausted after {attempts} attempts")]
    RetryBudgetExhausted { attempts: usize },
    #[error("negative cycle detected")]
    NegativeCycleDetected,
    #[error("quadruple budget exceeded: {total} > {budget}")]
    QuadBudgetExceeded { total: usize, budget: usize },
    #[error("bad bucket count {0}")]
    BadBucketCount(usize),
    #[error("instance has {nodes} nodes, more than {limit}")]
    TooManyNodes { nodes: usize, limit: usize },
    #[error("instance is not tripartite: {0}")]
    NotTripartite(String),
    #[error("{colors} colors exceed the {capacity} available")]
    TooManyColors { colors: usize, capacity: usize },
    #[error("bad block size {0}")]
    BadBlock(usize),
    #[error("color {color} has {count} indices, more than {limit}")]
    TooManyPerColor { color: u32, count: usize, limit: usize },
    #[error("instance is not light: {0}")]
    NotLight(String),
    #[error("entry is infinite where a finite value is required: {0}")]
    InfiniteEntry(String),
    #[error("numeric: {0}")]
    Numeric(#[from] NumericError),
    #[error("invalid instance: {0}")]
    Invalid(#[from] Violation),
}

impl From<OracleError> for ReductionError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::NegativeCycleDetected => ReductionError::NegativeCycleDetected,
            OracleError::NotTripartite => ReductionError::NotTripartite("oracle".into()),
        }
    }
}

/// A measured quantity against the exact bound of its construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub measured: u64,
    pub bound: u64,
    pub formula: String,
}

impl BoundCheck {
    pub fn ratio(&self) -> f64 {
        if self.bound == 0 {
            if self.measured == 0 { 0.0 } else { f64::INFINITY }
        } else {
            self.measured as f64 / self.bound as f64
        }
    }

    pub fn holds(&self) -> bool {
        self.measured <= self.bound
    }
}

/// One ledger record: totals for a run plus its bound checks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub pipeline: String,
    pub seed: u64,
    pub instances: u64,
    pub edges: u64,
    pub nodes: u64,
    pub degeneracy: u64,
    pub comparisons: u64,
    pub rounds: u64,
    pub checks: Vec<BoundCheck>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl LedgerRow {
    pub fn new(pipeline: &str, seed: u64) -> Self {
        LedgerRow { pipeline: pipeline.to_string(), seed, ..Default::default() }
    }

    /// Counts a produced graph. Degeneracy is measured, not estimated.
    pub fn record_graph(&mut self, g: &SparseGraph) {
        self.instances += 1;
        self.edges += g.edges.len() as u64;
        self.nodes += g.node_count as u64;
        self.degeneracy = self.degeneracy.max(sparse_degeneracy(g) as u64);
    }

    pub fn record_sizes(&mut self, instances: u64, nodes: u64, edges: u64) {
        self.instances += instances;
        self.nodes += nodes;
        self.edges += edges;
    }

    /// Adds a bound check, folding repeated names into the worst ratio.
    pub fn check(&mut self, name: &str, measured: u64, bound: u64, formula: &str) {
        let new = BoundCheck { name: name.to_string(), measured, bound, formula: formula.to_string() };
        match self.checks.iter_mut().find(|c| c.name == name) {
            Some(old) => {
                if new.ratio() > old.ratio() {
                    *old = new;
                }
            }
            None => self.checks.push(new),
        }
    }

    pub fn note(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.extra.insert(key.to_string(), value.into());
    }

    pub fn violations(&self) -> Vec<&BoundCheck> {
        self.checks.iter().filter(|c| !c.holds()).collect()
    }

    /// Folds another row (of a sub-run) into this one.
    pub fn absorb(&mut self, other: LedgerRow) {
        self.instances += other.instances;
        self.edges += other.edges;
        self.nodes += other.nodes;
        self.degeneracy = self.degeneracy.max(other.degeneracy);
        self.comparisons += other.comparisons;
        self.rounds += other.rounds;
        for c in other.checks {
            self.check(&c.name, c.measured, c.bound, &c.formula);
        }
        for (k, v) in other.extra {
            self.extra.entry(k).or_insert(v);
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("ledger rows serialize")
    }
}

/// Rows of a line-delimited ledger file; blank lines are skipped.
pub fn parse_ledger(text: &str) -> Result<Vec<LedgerRow>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

pub(crate) fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b.max(1))
}

/// `floor(c·log2(n+2))`.
pub(crate) fn log2_budget(c: f64, n: usize) -> usize {
    (c * ((n + 2) as f64).log2()).floor() as usize
}

/// Produced target instances, each carrying its own decode data, plus the
/// accounting for the run that built them.
#[derive(Clone, Debug)]
pub struct ReductionOutput<T> {
    pub targets: Vec<T>,
    pub ledger: LedgerRow,
}
