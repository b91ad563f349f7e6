//! Exact reals that can only be inspected through additive comparisons,
//! plus the rank-list and dyadic-interval machinery built on top of them.
//!
//! A [`RestrictedReal`] exposes no ordering of its own. Every ordering
//! question goes through a [`Comparisons`] counter, which answers the sign
//! of `a + b - a' - b'` or `a + b - c` and counts the calls.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumericError {
    #[error("ranks are equal")]
    EqualRanks,
    #[error("left rank exceeds right rank; no interval separates them in this orientation")]
    NotSeparable,
    #[error("rank {rank} outside universe 2^{universe_log}")]
    OutOfRange { rank: u64, universe_log: u32 },
    #[error("value was never inserted into the rank list")]
    NotAMember,
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("cannot parse real {0:?}")]
    Parse(String),
    #[error("difference of an infinite value")]
    InfiniteDifference,
}

#[derive(Clone)]
enum Repr {
    Int(i64),
    Rat(BigRational),
    Inf,
}

/// An exact rational or `+inf`.
///
/// Values can be added and negated freely; ordering is only available from
/// [`Comparisons`]. A value may be put in tattling mode, in which case any
/// direct read (display, serialization, equality, [`RestrictedReal::to_rational`])
/// panics. Sums inherit the flag.
#[derive(Clone)]
pub struct RestrictedReal {
    repr: Repr,
    tattle: bool,
}

impl RestrictedReal {
    pub fn int(v: i64) -> Self {
        RestrictedReal { repr: Repr::Int(v), tattle: false }
    }

    pub fn zero() -> Self {
        Self::int(0)
    }

    pub fn infinity() -> Self {
        RestrictedReal { repr: Repr::Inf, tattle: false }
    }

    pub fn ratio(p: i64, q: i64) -> Result<Self, NumericError> {
        if q == 0 {
            return Err(NumericError::ZeroDenominator);
        }
        Ok(Self::from_rational(BigRational::new(BigInt::from(p), BigInt::from(q))))
    }

    pub fn from_rational(r: BigRational) -> Self {
        let repr = if r.is_integer() {
            match r.to_integer().to_i64() {
                Some(v) => Repr::Int(v),
                None => Repr::Rat(r),
            }
        } else {
            Repr::Rat(r)
        };
        RestrictedReal { repr, tattle: false }
    }

    /// Whether this is the `+inf` flag. Reading the flag is a structural
    /// fact about absent edges, not a comparison of magnitudes.
    pub fn is_infinite(&self) -> bool {
        matches!(self.repr, Repr::Inf)
    }

    pub fn add(&self, other: &RestrictedReal) -> RestrictedReal {
        let tattle = self.tattle || other.tattle;
        let repr = match (&self.repr, &other.repr) {
            (Repr::Inf, _) | (_, Repr::Inf) => Repr::Inf,
            (Repr::Int(a), Repr::Int(b)) => match a.checked_add(*b) {
                Some(s) => Repr::Int(s),
                None => Repr::Rat(BigRational::from_integer(BigInt::from(*a) + BigInt::from(*b))),
            },
            (a, b) => {
                return RestrictedReal { tattle, ..Self::from_rational(rat(a) + rat(b)) };
            }
        };
        RestrictedReal { repr, tattle }
    }

    /// Negation; `None` for `+inf`, which has no finite-side mirror.
    pub fn checked_neg(&self) -> Option<RestrictedReal> {
        let repr = match &self.repr {
            Repr::Inf => return None,
            Repr::Int(v) => match v.checked_neg() {
                Some(n) => Repr::Int(n),
                None => Repr::Rat(BigRational::from_integer(-BigInt::from(*v))),
            },
            Repr::Rat(r) => Repr::Rat(-r.clone()),
        };
        Some(RestrictedReal { repr, tattle: self.tattle })
    }

    /// Integer multiple `m * self`, computed by exact arithmetic.
    pub fn scale(&self, m: i64) -> RestrictedReal {
        let repr = match &self.repr {
            Repr::Inf => {
                assert!(m > 0, "non-positive multiple of +inf");
                Repr::Inf
            }
            Repr::Int(v) => match v.checked_mul(m) {
                Some(p) => Repr::Int(p),
                None => Repr::Rat(BigRational::from_integer(BigInt::from(*v) * BigInt::from(m))),
            },
            Repr::Rat(r) => Repr::Rat(r * BigRational::from_integer(BigInt::from(m))),
        };
        RestrictedReal { repr, tattle: self.tattle }
    }

    /// A copy that panics on any read outside the comparison interface.
    pub fn tattling(&self) -> RestrictedReal {
        RestrictedReal { repr: self.repr.clone(), tattle: true }
    }

    pub fn is_tattling(&self) -> bool {
        self.tattle
    }

    fn guard(&self) {
        assert!(!self.tattle, "restricted real read outside the comparison interface");
    }

    /// The exact value, `None` for `+inf`.
    pub fn to_rational(&self) -> Option<BigRational> {
        self.guard();
        match &self.repr {
            Repr::Inf => None,
            r => Some(rat(r)),
        }
    }
}

fn rat(r: &Repr) -> BigRational {
    match r {
        Repr::Int(v) => BigRational::from_integer(BigInt::from(*v)),
        Repr::Rat(q) => q.clone(),
        Repr::Inf => unreachable!("infinite value has no rational"),
    }
}

/// Sign of `(a + b) - (c + d)` with `+inf` absorbing.
fn raw_compare4(a: &Repr, b: &Repr, c: &Repr, d: &Repr) -> Ordering {
    let lhs_inf = matches!(a, Repr::Inf) || matches!(b, Repr::Inf);
    let rhs_inf = matches!(c, Repr::Inf) || matches!(d, Repr::Inf);
    match (lhs_inf, rhs_inf) {
        (true, true) => return Ordering::Equal,
        (true, false) => return Ordering::Greater,
        (false, true) => return Ordering::Less,
        _ => {}
    }
    if let (Repr::Int(a), Repr::Int(b), Repr::Int(c), Repr::Int(d)) = (a, b, c, d) {
        return (*a as i128 + *b as i128).cmp(&(*c as i128 + *d as i128));
    }
    (rat(a) + rat(b)).cmp(&(rat(c) + rat(d)))
}

impl PartialEq for RestrictedReal {
    fn eq(&self, other: &Self) -> bool {
        self.guard();
        other.guard();
        raw_compare4(&self.repr, &Repr::Int(0), &other.repr, &Repr::Int(0)) == Ordering::Equal
    }
}

impl Eq for RestrictedReal {}

impl fmt::Display for RestrictedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.guard();
        match &self.repr {
            Repr::Inf => write!(f, "inf"),
            Repr::Int(v) => write!(f, "{v}"),
            Repr::Rat(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Repr::Rat(r) => write!(f, "{}/{}", r.numer(), r.denom()),
        }
    }
}

impl fmt::Debug for RestrictedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.tattle {
            write!(f, "RestrictedReal(<sealed>)")
        } else {
            write!(f, "RestrictedReal({self})")
        }
    }
}

impl FromStr for RestrictedReal {
    type Err = NumericError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "inf" {
            return Ok(Self::infinity());
        }
        let bad = || NumericError::Parse(s.to_string());
        match s.split_once('/') {
            None => Ok(Self::from_rational(BigRational::from_integer(
                s.parse::<BigInt>().map_err(|_| bad())?,
            ))),
            Some((p, q)) => {
                let p = p.parse::<BigInt>().map_err(|_| bad())?;
                let q = q.parse::<BigInt>().map_err(|_| bad())?;
                if q.is_zero() {
                    return Err(NumericError::ZeroDenominator);
                }
                Ok(Self::from_rational(BigRational::new(p, q)))
            }
        }
    }
}

impl Serialize for RestrictedReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for RestrictedReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl From<i64> for RestrictedReal {
    fn from(v: i64) -> Self {
        Self::int(v)
    }
}

/// A real plus an integer multiple of an infinitesimal `δ > 0`.
/// Ordering is lexicographic: base first, then the `δ` coefficient.
#[derive(Clone, Debug)]
pub struct PerturbedReal {
    pub base: RestrictedReal,
    pub eps_coeff: i64,
}

impl PerturbedReal {
    pub fn new(base: RestrictedReal, eps_coeff: i64) -> Self {
        PerturbedReal { base, eps_coeff }
    }

    pub fn add(&self, other: &PerturbedReal) -> PerturbedReal {
        PerturbedReal { base: self.base.add(&other.base), eps_coeff: self.eps_coeff + other.eps_coeff }
    }
}

/// Counter and sole gateway for ordering questions about restricted reals.
///
/// One instance is threaded through a pipeline run; it is safe to share
/// between threads.
#[derive(Debug, Default)]
pub struct Comparisons {
    count: AtomicU64,
}

impl Comparisons {
    pub fn new() -> Self {
        Self::default()
    }

    fn bump(&self) {
        self.count.fetch_add(1, AtomicOrdering::Relaxed);
    }

    /// Ordering of `a + b` against `a2 + b2`.
    pub fn compare4(
        &self,
        a: &RestrictedReal,
        b: &RestrictedReal,
        a2: &RestrictedReal,
        b2: &RestrictedReal,
    ) -> Ordering {
        self.bump();
        raw_compare4(&a.repr, &b.repr, &a2.repr, &b2.repr)
    }

    /// Ordering of `a + b` against `c`.
    pub fn compare3(&self, a: &RestrictedReal, b: &RestrictedReal, c: &RestrictedReal) -> Ordering {
        self.bump();
        raw_compare4(&a.repr, &b.repr, &c.repr, &Repr::Int(0))
    }

    /// Ordering of `a` against `b` (the `a + 0` vs `b + 0` case).
    pub fn compare2(&self, a: &RestrictedReal, b: &RestrictedReal) -> Ordering {
        self.bump();
        raw_compare4(&a.repr, &Repr::Int(0), &b.repr, &Repr::Int(0))
    }

    /// Ordering of `a + b` against `a2 + b2` for perturbed values.
    pub fn compare4_perturbed(
        &self,
        a: &PerturbedReal,
        b: &PerturbedReal,
        a2: &PerturbedReal,
        b2: &PerturbedReal,
    ) -> Ordering {
        self.compare4(&a.base, &b.base, &a2.base, &b2.base)
            .then((a.eps_coeff + b.eps_coeff).cmp(&(a2.eps_coeff + b2.eps_coeff)))
    }

    /// Ordering of the differences `x.plus - x.minus` and `y.plus - y.minus`.
    pub fn compare_diff(&self, x: &Difference<'_>, y: &Difference<'_>) -> Ordering {
        self.compare4(x.plus, y.minus, y.plus, x.minus).then(x.eps.cmp(&y.eps))
    }

    pub fn count(&self) -> u64 {
        self.count.load(AtomicOrdering::Relaxed)
    }

    pub fn reset(&self) {
        self.count.store(0, AtomicOrdering::Relaxed);
    }
}

/// `plus - minus + eps·δ`, compared without ever being subtracted.
#[derive(Clone, Copy, Debug)]
pub struct Difference<'a> {
    pub plus: &'a RestrictedReal,
    pub minus: &'a RestrictedReal,
    pub eps: i64,
}

impl<'a> Difference<'a> {
    pub fn new(plus: &'a RestrictedReal, minus: &'a RestrictedReal) -> Self {
        Difference { plus, minus, eps: 0 }
    }

    pub fn with_eps(plus: &'a RestrictedReal, minus: &'a RestrictedReal, eps: i64) -> Self {
        Difference { plus, minus, eps }
    }

    fn is_finite(&self) -> bool {
        !self.plus.is_infinite() && !self.minus.is_infinite()
    }
}

/// Deduplicated sorted list of differences.
#[derive(Clone, Debug)]
pub struct RankList {
    sorted: Vec<(RestrictedReal, RestrictedReal, i64)>,
    size: usize,
}

impl RankList {
    /// Sorts `items` with counted comparisons. Returns the list and the rank
    /// of every item in input order.
    pub fn build(items: &[Difference<'_>], cmp: &Comparisons) -> Result<(RankList, Vec<usize>), NumericError> {
        if items.iter().any(|x| !x.is_finite()) {
            return Err(NumericError::InfiniteDifference);
        }
        let (ranks, reps) = sort_ranks(items, cmp);
        let sorted = reps
            .into_iter()
            .map(|i| (items[i].plus.clone(), items[i].minus.clone(), items[i].eps))
            .collect();
        Ok((RankList { sorted, size: items.len() }, ranks))
    }

    /// Number of distinct values.
    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Number of items before deduplication.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Rank of `x` by binary search.
    pub fn rank_of(&self, x: &Difference<'_>, cmp: &Comparisons) -> Result<usize, NumericError> {
        if !x.is_finite() {
            return Err(NumericError::NotAMember);
        }
        let (mut lo, mut hi) = (0, self.sorted.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            let (p, m, e) = &self.sorted[mid];
            match cmp.compare_diff(&Difference::with_eps(p, m, *e), x) {
                Ordering::Less => lo = mid + 1,
                Ordering::Greater => hi = mid,
                Ordering::Equal => return Ok(mid),
            }
        }
        Err(NumericError::NotAMember)
    }

    pub fn universe_log(&self) -> u32 {
        universe_log_for(self.len())
    }
}

/// Sorts finite differences; returns per-item dense ranks and one
/// representative item index per rank.
fn sort_ranks(items: &[Difference<'_>], cmp: &Comparisons) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&x, &y| cmp.compare_diff(&items[x], &items[y]));
    let mut ranks = vec![0; items.len()];
    let mut reps = Vec::new();
    for (pos, &idx) in order.iter().enumerate() {
        if pos == 0 || cmp.compare_diff(&items[order[pos - 1]], &items[idx]) != Ordering::Equal {
            reps.push(idx);
        }
        ranks[idx] = reps.len() - 1;
    }
    (ranks, reps)
}

/// Smallest `L` with `2^L ≥ count`.
pub fn universe_log_for(count: usize) -> u32 {
    if count <= 1 {
        0
    } else {
        usize::BITS - (count - 1).leading_zeros()
    }
}

/// The interval `[2^level·index, 2^level·(index+1))` inside `[0, 2^universe_log)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub level: u32,
    pub index: u64,
    pub universe_log: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl DyadicInterval {
    pub fn start(&self) -> u64 {
        self.index << self.level
    }

    pub fn end(&self) -> u64 {
        (self.index + 1) << self.level
    }

    /// Half-open range of the chosen half; empty at level 0.
    pub fn half(&self, side: Side) -> (u64, u64) {
        if self.level == 0 {
            return (self.start(), self.start());
        }
        let mid = self.start() + (1u64 << (self.level - 1));
        match side {
            Side::Left => (self.start(), mid),
            Side::Right => (mid, self.end()),
        }
    }

    pub fn half_contains(&self, side: Side, r: u64) -> bool {
        let (lo, hi) = self.half(side);
        lo <= r && r < hi
    }
}

/// The unique interval with `a` in its left half and `b` in its right half.
pub fn separating_interval(a: u64, b: u64, universe_log: u32) -> Result<DyadicInterval, NumericError> {
    for r in [a, b] {
        if universe_log < 64 && r >> universe_log != 0 {
            return Err(NumericError::OutOfRange { rank: r, universe_log });
        }
    }
    match a.cmp(&b) {
        Ordering::Equal => Err(NumericError::EqualRanks),
        Ordering::Greater => Err(NumericError::NotSeparable),
        Ordering::Less => {
            let level = 64 - (a ^ b).leading_zeros();
            Ok(DyadicInterval { level, index: a >> level, universe_log })
        }
    }
}

/// All intervals of level `1..=universe_log` whose `side` half contains `r`.
/// Returned from the finest level to the coarsest.
pub fn covering_halves(r: u64, universe_log: u32, side: Side) -> Vec<DyadicInterval> {
    assert!(universe_log >= 64 || r >> universe_log == 0, "rank outside universe");
    let want = matches!(side, Side::Right) as u64;
    (1..=universe_log)
        .filter(|&s| (r >> (s - 1)) & 1 == want)
        .map(|s| DyadicInterval { level: s, index: r >> s, universe_log })
        .collect()
}

/// Ranks of the differences used by Fredman's trick for a pair of
/// matrices `A` (`n1 × d`) and `B` (`d × n2`).
///
/// For a reference column `r` and a candidate column `c`, the A-side value
/// for row `i` is `A[i,c] - A[i,r]` and the B-side value for column `j` is
/// `B[r,j] - B[c,j]`. Then `a_rank < b_rank` exactly when
/// `A[i,c] + B[c,j] < A[i,r] + B[r,j]`. Entries may be `+inf`; those
/// differences get sentinel ranks at either end so the equivalence still
/// holds. Column `k` of `A` may be perturbed by `eps[k]·δ`.
///
/// Only the groups with `r < c` are sorted; the group `(c, r)` holds the
/// negated values and reuses the order reversed.
#[derive(Clone, Debug)]
pub struct PairRanks {
    d: usize,
    n1: usize,
    n2: usize,
    a_rank: Vec<u32>,
    b_rank: Vec<u32>,
    logs: Vec<u32>,
}

const NO_RANK: u32 = u32::MAX;

impl PairRanks {
    pub fn build(a: &Matrix<RestrictedReal>, b: &Matrix<RestrictedReal>, cmp: &Comparisons) -> PairRanks {
        Self::build_perturbed(a, b, &vec![0; a.cols()], cmp)
    }

    pub fn build_perturbed(
        a: &Matrix<RestrictedReal>,
        b: &Matrix<RestrictedReal>,
        eps: &[i64],
        cmp: &Comparisons,
    ) -> PairRanks {
        let (n1, d, n2) = (a.rows(), a.cols(), b.cols());
        assert_eq!(b.rows(), d, "inner dimensions differ");
        assert_eq!(eps.len(), d);
        let mut out = PairRanks {
            d,
            n1,
            n2,
            a_rank: vec![NO_RANK; d * d * n1],
            b_rank: vec![NO_RANK; d * d * n2],
            logs: vec![0; d * d],
        };
        for r in 0..d {
            for c in r + 1..d {
                out.fill_pair(a, b, eps, r, c, cmp);
            }
        }
        out
    }

    fn fill_pair(
        &mut self,
        a: &Matrix<RestrictedReal>,
        b: &Matrix<RestrictedReal>,
        eps: &[i64],
        r: usize,
        c: usize,
        cmp: &Comparisons,
    ) {
        let (n1, n2) = (self.n1, self.n2);
        let mut items = Vec::with_capacity(n1 + n2);
        let mut slot = Vec::with_capacity(n1 + n2);
        for i in 0..n1 {
            let (p, m) = (a.get(i, c), a.get(i, r));
            if !p.is_infinite() && !m.is_infinite() {
                items.push(Difference::with_eps(p, m, eps[c] - eps[r]));
                slot.push(i);
            }
        }
        for j in 0..n2 {
            let (p, m) = (b.get(r, j), b.get(c, j));
            if !p.is_infinite() && !m.is_infinite() {
                items.push(Difference::new(p, m));
                slot.push(n1 + j);
            }
        }
        let (ranks, reps) = sort_ranks(&items, cmp);
        let f = reps.len() as u32;
        let any_inf = items.len() < n1 + n2;
        // finite ranks sit above two low sentinels when infinities exist
        let off = if any_inf { 2 } else { 0 };
        let universe = if any_inf { f + 4 } else { f };
        let fwd = r * self.d + c;
        let rev = c * self.d + r;
        self.logs[fwd] = universe_log_for(universe as usize);
        self.logs[rev] = self.logs[fwd];
        for (x, &s) in slot.iter().enumerate() {
            let rk = ranks[x] as u32;
            if s < n1 {
                self.a_rank[fwd * n1 + s] = off + rk;
                self.a_rank[rev * n1 + s] = off + (f - 1 - rk);
            } else {
                self.b_rank[fwd * n2 + s - n1] = off + rk;
                self.b_rank[rev * n2 + s - n1] = off + (f - 1 - rk);
            }
        }
        if !any_inf {
            return;
        }
        let (min, low, high, max) = (0, 1, f + 2, f + 3);
        for (grp, rf, cd) in [(fwd, r, c), (rev, c, r)] {
            for i in 0..n1 {
                let (p, m) = (a.get(i, cd), a.get(i, rf));
                if p.is_infinite() {
                    self.a_rank[grp * n1 + i] = max;
                } else if m.is_infinite() {
                    self.a_rank[grp * n1 + i] = low;
                }
            }
            for j in 0..n2 {
                let (p, m) = (b.get(rf, j), b.get(cd, j));
                if m.is_infinite() {
                    self.b_rank[grp * n2 + j] = min;
                } else if p.is_infinite() {
                    self.b_rank[grp * n2 + j] = high;
                }
            }
        }
    }

    pub fn inner(&self) -> usize {
        self.d
    }

    /// Rank of `A[i,candidate] - A[i,reference]`.
    pub fn a_rank(&self, reference: usize, candidate: usize, i: usize) -> u64 {
        debug_assert_ne!(reference, candidate);
        self.a_rank[(reference * self.d + candidate) * self.n1 + i] as u64
    }

    /// Rank of `B[reference,j] - B[candidate,j]`.
    pub fn b_rank(&self, reference: usize, candidate: usize, j: usize) -> u64 {
        debug_assert_ne!(reference, candidate);
        self.b_rank[(reference * self.d + candidate) * self.n2 + j] as u64
    }

    pub fn universe_log(&self, reference: usize, candidate: usize) -> u32 {
        self.logs[reference * self.d + candidate]
    }

    /// Largest universe exponent over all groups.
    pub fn max_universe_log(&self) -> u32 {
        self.logs.iter().copied().max().unwrap_or(0)
    }
}
