#![allow(dead_code)]

use std::cmp::Ordering;

use finegrain::instances::*;
use finegrain::matrix::Matrix;
use finegrain::numeric::Comparisons;
use rand::Rng;

pub fn params(pairs: &[&str]) -> GenParams {
    GenParams::from_pairs(pairs).unwrap()
}

pub fn ints(v: &[i64]) -> Vec<Real> {
    v.iter().map(|&x| Real::int(x)).collect()
}

pub fn imat(rows: &[&[i64]]) -> Matrix<Real> {
    Matrix::from_rows(rows.iter().map(|r| ints(r)).collect()).unwrap()
}

pub fn random_matrix(rows: usize, cols: usize, range: i64, inf_rate: f64, seed: u64) -> Matrix<Real> {
    let mut rng = rng_for(seed);
    Matrix::from_fn(rows, cols, |_, _| {
        if inf_rate > 0.0 && rng.gen_bool(inf_rate) {
            Real::infinity()
        } else if rng.gen_bool(0.2) {
            Real::ratio(rng.gen_range(-2 * range..=2 * range), 2).unwrap()
        } else {
            Real::int(rng.gen_range(-range..=range))
        }
    })
}

pub fn tattle(m: &Matrix<Real>) -> Matrix<Real> {
    m.map(|x| x.tattling())
}

pub fn same(cmp: &Comparisons, x: &Real, y: &Real) -> bool {
    cmp.compare2(x, y) == Ordering::Equal
}

/// `min_k A[i,k] + B[k,j]` by a plain triple loop.
pub fn brute_min_plus(a: &Matrix<Real>, b: &Matrix<Real>, cmp: &Comparisons) -> Matrix<Real> {
    Matrix::from_fn(a.rows(), b.cols(), |i, j| {
        let mut best = a.get(i, 0).add(b.get(0, j));
        for k in 1..a.cols() {
            let s = a.get(i, k).add(b.get(k, j));
            if cmp.compare2(&s, &best) == Ordering::Less {
                best = s;
            }
        }
        best
    })
}

pub fn matrices_equal(x: &Matrix<Real>, y: &Matrix<Real>, cmp: &Comparisons) -> bool {
    x.rows() == y.rows() && x.cols() == y.cols() && x.data().iter().zip(y.data()).all(|(a, b)| same(cmp, a, b))
}

pub fn tripartite_random(n: usize, dens: f64, seed: u64) -> SparseGraph {
    let mut rng = rng_for(seed);
    let parts: Vec<u8> = (0..n).map(|v| (v % 3) as u8).collect();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if parts[u] != parts[v] && rng.gen_bool(dens) {
                edges.push((u as u32, v as u32));
            }
        }
    }
    let queries = edges
        .iter()
        .enumerate()
        .filter(|(_, &(u, v))| {
            let (a, b) = (parts[u as usize], parts[v as usize]);
            a != MIDDLE && b != MIDDLE
        })
        .map(|(e, _)| e as u32)
        .collect();
    SparseGraph { node_count: n, edges, parts: Some(parts), queries: Some(queries) }
}
