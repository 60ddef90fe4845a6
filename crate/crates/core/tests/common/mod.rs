//! Reference fixtures and brute-force oracles shared by integration tests.

#![allow(dead_code)]

use scma_core::codebook::{Codebook, CodebookSet, Provenance};
use scma_core::Complex;

/// Published 4×6 signature labels (`q_i` written as `i`).
pub fn reference_4x6() -> Vec<Vec<u8>> {
    vec![
        vec![1, 0, 2, 0, 0, 3],
        vec![0, 1, 2, 0, 3, 0],
        vec![1, 0, 0, 2, 3, 0],
        vec![0, 1, 0, 2, 0, 3],
    ]
}

/// Published 5×10 signature labels.
pub fn reference_5x10() -> Vec<Vec<u8>> {
    vec![
        vec![1, 0, 0, 2, 0, 0, 3, 0, 0, 4],
        vec![1, 0, 2, 0, 0, 3, 0, 4, 0, 0],
        vec![0, 1, 0, 2, 0, 3, 0, 0, 4, 0],
        vec![0, 1, 0, 0, 2, 0, 0, 3, 0, 4],
        vec![0, 0, 1, 0, 2, 0, 3, 0, 4, 0],
    ]
}

fn columns(labels: &[Vec<u8>]) -> Vec<Vec<u8>> {
    let j = labels.first().map_or(0, Vec::len);
    let mut cols: Vec<Vec<u8>> = (0..j)
        .map(|c| labels.iter().map(|r| r[c]).collect())
        .collect();
    cols.sort();
    cols
}

/// Equal as multisets of labelled columns.
pub fn equal_up_to_column_permutation(a: &[Vec<u8>], b: &[Vec<u8>]) -> bool {
    a.len() == b.len() && columns(a) == columns(b)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Equal after some row permutation, operator relabelling and column
/// permutation.
pub fn equivalent_signatures(a: &[Vec<u8>], b: &[Vec<u8>]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let df = a
        .iter()
        .flatten()
        .chain(b.iter().flatten())
        .copied()
        .max()
        .unwrap_or(0) as usize;
    let target = columns(b);
    for rows in permutations(a.len()) {
        for relabel in permutations(df) {
            let mapped: Vec<Vec<u8>> = rows
                .iter()
                .map(|&r| {
                    a[r].iter()
                        .map(|&x| {
                            if x == 0 {
                                0
                            } else {
                                relabel[x as usize - 1] as u8 + 1
                            }
                        })
                        .collect()
                })
                .collect();
            if columns(&mapped) == target {
                return true;
            }
        }
    }
    false
}

/// Three single-node binary layers over two nodes (`K=2, J=3, N=1, M=2`).
pub fn tiny_set() -> CodebookSet {
    let cb = |node: usize, x: Complex| {
        let mut a = vec![Complex::new(0.0, 0.0); 2];
        let mut b = a.clone();
        a[node] = -x;
        b[node] = x;
        vec![a, b]
    };
    let books = vec![
        Codebook::new(0, cb(0, Complex::from_polar(0.6, 0.3))).unwrap(),
        Codebook::new(1, cb(1, Complex::from_polar(1.0, 0.0))).unwrap(),
        Codebook::new(2, cb(0, Complex::from_polar(1.3, 1.2))).unwrap(),
    ];
    CodebookSet::from_codebooks(books, Provenance::default()).unwrap()
}

fn rician_mgf(s: f64, kappa: f64) -> f64 {
    (1.0 + kappa) / (1.0 + kappa + s) * (-kappa * s / (1.0 + kappa + s)).exp()
}

/// Direct union bound: every ordered pair of joint codeword tuples in which
/// the target's codeword differs, weighted by the target's bit errors.
pub fn brute_force_bep(
    set: &CodebookSet,
    target: usize,
    c2: f64,
    n0: f64,
    kappa: f64,
    c1: f64,
    alpha: f64,
) -> f64 {
    let dims = set.dims();
    let total = dims.m.pow(dims.j as u32);
    let tuple = |mut idx: usize| -> Vec<usize> {
        (0..dims.j)
            .map(|_| {
                let d = idx % dims.m;
                idx /= dims.m;
                d
            })
            .collect()
    };
    let atten = (c1 * c1 + c2 * c2).powf(alpha / 2.0);
    let mut sum = 0.0;
    for t in 0..total {
        let tx = tuple(t);
        for r in 0..total {
            let rx = tuple(r);
            if tx[target] == rx[target] {
                continue;
            }
            let bits = (tx[target] ^ rx[target]).count_ones() as f64;
            let mut p4 = 1.0;
            let mut p3 = 1.0;
            for k in 0..dims.k {
                let mut d = Complex::new(0.0, 0.0);
                for l in 0..dims.j {
                    d += set.codebook(l).entry(k, tx[l]) - set.codebook(l).entry(k, rx[l]);
                }
                let s = d.norm_sqr() / (n0 * atten);
                p4 *= rician_mgf(s / 4.0, kappa);
                p3 *= rician_mgf(s / 3.0, kappa);
            }
            sum += bits * (p4 / 12.0 + p3 / 4.0);
        }
    }
    sum / (total as f64 * (dims.m as f64).log2())
}
