//! Test-only oracles that share no code path with the library.
#![allow(dead_code)]

use num_complex::Complex64;
use vrp_qaoa::ising::IsingHamiltonian;

pub type Matrix = Vec<Vec<Complex64>>;

fn zeros(dim: usize) -> Matrix {
    vec![vec![Complex64::new(0.0, 0.0); dim]; dim]
}

pub fn identity(dim: usize) -> Matrix {
    let mut m = zeros(dim);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Complex64::new(1.0, 0.0);
    }
    m
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let dim = a.len();
    let mut out = zeros(dim);
    for i in 0..dim {
        for k in 0..dim {
            let aik = a[i][k];
            if aik == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..dim {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub fn matvec(a: &Matrix, v: &[Complex64]) -> Vec<Complex64> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

/// Dense cost Hamiltonian (offset dropped) from Pauli Z and ZZ terms.
pub fn dense_cost(ham: &IsingHamiltonian) -> Matrix {
    let dim = 1 << ham.n;
    let z = |i: usize, idx: usize| if idx & (1 << i) == 0 { 1.0 } else { -1.0 };
    let mut m = zeros(dim);
    for idx in 0..dim {
        let mut e = 0.0;
        for (i, h) in ham.h.iter().enumerate() {
            e += h * z(i, idx);
        }
        for (&(a, b), c) in &ham.j {
            e += c * z(a, idx) * z(b, idx);
        }
        m[idx][idx] = Complex64::new(e, 0.0);
    }
    m
}

/// Dense transverse field `sum_i X_i`.
pub fn dense_mixer(n: usize) -> Matrix {
    let dim = 1 << n;
    let mut m = zeros(dim);
    for a in 0..dim {
        for i in 0..n {
            m[a][a ^ (1 << i)] += Complex64::new(1.0, 0.0);
        }
    }
    m
}

/// `exp(-i t M)` by scaling and squaring a truncated Taylor series.
pub fn expm_neg_i(m: &Matrix, t: f64) -> Matrix {
    let dim = m.len();
    let norm: f64 = m
        .iter()
        .map(|row| row.iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max)
        * t.abs();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scale = t / 2f64.powi(squarings as i32);
    let a: Matrix = m
        .iter()
        .map(|row| row.iter().map(|x| x * Complex64::new(0.0, -scale)).collect())
        .collect();
    let mut result = identity(dim);
    let mut term = identity(dim);
    for k in 1..=30 {
        term = matmul(&term, &a);
        for row in term.iter_mut() {
            for x in row.iter_mut() {
                *x /= k as f64;
            }
        }
        for i in 0..dim {
            for j in 0..dim {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        result = matmul(&result, &result);
    }
    result
}

/// QAOA state built from dense matrix exponentials.
pub fn dense_qaoa(ham: &IsingHamiltonian, gammas: &[f64], betas: &[f64]) -> Vec<Complex64> {
    let dim = 1 << ham.n;
    let mut psi = vec![Complex64::new((dim as f64).sqrt().recip(), 0.0); dim];
    let hc = dense_cost(ham);
    let hm = dense_mixer(ham.n);
    for (&g, &b) in gammas.iter().zip(betas) {
        psi = matvec(&expm_neg_i(&hc, g), &psi);
        psi = matvec(&expm_neg_i(&hm, b), &psi);
    }
    psi
}

/// Is `bits` (edge variables, canonical order) a set of exactly `k` depot
/// tours covering every customer once? Checked by walking successors.
pub fn is_valid_route_set(bits: &[bool], n: usize, k: usize) -> bool {
    let mut succ = vec![Vec::new(); n];
    let mut pos = 0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                if bits[pos] {
                    succ[i].push(j);
                }
                pos += 1;
            }
        }
    }
    if succ[0].len() != k {
        return false;
    }
    let mut indeg = vec![0; n];
    for s in &succ {
        for &j in s {
            indeg[j] += 1;
        }
    }
    if indeg[0] != k || (1..n).any(|v| succ[v].len() != 1 || indeg[v] != 1) {
        return false;
    }
    let mut visited = vec![false; n];
    for &first in &succ[0] {
        let mut at = first;
        let mut steps = 0;
        while at != 0 {
            if visited[at] || steps > n {
                return false;
            }
            visited[at] = true;
            at = succ[at][0];
            steps += 1;
        }
    }
    (1..n).all(|v| visited[v])
}
