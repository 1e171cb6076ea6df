//! Hardware-agnostic resource estimates for QAOA circuits under an
//! all-to-all logical connectivity model.
//!
//! Gadget rules per layer: one `Rz` per Z term, one `Rz` and two CNOTs per
//! ZZ term, one `Rx` per qubit. The initial superposition costs one `H` per
//! qubit.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::formulation::{build_edge_model, build_time_expanded_model};
use crate::instance::VrpInstance;
use crate::ising::{to_ising, IsingHamiltonian};
use crate::qubo::{default_penalty, to_qubo, DEFAULT_MULTIPLIER};

/// Qubits on the reference device; larger circuits are flagged infeasible.
pub const DEVICE_QUBITS: usize = 127;

/// Hamiltonians above this many qubits are not built for depth estimation.
pub const DEPTH_QUBIT_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ResourceEstimate {
    pub qubits: usize,
    pub rz_count: usize,
    pub rx_count: usize,
    pub cnot_count: usize,
    pub h_count: usize,
    pub two_qubit_depth: usize,
    pub p: usize,
}

pub fn logical_gate_counts(ham: &IsingHamiltonian, p: usize) -> Result<ResourceEstimate> {
    if p == 0 {
        return Err(Error::Parameter("QAOA depth must be at least 1".into()));
    }
    let zz = ham.zz_terms().count();
    Ok(ResourceEstimate {
        qubits: ham.n,
        rz_count: p * (ham.z_terms() + zz),
        rx_count: p * ham.n,
        cnot_count: p * 2 * zz,
        h_count: ham.n,
        two_qubit_depth: two_qubit_depth(ham, p)?,
        p,
    })
}

/// Two sequential CNOTs per ZZ gadget, gadgets of one colour run together.
pub fn two_qubit_depth(ham: &IsingHamiltonian, p: usize) -> Result<usize> {
    if p == 0 {
        return Err(Error::Parameter("QAOA depth must be at least 1".into()));
    }
    let edges: Vec<(usize, usize)> = ham.zz_terms().collect();
    Ok(p * 2 * edge_coloring(ham.n, &edges).colors)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeColoring {
    /// Colour per input edge.
    pub assignment: Vec<usize>,
    pub colors: usize,
}

fn degrees(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut deg = vec![0; n];
    for &(a, b) in edges {
        deg[a] += 1;
        deg[b] += 1;
    }
    deg
}

pub fn max_degree(n: usize, edges: &[(usize, usize)]) -> usize {
    degrees(n, edges).into_iter().max().unwrap_or(0)
}

/// Greedy colouring: edges by descending endpoint-degree sum (ties by
/// endpoints), each taking the smallest colour free at both ends.
pub fn greedy_edge_coloring(n: usize, edges: &[(usize, usize)]) -> EdgeColoring {
    let deg = degrees(n, edges);
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by_key(|&e| {
        let (a, b) = edges[e];
        (std::cmp::Reverse(deg[a] + deg[b]), a.min(b), a.max(b))
    });
    let mut used: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut assignment = vec![0; edges.len()];
    let mut colors = 0;
    for e in order {
        let (a, b) = edges[e];
        let c = (0..)
            .find(|c| !used[a].contains(c) && !used[b].contains(c))
            .expect("unbounded range");
        used[a].insert(c);
        used[b].insert(c);
        assignment[e] = c;
        colors = colors.max(c + 1);
    }
    EdgeColoring { assignment, colors }
}

/// Misra-Gries colouring with at most `max_degree + 1` colours.
pub fn misra_gries_edge_coloring(n: usize, edges: &[(usize, usize)]) -> EdgeColoring {
    MisraGries::new(n, edges).run()
}

/// Greedy colouring, replaced by Misra-Gries whenever greedy exceeds the
/// Vizing bound of `max_degree + 1`.
pub fn edge_coloring(n: usize, edges: &[(usize, usize)]) -> EdgeColoring {
    let greedy = greedy_edge_coloring(n, edges);
    if greedy.colors <= max_degree(n, edges) + 1 {
        greedy
    } else {
        misra_gries_edge_coloring(n, edges)
    }
}

struct MisraGries<'a> {
    edges: &'a [(usize, usize)],
    palette: usize,
    /// `at[v][c]` = neighbour joined to `v` by the edge coloured `c`.
    at: Vec<BTreeMap<usize, usize>>,
    color: BTreeMap<(usize, usize), usize>,
    neighbors: Vec<Vec<usize>>,
}

impl<'a> MisraGries<'a> {
    fn new(n: usize, edges: &'a [(usize, usize)]) -> Self {
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in edges {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        MisraGries {
            edges,
            palette: max_degree(n, edges) + 1,
            at: vec![BTreeMap::new(); n],
            color: BTreeMap::new(),
            neighbors,
        }
    }

    fn key(a: usize, b: usize) -> (usize, usize) {
        (a.min(b), a.max(b))
    }

    fn get(&self, a: usize, b: usize) -> Option<usize> {
        self.color.get(&Self::key(a, b)).copied()
    }

    fn set(&mut self, a: usize, b: usize, c: usize) {
        self.clear(a, b);
        self.color.insert(Self::key(a, b), c);
        self.at[a].insert(c, b);
        self.at[b].insert(c, a);
    }

    fn clear(&mut self, a: usize, b: usize) {
        if let Some(old) = self.color.remove(&Self::key(a, b)) {
            self.at[a].remove(&old);
            self.at[b].remove(&old);
        }
    }

    fn is_free(&self, v: usize, c: usize) -> bool {
        !self.at[v].contains_key(&c)
    }

    fn free_color(&self, v: usize) -> usize {
        (0..self.palette)
            .find(|&c| self.is_free(v, c))
            .expect("a vertex of degree <= max degree has a free colour")
    }

    fn maximal_fan(&self, u: usize, v: usize) -> Vec<usize> {
        let mut fan = vec![v];
        loop {
            let last = *fan.last().unwrap();
            let next = self.neighbors[u].iter().copied().find(|&w| {
                !fan.contains(&w) && self.get(u, w).is_some_and(|c| self.is_free(last, c))
            });
            match next {
                Some(w) => fan.push(w),
                None => return fan,
            }
        }
    }

    fn run(mut self) -> EdgeColoring {
        for &(u, v) in self.edges {
            let fan = self.maximal_fan(u, v);
            let c = self.free_color(u);
            let d = self.free_color(*fan.last().unwrap());

            // swap c and d along the alternating path that leaves u on d
            let mut path = Vec::new();
            let (mut x, mut want) = (u, d);
            while let Some(&y) = self.at[x].get(&want) {
                path.push((x, y, want));
                x = y;
                want = if want == d { c } else { d };
            }
            for &(a, b, _) in &path {
                self.clear(a, b);
            }
            for &(a, b, col) in &path {
                self.set(a, b, if col == d { c } else { d });
            }

            // shortest prefix of the (still valid) fan ending where d is free
            let mut w = fan.len() - 1;
            for i in 0..fan.len() {
                if i > 0 {
                    let still_fan = self
                        .get(u, fan[i])
                        .is_some_and(|col| self.is_free(fan[i - 1], col));
                    if !still_fan {
                        break;
                    }
                }
                if self.is_free(fan[i], d) {
                    w = i;
                    break;
                }
            }

            let shifted: Vec<usize> = (0..w)
                .map(|i| self.get(u, fan[i + 1]).expect("fan edges are coloured"))
                .collect();
            for &f in &fan[..=w] {
                self.clear(u, f);
            }
            for (i, col) in shifted.into_iter().enumerate() {
                self.set(u, fan[i], col);
            }
            self.set(u, fan[w], d);
        }
        let assignment: Vec<usize> = self
            .edges
            .iter()
            .map(|&(a, b)| self.get(a, b).expect("every edge coloured"))
            .collect();
        let colors = assignment.iter().map(|c| c + 1).max().unwrap_or(0);
        EdgeColoring { assignment, colors }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    Edge,
    TimeExpanded,
    /// One variable per possible route; only its size is reported.
    RouteCountOnly,
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Formulation::Edge => "edge",
            Formulation::TimeExpanded => "time_expanded",
            Formulation::RouteCountOnly => "route_count_only",
        })
    }
}

impl std::str::FromStr for Formulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edge" => Ok(Formulation::Edge),
            "time_expanded" | "time-expanded" => Ok(Formulation::TimeExpanded),
            "route_count_only" | "route" => Ok(Formulation::RouteCountOnly),
            other => Err(Error::Parameter(format!("unknown formulation {other:?}"))),
        }
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    (0..k.min(n - k)).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

fn ceil_log2(x: u128) -> u128 {
    if x <= 1 {
        0
    } else {
        128 - (x - 1).leading_zeros() as u128
    }
}

/// Qubits (binary variables) each formulation needs. For the route-based
/// formulation this is the number of candidate routes, `n!`.
pub fn qubit_requirements(
    formulation: Formulation,
    n: usize,
    k: usize,
    horizon: Option<usize>,
) -> Result<u128> {
    if n < 2 {
        return Err(Error::Parameter(format!("need at least 2 nodes, got {n}")));
    }
    let n128 = n as u128;
    match formulation {
        Formulation::Edge => {
            let customers = n128 - 1;
            let slack: u128 = (3..=customers)
                .map(|s| binomial(customers, s) * ceil_log2(s))
                .sum();
            Ok(n128 * (n128 - 1) + slack)
        }
        Formulation::TimeExpanded => {
            let t = horizon.ok_or_else(|| {
                Error::Parameter("time-expanded formulation needs a horizon".into())
            })?;
            Ok(n128 * t as u128 * k as u128)
        }
        Formulation::RouteCountOnly => {
            if n > 34 {
                return Err(Error::Resource {
                    what: "route count (nodes)",
                    required: n,
                    limit: 34,
                });
            }
            Ok((1..=n128).product())
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitVerdict {
    pub model: FitModel,
    /// `c0 + c1 n + c2 n^2` fitted on all points.
    pub quadratic: [f64; 3],
    /// `c0 exp(c1 n)` fitted on all points.
    pub exponential: [f64; 2],
    pub quadratic_loocv_mse: f64,
    pub exponential_loocv_mse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    Quadratic,
    Exponential,
}

fn solve3(mut a: [[f64; 4]; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        for row in 0..3 {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..4 {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    Some([a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]])
}

fn fit_quadratic(x: &[f64], y: &[f64]) -> Option<[f64; 3]> {
    // centre x for conditioning, then shift coefficients back
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let mut m = [[0.0; 4]; 3];
    for (&xi, &yi) in x.iter().zip(y) {
        let u = xi - mean;
        let pow = [1.0, u, u * u];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] += pow[r] * pow[c];
            }
            m[r][3] += pow[r] * yi;
        }
    }
    let [b0, b1, b2] = solve3(m)?;
    Some([b0 - b1 * mean + b2 * mean * mean, b1 - 2.0 * b2 * mean, b2])
}

fn fit_exponential(x: &[f64], y: &[f64]) -> Option<[f64; 2]> {
    let n = x.len() as f64;
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx < 1e-12 {
        return None;
    }
    let sxy: f64 = x.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some([(my - slope * mx).exp(), slope])
}

/// Compares quadratic and exponential growth models by leave-one-out
/// prediction error.
pub fn scaling_fit(sizes: &[f64], values: &[f64]) -> Result<FitVerdict> {
    if sizes.len() != values.len() {
        return Err(Error::Dimension(format!(
            "{} sizes but {} values",
            sizes.len(),
            values.len()
        )));
    }
    if sizes.len() < 4 {
        return Err(Error::Parameter("scaling fit needs at least 4 points".into()));
    }
    if values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Parameter("scaling fit needs positive values".into()));
    }
    let degenerate = || Error::Validation("sizes too degenerate to fit".into());
    let quadratic = fit_quadratic(sizes, values).ok_or_else(degenerate)?;
    let exponential = fit_exponential(sizes, values).ok_or_else(degenerate)?;

    let mut q_err = 0.0;
    let mut e_err = 0.0;
    for i in 0..sizes.len() {
        let xs: Vec<f64> = (0..sizes.len()).filter(|&j| j != i).map(|j| sizes[j]).collect();
        let ys: Vec<f64> = (0..sizes.len()).filter(|&j| j != i).map(|j| values[j]).collect();
        let q = fit_quadratic(&xs, &ys).ok_or_else(degenerate)?;
        let e = fit_exponential(&xs, &ys).ok_or_else(degenerate)?;
        let x = sizes[i];
        q_err += (q[0] + q[1] * x + q[2] * x * x - values[i]).powi(2);
        e_err += (e[0] * (e[1] * x).exp() - values[i]).powi(2);
    }
    let folds = sizes.len() as f64;
    let (q_err, e_err) = (q_err / folds, e_err / folds);
    Ok(FitVerdict {
        model: if q_err <= e_err {
            FitModel::Quadratic
        } else {
            FitModel::Exponential
        },
        quadratic,
        exponential,
        quadratic_loocv_mse: q_err,
        exponential_loocv_mse: e_err,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub formulation: Formulation,
    pub n: usize,
    pub k: usize,
    pub horizon: Option<usize>,
    pub qubits: u128,
    pub two_qubit_depth: Option<usize>,
    /// False when the vehicle count cannot exist for this node count.
    pub valid: bool,
    /// Valid and within the device qubit budget.
    pub feasible: bool,
}

/// Hamiltonian used for structural estimates of a formulation.
pub fn reference_hamiltonian(
    formulation: Formulation,
    n: usize,
    k: usize,
    horizon: Option<usize>,
) -> Result<IsingHamiltonian> {
    let instance = VrpInstance::generate_random(n, k, 0)?;
    let program = match formulation {
        Formulation::Edge => build_edge_model(&instance),
        Formulation::TimeExpanded => build_time_expanded_model(&instance, horizon.unwrap_or(n))?,
        Formulation::RouteCountOnly => {
            return Err(Error::Parameter(
                "the route formulation is counted, not built".into(),
            ))
        }
    };
    let penalty = default_penalty(&instance, DEFAULT_MULTIPLIER)?;
    Ok(to_ising(&to_qubo(&program, &penalty)?))
}

/// Qubits and two-qubit depth per formulation over a grid of sizes, sorted
/// by `(formulation, n, k)`. The time-expanded horizon defaults to `n`.
pub fn comparison_table(
    sizes: &[usize],
    vehicles: &[usize],
    formulations: &[Formulation],
    p: usize,
    horizon: Option<usize>,
) -> Result<Vec<ComparisonRow>> {
    let mut rows = Vec::new();
    for &formulation in formulations {
        for &n in sizes {
            for &k in vehicles {
                let t = match formulation {
                    Formulation::TimeExpanded => Some(horizon.unwrap_or(n)),
                    _ => None,
                };
                let qubits = qubit_requirements(formulation, n, k, t)?;
                let valid = k >= 1 && k < n;
                let depth = if valid
                    && formulation != Formulation::RouteCountOnly
                    && qubits <= DEPTH_QUBIT_LIMIT as u128
                {
                    Some(two_qubit_depth(&reference_hamiltonian(formulation, n, k, t)?, p)?)
                } else {
                    None
                };
                rows.push(ComparisonRow {
                    formulation,
                    n,
                    k,
                    horizon: t,
                    qubits,
                    two_qubit_depth: depth,
                    valid,
                    feasible: valid && qubits <= DEVICE_QUBITS as u128,
                });
            }
        }
    }
    rows.sort_by_key(|a| (a.formulation, a.n, a.k));
    Ok(rows)
}

pub fn comparison_to_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("formulation,n,k,horizon,qubits,two_qubit_depth,valid,feasible\n");
    for r in rows {
        let opt = |v: Option<usize>| v.map_or(String::new(), |x| x.to_string());
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.formulation,
            r.n,
            r.k,
            opt(r.horizon),
            r.qubits,
            opt(r.two_qubit_depth),
            r.valid,
            r.feasible
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn proper(n: usize, edges: &[(usize, usize)], col: &EdgeColoring) -> bool {
        let mut seen = vec![BTreeSet::new(); n];
        edges.iter().zip(&col.assignment).all(|(&(a, b), &c)| {
            let fresh = seen[a].insert(c) && seen[b].insert(c);
            fresh && c < col.colors
        })
    }

    #[test]
    fn depth_small_graphs() {
        let mut h = IsingHamiltonian::zero(4);
        h.add_zz(0, 1, 1.0);
        assert_eq!(two_qubit_depth(&h, 1).unwrap(), 2);
        h.add_zz(2, 3, 1.0);
        assert_eq!(two_qubit_depth(&h, 1).unwrap(), 2);
        let mut tri = IsingHamiltonian::zero(3);
        tri.add_zz(0, 1, 1.0);
        tri.add_zz(1, 2, 1.0);
        tri.add_zz(0, 2, 1.0);
        assert_eq!(two_qubit_depth(&tri, 1).unwrap(), 6);
        assert_eq!(two_qubit_depth(&tri, 3).unwrap(), 18);
    }

    #[test]
    fn empty_hamiltonian_only_needs_hadamards() {
        let h = IsingHamiltonian::zero(5);
        let r = logical_gate_counts(&h, 2).unwrap();
        assert_eq!((r.h_count, r.rz_count, r.cnot_count, r.two_qubit_depth), (5, 0, 0, 0));
        assert_eq!(r.rx_count, 10);
        assert!(logical_gate_counts(&h, 0).is_err());
    }

    #[test]
    fn misra_gries_on_petersen_like_graph() {
        // K4 plus pendant edges; greedy and Misra-Gries must both be proper
        let edges = vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3), (3, 4), (4, 5)];
        let mg = misra_gries_edge_coloring(6, &edges);
        assert!(proper(6, &edges, &mg));
        assert!(mg.colors <= max_degree(6, &edges) + 1);
        let g = greedy_edge_coloring(6, &edges);
        assert!(proper(6, &edges, &g));
    }

    #[test]
    fn qubit_formulas() {
        let edge = |n| qubit_requirements(Formulation::Edge, n, 2, None).unwrap();
        assert_eq!([edge(3), edge(4), edge(5), edge(6)], [6, 14, 30, 63]);
        assert_eq!(
            qubit_requirements(Formulation::TimeExpanded, 5, 2, Some(5)).unwrap(),
            50
        );
        assert!(qubit_requirements(Formulation::TimeExpanded, 5, 2, None).is_err());
        assert_eq!(
            qubit_requirements(Formulation::RouteCountOnly, 5, 2, None).unwrap(),
            120
        );
    }

    #[test]
    fn edge_formula_matches_built_qubo() {
        for n in 3..=6 {
            let h = reference_hamiltonian(Formulation::Edge, n, 2, None).unwrap();
            assert_eq!(
                h.n as u128,
                qubit_requirements(Formulation::Edge, n, 2, None).unwrap()
            );
        }
    }

    #[test]
    fn fit_exact_models() {
        let xs = [3.0, 4.0, 5.0, 6.0, 7.0];
        let quad: Vec<f64> = xs.iter().map(|x| 3.0 * x * x + 5.0).collect();
        let v = scaling_fit(&xs, &quad).unwrap();
        assert_eq!(v.model, FitModel::Quadratic);
        assert!((v.quadratic[2] - 3.0).abs() < 1e-8 && (v.quadratic[0] - 5.0).abs() < 1e-6);

        let expo: Vec<f64> = xs.iter().map(|x| 2.0 * (0.8 * x).exp()).collect();
        let v = scaling_fit(&xs, &expo).unwrap();
        assert_eq!(v.model, FitModel::Exponential);
        assert!((v.exponential[1] - 0.8).abs() < 1e-9);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(scaling_fit(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(scaling_fit(&[2.0; 4], &[1.0, 2.0, 3.0, 4.0]).is_err());
        assert!(scaling_fit(&[1.0, 2.0, 3.0, 4.0], &[1.0, 0.0, 3.0, 4.0]).is_err());
    }

    #[test]
    fn comparison_rows() {
        let rows = comparison_table(
            &[3, 4, 5],
            &[2, 4],
            &[Formulation::TimeExpanded, Formulation::Edge],
            2,
            None,
        )
        .unwrap();
        assert_eq!(rows.len(), 12);
        assert!(rows.windows(2).all(|w| {
            (w[0].formulation, w[0].n, w[0].k) < (w[1].formulation, w[1].n, w[1].k)
        }));
        let find = |f, n, k| rows.iter().find(|r| r.formulation == f && r.n == n && r.k == k).unwrap();
        assert_eq!(find(Formulation::Edge, 5, 2).qubits, 30);
        assert_eq!(find(Formulation::TimeExpanded, 5, 2).qubits, 50);
        let bad = find(Formulation::Edge, 4, 4);
        assert!(!bad.valid && !bad.feasible && bad.two_qubit_depth.is_none());
        assert!(find(Formulation::Edge, 5, 4).valid);
    }
}
