//! Constrained binary programs for the VRP.
//!
//! The edge model has one variable per directed edge, degree equalities for
//! every node, and a within-subset subtour constraint for every customer
//! subset of size two or more. The time-expanded model has one variable per
//! (vehicle, node, time step) with a quadratic travel-cost objective.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::VrpInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Sense {
    Eq,
    Le,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Eq => "=",
            Sense::Le => "<=",
            Sense::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub label: String,
    /// `(variable index, coefficient)` pairs.
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    /// `x + y <= 1` over two variables; penalized by a single product term.
    #[serde(default)]
    pub pairwise: bool,
}

impl Constraint {
    pub fn lhs(&self, bits: &[bool]) -> f64 {
        self.terms
            .iter()
            .filter(|(v, _)| bits[*v])
            .map(|(_, a)| a)
            .sum()
    }

    pub fn is_satisfied(&self, bits: &[bool]) -> bool {
        let lhs = self.lhs(bits);
        match self.sense {
            Sense::Eq => (lhs - self.rhs).abs() < 1e-9,
            Sense::Le => lhs <= self.rhs + 1e-9,
            Sense::Ge => lhs >= self.rhs - 1e-9,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Objective {
    pub constant: f64,
    pub linear: BTreeMap<usize, f64>,
    /// Keys are `(i, j)` with `i < j`.
    pub quadratic: BTreeMap<(usize, usize), f64>,
}

impl Objective {
    pub fn add_linear(&mut self, var: usize, coef: f64) {
        *self.linear.entry(var).or_insert(0.0) += coef;
    }

    /// Adds `coef * x_a * x_b`, folding `a == b` into the linear part.
    pub fn add_quadratic(&mut self, a: usize, b: usize, coef: f64) {
        if a == b {
            self.add_linear(a, coef);
        } else {
            *self.quadratic.entry((a.min(b), a.max(b))).or_insert(0.0) += coef;
        }
    }

    pub fn value(&self, bits: &[bool]) -> f64 {
        let lin: f64 = self
            .linear
            .iter()
            .filter(|(&v, _)| bits[v])
            .map(|(_, c)| c)
            .sum();
        let quad: f64 = self
            .quadratic
            .iter()
            .filter(|(&(a, b), _)| bits[a] && bits[b])
            .map(|(_, c)| c)
            .sum();
        self.constant + lin + quad
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedProgram {
    pub variables: Vec<String>,
    pub objective: Objective,
    pub constraints: Vec<Constraint>,
}

impl ConstrainedProgram {
    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn constraint(&self, label: &str) -> Option<&Constraint> {
        self.constraints.iter().find(|c| c.label == label)
    }

    pub fn is_feasible(&self, bits: &[bool]) -> bool {
        self.constraints.iter().all(|c| c.is_satisfied(bits))
    }

    pub fn violated(&self, bits: &[bool]) -> Vec<&Constraint> {
        self.constraints
            .iter()
            .filter(|c| !c.is_satisfied(bits))
            .collect()
    }

    pub fn to_json(&self) -> String {
        let doc = ProgramDoc {
            variables: self.variables.clone(),
            objective: ObjectiveDoc {
                constant: self.objective.constant,
                linear: self
                    .objective
                    .linear
                    .iter()
                    .map(|(&v, &c)| (self.variables[v].clone(), c))
                    .collect(),
                quadratic: self
                    .objective
                    .quadratic
                    .iter()
                    .map(|(&(a, b), &c)| {
                        (self.variables[a].clone(), self.variables[b].clone(), c)
                    })
                    .collect(),
            },
            constraints: self
                .constraints
                .iter()
                .map(|c| ConstraintDoc {
                    label: c.label.clone(),
                    terms: c
                        .terms
                        .iter()
                        .map(|&(v, a)| (self.variables[v].clone(), a))
                        .collect(),
                    sense: c.sense,
                    rhs: c.rhs,
                    pairwise: c.pairwise,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("program serializes")
    }
}

#[derive(Serialize)]
struct ProgramDoc {
    variables: Vec<String>,
    objective: ObjectiveDoc,
    constraints: Vec<ConstraintDoc>,
}

#[derive(Serialize)]
struct ObjectiveDoc {
    constant: f64,
    linear: Vec<(String, f64)>,
    quadratic: Vec<(String, String, f64)>,
}

#[derive(Serialize)]
struct ConstraintDoc {
    label: String,
    terms: Vec<(String, f64)>,
    sense: Sense,
    rhs: f64,
    pairwise: bool,
}

/// Canonical list of directed edges `(i, j)`, `i != j`, in lexicographic order.
/// Position in this list is the variable index of `x_{i,j}`.
pub fn edge_list(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect()
}

/// Variable index of edge `i -> j` in the canonical order.
pub fn edge_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i != j && i < n && j < n);
    i * (n - 1) + if j > i { j - 1 } else { j }
}

pub fn edge_var_name(i: usize, j: usize) -> String {
    format!("x_{i}_{j}")
}

/// Customer subsets `S` of `{1, .., n-1}` with `|S| >= 2`, ordered by size
/// and then lexicographically.
pub fn enumerate_subtour_subsets(n: usize) -> Vec<Vec<usize>> {
    if n < 3 {
        return Vec::new();
    }
    let customers: Vec<usize> = (1..n).collect();
    let mut out = Vec::new();
    for size in 2..=customers.len() {
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            out.push(combo.iter().map(|&i| customers[i]).collect());
            // advance to the next combination in lexicographic order
            let m = customers.len();
            let Some(pos) = (0..size).rev().find(|&p| combo[p] < m - size + p) else {
                break;
            };
            combo[pos] += 1;
            for q in pos + 1..size {
                combo[q] = combo[q - 1] + 1;
            }
        }
    }
    out
}

pub fn subset_label(subset: &[usize]) -> String {
    let items: Vec<String> = subset.iter().map(|v| v.to_string()).collect();
    format!("SUB{{{}}}", items.join(","))
}

/// Edge-based model: minimize total edge weight subject to degree and
/// subtour-elimination constraints.
///
/// Constraints come in the order customer out-degree, customer in-degree,
/// depot in-degree, depot out-degree (labelled `C0`, `C1`, ...), followed by
/// one `SUB{..}` constraint per customer subset.
pub fn build_edge_model(instance: &VrpInstance) -> ConstrainedProgram {
    let n = instance.n();
    let k = instance.k() as f64;
    let edges = edge_list(n);
    let variables = edges.iter().map(|&(i, j)| edge_var_name(i, j)).collect();

    let mut objective = Objective::default();
    for (v, &(i, j)) in edges.iter().enumerate() {
        objective.add_linear(v, instance.weight(i, j));
    }

    let mut degree: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    for i in 1..n {
        let out = (0..n).filter(|&j| j != i).map(|j| (edge_index(n, i, j), 1.0));
        degree.push((out.collect(), 1.0));
    }
    for i in 1..n {
        let inc = (0..n).filter(|&j| j != i).map(|j| (edge_index(n, j, i), 1.0));
        degree.push((inc.collect(), 1.0));
    }
    degree.push(((1..n).map(|i| (edge_index(n, i, 0), 1.0)).collect(), k));
    degree.push(((1..n).map(|j| (edge_index(n, 0, j), 1.0)).collect(), k));

    let mut constraints: Vec<Constraint> = degree
        .into_iter()
        .enumerate()
        .map(|(c, (terms, rhs))| Constraint {
            label: format!("C{c}"),
            terms,
            sense: Sense::Eq,
            rhs,
            pairwise: false,
        })
        .collect();

    for subset in enumerate_subtour_subsets(n) {
        let terms: Vec<(usize, f64)> = subset
            .iter()
            .flat_map(|&i| subset.iter().filter(move |&&j| j != i).map(move |&j| (i, j)))
            .map(|(i, j)| (edge_index(n, i, j), 1.0))
            .collect();
        constraints.push(Constraint {
            label: subset_label(&subset),
            terms,
            sense: Sense::Le,
            rhs: (subset.len() - 1) as f64,
            pairwise: subset.len() == 2,
        });
    }

    ConstrainedProgram {
        variables,
        objective,
        constraints,
    }
}

/// Index of `x^k_{v,t}` (all zero-based) in the time-expanded model.
pub fn time_expanded_index(n: usize, horizon: usize, k: usize, v: usize, t: usize) -> usize {
    (k * n + v) * horizon + t
}

/// Time-expanded (sequence-based) model with `horizon` time steps per
/// vehicle. Capacity constraints are omitted: demand is assumed met on
/// arrival.
pub fn build_time_expanded_model(
    instance: &VrpInstance,
    horizon: usize,
) -> Result<ConstrainedProgram> {
    if horizon < 2 {
        return Err(Error::Parameter(format!(
            "time horizon must be at least 2, got {horizon}"
        )));
    }
    let n = instance.n();
    let vehicles = instance.k();
    let idx = |k, v, t| time_expanded_index(n, horizon, k, v, t);

    let mut variables = Vec::with_capacity(n * horizon * vehicles);
    for k in 0..vehicles {
        for v in 0..n {
            for t in 0..horizon {
                variables.push(format!("x_k{}_v{}_t{}", k + 1, v, t + 1));
            }
        }
    }

    let mut objective = Objective::default();
    for k in 0..vehicles {
        for t in 0..horizon - 1 {
            for v in 0..n {
                for w in (0..n).filter(|&w| w != v) {
                    objective.add_quadratic(idx(k, v, t), idx(k, w, t + 1), instance.weight(v, w));
                }
            }
        }
    }

    let mut constraints = Vec::new();
    for v in 1..n {
        let terms = (0..vehicles)
            .flat_map(|k| (0..horizon).map(move |t| (k, t)))
            .map(|(k, t)| (idx(k, v, t), 1.0))
            .collect();
        constraints.push(Constraint {
            label: format!("VISIT({v})"),
            terms,
            sense: Sense::Eq,
            rhs: 1.0,
            pairwise: false,
        });
    }
    for k in 0..vehicles {
        for t in 0..horizon {
            constraints.push(Constraint {
                label: format!("SLOT({},{})", k + 1, t + 1),
                terms: (0..n).map(|v| (idx(k, v, t), 1.0)).collect(),
                sense: Sense::Eq,
                rhs: 1.0,
                pairwise: false,
            });
        }
    }

    Ok(ConstrainedProgram {
        variables,
        objective,
        constraints,
    })
}

/// Number of quadratic objective terms the time-expanded model emits before
/// merging; useful as a structural check.
pub fn time_expanded_term_count(n: usize, vehicles: usize, horizon: usize) -> usize {
    vehicles * (horizon - 1) * n * (n - 1)
}
