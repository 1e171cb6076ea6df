//! Penalty-method compilation of constrained binary programs to QUBO.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::formulation::{ConstrainedProgram, Sense};
use crate::instance::VrpInstance;

/// Default penalty multiplier: twice the total edge weight.
pub const DEFAULT_MULTIPLIER: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    /// Weight on squared equality/inequality residuals.
    pub p: f64,
    /// Weight on `x * y` for pairwise `x + y <= 1` constraints.
    pub rho: f64,
    /// Recorded for reporting: whether the Ising coefficients get normalized.
    pub normalize_later: bool,
}

impl PenaltyConfig {
    pub fn new(p: f64, rho: f64) -> Result<Self> {
        if !(p > 0.0 && p.is_finite() && rho > 0.0 && rho.is_finite()) {
            return Err(Error::Parameter(format!(
                "penalty weights must be positive and finite, got P = {p}, rho = {rho}"
            )));
        }
        Ok(PenaltyConfig {
            p,
            rho,
            normalize_later: false,
        })
    }

    pub fn with_normalize(mut self, normalize: bool) -> Self {
        self.normalize_later = normalize;
        self
    }
}

/// `P = multiplier * sum |w|` (floored at 1 for an all-zero matrix), `rho = P / 2`.
pub fn default_penalty(instance: &VrpInstance, multiplier: f64) -> Result<PenaltyConfig> {
    if !(multiplier > 0.0 && multiplier.is_finite()) {
        return Err(Error::Parameter(format!(
            "penalty multiplier must be positive, got {multiplier}"
        )));
    }
    let sum = instance.total_weight();
    let p = if sum == 0.0 { 1.0 } else { multiplier * sum };
    PenaltyConfig::new(p, p / 2.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Qubo {
    /// Model variables first, then slack variables.
    pub variables: Vec<String>,
    /// Number of leading variables that belong to the source program.
    pub num_model_vars: usize,
    pub linear: Vec<f64>,
    /// Keys are `(i, j)` with `i < j`.
    pub quadratic: BTreeMap<(usize, usize), f64>,
    pub constant: f64,
}

impl Qubo {
    pub fn empty(variables: Vec<String>) -> Self {
        let n = variables.len();
        Qubo {
            num_model_vars: n,
            variables,
            linear: vec![0.0; n],
            quadratic: BTreeMap::new(),
            constant: 0.0,
        }
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_slack(&self) -> usize {
        self.variables.len() - self.num_model_vars
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    pub fn add_linear(&mut self, i: usize, coef: f64) {
        self.linear[i] += coef;
    }

    /// Adds `coef * x_i * x_j`; `x_i^2 = x_i` goes to the linear part.
    pub fn add_quadratic(&mut self, i: usize, j: usize, coef: f64) {
        if i == j {
            self.linear[i] += coef;
        } else {
            *self.quadratic.entry((i.min(j), i.max(j))).or_insert(0.0) += coef;
        }
    }

    pub fn quadratic_coef(&self, i: usize, j: usize) -> f64 {
        self.quadratic
            .get(&(i.min(j), i.max(j)))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn value(&self, assignment: &BitString) -> Result<f64> {
        if assignment.len() != self.num_variables() {
            return Err(Error::Dimension(format!(
                "assignment has {} bits, QUBO has {} variables",
                assignment.len(),
                self.num_variables()
            )));
        }
        Ok(self.value_unchecked(assignment.bits()))
    }

    pub(crate) fn value_unchecked(&self, bits: &[bool]) -> f64 {
        let lin: f64 = self
            .linear
            .iter()
            .zip(bits)
            .filter(|(_, &b)| b)
            .map(|(c, _)| c)
            .sum();
        let quad: f64 = self
            .quadratic
            .iter()
            .filter(|(&(i, j), _)| bits[i] && bits[j])
            .map(|(_, c)| c)
            .sum();
        self.constant + lin + quad
    }

    pub fn to_json(&self) -> String {
        let doc = QuboDoc {
            variables: self.variables.clone(),
            num_model_vars: self.num_model_vars,
            linear: self
                .linear
                .iter()
                .enumerate()
                .filter(|(_, &c)| c != 0.0)
                .map(|(i, &c)| (self.variables[i].clone(), c))
                .collect(),
            quadratic: self
                .quadratic
                .iter()
                .map(|(&(i, j), &c)| (self.variables[i].clone(), self.variables[j].clone(), c))
                .collect(),
            constant: self.constant,
        };
        serde_json::to_string_pretty(&doc).expect("qubo serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: QuboDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: "<qubo>".into(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let lookup = |name: &str| {
            doc.variables
                .iter()
                .position(|v| v == name)
                .ok_or_else(|| Error::Validation(format!("unknown variable {name}")))
        };
        let mut q = Qubo::empty(doc.variables.clone());
        q.num_model_vars = doc.num_model_vars;
        for (name, c) in &doc.linear {
            q.add_linear(lookup(name)?, *c);
        }
        for (a, b, c) in &doc.quadratic {
            q.add_quadratic(lookup(a)?, lookup(b)?, *c);
        }
        q.constant = doc.constant;
        Ok(q)
    }
}

#[derive(Serialize, Deserialize)]
struct QuboDoc {
    variables: Vec<String>,
    num_model_vars: usize,
    linear: Vec<(String, f64)>,
    quadratic: Vec<(String, String, f64)>,
    constant: f64,
}

/// Slack weights for a slack range of exactly `[0, bound]`: binary powers with
/// the top weight clipped.
pub fn slack_weights(bound: u64) -> Vec<u64> {
    let mut weights = Vec::new();
    let mut covered = 0u64;
    let mut next = 1u64;
    while covered < bound {
        let w = next.min(bound - covered);
        weights.push(w);
        covered += w;
        next <<= 1;
    }
    weights
}

fn as_nonneg_integer(x: f64, what: &str, label: &str) -> Result<u64> {
    if x < 0.0 || x.fract() != 0.0 || !x.is_finite() {
        return Err(Error::Validation(format!(
            "{label}: {what} {x} is not representable with binary slack"
        )));
    }
    Ok(x as u64)
}

/// Converts `program` into a QUBO.
///
/// Equalities `a.x = b` add `P (a.x - b)^2`. Pairwise constraints add
/// `rho x y`. Other inequalities get binary slack `s` with range exactly
/// `[0, bound]` and add `P (a.x + s - b)^2` (or `P (a.x - s - b)^2` for `>=`).
pub fn to_qubo(program: &ConstrainedProgram, penalty: &PenaltyConfig) -> Result<Qubo> {
    let mut q = Qubo::empty(program.variables.clone());
    q.constant = program.objective.constant;
    for (&v, &c) in &program.objective.linear {
        q.add_linear(v, c);
    }
    for (&(a, b), &c) in &program.objective.quadratic {
        q.add_quadratic(a, b, c);
    }

    for con in &program.constraints {
        if con.pairwise {
            let ok = con.sense == Sense::Le
                && con.rhs == 1.0
                && con.terms.len() == 2
                && con.terms.iter().all(|&(_, a)| a == 1.0);
            if !ok {
                return Err(Error::Validation(format!(
                    "{}: pairwise constraints must read x + y <= 1",
                    con.label
                )));
            }
            q.add_quadratic(con.terms[0].0, con.terms[1].0, penalty.rho);
            continue;
        }

        let mut terms = con.terms.clone();
        match con.sense {
            Sense::Eq => {}
            Sense::Le | Sense::Ge => {
                let b = as_nonneg_integer(con.rhs, "right-hand side", &con.label)?;
                let mut total = 0u64;
                for &(_, a) in &con.terms {
                    total += as_nonneg_integer(a, "coefficient", &con.label)?;
                }
                let (bound, sign) = if con.sense == Sense::Le {
                    (b, 1.0)
                } else {
                    (total.saturating_sub(b), -1.0)
                };
                for (m, w) in slack_weights(bound).into_iter().enumerate() {
                    let idx = q.variables.len();
                    q.variables.push(format!("s_{}_{m}", con.label));
                    q.linear.push(0.0);
                    terms.push((idx, sign * w as f64));
                }
            }
        }
        add_squared_residual(&mut q, &terms, con.rhs, penalty.p);
    }
    Ok(q)
}

/// Adds `weight * (sum a_i x_i - rhs)^2` with `x^2 = x`.
fn add_squared_residual(q: &mut Qubo, terms: &[(usize, f64)], rhs: f64, weight: f64) {
    q.constant += weight * rhs * rhs;
    for (idx, &(i, a)) in terms.iter().enumerate() {
        q.add_linear(i, weight * (a * a - 2.0 * rhs * a));
        for &(j, b) in &terms[idx + 1..] {
            q.add_quadratic(i, j, 2.0 * weight * a * b);
        }
    }
}

pub fn qubit_count(qubo: &Qubo) -> usize {
    qubo.num_variables()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::{build_edge_model, Constraint, Objective};
    use crate::instance::three_node_example;

    fn example_qubo() -> Qubo {
        let prog = build_edge_model(&three_node_example());
        to_qubo(&prog, &PenaltyConfig::new(437.8035, 218.90175).unwrap()).unwrap()
    }

    #[test]
    fn default_penalty_values() {
        let inst = three_node_example();
        let pc = default_penalty(&inst, 2.0).unwrap();
        assert!((inst.total_weight() - 217.9).abs() < 1e-9);
        assert!((pc.p - 435.8).abs() < 1e-9);
        assert!((pc.rho - 217.9).abs() < 1e-9);
        let pc = default_penalty(&inst, 1.5).unwrap();
        assert!((pc.p - 326.85).abs() < 1e-9);
        let zero = VrpInstance::from_weights(vec![vec![0.0; 3]; 3], 2).unwrap();
        assert_eq!(default_penalty(&zero, 2.0).unwrap().p, 1.0);
        assert!(default_penalty(&inst, 0.0).is_err());
    }

    #[test]
    fn single_equality_penalty_shape() {
        let prog = ConstrainedProgram {
            variables: vec!["a".into(), "b".into()],
            objective: Objective::default(),
            constraints: vec![Constraint {
                label: "C0".into(),
                terms: vec![(0, 1.0), (1, 1.0)],
                sense: Sense::Eq,
                rhs: 1.0,
                pairwise: false,
            }],
        };
        let q = to_qubo(&prog, &PenaltyConfig::new(3.0, 1.0).unwrap()).unwrap();
        // P (1 - a - b + 2ab)
        assert_eq!(q.constant, 3.0);
        assert_eq!(q.linear, vec![-3.0, -3.0]);
        assert_eq!(q.quadratic_coef(0, 1), 6.0);
    }

    #[test]
    fn published_qubo_coefficients() {
        let q = example_qubo();
        let idx = |s: &str| q.index_of(s).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() < 0.01;
        for (a, b) in [
            ("x_0_1", "x_0_2"),
            ("x_0_2", "x_1_2"),
            ("x_1_0", "x_1_2"),
            ("x_1_0", "x_2_0"),
            ("x_0_1", "x_2_1"),
            ("x_2_0", "x_2_1"),
        ] {
            assert!(close(q.quadratic_coef(idx(a), idx(b)), 875.607));
        }
        assert!(close(q.quadratic_coef(idx("x_1_2"), idx("x_2_1")), 218.901));
        assert_eq!(q.quadratic.len(), 7);
        assert!(close(q.linear[idx("x_0_1")], -1689.892));
        assert!(close(q.linear[idx("x_0_2")], -1746.482));
        assert!(close(q.linear[idx("x_1_0")], -1689.892));
        assert!(close(q.linear[idx("x_1_2")], -832.712));
        assert!(close(q.linear[idx("x_2_0")], -1746.482));
        assert!(close(q.linear[idx("x_2_1")], -832.712));
        assert!(close(q.constant, 5253.645));
    }

    #[test]
    fn published_qubo_values() {
        let q = example_qubo();
        let v = |s: &str| q.value(&s.parse().unwrap()).unwrap();
        assert!((v("000000") - q.constant).abs() < 1e-12);
        assert!((v("111010") - 132.11).abs() < 1e-6);
        assert!((v("100000") - (q.constant + q.linear[0])).abs() < 1e-9);
        assert!((v("100000") - 3563.753).abs() < 0.01);
        assert!(q.value(&"10101".parse().unwrap()).is_err());
    }

    #[test]
    fn slack_weights_clip_top_bit() {
        assert!(slack_weights(0).is_empty());
        assert_eq!(slack_weights(1), vec![1]);
        assert_eq!(slack_weights(2), vec![1, 1]);
        assert_eq!(slack_weights(3), vec![1, 2]);
        assert_eq!(slack_weights(4), vec![1, 2, 1]);
        assert_eq!(slack_weights(7), vec![1, 2, 4]);
        for b in 0..40u64 {
            let w = slack_weights(b);
            assert_eq!(w.iter().sum::<u64>(), b);
            let expected_bits = (64 - b.leading_zeros()) as usize; // ceil(log2(b + 1))
            assert_eq!(w.len(), expected_bits);
        }
    }

    #[test]
    fn triple_subset_gets_two_unit_slacks() {
        let inst = VrpInstance::generate_random(4, 2, 5).unwrap();
        let q = to_qubo(&build_edge_model(&inst), &default_penalty(&inst, 2.0).unwrap()).unwrap();
        assert_eq!(qubit_count(&q), 14);
        assert_eq!(&q.variables[12..], &["s_SUB{1,2,3}_0", "s_SUB{1,2,3}_1"]);
        // both slack bits carry weight 1, so they share one cross coefficient 2P
        let p = default_penalty(&inst, 2.0).unwrap().p;
        assert!((q.quadratic_coef(12, 13) - 2.0 * p).abs() < 1e-9);
    }

    #[test]
    fn negative_rhs_rejected() {
        let prog = ConstrainedProgram {
            variables: vec!["a".into()],
            objective: Objective::default(),
            constraints: vec![Constraint {
                label: "bad".into(),
                terms: vec![(0, 1.0)],
                sense: Sense::Le,
                rhs: -1.0,
                pairwise: false,
            }],
        };
        assert!(to_qubo(&prog, &PenaltyConfig::new(1.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn greater_equal_uses_negative_slack() {
        // a + b + c >= 1, slack range [0, 2]
        let prog = ConstrainedProgram {
            variables: vec!["a".into(), "b".into(), "c".into()],
            objective: Objective::default(),
            constraints: vec![Constraint {
                label: "G".into(),
                terms: vec![(0, 1.0), (1, 1.0), (2, 1.0)],
                sense: Sense::Ge,
                rhs: 1.0,
                pairwise: false,
            }],
        };
        let q = to_qubo(&prog, &PenaltyConfig::new(1.0, 1.0).unwrap()).unwrap();
        assert_eq!(q.num_slack(), 2);
        for idx in 0..8usize {
            let x = BitString::from_index(idx, 3);
            let best = (0..4usize)
                .map(|s| {
                    let full = BitString::from_index(idx | (s << 3), 5);
                    q.value(&full).unwrap()
                })
                .fold(f64::INFINITY, f64::min);
            let feasible = x.count_ones() >= 1;
            assert_eq!(best == 0.0, feasible, "x = {x}");
        }
    }

    #[test]
    fn json_round_trip() {
        let q = example_qubo();
        assert_eq!(Qubo::from_json(&q.to_json()).unwrap(), q);
    }
}
