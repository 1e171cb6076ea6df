//! Ising Hamiltonians `offset + sum h_i Z_i + sum J_ij Z_i Z_j`.
//!
//! Spin convention: `x = (1 - z) / 2`, so qubit state `|0>` (z = +1) is
//! `x = 0` and `|1>` (z = -1) is `x = 1`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::qubo::Qubo;

/// Coefficients smaller than this are treated as absent when counting terms.
pub const TERM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct IsingHamiltonian {
    pub n: usize,
    pub h: Vec<f64>,
    /// Keys are `(i, j)` with `i < j`.
    pub j: BTreeMap<(usize, usize), f64>,
    pub offset: f64,
    /// Energies here equal source energies divided by `scale`.
    pub scale: f64,
}

impl IsingHamiltonian {
    pub fn zero(n: usize) -> Self {
        IsingHamiltonian {
            n,
            h: vec![0.0; n],
            j: BTreeMap::new(),
            offset: 0.0,
            scale: 1.0,
        }
    }

    pub fn add_zz(&mut self, a: usize, b: usize, coef: f64) {
        assert!(a != b, "ZZ term needs two distinct qubits");
        *self.j.entry((a.min(b), a.max(b))).or_insert(0.0) += coef;
    }

    pub fn zz(&self, a: usize, b: usize) -> f64 {
        self.j.get(&(a.min(b), a.max(b))).copied().unwrap_or(0.0)
    }

    /// Qubits with a nonzero Z coefficient.
    pub fn z_terms(&self) -> usize {
        self.h.iter().filter(|c| c.abs() > TERM_EPS).count()
    }

    /// Qubit pairs with a nonzero ZZ coefficient.
    pub fn zz_terms(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.j
            .iter()
            .filter(|(_, c)| c.abs() > TERM_EPS)
            .map(|(&k, _)| k)
    }

    pub fn energy(&self, assignment: &BitString) -> Result<f64> {
        if assignment.len() != self.n {
            return Err(Error::Dimension(format!(
                "assignment has {} bits, Hamiltonian has {} qubits",
                assignment.len(),
                self.n
            )));
        }
        Ok(self.offset + self.energy_of_index(assignment.to_index()))
    }

    /// Energy of basis state `index` without the offset.
    pub fn energy_of_index(&self, index: usize) -> f64 {
        let spin = |i: usize| if (index >> i) & 1 == 0 { 1.0 } else { -1.0 };
        let z: f64 = self.h.iter().enumerate().map(|(i, h)| h * spin(i)).sum();
        let zz: f64 = self
            .j
            .iter()
            .map(|(&(a, b), c)| c * spin(a) * spin(b))
            .sum();
        z + zz
    }

    pub fn max_coefficient(&self) -> f64 {
        self.h
            .iter()
            .chain(self.j.values())
            .fold(0.0, |m: f64, c| m.max(c.abs()))
    }

    /// Divides every coefficient (and the offset) by the largest `|h|` or
    /// `|J|`. A zero Hamiltonian is returned unchanged.
    pub fn normalized(&self) -> IsingHamiltonian {
        let m = self.max_coefficient();
        if m == 0.0 {
            return self.clone();
        }
        IsingHamiltonian {
            n: self.n,
            h: self.h.iter().map(|c| c / m).collect(),
            j: self.j.iter().map(|(&k, c)| (k, c / m)).collect(),
            offset: self.offset / m,
            scale: self.scale * m,
        }
    }

    /// Pauli-string rendering, qubit 0 leftmost: `Z_2` on six qubits is `IIZIII`.
    pub fn pauli_terms(&self) -> Vec<(String, f64)> {
        let label = |qs: &[usize]| -> String {
            (0..self.n)
                .map(|i| if qs.contains(&i) { 'Z' } else { 'I' })
                .collect()
        };
        let mut out: Vec<(String, f64)> = self
            .h
            .iter()
            .enumerate()
            .filter(|(_, c)| c.abs() > TERM_EPS)
            .map(|(i, &c)| (label(&[i]), c))
            .collect();
        out.extend(
            self.j
                .iter()
                .filter(|(_, c)| c.abs() > TERM_EPS)
                .map(|(&(a, b), &c)| (label(&[a, b]), c)),
        );
        out
    }

    pub fn to_json(&self) -> String {
        let doc = IsingDoc {
            n: self.n,
            z: self
                .h
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(i, &c)| (i, c))
                .collect(),
            zz: self.j.iter().map(|(&(a, b), &c)| (a, b, c)).collect(),
            offset: self.offset,
            scale: self.scale,
        };
        serde_json::to_string_pretty(&doc).expect("hamiltonian serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: IsingDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: "<hamiltonian>".into(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let mut h = IsingHamiltonian::zero(doc.n);
        for (i, c) in doc.z {
            if i >= doc.n {
                return Err(Error::Validation(format!("Z term on qubit {i} of {}", doc.n)));
            }
            h.h[i] += c;
        }
        for (a, b, c) in doc.zz {
            if a >= doc.n || b >= doc.n || a == b {
                return Err(Error::Validation(format!("bad ZZ term ({a}, {b})")));
            }
            h.add_zz(a, b, c);
        }
        h.offset = doc.offset;
        h.scale = doc.scale;
        Ok(h)
    }
}

impl fmt::Display for IsingHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (label, c) in self.pauli_terms() {
            writeln!(f, "{c:+.4} {label}")?;
        }
        write!(f, "{:+.4} (offset)", self.offset)
    }
}

#[derive(Serialize, Deserialize)]
struct IsingDoc {
    n: usize,
    z: Vec<(usize, f64)>,
    zz: Vec<(usize, usize, f64)>,
    offset: f64,
    scale: f64,
}

/// Substitutes `x_i = (1 - z_i) / 2` into the QUBO.
pub fn to_ising(qubo: &Qubo) -> IsingHamiltonian {
    let mut ham = IsingHamiltonian::zero(qubo.num_variables());
    ham.offset = qubo.constant;
    for (i, &q) in qubo.linear.iter().enumerate() {
        ham.h[i] -= q / 2.0;
        ham.offset += q / 2.0;
    }
    for (&(a, b), &q) in &qubo.quadratic {
        let quarter = q / 4.0;
        ham.add_zz(a, b, quarter);
        ham.h[a] -= quarter;
        ham.h[b] -= quarter;
        ham.offset += quarter;
    }
    ham
}

pub fn normalize_coefficients(ham: &IsingHamiltonian) -> IsingHamiltonian {
    ham.normalized()
}
