//! Exact statevector simulation of QAOA circuits.
//!
//! Basis index bit `i` holds variable `i`; rendered bitstrings put variable 0
//! first.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::ising::IsingHamiltonian;

/// Largest register the simulator will allocate (2^24 amplitudes, 256 MiB).
pub const MAX_QUBITS: usize = 24;

/// Below this many qubits the loops stay on one thread.
const PARALLEL_THRESHOLD: usize = 14;

fn check_qubits(n: usize) -> Result<()> {
    if n > MAX_QUBITS {
        return Err(Error::Resource {
            what: "statevector simulation",
            required: n,
            limit: MAX_QUBITS,
        });
    }
    Ok(())
}

/// Offset-free energies of every basis state of a Hamiltonian.
#[derive(Debug, Clone)]
pub struct CostDiagonal {
    n: usize,
    offset: f64,
    energies: Vec<f64>,
}

impl CostDiagonal {
    pub fn new(ham: &IsingHamiltonian) -> Result<Self> {
        check_qubits(ham.n)?;
        let dim = 1usize << ham.n;
        let energies = if ham.n >= PARALLEL_THRESHOLD {
            (0..dim)
                .into_par_iter()
                .map(|x| ham.energy_of_index(x))
                .collect()
        } else {
            (0..dim).map(|x| ham.energy_of_index(x)).collect()
        };
        Ok(CostDiagonal {
            n: ham.n,
            offset: ham.offset,
            energies,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    /// `|+>^n`: every amplitude equal to `2^{-n/2}`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("need at least one qubit".into()));
        }
        check_qubits(n)?;
        let dim = 1usize << n;
        let a = (dim as f64).sqrt().recip();
        Ok(Statevector {
            n,
            amps: vec![Complex64::new(a, 0.0); dim],
        })
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        check_qubits(n)?;
        let dim = 1usize << n;
        if index >= dim {
            return Err(Error::Parameter(format!("basis index {index} out of range")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Statevector { n, amps })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let dim = amps.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::Dimension(format!(
                "amplitude count {dim} is not a power of two"
            )));
        }
        let n = dim.trailing_zeros() as usize;
        check_qubits(n)?;
        Ok(Statevector { n, amps })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        compensated_sum(self.amps.iter().map(|a| a.norm_sqr()))
    }

    /// Multiplies each amplitude by `exp(-i gamma E(x))`, offset excluded.
    pub fn apply_phase_separator(&mut self, cost: &CostDiagonal, gamma: f64) -> Result<()> {
        if cost.n != self.n {
            return Err(Error::Dimension(format!(
                "state has {} qubits, Hamiltonian has {}",
                self.n, cost.n
            )));
        }
        let rotate = |(a, &e): (&mut Complex64, &f64)| {
            *a *= Complex64::from_polar(1.0, -gamma * e);
        };
        if self.n >= PARALLEL_THRESHOLD {
            self.amps
                .par_iter_mut()
                .zip(cost.energies.par_iter())
                .for_each(rotate);
        } else {
            self.amps.iter_mut().zip(cost.energies.iter()).for_each(rotate);
        }
        Ok(())
    }

    /// Applies `exp(-i beta X)` to every qubit.
    pub fn apply_mixer(&mut self, beta: f64) {
        let c = Complex64::new(beta.cos(), 0.0);
        let ms = Complex64::new(0.0, -beta.sin());
        let parallel = self.n >= PARALLEL_THRESHOLD;
        for q in 0..self.n {
            let stride = 1usize << q;
            let pair = |chunk: &mut [Complex64]| {
                let (lo, hi) = chunk.split_at_mut(stride);
                for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                    let (x, y) = (*a, *b);
                    *a = c * x + ms * y;
                    *b = ms * x + c * y;
                }
            };
            if parallel {
                self.amps
                    .par_chunks_mut(2 * stride)
                    .with_min_len((1 << 12) / stride.min(1 << 12))
                    .for_each(pair);
            } else {
                self.amps.chunks_mut(2 * stride).for_each(pair);
            }
        }
    }

    /// `<psi|H|psi>` including the offset.
    pub fn expectation(&self, cost: &CostDiagonal) -> Result<f64> {
        if cost.n != self.n {
            return Err(Error::Dimension(format!(
                "state has {} qubits, Hamiltonian has {}",
                self.n, cost.n
            )));
        }
        let e = compensated_sum(
            self.amps
                .iter()
                .zip(&cost.energies)
                .map(|(a, e)| a.norm_sqr() * e),
        );
        Ok(e + cost.offset)
    }

    /// Multinomial draw of `shots` measurements in the computational basis.
    pub fn sample(&self, shots: u64, seed: u64) -> Result<SampleCounts> {
        if shots == 0 {
            return Err(Error::Parameter("shots must be at least 1".into()));
        }
        let dist = WeightedIndex::new(self.probabilities())
            .map_err(|e| Error::Validation(format!("cannot sample state: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = BTreeMap::new();
        for _ in 0..shots {
            *counts.entry(dist.sample(&mut rng)).or_insert(0u64) += 1;
        }
        Ok(SampleCounts {
            n: self.n,
            shots,
            seed,
            counts,
        })
    }
}

/// Neumaier summation; keeps reductions deterministic and accurate.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Prepares `prod_j U_M(beta_j) U_C(gamma_j) |+>^n`.
pub fn qaoa_state_with(cost: &CostDiagonal, gammas: &[f64], betas: &[f64]) -> Result<Statevector> {
    if gammas.len() != betas.len() {
        return Err(Error::Dimension(format!(
            "{} gammas but {} betas",
            gammas.len(),
            betas.len()
        )));
    }
    let mut state = Statevector::uniform(cost.n)?;
    for (&g, &b) in gammas.iter().zip(betas) {
        state.apply_phase_separator(cost, g)?;
        state.apply_mixer(b);
    }
    Ok(state)
}

pub fn qaoa_state(ham: &IsingHamiltonian, gammas: &[f64], betas: &[f64]) -> Result<Statevector> {
    qaoa_state_with(&CostDiagonal::new(ham)?, gammas, betas)
}

pub fn expectation(state: &Statevector, ham: &IsingHamiltonian) -> Result<f64> {
    state.expectation(&CostDiagonal::new(ham)?)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SampleCounts {
    pub n: usize,
    pub shots: u64,
    pub seed: u64,
    /// Basis index to frequency.
    pub counts: BTreeMap<usize, u64>,
}

impl SampleCounts {
    pub fn from_pairs(n: usize, pairs: &[(&str, u64)]) -> Result<Self> {
        let mut counts = BTreeMap::new();
        for &(s, c) in pairs {
            let b: BitString = s.parse()?;
            if b.len() != n {
                return Err(Error::Dimension(format!("bitstring {s} is not {n} bits")));
            }
            *counts.entry(b.to_index()).or_insert(0) += c;
        }
        Ok(SampleCounts {
            n,
            shots: counts.values().sum(),
            seed: 0,
            counts,
        })
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    /// Distinct outcomes by descending count, ties in lexicographic bitstring order.
    pub fn ranked(&self) -> Vec<(BitString, u64)> {
        let mut rows: Vec<(String, BitString, u64)> = self
            .counts
            .iter()
            .map(|(&idx, &c)| {
                let b = BitString::from_index(idx, self.n);
                (b.to_string(), b, c)
            })
            .collect();
        rows.sort_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.cmp(&b.0)));
        rows.into_iter().map(|(_, b, c)| (b, c)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bitstring,count\n");
        for (b, c) in self.ranked() {
            out.push_str(&format!("{b},{c}\n"));
        }
        out
    }
}
