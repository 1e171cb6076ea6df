//! VRP instances: a depot (node 0), customers, a vehicle count and a
//! directed weight matrix.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side length of the square that random coordinates are drawn from.
pub const COORD_BOX: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VrpInstance {
    n: usize,
    k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coords: Option<Vec<[f64; 2]>>,
    weights: Vec<Vec<f64>>,
}

impl VrpInstance {
    /// Random instance with coordinates uniform on `[0, 10)^2` and squared
    /// Euclidean edge weights.
    pub fn generate_random(n: usize, k: usize, seed: u64) -> Result<Self> {
        check_counts(n, k)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.gen_range(0.0..COORD_BOX), rng.gen_range(0.0..COORD_BOX)])
            .collect();
        let weights = squared_distances(&coords);
        Ok(VrpInstance {
            n,
            k,
            coords: Some(coords),
            weights,
        })
    }

    pub fn from_coords(coords: Vec<[f64; 2]>, k: usize) -> Result<Self> {
        check_counts(coords.len(), k)?;
        if coords.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Validation("coordinates must be finite".into()));
        }
        let weights = squared_distances(&coords);
        Ok(VrpInstance {
            n: coords.len(),
            k,
            coords: Some(coords),
            weights,
        })
    }

    /// Instance from an explicit weight matrix. Asymmetric matrices are
    /// accepted since every edge is directed.
    pub fn from_weights(weights: Vec<Vec<f64>>, k: usize) -> Result<Self> {
        let inst = VrpInstance {
            n: weights.len(),
            k,
            coords: None,
            weights,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        check_counts(self.n, self.k)?;
        if self.weights.len() != self.n {
            return Err(Error::Dimension(format!(
                "n = {} but weights has {} rows",
                self.n,
                self.weights.len()
            )));
        }
        for (i, row) in self.weights.iter().enumerate() {
            if row.len() != self.n {
                return Err(Error::Dimension(format!(
                    "weights row {i} has {} entries, expected {}",
                    row.len(),
                    self.n
                )));
            }
            for (j, &w) in row.iter().enumerate() {
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::Validation(format!(
                        "weight w[{i}][{j}] = {w} is not a finite nonnegative number"
                    )));
                }
                if i == j && w != 0.0 {
                    return Err(Error::Validation(format!(
                        "diagonal weight w[{i}][{i}] = {w} must be zero"
                    )));
                }
            }
        }
        if let Some(coords) = &self.coords {
            if coords.len() != self.n {
                return Err(Error::Dimension(format!(
                    "n = {} but {} coordinates given",
                    self.n,
                    coords.len()
                )));
            }
            let expected = squared_distances(coords);
            if expected != self.weights {
                return Err(Error::Validation(
                    "weights do not match squared distances of coords".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn coords(&self) -> Option<&[[f64; 2]]> {
        self.coords.as_deref()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i][j]
    }

    /// Sum of absolute off-diagonal weights.
    pub fn total_weight(&self) -> f64 {
        (0..self.n)
            .flat_map(|i| (0..self.n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| self.weights[i][j].abs())
            .sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let inst: VrpInstance = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}

impl fmt::Display for VrpInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "VRP instance: {} nodes, {} vehicles", self.n, self.k)?;
        for row in &self.weights {
            let cells: Vec<String> = row.iter().map(|w| format!("{w:9.3}")).collect();
            writeln!(f, "  {}", cells.join(" "))?;
        }
        Ok(())
    }
}

fn check_counts(n: usize, k: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Parameter(format!("need at least 2 nodes, got {n}")));
    }
    if k < 1 || k > n - 1 {
        return Err(Error::Parameter(format!(
            "vehicle count must be in 1..={}, got {k}",
            n - 1
        )));
    }
    Ok(())
}

fn squared_distances(coords: &[[f64; 2]]) -> Vec<Vec<f64>> {
    coords
        .iter()
        .map(|a| {
            coords
                .iter()
                .map(|b| {
                    let dx = a[0] - b[0];
                    let dy = a[1] - b[1];
                    dx * dx + dy * dy
                })
                .collect()
        })
        .collect()
}

/// Small symmetric 3-node, 2-vehicle instance used throughout the tests.
pub fn three_node_example() -> VrpInstance {
    let (a, b, c) = (61.323, 4.732, 42.895);
    VrpInstance::from_weights(vec![vec![0.0, a, b], vec![a, 0.0, c], vec![b, c, 0.0]], 2)
        .expect("example instance is valid")
}
