//! Penalty-multiplier and normalization sweeps over repeated solves.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::instance::VrpInstance;
use crate::optimizer::{solve, SolveConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub multiplier: f64,
    pub normalized: bool,
    pub seed: u64,
    pub feasibility_ratio: f64,
    /// Final expectation in cost units.
    pub expectation: f64,
    pub optimum_rank: Option<usize>,
    pub wall_ms: u128,
}

pub const SWEEP_CSV_HEADER: &str =
    "multiplier,normalized,seed,feasibility_ratio,expectation,optimum_rank,wall_ms";

/// One solve per `(multiplier, normalize, seed)`, records in that nesting
/// order. `base` supplies every other solve setting.
pub fn penalty_sweep(
    instance: &VrpInstance,
    multipliers: &[f64],
    normalize: &[bool],
    seeds: &[u64],
    base: &SolveConfig,
) -> Result<Vec<SweepRecord>> {
    let configs: Vec<(f64, bool, u64)> = multipliers
        .iter()
        .flat_map(|&m| {
            normalize
                .iter()
                .flat_map(move |&z| seeds.iter().map(move |&s| (m, z, s)))
        })
        .collect();
    configs
        .par_iter()
        .map(|&(multiplier, normalized, seed)| {
            let config = SolveConfig {
                multiplier,
                normalize: normalized,
                seed,
                penalty: None,
                ..base.clone()
            };
            let report = solve(instance, &config)?;
            Ok(SweepRecord {
                multiplier,
                normalized,
                seed,
                feasibility_ratio: report.feasibility_ratio,
                expectation: report.expectation,
                optimum_rank: report.optimum_rank,
                wall_ms: report.wall_ms,
            })
        })
        .collect()
}

pub fn sweep_to_csv(records: &[SweepRecord]) -> String {
    let mut out = format!("{SWEEP_CSV_HEADER}\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.multiplier,
            r.normalized,
            r.seed,
            r.feasibility_ratio,
            r.expectation,
            r.optimum_rank.map_or(String::new(), |v| v.to_string()),
            r.wall_ms
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::three_node_example;

    #[test]
    fn record_count_is_cartesian() {
        let base = SolveConfig {
            budget: 40,
            restarts: 1,
            shots: 500,
            ..Default::default()
        };
        let recs =
            penalty_sweep(&three_node_example(), &[1.5, 2.0], &[false, true], &[1, 2], &base).unwrap();
        assert_eq!(recs.len(), 8);
        assert!(recs.iter().all(|r| (0.0..=1.0).contains(&r.feasibility_ratio)));
        let order: Vec<(f64, bool, u64)> =
            recs.iter().map(|r| (r.multiplier, r.normalized, r.seed)).collect();
        assert_eq!(order[0], (1.5, false, 1));
        assert_eq!(order[3], (1.5, true, 2));
        assert_eq!(order[7], (2.0, true, 2));
        let csv = sweep_to_csv(&recs);
        assert_eq!(csv.lines().next().unwrap(), SWEEP_CSV_HEADER);
        assert_eq!(csv.lines().count(), 9);
    }
}
