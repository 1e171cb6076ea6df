//! Variational parameter search and the end-to-end solve pipeline.

use std::f64::consts::{FRAC_PI_2, PI};
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{
    approximation_ratio, decode, exact_vrp, feasibility_ratio, optimum_rank, RatioMode, RouteSet,
};
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::formulation::build_edge_model;
use crate::instance::VrpInstance;
use crate::ising::{to_ising, IsingHamiltonian};
use crate::qubo::{default_penalty, to_qubo, PenaltyConfig, DEFAULT_MULTIPLIER};
use crate::simulator::{qaoa_state_with, CostDiagonal, SampleCounts, MAX_QUBITS};

/// Edge length of the initial simplex along each coordinate.
pub const SIMPLEX_STEP: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub iteration: usize,
    pub point: Vec<f64>,
    pub value: f64,
    pub best: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub trace: Vec<Evaluation>,
}

/// Downhill simplex minimization with the standard coefficients
/// (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
///
/// Stops after `budget` evaluations or once the spread of simplex values
/// drops below `tol`. Non-finite objective values count as `+inf`.
pub fn nelder_mead<F>(mut f: F, start: &[f64], budget: usize, tol: f64) -> Result<NelderMeadResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let d = start.len();
    if d == 0 {
        return Err(Error::Parameter("need at least one parameter".into()));
    }
    if budget < d + 1 {
        return Err(Error::Parameter(format!(
            "budget {budget} cannot fill a simplex of {} vertices",
            d + 1
        )));
    }

    let mut trace = Vec::new();
    let mut best = f64::INFINITY;
    let mut eval = |x: &[f64], trace: &mut Vec<Evaluation>| -> f64 {
        let v = f(x);
        let v = if v.is_finite() { v } else { f64::INFINITY };
        best = best.min(v);
        trace.push(Evaluation {
            iteration: trace.len(),
            point: x.to_vec(),
            value: v,
            best,
        });
        v
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((start.to_vec(), eval(start, &mut trace)));
    for i in 0..d {
        let mut x = start.to_vec();
        x[i] += SIMPLEX_STEP;
        let v = eval(&x, &mut trace);
        simplex.push((x, v));
    }

    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[d].1 - simplex[0].1;
        if spread < tol || (simplex[0].1.is_infinite() && simplex[d].1.is_infinite()) {
            converged = spread < tol;
            break;
        }
        if trace.len() >= budget {
            break;
        }

        let centroid: Vec<f64> = (0..d)
            .map(|i| simplex[..d].iter().map(|(x, _)| x[i]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[d].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let reflected = along(1.0);
        let fr = eval(&reflected, &mut trace);
        if fr < simplex[0].1 {
            if trace.len() >= budget {
                simplex[d] = (reflected, fr);
                continue;
            }
            let expanded = along(2.0);
            let fe = eval(&expanded, &mut trace);
            simplex[d] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[d - 1].1 {
            simplex[d] = (reflected, fr);
            continue;
        }
        if trace.len() >= budget {
            continue;
        }
        // contraction: outside if the reflection beat the worst point
        let (contracted, fc) = if fr < simplex[d].1 {
            let x = along(0.5);
            let v = eval(&x, &mut trace);
            (x, v)
        } else {
            let x = along(-0.5);
            let v = eval(&x, &mut trace);
            (x, v)
        };
        if fc < simplex[d].1.min(fr) {
            simplex[d] = (contracted, fc);
            continue;
        }
        // shrink toward the best vertex
        let best_x = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            if trace.len() >= budget {
                break;
            }
            let x: Vec<f64> = best_x
                .iter()
                .zip(&vertex.0)
                .map(|(b, v)| b + 0.5 * (v - b))
                .collect();
            let v = eval(&x, &mut trace);
            *vertex = (x, v);
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (point, value) = simplex.swap_remove(0);
    Ok(NelderMeadResult {
        point,
        value,
        evaluations: trace.len(),
        converged,
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizeOptions {
    /// Objective evaluations per restart.
    pub budget: usize,
    /// Independent starts; the first uses the canonical angles, the rest
    /// are jittered around them.
    pub restarts: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            budget: 300,
            restarts: 3,
            tol: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QaoaOptimum {
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
    pub value: f64,
    /// Expectation at the canonical start `gamma = pi`, `beta = pi/2`.
    pub initial_value: f64,
    /// Index of the restart that produced the optimum.
    pub restart: usize,
    pub trace: Vec<Evaluation>,
}

/// Canonical starting angles: every `gamma = pi`, every `beta = pi/2`.
pub fn initial_parameters(p: usize) -> Vec<f64> {
    let mut x = vec![PI; p];
    x.extend(std::iter::repeat_n(FRAC_PI_2, p));
    x
}

/// Derives an independent seed for stream `stream` of `master`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng.next_u64()
}

/// Minimizes the exact expectation of `ham` over `2p` angles. Parameter
/// vectors are laid out as `[gamma_1..gamma_p, beta_1..beta_p]`.
pub fn optimize_qaoa(
    ham: &IsingHamiltonian,
    p: usize,
    options: &OptimizeOptions,
) -> Result<QaoaOptimum> {
    if p == 0 {
        return Err(Error::Parameter("QAOA depth must be at least 1".into()));
    }
    if options.restarts == 0 {
        return Err(Error::Parameter("need at least one restart".into()));
    }
    let cost = CostDiagonal::new(ham)?;
    let objective = |x: &[f64]| -> f64 {
        qaoa_state_with(&cost, &x[..p], &x[p..])
            .and_then(|s| s.expectation(&cost))
            .unwrap_or(f64::INFINITY)
    };
    let base = initial_parameters(p);
    let initial_value = objective(&base);

    let starts: Vec<Vec<f64>> = (0..options.restarts)
        .map(|r| {
            if r == 0 {
                return base.clone();
            }
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(options.seed, 1 + r as u64));
            let mut x = base.clone();
            for g in &mut x[..p] {
                *g += rng.gen_range(-1.0..1.0);
            }
            for b in &mut x[p..] {
                *b += rng.gen_range(-0.5..0.5);
            }
            x
        })
        .collect();

    let runs: Vec<NelderMeadResult> = starts
        .par_iter()
        .map(|x0| nelder_mead(objective, x0, options.budget, options.tol))
        .collect::<Result<_>>()?;

    let (restart, best) = runs
        .into_iter()
        .enumerate()
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)))
        .expect("at least one restart");
    Ok(QaoaOptimum {
        gammas: best.point[..p].to_vec(),
        betas: best.point[p..].to_vec(),
        value: best.value,
        initial_value,
        restart,
        trace: best.trace,
    })
}

/// Trace as CSV: `iteration,gamma_1..,beta_1..,expectation,best`.
pub fn trace_to_csv(trace: &[Evaluation], p: usize) -> String {
    let mut header = vec!["iteration".to_string()];
    header.extend((1..=p).map(|j| format!("gamma_{j}")));
    header.extend((1..=p).map(|j| format!("beta_{j}")));
    header.push("expectation".into());
    header.push("best".into());
    let mut out = header.join(",") + "\n";
    for e in trace {
        let mut row = vec![e.iteration.to_string()];
        row.extend(e.point.iter().map(|v| v.to_string()));
        row.push(e.value.to_string());
        row.push(e.best.to_string());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveConfig {
    pub p: usize,
    pub multiplier: f64,
    /// Explicit penalty weights; overrides `multiplier` when set.
    pub penalty: Option<PenaltyConfig>,
    pub normalize: bool,
    pub shots: u64,
    pub seed: u64,
    pub budget: usize,
    pub restarts: usize,
    pub tol: f64,
    pub top_k: usize,
    pub ratio_mode: RatioMode,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            p: 2,
            multiplier: DEFAULT_MULTIPLIER,
            penalty: None,
            normalize: false,
            shots: 10_000,
            seed: 0,
            budget: 300,
            restarts: 3,
            tol: 1e-8,
            top_k: 1000,
            ratio_mode: RatioMode::Distinct,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodedSample {
    pub bitstring: String,
    pub count: u64,
    pub feasible: bool,
    pub violations: Vec<String>,
    pub routes: Option<RouteSet>,
}

impl DecodedSample {
    fn new(bits: &BitString, count: u64, instance: &VrpInstance) -> Result<Self> {
        let n = instance.n();
        let d = decode(&bits.prefix(n * (n - 1)), instance)?;
        Ok(DecodedSample {
            bitstring: bits.to_string(),
            count,
            feasible: d.verdict.is_feasible(),
            violations: d.verdict.labels(),
            routes: d.routes,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub nodes: usize,
    pub vehicles: usize,
    pub qubits: usize,
    pub slack_qubits: usize,
    pub penalty: PenaltyConfig,
    pub normalized: bool,
    /// Factor mapping Hamiltonian units back to cost units.
    pub scale: f64,
    pub p: usize,
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Expectation at the canonical start, in cost units.
    pub initial_expectation: f64,
    /// Optimized expectation, in cost units.
    pub expectation: f64,
    pub shots: u64,
    pub seed: u64,
    pub distinct_samples: usize,
    /// Most frequent sample overall.
    pub top_sample: DecodedSample,
    /// Most frequent sample whose edge bits are feasible; its routes are the
    /// reported solution.
    pub best_feasible: Option<DecodedSample>,
    pub optimum: RouteSet,
    pub optimum_rank: Option<usize>,
    pub feasibility_ratio: f64,
    pub approximation_ratio: Option<f64>,
    pub restart: usize,
    pub evaluations: usize,
    #[serde(skip)]
    pub trace: Vec<Evaluation>,
    #[serde(skip)]
    pub counts: SampleCounts,
    #[serde(skip)]
    pub wall_ms: u128,
}

impl SolveReport {
    pub fn solution(&self) -> Option<&RouteSet> {
        self.best_feasible.as_ref().and_then(|s| s.routes.as_ref())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// True when two reports agree on everything but wall time.
    pub fn same_result(&self, other: &SolveReport) -> bool {
        SolveReport {
            wall_ms: 0,
            ..self.clone()
        } == SolveReport {
            wall_ms: 0,
            ..other.clone()
        }
    }
}

/// Compiled problem: QUBO penalty weights and the Hamiltonian QAOA runs on.
pub fn compile(
    instance: &VrpInstance,
    config: &SolveConfig,
) -> Result<(PenaltyConfig, crate::qubo::Qubo, IsingHamiltonian)> {
    let penalty = match config.penalty {
        Some(p) => p,
        None => default_penalty(instance, config.multiplier)?,
    }
    .with_normalize(config.normalize);
    let qubo = to_qubo(&build_edge_model(instance), &penalty)?;
    let mut ham = to_ising(&qubo);
    if config.normalize {
        ham = ham.normalized();
    }
    Ok((penalty, qubo, ham))
}

/// Formulate, compile, optimize, sample and decode.
pub fn solve(instance: &VrpInstance, config: &SolveConfig) -> Result<SolveReport> {
    let started = Instant::now();
    let (penalty, qubo, ham) = compile(instance, config)?;
    if ham.n > MAX_QUBITS {
        return Err(Error::Resource {
            what: "statevector simulation",
            required: ham.n,
            limit: MAX_QUBITS,
        });
    }

    let options = OptimizeOptions {
        budget: config.budget,
        restarts: config.restarts,
        tol: config.tol,
        seed: config.seed,
    };
    let opt = optimize_qaoa(&ham, config.p, &options)?;
    let cost = CostDiagonal::new(&ham)?;
    let state = qaoa_state_with(&cost, &opt.gammas, &opt.betas)?;
    let counts = state.sample(config.shots, derive_seed(config.seed, 0))?;

    let ranked = counts.ranked();
    let top_sample = DecodedSample::new(&ranked[0].0, ranked[0].1, instance)?;
    let mut best_feasible = None;
    for (bits, c) in &ranked {
        let s = DecodedSample::new(bits, *c, instance)?;
        if s.feasible {
            best_feasible = Some(s);
            break;
        }
    }

    let optimum = exact_vrp(instance)?;
    let expectation = opt.value * ham.scale;
    Ok(SolveReport {
        nodes: instance.n(),
        vehicles: instance.k(),
        qubits: qubo.num_variables(),
        slack_qubits: qubo.num_slack(),
        penalty,
        normalized: config.normalize,
        scale: ham.scale,
        p: config.p,
        gammas: opt.gammas,
        betas: opt.betas,
        initial_expectation: opt.initial_value * ham.scale,
        expectation,
        shots: config.shots,
        seed: config.seed,
        distinct_samples: counts.distinct(),
        top_sample,
        best_feasible,
        optimum_rank: optimum_rank(&counts, instance, optimum.cost)?,
        feasibility_ratio: feasibility_ratio(&counts, instance, config.top_k, config.ratio_mode)?,
        approximation_ratio: approximation_ratio(expectation, optimum.cost).ok(),
        optimum,
        restart: opt.restart,
        evaluations: opt.trace.len(),
        trace: opt.trace,
        counts,
        wall_ms: started.elapsed().as_millis(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::three_node_example;
    use crate::simulator::Statevector;

    #[test]
    fn bowl_minimum() {
        let r = nelder_mead(
            |x| (x[0] - 1.0).powi(2) + (x[1] - 2.0).powi(2),
            &[0.0, 0.0],
            200,
            1e-12,
        )
        .unwrap();
        assert!((r.point[0] - 1.0).abs() < 1e-4 && (r.point[1] - 2.0).abs() < 1e-4);
        assert!(r.evaluations <= 200);
    }

    #[test]
    fn flat_objective_stops_at_start() {
        let r = nelder_mead(|_| 3.0, &[0.5, -1.0, 2.0], 100, 1e-9).unwrap();
        assert!(r.converged);
        assert_eq!(r.point, vec![0.5, -1.0, 2.0]);
        assert_eq!(r.value, 3.0);
        assert_eq!(r.evaluations, 4);
    }

    #[test]
    fn deterministic_and_monotone_trace() {
        let f = |x: &[f64]| (3.0 * x[0]).sin() + x[1] * x[1] + 0.1 * x[0];
        let a = nelder_mead(f, &[1.0, 1.0], 80, 1e-10).unwrap();
        let b = nelder_mead(f, &[1.0, 1.0], 80, 1e-10).unwrap();
        assert_eq!(a, b);
        assert!(a.trace.windows(2).all(|w| w[1].best <= w[0].best));
    }

    #[test]
    fn non_finite_values_are_avoided() {
        let r = nelder_mead(
            |x| if x[0] > 0.1 { f64::NAN } else { (x[0] + 1.0).powi(2) },
            &[0.0],
            200,
            1e-12,
        )
        .unwrap();
        assert!((r.point[0] + 1.0).abs() < 1e-4);
    }

    #[test]
    fn bad_arguments() {
        assert!(nelder_mead(|_| 0.0, &[], 10, 1e-6).is_err());
        assert!(nelder_mead(|_| 0.0, &[0.0, 0.0], 2, 1e-6).is_err());
    }

    #[test]
    fn qaoa_improves_on_uniform_state() {
        let (_, _, ham) = compile(&three_node_example(), &SolveConfig::default()).unwrap();
        let opts = OptimizeOptions {
            budget: 300,
            restarts: 1,
            ..Default::default()
        };
        let opt = optimize_qaoa(&ham, 2, &opts).unwrap();
        assert_eq!(opt.gammas.len() + opt.betas.len(), 4);
        let cost = CostDiagonal::new(&ham).unwrap();
        let uniform = Statevector::uniform(6).unwrap().expectation(&cost).unwrap();
        assert!(opt.value < uniform);
        assert!(opt.value <= opt.initial_value);
        assert!(opt.trace.windows(2).all(|w| w[1].best <= w[0].best));
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(5, 3), derive_seed(5, 3));
    }

    #[test]
    fn solve_rejects_oversized_problem() {
        let inst = VrpInstance::generate_random(5, 2, 1).unwrap();
        let err = solve(&inst, &SolveConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Resource { required: 30, .. }), "{err}");
        assert!(err.to_string().contains("30"));
    }

    #[test]
    fn trace_csv_header() {
        let csv = trace_to_csv(&[], 2);
        assert_eq!(csv, "iteration,gamma_1,gamma_2,beta_1,beta_2,expectation,best\n");
    }
}
