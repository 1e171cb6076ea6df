//! Decoding sampled bitstrings into routes, exact reference solvers, and
//! solution-quality metrics.

use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rayon::prelude::*;
use serde::Serialize;

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::formulation::{edge_index, edge_list};
use crate::instance::VrpInstance;
use crate::qubo::Qubo;
use crate::simulator::SampleCounts;

/// Largest QUBO the exhaustive minimizer will scan.
pub const MAX_EXHAUSTIVE_VARS: usize = 24;
/// Largest instance the route enumerator will accept.
pub const MAX_EXACT_NODES: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Violation {
    OutDegree(usize),
    InDegree(usize),
    DepotOut,
    DepotIn,
    Subtour(Vec<usize>),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::OutDegree(i) => write!(f, "OUT_DEGREE({i})"),
            Violation::InDegree(i) => write!(f, "IN_DEGREE({i})"),
            Violation::DepotOut => f.write_str("DEPOT_OUT"),
            Violation::DepotIn => f.write_str("DEPOT_IN"),
            Violation::Subtour(s) => {
                let items: Vec<String> = s.iter().map(|v| v.to_string()).collect();
                write!(f, "SUBTOUR({{{}}})", items.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeasibilityVerdict {
    pub violations: Vec<Violation>,
}

impl FeasibilityVerdict {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.violations.iter().map(ToString::to_string).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RouteSet {
    /// Each route starts and ends at the depot.
    pub routes: Vec<Vec<usize>>,
    pub cost: f64,
}

impl RouteSet {
    /// Builds a route set, ordering routes by their first customer.
    pub fn new(mut routes: Vec<Vec<usize>>, instance: &VrpInstance) -> Self {
        routes.sort_by_key(|r| r.get(1).copied());
        let cost = routes
            .iter()
            .flat_map(|r| r.windows(2))
            .map(|w| instance.weight(w[0], w[1]))
            .sum();
        RouteSet { routes, cost }
    }

    /// Edge-variable assignment that selects exactly these routes.
    pub fn encode(&self, n: usize) -> BitString {
        let mut bits = vec![false; n * (n - 1)];
        for w in self.routes.iter().flat_map(|r| r.windows(2)) {
            bits[edge_index(n, w[0], w[1])] = true;
        }
        BitString::new(bits)
    }
}

impl fmt::Display for RouteSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .routes
            .iter()
            .map(|r| {
                r.iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join("->")
            })
            .collect();
        write!(f, "{} (cost {:.3})", parts.join(", "), self.cost)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub edges: Vec<(usize, usize)>,
    pub verdict: FeasibilityVerdict,
    pub routes: Option<RouteSet>,
}

/// Interprets `bits` as the edge variables of `instance` in canonical order
/// and checks degrees and connectivity.
pub fn decode(bits: &BitString, instance: &VrpInstance) -> Result<Decoded> {
    let n = instance.n();
    let k = instance.k();
    if bits.len() != n * (n - 1) {
        return Err(Error::Dimension(format!(
            "expected {} edge bits for {n} nodes, got {}",
            n * (n - 1),
            bits.len()
        )));
    }
    let edges: Vec<(usize, usize)> = edge_list(n)
        .into_iter()
        .enumerate()
        .filter(|(v, _)| bits.get(*v))
        .map(|(_, e)| e)
        .collect();

    let mut out_deg = vec![0usize; n];
    let mut in_deg = vec![0usize; n];
    for &(i, j) in &edges {
        out_deg[i] += 1;
        in_deg[j] += 1;
    }

    let mut violations = Vec::new();
    violations.extend((1..n).filter(|&i| out_deg[i] != 1).map(Violation::OutDegree));
    violations.extend((1..n).filter(|&i| in_deg[i] != 1).map(Violation::InDegree));
    if out_deg[0] != k {
        violations.push(Violation::DepotOut);
    }
    if in_deg[0] != k {
        violations.push(Violation::DepotIn);
    }

    // Any cycle avoiding the depot lives inside a nontrivial strongly
    // connected component of the customer-only subgraph.
    let mut graph = DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for &(i, j) in edges.iter().filter(|&&(i, j)| i != 0 && j != 0) {
        graph.add_edge(nodes[i], nodes[j], ());
    }
    let mut subtours: Vec<Vec<usize>> = tarjan_scc(&graph)
        .into_iter()
        .filter(|c| c.len() >= 2)
        .map(|c| {
            let mut s: Vec<usize> = c.into_iter().map(|v| v.index()).collect();
            s.sort_unstable();
            s
        })
        .collect();
    subtours.sort();
    violations.extend(subtours.into_iter().map(Violation::Subtour));

    let verdict = FeasibilityVerdict { violations };
    let routes = verdict
        .is_feasible()
        .then(|| trace_routes(&edges, instance));
    Ok(Decoded {
        edges,
        verdict,
        routes,
    })
}

fn trace_routes(edges: &[(usize, usize)], instance: &VrpInstance) -> RouteSet {
    let n = instance.n();
    let mut next = vec![usize::MAX; n];
    for &(i, j) in edges.iter().filter(|e| e.0 != 0) {
        next[i] = j;
    }
    let routes = edges
        .iter()
        .filter(|e| e.0 == 0)
        .map(|&(_, first)| {
            let mut route = vec![0, first];
            let mut at = first;
            while at != 0 {
                at = next[at];
                route.push(at);
            }
            route
        })
        .collect();
    RouteSet::new(routes, instance)
}

/// Exhaustive QUBO minimum; ties go to the lexicographically smallest
/// bitstring (variable 0 first).
pub fn exact_qubo_min(qubo: &Qubo) -> Result<(BitString, f64)> {
    let n = qubo.num_variables();
    if n > MAX_EXHAUSTIVE_VARS {
        return Err(Error::Resource {
            what: "exhaustive QUBO scan",
            required: n,
            limit: MAX_EXHAUSTIVE_VARS,
        });
    }
    let better = |a: (usize, f64), b: (usize, f64)| -> (usize, f64) {
        if a.1 < b.1 {
            a
        } else if b.1 < a.1 {
            b
        } else {
            // lexicographically smaller has a 0 at the first differing bit
            let diff = a.0 ^ b.0;
            if diff == 0 || (a.0 >> diff.trailing_zeros()) & 1 == 0 {
                a
            } else {
                b
            }
        }
    };
    let (idx, value) = (0..1usize << n)
        .into_par_iter()
        .map(|idx| {
            let bits = BitString::from_index(idx, n);
            (idx, qubo.value_unchecked(bits.bits()))
        })
        .reduce(|| (0, f64::INFINITY), better);
    Ok((BitString::from_index(idx, n), value))
}

/// Optimal route set by enumerating every split of every customer ordering
/// into `k` nonempty routes.
pub fn exact_vrp(instance: &VrpInstance) -> Result<RouteSet> {
    let n = instance.n();
    if n > MAX_EXACT_NODES {
        return Err(Error::Resource {
            what: "exact route enumeration (nodes)",
            required: n,
            limit: MAX_EXACT_NODES,
        });
    }
    let k = instance.k();
    let mut order: Vec<usize> = (1..n).collect();
    let mut best: Option<(f64, Vec<Vec<usize>>)> = None;
    let mut cuts = Vec::with_capacity(k);
    permute(&mut order, 0, &mut |perm| {
        split_points(perm.len(), k, &mut cuts, &mut |cuts| {
            let mut cost = 0.0;
            let mut start = 0;
            for end in cuts.iter().copied().chain(std::iter::once(perm.len())) {
                let seg = &perm[start..end];
                cost += instance.weight(0, seg[0]) + instance.weight(seg[seg.len() - 1], 0);
                cost += seg.windows(2).map(|w| instance.weight(w[0], w[1])).sum::<f64>();
                start = end;
            }
            if best.as_ref().is_none_or(|(b, _)| cost < *b) {
                let mut routes = Vec::with_capacity(k);
                let mut start = 0;
                for end in cuts.iter().copied().chain(std::iter::once(perm.len())) {
                    let mut r = vec![0];
                    r.extend_from_slice(&perm[start..end]);
                    r.push(0);
                    routes.push(r);
                    start = end;
                }
                best = Some((cost, routes));
            }
        });
    });
    let (_, routes) = best.expect("at least one route split exists");
    Ok(RouteSet::new(routes, instance))
}

/// Visits permutations in lexicographic order of positions.
fn permute(items: &mut Vec<usize>, at: usize, visit: &mut dyn FnMut(&[usize])) {
    if at == items.len() {
        visit(items);
        return;
    }
    for i in at..items.len() {
        items.swap(at, i);
        permute(items, at + 1, visit);
        items.swap(at, i);
    }
}

/// Visits every choice of `parts - 1` increasing cut positions in `1..len`.
fn split_points(len: usize, parts: usize, cuts: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
    if cuts.len() == parts - 1 {
        visit(cuts);
        return;
    }
    let from = cuts.last().map_or(1, |c| c + 1);
    let remaining = parts - 1 - cuts.len();
    for c in from..=len.saturating_sub(remaining) {
        cuts.push(c);
        split_points(len, parts, cuts, visit);
        cuts.pop();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioMode {
    /// Fraction of the top-K distinct bitstrings that are feasible.
    #[default]
    Distinct,
    /// Fraction of the shots landing on those top-K bitstrings that are feasible.
    ShotMass,
}

/// Feasible share of the `top_k` most frequent distinct samples. Only the
/// edge bits are decoded; slack bits are ignored.
pub fn feasibility_ratio(
    counts: &SampleCounts,
    instance: &VrpInstance,
    top_k: usize,
    mode: RatioMode,
) -> Result<f64> {
    if top_k == 0 {
        return Err(Error::Parameter("top-K must be at least 1".into()));
    }
    let n = instance.n();
    let edge_bits = n * (n - 1);
    let ranked = counts.ranked();
    let mut feasible = 0u64;
    let mut total = 0u64;
    for (bits, c) in ranked.into_iter().take(top_k) {
        let ok = decode(&bits.prefix(edge_bits), instance)?.verdict.is_feasible();
        let weight = match mode {
            RatioMode::Distinct => 1,
            RatioMode::ShotMass => c,
        };
        total += weight;
        if ok {
            feasible += weight;
        }
    }
    if total == 0 {
        return Ok(0.0);
    }
    Ok(feasible as f64 / total as f64)
}

pub fn approximation_ratio(expectation: f64, optimum: f64) -> Result<f64> {
    if optimum == 0.0 {
        return Err(Error::UndefinedMetric(
            "approximation ratio with a zero optimum".into(),
        ));
    }
    Ok(expectation / optimum)
}

/// 1-based rank of the first sampled bitstring whose edge bits form an
/// optimal feasible route set.
pub fn optimum_rank(
    counts: &SampleCounts,
    instance: &VrpInstance,
    optimum_cost: f64,
) -> Result<Option<usize>> {
    let n = instance.n();
    let edge_bits = n * (n - 1);
    let tol = 1e-9 * optimum_cost.abs().max(1.0);
    for (rank, (bits, _)) in counts.ranked().into_iter().enumerate() {
        let d = decode(&bits.prefix(edge_bits), instance)?;
        if d.routes.is_some_and(|r| (r.cost - optimum_cost).abs() <= tol) {
            return Ok(Some(rank + 1));
        }
    }
    Ok(None)
}
