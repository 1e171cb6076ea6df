use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use vrp_qaoa::analysis::{decode, RatioMode};
use vrp_qaoa::instance::three_node_example;
use vrp_qaoa::optimizer::{solve, trace_to_csv, SolveConfig};
use vrp_qaoa::resources::{comparison_table, comparison_to_csv, Formulation};
use vrp_qaoa::sweep::{penalty_sweep, sweep_to_csv};
use vrp_qaoa::{BitString, Error, VrpInstance};

const EXIT_USAGE: u8 = 1;
const EXIT_RESOURCE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(name = "vrp-qaoa", version, about = "QAOA workbench for small vehicle routing problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance with coordinates in [0,10)^2.
    Gen {
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        vehicles: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimize QAOA parameters, sample, and decode.
    Solve {
        #[command(flatten)]
        source: InstanceSource,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 2.0)]
        multiplier: f64,
        /// Divide the Hamiltonian by its largest coefficient before optimizing.
        #[arg(long, overrides_with = "no_normalize")]
        normalize: bool,
        #[arg(long = "no-normalize")]
        no_normalize: bool,
        /// Output directory for report.json, samples.csv and trace.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Qubit and depth comparison across formulations.
    Resources {
        /// Node counts: a range such as 3..6 (inclusive) or a list such as 3,4,5.
        #[arg(long, default_value = "3..6")]
        nodes: String,
        #[arg(long, value_delimiter = ',', default_value = "2")]
        vehicles: Vec<usize>,
        /// edge, time_expanded, route_count_only
        #[arg(long, value_delimiter = ',', default_value = "edge")]
        formulations: Vec<String>,
        #[arg(long, default_value_t = 2)]
        p: usize,
        /// Time-expanded horizon; defaults to the node count.
        #[arg(long)]
        horizon: Option<usize>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Feasibility ratio across penalty multipliers, normalization and seeds.
    Sweep {
        #[command(flatten)]
        source: InstanceSource,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1.0,1.5,2.0,2.5,3.0")]
        multipliers: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
        /// Restrict to one normalization setting; both by default.
        #[arg(long)]
        normalized_only: Option<bool>,
        /// Output directory for sweep.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Check a bitstring against an instance and print its routes.
    Decode {
        bitstring: String,
        #[command(flatten)]
        source: InstanceSource,
    },
}

#[derive(Args)]
struct InstanceSource {
    /// Instance JSON file.
    #[arg(long, conflicts_with_all = ["nodes", "example"])]
    instance: Option<PathBuf>,
    /// Generate a random instance with this many nodes (needs --vehicles).
    #[arg(long, requires = "vehicles", conflicts_with = "example")]
    nodes: Option<usize>,
    #[arg(long, requires = "nodes")]
    vehicles: Option<usize>,
    /// Seed for the generated instance.
    #[arg(long, default_value_t = 0)]
    instance_seed: u64,
    /// Use the built-in 3-node, 2-vehicle example.
    #[arg(long)]
    example: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 2)]
    p: usize,
    #[arg(long, default_value_t = 10_000)]
    shots: u64,
    /// Nelder-Mead evaluations per restart.
    #[arg(long, default_value_t = 300)]
    budget: usize,
    #[arg(long, default_value_t = 3)]
    restarts: usize,
    /// Master seed for restarts and sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    top_k: usize,
    #[arg(long, value_enum, default_value_t = Mode::Distinct)]
    ratio_mode: Mode,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Distinct,
    ShotMass,
}

enum Failure {
    Usage(String),
    Lib(Error),
    Infeasible(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CmdResult = std::result::Result<(), Failure>;

impl InstanceSource {
    fn load(&self) -> std::result::Result<VrpInstance, Failure> {
        match (&self.instance, self.nodes, self.vehicles, self.example) {
            (Some(path), _, _, _) => Ok(VrpInstance::read(path)?),
            (None, Some(n), Some(k), _) => Ok(VrpInstance::generate_random(n, k, self.instance_seed)?),
            (None, None, None, true) => Ok(three_node_example()),
            _ => Err(Failure::Usage(
                "give one of --instance, --nodes with --vehicles, or --example".into(),
            )),
        }
    }
}

impl RunArgs {
    fn config(&self) -> SolveConfig {
        SolveConfig {
            p: self.p,
            shots: self.shots,
            budget: self.budget,
            restarts: self.restarts,
            seed: self.seed,
            top_k: self.top_k,
            ratio_mode: match self.ratio_mode {
                Mode::Distinct => RatioMode::Distinct,
                Mode::ShotMass => RatioMode::ShotMass,
            },
            ..SolveConfig::default()
        }
    }
}

fn write(path: &Path, contents: &str) -> CmdResult {
    fs::write(path, contents).map_err(|e| Failure::Lib(Error::io(path, e)))
}

fn out_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| Failure::Lib(Error::io(dir, e)))
}

fn parse_nodes(spec: &str) -> std::result::Result<Vec<usize>, Failure> {
    let bad = || Failure::Usage(format!("cannot parse node list {spec:?}"));
    if let Some((a, b)) = spec.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim_start_matches('=').trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    spec.split(',')
        .map(|s| s.trim().parse().map_err(|_| bad()))
        .collect()
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Gen {
            nodes,
            vehicles,
            seed,
            out,
        } => {
            let inst = VrpInstance::generate_random(nodes, vehicles, seed)?;
            match out {
                Some(path) => inst.write(path)?,
                None => println!("{}", inst.to_json()),
            }
        }
        Command::Solve {
            source,
            run,
            multiplier,
            normalize,
            no_normalize,
            out,
        } => {
            let inst = source.load()?;
            let config = SolveConfig {
                multiplier,
                normalize: normalize && !no_normalize,
                ..run.config()
            };
            let start = Instant::now();
            let report = solve(&inst, &config)?;
            out_dir(&out)?;
            write(&out.join("report.json"), &report.to_json())?;
            write(&out.join("samples.csv"), &report.counts.to_csv())?;
            write(&out.join("trace.csv"), &trace_to_csv(&report.trace, config.p))?;
            match &report.best_feasible {
                Some(s) => println!(
                    "best feasible {} ({} shots): {}",
                    s.bitstring,
                    s.count,
                    s.routes.as_ref().map_or(String::new(), |r| r.to_string())
                ),
                None => println!("no feasible sample"),
            }
            println!("optimum {}", report.optimum);
            eprintln!("solved in {} ms", start.elapsed().as_millis());
        }
        Command::Resources {
            nodes,
            vehicles,
            formulations,
            p,
            horizon,
            out,
        } => {
            let sizes = parse_nodes(&nodes)?;
            let formulations = formulations
                .iter()
                .map(|f| f.parse::<Formulation>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Failure::Usage(e.to_string()))?;
            let rows = comparison_table(&sizes, &vehicles, &formulations, p, horizon)?;
            let csv = comparison_to_csv(&rows);
            match out {
                Some(path) => write(&path, &csv)?,
                None => print!("{csv}"),
            }
        }
        Command::Sweep {
            source,
            run,
            multipliers,
            seeds,
            normalized_only,
            out,
        } => {
            let inst = source.load()?;
            let normalize = match normalized_only {
                Some(z) => vec![z],
                None => vec![false, true],
            };
            let start = Instant::now();
            let records = penalty_sweep(&inst, &multipliers, &normalize, &seeds, &run.config())?;
            out_dir(&out)?;
            write(&out.join("sweep.csv"), &sweep_to_csv(&records))?;
            println!("{} runs written to {}", records.len(), out.join("sweep.csv").display());
            eprintln!("swept in {} ms", start.elapsed().as_millis());
        }
        Command::Decode { bitstring, source } => {
            let inst = source.load()?;
            let bits: BitString = bitstring
                .parse()
                .map_err(|e: Error| Failure::Usage(e.to_string()))?;
            let decoded = decode(&bits, &inst).map_err(|e| match e {
                Error::Dimension(m) => Failure::Usage(m),
                other => Failure::Lib(other),
            })?;
            match decoded.routes {
                Some(routes) => println!("feasible: {routes}"),
                None => {
                    return Err(Failure::Infeasible(decoded.verdict.labels().join(" ")));
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Infeasible(labels)) => {
            println!("infeasible: {labels}");
            ExitCode::from(EXIT_INFEASIBLE)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Resource { .. } => EXIT_RESOURCE,
                _ => EXIT_USAGE,
            })
        }
    }
}
