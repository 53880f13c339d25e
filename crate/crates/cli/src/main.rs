//! `qres`: simulate prepare-and-measure experiments, evaluate witnesses, run
//! rank-based detection and certify free bounds.

mod config;
mod report;
mod table;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qres_core::freesets::{FreeSetKind, FREE_SET_NAMES};
use qres_core::optimizer::{
    certify_bound, certify_qudit_coherence, estimate_gap, Constraint, InnerSearch, OptimizationConfig,
};
use qres_core::ranktest::{detect, DetectionMode, DEFAULT_RANK_TOL};
use qres_core::scenario::{simulate, CorrelationTable};
use qres_core::witnesses::{self, evaluate, WitnessSpec, WITNESS_NAMES};
use qres_core::{Error, ErrorKind, Result};

use crate::config::ExperimentConfig;
use crate::report::Report;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "qres", version, about = "Detect quantum resources from prepare-and-measure correlations")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "text")]
    format: Format,

    /// Write output to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for every randomized step.
    #[arg(long, global = true, env = "QRES_SEED")]
    seed: Option<u64>,

    /// Random restarts for optimization.
    #[arg(long, global = true)]
    restarts: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the correlation table p(j|x,y) of a configured realization.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate a witness on a configured realization or a table file.
    Witness {
        #[command(flatten)]
        input: Input,
        /// Witness name; defaults to the config's `witness`.
        #[arg(long)]
        witness: Option<String>,
        /// Reference table for the generic witness.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Margin of the generic witness; estimated from the free set when omitted.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Free set used to estimate the generic witness margin.
        #[arg(long = "free-set")]
        free_set: Option<String>,
    },
    /// Rank-based detection against a free set.
    Detect {
        #[command(flatten)]
        input: Input,
        #[arg(long = "free-set")]
        free_set: Option<String>,
        /// STATES, OPERATIONS or BOTH.
        #[arg(long)]
        mode: Option<String>,
        /// Relative singular-value threshold.
        #[arg(long = "rank-tol")]
        rank_tol: Option<f64>,
    },
    /// Numerically certify a witness's free bound.
    Certify {
        #[arg(long)]
        witness: String,
        #[arg(long = "free-set")]
        free_set: String,
        #[arg(long)]
        dim: Option<usize>,
        /// Constrained side: states, operations or both (default depends on the free set).
        #[arg(long)]
        constrain: Option<String>,
        /// Inner search: seesaw, nelder-mead or hybrid.
        #[arg(long)]
        search: Option<String>,
        /// Config file whose `optimizer` section supplies defaults.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// List witnesses and free sets.
    List,
}

#[derive(Debug, Args)]
struct Input {
    /// Experiment config (simulated before use).
    #[arg(long, conflicts_with = "table")]
    config: Option<PathBuf>,
    /// Correlation table file.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Hilbert-space dimension when the input does not state it.
    #[arg(long)]
    dim: Option<usize>,
}

struct Loaded {
    table: CorrelationTable,
    dimension: Option<usize>,
    config: Option<ExperimentConfig>,
}

impl Input {
    fn load(&self) -> Result<Loaded> {
        match (&self.config, &self.table) {
            (Some(path), None) => {
                let cfg = config::load(path)?;
                let table = simulate(&cfg.preparations, &cfg.instruments)?;
                Ok(Loaded { table, dimension: Some(self.dim.unwrap_or(cfg.dimension)), config: Some(cfg) })
            }
            (None, Some(path)) => {
                let file = table::load(path)?;
                Ok(Loaded { table: file.table, dimension: self.dim.or(file.dimension), config: None })
            }
            _ => Err(Error::InvalidInput("pass exactly one of --config or --table".into())),
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Validation => 1,
        ErrorKind::Physics => 2,
        ErrorKind::Convergence => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let report = match &cli.command {
        Command::Simulate { config } => cmd_simulate(config)?,
        Command::Witness { input, witness, reference, epsilon, free_set } => {
            cmd_witness(cli, input, witness.as_deref(), reference.as_deref(), *epsilon, free_set.as_deref())?
        }
        Command::Detect { input, free_set, mode, rank_tol } => {
            cmd_detect(input, free_set.as_deref(), mode.as_deref(), *rank_tol)?
        }
        Command::Certify { witness, free_set, dim, constrain, search, config } => cmd_certify(
            cli,
            witness,
            free_set,
            *dim,
            constrain.as_deref(),
            search.as_deref(),
            config.as_deref(),
        )?,
        Command::List => report::list(&WITNESS_NAMES, &FREE_SET_NAMES),
    };
    let rendered = report.render(cli.format);
    match &cli.out {
        Some(path) => std::fs::write(path, rendered)
            .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{rendered}");
            Ok(())
        }
    }
}

fn optimizer_config(cli: &Cli, cfg: Option<&ExperimentConfig>) -> OptimizationConfig {
    let mut opt = cfg.map_or_else(OptimizationConfig::default, |c| c.optimizer.apply(OptimizationConfig::default()));
    if let Some(seed) = cli.seed {
        opt.seed = seed;
    }
    if let Some(r) = cli.restarts {
        opt.restarts = r;
    }
    opt
}

fn cmd_simulate(path: &Path) -> Result<Report> {
    let cfg = config::load(path)?;
    let table = simulate(&cfg.preparations, &cfg.instruments)?;
    Ok(report::table(&table, cfg.dimension))
}

/// Dimension for a named witness when the input leaves it open.
fn witness_dim(name: &str, loaded: &Loaded) -> Result<usize> {
    if let Some(d) = loaded.dimension {
        return Ok(d);
    }
    match name {
        "coherence" | "imaginarity" | "magic" => Ok(2),
        "coherence-d" => {
            let n = loaded.table.num_y();
            let d = (n as f64).sqrt().round() as usize;
            if d * d == n {
                Ok(d)
            } else {
                Err(Error::InvalidInput(format!("{n} preparations is not d²; pass --dim")))
            }
        }
        _ => Err(Error::InvalidInput(format!("dimension unknown for witness `{name}`; pass --dim"))),
    }
}

fn cmd_witness(
    cli: &Cli,
    input: &Input,
    name: Option<&str>,
    reference: Option<&Path>,
    epsilon: Option<f64>,
    free_set: Option<&str>,
) -> Result<Report> {
    let loaded = input.load()?;
    let choice = loaded.config.as_ref().and_then(|c| c.witness.clone());
    let name = name
        .map(str::to_string)
        .or_else(|| choice.as_ref().map(|w| w.name.clone()))
        .ok_or_else(|| Error::InvalidInput("no witness given (use --witness or the config's `witness`)".into()))?;
    let spec: WitnessSpec = if name == "generic" {
        let reference = reference.ok_or_else(|| Error::InvalidInput("the generic witness needs --reference".into()))?;
        let ref_file = table::load(reference)?;
        let epsilon = match epsilon.or_else(|| choice.as_ref().and_then(|w| w.epsilon)) {
            Some(e) => e,
            None => {
                let set = free_set
                    .map(str::to_string)
                    .or_else(|| loaded.config.as_ref().and_then(|c| c.free_set.clone()))
                    .ok_or_else(|| Error::InvalidInput("pass --epsilon or --free-set to size the margin".into()))?;
                let dim = loaded
                    .dimension
                    .or(ref_file.dimension)
                    .ok_or_else(|| Error::InvalidInput("dimension unknown; pass --dim".into()))?;
                let free = config::free_set(&set, dim)?;
                let gap = estimate_gap(&ref_file.table, &free, &optimizer_config(cli, loaded.config.as_ref()))?;
                if gap > -1e-9 {
                    return Err(Error::InvalidInput(format!(
                        "reference table is reachable with free states (gap {gap:.3e}); no margin available"
                    )));
                }
                -gap
            }
        };
        witnesses::generic_witness(&ref_file.table, epsilon)?
    } else {
        witnesses::by_name(&name, witness_dim(&name, &loaded)?)?
    };
    let eval = evaluate(&spec, &loaded.table)?;
    Ok(report::evaluation(&eval, spec.nominal_bound))
}

fn cmd_detect(input: &Input, free_set: Option<&str>, mode: Option<&str>, rank_tol: Option<f64>) -> Result<Report> {
    let loaded = input.load()?;
    let cfg = loaded.config.as_ref();
    let set = free_set
        .map(str::to_string)
        .or_else(|| cfg.and_then(|c| c.free_set.clone()))
        .ok_or_else(|| Error::InvalidInput("no free set given (use --free-set or the config's `free_set`)".into()))?;
    let dim = loaded.dimension.ok_or_else(|| Error::InvalidInput("dimension unknown; pass --dim".into()))?;
    let free = config::free_set(&set, dim)?;
    let mode = match mode {
        Some(m) => m.parse()?,
        None => cfg.and_then(|c| c.detection_mode).unwrap_or(DetectionMode::Both),
    };
    let tol = rank_tol.or_else(|| cfg.and_then(|c| c.rank_tolerance)).unwrap_or(DEFAULT_RANK_TOL);
    let verdict = detect(&loaded.table, &free, mode, tol)?;
    Ok(report::detection(&verdict, free.name(), dim))
}

fn default_constraint(free: FreeSetKind) -> Constraint {
    match free {
        FreeSetKind::Stabilizer | FreeSetKind::MaximallyMixed => Constraint::StatesOnly,
        FreeSetKind::Incoherent | FreeSetKind::Real => Constraint::Both,
    }
}

fn cmd_certify(
    cli: &Cli,
    witness: &str,
    free_set: &str,
    dim: Option<usize>,
    constrain: Option<&str>,
    search: Option<&str>,
    config_path: Option<&Path>,
) -> Result<Report> {
    let cfg = config_path.map(config::load).transpose()?;
    let dim = dim.or(cfg.as_ref().map(|c| c.dimension)).unwrap_or(2);
    let mut opt = optimizer_config(cli, cfg.as_ref());
    if let Some(s) = search {
        opt.inner_search = s.parse::<InnerSearch>()?;
    }
    let free = config::free_set(free_set, dim)?;
    let constraint = match constrain {
        Some(c) => c.parse()?,
        None => default_constraint(free.kind()),
    };
    let spec = witnesses::by_name(witness, dim)?;
    let enumerate = witness == "coherence-d" && free.kind() == FreeSetKind::Incoherent && constraint == Constraint::Both;
    let bound = if enumerate {
        certify_qudit_coherence(dim, &opt)?
    } else {
        certify_bound(&spec, &free, constraint, &opt)?
    };
    let method = if enumerate { "permutation enumeration" } else { "randomized search" };
    Ok(report::certified(&bound, &spec, method))
}
