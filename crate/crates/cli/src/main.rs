use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coshare::format::{load_scenario, read_table_csv, save_scenario, scenario_to_json, write_metrics_csv, write_table_csv};
use coshare::game::{
    check_convexity, check_core_membership, check_superadditivity, enumerate_coalitions, CoalitionValueTable, DEFAULT_MAX_PLAYERS,
};
use coshare::generate::{generate_scenario, GeneratorConfig, Preset};
use coshare::metrics::MetricsReport;
use coshare::model::{Coalition, Scenario};
use coshare::oracle::{oracle_core_allocation, oracle_maximize, GridSpec};
use coshare::solver::{coalition_value, solve_core_allocation, solve_standalone, SolveReport, SolverSettings};
use coshare::utility::{ObjectiveWeights, UtilityConfig, UtilityFamily};
use coshare::Error;

const EXIT_OPERATIONAL: u8 = 1;
const EXIT_VIOLATION: u8 = 2;

#[derive(Parser)]
#[command(name = "coshare", version, about = "Coalition resource sharing between cloud providers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random scenario file.
    Generate(GenerateArgs),
    /// Solve one provider's standalone problem.
    SolveAlone {
        #[command(flatten)]
        input: ScenarioArgs,
        /// Provider number, starting at 1.
        #[arg(long)]
        provider: usize,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a coalition's value, or the grand-coalition core allocation when
    /// no coalition is given.
    SolveCoalition {
        #[command(flatten)]
        input: ScenarioArgs,
        /// Members as a comma-separated list of provider numbers, e.g. `1,3`.
        #[arg(long)]
        coalition: Option<String>,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve every coalition and write the payoff table as CSV.
    Enumerate {
        #[command(flatten)]
        input: ScenarioArgs,
        #[arg(long, default_value_t = DEFAULT_MAX_PLAYERS)]
        max_n: usize,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check superadditivity, convexity and core membership; exit 2 on any violation.
    Verify(VerifyArgs),
    /// Write `coalitions.csv` and `metrics.csv` into the output directory.
    Report {
        #[command(flatten)]
        input: ScenarioArgs,
        #[arg(long, default_value_t = DEFAULT_MAX_PLAYERS)]
        max_n: usize,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct GenerateArgs {
    /// Network setting 1-4: (3,3), (3,20), (6,6), (6,20) providers x applications.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4), conflicts_with_all = ["providers", "apps"])]
    preset: Option<u8>,
    #[arg(long)]
    providers: Option<usize>,
    /// Applications per provider.
    #[arg(long)]
    apps: Option<usize>,
    #[arg(long, default_value_t = 3)]
    resources: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "sigmoidal")]
    family: UtilityFamily,
    #[arg(long, default_value_t = 0.01)]
    mu: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Replace every provider's utility family.
    #[arg(long)]
    family: Option<UtilityFamily>,
    /// Replace every provider's sigmoid steepness.
    #[arg(long)]
    mu: Option<f64>,
}

#[derive(Args)]
struct SolverArgs {
    /// Projected-gradient stopping tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Seed for the random restarts.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    multistarts: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, required_unless_present = "table", conflicts_with = "table")]
    scenario: Option<PathBuf>,
    /// Check a payoff table CSV instead of solving a scenario.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long)]
    family: Option<UtilityFamily>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MAX_PLAYERS)]
    max_n: usize,
    /// Also compare every value against the grid oracle with this step (tiny scenarios only).
    #[arg(long)]
    step: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
}

enum Outcome {
    Done,
    Violations,
}

#[derive(Debug)]
enum Failure {
    Core(Error),
    NotConverged(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Core(e.into())
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::NotConverged(what) => write!(f, "solver did not converge: {what}"),
            Failure::Usage(msg) => write!(f, "{msg}"),
        }
    }
}

impl ScenarioArgs {
    fn load(&self) -> Result<Scenario, Failure> {
        load_with_overrides(&self.scenario, self.family, self.mu)
    }
}

fn load_with_overrides(path: &Path, family: Option<UtilityFamily>, mu: Option<f64>) -> Result<Scenario, Failure> {
    let mut s = load_scenario(path)?;
    if family.is_some() || mu.is_some() {
        for p in &mut s.providers {
            let family = family.unwrap_or(p.utility.family);
            p.utility = match family {
                UtilityFamily::Linear => UtilityConfig::linear(),
                UtilityFamily::Sigmoidal => UtilityConfig::sigmoidal(mu.unwrap_or(p.utility.mu)),
            };
            p.utility.check().map_err(Failure::Usage)?;
        }
    }
    Ok(s)
}

impl SolverArgs {
    fn settings(&self) -> Result<SolverSettings, Failure> {
        let mut s = SolverSettings::default();
        if let Some(t) = self.tol {
            s.tol_kkt = t;
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(m) = self.multistarts {
            s.multistarts = m;
        }
        if let Some(m) = self.max_iters {
            s.max_iters = m;
        }
        s.check()?;
        Ok(s)
    }
}

fn writer(out: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json(report: &SolveReport, out: Option<&Path>) -> Result<(), Failure> {
    let mut w = writer(out)?;
    serde_json::to_writer_pretty(&mut w, report).map_err(Error::from)?;
    writeln!(w)?;
    Ok(())
}

fn require_converged(report: &SolveReport, what: &str) -> Result<(), Failure> {
    if report.converged {
        Ok(())
    } else {
        Err(Failure::NotConverged(what.to_string()))
    }
}

fn parse_coalition(text: &str, providers: usize) -> Result<Coalition, Failure> {
    let mut members = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let n: usize = part.parse().map_err(|_| Failure::Usage(format!("bad provider number {part:?}")))?;
        if n == 0 || n > providers {
            return Err(Failure::Usage(format!("provider {n} outside 1..={providers}")));
        }
        members.push(n - 1);
    }
    if members.is_empty() {
        return Err(Failure::Usage("empty coalition".into()));
    }
    Ok(Coalition::from_members(members))
}

fn generate(args: &GenerateArgs) -> Result<Outcome, Failure> {
    let mut cfg = match (args.preset, args.providers, args.apps) {
        (Some(p), _, _) => GeneratorConfig::preset(Preset::from_number(p).expect("clap limits the range")),
        (None, Some(n), Some(m)) => GeneratorConfig::new(n, m),
        _ => return Err(Failure::Usage("give --preset, or both --providers and --apps".into())),
    };
    cfg.resources = args.resources;
    cfg.utility = match args.family {
        UtilityFamily::Linear => UtilityConfig::linear(),
        UtilityFamily::Sigmoidal => UtilityConfig::sigmoidal(args.mu),
    };
    let s = generate_scenario(&cfg, args.seed)?;
    match &args.out {
        Some(path) => save_scenario(&s, path)?,
        None => println!("{}", scenario_to_json(&s)?),
    }
    Ok(Outcome::Done)
}

fn verify_table(table: &CoalitionValueTable, grand_payoffs: &[f64]) -> Result<bool, Failure> {
    let mut ok = true;
    let sa = check_superadditivity(table)?;
    println!("superadditivity: {} violation(s)", sa.len());
    for v in &sa {
        println!("  v({}) = {} < v({}) + v({}) = {}", v.left.union(v.right), v.union_value, v.left, v.right, v.parts_value);
    }
    ok &= sa.is_empty();
    let cv = check_convexity(table)?;
    println!("convexity: {} violation(s)", cv.len());
    for v in &cv {
        println!(
            "  player {} adds {} to {} but {} to {}",
            v.player + 1,
            v.marginal_smaller,
            v.smaller,
            v.marginal_larger,
            v.larger
        );
    }
    ok &= cv.is_empty();
    let core = check_core_membership(table, grand_payoffs)?;
    println!(
        "core: in_core={} individually_rational={} group_rational={} blocking={}",
        core.in_core,
        core.individually_rational,
        core.group_rational,
        core.blocking_coalitions.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
    );
    ok &= core.in_core;
    Ok(ok)
}

fn verify(args: &VerifyArgs) -> Result<Outcome, Failure> {
    if let Some(path) = &args.table {
        let table = read_table_csv(File::open(path)?)?;
        let grand = table.get(table.grand()).ok_or_else(|| Error::IncompleteTable(table.grand().to_string()))?;
        let payoffs = grand.payoffs.clone();
        return Ok(if verify_table(&table, &payoffs)? { Outcome::Done } else { Outcome::Violations });
    }
    let path = args.scenario.as_ref().expect("clap requires --scenario without --table");
    let s = load_with_overrides(path, args.family, args.mu)?;
    let settings = args.solver.settings()?;
    let w = ObjectiveWeights::from_scenario(&s);
    let table = enumerate_coalitions(&s, &w, &settings, args.max_n)?;
    let core = solve_core_allocation(&s, &w, &settings)?;
    require_converged(&core, "core allocation")?;
    let mut ok = verify_table(&table, &core.per_provider_payoff)?;

    if let Some(step) = args.step {
        let grid = GridSpec { step, ..GridSpec::default() };
        let close = |a: f64, b: f64| (a - b).abs() <= f64::max(1e-3, 0.01 * b.abs());
        let mut mismatches = 0;
        for (c, entry) in table.iter() {
            let oracle = oracle_maximize(&s, c, &w, &grid)?.value;
            if !close(entry.value, oracle) {
                println!("  oracle mismatch for {c}: solver {} oracle {oracle}", entry.value);
                mismatches += 1;
            }
        }
        let oracle_core = oracle_core_allocation(&s, &w, &grid)?.value;
        if !close(core.objective, oracle_core) {
            println!("  oracle mismatch for the core allocation: solver {} oracle {oracle_core}", core.objective);
            mismatches += 1;
        }
        println!("oracle (step {step}): {mismatches} mismatch(es)");
        ok &= mismatches == 0;
    }
    Ok(if ok { Outcome::Done } else { Outcome::Violations })
}

fn report(s: &Scenario, settings: &SolverSettings, max_n: usize, dir: &Path) -> Result<Outcome, Failure> {
    let w = ObjectiveWeights::from_scenario(s);
    let table = enumerate_coalitions(s, &w, settings, max_n)?;
    let alone: Vec<SolveReport> = (0..s.num_providers()).map(|n| solve_standalone(s, n, settings)).collect::<Result<_, _>>()?;
    let core = solve_core_allocation(s, &w, settings)?;
    require_converged(&core, "core allocation")?;
    std::fs::create_dir_all(dir)?;
    write_table_csv(&table, File::create(dir.join("coalitions.csv"))?)?;
    write_metrics_csv(&MetricsReport::build(s, &alone, &core)?, File::create(dir.join("metrics.csv"))?)?;
    Ok(Outcome::Done)
}

fn run(cli: Cli) -> Result<Outcome, Failure> {
    match cli.command {
        Command::Generate(args) => generate(&args),
        Command::SolveAlone { input, provider, solver, out } => {
            let s = input.load()?;
            if provider == 0 || provider > s.num_providers() {
                return Err(Failure::Usage(format!("provider {provider} outside 1..={}", s.num_providers())));
            }
            let rep = solve_standalone(&s, provider - 1, &solver.settings()?)?;
            write_json(&rep, out.as_deref())?;
            require_converged(&rep, &format!("provider {provider}"))?;
            Ok(Outcome::Done)
        }
        Command::SolveCoalition { input, coalition, solver, out } => {
            let s = input.load()?;
            let settings = solver.settings()?;
            let w = ObjectiveWeights::from_scenario(&s);
            let rep = match coalition {
                Some(text) => coalition_value(&s, parse_coalition(&text, s.num_providers())?, &w, &settings)?,
                None => solve_core_allocation(&s, &w, &settings)?,
            };
            write_json(&rep, out.as_deref())?;
            require_converged(&rep, &format!("coalition {}", rep.coalition))?;
            Ok(Outcome::Done)
        }
        Command::Enumerate { input, max_n, solver, out } => {
            let s = input.load()?;
            let table = enumerate_coalitions(&s, &ObjectiveWeights::from_scenario(&s), &solver.settings()?, max_n)?;
            write_table_csv(&table, writer(out.as_deref())?)?;
            Ok(Outcome::Done)
        }
        Command::Verify(args) => verify(&args),
        Command::Report { input, max_n, solver, out } => report(&input.load()?, &solver.settings()?, max_n, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Violations) => ExitCode::from(EXIT_VIOLATION),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_OPERATIONAL)
        }
    }
}
