use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crossdiff::experiments::{parse_config, report, run_plan, validate_plan, System, WORKERS_ENV};
use crossdiff::kernels::{build_with_points, MollifierSpec, RieszSpec, TABLE_POINTS};
use crossdiff::nonlinearity::{cutoff_build, GrowthFamily, GrowthSpec};
use crossdiff::{Error, Result};

#[derive(Parser)]
#[command(name = "crossdiff", version, about = "Mean-field particle and PDE laboratory")]
struct Cli {
    /// Worker threads; 0 uses every core. Overrides `run.workers`.
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Identity,
    Power,
    Rational,
    Constant,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate a mollified Riesz kernel as CSV (r, value, d1, d2).
    KernelTable {
        #[arg(long, default_value_t = 3)]
        dimension: usize,
        #[arg(long, default_value_t = 1.0)]
        exponent: f64,
        /// Kernel constant `C`.
        #[arg(long, default_value_t = 1.0, conflicts_with = "classical")]
        coefficient: f64,
        /// Use the Riesz-potential normalization for `C`.
        #[arg(long)]
        classical: bool,
        #[arg(long)]
        eta: f64,
        #[arg(long, default_value_t = TABLE_POINTS)]
        points: usize,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Tabulate the cutoff nonlinearity as CSV (r, f, d1, d2, d3).
    NonlinearityTable {
        #[arg(long, value_enum, default_value_t = Family::Identity)]
        family: Family,
        #[arg(long, default_value_t = 1.0)]
        coefficient: f64,
        #[arg(long, default_value_t = 2.0)]
        exponent: f64,
        #[arg(long, default_value_t = 0.0)]
        value: f64,
        #[arg(long)]
        growth: Option<f64>,
        #[arg(long)]
        gamma: f64,
        /// Right end of the table; 1.25/γ by default.
        #[arg(long)]
        r_max: Option<f64>,
        #[arg(long, default_value_t = 1001)]
        points: usize,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Solve the mollified (and optionally the limit) PDE.
    PdeSolve(RunArgs),
    /// Run the interacting particle system alone.
    ParticleRun(RunArgs),
    /// Run the coupled triple over the configured particle counts.
    CouplingSweep(RunArgs),
    /// Measure law-of-large-numbers deviations over the particle counts.
    LlnSweep(RunArgs),
    /// Aggregate a run directory into summary.csv and rates.csv.
    Report { dir: PathBuf },
}

#[derive(clap::Args)]
struct RunArgs {
    config: PathBuf,
    /// Output directory; overrides `run.output`.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_err(p, e))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn io_err(p: &Path, e: io::Error) -> Error {
    Error::Format(format!("{}: {e}", p.display()))
}

/// Writes one line to stdout; a closed pipe ends output quietly.
fn say(line: std::fmt::Arguments) -> Result<()> {
    match writeln!(io::stdout().lock(), "{line}") {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(Error::Format(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn run(workers: Option<usize>, system: System, args: RunArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config).map_err(|e| io_err(&args.config, e))?;
    let config = parse_config(&text)?;
    if config.run.system != system {
        return Err(Error::Config(format!(
            "{} declares system \"{}\"; this subcommand runs \"{}\"",
            args.config.display(),
            config.run.system.name(),
            system.name()
        )));
    }
    let plan = validate_plan(config)?;
    let output = args.output.unwrap_or_else(|| PathBuf::from(&plan.config.run.output));
    let workers = workers.unwrap_or(plan.config.run.workers);
    let outcome = run_plan(&plan, &output, workers)?;
    let rep = report(&outcome.output)?;
    for s in &rep.summaries {
        let est: Vec<String> = s
            .estimands
            .iter()
            .filter(|(k, _)| !k.ends_with("_se"))
            .map(|(k, v)| format!("{k}={v:.4e}"))
            .collect();
        say(format_args!("N={} eta={:.4} gamma={:.4} {}", s.particles, s.eta, s.gamma, est.join(" ")))?;
    }
    for flag in rep.flags() {
        say(format_args!("{flag}"))?;
    }
    say(format_args!("wrote {}", outcome.output.display()))
}

fn execute(cli: Cli) -> Result<()> {
    let workers = cli.workers;
    match cli.command {
        Command::KernelTable {
            dimension,
            exponent,
            coefficient,
            classical,
            eta,
            points,
            ref output,
        } => {
            let spec = if classical {
                RieszSpec::classical(dimension, exponent)?
            } else {
                RieszSpec::new(dimension, exponent, coefficient)?
            };
            let table = build_with_points(&spec, &MollifierSpec::bump(eta)?, points)?;
            let mut w = sink(output)?;
            table.write_csv(&mut w).and_then(|_| w.flush()).map_err(|e| Error::Format(e.to_string()))
        }
        Command::NonlinearityTable {
            family,
            coefficient,
            exponent,
            value,
            growth,
            gamma,
            r_max,
            points,
            ref output,
        } => {
            let family = match family {
                Family::Identity => GrowthFamily::Identity,
                Family::Power => GrowthFamily::Power { coefficient, exponent },
                Family::Rational => GrowthFamily::Rational,
                Family::Constant => GrowthFamily::Constant(value),
            };
            let base = GrowthSpec::new(family, growth.unwrap_or_else(|| family.default_growth()))?;
            let f = cutoff_build(base, gamma)?;
            let mut w = sink(output)?;
            f.write_csv(&mut w, r_max.unwrap_or(1.25 / gamma), points)
                .and_then(|_| w.flush())
                .map_err(|e| Error::Format(e.to_string()))
        }
        Command::Report { ref dir } => {
            let rep = report(dir)?;
            for r in &rep.rates {
                match &r.fit {
                    Some(f) => say(format_args!(
                        "{} {}: slope {:.4} ± {:.4} (R² {:.3}, {} points)",
                        r.system, r.estimand, f.slope, f.slope_error, f.r_squared, r.points
                    ))?,
                    None => say(format_args!("{} {}: no fit ({} positive points)", r.system, r.estimand, r.points))?,
                }
            }
            for flag in rep.flags() {
                say(format_args!("{flag}"))?;
            }
            Ok(())
        }
        Command::PdeSolve(a) => run(workers, System::PdeOnly, a),
        Command::ParticleRun(a) => run(workers, System::ParticlesOnly, a),
        Command::CouplingSweep(a) => run(workers, System::Triple, a),
        Command::LlnSweep(a) => run(workers, System::Lln, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = execute(cli);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
