use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use clrlab::harness::{
    generate_potential_with_strength, run_experiment, Experiment, ExperimentConfig,
    ExperimentReport, Gate, PotentialStyle,
};
use clrlab::lattice::{Boundary, GridSpec};
use clrlab::Error;

#[derive(Parser)]
#[command(name = "clrlab", version, about = "Seeded experiments on eigenvalue bounds for matrix-valued Schrödinger operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Semiclassical constant table and the minimised excess factor, as CSV.
    Constants {
        #[command(flatten)]
        run: RunArgs,
        /// Largest dimension in the table.
        #[arg(long)]
        dmax: Option<u32>,
    },
    /// Time-ordered Jensen inequality on random admissible functions.
    Jensen(RunArgs),
    /// Hölder inequality for traces of products.
    Holder(RunArgs),
    /// Closed forms and commuting collapse vs direct enumeration.
    TimeorderConsistency(RunArgs),
    /// Resolvent identity, time quadrature and Trotter convergence.
    Trotter(RunArgs),
    /// Birman–Schwinger counting and the F_a bound.
    BsEquivalence(RunArgs),
    /// Count over the continuum bound under grid refinement (monitor only).
    ClrSurvey(RunArgs),
    /// Riesz means vs Lieb–Thirring right-hand sides (monitor only).
    LtMoments(RunArgs),
    /// Jensen gap for hinge functions (monitor only).
    RemarkProbe(RunArgs),
    /// Potential files.
    Potential {
        #[command(subcommand)]
        command: PotentialCommand,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON config; the experiment field may be omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Potential JSON to use instead of generated instances.
    #[arg(long)]
    potential: Option<PathBuf>,
    /// Directory for report.json, records.csv and summary.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum PotentialCommand {
    /// Generate a seeded potential and write it as JSON.
    Gen(GenArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_parser = parse_style)]
    style: PotentialStyle,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 16)]
    points: usize,
    /// Grid spacing; defaults to a box of extent 4.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long = "fiber", short = 'N', default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = clrlab::harness::generate::DEFAULT_STRENGTH)]
    strength: f64,
    #[arg(long)]
    periodic: bool,
}

fn parse_style(s: &str) -> Result<PotentialStyle, String> {
    PotentialStyle::ALL
        .into_iter()
        .find(|p| p.name() == s)
        .ok_or_else(|| format!("unknown style {s}; expected gaussian-bumps, random-psd-field or scalar-embed"))
}

const EXIT_GATE_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Config(_) | Error::Io(_) | Error::Json(_) => EXIT_CONFIG,
                _ => EXIT_GATE_FAILURE,
            };
            ExitCode::from(code)
        }
    }
}

fn dispatch(command: Command) -> clrlab::Result<u8> {
    let (experiment, run, dmax) = match command {
        Command::Potential {
            command: PotentialCommand::Gen(args),
        } => return generate(args),
        Command::Constants { run, dmax } => (Experiment::Constants, run, dmax),
        Command::Jensen(r) => (Experiment::Jensen, r, None),
        Command::Holder(r) => (Experiment::Holder, r, None),
        Command::TimeorderConsistency(r) => (Experiment::TimeorderConsistency, r, None),
        Command::Trotter(r) => (Experiment::Trotter, r, None),
        Command::BsEquivalence(r) => (Experiment::BsEquivalence, r, None),
        Command::ClrSurvey(r) => (Experiment::ClrSurvey, r, None),
        Command::LtMoments(r) => (Experiment::LtMoments, r, None),
        Command::RemarkProbe(r) => (Experiment::RemarkProbe, r, None),
    };
    let mut config = load_config(experiment, run.config.as_deref())?;
    if let Some(s) = run.seed {
        config.seed = s;
    }
    if let Some(t) = run.trials {
        config.trials = Some(t);
    }
    if let Some(p) = run.potential {
        config.potential = Some(p);
    }
    if let Some(o) = run.out {
        config.out = Some(o);
    }
    if let Some(d) = dmax {
        config.caps.dmax = d;
    }
    let report = run_experiment(&config)?;
    if let Some(dir) = &config.out {
        report.write(dir)?;
    }
    if experiment == Experiment::Constants {
        print_constants(&report);
    } else {
        print_summary(&report);
    }
    Ok(if report.summary.pass { 0 } else { EXIT_GATE_FAILURE })
}

fn load_config(experiment: Experiment, path: Option<&std::path::Path>) -> clrlab::Result<ExperimentConfig> {
    let Some(path) = path else {
        return Ok(ExperimentConfig::new(experiment));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
    match obj.get("experiment").and_then(|v| v.as_str()) {
        Some(name) if name != experiment.name() => {
            return Err(Error::Config(format!(
                "config is for {name}, but {} was requested",
                experiment.name()
            )))
        }
        _ => {
            obj.insert("experiment".into(), experiment.name().into());
        }
    }
    ExperimentConfig::from_json(&value.to_string())
}

fn print_constants(report: &ExperimentReport) {
    println!("gamma,d,L_cl,R_bound");
    let mut minimum = None;
    for r in &report.records {
        let v = &r.values;
        if let (Some(g), Some(d), Some(l), Some(b)) = (v.get("gamma"), v.get("d"), v.get("L_cl"), v.get("R_bound")) {
            println!("{g},{d},{l:.15e},{b}");
        }
        if let (Some(a), Some(r)) = (v.get("a_star"), v.get("R_star")) {
            minimum = Some((*a, *r));
        }
    }
    if let Some((a, r)) = minimum {
        println!();
        println!("a_star,R_star");
        println!("{a:.8},{r:.8}");
    }
    if !report.summary.pass {
        print_summary(report);
    }
}

fn print_summary(report: &ExperimentReport) {
    let s = &report.summary;
    println!("experiment: {}", report.config.experiment.name());
    println!("trials: {}  errors: {}", s.trials, s.errors);
    for c in &s.checks {
        let gate = match c.gate {
            Gate::Hard => "hard",
            Gate::Monitor => "monitor",
        };
        println!(
            "  {:<28} {:<7} {:>6}/{:<6} min margin {:+.3e} (seed {})",
            c.name, gate, c.passed, c.count, c.min_margin, c.min_margin_seed
        );
    }
    if let Some(r) = report.records.iter().find(|r| r.error.is_some()) {
        println!("  first error (trial {}): {}", r.trial, r.error.as_deref().unwrap_or(""));
    }
    println!("{}", if s.pass { "PASS" } else { "FAIL" });
}

fn generate(args: GenArgs) -> clrlab::Result<u8> {
    let boundary = if args.periodic { Boundary::Periodic } else { Boundary::Dirichlet };
    let h = args.h.unwrap_or(4.0 / (args.points + 1) as f64);
    let grid = GridSpec::new(vec![args.points; args.d], h, boundary)?;
    let v = generate_potential_with_strength(args.seed, &grid, args.n, args.style, args.strength)?;
    v.write_json(&args.out)?;
    println!(
        "wrote {} ({} sites, N = {}, sha256 {})",
        args.out.display(),
        grid.sites(),
        args.n,
        clrlab::harness::sha256_hex(&v.to_json()?)
    );
    Ok(0)
}
