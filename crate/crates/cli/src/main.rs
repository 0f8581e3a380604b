//! `eigx`: eigenvalue experiments with nonconforming elements and Richardson
//! extrapolation.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver failure,
//! 4 verification failure.

use clap::{Args, Parser, Subcommand};
use eigx_core::bench::{
    gamma_report, reference_eigenvalues, run_example, run_verification_suite, CrackBc,
    ElementChoice, ExampleId, ExperimentConfig, Extrapolation, Reference,
};
use eigx_core::mesh::{build_initial, refine_uniform, DomainId};
use eigx_core::Error;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

#[derive(Parser)]
#[command(name = "eigx", version, about = "Finite element eigenvalue laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one of the benchmark examples and write a CSV table.
    Run(RunArgs),
    /// Execute the identity-verification suite and write a JSON report.
    Verify(VerifyArgs),
    /// Print the Taylor constants of the RT interpolation error.
    Gamma(GammaArgs),
    /// Mesh utilities.
    Mesh(MeshArgs),
    /// Compute (and cache) conforming-P3 reference eigenvalues.
    Reference(ReferenceArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file; command-line flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// square | square_nonuniform | jump | crack
    #[arg(long)]
    example: Option<String>,
    /// cr | ecr | p3
    #[arg(long)]
    element: Option<String>,
    #[arg(long)]
    levels: Option<u32>,
    #[arg(long)]
    num_eigs: Option<usize>,
    /// Known convergence rate for two-mesh extrapolation; omit to use the
    /// three-mesh formula only.
    #[arg(long)]
    alpha: Option<f64>,
    /// Reference level for the conforming-P3 eigenvalues (jump/crack).
    #[arg(long)]
    reference_level: Option<u32>,
    /// neumann | dirichlet condition on the crack faces.
    #[arg(long)]
    crack_bc: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Report path (JSON); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GammaArgs {
    #[arg(long)]
    example: String,
    #[arg(long, default_value_t = 3)]
    level: u32,
}

#[derive(Args)]
struct MeshArgs {
    #[command(subcommand)]
    command: MeshCommand,
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Export a built-in mesh as JSON.
    Dump(MeshDumpArgs),
}

#[derive(Args)]
struct MeshDumpArgs {
    #[arg(long)]
    example: String,
    #[arg(long, default_value_t = 1)]
    level: u32,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReferenceArgs {
    #[arg(long)]
    example: String,
    #[arg(long)]
    level: u32,
    #[arg(long, default_value_t = 1)]
    num_eigs: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    crack_bc: Option<String>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_VERIFY: u8 = 4;

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::SingularMatrix { .. }
        | Error::NotPositiveDefinite { .. }
        | Error::NoConvergence { .. } => EXIT_SOLVER,
        _ => EXIT_CONFIG,
    }
}

fn parse_crack_bc(s: &str) -> Result<CrackBc, Error> {
    match s {
        "neumann" => Ok(CrackBc::Neumann),
        "dirichlet" => Ok(CrackBc::Dirichlet),
        other => Err(Error::Config(format!("unknown crack condition `{other}`"))),
    }
}

fn build_run_config(args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut config = match &args.config {
        Some(path) => serde_json::from_str::<ExperimentConfig>(&std::fs::read_to_string(path)?)?,
        None => {
            let example = ExampleId::from_str(args.example.as_deref().ok_or_else(|| {
                Error::Config("either --config or --example is required".to_string())
            })?)?;
            ExperimentConfig::default_for(example)
        }
    };
    if let Some(example) = &args.example {
        config.example = ExampleId::from_str(example)?;
    }
    if let Some(element) = &args.element {
        config.element = ElementChoice::from_str(element)?;
    }
    if let Some(levels) = args.levels {
        config.levels = levels;
    }
    if let Some(k) = args.num_eigs {
        config.num_eigs = k;
    }
    if let Some(alpha) = args.alpha {
        config.extrapolation = Extrapolation::KnownAlpha(alpha);
    }
    if let Some(level) = args.reference_level {
        config.reference = Reference::P3Level(level);
    }
    if let Some(bc) = &args.crack_bc {
        config.crack_bc = parse_crack_bc(bc)?;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if args.out.is_some() {
        config.out = args.out.clone();
    }
    if args.svg.is_some() {
        config.svg = args.svg.clone();
    }
    if args.cache_dir.is_some() {
        config.cache_dir = args.cache_dir.clone();
    }
    Ok(config)
}

fn cmd_run(args: &RunArgs) -> Result<u8, Error> {
    let config = build_run_config(args)?;
    let out = run_example(&config)?;
    match &config.out {
        Some(path) => eprintln!("wrote {} rows to {}", out.rows.len(), path.display()),
        None => print!("{}", out.csv),
    }
    if let Some(path) = &config.svg {
        eprintln!("wrote plot to {}", path.display());
    }
    Ok(0)
}

fn cmd_verify(args: &VerifyArgs) -> Result<u8, Error> {
    let report = run_verification_suite(args.seed);
    let json = report.to_json();
    match &args.out {
        Some(path) => std::fs::write(path, &json)?,
        None => println!("{json}"),
    }
    for check in &report.checks {
        eprintln!(
            "{} {:<32} residual {:>12.3e}  tol {:>9.1e}",
            if check.pass { "PASS" } else { "FAIL" },
            check.id,
            check.max_residual,
            check.tolerance
        );
    }
    Ok(if report.passed { 0 } else { EXIT_VERIFY })
}

fn cmd_gamma(args: &GammaArgs) -> Result<u8, Error> {
    let example = ExampleId::from_str(&args.example)?;
    let report = gamma_report(example, args.level);
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(0)
}

fn cmd_mesh_dump(args: &MeshDumpArgs) -> Result<u8, Error> {
    let domain = DomainId::from_str(&args.example)?;
    let mut mesh = build_initial(domain);
    while mesh.level < args.level {
        mesh = refine_uniform(&mesh);
    }
    let json = serde_json::to_string_pretty(&mesh.to_json())?;
    match &args.out {
        Some(path) => std::fs::write(path, json)?,
        None => println!("{json}"),
    }
    Ok(0)
}

fn cmd_reference(args: &ReferenceArgs) -> Result<u8, Error> {
    let example = ExampleId::from_str(&args.example)?;
    let crack_bc = match &args.crack_bc {
        Some(s) => parse_crack_bc(s)?,
        None => CrackBc::Neumann,
    };
    let dir = args.cache_dir.clone().unwrap_or_else(|| PathBuf::from(".eigx-cache"));
    let values =
        reference_eigenvalues(example, args.level, args.num_eigs, args.seed, &dir, crack_bc)?;
    for (i, v) in values.iter().enumerate() {
        println!("lambda_{} = {v:.12}", i + 1);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Gamma(args) => cmd_gamma(args),
        Command::Mesh(args) => match &args.command {
            MeshCommand::Dump(dump) => cmd_mesh_dump(dump),
        },
        Command::Reference(args) => cmd_reference(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
