//! Command-line front end: solving single models and running the
//! sampling studies with CSV/JSON output.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use marginal::{
    build_ones, low_rank_uniformization, model_from_json, run_convergence_study, run_rank_study,
    run_sv_study, run_truncation_study, validate_model, write_conv_csv, write_rank_csv,
    write_sv_csv, write_trunc_csv, DimensionTree, Error, HtTensor, SolverConfig,
};

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "marginal",
    version,
    about = "Low-rank time-marginal distributions of automata-network Markov chains"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one model and report shift, iterations and reached ranks
    Solve(SolveArgs),
    /// Mean matricization singular values of densely solved samples
    SvStudy(SvArgs),
    /// Reached ranks over a (d, block size) grid of sampled models
    RankStudy(RankArgs),
    /// Rank sensitivity over a (tolerance, truncation) grid
    TruncStudy(TruncArgs),
    /// Residual histories of sampled models
    ConvStudy(ConvArgs),
    /// Check a model file against the structural invariants
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct SolveArgs {
    /// Model description (JSON)
    #[arg(long)]
    model: PathBuf,
    /// Stopping tolerance on the relative residual
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// Relative truncation tolerance per iteration
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    /// Uniformization shift; defaults to the separable-rate bound
    #[arg(long)]
    gamma: Option<f64>,
    /// Dimension tree: `canonical` or `perm:<1-based leaf list>`
    #[arg(long, default_value = "canonical")]
    tree: String,
    /// Write the run summary to this file instead of only stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format of `--out`
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
}

#[derive(Args)]
struct SvArgs {
    /// Number of automata (dense-solvable sizes only)
    #[arg(long)]
    d: usize,
    /// Block size of the sampled parameter matrices
    #[arg(long)]
    block_size: usize,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dimension tree: `canonical` or `perm:<1-based leaf list>`
    #[arg(long, default_value = "canonical")]
    tree: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
}

#[derive(Args)]
struct RankArgs {
    /// Comma-separated list of automata counts
    #[arg(long, value_delimiter = ',')]
    d: Vec<usize>,
    /// Comma-separated list of block sizes
    #[arg(long, value_delimiter = ',')]
    block_size: Vec<usize>,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
}

#[derive(Args)]
struct TruncArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    block_size: usize,
    /// Comma-separated list of stopping tolerances
    #[arg(long, value_delimiter = ',', default_values_t = [1e-4])]
    tol: Vec<f64>,
    /// Comma-separated list of truncation tolerances
    #[arg(long, value_delimiter = ',', default_values_t = [1e-8])]
    eps: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
}

#[derive(Args)]
struct ConvArgs {
    /// Comma-separated list of automata counts
    #[arg(long, value_delimiter = ',')]
    d: Vec<usize>,
    #[arg(long)]
    block_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
}

#[derive(Args)]
struct ValidateArgs {
    /// Model description (JSON)
    #[arg(long)]
    model: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::InvalidModel(_)
        | Error::InvalidParams(_)
        | Error::InvalidConfig(_)
        | Error::InvalidPermutation
        | Error::InvalidGamma { .. }
        | Error::TreeMismatch(_) => EXIT_INVALID,
        _ => EXIT_ERROR,
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.cmd {
        Command::Solve(a) => solve(a),
        Command::SvStudy(a) => sv_study(a),
        Command::RankStudy(a) => rank_study(a),
        Command::TruncStudy(a) => trunc_study(a),
        Command::ConvStudy(a) => conv_study(a),
        Command::Validate(a) => validate(a),
    }
}

fn read_model(path: &PathBuf) -> Result<marginal::SanModel, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidModel(format!("cannot read {}: {e}", path.display())))?;
    model_from_json(&text)
}

/// `canonical` or `perm:<comma-separated 1-based leaf order>`.
fn parse_tree(spec: &str, d: usize) -> Result<DimensionTree, Error> {
    if spec == "canonical" {
        return DimensionTree::balanced(d);
    }
    let Some(list) = spec.strip_prefix("perm:") else {
        return Err(Error::InvalidConfig(format!(
            "tree must be `canonical` or `perm:<list>`, got `{spec}`"
        )));
    };
    let order: Vec<usize> = list
        .split(',')
        .map(|f| {
            f.trim()
                .parse::<usize>()
                .ok()
                .and_then(|v| v.checked_sub(1))
                .ok_or(Error::InvalidPermutation)
        })
        .collect::<Result<_, _>>()?;
    DimensionTree::canonical(d, &order)
}

fn write_output(out: Option<&PathBuf>, bytes: &[u8]) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, bytes)
            .map_err(|e| Error::InvalidConfig(format!("cannot write {}: {e}", path.display()))),
        None => {
            io::stdout()
                .write_all(bytes)
                .map_err(|e| Error::InvalidConfig(format!("cannot write output: {e}")))
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<Vec<u8>, Error> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::InvalidConfig(format!("serialization failed: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[derive(serde::Serialize)]
struct SolveSummary {
    gamma: f64,
    iterations: usize,
    residual: Option<f64>,
    r_max: usize,
    r_eff: usize,
    mass: f64,
    converged: bool,
}

fn solve(a: SolveArgs) -> Result<u8, Error> {
    let model = read_model(&a.model)?;
    let tree = parse_tree(&a.tree, model.sizes.len())?;
    let cfg = SolverConfig {
        gamma: a.gamma,
        tol: a.tol,
        eps_rel: a.eps,
        ..SolverConfig::default()
    };
    let (p, report) = low_rank_uniformization(&model, &tree, &cfg)?;
    let ones = HtTensor::from_cp(&build_ones(&model)?, &tree)?;
    let (r_max, r_eff) = report.rank_history.last().copied().unwrap_or((1, 1));
    let summary = SolveSummary {
        gamma: report.gamma,
        iterations: report.iterations,
        residual: report.final_residual(),
        r_max,
        r_eff,
        mass: ones.inner(&p)?,
        converged: report.converged,
    };
    println!("gamma      = {}", summary.gamma);
    println!("iterations = {}", summary.iterations);
    match summary.residual {
        Some(r) => println!("residual   = {r}"),
        None => println!("residual   = n/a"),
    }
    println!("r_max      = {}", summary.r_max);
    println!("r_eff      = {}", summary.r_eff);
    println!("mass       = {}", summary.mass);
    println!("converged  = {}", summary.converged);
    if let Some(out) = &a.out {
        let bytes = match a.format {
            OutputFormat::Json => to_json(&summary)?,
            OutputFormat::Csv => {
                let mut s = String::from(
                    "# schema: solve v1\ngamma,iterations,residual,r_max,r_eff,mass,converged\n",
                );
                s.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    summary.gamma,
                    summary.iterations,
                    summary.residual.map_or("nan".into(), |r| r.to_string()),
                    summary.r_max,
                    summary.r_eff,
                    summary.mass,
                    summary.converged
                ));
                s.into_bytes()
            }
        };
        write_output(Some(out), &bytes)?;
    }
    Ok(if summary.converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

fn sv_study(a: SvArgs) -> Result<u8, Error> {
    let tree = parse_tree(&a.tree, a.d)?;
    let rows = run_sv_study(a.d, a.block_size, &tree, a.seed, a.samples)?;
    let bytes = match a.format {
        OutputFormat::Json => to_json(&rows)?,
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            write_sv_csv(&mut buf, &rows)
                .map_err(|e| Error::InvalidConfig(format!("cannot format CSV: {e}")))?;
            buf
        }
    };
    write_output(a.out.as_ref(), &bytes)?;
    Ok(EXIT_OK)
}

fn rank_study(a: RankArgs) -> Result<u8, Error> {
    if a.d.is_empty() || a.block_size.is_empty() {
        return Err(Error::InvalidConfig(
            "rank-study needs --d and --block-size lists".into(),
        ));
    }
    let study = run_rank_study(&a.d, &a.block_size, a.tol, a.eps, a.seed, a.samples)?;
    let bytes = match a.format {
        OutputFormat::Json => to_json(&study)?,
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            write_rank_csv(&mut buf, &study)
                .map_err(|e| Error::InvalidConfig(format!("cannot format CSV: {e}")))?;
            buf
        }
    };
    write_output(a.out.as_ref(), &bytes)?;
    Ok(EXIT_OK)
}

fn trunc_study(a: TruncArgs) -> Result<u8, Error> {
    let rows = run_truncation_study(a.d, a.block_size, &a.tol, &a.eps, a.seed, a.samples)?;
    let bytes = match a.format {
        OutputFormat::Json => to_json(&rows)?,
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            write_trunc_csv(&mut buf, &rows)
                .map_err(|e| Error::InvalidConfig(format!("cannot format CSV: {e}")))?;
            buf
        }
    };
    write_output(a.out.as_ref(), &bytes)?;
    Ok(EXIT_OK)
}

fn conv_study(a: ConvArgs) -> Result<u8, Error> {
    if a.d.is_empty() {
        return Err(Error::InvalidConfig("conv-study needs a --d list".into()));
    }
    let study = run_convergence_study(&a.d, a.block_size, a.tol, a.eps, a.seed, a.samples)?;
    let bytes = match a.format {
        OutputFormat::Json => to_json(&study)?,
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            write_conv_csv(&mut buf, &study)
                .map_err(|e| Error::InvalidConfig(format!("cannot format CSV: {e}")))?;
            buf
        }
    };
    write_output(a.out.as_ref(), &bytes)?;
    Ok(EXIT_OK)
}

fn validate(a: ValidateArgs) -> Result<u8, Error> {
    let text = fs::read_to_string(&a.model)
        .map_err(|e| Error::InvalidModel(format!("cannot read {}: {e}", a.model.display())))?;
    let model = match model_from_json(&text) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("invalid: {e}");
            return Ok(EXIT_INVALID);
        }
    };
    let violations = validate_model(&model);
    if violations.is_empty() {
        let states: u128 = model.sizes.iter().map(|&n| n as u128).product();
        println!(
            "valid: {} automata, {} states, {} transitions",
            model.sizes.len(),
            states,
            model.transitions.iter().map(|t| t.len()).sum::<usize>()
        );
        Ok(EXIT_OK)
    } else {
        for v in &violations {
            eprintln!("invalid: {v}");
        }
        Ok(EXIT_INVALID)
    }
}
