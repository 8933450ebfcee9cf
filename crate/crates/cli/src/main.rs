//! `phaselift`: Monte-Carlo experiments and single-instance recovery.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use phaselift_core::harness::grid::{parse_constraint, parse_f64_list, parse_methods, parse_snr_list, parse_usize_grid};
use phaselift_core::harness::seed::{mix_seed, STREAM_INSTANCE, STREAM_NOISE};
use phaselift_core::harness::{
    run_experiment, run_single_recover, ExperimentSpec, HarnessError, Instance, LambdaPolicy, OutputFormat,
    PlantedInstance,
};
use phaselift_core::{DcaConfig64, Method};

#[derive(Parser)]
#[command(name = "phaselift", version, about = "Phase retrieval by lifted DCA / ADMM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean operator norm ||A|| over random ensembles (m = 4n unless --m is given).
    NormTable(NormTableArgs),
    /// Noiseless success rate against the number of measurements.
    PhaseTransition(PhaseTransitionArgs),
    /// Output SNR against input SNR with lambda in multiples of ||A|| ||e||.
    NoiseSweep(NoiseSweepArgs),
    /// Solve one instance read from a JSON file.
    Recover(RecoverArgs),
    /// Write a random planted instance as JSON.
    MakeInstance(MakeInstanceArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Trials per cell.
    #[arg(long)]
    trials: Option<usize>,
    /// Base seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct SolverArgs {
    /// Fixed penalty weight.
    #[arg(long, conflicts_with = "lambda_mu_factors")]
    lambda: Option<f64>,
    /// Comma-separated multiples of mu = ||A|| ||e||_2.
    #[arg(long)]
    lambda_mu_factors: Option<String>,
    /// complex, real or nonnegative.
    #[arg(long, default_value = "complex")]
    constraint: String,
    /// Outer (DCA) relative-change tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    #[arg(long)]
    eps_abs: Option<f64>,
    #[arg(long)]
    eps_rel: Option<f64>,
    /// ADMM iteration cap per subproblem.
    #[arg(long)]
    max_inner: Option<usize>,
}

#[derive(Args)]
struct OutputArgs {
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
struct NormTableArgs {
    #[arg(long, default_value = "32,64,128")]
    n: String,
    /// Measurement count override: one value, or one per n.
    #[arg(long)]
    m: Option<String>,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct PhaseTransitionArgs {
    #[arg(long, default_value = "32")]
    n: String,
    /// Single value, list, or start:step:stop.
    #[arg(long, default_value = "60:3:150")]
    m: String,
    #[arg(long, default_value = "phaseliftoff,phaselift,logdet")]
    methods: String,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct NoiseSweepArgs {
    #[arg(long, default_value = "32")]
    n: String,
    #[arg(long, default_value = "128")]
    m: String,
    #[arg(long, default_value = "phaseliftoff")]
    methods: String,
    /// Input SNR levels in dB; `inf` is noiseless.
    #[arg(long, default_value = "5,15,25,35,45,55")]
    snr: String,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct RecoverArgs {
    /// Instance JSON file.
    instance: PathBuf,
    #[arg(long, alias = "methods", default_value = "phaseliftoff")]
    method: String,
    #[command(flatten)]
    solver: SolverArgs,
    /// Report file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MakeInstanceArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Input SNR in dB (noiseless when omitted).
    #[arg(long)]
    snr: Option<f64>,
    /// Plant a real nonnegative signal instead of a complex one.
    #[arg(long)]
    nonnegative: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SolverArgs {
    fn config(&self) -> Result<DcaConfig64, HarnessError> {
        let mut cfg = DcaConfig64::default();
        if let Some(l) = self.lambda {
            cfg.lambda = l;
        }
        if let Some(v) = self.tol {
            cfg.tol = v;
        }
        if let Some(v) = self.max_outer {
            cfg.max_outer = v;
        }
        if let Some(v) = self.eps_abs {
            cfg.admm.eps_abs = v;
        }
        if let Some(v) = self.eps_rel {
            cfg.admm.eps_rel = v;
        }
        if let Some(v) = self.max_inner {
            cfg.admm.max_iters = v;
        }
        cfg.omega = parse_constraint(&self.constraint)?;
        cfg.validate().map_err(|e| HarnessError::Input(e.to_string()))?;
        Ok(cfg)
    }

    fn lambda_policy(&self, default: LambdaPolicy) -> Result<LambdaPolicy, HarnessError> {
        Ok(match (&self.lambda_mu_factors, self.lambda) {
            (Some(f), _) => LambdaPolicy::MuMultiples(parse_f64_list(f)?),
            (None, Some(l)) => LambdaPolicy::Fixed(l),
            (None, None) => default,
        })
    }
}

impl RunArgs {
    fn apply(&self, spec: &mut ExperimentSpec) {
        if let Some(t) = self.trials {
            spec.trials = t;
        }
        spec.base_seed = self.seed;
        spec.jobs = self.jobs;
    }
}

fn parse_single(s: &str, what: &str) -> Result<usize, HarnessError> {
    match parse_usize_grid(s)?.as_slice() {
        [v] => Ok(*v),
        _ => Err(HarnessError::Input(format!("{what} takes a single value here"))),
    }
}

/// Writes `bytes` to `out` (or stdout) only after the whole payload exists.
fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), HarnessError> {
    match out {
        Some(p) => fs::write(p, bytes).map_err(|e| HarnessError::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn run_table(spec: &ExperimentSpec, output: &OutputArgs) -> Result<(), HarnessError> {
    let format: OutputFormat = output.format.parse()?;
    let table = run_experiment(spec)?;
    let mut buf = Vec::new();
    table.write(&mut buf, format)?;
    emit(output.out.as_deref(), &buf)
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::NormTable(a) => {
            let mut spec = ExperimentSpec::norm_table(parse_usize_grid(&a.n)?);
            if let Some(m) = &a.m {
                spec.m_values = parse_usize_grid(m)?;
            }
            a.run.apply(&mut spec);
            run_table(&spec, &a.output)
        }
        Command::PhaseTransition(a) => {
            let mut spec = ExperimentSpec::phase_transition(0, parse_usize_grid(&a.m)?);
            spec.n_values = parse_usize_grid(&a.n)?;
            spec.methods = parse_methods(&a.methods)?;
            spec.solver = a.solver.config()?;
            spec.lambda_policy = a.solver.lambda_policy(LambdaPolicy::Fixed(spec.solver.lambda))?;
            a.run.apply(&mut spec);
            run_table(&spec, &a.output)
        }
        Command::NoiseSweep(a) => {
            let mut spec = ExperimentSpec::noise_sweep(
                parse_single(&a.n, "--n")?,
                parse_single(&a.m, "--m")?,
                parse_snr_list(&a.snr)?,
                vec![0.01, 0.2, 2.5, 50.0],
            );
            spec.methods = parse_methods(&a.methods)?;
            spec.solver = a.solver.config()?;
            spec.lambda_policy = a.solver.lambda_policy(spec.lambda_policy.clone())?;
            a.run.apply(&mut spec);
            run_table(&spec, &a.output)
        }
        Command::Recover(a) => {
            let text = fs::read_to_string(&a.instance)
                .map_err(|e| HarnessError::Input(format!("{}: {e}", a.instance.display())))?;
            let instance = Instance::from_json_str(&text)?;
            let method: Method = a
                .method
                .parse()
                .map_err(|e: phaselift_core::Error| HarnessError::Input(e.to_string()))?;
            let solver = a.solver.config()?;
            let policy = a.solver.lambda_policy(LambdaPolicy::Fixed(solver.lambda))?;
            let report = run_single_recover(&instance, method, solver.omega, &policy, &solver)?;
            let mut bytes = report.to_json_string().into_bytes();
            bytes.push(b'\n');
            emit(a.out.as_deref(), &bytes)
        }
        Command::MakeInstance(a) => {
            let seed = mix_seed(a.seed, &[STREAM_INSTANCE, a.n as u64, a.m as u64]);
            if a.n == 0 || a.m == 0 {
                return Err(HarnessError::Input("n and m must be positive".into()));
            }
            let planted = if a.nonnegative {
                PlantedInstance::sample_nonnegative(a.n, a.m, seed)?
            } else {
                PlantedInstance::sample(a.n, a.m, seed)?
            };
            let instance = Instance::planted(planted, a.snr, mix_seed(seed, &[STREAM_NOISE]))?;
            let mut bytes = instance.to_json_string().into_bytes();
            bytes.push(b'\n');
            emit(a.out.as_deref(), &bytes)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("phaselift: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
