mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use geoflow::Model;

use config::{Command, InitialCondition, RunConfig};

#[derive(Parser)]
#[command(name = "geoflow", version, about = "Two-component CH/DP geodesic flows, curvature and rigid-body checks")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the Eulerian equations.
    Evolve(PdeArgs),
    /// Integrate the equations together with the flow map (φ, f).
    Flowmap(FlowArgs),
    /// Curvature of one plane spanned by cosine directions.
    Curvature(CurvatureArgs),
    /// Curvature of every cosine plane up to a maximal mode.
    CurvatureScan(ScanArgs),
    /// Free rigid body with attitude.
    Rigidbody(RigidBodyArgs),
    /// Run the built-in invariant suite.
    Verify(VerifyArgs),
    /// Run from a JSON config or a previous run.json.
    Run(RunArgs),
}

#[derive(Args)]
struct PdeArgs {
    /// ch, dp, 2ch or 2dp.
    #[arg(long)]
    model: Model,
    /// zero | cosmode:m:amp | pair:m1:a1:m2:a2 | file:<path>
    #[arg(long)]
    ic: InitialCondition,
    /// Grid size (even) [default: 256]
    #[arg(long)]
    n: Option<usize>,
    /// [default: 1e-4]
    #[arg(long)]
    dt: Option<f64>,
    /// [default: 1.0]
    #[arg(long)]
    t_end: Option<f64>,
    /// Stop once min u_x falls below this [default: -1e6]
    #[arg(long, allow_negative_numbers = true)]
    slope_threshold: Option<f64>,
    /// Stop once max |rho_x| exceeds this [default: 1e6]
    #[arg(long)]
    rhox_threshold: Option<f64>,
    /// Steps between saved snapshots [default: 100]
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct FlowArgs {
    #[command(flatten)]
    pde: PdeArgs,
    /// Stop once min φ_x falls to this [default: 1e-8]
    #[arg(long)]
    jacobian_floor: Option<f64>,
}

#[derive(Args)]
struct CurvatureArgs {
    #[arg(long, required_unless_present = "second_only", conflicts_with = "second_only")]
    k1: Option<u32>,
    #[arg(long)]
    k2: u32,
    #[arg(long, required_unless_present = "second_only", conflicts_with = "second_only")]
    l1: Option<u32>,
    #[arg(long)]
    l2: u32,
    /// Use u = (0, cos k2 x), v = (0, cos l2 x).
    #[arg(long)]
    second_only: bool,
    /// [default: max(128, 16 * largest mode)]
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ScanArgs {
    /// [default: 4]
    #[arg(long)]
    max_mode: Option<u32>,
    /// [default: max(128, 16 * max mode)]
    #[arg(long)]
    n: Option<usize>,
    /// Random planes to search for negative curvature [default: 0]
    #[arg(long)]
    search_trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RigidBodyArgs {
    /// Principal moments, e.g. 1,2,3 [default: 1,2,3]
    #[arg(long, value_delimiter = ',')]
    inertia: Option<Vec<f64>>,
    /// Initial body angular velocity [default: 1,1,1]
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    omega: Option<Vec<f64>>,
    /// [default: 1e-3]
    #[arg(long)]
    dt: Option<f64>,
    /// [default: 10]
    #[arg(long)]
    t_end: Option<f64>,
    /// Steps between trajectory rows [default: 1]
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Coarser grids and time steps.
    #[arg(long)]
    quick: bool,
    /// Write run.json here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides out_dir from the config.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn triple(v: Option<Vec<f64>>, flag: &str) -> Result<Option<[f64; 3]>> {
    match v {
        None => Ok(None),
        Some(v) => match <[f64; 3]>::try_from(v) {
            Ok(a) => Ok(Some(a)),
            Err(v) => bail!("--{flag} takes three comma-separated values, got {}", v.len()),
        },
    }
}

fn pde_config(command: Command, a: PdeArgs) -> RunConfig {
    RunConfig {
        model: Some(a.model),
        ic: Some(a.ic),
        n: a.n,
        dt: a.dt,
        t_end: a.t_end,
        slope_threshold: a.slope_threshold,
        rhox_threshold: a.rhox_threshold,
        stride: a.stride,
        out_dir: a.out_dir,
        ..RunConfig::empty(command)
    }
}

fn parse_config(cli: Cli) -> Result<RunConfig> {
    let cfg = match cli.command {
        Cmd::Evolve(a) => pde_config(Command::Evolve, a),
        Cmd::Flowmap(a) => RunConfig {
            jacobian_floor: a.jacobian_floor,
            ..pde_config(Command::Flowmap, a.pde)
        },
        Cmd::Curvature(a) => RunConfig {
            modes: Some([a.k1.unwrap_or(0), a.k2, a.l1.unwrap_or(0), a.l2]),
            second_only: Some(a.second_only),
            n: a.n,
            out_dir: a.out_dir,
            ..RunConfig::empty(Command::Curvature)
        },
        Cmd::CurvatureScan(a) => RunConfig {
            max_mode: a.max_mode,
            n: a.n,
            search_trials: a.search_trials,
            seed: a.seed,
            out_dir: a.out_dir,
            ..RunConfig::empty(Command::CurvatureScan)
        },
        Cmd::Rigidbody(a) => RunConfig {
            inertia: triple(a.inertia, "inertia")?,
            omega: triple(a.omega, "omega")?,
            dt: a.dt,
            t_end: a.t_end,
            stride: a.stride,
            out_dir: a.out_dir,
            ..RunConfig::empty(Command::Rigidbody)
        },
        Cmd::Verify(a) => RunConfig {
            seed: a.seed,
            quick: Some(a.quick),
            out_dir: a.out_dir,
            ..RunConfig::empty(Command::Verify)
        },
        Cmd::Run(a) => {
            let mut cfg = RunConfig::from_json_file(&a.config)?;
            if a.out_dir.is_some() {
                cfg.out_dir = a.out_dir;
            }
            cfg
        }
    };
    cfg.resolve()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // Usage errors exit 1; clap's own default of 2 is reserved for blow-up.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(run::EXIT_ERROR)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match parse_config(cli).and_then(|cfg| run::run(&cfg)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(run::EXIT_ERROR)
        }
    }
}
