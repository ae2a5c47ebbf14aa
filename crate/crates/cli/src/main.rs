use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use kinesnap::scene::{format_number, parse_chain_file, parse_script, run_script};
use kinesnap::{
    arm2, solve_ik, ChainDefinition, DofVector, SolveMethod, SolverConfig, SyncPolicy, Vec3,
};
use kinesnap_cli::{bench, server};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "kinesnap", version, about = "Articulated chain posing tools")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve IK for one target and print the joint angles.
    Solve {
        /// Chain JSON file. Defaults to the built-in two-link arm.
        #[arg(long)]
        chain: Option<PathBuf>,
        /// Goal as x,y,z.
        #[arg(long, allow_hyphen_values = true)]
        target: String,
        #[arg(long, value_enum, default_value_t = Method::Pinv)]
        method: Method,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Start angles in degrees, comma separated. Defaults to the rest pose.
        #[arg(long, allow_hyphen_values = true)]
        start: Option<String>,
    },
    /// Run a pose script and write the trajectory CSV.
    Run {
        #[arg(long)]
        chain: Option<PathBuf>,
        #[arg(long)]
        script: PathBuf,
        /// Output file. Stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Policy::Integrated)]
        policy: Policy,
    },
    /// Serve the session protocol over WebSocket at /ws.
    Serve {
        #[arg(long)]
        chain: Option<PathBuf>,
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Compare solve methods on seeded random goals.
    Bench {
        #[arg(long)]
        chain: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Pinv,
    Transpose,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Integrated,
    ExternalSim,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_env("KINESNAP_LOG").unwrap_or_else(|_| EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<ExitCode> {
    match cmd {
        Cmd::Solve {
            chain,
            target,
            method,
            tol,
            max_iter,
            alpha,
            start,
        } => {
            let chain = load_chain(chain.as_deref())?;
            let goal = parse_triple(&target).context("--target")?;
            let mut cfg = SolverConfig::for_method(match method {
                Method::Pinv => SolveMethod::PseudoInverse,
                Method::Transpose => SolveMethod::Transpose,
            });
            if let Some(t) = tol {
                cfg.tolerance = t;
            }
            if let Some(m) = max_iter {
                cfg.max_iterations = m;
            }
            if let Some(a) = alpha {
                cfg.alpha = a;
            }
            let start = match start {
                Some(s) => DofVector::from_degrees(&parse_list(&s).context("--start")?)?,
                None => chain.zero_pose_dofs(),
            };
            let r = solve_ik(&chain, &start, &goal, &cfg)?;
            let names: Vec<_> = chain.joints().iter().map(|j| j.name.as_str()).collect();
            println!("status {}", r.status);
            println!("iterations {}", r.iterations_used);
            println!("residual {}", format_number(r.residual));
            for (name, deg) in names.iter().zip(r.final_dofs.to_degrees()) {
                println!("{name} {}", format_number(deg));
            }
            Ok(if r.converged() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Cmd::Run {
            chain,
            script,
            out,
            policy,
        } => {
            let chain = load_chain(chain.as_deref())?;
            let text = std::fs::read_to_string(&script)
                .with_context(|| format!("reading {}", script.display()))?;
            let script =
                parse_script(&text).with_context(|| format!("parsing {}", script.display()))?;
            let policy = match policy {
                Policy::Integrated => SyncPolicy::Integrated,
                Policy::ExternalSim => SyncPolicy::ExternalSolverSim,
            };
            let run = run_script(&chain, &script, &SolverConfig::default(), policy)?;
            let csv = run.to_csv();
            match out {
                Some(path) => std::fs::write(&path, csv)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{csv}"),
            }
            for failure in &run.failures {
                eprintln!("assertion failed: {failure}");
            }
            Ok(if run.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            })
        }
        Cmd::Serve { chain, port, host } => {
            let chain = load_chain(chain.as_deref())?;
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|_| anyhow!("invalid host `{host}`"))?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let (local, serve) = server::bind(chain, addr).await?;
                eprintln!("listening on ws://{local}/ws");
                tokio::select! {
                    r = serve => r?,
                    _ = tokio::signal::ctrl_c() => {}
                }
                anyhow::Ok(())
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Bench {
            chain,
            trials,
            seed,
        } => {
            let chain = load_chain(chain.as_deref())?;
            let rows = bench::run_bench(&chain, trials, seed)?;
            print!("{}", bench::format_table(&rows));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load_chain(path: Option<&Path>) -> Result<ChainDefinition> {
    let Some(path) = path else { return Ok(arm2()) };
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_chain_file(&text).with_context(|| format!("parsing {}", path.display()))
}

fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            let v: f64 = t
                .trim()
                .parse()
                .map_err(|_| anyhow!("`{}` is not a number", t.trim()))?;
            if !v.is_finite() {
                bail!("`{}` is not finite", t.trim());
            }
            Ok(v)
        })
        .collect()
}

fn parse_triple(text: &str) -> Result<Vec3> {
    match parse_list(text)?.as_slice() {
        &[x, y, z] => Ok(Vec3::new(x, y, z)),
        other => bail!("expected x,y,z, got {} values", other.len()),
    }
}
