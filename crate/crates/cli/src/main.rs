mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "gevrey-forge", version, about = "Singular solutions of generalized Métivier operators and their Gevrey index")]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    cmd: Cmd,
}

/// Every numeric flag accepts an exact rational `p/q`.
#[derive(Args)]
struct Opts {
    /// config file of `key = value` lines (default: $GEVREY_FORGE_CONFIG)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    n: Option<String>,
    #[arg(long, global = true)]
    m: Option<String>,
    #[arg(long, global = true)]
    lmax: Option<String>,
    #[arg(long, global = true)]
    precision_bits: Option<String>,
    /// cutoff scale R
    #[arg(long, global = true)]
    r: Option<String>,
    /// right-hand-side cutoff scale R₁
    #[arg(long, global = true)]
    r1: Option<String>,
    #[arg(long, global = true)]
    rho_max: Option<String>,
    #[arg(long, global = true)]
    panel: Option<String>,
    #[arg(long, global = true)]
    weak_tol: Option<String>,
    #[arg(long, global = true)]
    quad_tol: Option<String>,
    #[arg(long, global = true)]
    fit_tol: Option<String>,
    #[arg(long, global = true)]
    trace_points: Option<String>,
    #[arg(long, global = true)]
    kmax: Option<String>,
    #[arg(long, global = true)]
    imax: Option<String>,
    #[arg(long, global = true)]
    threads: Option<String>,
    /// output directory
    #[arg(long, global = true)]
    out: Option<String>,
}

impl Opts {
    fn overrides(&self) -> Vec<(String, String)> {
        let pairs = [
            ("n", &self.n),
            ("m", &self.m),
            ("lmax", &self.lmax),
            ("precision_bits", &self.precision_bits),
            ("r", &self.r),
            ("r1", &self.r1),
            ("rho_max", &self.rho_max),
            ("panel", &self.panel),
            ("weak_tol", &self.weak_tol),
            ("quad_tol", &self.quad_tol),
            ("fit_tol", &self.fit_tol),
            ("trace_points", &self.trace_points),
            ("kmax", &self.kmax),
            ("imax", &self.imax),
            ("threads", &self.threads),
            ("out", &self.out),
        ];
        pairs.iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))).collect()
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the derived exponents and constants
    Params,
    /// Exact eigenfunction checks and bound regressions
    Eigen,
    /// Exact coefficient-table oracles
    Coeffs,
    /// Fundamental solutions of the level equations
    Greens,
    /// Solve the levels, checkpoint them and certify residuals and growth
    Build,
    /// Fourier trace and exponent fit
    Fourier {
        /// load levels written by `build` instead of solving
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Run every acceptance gate
    Verify,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match RunConfig::load(cli.opts.config.as_deref(), &cli.opts.overrides()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if cfg.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global() {
            eprintln!("thread pool: {e}");
        }
    }
    let start = std::time::Instant::now();
    let outcome = match &cli.cmd {
        Cmd::Params => commands::params(&cfg).map(|r| (r, json!(null))),
        Cmd::Eigen => commands::eigen(&cfg).map(|r| (r, json!(null))),
        Cmd::Coeffs => commands::coeffs(&cfg).map(|r| (r, json!(null))),
        Cmd::Greens => commands::greens(&cfg).map(|r| (r, json!(null))),
        Cmd::Build => commands::build(&cfg).map(|r| (r, json!(null))),
        Cmd::Fourier { checkpoint } => commands::fourier(&cfg, checkpoint.as_deref()).map(|r| (r, json!(null))),
        Cmd::Verify => commands::verify(&cfg).map(|(r, t)| (r, json!(t))),
    };
    let (report, per_gate) = match outcome {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(3);
        }
    };
    let timings = json!({ "total": start.elapsed().as_secs_f64(), "gates": per_gate });
    print!("{}", report.summary);
    match report.write(&cfg, timings) {
        Ok(path) => println!("report: {}", path.display()),
        Err(e) => {
            eprintln!("writing report: {e}");
            return ExitCode::from(3);
        }
    }
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
