use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use brls::experiments::{self, ClassificationConfig, PhaseConfig};
use brls::inner::{solve_inner, InnerPolicy};
use brls::io::{load_csv_matrix, load_csv_vector, load_instance, save_report, save_trace, format_report};
use brls::modularity::{classify, default_tolerance};
use brls::outer::{pg_linear, pg_nonlinear, LinearRunConfig, NonlinearRunConfig};
use brls::verify::{run_suite, Status, VerifyOptions};
use brls::Matrix64;

#[derive(Parser)]
#[command(name = "brls", version, about = "Binary robust least squares solvers and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Auto,
    Exact,
    BruteForce,
    MinCut,
    DoubleGreedy,
}

impl From<Method> for InnerPolicy {
    fn from(m: Method) -> Self {
        match m {
            Method::Auto => InnerPolicy::Auto,
            Method::Exact => InnerPolicy::Exact,
            Method::BruteForce => InnerPolicy::BruteForce,
            Method::MinCut => InnerPolicy::MinCut,
            Method::DoubleGreedy => InnerPolicy::DoubleGreedy,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Algorithm {
    Linear,
    Nonlinear,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the columns of a noise matrix as orthogonal, acute, obtuse or general.
    Classify {
        matrix: PathBuf,
        /// Tolerance on off-diagonal inner products [default: 1e-10·max‖c_i‖²].
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Maximize Θ(x, ·) over {0,1}^n at one point.
    Inner {
        #[arg(long)]
        manifest: PathBuf,
        /// CSV file holding x.
        #[arg(long)]
        x: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        method: Method,
    },
    /// Run the outer minimax solver.
    Solve {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "linear")]
        algorithm: Algorithm,
        #[arg(long)]
        eps: f64,
        /// Iteration count K (overrides the derived value).
        #[arg(long)]
        iterations: Option<u64>,
        /// Fixed step of the nonlinear algorithm (overrides the derived value).
        #[arg(long)]
        mu: Option<f64>,
        /// Upper bound Δ on φ(x0) − min φ for the nonlinear algorithm.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV file holding the starting point [default: center of X].
        #[arg(long)]
        x0: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "auto")]
        method: Method,
        /// Write the per-iteration trace (k,theta,phi) here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the key-value report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the brute-force oracle suite on an instance.
    Verify {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 5)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Grid pitch of the minimax oracle.
        #[arg(long)]
        pitch: Option<f64>,
    },
    /// Classification experiment with corrupted labels.
    ClassifyExp {
        /// TOML config; omitted keys take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Phase retrieval experiment under structured noise.
    PhaseExp {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the trace of every robust solve.
        #[arg(long)]
        trace: bool,
    },
}

fn bits(y: &[bool]) -> String {
    y.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Classify { matrix, tol } => {
            let c: Matrix64 = load_csv_matrix(&matrix).with_context(|| format!("reading {}", matrix.display()))?;
            let tol = tol.unwrap_or_else(|| default_tolerance(&c));
            let class = classify(&c, tol)?;
            println!("verdict = {}", class.verdict);
            println!("min_inner = {:.16e}", class.min_inner);
            println!("max_inner = {:.16e}", class.max_inner);
            println!("tolerance = {:.16e}", class.tol);
        }
        Command::Inner { manifest, x, method } => {
            let loaded = load_instance(&manifest)?;
            let x: Vec<f64> = load_csv_vector(&x)?;
            let class = brls::modularity::classify_default(loaded.brls.noise())?;
            let sol = solve_inner(&loaded.brls, &x, &class, method.into())?;
            println!("y = {}", bits(&sol.y));
            println!("value = {:.16e}", sol.value);
            println!("method = {}", sol.method);
            match sol.guarantee {
                Some(g) => println!("guarantee = {g}"),
                None => println!("guarantee = none"),
            }
        }
        Command::Solve {
            manifest,
            algorithm,
            eps,
            iterations,
            mu,
            delta,
            seed,
            x0,
            method,
            trace,
            report,
        } => {
            let loaded = load_instance(&manifest)?;
            let x0 = x0.map(|p| load_csv_vector::<f64>(&p)).transpose()?;
            let rep = match algorithm {
                Algorithm::Linear => {
                    if mu.is_some() || delta.is_some() {
                        bail!("--mu and --delta apply to the nonlinear algorithm only");
                    }
                    let mut cfg = LinearRunConfig::new(eps);
                    cfg.iterations = iterations;
                    cfg.x0 = x0;
                    cfg.inner = method.into();
                    cfg.record_trace = trace.is_some();
                    pg_linear(&loaded.brls, &cfg)?
                }
                Algorithm::Nonlinear => {
                    let mut cfg = NonlinearRunConfig::new(eps, seed);
                    cfg.iterations = iterations;
                    cfg.step = mu;
                    cfg.delta = delta;
                    cfg.x0 = x0;
                    cfg.inner = method.into();
                    cfg.record_trace = trace.is_some();
                    pg_nonlinear(&loaded.brls, &cfg)?
                }
            };
            if let Some(path) = trace {
                save_trace(&rep.trace, &path)?;
            }
            match report {
                Some(path) => save_report(&rep, &path)?,
                None => print!("{}", format_report(&rep)),
            }
        }
        Command::Verify {
            manifest,
            points,
            seed,
            pitch,
        } => {
            let loaded = load_instance(&manifest)?;
            let opts = VerifyOptions {
                points,
                seed,
                pitch,
                ..Default::default()
            };
            let checks = run_suite(&loaded.brls, loaded.hrls.as_ref(), &opts)?;
            for c in &checks {
                println!("{c}");
            }
            return Ok(checks.iter().all(|c| c.status != Status::Fail));
        }
        Command::ClassifyExp { config, out } => {
            let cfg: ClassificationConfig = match config {
                Some(p) => experiments::load_config(&p)?,
                None => ClassificationConfig::default(),
            };
            let table = experiments::classification_experiment(&cfg, &out)?;
            println!("wrote {} rows to {}", table.rows.len(), out.join(experiments::RESULTS_FILE).display());
        }
        Command::PhaseExp { config, out, trace } => {
            let cfg: PhaseConfig = match config {
                Some(p) => experiments::load_config(&p)?,
                None => PhaseConfig::default(),
            };
            let table = experiments::phase_experiment(&cfg, &out, trace)?;
            println!("wrote {} rows to {}", table.rows.len(), out.join(experiments::RESULTS_FILE).display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
