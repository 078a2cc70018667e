use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hypolab::report::commands::{cmd_perturb, cmd_solve, cmd_triangularize, cmd_diagnose, RunOutput};
use hypolab::report::config::{parse_list, Overrides, ProblemFile};
use hypolab::report::examples::{cmd_examples, matrix};
use hypolab::report::output::{exit_code, write_run, ErrorDetail};
use hypolab::{Error, Result};

#[derive(Parser)]
#[command(name = "hypo-lab", version, about = "Global hypoellipticity lab for D_t + Q(t, D_x) on the torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Triangularize the symbol and test the growth conditions.
    Triangularize(Common),
    /// Classify global hypoellipticity.
    Diagnose(Common),
    /// Solve `D_t u + Q u = f` mode by mode.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Right-hand side as a mode-table CSV.
        #[arg(long)]
        rhs: PathBuf,
    },
    /// Track eigenvalues of `L + eps Q` and fit their Taylor coefficients.
    Perturb(Common),
    /// Run the bundled examples and print a pass/fail matrix.
    Examples(Flags),
}

#[derive(Args)]
struct Common {
    /// Problem file (JSON).
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args)]
struct Flags {
    /// Lattice radius.
    #[arg(long)]
    radius: Option<u64>,
    /// Number of time samples (a power of two).
    #[arg(long)]
    tgrid: Option<usize>,
    /// Largest derivative order in the growth conditions.
    #[arg(long)]
    alpha_max: Option<u32>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Tolerance override `NAME=VALUE`; repeatable.
    #[arg(long = "tol", value_name = "NAME=VALUE")]
    tol: Vec<String>,
    /// Comma-separated epsilon grid for `perturb`.
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<String>,
}

impl Flags {
    fn overrides(&self) -> Result<Overrides> {
        Ok(Overrides {
            radius: self.radius,
            tgrid: self.tgrid,
            alpha_max: self.alpha_max,
            out: self.out.clone(),
            tol: self.tol.clone(),
            epsilon: self.epsilon.as_deref().map(parse_list).transpose()?,
        })
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("HYPO_LAB_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("HYPO_LAB_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n.max(1))
        .build_global()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<i32> {
    configure_threads()?;
    let (output, out_dir) = match &cli.command {
        Command::Examples(flags) => {
            let ov = flags.overrides()?;
            let output = cmd_examples(&ov);
            if let Some(rows) = &output.report.examples {
                let _ = write!(std::io::stdout(), "{}", matrix(rows));
            }
            (output, ov.out.unwrap_or_else(|| PathBuf::from("hypo-lab-out")))
        }
        Command::Triangularize(c) | Command::Diagnose(c) | Command::Perturb(c) | Command::Solve { common: c, .. } => {
            let cfg = ProblemFile::load(&c.config)?.resolve(&c.flags.overrides()?)?;
            let output: RunOutput = match &cli.command {
                Command::Triangularize(_) => cmd_triangularize(&cfg)?,
                Command::Diagnose(_) => cmd_diagnose(&cfg)?,
                Command::Perturb(_) => cmd_perturb(&cfg)?,
                Command::Solve { rhs, .. } => cmd_solve(&cfg, rhs)?,
                Command::Examples(_) => unreachable!(),
            };
            (output, cfg.out.clone())
        }
    };
    let code = output.exit_code();
    let RunOutput { mut report, artifacts, timings } = output;
    let manifest = write_run(&out_dir, &mut report, artifacts, &timings)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(e) = &report.error {
        eprintln!("{}", serde_json::to_string(e)?);
    }
    let _ = writeln!(std::io::stdout(), "{}", manifest.display());
    Ok(code)
}

fn main() -> ExitCode {
    // Usage errors exit with 1, keeping 2 for mathematical preconditions.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            let detail = ErrorDetail::from_error(&e, Vec::new());
            eprintln!("{}", serde_json::to_string(&detail).unwrap_or_else(|_| e.to_string()));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
