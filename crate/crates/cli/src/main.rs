use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgMatches, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use lor_transfer::experiments::{
    alpha_table, amr_study, amr_table, coupling_table, precondition_sweep, precondition_table,
    quadrature_table, transfer_convergence, transfer_table, Table, TransferStudy,
};
use lor_transfer::fespace::Continuity;
use lor_transfer::fv::CoupledConfig;
use lor_transfer::quadrature::RuleKind;
use lor_transfer::solver::CgConfig;

mod config;
mod output;

const EXIT_USAGE: u8 = 2;
const EXIT_NONCONVERGENCE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "lor-transfer", version, about = "Conservative HO/LOR transfer experiments")]
struct Cli {
    /// Plain-text key=value file; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Write the table here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Points, weights, angles and spacings of a 1D rule.
    Quadrature {
        #[arg(long, default_value = "gauss-lobatto")]
        kind: RuleKind,
        #[arg(long, default_value_t = 8)]
        n: usize,
    },
    /// Convergence and conservation of R and P under uniform refinement.
    Transfer {
        #[arg(long, default_value_t = 2)]
        p: usize,
        #[arg(long, default_value_t = 0)]
        q: usize,
        /// LOR subdivisions per axis; defaults to the smallest compatible value.
        #[arg(long)]
        lor_n: Option<usize>,
        #[arg(long, default_value = "gauss-lobatto")]
        nodes: RuleKind,
        #[arg(long, default_value_t = 4)]
        refinements: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Elements per axis of the unrefined mesh.
        #[arg(long, default_value_t = 2)]
        base: usize,
        #[arg(long, default_value = "h1")]
        continuity: Continuity,
        #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
        weighted: bool,
        /// Relative residual tolerance of the prolongation CG.
        #[arg(long, default_value_t = 1e-12)]
        cg_tol: f64,
        #[arg(long, default_value_t = 200)]
        cg_max_iter: usize,
    },
    /// Lower bound α of R for 1D node-set families.
    Alpha {
        /// Node kind, or `all` for the five closed families.
        #[arg(long, default_value = "all")]
        nodes: String,
        #[arg(long, default_value_t = 16)]
        pmax: usize,
    },
    /// CG iteration counts of prolongation with diagonal preconditioning.
    Precondition {
        #[arg(long, default_value_t = 5)]
        pmax: usize,
        #[arg(long, default_value_t = 3)]
        refinements: usize,
        #[arg(long, default_value_t = 4)]
        base: usize,
    },
    /// High-order FE / finite-volume coupling on a rotating flow.
    CoupleFv {
        #[arg(long, default_value_t = 2)]
        p: usize,
        #[arg(long, default_value_t = 3)]
        qrec: usize,
        #[arg(long, default_value_t = 10)]
        nx: usize,
        #[arg(long, default_value_t = 4)]
        lor_n: usize,
        #[arg(long, default_value_t = 4)]
        refinements: usize,
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
        t_final: f64,
    },
    /// Coarsening from a uniformly refined space to its parent.
    AmrCoarsen {
        #[arg(long, default_value_t = 5)]
        p: usize,
        #[arg(long, default_value_t = 4)]
        refinements: usize,
        #[arg(long, default_value_t = 2)]
        base: usize,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Library(lor_transfer::Error),
    Io(io::Error),
}

impl From<lor_transfer::Error> for Failure {
    fn from(e: lor_transfer::Error) -> Self {
        Failure::Library(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl Failure {
    fn report(&self) -> (u8, String) {
        use lor_transfer::Error as E;
        let one_line = |s: &str| s.lines().next().unwrap_or_default().to_string();
        match self {
            Failure::Usage(m) => (EXIT_USAGE, format!("kind=usage message={}", one_line(m))),
            Failure::Io(e) => (1, format!("kind=io message={e}")),
            Failure::Library(e) => {
                let code = match e {
                    E::NonConvergence { .. } => EXIT_NONCONVERGENCE,
                    E::Argument(_) | E::Compatibility { .. } | E::Unsupported(_) => EXIT_USAGE,
                    _ => 1,
                };
                (code, format!("kind={} message={}", e.kind(), one_line(&e.to_string())))
            }
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn check(cond: bool, msg: &str) -> Result<(), Failure> {
    if cond {
        Ok(())
    } else {
        Err(usage(msg))
    }
}

fn parse(args: Vec<OsString>) -> Result<(Cli, ArgMatches), Failure> {
    let args = config::merge(args).map_err(usage)?;
    let cmd = Cli::command()
        .args_override_self(true)
        .mut_subcommands(|s| s.args_override_self(true));
    let matches = match cmd.try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            return Err(usage(e.to_string().trim_start_matches("error: ").to_string()));
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| usage(e.to_string()))?;
    Ok((cli, matches))
}

fn validate(cmd: &Command) -> Result<(), Failure> {
    match *cmd {
        Command::Quadrature { n, .. } => check((1..=1000).contains(&n), "--n must be in 1..=1000"),
        Command::Transfer {
            p,
            q,
            refinements,
            dim,
            base,
            cg_tol,
            cg_max_iter,
            ..
        } => {
            check((1..=3).contains(&dim), "--dim must be 1, 2 or 3")?;
            check(p <= 16 && q <= 8, "--p must be ≤ 16 and --q ≤ 8")?;
            check((1..=64).contains(&base), "--base must be in 1..=64")?;
            check(refinements <= 8, "--refinements must be ≤ 8")?;
            check(cg_tol > 0.0 && cg_tol < 1.0, "--cg-tol must be in (0, 1)")?;
            check(cg_max_iter >= 1, "--cg-max-iter must be ≥ 1")
        }
        Command::Alpha { pmax, .. } => check((2..=64).contains(&pmax), "--pmax must be in 2..=64"),
        Command::Precondition {
            pmax,
            refinements,
            base,
        } => {
            check((1..=8).contains(&pmax), "--pmax must be in 1..=8")?;
            check((1..=64).contains(&base), "--base must be in 1..=64")?;
            check(refinements <= 6, "--refinements must be ≤ 6")
        }
        Command::CoupleFv {
            p,
            qrec,
            nx,
            lor_n,
            refinements,
            t_final,
        } => {
            check((1..=8).contains(&p), "--p must be in 1..=8")?;
            check(qrec <= 7, "--qrec must be ≤ 7")?;
            check((1..=1024).contains(&nx), "--nx must be in 1..=1024")?;
            check((1..=16).contains(&lor_n), "--lor-n must be in 1..=16")?;
            check(refinements <= 6, "--refinements must be ≤ 6")?;
            check(t_final.is_finite() && t_final >= 0.0, "--t-final must be finite and ≥ 0")
        }
        Command::AmrCoarsen {
            p,
            refinements,
            base,
        } => {
            check((1..=10).contains(&p), "--p must be in 1..=10")?;
            check((1..=64).contains(&base), "--base must be in 1..=64")?;
            check(refinements <= 6, "--refinements must be ≤ 6")
        }
    }
}

fn closed_kinds() -> Vec<RuleKind> {
    vec![
        RuleKind::GaussLobatto,
        RuleKind::ChebyshevLobatto,
        RuleKind::AugmentedChebyshev,
        RuleKind::AugmentedGauss,
        RuleKind::UniformClosed,
    ]
}

fn table(cmd: &Command) -> Result<Table, Failure> {
    Ok(match *cmd {
        Command::Quadrature { kind, n } => quadrature_table(kind, n)?,
        Command::Transfer {
            p,
            q,
            lor_n,
            nodes,
            refinements,
            dim,
            base,
            continuity,
            weighted,
            cg_tol,
            cg_max_iter,
        } => {
            let study = TransferStudy {
                dim,
                base,
                p,
                q,
                lor_n: lor_n.unwrap_or_else(|| lor_transfer::experiments::minimal_lor_n(p, q)),
                nodes,
                refinements,
                continuity,
                weighted,
                cg: CgConfig {
                    rel_tol: cg_tol,
                    max_iter: cg_max_iter,
                },
            };
            transfer_table(&transfer_convergence(&study)?)
        }
        Command::Alpha { ref nodes, pmax } => {
            let kinds = if nodes.eq_ignore_ascii_case("all") {
                closed_kinds()
            } else {
                vec![nodes.parse::<RuleKind>()?]
            };
            alpha_table(&kinds, pmax)?
        }
        Command::Precondition {
            pmax,
            refinements,
            base,
        } => precondition_table(&precondition_sweep(1..=pmax, &[0, 1], base, refinements)?),
        Command::CoupleFv {
            p,
            qrec,
            nx,
            lor_n,
            refinements,
            t_final,
        } => {
            let cfg = CoupledConfig {
                p,
                q_rec: qrec,
                nx,
                lor_n,
                t_final,
            };
            coupling_table(cfg, refinements)?.0
        }
        Command::AmrCoarsen {
            p,
            refinements,
            base,
        } => amr_table(&amr_study(p, base, refinements)?),
    })
}

fn run(args: Vec<OsString>) -> Result<(), Failure> {
    let (cli, matches) = parse(args)?;
    validate(&cli.command)?;
    let record = config::record(&Cli::command(), &matches);
    let t = table(&cli.command)?;
    let sink: Box<dyn Write> = match &cli.output {
        Some(path) => Box::new(File::create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = BufWriter::new(sink);
    match cli.format {
        Format::Csv => output::write_csv(&mut w, &t, &record)?,
        Format::Json => output::write_json(&mut w, &t, &record)?,
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, line) = f.report();
            eprintln!("error: {line}");
            ExitCode::from(code)
        }
    }
}
