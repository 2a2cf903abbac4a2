use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use recoverlab::error::Error;
use recoverlab::harness::{
    cmd_for_conditional, cmd_for_pair, exit_code_for, read_state, run_sweep, RowStatus, SweepConfig, SweepKind,
    EXIT_INPUT, EXIT_OK,
};
use recoverlab::states::named_state;

#[derive(Parser)]
#[command(
    name = "recoverlab",
    version,
    about = "Fidelity of recovery with certified semidefinite programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fidelity of recovery of one state, or of a pair with --sigma.
    For(ForArgs),
    /// Seeded experiment sweep.
    Sweep(SweepArgs),
    /// Runs the built-in checks with known answers.
    Selftest {
        #[arg(long)]
        verbose: bool,
    },
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["named", "state"]))]
struct ForArgs {
    /// ghz3, product, cq_markov, max_entangled[:d]
    #[arg(long)]
    named: Option<String>,
    /// Matrix JSON file with factor labels.
    #[arg(long)]
    state: Option<PathBuf>,
    /// Reference state on the shared and recovered-from factors; without it the
    /// input must be tripartite A, B, C and `F(A;B|C)` is computed.
    #[arg(long)]
    sigma: Option<PathBuf>,
    /// Print the full result as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(value_enum)]
    kind: SweepKind,
    #[arg(short = 'n', long, default_value_t = 10)]
    n: usize,
    #[arg(long, env = "RECOVERLAB_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    d_a: usize,
    #[arg(long, default_value_t = 2)]
    d_b: usize,
    #[arg(long, default_value_t = 2)]
    d_c: usize,
    /// Largest rank of the random states.
    #[arg(long, default_value_t = 2)]
    rank: usize,
    /// Draw rank-one reference factors in `mult` sweeps.
    #[arg(long)]
    rank1_sigma: bool,
    /// JSON report path; the CSV summary goes next to it. Without it the
    /// report is printed.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record wall time per instance (makes reports nondeterministic).
    #[arg(long)]
    timings: bool,
}

fn run_for(args: ForArgs) -> Result<i32, Error> {
    let rho = match (&args.named, &args.state) {
        (Some(name), _) => named_state(name)?,
        (None, Some(path)) => read_state(path)?,
        (None, None) => unreachable!("clap requires one input"),
    };
    let report = match &args.sigma {
        Some(path) => cmd_for_pair(&rho, &read_state(path)?)?,
        None => cmd_for_conditional(&rho)?,
    };
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", report.to_text());
    }
    Ok(report.exit_code())
}

fn run_sweep_cmd(args: SweepArgs) -> Result<i32, Error> {
    let mut cfg = SweepConfig::new(args.kind, args.n, args.seed);
    cfg.d_a = args.d_a;
    cfg.d_b = args.d_b;
    cfg.d_c = args.d_c;
    cfg.rank = args.rank;
    cfg.rank1_sigma = args.rank1_sigma;
    cfg.timings = args.timings;
    let report = run_sweep(&cfg)?;
    match &args.out {
        Some(path) => {
            report.write_json(path)?;
            let csv = path.with_extension("csv");
            report.write_csv(&csv)?;
            let s = &report.summary;
            println!(
                "{} rows: {} passed, {} invariant violations, {} solver failures",
                s.rows, s.passed, s.invariant_violations, s.solver_failures
            );
            for (name, stat) in [("slack", s.slack), ("defect", s.defect), ("gap", s.gap)] {
                if let Some(st) = stat {
                    println!("{name:<7} min {:.3e}  max {:.3e}  mean {:.3e}", st.min, st.max, st.mean);
                }
            }
            println!("wrote {} and {}", path.display(), csv.display());
        }
        None => print!("{}", report.to_json()?),
    }
    for row in report.instances.iter().filter(|r| r.status != RowStatus::Ok) {
        eprintln!(
            "instance {}: {:?}: {}",
            row.instance_id,
            row.status,
            row.messages.join("; ")
        );
    }
    Ok(report.exit_code())
}

fn run_selftest(verbose: bool) -> Result<i32, Error> {
    let report = run_sweep(&SweepConfig::new(SweepKind::Selftest, 0, 0))?;
    let names = recoverlab::harness::selftest_checks();
    for (row, check) in report.instances.iter().zip(&names) {
        if row.status == RowStatus::Ok {
            if verbose {
                println!("ok    {}", check.name);
            }
        } else {
            println!("FAIL  {}: {}", check.name, row.messages.join("; "));
        }
    }
    let s = &report.summary;
    println!("{}/{} checks passed", s.passed, s.rows);
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                EXIT_INPUT as u8
            } else {
                EXIT_OK as u8
            });
        }
    };
    let outcome = match cli.command {
        Command::For(a) => run_for(a),
        Command::Sweep(a) => run_sweep_cmd(a),
        Command::Selftest { verbose } => run_selftest(verbose),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}
