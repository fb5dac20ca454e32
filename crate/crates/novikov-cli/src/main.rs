use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use novikov_cli::{cmd_check, cmd_cover, cmd_invariant, cmd_moves, exit_class, load_scenario, Format, EXIT_INVALID};
use novikov_core::scenario::{self, Scenario, DEFAULT_TRUNCATION};

/// Novikov torsion, zeta functions of gradient flows, the invariant
/// I = T_m * zeta, bifurcation moves, and finite cyclic covers, driven by
/// scenario files.
#[derive(Parser)]
#[command(name = "novikov", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Scenario files (JSON).
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Override the truncation grade R (grade syntax, e.g. `16` or `3+2r2`).
    #[arg(long)]
    truncation: Option<String>,
    /// Process multiple files with this many worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Override the scenario's recorded seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Report format.
    #[arg(long, default_value = "text")]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a scenario: boundary square, orbit consistency.
    Check(RunArgs),
    /// Print T_m, zeta, and I per field summand in canonical form.
    Invariant(RunArgs),
    /// Apply the move script, verifying invariance after every move.
    Moves(RunArgs),
    /// Check Norm/Trace identities for the scenario's cyclic cover.
    Cover(RunArgs),
    /// Emit a built-in scenario.
    Generate {
        /// One of: circle-flow, circle-morse, mapping-torus, latour,
        /// random-complex.
        name: String,
        /// Fiber homology matrix a,b,c,d for mapping-torus.
        #[arg(long, value_delimiter = ',')]
        matrix: Option<Vec<i64>>,
        /// Source scenario for latour.
        #[arg(long)]
        from: Option<PathBuf>,
        /// Number of degrees for random-complex.
        #[arg(long, default_value_t = 3)]
        degrees: usize,
        /// Scrambling density in [0, 1] for random-complex.
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        /// Seed for random-complex.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Truncation grade for the generated scenario.
        #[arg(long, default_value_t = DEFAULT_TRUNCATION)]
        truncation: i64,
    },
}

fn run_files(args: &RunArgs, f: fn(&Scenario, Format) -> (i32, String)) -> i32 {
    let format = match Format::parse(&args.format) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let jobs = args.jobs.max(1);
    let tasks: Vec<(usize, PathBuf)> = args.files.iter().cloned().enumerate().collect();
    let mut results: Vec<(i32, String)> = vec![(0, String::new()); tasks.len()];
    if jobs == 1 || tasks.len() <= 1 {
        for (i, path) in &tasks {
            results[*i] = run_one(path, args.truncation.as_deref(), args.seed, format, f);
        }
    } else {
        let chunks: Vec<Vec<(usize, PathBuf)>> = tasks
            .chunks(tasks.len().div_ceil(jobs))
            .map(|c| c.to_vec())
            .collect();
        let truncation = args.truncation.clone();
        let seed = args.seed;
        let outputs = std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for chunk in chunks {
                let truncation = truncation.clone();
                handles.push(scope.spawn(move || {
                    chunk
                        .into_iter()
                        .map(|(i, path)| (i, run_one(&path, truncation.as_deref(), seed, format, f)))
                        .collect::<Vec<_>>()
                }));
            }
            handles.into_iter().flat_map(|h| h.join().expect("worker")).collect::<Vec<_>>()
        });
        for (i, r) in outputs {
            results[i] = r;
        }
    }
    let mut code = 0;
    for (i, (c, out)) in results.iter().enumerate() {
        if args.files.len() > 1 {
            println!("# {}", args.files[i].display());
        }
        print!("{out}");
        code = code.max(*c);
    }
    code
}

fn run_one(
    path: &PathBuf,
    truncation: Option<&str>,
    seed: Option<u64>,
    format: Format,
    f: fn(&Scenario, Format) -> (i32, String),
) -> (i32, String) {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return (EXIT_INVALID, format!("error: cannot read {}: {e}\n", path.display())),
    };
    match novikov_cli::load_scenario_with_seed(&text, truncation, seed) {
        Ok(s) => f(&s, format),
        Err(e) => (exit_class(&e), format!("error: {e}\n")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Check(args) => run_files(args, cmd_check),
        Command::Invariant(args) => run_files(args, cmd_invariant),
        Command::Moves(args) => run_files(args, cmd_moves),
        Command::Cover(args) => run_files(args, cmd_cover),
        Command::Generate { name, matrix, from, degrees, density, seed, truncation } => {
            let matrix_arr = match matrix {
                None => None,
                Some(m) if m.len() == 4 => Some([m[0], m[1], m[2], m[3]]),
                Some(_) => {
                    eprintln!("error: --matrix needs exactly four entries a,b,c,d");
                    return ExitCode::from(EXIT_INVALID as u8);
                }
            };
            let from_scenario = match from {
                None => None,
                Some(path) => match std::fs::read_to_string(path) {
                    Ok(text) => match load_scenario(&text, None) {
                        Ok(s) => Some(s),
                        Err(e) => {
                            eprintln!("error: {e}");
                            return ExitCode::from(exit_class(&e) as u8);
                        }
                    },
                    Err(e) => {
                        eprintln!("error: cannot read {}: {e}", path.display());
                        return ExitCode::from(EXIT_INVALID as u8);
                    }
                },
            };
            match scenario::generate(
                name,
                matrix_arr,
                from_scenario.as_ref(),
                *degrees,
                *density,
                *seed,
                *truncation,
            ) {
                Ok(s) => {
                    print!("{}", s.render());
                    0
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_class(&e)
                }
            }
        }
    };
    ExitCode::from(code as u8)
}
