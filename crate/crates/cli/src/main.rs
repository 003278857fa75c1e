//! `monoconv`: exact monotone convolutions, transform evaluation, chain
//! simulation and stability experiments from the command line.
//!
//! Exit codes: 0 success, 1 usage/config/I-O error, 2 statistical gate failure.

mod complex;
mod config;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{error::ErrorKind, Parser, Subcommand};
use monoconv::chain::{self, Recording};
use monoconv::lln::{self, StabilityReport};
use monoconv::report::{self, format_float};
use monoconv::{selftest, transforms, Complex64, ConvolutionOptions, MeasureSpec, RngPolicy};

use crate::config::{ConfigFile, Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "monoconv", version, about = "Monotone convolution of atomic probability measures")]
struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of simulated chain paths.
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Suppress the human-readable summary on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print μ₁ ▷ ⋯ ▷ μₙ as `t w` lines sorted by t.
    Convolve {
        /// Measures such as `point(1)`, `two_point(-1,1,0.5)`, `explicit[(0,0.5),(1,0.5)]`.
        #[arg(required = true)]
        measures: Vec<String>,
        /// Verify G_{μ▷ν}(z) = G_μ(F_ν(z)) at K random points per step.
        #[arg(long, value_name = "K")]
        check_identity: Option<usize>,
        /// Atoms closer than this are merged (default 1e-9).
        #[arg(long)]
        merge_tol: Option<f64>,
        /// Atoms lighter than this are dropped (default 1e-15).
        #[arg(long)]
        prune_tol: Option<f64>,
        /// Fail rather than exceed this many atoms (default 2000000).
        #[arg(long)]
        max_atoms: Option<usize>,
    },
    /// Print G, F and F′ of a measure at z (`a+bi` or `a-bi`).
    TransformEval {
        measure: String,
        #[arg(allow_hyphen_values = true)]
        z: String,
    },
    /// Simulate the chain described by a config file and write the per-step summary CSV.
    Simulate { config: PathBuf },
    /// Run the stability experiment described by a config file.
    Lln { config: PathBuf },
    /// Run the fast invariant suite.
    Selftest {
        #[arg(long, hide = true, value_name = "CHECK")]
        inject_fault: Option<String>,
    },
}

enum Failure {
    Error(String),
    Gate,
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Error(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Gate) => ExitCode::from(2),
        Err(Failure::Error(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Convolve {
            measures,
            check_identity,
            merge_tol,
            prune_tol,
            max_atoms,
        } => {
            let defaults = ConvolutionOptions::default();
            let opts = ConvolutionOptions {
                merge_tol: merge_tol.unwrap_or(defaults.merge_tol),
                prune_tol: prune_tol.unwrap_or(defaults.prune_tol),
                max_atoms: max_atoms.unwrap_or(defaults.max_atoms),
                identity_check_points: check_identity.unwrap_or(0),
            };
            cmd_convolve(cli, measures, &opts)
        }
        Command::TransformEval { measure, z } => cmd_transform_eval(cli, measure, z),
        Command::Simulate { config } => cmd_simulate(cli, config),
        Command::Lln { config } => cmd_lln(cli, config),
        Command::Selftest { inject_fault } => cmd_selftest(cli, inject_fault.as_deref()),
    }
}

fn parse_measure(index: usize, text: &str) -> Result<MeasureSpec, Failure> {
    text.parse()
        .map_err(|e| Failure::Error(format!("measure {} `{text}`: {e}", index + 1)))
}

/// Writes to `--out` with a `#` preamble, or to stdout with `stdout_preamble`.
fn emit(out: Option<&Path>, preamble: &[String], body: &str, stdout_preamble: bool) -> Outcome {
    match out {
        Some(path) => report::write_with_preamble(path, preamble, body)?,
        None => {
            let mut stdout = io::stdout().lock();
            let mut text = String::new();
            if stdout_preamble {
                for line in preamble {
                    text.push_str("# ");
                    text.push_str(line);
                    text.push('\n');
                }
            }
            text.push_str(body);
            stdout.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn cmd_convolve(cli: &Cli, measures: &[String], opts: &ConvolutionOptions) -> Outcome {
    let specs = measures
        .iter()
        .enumerate()
        .map(|(i, text)| parse_measure(i, text))
        .collect::<Result<Vec<_>, _>>()?;
    let mus = specs
        .iter()
        .map(MeasureSpec::materialize)
        .collect::<monoconv::Result<Vec<_>>>()?;
    let rho = monoconv::convolve_sequence(&mus, opts)?;
    let mut body = String::new();
    for (t, w) in rho.atoms() {
        body.push_str(&format!("{t} {w}\n"));
    }
    let mut preamble = vec!["monoconv convolve".to_string()];
    preamble.extend(specs.iter().enumerate().map(|(i, s)| format!("measure_{} = {s}", i + 1)));
    preamble.push(format!("merge_tol = {:e}", opts.merge_tol));
    preamble.push(format!("prune_tol = {:e}", opts.prune_tol));
    preamble.push(format!("max_atoms = {}", opts.max_atoms));
    preamble.push(format!("identity_check_points = {}", opts.identity_check_points));
    emit(cli.out.as_deref(), &preamble, &body, false)
}

fn format_complex(z: Complex64) -> String {
    // Adding zero folds -0 into +0.
    let (re, im) = (z.re + 0.0, z.im + 0.0);
    let sign = if im < 0.0 { '-' } else { '+' };
    format!("{}{sign}{}i", format_float(re), format_float(im.abs()))
}

fn cmd_transform_eval(cli: &Cli, measure: &str, z: &str) -> Outcome {
    let spec = parse_measure(0, measure)?;
    let z = complex::parse_complex(z).map_err(|e| Failure::Error(format!("z `{z}`: {e}")))?;
    if z.im < 0.0 {
        return Err(Failure::Error(format!(
            "z = {} lies in the lower half-plane; use Im z > 0 or a real point off the support",
            format_complex(z)
        )));
    }
    let mu = spec.materialize()?;
    let g = transforms::cauchy_g(&mu, z)?;
    let (f, df) = transforms::f_and_derivative(&mu, z)?;
    let body = format!(
        "z = {}\nG = {}\nF = {}\nF' = {}\n",
        format_complex(z),
        format_complex(g),
        format_complex(f),
        format_complex(df)
    );
    let preamble = vec!["monoconv transform-eval".to_string(), format!("measure = {spec}")];
    emit(cli.out.as_deref(), &preamble, &body, false)
}

fn load_config(cli: &Cli, path: &Path) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Error(format!("{}: {e}", path.display())))?;
    let file: ConfigFile = text.parse().map_err(|e| Failure::Error(format!("{}: {e}", path.display())))?;
    let overrides = Overrides {
        seed: cli.seed,
        paths: cli.paths,
        out: cli.out.as_ref().map(|p| p.display().to_string()),
        quiet: cli.quiet,
    };
    RunConfig::resolve(&file, &overrides).map_err(|e| Failure::Error(format!("{}: {e}", path.display())))
}

fn preamble(command: &str, config: &RunConfig) -> Vec<String> {
    let mut lines = vec![format!("monoconv {command}")];
    lines.extend(config.echo());
    lines
}

fn cmd_simulate(cli: &Cli, path: &Path) -> Outcome {
    let config = load_config(cli, path)?;
    let h = &config.harness;
    let recording = match &config.record {
        Some(steps) => Recording::Steps(steps.clone()),
        None => Recording::Full,
    };
    let batch = chain::simulate_recording(&h.spec, config.steps, h.n_paths, &RngPolicy::new(h.seed), &recording)?;
    let body = chain::summary_csv(&batch, &h.spec)?;
    emit(config.out.as_deref().map(Path::new), &preamble("simulate", &config), &body, true)?;
    if !config.quiet {
        let rows = body.lines().skip(1).count();
        let flagged = body.lines().skip(1).filter(|l| !l.ends_with(",ok")).count();
        eprintln!(
            "simulated {} paths x {} steps (seed {}); {flagged} of {rows} summary rows flagged",
            h.n_paths, config.steps, h.seed
        );
        if h.n_paths < chain::MIN_CHECK_PATHS {
            eprintln!("moment checks skipped: they need at least {} paths", chain::MIN_CHECK_PATHS);
        }
    }
    Ok(())
}

fn print_lln_summary(report: &StabilityReport) {
    let c = &report.condition;
    eprintln!(
        "sum of var(mu_k)/b_k^2 up to the horizon: {:.6} ({})",
        c.partial_sums.last().copied().unwrap_or(0.0),
        c.describe()
    );
    for d in &report.decay {
        let verdict = if d.decays() {
            "decays"
        } else if d.all_zero() {
            "zero at every checkpoint"
        } else {
            "no decay"
        };
        eprintln!(
            "eps = {}: MC outside mass {:?} at n = {:?}, {verdict} ({:.2} SE)",
            d.eps, d.values, d.checkpoints, d.separation
        );
    }
    if !c.convergent() {
        eprintln!("decay gates disabled: the normalizer condition is not met, no claim is made");
    }
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    for g in &report.gates {
        eprintln!("[{}] {}: {}", if g.passed { "PASS" } else { "FAIL" }, g.name, g.detail);
    }
}

fn cmd_lln(cli: &Cli, path: &Path) -> Outcome {
    let config = load_config(cli, path)?;
    let report = lln::run_harness(&config.harness)?;
    emit(
        config.out.as_deref().map(Path::new),
        &preamble("lln", &config),
        &report.to_csv(),
        true,
    )?;
    if !config.quiet {
        print_lln_summary(&report);
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Gate)
    }
}

fn cmd_selftest(cli: &Cli, fault: Option<&str>) -> Outcome {
    if let Some(name) = fault {
        if !selftest::CHECKS.contains(&name) {
            return Err(Failure::Error(format!(
                "unknown check `{name}`; expected one of {}",
                selftest::CHECKS.join(", ")
            )));
        }
    }
    let rows = selftest::run(fault, cli.seed.unwrap_or(0));
    let mut table = format!("{:<16} {:<6} {:>8}  detail\n", "check", "result", "seconds");
    for r in &rows {
        table.push_str(&format!(
            "{:<16} {:<6} {:>8.3}  {}\n",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.seconds,
            r.detail
        ));
    }
    print!("{table}");
    if rows.iter().all(|r| r.passed) {
        Ok(())
    } else {
        Err(Failure::Gate)
    }
}
