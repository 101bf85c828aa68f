//! Command-line front end for the multipoint spectral toolkit.

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use multipoint::bounds::{compute_constants, lambda_of_k, nonlinear_constants, DEFAULT_GRID};
use multipoint::characteristic::problem_stops;
use multipoint::ivp::{integrate_variational, Family, DEFAULT_TOL};
use multipoint::nodal::{classify, oscillation_count, Nu};
use multipoint::nonlinear::{branch_continue, find_nodal_solution, solve_fixed, BranchOptions};
use multipoint::oracle::{oracle_spectrum, DEFAULT_N, MULTIPLICITY_N};
use multipoint::problem::{parse_problem, validate, Problem};
use multipoint::scenarios::{run_example1, run_example2_with};
use multipoint::spectrum::{
    check_interlacing, compute_spectrum, family_for, scan_determinant, SpectrumOptions,
};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(
    name = "multipoint",
    version,
    about = "Spectra, nodal classes and nonlinear branches of multi-point boundary value problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Problem configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of eigenvalues.
    #[arg(long, default_value_t = 6)]
    kmax: usize,
    /// Integration tolerance.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Sampling grid for scans and bounds.
    #[arg(long)]
    grid: Option<usize>,
    /// Interior grid size of the finite-difference oracle.
    #[arg(long = "oracle-n")]
    oracle_n: Option<usize>,
    /// Output file (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum NuArg {
    Plus,
    Minus,
}

impl From<NuArg> for Nu {
    fn from(v: NuArg) -> Nu {
        match v {
            NuArg::Plus => Nu::Plus,
            NuArg::Minus => Nu::Minus,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Energy,
    Slope,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ScenarioName {
    Example1,
    Example2,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eigenpairs with certificates.
    Spectrum(Common),
    /// Nodal class of the shooting solution at (lambda, theta).
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        #[arg(long, value_enum)]
        family: Option<FamilyArg>,
    },
    /// Constants derived from r (and g, if present).
    Bounds(Common),
    /// Finite-difference eigenvalues.
    Oracle(Common),
    /// Interlacing with the separated reference spectrum.
    Interlace(Common),
    /// Fixed nonlinear problem -u'' = f(x, u) with the nonresonance check.
    Nonres(Common),
    /// Branch of nontrivial solutions from the k-th linearized eigenvalue.
    Branch {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, value_enum, default_value_t = NuArg::Plus)]
        nu: NuArg,
        #[arg(long = "target-lambda")]
        target_lambda: Option<f64>,
        #[arg(long = "lambda-lo", default_value_t = 0.0)]
        lambda_lo: f64,
        #[arg(long = "lambda-hi")]
        lambda_hi: Option<f64>,
    },
    /// Solution in T_k^nu at lambda = 1 via the crossing condition.
    NodalSolve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, value_enum, default_value_t = NuArg::Plus)]
        nu: NuArg,
    },
    /// Built-in counterexample reproductions.
    Scenario {
        #[arg(value_enum)]
        name: ScenarioName,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.25)]
        delta: f64,
        #[arg(long, default_value_t = 0.0)]
        smoothing: f64,
    },
    /// Roots of the characteristic determinant in a window.
    Scan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lo: f64,
        #[arg(long)]
        hi: f64,
    },
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    #[serde(flatten)]
    result: T,
}

fn load(common: &Common) -> Result<Problem> {
    let path = common
        .config
        .as_ref()
        .context("--config is required for this command")?;
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_problem(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(common: &Common, text: &str) -> Result<()> {
    match &common.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: Serialize>(command: &str, result: T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Envelope {
        schema_version: SCHEMA_VERSION,
        command,
        result,
    })?;
    s.push('\n');
    Ok(s)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Spectrum(c) => {
            let p = load(&c)?;
            let opts = SpectrumOptions {
                tol: c.tol,
                scan_grid: c.grid.unwrap_or(SpectrumOptions::default().scan_grid),
            };
            let res = compute_spectrum(&p, c.kmax, &opts)?;
            let text = match c.format {
                Format::Json => {
                    #[derive(Serialize)]
                    struct Out<'a> {
                        method: multipoint::spectrum::Method,
                        eigenpairs: Vec<multipoint::spectrum::EigenpairSummary>,
                        warnings: &'a [String],
                    }
                    json(
                        "spectrum",
                        Out {
                            method: res.method,
                            eigenpairs: res.summaries(),
                            warnings: &res.warnings,
                        },
                    )?
                }
                Format::Csv => {
                    let mut s = String::from("k,lambda,theta,simple,nodal_class\n");
                    for e in res.summaries() {
                        let _ = writeln!(
                            s,
                            "{},{},{},{},{}",
                            e.k,
                            e.lambda,
                            e.theta,
                            e.simple,
                            e.nodal_class.unwrap_or_default()
                        );
                    }
                    s
                }
            };
            emit(&c, &text)
        }
        Command::Classify {
            common: c,
            lambda,
            theta,
            family,
        } => {
            let p = load(&c)?;
            let family = match family {
                Some(FamilyArg::Energy) => Family::Energy,
                Some(FamilyArg::Slope) => Family::Slope,
                None => family_for(lambda),
            };
            let v = integrate_variational(&p.r, lambda, theta, family, c.tol, &problem_stops(&p))?;
            let sol = v.solution();
            let text = match c.format {
                Format::Csv => sol.to_csv(),
                Format::Json => {
                    #[derive(Serialize)]
                    struct Out {
                        lambda: f64,
                        theta: f64,
                        family: Family,
                        nodal_class: Option<multipoint::nodal::NodalClass>,
                        not_nodal: Option<multipoint::nodal::NotNodal>,
                        oscillation_count: usize,
                    }
                    let (nodal_class, not_nodal) = match classify(&sol) {
                        Ok(c) => (Some(c), None),
                        Err(e) => (None, Some(e)),
                    };
                    json(
                        "classify",
                        Out {
                            lambda,
                            theta,
                            family,
                            nodal_class,
                            not_nodal,
                            oscillation_count: oscillation_count(&sol),
                        },
                    )?
                }
            };
            emit(&c, &text)
        }
        Command::Bounds(c) => {
            let p = load(&c)?;
            let mut report = compute_constants(&p.r, c.grid.unwrap_or(DEFAULT_GRID))?;
            if let Some(g) = &p.g {
                let rg = p.r.times(g);
                let g_min = nonlinear_constants(&rg, 0.0, c.kmax)?.g_min;
                report.nonlinear = Some(nonlinear_constants(
                    &rg,
                    lambda_of_k(g_min, c.kmax),
                    c.kmax,
                )?);
            }
            #[derive(Serialize)]
            struct Out<T: Serialize> {
                constants: T,
                validation: multipoint::problem::ValidationReport,
            }
            emit(
                &c,
                &json(
                    "bounds",
                    Out {
                        constants: report,
                        validation: validate(&p),
                    },
                )?,
            )
        }
        Command::Oracle(c) => {
            let p = load(&c)?;
            let res = oracle_spectrum(&p, c.oracle_n.unwrap_or(DEFAULT_N), c.kmax)?;
            let text = match c.format {
                Format::Json => json("oracle", &res)?,
                Format::Csv => {
                    let mut s = String::from("k,lambda\n");
                    for (i, l) in res.eigenvalues.iter().enumerate() {
                        let _ = writeln!(s, "{},{l}", i + 1);
                    }
                    s
                }
            };
            emit(&c, &text)
        }
        Command::Interlace(c) => {
            let p = load(&c)?;
            let rep = check_interlacing(&p, c.kmax, c.tol)?;
            emit(&c, &json("interlace", &rep)?)
        }
        Command::Nonres(c) => {
            let p = load(&c)?;
            let f =
                p.f.as_ref()
                    .context("the configuration needs an `f` coefficient")?;
            let rep = solve_fixed(&p, f, None)?;
            let text = match c.format {
                Format::Json => json("nonres", &rep)?,
                Format::Csv => rep.solution.to_csv(),
            };
            emit(&c, &text)
        }
        Command::Branch {
            common: c,
            k,
            nu,
            target_lambda,
            lambda_lo,
            lambda_hi,
        } => {
            let p = load(&c)?;
            let opts = BranchOptions {
                window: (lambda_lo, lambda_hi.unwrap_or(f64::INFINITY)),
                target_lambda,
                ..BranchOptions::default()
            };
            let b = branch_continue(&p, k, nu.into(), &opts)?;
            match c.format {
                Format::Json => emit(&c, &json("branch", &b)?),
                Format::Csv => {
                    let last = b.points.last().map(|pt| pt.u.clone()).unwrap_or_default();
                    let solution = solution_csv(&last);
                    match &c.out {
                        Some(path) => {
                            std::fs::write(path, b.to_csv())
                                .with_context(|| format!("writing {}", path.display()))?;
                            let sp = sibling(path, "solution");
                            std::fs::write(&sp, solution)
                                .with_context(|| format!("writing {}", sp.display()))
                        }
                        None => {
                            print!("{}\n{solution}", b.to_csv());
                            Ok(())
                        }
                    }
                }
            }
        }
        Command::NodalSolve { common: c, k, nu } => {
            let p = load(&c)?;
            let rep = find_nodal_solution(&p, k, nu.into())?;
            let text = match c.format {
                Format::Json => json("nodal-solve", &rep)?,
                Format::Csv => rep.solution.to_csv(),
            };
            emit(&c, &text)
        }
        Command::Scenario {
            name,
            common: c,
            delta,
            smoothing,
        } => match name {
            ScenarioName::Example1 => {
                let rep = run_example1(delta, smoothing)?;
                let text = match c.format {
                    Format::Json => json("scenario example1", &rep)?,
                    Format::Csv => rep.scan.to_csv(),
                };
                emit(&c, &text)
            }
            ScenarioName::Example2 => emit(
                &c,
                &json(
                    "scenario example2",
                    &run_example2_with(c.oracle_n.unwrap_or(MULTIPLICITY_N))?,
                )?,
            ),
        },
        Command::Scan { common: c, lo, hi } => {
            let p = load(&c)?;
            let res = scan_determinant(
                &p,
                lo,
                hi,
                c.grid.unwrap_or(SpectrumOptions::default().scan_grid),
                c.tol,
            )?;
            let text = match c.format {
                Format::Json => json("scan", &res)?,
                Format::Csv => res.to_csv(),
            };
            emit(&c, &text)
        }
    }
}

/// CSV of interior collocation values on the uniform mesh.
fn solution_csv(u: &[f64]) -> String {
    let n = u.len();
    let h = 2.0 / (n as f64 + 1.0);
    let mut s = String::from("x,u\n");
    for (j, v) in u.iter().enumerate() {
        let _ = writeln!(s, "{},{v}", -1.0 + (j + 1) as f64 * h);
    }
    s
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
