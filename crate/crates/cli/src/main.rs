//! Command-line driver: loads scenario configs, runs identity suites, flows
//! and perturbative evolutions, and emits machine-readable reports.
//!
//! Exit codes: 0 all checks pass, 1 check failures or disallowed truncation,
//! 2 parse or validation errors.

mod output;
mod scenario;
mod suites;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use bvflow_core::gl11::{sample_gl11, Nilpotency};
use bvflow_core::perturbation::{rge_evolve, InteractionTerm};
use bvflow_core::report::CheckRecord;
use bvflow_core::{Rat, Scalar};

use output::{trajectory_csv, Report};
use scenario::{
    apply_overrides, load_scenario, resolve, Overrides, Resolved, ScenarioFile,
};

#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub exit: u8,
}

impl CliError {
    pub fn parse(message: String) -> Self {
        Self { message, exit: 2 }
    }

    pub fn check(message: String) -> Self {
        Self { message, exit: 1 }
    }
}

#[derive(Parser)]
#[command(
    name = "bvflow",
    about = "Identity suites, flows and perturbative evolutions for the BV calculus on finite-dimensional degree -1 symplectic vector spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonFlags {
    /// Scenario config file (JSON).
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Scalar mode: rational | f64.
    #[arg(long)]
    scalar: Option<String>,
    /// Polynomial degree truncation bound.
    #[arg(long)]
    max_degree: Option<usize>,
    /// Series truncation order.
    #[arg(long)]
    hbar_order: Option<usize>,
    /// Comma-separated grid of scale values.
    #[arg(long)]
    grid: Option<String>,
    /// Finite-difference step for parameter derivatives.
    #[arg(long)]
    fd_step: Option<String>,
    /// Integration step count.
    #[arg(long)]
    steps: Option<usize>,
    /// Extra tolerance floor for float-mode checks.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Seed for randomized identity batteries.
    #[arg(long)]
    seed: Option<u64>,
    /// Report format: json | csv.
    #[arg(long)]
    output: Option<String>,
    /// Structure fixture file, overriding the scenario's.
    #[arg(long)]
    fixture: Option<String>,
    /// Tolerate degree truncation in flow compositions.
    #[arg(long)]
    allow_truncation: bool,
    /// Write the report to a file instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the suites listed in the scenario.
    Check(CommonFlags),
    /// Run the free-flow suite only.
    Flow(CommonFlags),
    /// Evolve the scenario's interaction along the grid, emitting the
    /// trajectory.
    Evolve(CommonFlags),
    /// Reconstruct the free flow from its infinitesimal generator and
    /// compare with the closed form.
    Reconstruct(CommonFlags),
    /// Sample a structure fixture and write it to a file.
    Sample {
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        nilpotent: bool,
        #[arg(long)]
        non_nilpotent: bool,
        /// Output fixture path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check(flags) => run_checks(&flags, None),
        Command::Flow(flags) => run_checks(&flags, Some(vec!["free-flow".to_string()])),
        Command::Evolve(flags) => run_evolve(&flags),
        Command::Reconstruct(flags) => {
            run_checks(&flags, Some(vec!["reconstruct".to_string()]))
        }
        Command::Sample {
            dim,
            seed,
            nilpotent,
            non_nilpotent,
            out,
        } => run_sample(dim, seed, nilpotent, non_nilpotent, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.exit)
        }
    }
}

fn thread_cap() -> usize {
    std::env::var("BVFLOW_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

fn overrides_from(flags: &CommonFlags) -> Overrides {
    Overrides {
        scalar: flags.scalar.clone(),
        max_degree: flags.max_degree,
        hbar_order: flags.hbar_order,
        grid: flags.grid.clone(),
        fd_step: flags.fd_step.clone(),
        steps: flags.steps,
        tolerance: flags.tolerance,
        seed: flags.seed,
        output: flags.output.clone(),
        fixture: flags.fixture.clone(),
        allow_truncation: flags.allow_truncation,
    }
}

fn resolved_file(flags: &CommonFlags, checks: Option<Vec<String>>) -> Result<(ScenarioFile, PathBuf), CliError> {
    let (mut file, dir) = match &flags.scenario {
        Some(path) => (
            load_scenario(path)?,
            path.parent().unwrap_or(Path::new(".")).to_path_buf(),
        ),
        None => (ScenarioFile::default(), PathBuf::from(".")),
    };
    apply_overrides(&mut file, &overrides_from(flags));
    if let Some(checks) = checks {
        file.checks = Some(checks);
    }
    Ok((file, dir))
}

fn run_checks(flags: &CommonFlags, forced_checks: Option<Vec<String>>) -> Result<(), CliError> {
    let (file, dir) = resolved_file(flags, forced_checks)?;
    let mode = file.scalar.clone().unwrap_or_else(|| "rational".to_string());
    let started = Instant::now();
    let (records, echo) = match mode.as_str() {
        "rational" => {
            let resolved = resolve::<Rat>(&file, &dir)?;
            let records = suites::run_all(&resolved, thread_cap());
            (records, file.clone())
        }
        "f64" => {
            let resolved = resolve::<f64>(&file, &dir)?;
            let records = suites::run_all(&resolved, thread_cap());
            (records, file.clone())
        }
        other => {
            return Err(CliError::parse(format!(
                "unknown scalar mode `{other}` (use rational or f64)"
            )))
        }
    };
    eprintln!(
        "ran {} checks in {:.2}s",
        records.len(),
        started.elapsed().as_secs_f64()
    );
    finish_report(flags, &file, echo, records)
}

fn finish_report(
    flags: &CommonFlags,
    file: &ScenarioFile,
    echo: ScenarioFile,
    records: Vec<CheckRecord>,
) -> Result<(), CliError> {
    let allow_truncation = file.allow_truncation.unwrap_or(false);
    let report = Report::new(echo, records);
    match file.output.as_deref().unwrap_or("json") {
        "json" => match &flags.report {
            Some(path) => std::fs::write(path, report.to_json())
                .map_err(|e| CliError::check(format!("cannot write report: {e}")))?,
            None => println!("{}", report.to_json()),
        },
        // CSV rows to stdout; a --report path additionally receives the
        // canonical JSON report.
        "csv" => {
            println!("{}", report.to_csv());
            if let Some(path) = &flags.report {
                std::fs::write(path, report.to_json())
                    .map_err(|e| CliError::check(format!("cannot write report: {e}")))?;
            }
        }
        other => {
            return Err(CliError::parse(format!(
                "unknown output format `{other}` (use json or csv)"
            )))
        }
    }
    if !report.pass {
        return Err(CliError::check("one or more checks failed".into()));
    }
    if report.truncated && !allow_truncation {
        return Err(CliError::check(
            "results were degree-truncated and the scenario does not allow truncation".into(),
        ));
    }
    Ok(())
}

fn run_evolve(flags: &CommonFlags) -> Result<(), CliError> {
    let (file, dir) = resolved_file(flags, None)?;
    let mode = file.scalar.clone().unwrap_or_else(|| "rational".to_string());
    match mode.as_str() {
        "rational" => evolve_generic::<Rat>(flags, &file, &dir),
        "f64" => evolve_generic::<f64>(flags, &file, &dir),
        other => Err(CliError::parse(format!(
            "unknown scalar mode `{other}` (use rational or f64)"
        ))),
    }
}

fn evolve_generic<S: Scalar>(
    flags: &CommonFlags,
    file: &ScenarioFile,
    dir: &Path,
) -> Result<(), CliError> {
    let resolved: Resolved<S> = resolve(file, dir)?;
    let Some(series) = resolved.interaction.clone() else {
        return Err(CliError::parse(
            "evolve needs an `interaction` literal in the scenario".into(),
        ));
    };
    let start = resolved.grid[0].clone();
    let interaction = InteractionTerm::new(series, start.clone())
        .map_err(|e| CliError::parse(format!("invalid interaction: {e}")))?;
    let mut rows = Vec::new();
    let mut truncated_any = false;
    for t in &resolved.grid {
        let (evolved, truncated) = if t == &start {
            (interaction.clone(), false)
        } else {
            rge_evolve(&interaction, &resolved.model, t, resolved.steps, resolved.max_degree)
                .map_err(|e| CliError::check(format!("evolution failed: {e}")))?
        };
        truncated_any |= truncated;
        for (g, coeff) in evolved.series().coefficients().iter().enumerate() {
            for (monomial, value) in coeff.terms() {
                let exps: Vec<String> = monomial
                    .exponents()
                    .iter()
                    .map(|e| e.to_string())
                    .collect();
                rows.push((t.literal(), g, exps.join(" "), value.literal()));
            }
        }
    }
    // Residual summary alongside the trajectory.
    let end = resolved.grid.last().expect("grid nonempty");
    let (final_term, _) = rge_evolve(
        &interaction,
        &resolved.model,
        end,
        resolved.steps,
        resolved.max_degree,
    )
    .map_err(|e| CliError::check(format!("evolution failed: {e}")))?;
    let me = bvflow_core::perturbation::interaction_me_residual(&final_term, &resolved.model)
        .map_err(|e| CliError::check(format!("residual evaluation failed: {e}")))?;
    let records = vec![bvflow_core::report::residual_record::<S>(
        "evolve.interaction_me_final",
        me.max_abs_coeff(),
        me.is_zero(),
        bvflow_core::tol::TRAJECTORY_F64.max(resolved.tolerance),
        truncated_any,
    )];
    match file.output.as_deref().unwrap_or("json") {
        "csv" => {
            let body = trajectory_csv(&rows);
            match &flags.report {
                Some(path) => std::fs::write(path, &body)
                    .map_err(|e| CliError::check(format!("cannot write trajectory: {e}")))?,
                None => println!("{body}"),
            }
            let report = Report::new(file.clone(), records);
            eprintln!("{}", report.to_json());
            if !report.pass {
                return Err(CliError::check("trajectory residual out of tolerance".into()));
            }
            if report.truncated && !file.allow_truncation.unwrap_or(false) {
                return Err(CliError::check(
                    "trajectory was degree-truncated and the scenario does not allow truncation"
                        .into(),
                ));
            }
            Ok(())
        }
        _ => finish_report(flags, file, file.clone(), records),
    }
}

fn run_sample(
    dim: usize,
    seed: u64,
    nilpotent: bool,
    non_nilpotent: bool,
    out: &Path,
) -> Result<(), CliError> {
    let requirement = match (nilpotent, non_nilpotent) {
        (true, false) => Nilpotency::Nilpotent,
        (false, true) => Nilpotency::NonNilpotent,
        (false, false) => Nilpotency::Any,
        (true, true) => {
            return Err(CliError::parse(
                "choose at most one of --nilpotent / --non-nilpotent".into(),
            ))
        }
    };
    let structure = sample_gl11::<Rat>(dim, seed, requirement, 4000)
        .map_err(|e| CliError::parse(format!("sampling failed: {e}")))?;
    let to_rows = |e: &bvflow_core::Endomorphism<Rat>| -> Vec<Vec<serde_json::Value>> {
        e.entries()
            .iter()
            .map(|row| {
                row.iter()
                    .map(|v| serde_json::Value::String(v.literal()))
                    .collect()
            })
            .collect()
    };
    let basis = structure.basis().clone();
    let omega_rows: Vec<Vec<serde_json::Value>> = basis
        .omega()
        .iter()
        .map(|row| {
            row.iter()
                .map(|v| serde_json::Value::String(v.literal()))
                .collect()
        })
        .collect();
    let fixture = scenario::FixtureSpec {
        degrees: basis.degrees().to_vec(),
        omega: omega_rows,
        q: to_rows(&structure.q),
        qbar: to_rows(&structure.qbar),
        h: to_rows(&structure.h),
    };
    let body = serde_json::to_string_pretty(&fixture).expect("fixture serializes");
    std::fs::write(out, body)
        .map_err(|e| CliError::check(format!("cannot write fixture: {e}")))?;
    eprintln!("wrote fixture to {}", out.display());
    Ok(())
}
