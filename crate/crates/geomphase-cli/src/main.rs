//! Scenario-driven CLI for mixed-state geometric phase computations.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use geomphase::acceptance;
use geomphase::error::{Error, ErrorKind};
use geomphase::report::{emit_report, to_csv_string, to_json_string, ReportFormat, RunReport};
use geomphase::run::run_scenario_full;
use geomphase::scenario::{
    builtin_descriptions, builtin_scenario, parse_scenario, BuiltinOptions, Method, Scenario,
};

#[derive(Parser)]
#[command(
    name = "geomphase",
    about = "Geometric phases of mixed quantum states under unitary and Lindblad evolutions",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunFlags {
    /// Write the report to this path (default: print a summary to stdout)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Report format
    #[arg(long, default_value = "csv")]
    format: String,
    /// Override the scenario's step count
    #[arg(long)]
    steps: Option<usize>,
    /// Comma-separated method subset
    /// (kinematic, generalized, uhlmann_discrete, degenerate)
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Emit only the final sample row
    #[arg(long)]
    final_only: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file
    Run {
        /// Path to a scenario document
        scenario: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// List the builtin scenarios
    ListBuiltins,
    /// Run a builtin scenario (random families accept a `:seed` suffix)
    RunBuiltin {
        name: String,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run the full acceptance suite and print pass/fail per criterion
    Verify,
}

fn parse_methods(list: &[String]) -> Result<Vec<Method>, Error> {
    list.iter()
        .map(|s| match s.as_str() {
            "kinematic" => Ok(Method::Kinematic),
            "generalized" => Ok(Method::Generalized),
            "uhlmann_discrete" => Ok(Method::UhlmannDiscrete),
            "degenerate" => Ok(Method::Degenerate),
            other => Err(Error::InvalidValue {
                field: "--methods".into(),
                message: format!("unknown method `{other}`"),
            }),
        })
        .collect()
}

fn apply_flags(mut scenario: Scenario, flags: &RunFlags) -> Result<Scenario, Error> {
    if let Some(steps) = flags.steps {
        scenario.grid = geomphase::evolve::TimeGrid::new(scenario.grid.t_final(), steps)?;
    }
    if let Some(methods) = &flags.methods {
        let methods = parse_methods(methods)?;
        if methods.is_empty() {
            return Err(Error::InvalidValue {
                field: "--methods".into(),
                message: "at least one method must be requested".into(),
            });
        }
        scenario.methods = methods;
    }
    Ok(scenario)
}

fn print_summary(report: &RunReport) {
    println!("scenario: {}", report.scenario);
    println!(
        "dimension {}, rank {}, {} steps to t = {}",
        report.dimension, report.rank, report.steps, report.t_final
    );
    println!(
        "diagnostics: trace drift {:.2e}, min eigenvalue {:.2e}",
        report.diagnostics.trace_drift, report.diagnostics.min_eigenvalue
    );
    for f in &report.finals {
        match (f.gamma_wrapped, f.gamma_unwrapped) {
            (Some(w), Some(u)) => println!(
                "  {:<18} gamma = {:+.9} rad (wrapped), {:+.9} rad (unwrapped)",
                f.method, w, u
            ),
            _ => println!("  {:<18} undefined (vanishing overlap sum)", f.method),
        }
        if let Some(r) = f.pt_generalized_max {
            println!("  {:<18}   max generalized PT residual {:.3e}", "", r);
        }
        if let Some(r) = f.pt_uhlmann_max {
            println!("  {:<18}   max Uhlmann PT residual {:.3e}", "", r);
        }
    }
}

fn execute_run(scenario: Scenario, flags: &RunFlags) -> Result<(), Error> {
    let scenario = apply_flags(scenario, flags)?;
    let format = ReportFormat::parse(&flags.format)?;
    let artifacts = run_scenario_full(&scenario, flags.final_only)?;
    match &flags.output {
        Some(path) => {
            emit_report(&artifacts.report, format, path)?;
            print_summary(&artifacts.report);
            println!("report written to {}", path.display());
        }
        None => {
            print_summary(&artifacts.report);
            if flags.final_only {
                let text = match format {
                    ReportFormat::Csv => to_csv_string(&artifacts.report),
                    ReportFormat::Json => to_json_string(&artifacts.report),
                };
                println!("{text}");
            }
        }
    }
    Ok(())
}

fn exit_code_for(e: &Error) -> ExitCode {
    match e.kind() {
        ErrorKind::Validation => ExitCode::from(1),
        ErrorKind::Numerical => ExitCode::from(2),
        ErrorKind::Io => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome: Result<ExitCode, Error> = match cli.command {
        Command::Run { scenario, flags } => {
            let text = match std::fs::read_to_string(&scenario) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {}: {e}", scenario.display());
                    return ExitCode::from(1);
                }
            };
            parse_scenario(&text)
                .and_then(|s| execute_run(s, &flags))
                .map(|_| ExitCode::SUCCESS)
        }
        Command::ListBuiltins => {
            for (name, description) in builtin_descriptions() {
                println!("{name:<26} {description}");
            }
            println!(
                "\nrandom families accept a seed suffix, e.g. `run-builtin random_lindblad:3`"
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::RunBuiltin { name, flags } => builtin_scenario(
            &name,
            &BuiltinOptions {
                steps: flags.steps,
                ..Default::default()
            },
        )
        .and_then(|s| execute_run(s, &flags))
        .map(|_| ExitCode::SUCCESS),
        Command::Verify => {
            let results = acceptance::run_all();
            for r in &results {
                println!("{}", acceptance::format_result(r));
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            if failed == 0 {
                println!("all {} criteria passed", results.len());
                Ok(ExitCode::SUCCESS)
            } else {
                println!("{failed} of {} criteria failed", results.len());
                Ok(ExitCode::from(2))
            }
        }
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
