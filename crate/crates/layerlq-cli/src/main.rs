//! Command-line front end for layered guaranteed-cost synthesis.
//!
//! Every command reads a TOML scenario (except `bench` and `casestudy`,
//! which carry the bundled case study), writes a JSON report to stdout or
//! `--report`, and signals its outcome through the exit code:
//! 0 success, 1 output I/O, 2 malformed input or usage, 3 mismatched
//! dimensions, 4 infeasible (certificate, definiteness, rank, or solver).
//! Failures additionally print a single JSON line to stderr.

mod bench;
mod failure;
mod reports;
mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use layerlq::simulate::Controller;

use failure::Failure;
use reports::{
    emit_report, run_simulation, run_synthesis, write_trace_file, ComposeSummary, X0Source,
    SCHEMA_VERSION,
};
use scenario::{doc_to_toml, florentine_doc, load_scenario, realize_doc, LoadedScenario};

#[derive(Parser)]
#[command(
    name = "layerlq",
    version,
    about = "Guaranteed-cost LQ synthesis on layered networks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compose the layered plant and report its dimensions.
    Compose {
        /// Scenario file (TOML).
        scenario: PathBuf,
        /// Also write the dense composed matrices as JSON.
        #[arg(long, value_name = "FILE")]
        matrices: Option<PathBuf>,
        /// Write the report here instead of stdout.
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
    },
    /// Synthesize the guaranteed-cost design and verify it.
    Synthesize {
        /// Scenario file (TOML).
        scenario: PathBuf,
        /// Demand strictly negative-definite uncertainty coupling on every
        /// layer, not just semidefinite.
        #[arg(long)]
        strict_certificates: bool,
        /// Write the report here instead of stdout.
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
    },
    /// Synthesize, then integrate the closed loop on the realized plant and
    /// audit the cost bound.
    Simulate {
        /// Scenario file (TOML).
        scenario: PathBuf,
        /// Override the scenario's controller choice.
        #[arg(long, value_enum)]
        controller: Option<ControllerArg>,
        /// Write the state/input/cost trajectory as CSV.
        #[arg(long, value_name = "FILE")]
        trace: Option<PathBuf>,
        /// Keep every n-th sample in the trace (0 = thin to about 2000 rows).
        #[arg(long, value_name = "N", default_value_t = 0)]
        trace_stride: usize,
        /// Write the report here instead of stdout.
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
    },
    /// Time layered against monolithic synthesis on the bundled case study.
    Bench {
        /// Largest province count to measure (runs 1..=N).
        #[arg(value_parser = clap::value_parser!(u32).range(1..))]
        max_provinces: u32,
        /// Timed repetitions per measurement (median is reported).
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
        repeats: u32,
        /// Emit CSV instead of the table.
        #[arg(long)]
        csv: bool,
    },
    /// Bundled case studies.
    #[command(subcommand)]
    Casestudy(Casestudy),
}

#[derive(Subcommand)]
enum Casestudy {
    /// Opinion dynamics on interaction groups × elite families × provinces,
    /// with the destabilizing social–political tie realized at its bound.
    Florentine {
        /// Province count (1..=4).
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=4))]
        provinces: u32,
        /// Write the report here instead of stdout.
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
        /// Write the guaranteed controller's trajectory as CSV.
        #[arg(long, value_name = "FILE")]
        trace: Option<PathBuf>,
        /// Write the baseline controller's trajectory as CSV.
        #[arg(long, value_name = "FILE")]
        baseline_trace: Option<PathBuf>,
        /// Keep every n-th sample in traces (0 = thin to about 2000 rows).
        #[arg(long, value_name = "N", default_value_t = 0)]
        trace_stride: usize,
        /// Write the case study as a scenario file that reproduces it.
        #[arg(long, value_name = "FILE")]
        emit_scenario: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy)]
enum ControllerArg {
    Baseline,
    Guaranteed,
}

impl From<ControllerArg> for Controller {
    fn from(c: ControllerArg) -> Controller {
        match c {
            ControllerArg::Baseline => Controller::BaselineLqr,
            ControllerArg::Guaranteed => Controller::Guaranteed,
        }
    }
}

/// Session seed for generated initial states: `LAYERLQ_SEED`, default 42.
fn effective_seed() -> Result<u64, Failure> {
    match std::env::var("LAYERLQ_SEED") {
        Err(std::env::VarError::NotPresent) => Ok(42),
        Err(e) => Err(Failure::parse(format!("LAYERLQ_SEED: {e}"))),
        Ok(text) => text
            .trim()
            .parse()
            .map_err(|e| Failure::parse(format!("LAYERLQ_SEED `{text}` is not a u64: {e}"))),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::from(f.exit)
        }
    }
}

fn run(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Compose {
            scenario,
            matrices,
            report,
        } => compose_cmd(&scenario, matrices.as_deref(), report.as_deref()),
        Cmd::Synthesize {
            scenario,
            strict_certificates,
            report,
        } => synthesize_cmd(&scenario, strict_certificates, report.as_deref()),
        Cmd::Simulate {
            scenario,
            controller,
            trace,
            trace_stride,
            report,
        } => simulate_cmd(
            &scenario,
            controller.map(Controller::from),
            trace.as_deref(),
            trace_stride,
            report.as_deref(),
        ),
        Cmd::Bench {
            max_provinces,
            repeats,
            csv,
        } => {
            let rows = bench::run_bench(max_provinces as usize, repeats as usize)?;
            bench::print_rows(&rows, csv);
            Ok(())
        }
        Cmd::Casestudy(Casestudy::Florentine {
            provinces,
            report,
            trace,
            baseline_trace,
            trace_stride,
            emit_scenario,
        }) => florentine_cmd(
            provinces as usize,
            report.as_deref(),
            trace.as_deref(),
            baseline_trace.as_deref(),
            trace_stride,
            emit_scenario.as_deref(),
        ),
    }
}

#[derive(Serialize)]
struct ComposeReport {
    schema_version: u32,
    command: &'static str,
    status: &'static str,
    compose: ComposeSummary,
}

#[derive(Serialize)]
struct MatricesFile {
    schema_version: u32,
    a_oplus: Vec<Vec<f64>>,
    b_otimes: Vec<Vec<f64>>,
}

fn rows_of(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn compose_cmd(
    scenario: &Path,
    matrices: Option<&Path>,
    report: Option<&Path>,
) -> Result<(), Failure> {
    let loaded = load_scenario(scenario)?;
    let plant = layerlq::synthesis::compose(&loaded.layers)?;
    if let Some(path) = matrices {
        let file = MatricesFile {
            schema_version: SCHEMA_VERSION,
            a_oplus: rows_of(&plant.a_oplus),
            b_otimes: rows_of(&plant.b_otimes),
        };
        emit_report(&file, Some(path))?;
    }
    emit_report(
        &ComposeReport {
            schema_version: SCHEMA_VERSION,
            command: "compose",
            status: "ok",
            compose: ComposeSummary::from_plant(&plant),
        },
        report,
    )
}

fn synthesize_cmd(scenario: &Path, strict: bool, report: Option<&Path>) -> Result<(), Failure> {
    let loaded = load_scenario(scenario)?;
    let run = run_synthesis(&loaded, strict)?;
    emit_report(&run.report, report)?;
    match run.failure {
        None => Ok(()),
        Some(f) => Err(f),
    }
}

fn simulate_cmd(
    scenario: &Path,
    controller: Option<Controller>,
    trace: Option<&Path>,
    trace_stride: usize,
    report: Option<&Path>,
) -> Result<(), Failure> {
    let loaded = load_scenario(scenario)?;
    let run = run_synthesis(&loaded, false)?;
    run.feasible_design()?;
    let (x0, seed) = loaded.initial_state(run.plant.state_dim(), effective_seed()?)?;
    let x0_source = match seed {
        Some(seed) => X0Source::Seed { seed },
        None => X0Source::Explicit,
    };
    let controller = controller.unwrap_or(loaded.controller);
    let mut outcome = run_simulation(&loaded, &run, controller, x0, x0_source)?;
    if let Some(path) = trace {
        write_trace_file(&outcome.trace, trace_stride, path)?;
        outcome.report.trace_file = Some(path.display().to_string());
    }
    emit_report(&outcome.report, report)
}

#[derive(Serialize)]
struct CasestudyReport {
    schema_version: u32,
    command: &'static str,
    status: &'static str,
    provinces: usize,
    seed: u64,
    synthesis: reports::SynthesizeReport,
    comparison: ComparisonSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    baseline_trace_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scenario_file: Option<String>,
}

#[derive(Serialize)]
struct ComparisonSection {
    baseline: layerlq::simulate::CostReport,
    guaranteed: layerlq::simulate::CostReport,
}

fn florentine_cmd(
    provinces: usize,
    report: Option<&Path>,
    trace: Option<&Path>,
    baseline_trace: Option<&Path>,
    trace_stride: usize,
    emit_scenario: Option<&Path>,
) -> Result<(), Failure> {
    let seed = effective_seed()?;
    let doc = florentine_doc(provinces, seed);
    let mut scenario_file = None;
    if let Some(path) = emit_scenario {
        let text = doc_to_toml(&doc)?;
        std::fs::write(path, text)
            .map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))?;
        scenario_file = Some(path.display().to_string());
    }
    // The case study runs through the same document path a user-supplied
    // scenario takes, so the emitted file reproduces it exactly.
    let loaded: LoadedScenario = realize_doc(&doc, Path::new("."))?;
    let run = run_synthesis(&loaded, false)?;
    run.feasible_design()?;
    let (x0, used_seed) = loaded.initial_state(run.plant.state_dim(), seed)?;
    let seed = used_seed.unwrap_or(seed);

    let guaranteed = run_simulation(
        &loaded,
        &run,
        Controller::Guaranteed,
        x0.clone(),
        X0Source::Seed { seed },
    )?;
    let baseline = run_simulation(
        &loaded,
        &run,
        Controller::BaselineLqr,
        x0,
        X0Source::Seed { seed },
    )?;

    let mut trace_file = None;
    if let Some(path) = trace {
        write_trace_file(&guaranteed.trace, trace_stride, path)?;
        trace_file = Some(path.display().to_string());
    }
    let mut baseline_trace_file = None;
    if let Some(path) = baseline_trace {
        write_trace_file(&baseline.trace, trace_stride, path)?;
        baseline_trace_file = Some(path.display().to_string());
    }

    emit_report(
        &CasestudyReport {
            schema_version: SCHEMA_VERSION,
            command: "casestudy",
            status: "ok",
            provinces,
            seed,
            synthesis: run.report,
            comparison: ComparisonSection {
                baseline: baseline.report.cost,
                guaranteed: guaranteed.report.cost,
            },
            trace_file,
            baseline_trace_file,
            scenario_file,
        },
        report,
    )
}
