//! JSON reports and the synthesis pipeline shared by `synthesize`,
//! `simulate`, and `casestudy`.
//!
//! Reports are deterministic: no timestamps, no durations, no machine
//! details. Two runs of the same command on the same inputs produce
//! byte-identical output, so reports can be diffed and checked in.

use nalgebra::DVector;
use serde::Serialize;

use layerlq::riccati::controllability_rank;
use layerlq::simulate::{
    run_controller, write_trace_csv, Controller, CostReport, SimulationConfig, SimulationTrace,
};
use layerlq::synthesis::{
    assemble, build_l_factor, check_stabilizability, compose, default_certificates,
    enforce_strict_certificates, verify_generalized_are, CertificateVerdict, ComposedPlant,
    GuaranteedDesign, SynthesisError,
};

use crate::failure::{Failure, EXIT_INFEASIBLE};
use crate::scenario::LoadedScenario;

pub const SCHEMA_VERSION: u32 = 1;

/// Relative gate on `‖LᵀL − Q⊗‖`; the factorization is exact up to rounding,
/// so anything above this indicates a broken assembly.
pub const COST_FACTOR_GATE: f64 = 1e-8;

#[derive(Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
}

#[derive(Serialize)]
pub struct ComposeSummary {
    pub layer_dims: Vec<usize>,
    pub state_dim: usize,
    pub input_dim: usize,
    /// Number of uncertainty directions declared per layer.
    pub uncertainty_directions: Vec<usize>,
}

impl ComposeSummary {
    pub fn from_plant(plant: &ComposedPlant) -> Self {
        ComposeSummary {
            layer_dims: plant.layer_dims.clone(),
            state_dim: plant.state_dim(),
            input_dim: plant.b_otimes.ncols(),
            uncertainty_directions: plant
                .delta_structure
                .iter()
                .map(|m| m.directions.len())
                .collect(),
        }
    }
}

#[derive(Serialize)]
pub struct CertificateSection {
    pub strategy: &'static str,
    pub strict_requested: bool,
    /// True when every layer's uncertainty coupling is strictly negative
    /// definite at the weight extremes. Only meaningful to demand via
    /// `--strict-certificates`; the plain semidefinite verdict is what the
    /// cost guarantee needs.
    pub strict_satisfied: bool,
    pub layers: Vec<CertificateVerdict>,
}

#[derive(Serialize)]
pub struct ChecksSection {
    /// Frobenius residual of the composite modified equation.
    pub residual: f64,
    pub residual_scale: f64,
    pub residual_ok: bool,
    pub domination_min_eig: f64,
    pub domination_ok: bool,
    pub domination_samples: usize,
    pub p_otimes_min_eig: f64,
    pub q_otimes_min_eig: f64,
    pub r_otimes_min_eig: f64,
    /// `‖LᵀL − Q⊗‖ / max(1, ‖Q⊗‖)` for the assembled cost factor.
    pub cost_factor_rel_error: f64,
    pub cost_factor_ok: bool,
}

#[derive(Serialize)]
pub struct RanksSection {
    pub state_dim: usize,
    pub controllability_rank: usize,
    pub controllable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observability_rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observable: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_loop_abscissa: Option<f64>,
}

#[derive(Serialize)]
pub struct Layer1Section {
    pub residual: f64,
    pub closed_loop_abscissa: f64,
    pub iterations: usize,
}

#[derive(Serialize)]
pub struct SynthesizeReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
    pub compose: ComposeSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificates: Option<CertificateSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checks: Option<ChecksSection>,
    pub ranks: RanksSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layer1: Option<Layer1Section>,
}

/// Everything a command needs after running the synthesis pipeline: the
/// report to write, the plant, the design when one exists, and the failure
/// that should decide the exit code when the pipeline fell short.
pub struct SynthesisRun {
    pub report: SynthesizeReport,
    pub plant: ComposedPlant,
    pub design: Option<GuaranteedDesign>,
    pub failure: Option<Failure>,
}

impl SynthesisRun {
    /// The design, or the recorded infeasibility when there is none or a
    /// verification gate failed.
    pub fn feasible_design(&self) -> Result<&GuaranteedDesign, Failure> {
        match (&self.design, &self.failure) {
            (Some(design), None) => Ok(design),
            (_, Some(f)) => Err(f.clone()),
            (None, None) => Err(Failure::infeasible("synthesis produced no design")),
        }
    }
}

/// Classifies a synthesis-stage error: infeasibility (exit 4) is recorded in
/// the report and the pipeline degrades gracefully; anything else aborts.
fn soften(e: SynthesisError) -> Result<Failure, Failure> {
    let f = Failure::from(e);
    if f.exit == EXIT_INFEASIBLE {
        Ok(f)
    } else {
        Err(f)
    }
}

/// Composes the plant, builds certificates, assembles the design, and runs
/// every verification gate, collecting the outcome into one report.
///
/// Structural errors (bad shapes, bad indices) abort with the matching exit
/// code before any report exists. Infeasibility — a failed certificate, an
/// indefinite composed cost, a solver breakdown, a verification gate that
/// does not pass — is *reported*: the returned run carries a partial report,
/// the failure, and `status = "infeasible"`.
pub fn run_synthesis(loaded: &LoadedScenario, strict: bool) -> Result<SynthesisRun, Failure> {
    let plant = compose(&loaded.layers)?;
    let compose_summary = ComposeSummary::from_plant(&plant);
    let plant_ranks = || {
        let rank = controllability_rank(&plant.a_oplus, &plant.b_otimes);
        RanksSection {
            state_dim: plant.state_dim(),
            controllability_rank: rank,
            controllable: rank == plant.state_dim(),
            observability_rank: None,
            observable: None,
            closed_loop_abscissa: None,
        }
    };

    let mut failure: Option<Failure> = None;

    let certificates = match default_certificates(&loaded.layers, loaded.strategy) {
        Ok(c) => Some(c),
        Err(e) => {
            failure = Some(soften(e)?);
            None
        }
    };

    let strict_satisfied = certificates
        .as_ref()
        .map(|c| c.semidefinite_report.iter().all(|v| v.g_strict))
        .unwrap_or(false);
    if strict && failure.is_none() {
        if let Some(c) = &certificates {
            if let Err(e) = enforce_strict_certificates(c) {
                failure = Some(soften(e)?);
            }
        }
    }

    let certificate_section = certificates.as_ref().map(|c| CertificateSection {
        strategy: strategy_name(loaded),
        strict_requested: strict,
        strict_satisfied,
        layers: c.semidefinite_report.clone(),
    });

    // Assembly and verification proceed even after a strictness refusal so
    // the report still shows what the plain guarantee would give.
    let mut design = None;
    let mut checks = None;
    let mut layer1 = None;
    let mut ranks = None;
    if let Some(certs) = &certificates {
        match assemble(&loaded.layers, certs, loaded.q1.clone(), loaded.r1.clone()) {
            Err(e) => {
                let f = soften(e)?;
                failure.get_or_insert(f);
            }
            Ok(d) => {
                let verification = verify_generalized_are(&d, &plant)?;
                let l = build_l_factor(&d)?;
                let ltl = l.transpose() * &l;
                let cost_factor_rel_error =
                    (&ltl - &d.q_otimes).norm() / d.q_otimes.norm().max(1.0);
                let cost_factor_ok = cost_factor_rel_error <= COST_FACTOR_GATE;
                let stab = check_stabilizability(&d, &plant, &l)?;

                checks = Some(ChecksSection {
                    residual: verification.residual,
                    residual_scale: verification.residual_scale,
                    residual_ok: verification.residual_ok,
                    domination_min_eig: verification.domination_min_eig,
                    domination_ok: verification.domination_ok,
                    domination_samples: verification.domination_samples,
                    p_otimes_min_eig: d.checks.p_otimes_min_eig,
                    q_otimes_min_eig: d.checks.q_otimes_min_eig,
                    r_otimes_min_eig: d.checks.r_otimes_min_eig,
                    cost_factor_rel_error,
                    cost_factor_ok,
                });
                layer1 = Some(Layer1Section {
                    residual: d.checks.layer1_residual,
                    closed_loop_abscissa: d.checks.layer1_closed_loop_abscissa,
                    iterations: d.checks.layer1_iterations,
                });
                ranks = Some(RanksSection {
                    state_dim: stab.state_dim,
                    controllability_rank: stab.controllability_rank,
                    controllable: stab.controllable,
                    observability_rank: Some(stab.observability_rank),
                    observable: Some(stab.observable),
                    closed_loop_abscissa: Some(stab.closed_loop_abscissa),
                });

                if failure.is_none() {
                    failure = first_gate_failure(checks.as_ref().unwrap(), &stab);
                }
                design = Some(d);
            }
        }
    }

    let ranks = ranks.unwrap_or_else(plant_ranks);
    let report = SynthesizeReport {
        schema_version: SCHEMA_VERSION,
        command: "synthesize",
        status: if failure.is_none() { "ok" } else { "infeasible" },
        error: failure.as_ref().map(|f| ErrorBody {
            code: f.reason,
            message: f.message.clone(),
        }),
        compose: compose_summary,
        certificates: certificate_section,
        checks,
        ranks,
        layer1,
    };

    Ok(SynthesisRun {
        report,
        plant,
        design,
        failure,
    })
}

fn strategy_name(loaded: &LoadedScenario) -> &'static str {
    use layerlq::synthesis::CertificateStrategy;
    match loaded.strategy {
        CertificateStrategy::Identity => "identity",
        CertificateStrategy::Lyapunov => "lyapunov",
    }
}

fn first_gate_failure(
    checks: &ChecksSection,
    stab: &layerlq::synthesis::StabilizabilityReport,
) -> Option<Failure> {
    let gate = |ok: bool, what: String| if ok { None } else { Some(what) };
    let reason = gate(
        checks.residual_ok,
        format!(
            "composite equation residual {:.3e} exceeds its gate",
            checks.residual
        ),
    )
    .or_else(|| {
        gate(
            checks.domination_ok,
            format!(
                "majorant fails to dominate a sampled realization (min eig {:.3e})",
                checks.domination_min_eig
            ),
        )
    })
    .or_else(|| {
        gate(
            checks.cost_factor_ok,
            format!(
                "cost factor mismatch: relative error {:.3e}",
                checks.cost_factor_rel_error
            ),
        )
    })
    .or_else(|| {
        gate(
            stab.controllable,
            format!(
                "composed pair is uncontrollable: rank {} of {}",
                stab.controllability_rank, stab.state_dim
            ),
        )
    })
    .or_else(|| {
        gate(
            stab.observable,
            format!(
                "composed cost factor is unobservable: rank {} of {}",
                stab.observability_rank, stab.state_dim
            ),
        )
    });
    reason.map(Failure::infeasible)
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum X0Source {
    Seed { seed: u64 },
    Explicit,
}

#[derive(Serialize)]
pub struct SimulateReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub controller: Controller,
    pub realized_weights: Vec<Vec<f64>>,
    pub x0_source: X0Source,
    pub state_dim: usize,
    pub dt: f64,
    pub t_final: f64,
    pub steps: usize,
    pub cost: CostReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_file: Option<String>,
}

pub struct SimulationOutcome {
    pub report: SimulateReport,
    pub trace: SimulationTrace,
}

/// Runs one controller on the realized plant described by the scenario.
/// Requires a fully feasible design: simulating from a failed synthesis
/// would audit a bound that does not exist.
pub fn run_simulation(
    loaded: &LoadedScenario,
    run: &SynthesisRun,
    controller: Controller,
    x0: DVector<f64>,
    x0_source: X0Source,
) -> Result<SimulationOutcome, Failure> {
    let design = run.feasible_design()?;
    let cfg = SimulationConfig {
        x0,
        t_final: loaded.t_final,
        dt: loaded.dt,
        realized_weights: loaded.realized_weights.clone(),
        controller,
    };
    let (trace, cost) = run_controller(&loaded.layers, design, &run.plant, &cfg)?;
    let report = SimulateReport {
        schema_version: SCHEMA_VERSION,
        command: "simulate",
        controller,
        realized_weights: loaded.realized_weights.clone(),
        x0_source,
        state_dim: run.plant.state_dim(),
        dt: loaded.dt,
        t_final: loaded.t_final,
        steps: trace.times.len().saturating_sub(1),
        cost,
        trace_file: None,
    };
    Ok(SimulationOutcome { report, trace })
}

/// Writes the trace as CSV, thinning to roughly 2000 rows unless the caller
/// fixed a stride.
pub fn write_trace_file(
    trace: &SimulationTrace,
    stride: usize,
    path: &std::path::Path,
) -> Result<(), Failure> {
    let stride = if stride == 0 {
        (trace.times.len() / 2000).max(1)
    } else {
        stride
    };
    let file = std::fs::File::create(path)
        .map_err(|e| Failure::io(format!("cannot create {}: {e}", path.display())))?;
    let mut out = std::io::BufWriter::new(file);
    write_trace_csv(trace, stride, &mut out)
        .and_then(|()| std::io::Write::flush(&mut out))
        .map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
}

/// Serializes a report as pretty JSON with a trailing newline, to stdout or
/// to the given file.
pub fn emit_report<T: Serialize>(report: &T, path: Option<&std::path::Path>) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| Failure::io(format!("report serialization: {e}")))?;
    text.push('\n');
    match path {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Failure::io(format!("cannot write {}: {e}", p.display()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;
    use std::path::Path;

    fn two_layer() -> LoadedScenario {
        parse_scenario(
            r#"
            [[layer]]
            edges = [[0, 1, 1.0], [1, 2, 1.0]]
            input_nodes = [[0, 1.0], [2, 0.5]]

            [[layer.uncertainty]]
            entries = [[0, 1, 1.0], [1, 0, 1.0]]
            weight_bound = 0.4
            realized_weight = 0.4

            [[layer]]
            edges = [[0, 1, 1.0]]
            "#,
            Path::new("."),
        )
        .unwrap()
    }

    #[test]
    fn feasible_scenario_reports_ok_and_passes_every_gate() {
        let loaded = two_layer();
        let run = run_synthesis(&loaded, false).unwrap();
        assert!(run.failure.is_none(), "{:?}", run.failure);
        assert_eq!(run.report.status, "ok");
        let checks = run.report.checks.as_ref().unwrap();
        assert!(checks.residual_ok && checks.domination_ok && checks.cost_factor_ok);
        assert_eq!(run.report.ranks.observable, Some(true));
        assert!(run.feasible_design().is_ok());
    }

    #[test]
    fn strictness_refusal_still_reports_the_design() {
        // Layer 2 carries no uncertainty, so its coupling verdict is exactly
        // zero: semidefinite, never strict.
        let loaded = two_layer();
        let run = run_synthesis(&loaded, true).unwrap();
        let failure = run.failure.as_ref().expect("strictness must fail");
        assert_eq!(failure.exit, EXIT_INFEASIBLE);
        assert_eq!(run.report.status, "infeasible");
        let certs = run.report.certificates.as_ref().unwrap();
        assert!(certs.strict_requested && !certs.strict_satisfied);
        // The non-strict design itself is still assembled and checked.
        assert!(run.report.checks.is_some());
        assert!(run.design.is_some());
        assert!(run.feasible_design().is_err());
    }

    #[test]
    fn unanchored_input_is_reported_as_uncontrollable() {
        let loaded = parse_scenario(
            r#"
            [[layer]]
            edges = [[0, 1, 1.0]]
            input_nodes = [[0, 0.0]]
            "#,
            Path::new("."),
        )
        .unwrap();
        let run = run_synthesis(&loaded, false);
        // A zero-gain anchor leaves B = 0: layer-1 synthesis itself refuses.
        let err = match run {
            Err(f) => f,
            Ok(r) => r.failure.expect("zero input must fail"),
        };
        assert_eq!(err.exit, EXIT_INFEASIBLE);
    }
}
