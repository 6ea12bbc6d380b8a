//! Opinion-dynamics simulation of the closed loop and the bundled
//! three-layer Florentine case study.
//!
//! The layer model follows Taylor's influenced-attitude-change dynamics: each
//! agent integrates neighbor disagreement plus attachment to external anchor
//! signals, `ẏ_p = Σ_q a_pq (y_q − y_p) + Σ_k b_pk (s_k − y_p)`. Treating the
//! anchors `s_k` as the control channel gives the linear layer
//! `ẏ = (−ℒ − diag(Σ_k b_pk)) y + B s`, which is what [`taylor_layer`]
//! constructs.
//!
//! The simulator integrates the realized closed loop with a classical
//! fixed-step fourth-order Runge–Kutta scheme, records states and inputs, and
//! accumulates the quadratic cost with the trapezoid rule so a guaranteed
//! design can be audited against its certified bound `x₀ᵀP⊗x₀`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use std::io::Write;
use thiserror::Error;

use crate::graphs::{matrices_of, Graph};
use crate::kron::slot_product;
use crate::riccati::{
    solve_are, spectral_abscissa, AreProblem, RiccatiError, UncertaintyDirection,
    UncertaintyModel,
};
use crate::synthesis::{
    assemble, compose, default_certificates, CertificateStrategy, ComposedPlant,
    GuaranteedDesign, LayerSpec, SynthesisError,
};

/// State-norm blowup factor that truncates a run as divergent.
const DIVERGENCE_FACTOR: f64 = 1e12;
/// Relative state norm below which the tail is considered converged.
const TAIL_FACTOR: f64 = 1e-8;
/// A guaranteed run satisfies its bound when `margin ≥ −1e−3·bound`.
const MARGIN_SLACK: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulateError {
    #[error("input node {node} is out of range for a {n}-node graph")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("bad simulation config: {0}")]
    BadConfig(String),
    #[error("dimension mismatch: {what} has {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("provinces must be between 1 and 4, got {0}")]
    ProvincesOutOfRange(usize),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Riccati(#[from] RiccatiError),
}

/// One opinion-dynamics layer: the graph, the anchored nodes with their
/// attachment gains, and the resulting state-space pair.
#[derive(Debug, Clone)]
pub struct TaylorLayer {
    pub graph: Graph,
    pub input_nodes: Vec<(usize, f64)>,
    /// `−ℒ(graph) − diag(Σ_k b_pk)`.
    pub a: DMatrix<f64>,
    /// One column per anchored node, gain at the node's row.
    pub b: DMatrix<f64>,
}

/// Builds the layer dynamics from a graph and its anchored (controlled)
/// nodes. Layers without anchors get `a = −ℒ` and an empty input matrix.
pub fn taylor_layer(graph: &Graph, input_nodes: &[(usize, f64)]) -> Result<TaylorLayer, SimulateError> {
    let n = graph.node_count();
    let mut a = -matrices_of(graph).laplacian;
    let mut b = DMatrix::zeros(n, input_nodes.len());
    for (k, &(node, gain)) in input_nodes.iter().enumerate() {
        if node >= n {
            return Err(SimulateError::NodeOutOfRange { node, n });
        }
        a[(node, node)] -= gain;
        b[(node, k)] = gain;
    }
    Ok(TaylorLayer {
        graph: graph.clone(),
        input_nodes: input_nodes.to_vec(),
        a,
        b,
    })
}

/// Matrix exponential `exp(a·t)` by scaling and squaring with a truncated
/// Taylor series. Serves as the reference propagator for validating the
/// fixed-step integrator on linear systems.
pub fn matrix_exponential(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix exponential needs a square matrix");
    let m = a * t;
    let norm = m.norm();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = &m / 2f64.powi(squarings as i32);
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=30 {
        term = &term * &scaled / k as f64;
        result += &term;
        if term.norm() <= f64::EPSILON * result.norm() {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Which gain drives the simulated loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Controller {
    /// LQR designed on the nominal plant, ignoring the uncertainty.
    BaselineLqr,
    /// The assembled guaranteed-cost design.
    Guaranteed,
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub x0: DVector<f64>,
    pub t_final: f64,
    pub dt: f64,
    /// Realized uncertainty weights, one vector per layer.
    pub realized_weights: Vec<Vec<f64>>,
    pub controller: Controller,
}

impl SimulationConfig {
    fn validate(&self) -> Result<(), SimulateError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimulateError::BadConfig(format!(
                "dt must be positive and finite, got {}",
                self.dt
            )));
        }
        if !(self.t_final >= self.dt && self.t_final.is_finite()) {
            return Err(SimulateError::BadConfig(format!(
                "t_final must be at least dt, got {}",
                self.t_final
            )));
        }
        Ok(())
    }
}

/// Dense record of one closed-loop run. `running_cost` stays empty until
/// [`accumulate_cost`] fills it.
#[derive(Debug, Clone)]
pub struct SimulationTrace {
    pub times: Vec<f64>,
    /// One row per recorded instant.
    pub states: DMatrix<f64>,
    pub inputs: DMatrix<f64>,
    pub running_cost: Vec<f64>,
    /// State norm exceeded `1e12·‖x₀‖`; the trace is truncated there.
    pub divergent: bool,
    /// State norm fell below `1e-8·‖x₀‖` before `t_final`.
    pub tail_converged: bool,
}

/// Integrates `ẋ = (A − B·K)x` with classical fixed-step RK4, recording the
/// state and the input `u = −Kx` at every step. `a` is the realized
/// (perturbed) drift. Truncates on norm blowup and stops early once the
/// state norm is negligible relative to `x₀`.
pub fn integrate(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    k: &DMatrix<f64>,
    cfg: &SimulationConfig,
) -> Result<SimulationTrace, SimulateError> {
    cfg.validate()?;
    let n = a.nrows();
    if a.ncols() != n {
        return Err(SimulateError::DimensionMismatch {
            what: "drift columns",
            got: a.ncols(),
            expected: n,
        });
    }
    if b.nrows() != n {
        return Err(SimulateError::DimensionMismatch {
            what: "input matrix rows",
            got: b.nrows(),
            expected: n,
        });
    }
    let p = b.ncols();
    if k.nrows() != p || k.ncols() != n {
        return Err(SimulateError::DimensionMismatch {
            what: "gain rows",
            got: k.nrows(),
            expected: p,
        });
    }
    if cfg.x0.len() != n {
        return Err(SimulateError::DimensionMismatch {
            what: "x0",
            got: cfg.x0.len(),
            expected: n,
        });
    }

    let closed = a - b * k;
    let steps = (cfg.t_final / cfg.dt).round().max(1.0) as usize;
    let x0_norm = cfg.x0.norm();
    let blowup = DIVERGENCE_FACTOR * x0_norm.max(1e-300);
    let tail = TAIL_FACTOR * x0_norm;

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = DMatrix::<f64>::zeros(steps + 1, n);
    let mut inputs = DMatrix::<f64>::zeros(steps + 1, p);
    let mut divergent = false;
    let mut tail_converged = false;

    let mut x = cfg.x0.clone();
    let mut u = DVector::<f64>::zeros(p);
    let mut k1 = DVector::<f64>::zeros(n);
    let mut k2 = DVector::<f64>::zeros(n);
    let mut k3 = DVector::<f64>::zeros(n);
    let mut k4 = DVector::<f64>::zeros(n);
    let mut stage = DVector::<f64>::zeros(n);

    let record = |row: usize, t: f64, x: &DVector<f64>, u: &mut DVector<f64>,
                      times: &mut Vec<f64>,
                      states: &mut DMatrix<f64>,
                      inputs: &mut DMatrix<f64>| {
        times.push(t);
        states.view_mut((row, 0), (1, n)).copy_from(&x.transpose());
        k.mul_to(x, u);
        *u = -&*u;
        inputs.view_mut((row, 0), (1, p)).copy_from(&u.transpose());
    };
    record(0, 0.0, &x, &mut u, &mut times, &mut states, &mut inputs);

    let dt = cfg.dt;
    let mut rows = 1;
    for step in 1..=steps {
        closed.mul_to(&x, &mut k1);
        stage.copy_from(&x);
        stage.axpy(0.5 * dt, &k1, 1.0);
        closed.mul_to(&stage, &mut k2);
        stage.copy_from(&x);
        stage.axpy(0.5 * dt, &k2, 1.0);
        closed.mul_to(&stage, &mut k3);
        stage.copy_from(&x);
        stage.axpy(dt, &k3, 1.0);
        closed.mul_to(&stage, &mut k4);
        x.axpy(dt / 6.0, &k1, 1.0);
        x.axpy(dt / 3.0, &k2, 1.0);
        x.axpy(dt / 3.0, &k3, 1.0);
        x.axpy(dt / 6.0, &k4, 1.0);

        record(
            step,
            step as f64 * dt,
            &x,
            &mut u,
            &mut times,
            &mut states,
            &mut inputs,
        );
        rows = step + 1;
        let norm = x.norm();
        if !norm.is_finite() || norm > blowup {
            divergent = true;
            break;
        }
        if norm <= tail {
            tail_converged = true;
            break;
        }
    }

    Ok(SimulationTrace {
        times,
        states: states.rows(0, rows).into_owned(),
        inputs: inputs.rows(0, rows).into_owned(),
        running_cost: Vec::new(),
        divergent,
        tail_converged,
    })
}

/// Trapezoid-rule accumulation of `∫ xᵀQx + uᵀRu dt` along the trace. Fills
/// `trace.running_cost` and returns the total.
pub fn accumulate_cost(
    trace: &mut SimulationTrace,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<f64, SimulateError> {
    let n = trace.states.ncols();
    let p = trace.inputs.ncols();
    if q.nrows() != n || q.ncols() != n {
        return Err(SimulateError::DimensionMismatch {
            what: "state cost",
            got: q.nrows(),
            expected: n,
        });
    }
    if r.nrows() != p || r.ncols() != p {
        return Err(SimulateError::DimensionMismatch {
            what: "input cost",
            got: r.nrows(),
            expected: p,
        });
    }
    let rows = trace.times.len();
    let mut running = Vec::with_capacity(rows);
    let mut previous = 0.0;
    let mut total = 0.0;
    for i in 0..rows {
        let x = trace.states.row(i).transpose();
        let u = trace.inputs.row(i).transpose();
        let integrand = (x.transpose() * q * &x)[(0, 0)] + (u.transpose() * r * &u)[(0, 0)];
        if i > 0 {
            let dt = trace.times[i] - trace.times[i - 1];
            total += 0.5 * dt * (previous + integrand);
        }
        running.push(total);
        previous = integrand;
    }
    trace.running_cost = running;
    Ok(total)
}

/// Outcome of one audited run: the simulated cost against the certified (or
/// nominally predicted) bound, with the realized closed-loop spectrum.
#[derive(Debug, Clone, Serialize)]
pub struct CostReport {
    pub controller: Controller,
    pub j_sim: f64,
    /// `x₀ᵀP⊗x₀` for the guaranteed design; the nominal-model cost
    /// prediction for the baseline.
    pub bound: f64,
    /// `bound − j_sim`; a guaranteed run satisfies its certificate when this
    /// is not materially negative.
    pub margin: f64,
    pub satisfied: bool,
    /// Largest eigenvalue real part of the realized closed loop.
    pub spectral_abscissa: f64,
    pub divergent: bool,
    pub tail_converged: bool,
}

/// Runs the configured controller on the realized plant and audits the cost.
/// The baseline controller is the LQR for the nominal composed plant with
/// the same composite costs; for these Kronecker-structured costs it equals
/// the lifted layer-1 LQR gain, so it is computed at layer-1 scale.
pub fn run_controller(
    layers: &[LayerSpec],
    design: &GuaranteedDesign,
    plant: &ComposedPlant,
    cfg: &SimulationConfig,
) -> Result<(SimulationTrace, CostReport), SimulateError> {
    let delta = plant.realize_delta(&cfg.realized_weights)?;
    let a_realized = &plant.a_oplus + delta;

    let (gain, bound) = match cfg.controller {
        Controller::Guaranteed => {
            let bound = (cfg.x0.transpose() * &design.p_otimes * &cfg.x0)[(0, 0)];
            (design.k_otimes.clone(), bound)
        }
        Controller::BaselineLqr => {
            let b1 = layers[0]
                .b
                .clone()
                .ok_or(SynthesisError::MissingInput)?;
            let problem =
                AreProblem::new(layers[0].a.clone(), b1, design.q1.clone(), design.r1.clone())?;
            let nominal = solve_are(&problem)?;
            let identities: Vec<DMatrix<f64>> = plant
                .layer_dims
                .iter()
                .map(|&d| DMatrix::identity(d, d))
                .collect();
            let gain = slot_product(&identities, 1, &nominal.gain).map_err(SynthesisError::from)?;
            let mut p_factors = vec![nominal.p.clone()];
            p_factors.extend(design.certificates.m_list.iter().cloned());
            let p_nominal =
                crate::kron::kron_many(&p_factors).map_err(SynthesisError::from)?;
            let bound = (cfg.x0.transpose() * p_nominal * &cfg.x0)[(0, 0)];
            (gain, bound)
        }
    };

    let closed = &a_realized - &plant.b_otimes * &gain;
    let abscissa = spectral_abscissa(&closed)?;
    let mut trace = integrate(&a_realized, &plant.b_otimes, &gain, cfg)?;
    let j_sim = accumulate_cost(&mut trace, &design.q_otimes, &design.r_otimes)?;
    let margin = bound - j_sim;
    let report = CostReport {
        controller: cfg.controller,
        j_sim,
        bound,
        margin,
        satisfied: margin >= -MARGIN_SLACK * bound,
        spectral_abscissa: abscissa,
        divergent: trace.divergent,
        tail_converged: trace.tail_converged,
    };
    Ok((trace, report))
}

/// A full simulation scenario: the layer stack, layer-1 costs, certificate
/// strategy, and the run configuration.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub layers: Vec<LayerSpec>,
    pub q1: DMatrix<f64>,
    pub r1: DMatrix<f64>,
    pub strategy: CertificateStrategy,
    pub config: SimulationConfig,
}

/// Paired audit of the nominal LQR and the guaranteed design on the same
/// realized plant.
#[derive(Debug, Clone, Serialize)]
pub struct ControllerComparison {
    pub baseline: CostReport,
    pub guaranteed: CostReport,
}

/// Synthesizes the guaranteed design for the scenario, then runs both
/// controllers on the same perturbed plant and reports both audits.
pub fn compare_controllers(scenario: &Scenario) -> Result<ControllerComparison, SimulateError> {
    let plant = compose(&scenario.layers)?;
    let certificates = default_certificates(&scenario.layers, scenario.strategy)?;
    let design = assemble(
        &scenario.layers,
        &certificates,
        scenario.q1.clone(),
        scenario.r1.clone(),
    )?;
    let mut cfg = scenario.config.clone();
    cfg.controller = Controller::Guaranteed;
    let (_, guaranteed) = run_controller(&scenario.layers, &design, &plant, &cfg)?;
    cfg.controller = Controller::BaselineLqr;
    let (_, baseline) = run_controller(&scenario.layers, &design, &plant, &cfg)?;
    Ok(ControllerComparison {
        baseline,
        guaranteed,
    })
}

/// Writes the trace as CSV with header `t,x_0..x_{n-1},u_0..u_{p-1},J`,
/// emitting every `stride`-th row plus the final one. Requires the running
/// cost to be accumulated first.
pub fn write_trace_csv<W: Write>(
    trace: &SimulationTrace,
    stride: usize,
    out: &mut W,
) -> std::io::Result<()> {
    let rows = trace.times.len();
    let n = trace.states.ncols();
    let p = trace.inputs.ncols();
    assert_eq!(
        trace.running_cost.len(),
        rows,
        "accumulate the cost before writing the trace"
    );
    let stride = stride.max(1);
    let mut header = String::from("t");
    for i in 0..n {
        header.push_str(&format!(",x_{i}"));
    }
    for i in 0..p {
        header.push_str(&format!(",u_{i}"));
    }
    header.push_str(",J");
    writeln!(out, "{header}")?;
    let write_row = |i: usize, out: &mut W| -> std::io::Result<()> {
        let mut line = format!("{:.6}", trace.times[i]);
        for j in 0..n {
            line.push_str(&format!(",{:.9e}", trace.states[(i, j)]));
        }
        for j in 0..p {
            line.push_str(&format!(",{:.9e}", trace.inputs[(i, j)]));
        }
        line.push_str(&format!(",{:.9e}", trace.running_cost[i]));
        writeln!(out, "{line}")
    };
    let mut last_written = None;
    for i in (0..rows).step_by(stride) {
        write_row(i, out)?;
        last_written = Some(i);
    }
    if last_written != Some(rows - 1) && rows > 0 {
        write_row(rows - 1, out)?;
    }
    Ok(())
}

/// Deterministic pseudo-random unit vector: standard normal entries from a
/// seeded ChaCha8 stream, normalized.
pub fn seeded_unit_vector(dim: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
    let norm = v.norm();
    if norm > 0.0 {
        v /= norm;
    }
    v
}

/// Bundled layer-1 graph: the four interaction groups
/// {0: social, 1: political, 2: business, 3: financial} with unit ties
/// social–political, social–financial, political–business, and
/// political–financial. The social–political tie is the one subject to the
/// sign-flip uncertainty.
pub fn family_groups_graph() -> Graph {
    Graph::undirected(4, &[(0, 1, 1.0), (0, 3, 1.0), (1, 2, 1.0), (1, 3, 1.0)])
        .expect("bundled graph is valid")
}

/// Bundled layer-2 graph: the 15-family Renaissance-Florence marriage
/// network (the classical Padgett data with the isolated family dropped),
/// alphabetical node order: Acciaiuoli, Albizzi, Barbadori, Bischeri,
/// Castellani, Ginori, Guadagni, Lamberteschi, Medici, Pazzi, Peruzzi,
/// Ridolfi, Salviati, Strozzi, Tornabuoni.
pub fn elite_families_graph() -> Graph {
    let edges: [(usize, usize); 20] = [
        (0, 8),
        (1, 5),
        (1, 6),
        (1, 8),
        (2, 4),
        (2, 8),
        (3, 6),
        (3, 10),
        (3, 13),
        (4, 10),
        (4, 13),
        (6, 7),
        (6, 14),
        (8, 11),
        (8, 12),
        (8, 14),
        (9, 12),
        (10, 13),
        (11, 13),
        (11, 14),
    ];
    let weighted: Vec<(usize, usize, f64)> = edges.iter().map(|&(a, b)| (a, b, 1.0)).collect();
    Graph::undirected(15, &weighted).expect("bundled graph is valid")
}

/// Bundled layer-3 graph: a path over the requested number of provinces.
pub fn province_path_graph(provinces: usize) -> Graph {
    let edges: Vec<(usize, usize, f64)> = (1..provinces).map(|i| (i - 1, i, 1.0)).collect();
    Graph::undirected(provinces, &edges).expect("bundled graph is valid")
}

/// Builds the three bundled opinion layers for the case study at the given
/// province count (≥ 1, unchecked — the scenario wrapper enforces the
/// supported 1..=4 range). Layer 1 anchors the financial group with unit
/// gain and carries the single sign-flip uncertainty direction with weight
/// bound 2.
pub fn florentine_layers(provinces: usize) -> Result<Vec<LayerSpec>, SimulateError> {
    if provinces == 0 {
        return Err(SimulateError::ProvincesOutOfRange(provinces));
    }
    let groups = taylor_layer(&family_groups_graph(), &[(3, 1.0)])?;
    let mut direction = DMatrix::zeros(4, 4);
    direction[(0, 1)] = 1.0;
    direction[(1, 0)] = 1.0;
    let layer1 = LayerSpec::new(groups.a)
        .with_input(groups.b)
        .with_uncertainty(UncertaintyModel {
            directions: vec![UncertaintyDirection {
                direction,
                weight_bound: 2.0,
            }],
        });
    let families = taylor_layer(&elite_families_graph(), &[])?;
    let provinces_layer = taylor_layer(&province_path_graph(provinces), &[])?;
    Ok(vec![
        layer1,
        LayerSpec::new(families.a),
        LayerSpec::new(provinces_layer.a),
    ])
}

/// The bundled three-layer case study: interaction groups × elite families ×
/// provinces, with the sign-flip uncertainty realized at `w₁ = 2`, unit
/// costs on layer 1, identity certificates, and a seeded unit initial state.
pub fn florentine_scenario(provinces: usize, seed: u64) -> Result<Scenario, SimulateError> {
    if !(1..=4).contains(&provinces) {
        return Err(SimulateError::ProvincesOutOfRange(provinces));
    }
    let layers = florentine_layers(provinces)?;
    let dim = 4 * 15 * provinces;
    Ok(Scenario {
        layers,
        q1: DMatrix::identity(4, 4),
        r1: DMatrix::identity(1, 1),
        strategy: CertificateStrategy::Identity,
        config: SimulationConfig {
            x0: seeded_unit_vector(dim, seed),
            t_final: 50.0,
            dt: 1e-3,
            realized_weights: vec![vec![2.0], vec![], vec![]],
            controller: Controller::Guaranteed,
        },
    })
}
