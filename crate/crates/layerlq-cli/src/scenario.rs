//! TOML scenario documents: the on-disk description of a layered plant, its
//! cost weights, and an optional simulation block.
//!
//! ```toml
//! [[layer]]
//! edges = [[0, 1, 1.0], [0, 3, 1.0], [1, 2, 1.0], [1, 3, 1.0]]
//! input_nodes = [[3, 1.0]]
//!
//! [[layer.uncertainty]]
//! entries = [[0, 1, 1.0], [1, 0, 1.0]]
//! weight_bound = 2.0
//! realized_weight = 2.0
//!
//! [[layer]]
//! graph = "families.graph"
//!
//! [cost]
//! q1 = { diagonal = [1.0, 1.0, 1.0, 1.0] }
//! r1 = { diagonal = [1.0] }
//!
//! [certificates]
//! strategy = "identity"
//!
//! [simulation]
//! x0_seed = 42
//! t_final = 50.0
//! dt = 0.001
//! controller = "guaranteed"
//! ```
//!
//! Each `[[layer]]` names its coupling graph either inline (`edges`, with an
//! optional `nodes` count for graphs whose highest-numbered nodes are
//! isolated) or as a `graph` path to an edge-list file, resolved relative to
//! the scenario file. Layer drift follows the opinion model `−L(G)`; layer 1
//! is additionally anchored at its `input_nodes`, each `[node, gain]` entry
//! subtracting `gain` from that diagonal and contributing one input column.
//! Only layer 1 takes inputs, and it must anchor at least one node.
//!
//! Every `[[layer.uncertainty]]` block is one perturbation direction: a
//! sparse symmetric-or-not matrix given as `entries = [[row, col, value]]`,
//! a positive `weight_bound`, and the `realized_weight` the simulator should
//! apply (defaults to 0, i.e. the nominal plant).
//!
//! Malformed content is a parse failure (exit 2); well-formed pieces that
//! disagree in size, indexing, or declared bounds are dimension failures
//! (exit 3). What the math rejects later — indefinite costs, failed
//! certificates — is not the loader's business.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use layerlq::graphs::Graph;
use layerlq::riccati::{UncertaintyDirection, UncertaintyModel};
use layerlq::simulate::{seeded_unit_vector, taylor_layer, Controller};
use layerlq::synthesis::{CertificateStrategy, LayerSpec};

use crate::failure::Failure;

pub const DEFAULT_T_FINAL: f64 = 50.0;
pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    #[serde(rename = "layer", default)]
    pub layers: Vec<LayerDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificates: Option<CertificatesDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<(usize, usize, f64)>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub input_nodes: Vec<(usize, f64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub uncertainty: Vec<UncertaintyDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintyDoc {
    pub entries: Vec<(usize, usize, f64)>,
    pub weight_bound: f64,
    #[serde(default)]
    pub realized_weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q1: Option<MatrixDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r1: Option<MatrixDoc>,
}

/// A small symmetric matrix, written either as its diagonal or in full.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixDoc {
    Diagonal { diagonal: Vec<f64> },
    Full { full: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificatesDoc {
    pub strategy: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub controller: Option<String>,
}

/// A scenario after validation: library-ready layers plus the simulation
/// settings, with the initial state still symbolic (it needs the composed
/// dimension, which only exists after `compose`).
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub layers: Vec<LayerSpec>,
    pub realized_weights: Vec<Vec<f64>>,
    pub q1: DMatrix<f64>,
    pub r1: DMatrix<f64>,
    pub strategy: CertificateStrategy,
    pub x0: Option<DVector<f64>>,
    pub x0_seed: Option<u64>,
    pub t_final: f64,
    pub dt: f64,
    pub controller: Controller,
}

impl LoadedScenario {
    /// Resolves the initial state for a composed plant of dimension `dim`.
    /// Returns the vector together with the seed that generated it (`None`
    /// when the scenario spelled the state out).
    pub fn initial_state(
        &self,
        dim: usize,
        fallback_seed: u64,
    ) -> Result<(DVector<f64>, Option<u64>), Failure> {
        if let Some(x0) = &self.x0 {
            if x0.len() != dim {
                return Err(Failure::dimension(format!(
                    "simulation.x0 has {} entries but the composed state has dimension {dim}",
                    x0.len()
                )));
            }
            return Ok((x0.clone(), None));
        }
        let seed = self.x0_seed.unwrap_or(fallback_seed);
        Ok((seeded_unit_vector(dim, seed), Some(seed)))
    }
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::parse(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_scenario(&text, base)
}

pub fn parse_scenario(text: &str, base_dir: &Path) -> Result<LoadedScenario, Failure> {
    let doc: ScenarioDoc =
        toml::from_str(text).map_err(|e| Failure::parse(format!("scenario: {e}")))?;
    realize_doc(&doc, base_dir)
}

/// Turns a parsed document into library types, enforcing every structural
/// rule the TOML grammar alone cannot express.
pub fn realize_doc(doc: &ScenarioDoc, base_dir: &Path) -> Result<LoadedScenario, Failure> {
    if doc.layers.is_empty() {
        return Err(Failure::parse("scenario declares no [[layer]] sections"));
    }

    let mut layers = Vec::with_capacity(doc.layers.len());
    let mut realized_weights = Vec::with_capacity(doc.layers.len());
    for (index, layer_doc) in doc.layers.iter().enumerate() {
        let position = index + 1;
        let graph = build_graph(layer_doc, position, base_dir)?;
        let n = graph.node_count();

        if index > 0 && !layer_doc.input_nodes.is_empty() {
            return Err(Failure::parse(format!(
                "layer {position}: only layer 1 may declare input_nodes"
            )));
        }
        if index == 0 && layer_doc.input_nodes.is_empty() {
            return Err(Failure::parse(
                "layer 1 must anchor at least one input node",
            ));
        }

        let taylor = taylor_layer(&graph, &layer_doc.input_nodes)
            .map_err(|e| Failure::from(e).prefixed(position))?;
        let mut spec = LayerSpec::new(taylor.a);
        if index == 0 {
            spec = spec.with_input(taylor.b);
        }
        spec = spec.with_uncertainty(build_uncertainty(&layer_doc.uncertainty, position, n)?);
        realized_weights.push(
            layer_doc
                .uncertainty
                .iter()
                .map(|u| u.realized_weight)
                .collect(),
        );
        layers.push(spec);
    }

    let n1 = layers[0].a.nrows();
    let m1 = layers[0].b.as_ref().map_or(0, |b| b.ncols());
    let cost = doc.cost.clone().unwrap_or(CostDoc { q1: None, r1: None });
    let q1 = match &cost.q1 {
        Some(m) => m.to_matrix(n1, "cost.q1")?,
        None => DMatrix::identity(n1, n1),
    };
    let r1 = match &cost.r1 {
        Some(m) => m.to_matrix(m1, "cost.r1")?,
        None => DMatrix::identity(m1, m1),
    };

    let strategy = match doc.certificates.as_ref().map(|c| c.strategy.as_str()) {
        None | Some("identity") => CertificateStrategy::Identity,
        Some("lyapunov") => CertificateStrategy::Lyapunov,
        Some(other) => {
            return Err(Failure::parse(format!(
                "certificates.strategy `{other}` is not recognized (expected `identity` or `lyapunov`)"
            )));
        }
    };

    let sim = doc.simulation.clone().unwrap_or(SimulationDoc {
        x0: None,
        x0_seed: None,
        t_final: None,
        dt: None,
        controller: None,
    });
    if sim.x0.is_some() && sim.x0_seed.is_some() {
        return Err(Failure::parse(
            "simulation: give either x0 or x0_seed, not both",
        ));
    }
    let t_final = sim.t_final.unwrap_or(DEFAULT_T_FINAL);
    let dt = sim.dt.unwrap_or(DEFAULT_DT);
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Failure::parse(format!(
            "simulation.dt must be positive and finite, got {dt}"
        )));
    }
    if !(t_final >= dt && t_final.is_finite()) {
        return Err(Failure::parse(format!(
            "simulation.t_final must be finite and at least dt, got {t_final}"
        )));
    }
    let controller = match sim.controller.as_deref() {
        None | Some("guaranteed") => Controller::Guaranteed,
        Some("baseline") => Controller::BaselineLqr,
        Some(other) => {
            return Err(Failure::parse(format!(
                "simulation.controller `{other}` is not recognized (expected `baseline` or `guaranteed`)"
            )));
        }
    };

    Ok(LoadedScenario {
        layers,
        realized_weights,
        q1,
        r1,
        strategy,
        x0: sim.x0.map(DVector::from_vec),
        x0_seed: sim.x0_seed,
        t_final,
        dt,
        controller,
    })
}

impl Failure {
    fn prefixed(mut self, layer: usize) -> Self {
        self.message = format!("layer {layer}: {}", self.message);
        self
    }
}

fn build_graph(layer: &LayerDoc, position: usize, base_dir: &Path) -> Result<Graph, Failure> {
    match (&layer.graph, &layer.edges) {
        (Some(_), Some(_)) => Err(Failure::parse(format!(
            "layer {position}: give either `graph` or `edges`, not both"
        ))),
        (None, None) => Err(Failure::parse(format!(
            "layer {position}: needs a `graph` file or an `edges` list"
        ))),
        (Some(file), None) => {
            if layer.nodes.is_some() {
                return Err(Failure::parse(format!(
                    "layer {position}: `nodes` conflicts with `graph` (the file carries its own count)"
                )));
            }
            let path = base_dir.join(file);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Failure::parse(format!("cannot read {}: {e}", path.display())))?;
            Graph::parse_edge_list(&text)
                .map_err(|e| Failure::parse(format!("{}: {e}", path.display())))
        }
        (None, Some(edges)) => {
            let nodes = match layer.nodes {
                Some(n) => n,
                None => {
                    let max = edges
                        .iter()
                        .map(|&(tail, head, _)| tail.max(head))
                        .max()
                        .ok_or_else(|| {
                            Failure::parse(format!(
                                "layer {position}: empty `edges` needs an explicit `nodes` count"
                            ))
                        })?;
                    max + 1
                }
            };
            Graph::undirected(nodes, edges)
                .map_err(|e| Failure::parse(format!("layer {position}: {e}")))
        }
    }
}

fn build_uncertainty(
    docs: &[UncertaintyDoc],
    position: usize,
    n: usize,
) -> Result<UncertaintyModel, Failure> {
    let mut directions = Vec::with_capacity(docs.len());
    for (k, doc) in docs.iter().enumerate() {
        let label = format!("layer {position} uncertainty {}", k + 1);
        if doc.entries.is_empty() {
            return Err(Failure::parse(format!("{label}: entries must be non-empty")));
        }
        if !(doc.weight_bound > 0.0 && doc.weight_bound.is_finite()) {
            return Err(Failure::parse(format!(
                "{label}: weight_bound must be positive and finite, got {}",
                doc.weight_bound
            )));
        }
        let mut direction = DMatrix::zeros(n, n);
        let mut seen = std::collections::HashSet::new();
        for &(row, col, value) in &doc.entries {
            if row >= n || col >= n {
                return Err(Failure::dimension(format!(
                    "{label}: entry ({row}, {col}) is outside the {n}-node layer"
                )));
            }
            if !seen.insert((row, col)) {
                return Err(Failure::parse(format!(
                    "{label}: entry ({row}, {col}) appears twice"
                )));
            }
            direction[(row, col)] = value;
        }
        directions.push(UncertaintyDirection {
            direction,
            weight_bound: doc.weight_bound,
        });
    }
    Ok(UncertaintyModel { directions })
}

impl MatrixDoc {
    pub fn to_matrix(&self, n: usize, what: &str) -> Result<DMatrix<f64>, Failure> {
        match self {
            MatrixDoc::Diagonal { diagonal } => {
                if diagonal.len() != n {
                    return Err(Failure::dimension(format!(
                        "{what}: diagonal has {} entries, expected {n}",
                        diagonal.len()
                    )));
                }
                Ok(DMatrix::from_diagonal(&DVector::from_vec(diagonal.clone())))
            }
            MatrixDoc::Full { full } => {
                if full.len() != n || full.iter().any(|row| row.len() != n) {
                    return Err(Failure::dimension(format!(
                        "{what}: full matrix must be {n}x{n}"
                    )));
                }
                let mut m = DMatrix::zeros(n, n);
                for (i, row) in full.iter().enumerate() {
                    for (j, &v) in row.iter().enumerate() {
                        m[(i, j)] = v;
                    }
                }
                Ok(m)
            }
        }
    }
}

/// The bundled case study as a document, so `--emit-scenario` writes a file
/// that round-trips through the loader into the identical plant.
pub fn florentine_doc(provinces: usize, seed: u64) -> ScenarioDoc {
    use layerlq::simulate::{elite_families_graph, family_groups_graph, province_path_graph};

    let undirected_pairs = |g: &Graph| -> Vec<(usize, usize, f64)> {
        g.edges()
            .iter()
            .filter(|e| e.tail < e.head)
            .map(|e| (e.tail, e.head, e.weight))
            .collect()
    };

    let layer_from = |g: &Graph| LayerDoc {
        graph: None,
        nodes: Some(g.node_count()),
        edges: Some(undirected_pairs(g)),
        input_nodes: Vec::new(),
        uncertainty: Vec::new(),
    };

    let mut groups = layer_from(&family_groups_graph());
    groups.input_nodes = vec![(3, 1.0)];
    groups.uncertainty = vec![UncertaintyDoc {
        entries: vec![(0, 1, 1.0), (1, 0, 1.0)],
        weight_bound: 2.0,
        realized_weight: 2.0,
    }];

    ScenarioDoc {
        layers: vec![
            groups,
            layer_from(&elite_families_graph()),
            layer_from(&province_path_graph(provinces)),
        ],
        cost: Some(CostDoc {
            q1: Some(MatrixDoc::Diagonal {
                diagonal: vec![1.0; 4],
            }),
            r1: Some(MatrixDoc::Diagonal {
                diagonal: vec![1.0],
            }),
        }),
        certificates: Some(CertificatesDoc {
            strategy: "identity".into(),
        }),
        simulation: Some(SimulationDoc {
            x0: None,
            x0_seed: Some(seed),
            t_final: Some(DEFAULT_T_FINAL),
            dt: Some(DEFAULT_DT),
            controller: Some("guaranteed".into()),
        }),
    }
}

pub fn doc_to_toml(doc: &ScenarioDoc) -> Result<String, Failure> {
    toml::to_string(doc).map_err(|e| Failure::io(format!("scenario serialization: {e}")))
}
