//! Compositional controller design for layered networks.
//!
//! A layered network evolves on the Cartesian product of per-layer graphs, so
//! the composite drift is the Kronecker sum of the layer drifts and the input
//! enters through the first layer only. This module composes the layers,
//! certifies the higher layers with positive-definite scaling matrices, and
//! assembles a guaranteed-cost design for the full network from a single
//! layer-1 solve:
//!
//! * `P⊗ = P₁⊗M₂⊗…⊗M_m` certifies the composite cost bound,
//! * `K⊗ = K₁⊗I⊗…⊗I` is the layer-1 gain broadcast across the network,
//! * `Q⊗` is the composite state cost that makes the algebra close exactly.
//!
//! Every semidefiniteness verdict carries the computed eigenvalue extremes;
//! tolerances are decisions, and the margins stay visible in the reports.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::kron::{kron_many, kron_sum_many, slot_product, KronError};
use crate::riccati::{
    build_majorant, controllability_rank, eig_sym, lyap, observability_rank, solve_guaranteed,
    spectral_abscissa, symmetrize, AreProblem, RiccatiError, UncertaintyModel,
};

/// Relative tolerance for semidefiniteness verdicts.
const TOL_PSD: f64 = 1e-9;
/// Relative residual gate for the composite design equation.
const RESIDUAL_GATE: f64 = 1e-7;
/// Absolute eigenvalue floor for the sampled domination check.
const DOMINATION_FLOOR: f64 = -1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthesisError {
    #[error("at least one layer is required")]
    NoLayers,
    #[error("layer {layer}: dynamics must be square, got {rows}x{cols}")]
    BadLayerShape {
        layer: usize,
        rows: usize,
        cols: usize,
    },
    #[error("layer {layer}: input matrix has {rows} rows for a {n}-state layer")]
    BadInputShape { layer: usize, rows: usize, n: usize },
    #[error("layer 1 must provide an input matrix")]
    MissingInput,
    #[error("layer {layer}: {source}")]
    LayerUncertainty { layer: usize, source: RiccatiError },
    #[error("certificates cover {got} layers but {expected} higher layers are present")]
    CertificateCount { got: usize, expected: usize },
    #[error("certificate for layer {layer} is {rows}x{cols}, expected {n}x{n}")]
    CertificateShape {
        layer: usize,
        rows: usize,
        cols: usize,
        n: usize,
    },
    #[error("{strategy} certificate failed on layer {layer}: {reason}")]
    CertificateFailed {
        strategy: &'static str,
        layer: usize,
        reason: String,
    },
    #[error("strict certificate check failed on layer {layer}: largest extreme eigenvalue {max_eig:.3e} is not strictly negative")]
    NotStrict { layer: usize, max_eig: f64 },
    #[error("composed state cost is indefinite: minimum eigenvalue {0:.3e}")]
    IndefiniteComposedCost(f64),
    #[error("composed input cost lost positive definiteness: minimum eigenvalue {0:.3e}")]
    IndefiniteComposedInputCost(f64),
    #[error("layer-1 design failed: {0}")]
    Layer1(#[from] RiccatiError),
    #[error(transparent)]
    Kron(#[from] KronError),
    #[error("weights for {got} layers given, plant has {expected}")]
    WeightLayerCount { got: usize, expected: usize },
}

/// One network layer: its drift, an optional input matrix (only layer 1's is
/// used in the composite input), and its structured drift uncertainty.
#[derive(Debug, Clone)]
pub struct LayerSpec {
    pub a: DMatrix<f64>,
    pub b: Option<DMatrix<f64>>,
    pub uncertainty: UncertaintyModel,
}

impl LayerSpec {
    pub fn new(a: DMatrix<f64>) -> Self {
        Self {
            a,
            b: None,
            uncertainty: UncertaintyModel::default(),
        }
    }

    pub fn with_input(mut self, b: DMatrix<f64>) -> Self {
        self.b = Some(b);
        self
    }

    pub fn with_uncertainty(mut self, uncertainty: UncertaintyModel) -> Self {
        self.uncertainty = uncertainty;
        self
    }
}

/// The composed plant: Kronecker-sum drift, broadcast input, and the per-layer
/// uncertainty kept factored (a monolithic `ΔA` is only ever materialized for
/// verification).
#[derive(Debug, Clone, PartialEq)]
pub struct ComposedPlant {
    pub a_oplus: DMatrix<f64>,
    pub b_otimes: DMatrix<f64>,
    pub delta_structure: Vec<UncertaintyModel>,
    pub layer_dims: Vec<usize>,
}

impl ComposedPlant {
    pub fn state_dim(&self) -> usize {
        self.layer_dims.iter().product()
    }

    /// Materializes `ΔA` for one realization: the Kronecker sum of per-layer
    /// perturbations at the given weights. Layers without uncertainty take an
    /// empty weight vector.
    pub fn realize_delta(&self, weights: &[Vec<f64>]) -> Result<DMatrix<f64>, SynthesisError> {
        if weights.len() != self.layer_dims.len() {
            return Err(SynthesisError::WeightLayerCount {
                got: weights.len(),
                expected: self.layer_dims.len(),
            });
        }
        let mut deltas = Vec::with_capacity(weights.len());
        for (layer_index, ((model, w), &n)) in self
            .delta_structure
            .iter()
            .zip(weights)
            .zip(&self.layer_dims)
            .enumerate()
        {
            if model.directions.is_empty() && w.is_empty() {
                deltas.push(DMatrix::zeros(n, n));
            } else {
                deltas.push(model.realize(w).map_err(|source| {
                    SynthesisError::LayerUncertainty {
                        layer: layer_index + 1,
                        source,
                    }
                })?);
            }
        }
        Ok(kron_sum_many(&deltas)?)
    }
}

fn validate_layers(layers: &[LayerSpec]) -> Result<(), SynthesisError> {
    if layers.is_empty() {
        return Err(SynthesisError::NoLayers);
    }
    for (index, layer) in layers.iter().enumerate() {
        let n = layer.a.nrows();
        if layer.a.ncols() != n || n == 0 {
            return Err(SynthesisError::BadLayerShape {
                layer: index + 1,
                rows: layer.a.nrows(),
                cols: layer.a.ncols(),
            });
        }
        if let Some(b) = &layer.b {
            if b.nrows() != n {
                return Err(SynthesisError::BadInputShape {
                    layer: index + 1,
                    rows: b.nrows(),
                    n,
                });
            }
        }
        layer
            .uncertainty
            .validate(n)
            .map_err(|source| SynthesisError::LayerUncertainty {
                layer: index + 1,
                source,
            })?;
    }
    if layers[0].b.is_none() {
        return Err(SynthesisError::MissingInput);
    }
    Ok(())
}

/// Builds the composite plant: drift `⊕ᵢAᵢ` and input `B₁⊗I⊗…⊗I`.
pub fn compose(layers: &[LayerSpec]) -> Result<ComposedPlant, SynthesisError> {
    validate_layers(layers)?;
    let drifts: Vec<DMatrix<f64>> = layers.iter().map(|l| l.a.clone()).collect();
    let a_oplus = kron_sum_many(&drifts)?;
    let identities: Vec<DMatrix<f64>> = layers
        .iter()
        .map(|l| DMatrix::identity(l.a.nrows(), l.a.nrows()))
        .collect();
    let b1 = layers[0].b.as_ref().expect("validated above");
    let b_otimes = slot_product(&identities, 1, b1)?;
    Ok(ComposedPlant {
        a_oplus,
        b_otimes,
        delta_structure: layers.iter().map(|l| l.uncertainty.clone()).collect(),
        layer_dims: layers.iter().map(|l| l.a.nrows()).collect(),
    })
}

/// How the scaling matrix of each higher layer is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateStrategy {
    /// `Mᵢ = I`; works when `Aᵢ + Aᵢᵀ ⪯ 0`, e.g. negated graph Laplacians.
    Identity,
    /// `Mᵢ` solves `AᵢᵀMᵢ + MᵢAᵢ = −I`; needs a Hurwitz layer drift.
    Lyapunov,
}

impl CertificateStrategy {
    fn name(self) -> &'static str {
        match self {
            CertificateStrategy::Identity => "identity",
            CertificateStrategy::Lyapunov => "lyapunov",
        }
    }
}

/// Eigenvalue extremes of one symmetric matrix.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpectralBand {
    pub min_eig: f64,
    pub max_eig: f64,
}

fn band(m: &DMatrix<f64>) -> SpectralBand {
    let (values, _) = eig_sym(m);
    SpectralBand {
        min_eig: values[0],
        max_eig: values[values.len() - 1],
    }
}

/// Per-layer certificate verdict with the raw eigenvalue margins.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateVerdict {
    /// 1-based layer index (starts at 2: layer 1 carries no certificate).
    pub layer: usize,
    pub m_band: SpectralBand,
    /// Largest eigenvalue of `Fᵢ = AᵢᵀMᵢ + MᵢAᵢ`; must be ≤ 0 within tolerance.
    pub f_max_eig: f64,
    /// Worst (largest) eigenvalue of `Gᵢ = ΔAᵢᵀMᵢ + MᵢΔAᵢ` over the evaluated
    /// extreme weights.
    pub g_max_eig: f64,
    /// Whether the `Gᵢ` verdict holds strictly. A layer without uncertainty
    /// has `Gᵢ = 0`, which is semidefinite but never strict — the flag makes
    /// that visible instead of hiding it behind a pass.
    pub g_strict: bool,
}

/// Scaling matrices `M₂..M_m` with the derived `Fᵢ`, the extreme-weight
/// evaluations of `Gᵢ`, and the per-matrix eigenvalue report.
#[derive(Debug, Clone)]
pub struct CertificateSet {
    pub m_list: Vec<DMatrix<f64>>,
    pub f_list: Vec<DMatrix<f64>>,
    /// Per layer: `Gᵢ` at each single-direction extreme `±bound` (a layer
    /// without uncertainty contributes one zero matrix). Because the weight
    /// set is symmetric, `Gᵢ ⪯ 0` across the whole set forces each
    /// direction's contribution to vanish, so the axis extremes are a
    /// complete test.
    pub g_list: Vec<Vec<DMatrix<f64>>>,
    pub semidefinite_report: Vec<CertificateVerdict>,
}

/// Builds and certifies a certificate set from explicit scaling matrices.
/// `m_list` covers layers 2..m in order.
pub fn certificates_from(
    layers: &[LayerSpec],
    m_list: Vec<DMatrix<f64>>,
    strategy_name: &'static str,
) -> Result<CertificateSet, SynthesisError> {
    validate_layers(layers)?;
    let higher = &layers[1..];
    if m_list.len() != higher.len() {
        return Err(SynthesisError::CertificateCount {
            got: m_list.len(),
            expected: higher.len(),
        });
    }
    let mut f_list = Vec::with_capacity(higher.len());
    let mut g_list = Vec::with_capacity(higher.len());
    let mut report = Vec::with_capacity(higher.len());
    for (offset, (layer, m)) in higher.iter().zip(&m_list).enumerate() {
        let layer_index = offset + 2;
        let n = layer.a.nrows();
        if m.nrows() != n || m.ncols() != n {
            return Err(SynthesisError::CertificateShape {
                layer: layer_index,
                rows: m.nrows(),
                cols: m.ncols(),
                n,
            });
        }
        let m_band = band(m);
        if m_band.min_eig <= TOL_PSD * m_band.max_eig.abs().max(1.0) {
            return Err(SynthesisError::CertificateFailed {
                strategy: strategy_name,
                layer: layer_index,
                reason: format!(
                    "scaling matrix is not positive definite (min eigenvalue {:.3e})",
                    m_band.min_eig
                ),
            });
        }
        let f = symmetrize(&(layer.a.transpose() * m + m * &layer.a));
        let f_band = band(&f);
        if f_band.max_eig > TOL_PSD * f_band.min_eig.abs().max(1.0) {
            return Err(SynthesisError::CertificateFailed {
                strategy: strategy_name,
                layer: layer_index,
                reason: format!(
                    "AᵀM + MA is not negative semidefinite (max eigenvalue {:.3e})",
                    f_band.max_eig
                ),
            });
        }
        let mut extremes = Vec::new();
        for d in &layer.uncertainty.directions {
            let g = symmetrize(&(d.direction.transpose() * m + m * &d.direction));
            extremes.push(d.weight_bound * &g);
            extremes.push(-d.weight_bound * &g);
        }
        if extremes.is_empty() {
            extremes.push(DMatrix::zeros(n, n));
        }
        let g_max_eig = extremes
            .iter()
            .map(|g| band(g).max_eig)
            .fold(f64::NEG_INFINITY, f64::max);
        report.push(CertificateVerdict {
            layer: layer_index,
            m_band,
            f_max_eig: f_band.max_eig,
            g_max_eig,
            g_strict: g_max_eig < -1e-12,
        });
        f_list.push(f);
        g_list.push(extremes);
    }
    Ok(CertificateSet {
        m_list,
        f_list,
        g_list,
        semidefinite_report: report,
    })
}

/// Builds certificates for layers 2..m under a named strategy.
pub fn default_certificates(
    layers: &[LayerSpec],
    strategy: CertificateStrategy,
) -> Result<CertificateSet, SynthesisError> {
    validate_layers(layers)?;
    let higher = &layers[1..];
    let mut m_list = Vec::with_capacity(higher.len());
    for (offset, layer) in higher.iter().enumerate() {
        let layer_index = offset + 2;
        let n = layer.a.nrows();
        let m = match strategy {
            CertificateStrategy::Identity => DMatrix::identity(n, n),
            CertificateStrategy::Lyapunov => lyap(&layer.a, &DMatrix::identity(n, n))
                .map_err(|e| SynthesisError::CertificateFailed {
                    strategy: strategy.name(),
                    layer: layer_index,
                    reason: format!("Lyapunov solve failed: {e}"),
                })?,
        };
        m_list.push(symmetrize(&m));
    }
    certificates_from(layers, m_list, strategy.name())
}

/// Rejects any certificate whose `Gᵢ` verdict is not strictly negative. The
/// default policy tolerates `Gᵢ ⪯ 0` (a layer without uncertainty has
/// `Gᵢ = 0` exactly); this is the opt-in stricter gate.
pub fn enforce_strict_certificates(certificates: &CertificateSet) -> Result<(), SynthesisError> {
    for verdict in &certificates.semidefinite_report {
        if !verdict.g_strict {
            return Err(SynthesisError::NotStrict {
                layer: verdict.layer,
                max_eig: verdict.g_max_eig,
            });
        }
    }
    Ok(())
}

/// Eigenvalue margins and layer-1 diagnostics recorded at assembly time.
#[derive(Debug, Clone, Serialize)]
pub struct DesignChecks {
    pub p_otimes_min_eig: f64,
    pub q_otimes_min_eig: f64,
    pub r_otimes_min_eig: f64,
    pub layer1_residual: f64,
    pub layer1_closed_loop_abscissa: f64,
    pub layer1_iterations: usize,
}

/// The assembled guaranteed-cost design for the composite network.
#[derive(Debug, Clone)]
pub struct GuaranteedDesign {
    pub p1: DMatrix<f64>,
    pub k1: DMatrix<f64>,
    /// Uncertainty majorant evaluated at the layer-1 solution.
    pub u1_of_p1: DMatrix<f64>,
    pub certificates: CertificateSet,
    pub p_otimes: DMatrix<f64>,
    pub q_otimes: DMatrix<f64>,
    pub r_otimes: DMatrix<f64>,
    pub k_otimes: DMatrix<f64>,
    pub q1: DMatrix<f64>,
    pub r1: DMatrix<f64>,
    pub checks: DesignChecks,
}

/// Solves the layer-1 guaranteed-cost problem and lifts it to the composite
/// design:
///
/// * `P⊗ = P₁⊗M₂⊗…⊗M_m`, `R⊗ = R₁⊗M₂⊗…⊗M_m`,
/// * `Q⊗ = Q₁⊗M₂⊗…⊗M_m − P₁⊗ Σᵢ slot(M₂..M_m, i, Fᵢ)`,
/// * `K⊗ = K₁⊗I⊗…⊗I`.
///
/// The composite state cost is checked for positive semidefiniteness — a
/// failure means the certificates do not actually cover this layer stack.
pub fn assemble(
    layers: &[LayerSpec],
    certificates: &CertificateSet,
    q1: DMatrix<f64>,
    r1: DMatrix<f64>,
) -> Result<GuaranteedDesign, SynthesisError> {
    validate_layers(layers)?;
    if certificates.m_list.len() != layers.len() - 1 {
        return Err(SynthesisError::CertificateCount {
            got: certificates.m_list.len(),
            expected: layers.len() - 1,
        });
    }
    let b1 = layers[0].b.clone().expect("validated above");
    let problem = AreProblem::new(layers[0].a.clone(), b1, q1, r1)?;
    let layer1 = solve_guaranteed(&problem, &layers[0].uncertainty)?;

    let mut p_factors = vec![layer1.p.clone()];
    p_factors.extend(certificates.m_list.iter().cloned());
    let p_otimes = kron_many(&p_factors)?;

    let mut r_factors = vec![problem.r().clone()];
    r_factors.extend(certificates.m_list.iter().cloned());
    let r_otimes = kron_many(&r_factors)?;

    let mut q_factors = vec![problem.q().clone()];
    q_factors.extend(certificates.m_list.iter().cloned());
    let mut q_otimes = kron_many(&q_factors)?;
    if !certificates.m_list.is_empty() {
        let n_tail: usize = certificates.m_list.iter().map(|m| m.nrows()).product();
        let mut coupling = DMatrix::<f64>::zeros(n_tail, n_tail);
        for (slot, f) in certificates.f_list.iter().enumerate() {
            coupling += slot_product(&certificates.m_list, slot + 1, f)?;
        }
        q_otimes -= crate::kron::kron(&layer1.p, &coupling);
    }
    q_otimes = symmetrize(&q_otimes);

    let identities: Vec<DMatrix<f64>> = layers
        .iter()
        .map(|l| DMatrix::identity(l.a.nrows(), l.a.nrows()))
        .collect();
    let k_otimes = slot_product(&identities, 1, &layer1.gain)?;

    let q_band = band(&q_otimes);
    if q_band.min_eig < -TOL_PSD * q_band.max_eig.abs().max(1.0) {
        return Err(SynthesisError::IndefiniteComposedCost(q_band.min_eig));
    }
    let r_band = band(&r_otimes);
    if r_band.min_eig <= TOL_PSD * r_band.max_eig.abs().max(1.0) {
        return Err(SynthesisError::IndefiniteComposedInputCost(r_band.min_eig));
    }
    let p_band = band(&p_otimes);

    Ok(GuaranteedDesign {
        checks: DesignChecks {
            p_otimes_min_eig: p_band.min_eig,
            q_otimes_min_eig: q_band.min_eig,
            r_otimes_min_eig: r_band.min_eig,
            layer1_residual: layer1.residual,
            layer1_closed_loop_abscissa: layer1.closed_loop_abscissa,
            layer1_iterations: layer1.iterations,
        },
        p1: layer1.p,
        k1: layer1.gain,
        u1_of_p1: layer1.majorant,
        certificates: certificates.clone(),
        p_otimes,
        q_otimes,
        r_otimes,
        k_otimes,
        q1: problem.q().clone(),
        r1: problem.r().clone(),
    })
}

/// Outcome of the composite design-equation check.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    /// `‖A⊕ᵀP⊗ + P⊗A⊕ + Q⊗ − P⊗B⊗R⊗⁻¹B⊗ᵀP⊗ + V‖_F` with
    /// `V = U₁(P₁)⊗M₂⊗…⊗M_m`.
    pub residual: f64,
    pub residual_scale: f64,
    pub residual_ok: bool,
    /// Worst minimum eigenvalue of `V − ΔAᵀP⊗ − P⊗ΔA` over the sampled
    /// admissible realizations.
    pub domination_min_eig: f64,
    pub domination_ok: bool,
    pub domination_samples: usize,
}

/// Deterministic sample set over the admissible weight box: the origin, each
/// single-direction extreme, and the two all-extremes corners.
fn domination_samples(plant: &ComposedPlant) -> Vec<Vec<Vec<f64>>> {
    let zero: Vec<Vec<f64>> = plant
        .delta_structure
        .iter()
        .map(|m| vec![0.0; m.directions.len()])
        .collect();
    let mut samples = vec![zero.clone()];
    for (layer_index, model) in plant.delta_structure.iter().enumerate() {
        for (direction_index, d) in model.directions.iter().enumerate() {
            for sign in [1.0, -1.0] {
                let mut w = zero.clone();
                w[layer_index][direction_index] = sign * d.weight_bound;
                samples.push(w);
            }
        }
    }
    for sign in [1.0, -1.0] {
        let corner: Vec<Vec<f64>> = plant
            .delta_structure
            .iter()
            .map(|m| {
                m.directions
                    .iter()
                    .map(|d| sign * d.weight_bound)
                    .collect()
            })
            .collect();
        if corner != zero {
            samples.push(corner);
        }
    }
    samples
}

/// Checks that the assembled design actually satisfies the composite
/// guaranteed-cost equation, and that the lifted majorant dominates the
/// realized uncertainty at sampled admissible weights.
pub fn verify_generalized_are(
    design: &GuaranteedDesign,
    plant: &ComposedPlant,
) -> Result<VerificationReport, SynthesisError> {
    let mut v_factors = vec![design.u1_of_p1.clone()];
    v_factors.extend(design.certificates.m_list.iter().cloned());
    let v = kron_many(&v_factors)?;

    let chol = nalgebra::Cholesky::new(design.r_otimes.clone())
        .ok_or_else(|| SynthesisError::IndefiniteComposedInputCost(f64::NAN))?;
    let r_inv_bt = chol.solve(&plant.b_otimes.transpose());
    let s = symmetrize(&(&plant.b_otimes * &r_inv_bt));
    let p = &design.p_otimes;
    let residual_matrix =
        plant.a_oplus.transpose() * p + p * &plant.a_oplus + &design.q_otimes - p * &s * p + &v;
    let residual = residual_matrix.norm();
    let residual_scale = p.norm().max(1.0);
    let residual_ok = residual <= RESIDUAL_GATE * residual_scale;

    let samples = domination_samples(plant);
    let mut domination_min_eig = f64::INFINITY;
    for weights in &samples {
        let delta = plant.realize_delta(weights)?;
        let slack = &v - delta.transpose() * p - p * delta;
        let (values, _) = eig_sym(&slack);
        domination_min_eig = domination_min_eig.min(values[0]);
    }
    Ok(VerificationReport {
        residual,
        residual_scale,
        residual_ok,
        domination_min_eig,
        domination_ok: domination_min_eig >= DOMINATION_FLOOR,
        domination_samples: samples.len(),
    })
}

/// Row factor of a symmetric PSD matrix: `FᵀF = m`, with rows only for the
/// eigenvalues that carry weight (rank-revealing), so a singular input
/// produces a short factor rather than a failure.
fn psd_row_factor(m: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>, SynthesisError> {
    let (values, vectors) = eig_sym(m);
    let n = values.len();
    let top = values[n - 1].max(0.0);
    let floor = -TOL_PSD * top.max(1.0);
    let keep_above = 1e-12 * top.max(1.0);
    let mut rows = Vec::new();
    for (i, &lambda) in values.iter().enumerate() {
        if lambda < floor {
            return Err(SynthesisError::CertificateFailed {
                strategy: "factorization",
                layer: 0,
                reason: format!("{context}: eigenvalue {lambda:.3e} is negative beyond tolerance"),
            });
        }
        if lambda > keep_above {
            rows.push(lambda.sqrt() * vectors.column(i).transpose());
        }
    }
    let mut f = DMatrix::<f64>::zeros(rows.len().max(1), n);
    for (r, row) in rows.iter().enumerate() {
        f.view_mut((r, 0), (1, n)).copy_from(row);
    }
    Ok(f)
}

/// Symmetric square root of an SPD matrix.
fn spd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (values, vectors) = eig_sym(m);
    let root = DMatrix::from_diagonal(&values.map(|v| v.max(0.0).sqrt()));
    symmetrize(&(&vectors * root * vectors.transpose()))
}

/// Builds the stacked factor `L` with `LᵀL = Q⊗`:
///
/// ```text
/// L = [ D ⊗ M₂^½ ⊗ … ⊗ M_m^½ ]      DᵀD = Q₁
///     [ H ⊗ N₂  ⊗ … ⊗ M_m^½ ]      HᵀH = P₁,  NᵢᵀNᵢ = −Fᵢ
///     [   …                  ]
///     [ H ⊗ M₂^½ ⊗ … ⊗ N_m  ]
/// ```
///
/// `AᵢᵀMᵢ + MᵢAᵢ` is negative semidefinite by hypothesis, so its negation is
/// what gets factored; the sign is absorbed by the subtraction in `Q⊗`.
pub fn build_l_factor(design: &GuaranteedDesign) -> Result<DMatrix<f64>, SynthesisError> {
    let d = psd_row_factor(&design.q1, "layer-1 state cost")?;
    let h = psd_row_factor(&design.p1, "layer-1 solution")?;
    let roots: Vec<DMatrix<f64>> = design.certificates.m_list.iter().map(spd_sqrt).collect();
    let mut blocks = Vec::new();
    let mut first = vec![d];
    first.extend(roots.iter().cloned());
    blocks.push(kron_many(&first)?);
    for (i, f) in design.certificates.f_list.iter().enumerate() {
        let n_i = psd_row_factor(&(-f), "negated layer coupling")?;
        let mut factors = vec![h.clone()];
        for (j, root) in roots.iter().enumerate() {
            if i == j {
                factors.push(n_i.clone());
            } else {
                factors.push(root.clone());
            }
        }
        blocks.push(kron_many(&factors)?);
    }
    let total_rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks[0].ncols();
    let mut l = DMatrix::<f64>::zeros(total_rows, cols);
    let mut row = 0;
    for block in blocks {
        l.view_mut((row, 0), (block.nrows(), cols)).copy_from(&block);
        row += block.nrows();
    }
    Ok(l)
}

/// Rank and spectrum report for the composed design.
#[derive(Debug, Clone, Serialize)]
pub struct StabilizabilityReport {
    pub state_dim: usize,
    pub controllability_rank: usize,
    pub observability_rank: usize,
    pub controllable: bool,
    pub observable: bool,
    pub closed_loop_abscissa: f64,
}

/// Reports reachability of `(A⊕, B⊗)`, observability of `(A⊕, L)`, and the
/// closed-loop spectral abscissa under the assembled gain. Deficient ranks
/// are reported, not errored: the caller decides what to do with a plant
/// that cannot be stabilized.
pub fn check_stabilizability(
    design: &GuaranteedDesign,
    plant: &ComposedPlant,
    l: &DMatrix<f64>,
) -> Result<StabilizabilityReport, SynthesisError> {
    let n = plant.state_dim();
    let ctrb = controllability_rank(&plant.a_oplus, &plant.b_otimes);
    let obsv = observability_rank(&plant.a_oplus, l);
    let closed = &plant.a_oplus - &plant.b_otimes * &design.k_otimes;
    let abscissa = spectral_abscissa(&closed)?;
    Ok(StabilizabilityReport {
        state_dim: n,
        controllability_rank: ctrb,
        observability_rank: obsv,
        controllable: ctrb == n,
        observable: obsv == n,
        closed_loop_abscissa: abscissa,
    })
}

/// Convenience: the lifted majorant `V = U₁(P₁)⊗M₂⊗…⊗M_m` used in
/// verification, exposed for callers that want to inspect it directly.
pub fn lifted_majorant(design: &GuaranteedDesign) -> Result<DMatrix<f64>, SynthesisError> {
    let mut factors = vec![design.u1_of_p1.clone()];
    factors.extend(design.certificates.m_list.iter().cloned());
    Ok(kron_many(&factors)?)
}

/// Recomputes the layer-1 majorant at a caller-supplied `P₁` — the
/// scale-invariance hook used by tests and diagnostics.
pub fn layer1_majorant(layers: &[LayerSpec], p1: &DMatrix<f64>) -> DMatrix<f64> {
    build_majorant(p1, &layers[0].uncertainty)
}
