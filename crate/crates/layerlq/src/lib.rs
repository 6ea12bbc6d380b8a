//! Guaranteed-cost LQ controller synthesis on layered networks.
//!
//! A layered network composes per-layer interaction graphs through the graph
//! Cartesian product; its dynamics matrix is then the Kronecker sum of the
//! layer matrices and the input map is a Kronecker product. This crate builds
//! such plants from graphs, solves the robust (guaranteed-cost) Riccati
//! design for the uncertain layer, and lifts the result to the full composite
//! system through certified Kronecker-product assembly instead of solving the
//! composite-scale Riccati equation directly.
//!
//! Module map:
//!
//! * [`graphs`] — weighted signed graphs, Laplacians, Cartesian products.
//! * [`kron`] — Kronecker product/sum and the slot-substitution operator.
//! * [`riccati`] — baseline ARE solver (matrix sign function + Newton–Kleinman)
//!   and the guaranteed-cost fixed-point solver with the uncertainty majorant.
//! * [`synthesis`] — layer composition, per-layer certificates, and the
//!   Kronecker assembly of the composite guaranteed-cost design.
//! * [`simulate`] — opinion-dynamics layers, fixed-step closed-loop
//!   integration with cost audit, and the bundled three-layer case study.

pub mod graphs;
pub mod kron;
pub mod riccati;
pub mod simulate;
pub mod synthesis;

pub use graphs::{Graph, GraphMatrices};
pub use riccati::{
    AreProblem, AreSolution, GuaranteedSolution, RiccatiError, UncertaintyDirection,
    UncertaintyModel,
};
pub use simulate::{
    Controller, ControllerComparison, CostReport, Scenario, SimulateError, SimulationConfig,
    SimulationTrace, TaylorLayer,
};
pub use synthesis::{
    CertificateSet, CertificateStrategy, ComposedPlant, GuaranteedDesign, LayerSpec,
    StabilizabilityReport, SynthesisError, VerificationReport,
};
