//! Exit-code policy and the error value every command returns.
//!
//! | exit | reason        | meaning                                            |
//! |------|---------------|----------------------------------------------------|
//! | 0    | —             | success                                            |
//! | 1    | `io`          | an output file could not be written                |
//! | 2    | `parse`       | scenario/graph file malformed, or bad usage        |
//! | 3    | `dimension`   | well-formed pieces disagree in size or indexing    |
//! | 4    | `certificate` | a certificate, PSD, rank, or solver check failed   |
//!
//! The split between 2 and 3: a file that cannot mean anything is a parse
//! error; a file whose individually valid parts do not fit together (a cost
//! matrix sized for the wrong layer, an initial state of the wrong length, an
//! uncertainty entry outside its layer) is a dimension error. Anything the
//! math itself rejects — indefinite costs, failed certificates, unreachable
//! plants, non-converging solvers — is infeasibility, exit 4.

use layerlq::graphs::GraphError;
use layerlq::riccati::RiccatiError;
use layerlq::simulate::SimulateError;
use layerlq::synthesis::SynthesisError;
use serde::Serialize;

pub const EXIT_IO: u8 = 1;
pub const EXIT_PARSE: u8 = 2;
pub const EXIT_DIMENSION: u8 = 3;
pub const EXIT_INFEASIBLE: u8 = 4;

/// A command failure carrying its exit code and machine-readable reason.
#[derive(Debug, Clone)]
pub struct Failure {
    pub exit: u8,
    pub reason: &'static str,
    pub message: String,
}

#[derive(Serialize)]
struct ErrorJson<'a> {
    schema_version: u32,
    status: &'static str,
    code: &'static str,
    message: &'a str,
}

impl Failure {
    pub fn io(message: impl Into<String>) -> Self {
        Failure {
            exit: EXIT_IO,
            reason: "io",
            message: message.into(),
        }
    }

    pub fn parse(message: impl Into<String>) -> Self {
        Failure {
            exit: EXIT_PARSE,
            reason: "parse",
            message: message.into(),
        }
    }

    pub fn dimension(message: impl Into<String>) -> Self {
        Failure {
            exit: EXIT_DIMENSION,
            reason: "dimension",
            message: message.into(),
        }
    }

    pub fn infeasible(message: impl Into<String>) -> Self {
        Failure {
            exit: EXIT_INFEASIBLE,
            reason: "certificate",
            message: message.into(),
        }
    }

    /// One-line JSON for stderr so scripted callers never have to scrape
    /// human text.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&ErrorJson {
            schema_version: 1,
            status: "error",
            code: self.reason,
            message: &self.message,
        })
        .expect("error serialization cannot fail")
    }
}

/// Graph files and inline edge lists that fail to build are invalid content,
/// whatever the specific violation; the parse variant keeps its line number
/// in the message.
impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        Failure::parse(e.to_string())
    }
}

impl From<RiccatiError> for Failure {
    fn from(e: RiccatiError) -> Self {
        match e {
            RiccatiError::DimensionMismatch(_)
            | RiccatiError::BadUncertainty(_)
            | RiccatiError::WeightOutOfBounds { .. } => Failure::dimension(e.to_string()),
            _ => Failure::infeasible(e.to_string()),
        }
    }
}

impl From<SynthesisError> for Failure {
    fn from(e: SynthesisError) -> Self {
        match e {
            SynthesisError::NoLayers | SynthesisError::MissingInput => {
                Failure::parse(e.to_string())
            }
            SynthesisError::BadLayerShape { .. }
            | SynthesisError::BadInputShape { .. }
            | SynthesisError::CertificateCount { .. }
            | SynthesisError::CertificateShape { .. }
            | SynthesisError::WeightLayerCount { .. }
            | SynthesisError::Kron(_) => Failure::dimension(e.to_string()),
            SynthesisError::LayerUncertainty { layer, source } => {
                // Classify by the underlying uncertainty-model error but keep
                // the layer prefix in the message.
                let mut f = Failure::from(source);
                f.message = format!("layer {layer}: {}", f.message);
                f
            }
            SynthesisError::CertificateFailed { .. }
            | SynthesisError::NotStrict { .. }
            | SynthesisError::IndefiniteComposedCost(_)
            | SynthesisError::IndefiniteComposedInputCost(_)
            | SynthesisError::Layer1(_) => Failure::infeasible(e.to_string()),
        }
    }
}

impl From<SimulateError> for Failure {
    fn from(e: SimulateError) -> Self {
        match e {
            SimulateError::NodeOutOfRange { .. } | SimulateError::DimensionMismatch { .. } => {
                Failure::dimension(e.to_string())
            }
            SimulateError::BadConfig(_) | SimulateError::ProvincesOutOfRange(_) => {
                Failure::parse(e.to_string())
            }
            SimulateError::Synthesis(inner) => Failure::from(inner),
            SimulateError::Riccati(inner) => Failure::from(inner),
        }
    }
}
