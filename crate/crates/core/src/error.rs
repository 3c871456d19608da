use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("lattice sum did not converge within {max_tier} tiers (last relative change {last_change:e})")]
    LatticeNonConvergence { max_tier: usize, last_change: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no finite fixed point: {nonzero} nonzero gains cannot reach coherence length {coherence}")]
    NoFixedPoint { nonzero: usize, coherence: usize },

    #[error("Doppler spectrum integrates to {integral}, expected 1")]
    SpectrumNotNormalized { integral: f64 },

    #[error("curve spans {span_db} dB, need at least {required_db} dB to classify regimes")]
    CurveTooShort { span_db: f64, required_db: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of an iterative method to settle, as opposed to
    /// bad inputs.
    pub fn is_non_convergence(&self) -> bool {
        matches!(
            self,
            Error::LatticeNonConvergence { .. } | Error::Numerical(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
