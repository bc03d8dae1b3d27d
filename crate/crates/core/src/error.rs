use crate::expr::{EvalError, ExprError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("unknown model `{0}` (expected one of CTH-RV, OV, FTL, IDM)")]
    UnknownModel(String),
    #[error("invalid model definition: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("model {model} has no equilibrium here: {reason}")]
    NoEquilibrium { model: String, reason: String },
    #[error("domain violation at step {step} (t = {time}): {source}")]
    DomainAtStep {
        step: usize,
        time: f64,
        #[source]
        source: EvalError,
    },
    #[error("state left the finite range at step {step} (t = {time}): s = {s}, v = {v}")]
    BlowUp { step: usize, time: f64, s: f64, v: f64 },
    #[error("every one of the {attempts} sampling attempts hit a domain violation")]
    NoValidSample { attempts: usize },
    #[error("no feasible parameter pair found: {0}")]
    Infeasible(String),
}

impl Error {
    /// True for failures caused by evaluating a model outside its domain.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::Expr(ExprError::Domain(_))
                | Error::NoEquilibrium { .. }
                | Error::DomainAtStep { .. }
                | Error::BlowUp { .. }
                | Error::NoValidSample { .. }
        )
    }
}
