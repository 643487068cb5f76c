use thiserror::Error;

/// Errors produced by construction, quadrature, and the solvers.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid interval [{lo}, {hi}]: need 0 <= lo < hi, both finite")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("invalid pole window [{left}, {right}]: need left < right < 0, both finite")]
    InvalidWindow { left: f64, right: f64 },

    #[error("invalid exponent range ({lo}, {hi}): need 0 < lo < hi < 1")]
    InvalidExponentRange { lo: f64, hi: f64 },

    #[error("parameter {param} outside the dictionary's parameter set")]
    ParamOutsideSet { param: f64 },

    #[error("evaluation at z = {z} coincides with the pole {pole}")]
    PoleEvaluation { z: f64, pole: f64 },

    #[error("invalid target function: {0}")]
    InvalidTarget(String),

    #[error("target function not finite at z = {z}")]
    TargetNotFinite { z: f64 },

    #[error("basis parameters must be pairwise distinct (duplicate {param})")]
    DuplicateParameter { param: f64 },

    #[error("pole {pole} is not negative")]
    NonNegativePole { pole: f64 },

    #[error("residue/pole lists have mismatched lengths ({residues} vs {poles})")]
    PartialFractionShape { residues: usize, poles: usize },

    #[error("adaptive quadrature did not converge (last estimate {estimate}, panels {panels})")]
    QuadratureFailure { estimate: f64, panels: usize },

    #[error("empty basis")]
    EmptyBasis,

    #[error("residual uniform norm below 1e-15; approximation has converged")]
    ResidualNegligible,

    #[error("basis kind does not convert to partial-fraction form: {0}")]
    UnsupportedConversion(&'static str),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("linear minimax solve failed: {0}")]
    MinimaxFailure(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
