use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong inside the model.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular network: |a + b/z0 + c*z0 + d| = {denominator:e}")]
    SingularNetwork { denominator: f64 },

    #[error("frequency {frequency} Hz lies within the pole of the shunt admittance ({pole} Hz)")]
    PoleProximity { frequency: f64, pole: f64 },

    #[error("closed-form band edges inapplicable: discriminant b^2 - 4ac = {discriminant:e}")]
    ClosedFormInapplicable { discriminant: f64 },

    #[error("geometry infeasible: {0}")]
    GeometryInfeasible(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("outside formula domain: {0}")]
    FormulaDomain(String),

    #[error("frequency {frequency} Hz is masked (pole proximity); choose a different excitation frequency")]
    MaskedFrequency { frequency: f64 },

    #[error("finite difference did not converge: relative change {relative_change:.3e} when the step was quartered")]
    StepSize { relative_change: f64 },

    #[error("chain-rule sum {chain_sum} disagrees with direct derivative {direct} by {relative_error:.3e}")]
    ChainRuleMismatch {
        direct: f64,
        chain_sum: f64,
        relative_error: f64,
    },

    #[error("no propagating band: {0}")]
    NoPropagatingBand(String),

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("{quantity} = {value} outside calibrated range; nearest bound is {nearest}")]
    ExtrapolationRefused {
        quantity: &'static str,
        value: f64,
        nearest: f64,
    },

    #[error("{quantity} = {value} outside [{min}, {max}]")]
    Range {
        quantity: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("no fit: residual {residual:.4} after refinement")]
    NoFit { residual: f64 },

    #[error("fit infeasible: {0}")]
    FitInfeasible(String),

    #[error("sampling: {0}")]
    Sampling(String),

    #[error("aliasing: {tail_fraction:.3e} of the output energy reached the pad boundary")]
    Aliasing { tail_fraction: f64 },

    #[error("line {line}: field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by files, configuration or parsing rather than the model.
    pub fn is_io_or_config(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Csv(_) | Error::Parse { .. })
    }
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InvalidInput(format!("{name} must be finite, got {value}")))
    }
}

pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidInput(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}
