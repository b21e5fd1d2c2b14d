use thiserror::Error;

pub type Result<T> = std::result::Result<T, QError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("cap exceeded: {what} needed more than {cap} terms")]
    CapExceeded { what: &'static str, cap: usize },
    #[error("table window [{lo}, {hi}] does not contain index {k}")]
    WindowExceeded { k: i64, lo: i64, hi: i64 },
    #[error("q-derivative requested at x = 0 for a non-series representation")]
    ZeroPoint,
    #[error("pole at z = {re} + {im}i")]
    Pole { re: f64, im: f64 },
    #[error("series or sum diverges: {0}")]
    Divergent(String),
    #[error("insufficient data: need {need} usable entries, have {have}")]
    InsufficientData { need: usize, have: usize },
    #[error("not of left type: fit residual {residual:.3} exceeds {threshold}")]
    NotOfLeftType { residual: f64, threshold: f64 },
    #[error("index {index} outside available range 0..={max}")]
    Range { index: usize, max: usize },
    #[error("one-sided derivative limits disagree at order {p}: |l+ - l-| = {delta:e}")]
    EpsilonMismatch { p: usize, delta: f64 },
    #[error("derivative limit at order {p} did not settle (drift {drift:e})")]
    NonConvergent { p: usize, drift: f64 },
    #[error("evaluation failure: {0}")]
    EvaluationFailure(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl QError {
    /// True for failures that are numerical rather than caused by bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            QError::CapExceeded { .. }
                | QError::Divergent(_)
                | QError::NonConvergent { .. }
                | QError::NotOfLeftType { .. }
                | QError::EvaluationFailure(_)
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            QError::Domain(_) => "DomainError",
            QError::CapExceeded { .. } => "CapExceeded",
            QError::WindowExceeded { .. } => "WindowExceeded",
            QError::ZeroPoint => "ZeroPoint",
            QError::Pole { .. } => "PoleError",
            QError::Divergent(_) => "DivergentSeries",
            QError::InsufficientData { .. } => "InsufficientData",
            QError::NotOfLeftType { .. } => "NotOfLeftType",
            QError::Range { .. } => "RangeError",
            QError::EpsilonMismatch { .. } => "EpsilonMismatch",
            QError::NonConvergent { .. } => "NonConvergent",
            QError::EvaluationFailure(_) => "EvaluationFailure",
            QError::Parse(_) => "ParseError",
        }
    }
}

impl From<csv::Error> for QError {
    fn from(e: csv::Error) -> Self {
        QError::Parse(e.to_string())
    }
}

impl From<std::io::Error> for QError {
    fn from(e: std::io::Error) -> Self {
        QError::Parse(e.to_string())
    }
}
