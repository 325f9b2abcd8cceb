use thiserror::Error;

pub type Result<T> = std::result::Result<T, BssError>;

#[derive(Debug, Error)]
pub enum BssError {
    #[error("mode {mode} out of range for a tensor of order {order}")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("lag {lag} must be smaller than the series length {len}")]
    LagTooLarge { lag: usize, len: usize },

    #[error("index ({i}, {j}) out of range for dimension {dim}")]
    IndexOutOfRange { i: usize, j: usize, dim: usize },

    #[error("matrix is not symmetric (max relative asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("rank-deficient covariance{}: eigenvalue ratio {ratio:e} below floor {floor:e}", mode_suffix(*.mode))]
    RankDeficient {
        ratio: f64,
        floor: f64,
        mode: Option<usize>,
    },

    #[error("row {0} of the gain matrix is zero")]
    ZeroRow(usize),

    #[error("non-finite values produced: {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn mode_suffix(mode: Option<usize>) -> String {
    match mode {
        Some(m) => format!(" in mode {m}"),
        None => String::new(),
    }
}

impl BssError {
    /// Attach a mode index to a rank-deficiency error raised by a per-mode step.
    pub fn in_mode(self, m: usize) -> Self {
        match self {
            BssError::RankDeficient { ratio, floor, .. } => BssError::RankDeficient {
                ratio,
                floor,
                mode: Some(m),
            },
            other => other,
        }
    }

    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            BssError::RankDeficient { .. } | BssError::NonFinite(_) | BssError::ZeroRow(_)
        )
    }
}
