use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("load error in {path}{}: {msg}", line.map(|l| format!(":{l}")).unwrap_or_default())]
    Load {
        path: String,
        line: Option<usize>,
        msg: String,
    },

    #[error("static equilibrium did not converge: residual {residual:.3e} after {iterations} iterations (ramp step {ramp_step})")]
    EquilibriumDiverged {
        residual: f64,
        iterations: usize,
        ramp_step: usize,
    },

    #[error("equilibrium unstable/singular: tangent stiffness is singular at the equilibrium candidate")]
    EquilibriumSingular,

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("invalid master selection: {0}")]
    MasterSelection(String),

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error(
        "near-singular coefficient solve at multi-index {index:?}: min |Λ_m − λ_j| = {min_gap:.3e} \
         outside the declared resonance set; consider increasing inner_tol (gap table: {table})"
    )]
    NearResonantSolve {
        index: Vec<u8>,
        min_gap: f64,
        table: String,
    },

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("time integration failed: {0}")]
    Integration(String),

    #[error("continuation failed: {0}")]
    Continuation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
