use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Grid request that cannot place σ = −1, 0, +1 on cell edges.
    #[error("misaligned grid: {0}")]
    Grid(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Advection step exceeding the upwind stability bound.
    #[error("CFL violation: |b|·dt = {product:.6e} exceeds cell width {cell_width:.6e}; use dt ≤ {suggested_dt:.6e}")]
    Cfl {
        product: f64,
        cell_width: f64,
        suggested_dt: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
