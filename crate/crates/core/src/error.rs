use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("size guard exceeded: {what} = {value} (limit {limit})")]
    Size { what: &'static str, value: f64, limit: f64 },
    #[error("no convergence: {what} (achieved {achieved:e}, wanted {wanted:e})")]
    Convergence { what: &'static str, achieved: f64, wanted: f64 },
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("construction failed: {0}")]
    Construction(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
