use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid increment model: {0}")]
    InvalidModel(String),
    #[error("invalid barrier: {0}")]
    InvalidBarrier(String),
    #[error("increment mean {mean} is not negative; no adjustment coefficient exists")]
    NoPositiveDrift { mean: f64 },
    #[error("mgf equation has no positive root: all support points are nonpositive")]
    NoRoot,
    #[error("mgf is infinite at theta = {theta}")]
    InfiniteMgf { theta: f64 },
    #[error("first passage not reached within {cap} steps{}", sample.map(|i| format!(" (sample {i})")).unwrap_or_default())]
    CapExceeded { cap: u64, sample: Option<u64> },
    #[error("model is not arithmetic (no lattice span)")]
    NonLattice,
    #[error("tilted increment law does not have positive drift")]
    NonPositiveDrift,
    #[error("auxiliary walk has nonnegative drift; D is infinite")]
    PositiveAuxDrift,
    #[error("barrier value g({n}) = {value} is not a multiple of the lattice span {span}; quantize the barrier to the lattice")]
    LatticeMismatch { n: u64, value: f64, span: f64 },
    #[error("the maximum of the reflected walk is infinite a.s.: {0}")]
    InfiniteByCriterion(String),
    #[error("partial sum {partial} exceeded the series bound {bound}")]
    DivergedSum { partial: f64, bound: f64 },
    #[error("computation did not converge: {0}")]
    NotConverged(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("invalid letter {letter:?} at position {position}")]
    InvalidLetter { letter: char, position: usize },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
