use thiserror::Error;

use crate::geometry::Twist;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("obstacles {first} and {second} overlap on the torus (separation {separation:.3e})")]
    Overlap {
        first: usize,
        second: usize,
        separation: f64,
    },
    #[error("free flight longer than the horizon cap {cap} (table presumed infinite-horizon)")]
    Horizon { cap: f64 },
    #[error("invalid obstacle: {0}")]
    InvalidDisc(String),
    #[error("lattice matrix {0:?} is singular")]
    SingularLattice([[i64; 2]; 2]),
    #[error("no obstacle hit within the flight bound {bound:.4} from obstacle {obstacle}")]
    HorizonViolation { obstacle: usize, bound: f64 },
    #[error("grazing collision on obstacle {obstacle} (|theta| = {theta:.10})")]
    GrazingCollision { obstacle: usize, theta: f64 },
    #[error("orbit aborted at step {step}: {source}")]
    Orbit {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("covariance estimate is not positive definite at 3 sigma: {0}")]
    DegenerateSigma(String),
    #[error("grazing discard fraction {fraction:.4} exceeds 1%")]
    TooManyDiscards { fraction: f64 },
    #[error("Arnoldi did not converge after {iterations} restarts (best residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("eigen-solve failed at character w = {w:?}: {source}")]
    Character {
        w: Twist,
        #[source]
        source: Box<Error>,
    },
    #[error("leading eigenvalue not separated at w = {w:?} (gap {gap:.4})")]
    GapCollapse { w: Twist, gap: f64 },
    #[error("window too wide: {0}")]
    WindowTooWide(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed transition container: {0}")]
    Container(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
