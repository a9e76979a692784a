use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("collapsed interval ({lo}, {hi}): cut or gap has vanishing width")]
    CollapsedInterval { lo: f64, hi: f64 },

    #[error("quadrature order must be at least 2, got {0}")]
    InvalidOrder(usize),

    #[error("integrand is not finite at x = {0}")]
    NonFinite(f64),

    #[error("point {x} lies within tolerance of an interval endpoint")]
    NearEndpoint { x: f64 },

    #[error("integrand decays too slowly for a semi-infinite integral (tail estimate {tail:e})")]
    SlowDecay { tail: f64 },

    #[error("invalid support: {0}")]
    InvalidSupport(String),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("singular linear system while computing {0}")]
    SingularSystem(&'static str),

    #[error("consistency check failed: {what} = {value:e} exceeds tolerance {tol:e}")]
    Inconsistent {
        what: &'static str,
        value: f64,
        tol: f64,
    },

    #[error("genus too high for this potential: cut collision between cuts {left} and {right} (gap condition, mass balance on gaps)")]
    CutCollision { left: usize, right: usize },

    #[error("genus too low / cut vanishes: cut {cut} collapsed (endpoint moment conditions)")]
    CutCollapse { cut: usize },

    #[error("genus too high for this potential: genus {genus} needs a polynomial of degree at least {needed}, got degree {degree}")]
    GenusTooHigh {
        genus: usize,
        degree: usize,
        needed: usize,
    },

    #[error("genus too low / cut vanishes: density is negative ({value:e}) at x = {x} on cut {cut}, a gap should open there")]
    NegativeDensity { cut: usize, x: f64, value: f64 },

    #[error("endpoint iteration did not converge after {iterations} iterations (moment residual norm {residual:e}); last iterate {last:?}")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error("point pair ({x}, {t}) lies inside the diagonal exclusion band")]
    DiagonalBand { x: f64, t: f64 },

    #[error("perturbation changed the genus of the equilibrium support: {0}")]
    GenusChange(String),
}

pub type Result<T> = std::result::Result<T, Error>;
