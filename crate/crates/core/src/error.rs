use std::io;

/// Errors raised by the flow, its solvers, and the measurement routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("field contains a non-finite value at cell {0}")]
    NonFiniteField(usize),

    #[error("region is empty; signed distance undefined")]
    EmptyRegion,
    #[error("region fills the whole domain; signed distance undefined")]
    FullRegion,

    #[error("level set leaves the computational domain")]
    BoundaryClipped,
    #[error("contour has {0} vertices, at least {1} required")]
    TooFewVertices(usize, usize),
    #[error("contour is not star-shaped about the given center")]
    NotStarShaped,

    #[error("total-variation solver produced a non-finite iterate at iteration {0}")]
    NonFinite(usize),
    #[error("dual field violates |p| <= 1 (max norm {0})")]
    DualInfeasible(f64),

    #[error("region vanished (area {area:.3e} below {min_area:.3e})")]
    Vanished { area: f64, min_area: f64 },
    #[error("time step {h:.3e} below the resolution contract (2*spacing)^2 = {min_h:.3e}")]
    ResolutionViolation { h: f64, min_h: f64 },

    #[error("time {0} is not on the step lattice")]
    NotOnLattice(f64),
    #[error("cylinder is not contained in the computational domain")]
    CylinderOutsideDomain,
    #[error("fiber at base coordinate {0:.4} misses the boundary")]
    EmptyFiber(f64),
    #[error("scale {r:.4e} is below the parabolic cutoff {cutoff:.4e}")]
    ScaleBelowParabolicCutoff { r: f64, cutoff: f64 },

    #[error("interval set measure {0} outside (0, 1)")]
    MeasureOutOfRange(f64),
    #[error("contact set is empty")]
    EmptyContactSet,

    #[error("shape does not fit inside the domain with the required margin")]
    ShapeOutOfDomain,

    #[error("malformed data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
