use thiserror::Error;

/// Errors produced by basis construction, operator assembly and the spectral
/// analysis routines.
#[derive(Error, Debug)]
pub enum Error {
    #[error("basis degree must be at least 2, got {0}")]
    DegreeTooSmall(usize),

    #[error("dimension must be 2 or 3, got {0}")]
    UnsupportedDimension(usize),

    #[error("polynomial weight requires k > k_* = {kstar:.6}, got k = {k}")]
    WeightBelowThreshold { k: f64, kstar: f64 },

    #[error("polynomial decay exponent p = {p} too small for degree {degree} and k = {k}; need p >= {required}")]
    DecayTooWeak {
        p: u32,
        degree: usize,
        k: f64,
        required: u32,
    },

    #[error("quadrature order {got} below required minimum {min}")]
    QuadratureOrderTooSmall { got: usize, min: usize },

    #[error("operands live on different bases or grids: {0}")]
    BasisMismatch(String),

    #[error("zero direction vector")]
    ZeroDirection,

    #[error("shift {lambda_re}+{lambda_im}i is too close to the spectrum (distance {dist:.3e}, eigenvalue {eig_re}+{eig_im}i)")]
    NearSingularShift {
        lambda_re: f64,
        lambda_im: f64,
        dist: f64,
        eig_re: f64,
        eig_im: f64,
    },

    #[error("contour intersects the spectrum (minimal distance {dist:.3e} below {min:.3e})")]
    ContourHitsSpectrum { dist: f64, min: f64 },

    #[error("numerical kernel has dimension {got}, expected {expected}; the assembly is inconsistent")]
    KernelDimension { got: usize, expected: usize },

    #[error("projector distance {0} is not below 1; the pairing transform is undefined")]
    ProjectorsTooFar(f64),

    #[error("branch continuation failed at r = {r}: {reason}")]
    BranchTracking { r: f64, reason: String },

    #[error("matrix exponential argument too large: t*||A|| = {0:.3e}; split the time interval")]
    ExponentialOverflow(f64),

    #[error("orthogonal map is not representable on the truncated basis")]
    MapNotRepresentable,

    #[error("singular transform: {0}")]
    SingularTransform(String),

    #[error("empty grid")]
    EmptyGrid,

    #[error("resolvent scan line Re z = {0} hits the spectrum")]
    LineHitsSpectrum(f64),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
