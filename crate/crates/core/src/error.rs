use thiserror::Error;

/// Failures raised by the geometry, fluid and renormalization pipelines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("immersion rank deficient at {point:?}: singular value ratio {ratio:e}")]
    RankDeficient { point: Vec<f64>, ratio: f64 },
    #[error("point {point:?} outside chart domain on axis {axis}")]
    DomainError { point: Vec<f64>, axis: usize },
    #[error("unknown chart `{0}`")]
    UnknownChart(String),
    #[error("bad chart parameters: {0}")]
    BadParams(String),
    #[error("finite-difference stencil leaves the domain on axis {axis} at {point:?}")]
    StencilOutOfDomain { point: Vec<f64>, axis: usize },
    #[error("metric not positive definite at {point:?}")]
    NotPositiveDefinite { point: Vec<f64> },
    #[error("shape operator produced complex eigenvalues (discriminant {0:e})")]
    ComplexEigenvalues(f64),
    #[error("selected pressure root forces negative density (rho |v|^2 = {rho_v2:e})")]
    CaseExcluded { rho_v2: f64 },
    #[error("diagonal of f has mixed signs: f11 = {f11:e}, f22 = {f22:e}")]
    MixedSigns { f11: f64, f22: f64 },
    #[error("negative diagonal entry f[{index}] = {value:e}")]
    NegativeF { index: usize, value: f64 },
    #[error("characteristic path from seed {seed:?} left the positivity region at {point:?}")]
    PathExitsPositivityRegion { seed: Vec<f64>, point: Vec<f64> },
    #[error("seed density must be positive, got {0}")]
    NonPositiveSeed(f64),
    #[error("corrugation schedule violation: {0}")]
    ScheduleViolation(String),
    #[error("quadrature under-resolved: wavelength {wavelength:e} spans {cells:.2} cells (< 4)")]
    QuadratureUnderResolved { wavelength: f64, cells: f64 },
    #[error("limit form is not rank one: det = {0:e}")]
    RankNotOne(f64),
    #[error("limit form has diagonal entries of mixed sign")]
    MixedDiagonalSigns,
    #[error("limit density not solvable: {0}")]
    NotSolvable(String),
    #[error("negative discriminant {0:e}: no real pressure")]
    NegativeDiscriminant(f64),
    #[error("consistency conditions fail: {0}")]
    ConsistencyFailed(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
