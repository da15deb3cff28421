use thiserror::Error;

/// Errors shared across the solver, front-tracking, and modulus pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid must be even and at least 8 samples per dimension, got {n1}x{n2}")]
    BadGrid { n1: usize, n2: usize },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    #[error("field mean {mean:e} exceeds zero-mean tolerance {tol:e}")]
    NonZeroMean { mean: f64, tol: f64 },

    #[error("grids do not match: {0}")]
    GridMismatch(&'static str),

    #[error("no contour crossing inside bracket at x1 = {x1}")]
    NoCrossing { x1: f64 },

    #[error("contour is not a graph at x1 = {x1}: {crossings} bracket crossings")]
    NonGraph { x1: f64, crossings: usize },

    #[error("level curves carry different windows or columns")]
    WindowMismatch,

    #[error("window is empty or inverted: ({a}, {b})")]
    BadWindow { a: f64, b: f64 },

    #[error("time step underflow: dt = {dt:e} at t = {t}")]
    DtUnderflow { dt: f64, t: f64 },

    #[error("non-finite field values after step {step} (t = {t})")]
    Blowup { step: u64, t: f64 },

    #[error("fewer than 2 usable points to fit ({points} given, {excluded} excluded)")]
    Unfittable { points: usize, excluded: usize },

    #[error("pair separation tau = {tau:e} invalid for cutoff k = {k_cutoff}")]
    TauTooLarge { tau: f64, k_cutoff: f64 },

    #[error("pair separation tau = {tau:e} outside (0, 1/e)")]
    TauOutOfRange { tau: f64 },

    #[error("quadrature cell budget exhausted at tau = {tau:e}")]
    Unresolvable { tau: f64 },

    #[error("empty sampling plan")]
    EmptyPlan,

    #[error("configuration invalid:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("bundles are not comparable: {0}")]
    BundleMismatch(String),

    #[error("malformed {what}: {detail}")]
    Malformed { what: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
