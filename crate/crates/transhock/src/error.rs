//! Error types shared across the solver.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure mode of the pipeline, from gas relations up to the outer
/// fixed-point loop. Variants carry the offending values so diagnostics can
/// point at the actual numbers.
#[derive(Debug)]
pub enum Error {
    /// Density must be strictly positive for the gas relations.
    NonPositiveDensity { rho: f64 },
    /// A 1-D branch integration (or jump) ran into the sonic singularity.
    SonicEncountered { x1: f64, gap: f64 },
    /// Bracketed root finding for the subsonic jump state failed.
    NoSubsonicRoot { flux: f64, lo: f64, hi: f64 },
    /// Requested exit pressure lies outside the admissible range.
    PressureOutOfRange { pe: f64, p1: f64, p0: f64 },
    /// Shock-position bisection did not reach the pressure tolerance.
    BisectionStalled { target: f64, best: f64, iters: usize },
    /// A background iteration coefficient has the wrong sign; the background
    /// flow is outside the regime the scheme is built for.
    CoefficientSignViolation { name: &'static str, value: f64 },
    /// The marched supersonic field dropped below sonic somewhere.
    SupersonicLost { x1: f64, min_margin: f64 },
    /// Axial marching step exceeds the transverse stability bound.
    CflViolation { step: f64, bound: f64 },
    /// Interpolation query outside the tabulated domain.
    OutOfDomain { coord: &'static str, value: f64, lo: f64, hi: f64 },
    /// The Bernoulli argument of the density closure became non-positive.
    VacuumBernoulli { y2: f64, y3: f64, value: f64 },
    /// |J| fell below its floor; the shock slope formulas are unreliable.
    DegenerateJ { min_abs: f64, floor: f64 },
    /// The shock-fitted coordinate map lost injectivity.
    DegenerateMap { min_depth: f64, floor: f64 },
    /// Axial speed fell below the positivity floor.
    VelocityFloor { min_speed: f64, floor: f64 },
    /// A characteristic left the cross-section by more than the clamp
    /// tolerance, which signals broken wall compatibility upstream.
    TrajectoryEscape { excursion: f64, tol: f64 },
    /// The corrected curl source is not discretely divergence free.
    DivergenceResidualTooLarge { value: f64, tol: f64 },
    /// The Neumann problem for m1 is discretely unsolvable.
    SolvabilityViolated { mean: f64, tol: f64 },
    /// The bordered two-point boundary value problem is numerically singular.
    SingularMode { i: usize, j: usize },
    /// Outer fixed-point loop exhausted its iteration budget.
    NotConverged { iterations: usize, last_delta: f64 },
    /// An iterate left the trust ball around the background.
    Diverged { norm: f64, radius: f64, iteration: usize },
    /// Entropy condition failed on the shock.
    EntropyViolated { margin: f64 },
    /// A perturbation mode violates the wall compatibility conditions.
    CompatibilityViolation { field: &'static str, detail: String },
    /// Configuration problem (schema, ranges, missing files).
    Config { message: String },
    /// A field stopped being finite.
    NonFinite { what: String },
    /// Failure inside a named pipeline stage.
    AtStage { stage: &'static str, source: Box<Error> },
    Io(std::io::Error),
    Json(serde_json::Error),
}

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub fn at_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| Error::AtStage { stage, source: Box::new(e) }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Error::*;
        match self {
            NonPositiveDensity { rho } => write!(f, "non-positive density rho = {rho}"),
            SonicEncountered { x1, gap } => {
                write!(f, "sonic state encountered at x1 = {x1} (|u^2-c^2|/c^2 = {gap:.3e})")
            }
            NoSubsonicRoot { flux, lo, hi } => {
                write!(f, "no subsonic root for momentum flux {flux} bracketed in ({lo}, {hi})")
            }
            PressureOutOfRange { pe, p1, p0 } => {
                write!(f, "exit pressure {pe} outside admissible range ({p1}, {p0})")
            }
            BisectionStalled { target, best, iters } => write!(
                f,
                "shock-position bisection stalled after {iters} iterations: target Pe = {target}, best = {best}"
            ),
            CoefficientSignViolation { name, value } => {
                write!(f, "iteration coefficient {name} = {value} has the wrong sign")
            }
            SupersonicLost { x1, min_margin } => write!(
                f,
                "supersonic march lost supersonicity near x1 = {x1} (min u^2-c^2 margin {min_margin:.3e})"
            ),
            CflViolation { step, bound } => {
                write!(f, "axial step {step:.3e} exceeds stability bound {bound:.3e}")
            }
            OutOfDomain { coord, value, lo, hi } => {
                write!(f, "sample point {coord} = {value} outside [{lo}, {hi}]")
            }
            VacuumBernoulli { y2, y3, value } => write!(
                f,
                "Bernoulli argument {value:.3e} non-positive at y' = ({y2}, {y3}); vacuum state"
            ),
            DegenerateJ { min_abs, floor } => {
                write!(f, "|J| = {min_abs:.3e} fell below floor {floor:.3e}")
            }
            DegenerateMap { min_depth, floor } => write!(
                f,
                "shock map degenerate: min(L1 - Ls - v5) = {min_depth:.3e} below floor {floor:.3e}"
            ),
            VelocityFloor { min_speed, floor } => {
                write!(f, "axial speed {min_speed:.3e} at or below floor {floor:.3e}")
            }
            TrajectoryEscape { excursion, tol } => write!(
                f,
                "characteristic left the cross-section by {excursion:.3e} (clamp tolerance {tol:.1e})"
            ),
            DivergenceResidualTooLarge { value, tol } => {
                write!(f, "corrected source divergence {value:.3e} exceeds {tol:.1e}")
            }
            SolvabilityViolated { mean, tol } => write!(
                f,
                "Neumann solvability violated: RHS mean {mean:.3e} exceeds tolerance {tol:.3e}"
            ),
            SingularMode { i, j } => write!(f, "mode ({i}, {j}) boundary value problem is singular"),
            NotConverged { iterations, last_delta } => write!(
                f,
                "fixed point not reached in {iterations} iterations (last update {last_delta:.3e})"
            ),
            Diverged { norm, radius, iteration } => write!(
                f,
                "iterate norm {norm:.3e} left the trust ball {radius:.3e} at iteration {iteration}"
            ),
            EntropyViolated { margin } => {
                write!(f, "entropy condition violated on the shock (min P+ - P- = {margin:.3e})")
            }
            CompatibilityViolation { field, detail } => {
                write!(f, "perturbation mode for {field} violates compatibility: {detail}")
            }
            Config { message } => write!(f, "config error: {message}"),
            NonFinite { what } => write!(f, "non-finite values in {what}"),
            AtStage { stage, source } => write!(f, "[{stage}] {source}"),
            Io(e) => write!(f, "io error: {e}"),
            Json(e) => write!(f, "json error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::AtStage { source, .. } => Some(source.as_ref()),
            Error::Io(e) => Some(e),
            Error::Json(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e)
    }
}
