use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("|Λ| = {lambda} > 1: no nodal points exist")]
    NoNodalPoints { lambda: f64 },

    #[error("|Λ| = {lambda} ≥ 1: monopoles are merged or absent, valley expansion undefined")]
    MonopolesMerged { lambda: f64 },

    #[error("couplings are not the image of any Bloch vector at a = {a} (residual {residual:.3e})")]
    CouplingsNotInImage { a: f64, residual: f64 },

    #[error("band gap {gap:.3e} below tolerance {tol:.1e} at {location}")]
    DegeneracyCrossing { gap: f64, tol: f64, location: String },

    #[error("singular link overlap (σ_min = {sigma_min:.3e}) at {location}; refine the grid")]
    SingularLink { sigma_min: f64, location: String },

    #[error("Wilson loop eigenphase {phase:.3} near the branch cut at {location}")]
    BranchAmbiguity { phase: f64, location: String },

    #[error("integration not converged: {value_fine} vs {value_coarse} (drift {drift:.2e})")]
    Resolution { value_fine: f64, value_coarse: f64, drift: f64 },

    #[error("winding number {value} is not within {tol} of an integer")]
    NonIntegerWinding { value: f64, tol: f64 },

    #[error("off-diagonal block Q not invertible (|det Q| = {det:.3e}) at {location}")]
    GapClosing { det: f64, location: String },

    #[error("separation b_w not monotone inside schedule segment starting at τ = {tau}")]
    NonMonotoneSchedule { tau: f64 },

    #[error("modulation tones collide: {f1} MHz and {f2} MHz within {bandwidth} MHz")]
    ToneAliasing { f1: f64, f2: f64, bandwidth: f64 },

    #[error("adaptive integrator failed at t = {t} µs (step {dt:.3e})")]
    StepSize { t: f64, dt: f64 },

    #[error("ramp too fast: leakage {leakage:.3} above {limit}")]
    RampTooFast { leakage: f64, limit: f64 },

    #[error("decoupling residual {residual:.3e} above {limit:.1e}")]
    Decoupling { residual: f64, limit: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { field, reason: reason.into() }
}

impl Error {
    /// Attach a location to errors that carry one.
    pub fn at(self, loc: impl Into<String>) -> Self {
        match self {
            Error::DegeneracyCrossing { gap, tol, .. } => {
                Error::DegeneracyCrossing { gap, tol, location: loc.into() }
            }
            Error::SingularLink { sigma_min, .. } => Error::SingularLink { sigma_min, location: loc.into() },
            Error::BranchAmbiguity { phase, .. } => Error::BranchAmbiguity { phase, location: loc.into() },
            Error::GapClosing { det, .. } => Error::GapClosing { det, location: loc.into() },
            other => other,
        }
    }
}
