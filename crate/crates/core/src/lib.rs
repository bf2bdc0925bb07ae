//! Models for a single color-center emitter coupled to a photonic-crystal
//! cavity, and the fitting machinery used to extract physical parameters
//! from measured or simulated data.
//!
//! The crate is organized around the quantities an experiment produces:
//!
//! - [`kinetics`]: three-level (ground / excited / dark) rate equations,
//!   their closed-form time evolution, and the analytic second-order photon
//!   correlation g2(tau) they imply.
//! - [`photon`]: exact stochastic (Gillespie) photon streams from the same
//!   rate model, plus a start-stop correlator that bins photon pairs into a
//!   normalized g2 histogram.
//! - [`purcell`]: emission-rate enhancement algebra. Four independent routes
//!   to the Purcell factor (cavity geometry, intensity ratio, lifetime
//!   ratios, Debye-Waller fractions) and a cross-check report.
//! - [`spin`]: spin-1 ground-state Hamiltonian (zero-field splitting plus
//!   Zeeman term), transition frequencies, and Lorentzian ODMR spectra.
//! - [`pulse`]: Bloch-vector pulse sequences (Rabi, Ramsey, Hahn echo,
//!   CPMG) with closed-form signals and a Monte Carlo path for quasi-static
//!   detuning noise.
//! - [`fit`]: Levenberg-Marquardt least squares over a small registry of
//!   line-shape and decay models, with analytic Jacobians and delta-method
//!   confidence intervals.
//! - [`csv`], [`config`], [`report`]: plain-text I/O used by the CLI.
//!
//! Conventions held throughout: time in nanoseconds, frequencies in MHz,
//! magnetic field in Gauss. Every stochastic entry point takes an explicit
//! seed and derives per-trajectory substreams from it, so results are
//! reproducible bit for bit, including under the `parallel` feature.

pub mod config;
pub mod csv;
pub mod fit;
pub mod kinetics;
pub mod photon;
pub mod pulse;
pub mod purcell;
pub mod report;
pub mod rng;
pub mod spin;

pub(crate) mod exec;

/// Crate-wide error type. Variants map onto the CLI exit-code contract:
/// fit-quality failures (`NoSignal`, `RankDeficient`, `DidNotConverge`)
/// exit 2, everything else exits 1.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no steady state: {0}")]
    NoSteadyState(String),
    #[error("no signal: {0}")]
    NoSignal(String),
    #[error("rank-deficient fit: parameter `{0}` is not constrained by the data")]
    RankDeficient(String),
    #[error("fit did not converge: {0}")]
    DidNotConverge(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("column not found: {0}")]
    MissingColumn(String),
    #[error("csv error: {0}")]
    Csv(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that mean "the data could not support the requested
    /// fit" rather than "the request was malformed".
    pub fn is_fit_quality(&self) -> bool {
        matches!(
            self,
            Error::NoSignal(_) | Error::RankDeficient(_) | Error::DidNotConverge(_)
        )
    }
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be finite, got {value}"
        )))
    }
}
