//! Emission-rate enhancement algebra.
//!
//! The Purcell factor F is the ratio of an emitter's radiative rate into
//! the zero-phonon line with the cavity on resonance to its rate with the
//! cavity detuned away. It can be reached four independent ways:
//!
//! - from cavity figures of merit (quality factor, mode volume, dipole
//!   overlap, spectral match),
//! - from the on/off-resonance intensity ratio of the line,
//! - from the measured excited-state lifetimes together with the dark-state
//!   lifetime and the intrinsic zero-phonon fraction,
//! - from the zero-phonon fractions (Debye-Waller factors) on and off
//!   resonance.
//!
//! [`consistency_report`] evaluates every route the supplied data allows
//! and flags the set when the relative spread exceeds a threshold; routes
//! agreeing within it corroborate one another since they share no inputs.

use crate::{ensure_finite, Error, Result};

/// Intrinsic (cavity-off) zero-phonon fraction used when no measured value
/// is supplied.
pub const DEFAULT_INTRINSIC_ZPL_FRACTION: f64 = 0.053;

/// Relative spread above which [`consistency_report`] flags disagreement
/// between enhancement routes.
pub const DEFAULT_CONSISTENCY_THRESHOLD: f64 = 0.25;

/// How the cavity mode volume is expressed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeVolume {
    /// Volume in cubic micrometers.
    CubicMicrons(f64),
    /// Volume in units of (wavelength / index)^3.
    CubicWavelengths(f64),
}

/// Cavity and emitter-coupling figures of merit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityParams {
    pub quality_factor: f64,
    pub mode_volume: ModeVolume,
    /// Free-space emission wavelength in micrometers.
    pub wavelength_um: f64,
    /// Refractive index of the host at the emitter.
    pub refractive_index: f64,
    /// Dipole position/orientation overlap with the mode field, in [0, 1].
    pub field_overlap: f64,
    /// Fraction of the line within the cavity linewidth, in [0, 1].
    pub spectral_match: f64,
}

impl CavityParams {
    pub fn validate(&self) -> Result<()> {
        ensure_finite("quality_factor", self.quality_factor)?;
        if self.quality_factor <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "quality_factor must be positive, got {}",
                self.quality_factor
            )));
        }
        let volume = match self.mode_volume {
            ModeVolume::CubicMicrons(v) | ModeVolume::CubicWavelengths(v) => v,
        };
        ensure_finite("mode_volume", volume)?;
        if volume <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "mode_volume must be positive, got {volume}"
            )));
        }
        ensure_finite("wavelength_um", self.wavelength_um)?;
        if self.wavelength_um <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "wavelength_um must be positive, got {}",
                self.wavelength_um
            )));
        }
        ensure_finite("refractive_index", self.refractive_index)?;
        if self.refractive_index < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "refractive_index must be at least 1, got {}",
                self.refractive_index
            )));
        }
        for (name, value) in [
            ("field_overlap", self.field_overlap),
            ("spectral_match", self.spectral_match),
        ] {
            ensure_finite(name, value)?;
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in [0, 1], got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Everything measured about the emission budget; each route to the
/// enhancement factor consumes the subset it needs.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EmissionBudget {
    /// Zero-phonon fraction with the cavity detuned (alpha).
    pub zpl_fraction_off: Option<f64>,
    /// Zero-phonon fraction on resonance (beta).
    pub zpl_fraction_on: Option<f64>,
    /// Zero-phonon-line intensity with the cavity detuned.
    pub intensity_off: Option<f64>,
    /// Zero-phonon-line intensity on resonance.
    pub intensity_on: Option<f64>,
    /// Excited-state lifetime with the cavity detuned, ns.
    pub tau_off_ns: Option<f64>,
    /// Excited-state lifetime on resonance, ns.
    pub tau_on_ns: Option<f64>,
    /// Dark-state (shelf) lifetime, ns.
    pub tau_dark_ns: Option<f64>,
    /// Externally determined enhancement factor, for cross-checks.
    pub purcell_external: Option<f64>,
}

/// Ideal-cavity enhancement from figures of merit:
/// `F = overlap * match * (3 Q / (4 pi^2 V)) * (lambda / n)^3 + 1`,
/// with the volume factor collapsing to `3 Q / (4 pi^2 v)` when the volume
/// is given in cubic wavelengths. The additive 1 keeps the unenhanced
/// free-space channel in the budget.
pub fn purcell_from_cavity(cavity: &CavityParams) -> Result<f64> {
    cavity.validate()?;
    let wavelength_in_host = cavity.wavelength_um / cavity.refractive_index;
    let volume_ratio = match cavity.mode_volume {
        ModeVolume::CubicMicrons(v) => wavelength_in_host.powi(3) / v,
        ModeVolume::CubicWavelengths(v) => 1.0 / v,
    };
    let ideal = 3.0 * cavity.quality_factor * volume_ratio / (4.0 * std::f64::consts::PI.powi(2));
    Ok(cavity.field_overlap * cavity.spectral_match * ideal + 1.0)
}

/// Enhancement as the on/off-resonance intensity ratio of the zero-phonon
/// line.
pub fn purcell_from_intensity(intensity_on: f64, intensity_off: f64) -> Result<f64> {
    for (name, value) in [
        ("intensity_on", intensity_on),
        ("intensity_off", intensity_off),
    ] {
        ensure_finite(name, value)?;
        if value <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{name} must be positive, got {value}"
            )));
        }
    }
    Ok(intensity_on / intensity_off)
}

/// Enhancement from excited-state lifetimes on and off resonance.
///
/// The total decay rate off resonance is `1/tau_off`, of which the
/// fraction `alpha` of the radiative part sits in the zero-phonon line;
/// the dark shelf contributes `1/tau_dark` in both conditions. Solving the
/// on-resonance rate budget for the zero-phonon enhancement gives
/// `F = tau_dark (tau_off - tau_on) / (alpha tau_on (tau_dark - tau_off)) + 1`.
///
/// Requires the physical ordering `0 < tau_on < tau_off < tau_dark` (the
/// cavity can only speed the decay up, and the shelf outlives both).
pub fn purcell_from_lifetimes(
    tau_on_ns: f64,
    tau_off_ns: f64,
    tau_dark_ns: f64,
    zpl_fraction_off: f64,
) -> Result<f64> {
    for (name, value) in [
        ("tau_on_ns", tau_on_ns),
        ("tau_off_ns", tau_off_ns),
        ("tau_dark_ns", tau_dark_ns),
    ] {
        ensure_finite(name, value)?;
        if value <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{name} must be positive, got {value}"
            )));
        }
    }
    check_fraction("zpl_fraction_off", zpl_fraction_off)?;
    if !(tau_on_ns < tau_off_ns && tau_off_ns < tau_dark_ns) {
        return Err(Error::Domain(format!(
            "lifetimes must satisfy tau_on < tau_off < tau_dark, \
             got {tau_on_ns} / {tau_off_ns} / {tau_dark_ns} ns"
        )));
    }
    Ok(tau_dark_ns * (tau_off_ns - tau_on_ns)
        / (zpl_fraction_off * tau_on_ns * (tau_dark_ns - tau_off_ns))
        + 1.0)
}

/// Enhancement from the zero-phonon fractions off (`alpha`) and on
/// (`beta`) resonance: `F = beta (alpha - 1) / (alpha (beta - 1))`.
/// Exact inverse of [`zpl_fraction_on_resonance`]; the relative error of
/// the recovered enhancement grows like `eps / (1 - beta)` because a
/// rounded `beta` near one pins down the enhancement only loosely.
pub fn purcell_from_zpl_fractions(zpl_fraction_off: f64, zpl_fraction_on: f64) -> Result<f64> {
    check_fraction("zpl_fraction_off", zpl_fraction_off)?;
    check_fraction("zpl_fraction_on", zpl_fraction_on)?;
    Ok(zpl_fraction_on * (zpl_fraction_off - 1.0) / (zpl_fraction_off * (zpl_fraction_on - 1.0)))
}

/// Zero-phonon fraction with the cavity on resonance, given the intrinsic
/// fraction `alpha` and the enhancement `F` of the zero-phonon channel
/// alone: `beta = F alpha / (1 + alpha (F - 1))`.
pub fn zpl_fraction_on_resonance(purcell: f64, zpl_fraction_off: f64) -> Result<f64> {
    ensure_finite("purcell", purcell)?;
    if purcell < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "purcell factor must be at least 1, got {purcell}"
        )));
    }
    check_fraction("zpl_fraction_off", zpl_fraction_off)?;
    let alpha = zpl_fraction_off;
    Ok(purcell * alpha / (1.0 + alpha * (purcell - 1.0)))
}

/// Ratio by which a two-photon entanglement rate grows when both photons
/// must come from the zero-phonon line: `(beta / alpha)^2`.
pub fn entanglement_rate_gain(zpl_fraction_on: f64, zpl_fraction_off: f64) -> Result<f64> {
    check_fraction("zpl_fraction_on", zpl_fraction_on)?;
    check_fraction("zpl_fraction_off", zpl_fraction_off)?;
    if zpl_fraction_on < zpl_fraction_off {
        return Err(Error::Domain(format!(
            "on-resonance fraction ({zpl_fraction_on}) below the off-resonance \
             fraction ({zpl_fraction_off}); no enhancement to gain from"
        )));
    }
    Ok((zpl_fraction_on / zpl_fraction_off).powi(2))
}

fn check_fraction(name: &str, value: f64) -> Result<()> {
    ensure_finite(name, value)?;
    if value <= 0.0 || value >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "{name} must lie strictly between 0 and 1, got {value}"
        )));
    }
    Ok(())
}

/// Outcome of evaluating every enhancement route a budget supports.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub from_intensity: Option<f64>,
    pub from_lifetimes: Option<f64>,
    pub from_zpl_fractions: Option<f64>,
    pub external: Option<f64>,
    /// Routes that had their inputs but failed them, with the reason.
    pub route_errors: Vec<(String, String)>,
    /// (max - min) / mean over the available values; `None` with fewer
    /// than two routes.
    pub relative_spread: Option<f64>,
    pub threshold: f64,
    /// True when the spread exceeds the threshold.
    pub flagged: bool,
}

impl ConsistencyReport {
    /// Route values that were actually computed, in report order.
    pub fn values(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        if let Some(f) = self.from_intensity {
            out.push(("intensity", f));
        }
        if let Some(f) = self.from_lifetimes {
            out.push(("lifetimes", f));
        }
        if let Some(f) = self.from_zpl_fractions {
            out.push(("zpl_fractions", f));
        }
        if let Some(f) = self.external {
            out.push(("external", f));
        }
        out
    }
}

/// Evaluate every enhancement route the budget has inputs for and compare
/// them. Routes with missing inputs are skipped silently; routes with
/// invalid inputs are reported in `route_errors`. Errors only when no
/// route at all can be computed.
pub fn consistency_report(budget: &EmissionBudget, threshold: f64) -> Result<ConsistencyReport> {
    ensure_finite("threshold", threshold)?;
    if threshold <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "threshold must be positive, got {threshold}"
        )));
    }

    let mut route_errors = Vec::new();
    let mut run = |name: &str, result: Option<Result<f64>>| match result {
        Some(Ok(f)) => Some(f),
        Some(Err(e)) => {
            route_errors.push((name.to_string(), e.to_string()));
            None
        }
        None => None,
    };

    let from_intensity = run(
        "intensity",
        match (budget.intensity_on, budget.intensity_off) {
            (Some(on), Some(off)) => Some(purcell_from_intensity(on, off)),
            _ => None,
        },
    );
    let alpha = budget.zpl_fraction_off;
    let from_lifetimes = run(
        "lifetimes",
        match (budget.tau_on_ns, budget.tau_off_ns, budget.tau_dark_ns) {
            (Some(on), Some(off), Some(dark)) => Some(purcell_from_lifetimes(
                on,
                off,
                dark,
                alpha.unwrap_or(DEFAULT_INTRINSIC_ZPL_FRACTION),
            )),
            _ => None,
        },
    );
    let from_zpl_fractions = run(
        "zpl_fractions",
        match (alpha, budget.zpl_fraction_on) {
            (Some(a), Some(b)) => Some(purcell_from_zpl_fractions(a, b)),
            _ => None,
        },
    );
    let external = budget.purcell_external;

    let values: Vec<f64> = [from_intensity, from_lifetimes, from_zpl_fractions, external]
        .into_iter()
        .flatten()
        .collect();
    if values.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no enhancement route computable from the supplied budget{}",
            if route_errors.is_empty() {
                String::new()
            } else {
                format!(
                    " (failed routes: {})",
                    route_errors
                        .iter()
                        .map(|(n, e)| format!("{n}: {e}"))
                        .collect::<Vec<_>>()
                        .join("; ")
                )
            }
        )));
    }

    let relative_spread = (values.len() >= 2).then(|| {
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        (max - min) / mean
    });
    Ok(ConsistencyReport {
        from_intensity,
        from_lifetimes,
        from_zpl_fractions,
        external,
        route_errors,
        relative_spread,
        threshold,
        flagged: relative_spread.is_some_and(|s| s > threshold),
    })
}
