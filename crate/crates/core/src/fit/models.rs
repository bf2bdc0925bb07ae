//! Model registry for the fit engine.
//!
//! Every model is a closed-form curve with named parameters in a fixed
//! order, an analytic gradient, a reparameterization map that keeps
//! constrained parameters legal during unconstrained optimization
//! (log for positive scales, logistic for the bounded stretch exponent),
//! and a data-driven initial guess. Frequencies are in cycles per x-unit;
//! widths and time constants share the x-unit.

use crate::fit::DataSeries;
use crate::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
const FOUR_LN2: f64 = 2.772588722239781;

/// Lower and upper bounds of the stretch exponent; decay data rarely
/// constrains anything outside this range and unbounded stretch trades
/// off against the time constant.
pub const STRETCH_BOUNDS: (f64, f64) = (0.2, 4.0);

/// The curves the engine can fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelId {
    /// `amplitude * (w/2)^2 / ((x - center)^2 + (w/2)^2) + baseline`.
    Lorentzian,
    /// `amplitude * exp(-4 ln2 (x - center)^2 / fwhm^2) + baseline`.
    Gaussian,
    /// `amplitude * exp(-x / tau) + baseline`.
    ExpDecay,
    /// `amplitude * exp(-(x / t2)^stretch) + baseline`.
    StretchedExp,
    /// `amplitude * cos(2 pi f x + phase) * exp(-(x / t2)^stretch)
    /// + baseline`.
    DampedSinusoid,
    /// `amplitude * sin^2(2 pi f x + phase) * exp(-(x / t2)^stretch)
    /// + baseline`.
    Sin2Stretched,
    /// `1 - amp_anti exp(-|x| / t1) + amp_bunch exp(-|x| / t2)`.
    G2ThreeLevel,
}

/// Map between a constrained natural parameter and its unconstrained
/// internal coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Transform {
    Identity,
    /// natural = exp(internal); keeps the parameter positive.
    Log,
    /// natural = lo + (hi - lo) sigmoid(internal); keeps it in (lo, hi).
    Logistic { lo: f64, hi: f64 },
}

/// Logistic internal coordinates are confined to this range so the
/// sigmoid slope stays strictly positive; a saturated slope would freeze
/// the parameter for the rest of the optimization.
const LOGIT_MAX: f64 = 30.0;

impl Transform {
    pub(crate) fn to_internal(self, name: &str, natural: f64) -> Result<f64> {
        match self {
            Transform::Identity => Ok(natural),
            Transform::Log => {
                if natural <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "parameter `{name}` must be positive, got {natural}"
                    )));
                }
                Ok(natural.ln())
            }
            Transform::Logistic { lo, hi } => {
                if natural <= lo || natural >= hi {
                    return Err(Error::InvalidParameter(format!(
                        "parameter `{name}` must lie in ({lo}, {hi}), got {natural}"
                    )));
                }
                Ok(((natural - lo) / (hi - natural)).ln().clamp(-LOGIT_MAX, LOGIT_MAX))
            }
        }
    }

    pub(crate) fn to_natural(self, internal: f64) -> f64 {
        match self {
            Transform::Identity => internal,
            Transform::Log => internal.exp(),
            Transform::Logistic { lo, hi } => {
                let s = 1.0 / (1.0 + (-internal).exp());
                lo + (hi - lo) * s
            }
        }
    }

    /// d(natural)/d(internal), the chain-rule factor for the Jacobian.
    pub(crate) fn slope(&self, internal: f64) -> f64 {
        match *self {
            Transform::Identity => 1.0,
            Transform::Log => internal.exp(),
            Transform::Logistic { lo, hi } => {
                let s = 1.0 / (1.0 + (-internal).exp());
                (hi - lo) * s * (1.0 - s)
            }
        }
    }

    /// Keep an internal coordinate inside the representable band of its
    /// transform.
    pub(crate) fn clamp_internal(&self, internal: f64) -> f64 {
        match self {
            Transform::Logistic { .. } => internal.clamp(-LOGIT_MAX, LOGIT_MAX),
            _ => internal,
        }
    }

    /// Largest per-iteration move allowed in this coordinate, if any.
    /// Log and logistic coordinates are dimensionless, so a fixed cap
    /// keeps the optimizer from leaping across basins; identity
    /// coordinates carry data units and are left to the damping.
    pub(crate) fn step_cap(&self) -> Option<f64> {
        match self {
            Transform::Identity => None,
            Transform::Log | Transform::Logistic { .. } => Some(3.0),
        }
    }
}

impl ModelId {
    pub fn all() -> &'static [ModelId] {
        &[
            ModelId::Lorentzian,
            ModelId::Gaussian,
            ModelId::ExpDecay,
            ModelId::StretchedExp,
            ModelId::DampedSinusoid,
            ModelId::Sin2Stretched,
            ModelId::G2ThreeLevel,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelId::Lorentzian => "lorentzian",
            ModelId::Gaussian => "gaussian",
            ModelId::ExpDecay => "exp_decay",
            ModelId::StretchedExp => "stretched_exp",
            ModelId::DampedSinusoid => "damped_sinusoid",
            ModelId::Sin2Stretched => "sin2_stretched",
            ModelId::G2ThreeLevel => "g2_three_level",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        ModelId::all()
            .iter()
            .find(|m| m.name() == name)
            .copied()
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown model `{name}`; available: {}",
                    ModelId::all()
                        .iter()
                        .map(|m| m.name())
                        .collect::<Vec<_>>()
                        .join(", ")
                ))
            })
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            ModelId::Lorentzian | ModelId::Gaussian => {
                &["amplitude", "center", "fwhm", "baseline"]
            }
            ModelId::ExpDecay => &["amplitude", "tau", "baseline"],
            ModelId::StretchedExp => &["amplitude", "t2", "stretch", "baseline"],
            ModelId::DampedSinusoid => {
                &["amplitude", "frequency", "phase", "t2", "stretch", "baseline"]
            }
            ModelId::Sin2Stretched => {
                &["amplitude", "frequency", "phase", "t2", "stretch", "baseline"]
            }
            ModelId::G2ThreeLevel => &["amp_anti", "amp_bunch", "t1", "t2"],
        }
    }

    pub fn n_params(&self) -> usize {
        self.param_names().len()
    }

    pub(crate) fn transforms(&self) -> Vec<Transform> {
        let logistic = Transform::Logistic {
            lo: STRETCH_BOUNDS.0,
            hi: STRETCH_BOUNDS.1,
        };
        match self {
            ModelId::Lorentzian | ModelId::Gaussian => vec![
                Transform::Identity,
                Transform::Identity,
                Transform::Log,
                Transform::Identity,
            ],
            ModelId::ExpDecay => {
                vec![Transform::Identity, Transform::Log, Transform::Identity]
            }
            ModelId::StretchedExp => vec![
                Transform::Identity,
                Transform::Log,
                logistic,
                Transform::Identity,
            ],
            ModelId::DampedSinusoid | ModelId::Sin2Stretched => vec![
                Transform::Identity,
                Transform::Identity,
                Transform::Identity,
                Transform::Log,
                logistic,
                Transform::Identity,
            ],
            ModelId::G2ThreeLevel => vec![
                Transform::Identity,
                Transform::Identity,
                Transform::Log,
                Transform::Log,
            ],
        }
    }

    /// True when the model's stretch/decay algebra needs `x >= 0`.
    pub(crate) fn requires_nonnegative_x(&self) -> bool {
        matches!(
            self,
            ModelId::StretchedExp | ModelId::DampedSinusoid | ModelId::Sin2Stretched
        )
    }

    /// Model value at one point.
    pub fn eval(&self, params: &[f64], x: f64) -> f64 {
        assert_eq!(params.len(), self.n_params());
        match self {
            ModelId::Lorentzian => {
                let [a, c, w, b] = params else { unreachable!() };
                let h = w / 2.0;
                let d = x - c;
                a * h * h / (d * d + h * h) + b
            }
            ModelId::Gaussian => {
                let [a, c, w, b] = params else { unreachable!() };
                let d = x - c;
                a * (-FOUR_LN2 * d * d / (w * w)).exp() + b
            }
            ModelId::ExpDecay => {
                let [a, tau, b] = params else { unreachable!() };
                a * (-x / tau).exp() + b
            }
            ModelId::StretchedExp => {
                let [a, t2, n, b] = params else { unreachable!() };
                a * stretched(x, *t2, *n) + b
            }
            ModelId::DampedSinusoid => {
                let [a, f, phi, t2, n, b] = params else { unreachable!() };
                a * (TWO_PI * f * x + phi).cos() * stretched(x, *t2, *n) + b
            }
            ModelId::Sin2Stretched => {
                let [a, f, phi, t2, n, b] = params else { unreachable!() };
                a * (TWO_PI * f * x + phi).sin().powi(2) * stretched(x, *t2, *n) + b
            }
            ModelId::G2ThreeLevel => {
                let [aa, ab, t1, t2] = params else { unreachable!() };
                let tau = x.abs();
                1.0 - aa * (-tau / t1).exp() + ab * (-tau / t2).exp()
            }
        }
    }

    /// Analytic gradient d(model)/d(params) at one point, written into
    /// `out` (length `n_params`).
    pub(crate) fn gradient(&self, params: &[f64], x: f64, out: &mut [f64]) {
        assert_eq!(out.len(), self.n_params());
        match self {
            ModelId::Lorentzian => {
                let [a, c, w, _] = params else { unreachable!() };
                let h = w / 2.0;
                let d = x - c;
                let den = d * d + h * h;
                let l = h * h / den;
                out[0] = l;
                out[1] = 2.0 * a * d * l * l / (h * h);
                // dL/dw = d^2 h / den^2 = d^2 L^2 / h^3.
                out[2] = a * d * d * l * l / (h * h * h);
                out[3] = 1.0;
            }
            ModelId::Gaussian => {
                let [a, c, w, _] = params else { unreachable!() };
                let d = x - c;
                let g = (-FOUR_LN2 * d * d / (w * w)).exp();
                out[0] = g;
                out[1] = a * g * 2.0 * FOUR_LN2 * d / (w * w);
                out[2] = a * g * 2.0 * FOUR_LN2 * d * d / (w * w * w);
                out[3] = 1.0;
            }
            ModelId::ExpDecay => {
                let [a, tau, _] = params else { unreachable!() };
                let e = (-x / tau).exp();
                out[0] = e;
                out[1] = a * e * x / (tau * tau);
                out[2] = 1.0;
            }
            ModelId::StretchedExp => {
                let [a, t2, n, _] = params else { unreachable!() };
                let (e, de_dt2, de_dn) = stretched_with_grads(x, *t2, *n);
                out[0] = e;
                out[1] = a * de_dt2;
                out[2] = a * de_dn;
                out[3] = 1.0;
            }
            ModelId::DampedSinusoid => {
                let [a, f, phi, t2, n, _] = params else { unreachable!() };
                let arg = TWO_PI * f * x + phi;
                let (sin, cos) = arg.sin_cos();
                let (e, de_dt2, de_dn) = stretched_with_grads(x, *t2, *n);
                out[0] = cos * e;
                out[1] = -a * sin * e * TWO_PI * x;
                out[2] = -a * sin * e;
                out[3] = a * cos * de_dt2;
                out[4] = a * cos * de_dn;
                out[5] = 1.0;
            }
            ModelId::Sin2Stretched => {
                let [a, f, phi, t2, n, _] = params else { unreachable!() };
                let arg = TWO_PI * f * x + phi;
                let s2 = arg.sin().powi(2);
                let ds2 = (2.0 * arg).sin();
                let (e, de_dt2, de_dn) = stretched_with_grads(x, *t2, *n);
                out[0] = s2 * e;
                out[1] = a * ds2 * e * TWO_PI * x;
                out[2] = a * ds2 * e;
                out[3] = a * s2 * de_dt2;
                out[4] = a * s2 * de_dn;
                out[5] = 1.0;
            }
            ModelId::G2ThreeLevel => {
                let [aa, ab, t1, t2] = params else { unreachable!() };
                let tau = x.abs();
                let e1 = (-tau / t1).exp();
                let e2 = (-tau / t2).exp();
                out[0] = -e1;
                out[1] = e2;
                out[2] = -aa * e1 * tau / (t1 * t1);
                out[3] = ab * e2 * tau / (t2 * t2);
            }
        }
    }

    /// Quantities derived from the fitted parameters, reported alongside
    /// them.
    pub fn derived(&self, params: &[f64]) -> Vec<(&'static str, f64)> {
        match self {
            // Resonator quality factor of a fitted line.
            ModelId::Lorentzian | ModelId::Gaussian => {
                vec![("q", params[1].abs() / params[2])]
            }
            // Zero-delay coincidence rate implied by the fitted curve.
            ModelId::G2ThreeLevel => {
                vec![("g2_zero", 1.0 - params[0] + params[1])]
            }
            _ => Vec::new(),
        }
    }

    /// Data-driven starting point for the optimizer.
    ///
    /// Errors with `NoSignal` when y has no usable variation.
    pub fn initial_guess(&self, data: &DataSeries) -> Result<Vec<f64>> {
        let x = data.x();
        let y = data.y();
        let stats = SignalStats::from(x, y)?;
        let span = stats.span.max(f64::MIN_POSITIVE);

        Ok(match self {
            ModelId::Lorentzian | ModelId::Gaussian => {
                let baseline = stats.median;
                let (amplitude, center) = if stats.max - baseline >= baseline - stats.min {
                    (stats.max - baseline, x[stats.argmax])
                } else {
                    (stats.min - baseline, x[stats.argmin])
                };
                let width = half_height_width(x, y, baseline, amplitude)
                    .unwrap_or(span / 4.0)
                    .max(span / (x.len() as f64 * 4.0));
                vec![amplitude, center, width, baseline]
            }
            ModelId::ExpDecay => {
                let baseline = stats.tail_mean;
                let amplitude = y[0] - baseline;
                let tau = decay_scale(x, y, baseline, amplitude).unwrap_or(span / 3.0);
                vec![amplitude, tau, baseline]
            }
            ModelId::StretchedExp => {
                let baseline = stats.tail_mean;
                let amplitude = y[0] - baseline;
                let t2 = decay_scale(x, y, baseline, amplitude).unwrap_or(span / 3.0);
                vec![amplitude, t2, 1.0, baseline]
            }
            ModelId::DampedSinusoid => {
                let baseline = stats.mean;
                let amplitude = (stats.max - stats.min) / 2.0;
                let frequency = dominant_frequency(x, y, baseline);
                let (i, q) = quadrature(x, y, baseline, frequency);
                // y - b ~ A cos(wx + phi): I picks up cos(phi), Q -sin(phi).
                let phase = (-q).atan2(i);
                vec![amplitude, frequency, phase, span / 2.0, 1.0, baseline]
            }
            ModelId::Sin2Stretched => {
                let baseline = stats.tail_mean.min(stats.min + 0.25 * (stats.max - stats.min));
                let amplitude = stats.max - baseline;
                // sin^2 oscillates at twice the fundamental.
                let doubled = dominant_frequency(x, y, stats.mean);
                let frequency = doubled / 2.0;
                let (i, q) = quadrature(x, y, stats.mean, doubled);
                // y - mean ~ -(A/2) cos(2wx + 2 phi).
                let phase = 0.5 * q.atan2(-i);
                vec![amplitude, frequency, phase, span / 2.0, 1.0, baseline]
            }
            ModelId::G2ThreeLevel => {
                let amp_anti = (1.0 - stats.min).clamp(0.05, 2.0);
                let amp_bunch = (stats.max - 1.0).clamp(0.01, 2.0);
                let t1 = g2_recovery_scale(x, y, stats.min).unwrap_or(span / 10.0);
                let t2 = (span / 3.0).max(2.0 * t1);
                vec![amp_anti, amp_bunch, t1, t2]
            }
        })
    }
}

/// `exp(-(x / t)^n)`, with the `0^n = 0` limit handled explicitly.
fn stretched(x: f64, t: f64, n: f64) -> f64 {
    let u = x / t;
    if u == 0.0 {
        1.0
    } else {
        (-u.powf(n)).exp()
    }
}

/// Stretched exponential and its partials in `t` and `n`. At `x = 0` both
/// partials vanish (the curve is pinned to 1 there).
fn stretched_with_grads(x: f64, t: f64, n: f64) -> (f64, f64, f64) {
    let u = x / t;
    if u == 0.0 {
        return (1.0, 0.0, 0.0);
    }
    let un = u.powf(n);
    let e = (-un).exp();
    let de_dt = e * n * un / t;
    let de_dn = -e * un * u.ln();
    (e, de_dt, de_dn)
}

/// Robust summary of a y trace used by the initial guesses.
struct SignalStats {
    min: f64,
    max: f64,
    argmin: usize,
    argmax: usize,
    mean: f64,
    median: f64,
    /// Mean of the last tenth of the samples.
    tail_mean: f64,
    span: f64,
}

impl SignalStats {
    fn from(x: &[f64], y: &[f64]) -> Result<Self> {
        let n = y.len();
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut argmin, mut argmax) = (0, 0);
        for (i, &v) in y.iter().enumerate() {
            if v < min {
                min = v;
                argmin = i;
            }
            if v > max {
                max = v;
                argmax = i;
            }
        }
        if max - min <= 1e-10 * max.abs().max(min.abs()).max(1.0) {
            return Err(Error::NoSignal(format!(
                "y range {:.3e} is indistinguishable from a constant",
                max - min
            )));
        }
        let mean = y.iter().sum::<f64>() / n as f64;
        let mut sorted = y.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        let tail_start = n - (n / 10).max(1);
        let tail = &y[tail_start..];
        let tail_mean = tail.iter().sum::<f64>() / tail.len() as f64;
        Ok(Self {
            min,
            max,
            argmin,
            argmax,
            mean,
            median,
            tail_mean,
            span: x[x.len() - 1] - x[0],
        })
    }
}

/// Width of the region where the signal exceeds half its amplitude over
/// the baseline; `None` when fewer than two samples do.
fn half_height_width(x: &[f64], y: &[f64], baseline: f64, amplitude: f64) -> Option<f64> {
    let threshold = amplitude.abs() / 2.0;
    let above: Vec<usize> = y
        .iter()
        .enumerate()
        .filter(|(_, &v)| {
            let dev = v - baseline;
            dev.signum() == amplitude.signum() && dev.abs() >= threshold
        })
        .map(|(i, _)| i)
        .collect();
    match above.as_slice() {
        [] | [_] => None,
        slice => {
            let width = x[*slice.last().unwrap()] - x[slice[0]];
            (width > 0.0).then_some(width)
        }
    }
}

/// First x where the deviation from the baseline drops below 1/e of the
/// initial amplitude.
fn decay_scale(x: &[f64], y: &[f64], baseline: f64, amplitude: f64) -> Option<f64> {
    if amplitude == 0.0 {
        return None;
    }
    let threshold = amplitude.abs() / std::f64::consts::E;
    y.iter()
        .zip(x)
        .find(|(&v, _)| (v - baseline).abs() <= threshold)
        .map(|(_, &t)| t)
        .filter(|&t| t > x[0])
        .map(|t| t - x[0])
}

/// First x where a g2 trace has recovered halfway from its dip toward 1.
fn g2_recovery_scale(x: &[f64], y: &[f64], minimum: f64) -> Option<f64> {
    let threshold = (1.0 + minimum) / 2.0;
    y.iter()
        .zip(x)
        .find(|(&v, _)| v >= threshold)
        .map(|(_, &t)| t.abs())
        .filter(|&t| t > 0.0)
}

/// Coarse periodogram peak over an oversampled frequency grid from one
/// cycle per span up to the mean Nyquist rate.
fn dominant_frequency(x: &[f64], y: &[f64], baseline: f64) -> f64 {
    let n = x.len();
    let span = x[n - 1] - x[0];
    let oversample = 4;
    let k_max = 2 * n * oversample / 2;
    let mut best = (0.0, 1.0 / span);
    for k in 1..=k_max {
        let f = k as f64 / (oversample as f64 * span);
        if f > 0.5 * n as f64 / span {
            break;
        }
        let (i, q) = quadrature(x, y, baseline, f);
        let power = i * i + q * q;
        if power > best.0 {
            best = (power, f);
        }
    }
    best.1
}

/// In-phase and quadrature projections of `y - baseline` at frequency `f`.
fn quadrature(x: &[f64], y: &[f64], baseline: f64, f: f64) -> (f64, f64) {
    let mut i_sum = 0.0;
    let mut q_sum = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let arg = TWO_PI * f * xi;
        i_sum += (yi - baseline) * arg.cos();
        q_sum += (yi - baseline) * arg.sin();
    }
    (i_sum, q_sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::SeriesMetadata;
    use approx::assert_relative_eq;

    fn series(x: Vec<f64>, y: Vec<f64>) -> DataSeries {
        DataSeries::new(x, y, None, SeriesMetadata::default()).unwrap()
    }

    #[test]
    fn model_names_round_trip() {
        for &m in ModelId::all() {
            assert_eq!(ModelId::parse(m.name()).unwrap(), m);
        }
        assert!(ModelId::parse("lorentz").is_err());
    }

    #[test]
    fn transforms_round_trip() {
        let cases = [
            (Transform::Identity, -3.7),
            (Transform::Log, 15.7),
            (Transform::Logistic { lo: 0.2, hi: 4.0 }, 2.08),
        ];
        for (t, natural) in cases {
            let internal = t.to_internal("p", natural).unwrap();
            assert_relative_eq!(t.to_natural(internal), natural, max_relative = 1e-12);
        }
        assert!(Transform::Log.to_internal("tau", -1.0).is_err());
        assert!(Transform::Logistic { lo: 0.2, hi: 4.0 }
            .to_internal("stretch", 5.0)
            .is_err());
    }

    #[test]
    fn transform_slopes_match_finite_differences() {
        let h = 1e-6;
        for t in [
            Transform::Identity,
            Transform::Log,
            Transform::Logistic { lo: 0.2, hi: 4.0 },
        ] {
            for u in [-1.3, 0.0, 0.9] {
                let fd = (t.to_natural(u + h) - t.to_natural(u - h)) / (2.0 * h);
                assert_relative_eq!(t.slope(u), fd, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn lorentzian_hits_half_height_at_fwhm() {
        let params = [2.0, 1328.0, 5.0, 0.3];
        let m = ModelId::Lorentzian;
        assert_relative_eq!(m.eval(&params, 1328.0), 2.3, max_relative = 1e-14);
        assert_relative_eq!(m.eval(&params, 1328.0 + 2.5), 1.3, max_relative = 1e-14);
        assert_relative_eq!(m.eval(&params, 1328.0 - 2.5), 1.3, max_relative = 1e-14);
    }

    #[test]
    fn gaussian_hits_half_height_at_fwhm() {
        let params = [2.0, 10.0, 4.0, 1.0];
        let m = ModelId::Gaussian;
        assert_relative_eq!(m.eval(&params, 10.0), 3.0, max_relative = 1e-14);
        assert_relative_eq!(m.eval(&params, 12.0), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn stretched_exp_is_pinned_at_zero() {
        let params = [0.5, 592.0, 2.08, 0.25];
        let m = ModelId::StretchedExp;
        assert_eq!(m.eval(&params, 0.0), 0.75);
        let mut grad = [0.0; 4];
        m.gradient(&params, 0.0, &mut grad);
        assert_eq!(grad[1], 0.0);
        assert_eq!(grad[2], 0.0);
    }

    #[test]
    fn g2_model_is_symmetric() {
        let params = [0.9, 0.1, 5.0, 70.0];
        let m = ModelId::G2ThreeLevel;
        assert_eq!(m.eval(&params, 30.0), m.eval(&params, -30.0));
        assert_relative_eq!(m.eval(&params, 0.0), 0.2, max_relative = 1e-14);
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        // Interior points for every model; relative error target 1e-6,
        // well inside central-difference accuracy.
        let cases: Vec<(ModelId, Vec<f64>, Vec<f64>)> = vec![
            (
                ModelId::Lorentzian,
                vec![1.5, 3.0, 2.0, 0.2],
                vec![1.0, 2.8, 3.6, 7.0],
            ),
            (
                ModelId::Gaussian,
                vec![-0.8, 5.0, 3.0, 0.9],
                vec![2.0, 4.9, 6.5],
            ),
            (
                ModelId::ExpDecay,
                vec![1.2, 15.7, 0.1],
                vec![0.5, 8.0, 30.0],
            ),
            (
                ModelId::StretchedExp,
                vec![0.4, 592.0, 2.08, 0.3],
                vec![100.0, 592.0, 1500.0],
            ),
            (
                ModelId::DampedSinusoid,
                vec![0.5, 0.003, 0.4, 592.0, 2.08, 0.5],
                vec![40.0, 300.0, 900.0],
            ),
            (
                ModelId::Sin2Stretched,
                vec![0.4, 0.001, 0.2, 9300.0, 0.8, 0.3],
                vec![200.0, 2500.0, 9000.0],
            ),
            (
                ModelId::G2ThreeLevel,
                vec![0.9, 0.12, 5.0, 70.0],
                vec![1.0, 12.0, 90.0],
            ),
        ];
        for (model, params, xs) in cases {
            let mut grad = vec![0.0; model.n_params()];
            for &x in &xs {
                model.gradient(&params, x, &mut grad);
                for j in 0..params.len() {
                    let mut hi = params.clone();
                    let mut lo = params.clone();
                    let h = 1e-6 * params[j].abs().max(1e-3);
                    hi[j] += h;
                    lo[j] -= h;
                    let fd = (model.eval(&hi, x) - model.eval(&lo, x)) / (2.0 * h);
                    let scale = grad[j].abs().max(fd.abs()).max(1.0);
                    assert!(
                        (grad[j] - fd).abs() / scale < 1e-6,
                        "{model:?} param {j} at x = {x}: analytic {} vs fd {fd}",
                        grad[j]
                    );
                }
            }
        }
    }

    #[test]
    fn guess_finds_lorentzian_dip() {
        let truth = [-0.012, 1328.0, 2.0, 0.0];
        let x: Vec<f64> = (0..=400).map(|k| 1318.0 + 0.05 * k as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| ModelId::Lorentzian.eval(&truth, v)).collect();
        let guess = ModelId::Lorentzian.initial_guess(&series(x, y)).unwrap();
        assert!(guess[0] < 0.0, "amplitude sign");
        assert!((guess[1] - 1328.0).abs() < 0.5, "center {}", guess[1]);
        assert!(guess[2] > 0.5 && guess[2] < 8.0, "width {}", guess[2]);
    }

    #[test]
    fn guess_frequency_within_one_bin() {
        // Clean fringe at 0.003 cycles/ns over a 1500 ns record: the
        // periodogram must land within one spectral bin (1/span).
        let truth = [0.5, 0.003, 0.0, f64::INFINITY, 1.0, 0.5];
        let x: Vec<f64> = (0..=300).map(|k| 5.0 * k as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&t| 0.5 + 0.5 * (TWO_PI * truth[1] * t).cos())
            .collect();
        let guess = ModelId::DampedSinusoid.initial_guess(&series(x, y)).unwrap();
        let bin = 1.0 / 1500.0;
        assert!(
            (guess[1] - 0.003).abs() <= bin,
            "frequency {} not within {bin} of 0.003",
            guess[1]
        );
        assert!(guess[2].abs() < 0.3, "phase {}", guess[2]);
    }

    #[test]
    fn guess_rejects_flat_data() {
        let x: Vec<f64> = (0..50).map(|k| k as f64).collect();
        let y = vec![1.25; 50];
        assert!(matches!(
            ModelId::ExpDecay.initial_guess(&series(x, y)),
            Err(Error::NoSignal(_))
        ));
    }

    #[test]
    fn guess_exp_decay_scales() {
        let truth = [2.0, 15.7, 0.5];
        let x: Vec<f64> = (0..200).map(|k| 0.4 * k as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| ModelId::ExpDecay.eval(&truth, v)).collect();
        let guess = ModelId::ExpDecay.initial_guess(&series(x, y)).unwrap();
        assert!((guess[0] - 2.0).abs() < 0.4, "amplitude {}", guess[0]);
        assert!(guess[1] > 5.0 && guess[1] < 40.0, "tau {}", guess[1]);
        assert!((guess[2] - 0.5).abs() < 0.2, "baseline {}", guess[2]);
    }
}
