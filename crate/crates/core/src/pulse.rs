//! Coherent pulse sequences on the spin qubit.
//!
//! The working subspace is the {|0>, |+1>} two-level system addressed by
//! the microwave drive, tracked as a Bloch vector with sz = +1 for |0> and
//! sz = -1 for |+1>; the readout quantity is always the |+1> population
//! `(1 - sz) / 2`. Pulses are ideal instantaneous rotations except in the
//! Rabi sequence, where the finite drive pulse is a single rotation about
//! the tilted drive axis.
//!
//! Two layers are provided. Closed-form signal generators
//! ([`rabi_signal`], [`ramsey_signal`], [`cpmg_signal`]) evaluate the
//! parameterized shapes used to fit data: an oscillation times a
//! stretched-exponential [`DecayEnvelope`]. [`simulate_sequence_mc`] runs
//! the actual sequence sample by sample under quasi-static Gaussian
//! detuning noise (one detuning draw per sample, constant within the
//! sequence) plus an optional white-noise transverse damping channel, and
//! averages the readout. Quasi-static noise gives Ramsey fringes a
//! Gaussian envelope with `T2* = sqrt(2) * 1e3 / (2 pi sigma_MHz)` ns and
//! is refocused exactly by echo sequences; the white channel damps echoes
//! too.
//!
//! Unit convention: a detuning of delta MHz winds the Bloch phase by
//! `2 pi * delta * 1e-3 * t_ns` radians after `t_ns` nanoseconds.

use crate::exec;
use crate::rng::substream;
use crate::{ensure_finite, Error, Result};

/// Radians of Bloch phase per (MHz of detuning times ns of evolution).
const PHASE_PER_MHZ_NS: f64 = 2.0 * std::f64::consts::PI * 1e-3;

/// Bloch vector of the driven two-level subspace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState {
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
}

impl BlochState {
    pub fn new(sx: f64, sy: f64, sz: f64) -> Result<Self> {
        let state = Self { sx, sy, sz };
        for (name, value) in [("sx", sx), ("sy", sy), ("sz", sz)] {
            ensure_finite(name, value)?;
        }
        if state.norm() > 1.0 + 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "Bloch vector norm {} exceeds 1",
                state.norm()
            )));
        }
        Ok(state)
    }

    /// The |0> pole, where every sequence starts.
    pub fn spin_up() -> Self {
        Self {
            sx: 0.0,
            sy: 0.0,
            sz: 1.0,
        }
    }

    pub fn norm(&self) -> f64 {
        (self.sx * self.sx + self.sy * self.sy + self.sz * self.sz).sqrt()
    }

    /// Population of |+1>.
    pub fn excited_population(&self) -> f64 {
        (1.0 - self.sz) / 2.0
    }

    /// Rigid rotation by `angle_rad` about `axis` (normalized internally).
    pub fn rotate(&self, axis: [f64; 3], angle_rad: f64) -> Self {
        let len = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        debug_assert!(len > 0.0, "rotation axis must be nonzero");
        let k = [axis[0] / len, axis[1] / len, axis[2] / len];
        let (sin, cos) = angle_rad.sin_cos();
        let v = [self.sx, self.sy, self.sz];
        let kxv = [
            k[1] * v[2] - k[2] * v[1],
            k[2] * v[0] - k[0] * v[2],
            k[0] * v[1] - k[1] * v[0],
        ];
        let kdotv = k[0] * v[0] + k[1] * v[1] + k[2] * v[2];
        let out = Self {
            sx: v[0] * cos + kxv[0] * sin + k[0] * kdotv * (1.0 - cos),
            sy: v[1] * cos + kxv[1] * sin + k[1] * kdotv * (1.0 - cos),
            sz: v[2] * cos + kxv[2] * sin + k[2] * kdotv * (1.0 - cos),
        };
        debug_assert!(out.norm() <= 1.0 + 1e-9);
        out
    }

    /// Free precession: rotation about z, cheaper and exact in sz.
    pub fn rotate_about_z(&self, angle_rad: f64) -> Self {
        let (sin, cos) = angle_rad.sin_cos();
        let out = Self {
            sx: self.sx * cos - self.sy * sin,
            sy: self.sx * sin + self.sy * cos,
            sz: self.sz,
        };
        debug_assert!(out.norm() <= 1.0 + 1e-9);
        out
    }

    /// Shrink the transverse components; models white-noise dephasing.
    /// `factor` must lie in [0, 1].
    pub fn damp_transverse(&self, factor: f64) -> Self {
        debug_assert!((0.0..=1.0).contains(&factor));
        Self {
            sx: self.sx * factor,
            sy: self.sy * factor,
            sz: self.sz,
        }
    }

    /// Rotation about an axis in the equatorial plane at angle
    /// `axis_phase_rad` from x; how microwave pulses of a given phase act.
    pub fn pulse(&self, axis_phase_rad: f64, angle_rad: f64) -> Self {
        let (sin, cos) = axis_phase_rad.sin_cos();
        self.rotate([cos, sin, 0.0], angle_rad)
    }
}

/// Stretched-exponential decay with readout scale and baseline:
/// `signal(t) = amplitude * shape(t) * exp(-(t / time_constant)^stretch)
/// + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayEnvelope {
    pub amplitude: f64,
    /// Decay constant in the sweep's unit; `INFINITY` disables the decay.
    pub time_constant: f64,
    pub stretch: f64,
    pub offset: f64,
}

impl DecayEnvelope {
    /// No decay, unit contrast, zero baseline.
    pub fn unit() -> Self {
        Self {
            amplitude: 1.0,
            time_constant: f64::INFINITY,
            stretch: 1.0,
            offset: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("amplitude", self.amplitude)?;
        ensure_finite("offset", self.offset)?;
        ensure_finite("stretch", self.stretch)?;
        if self.stretch <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "stretch must be positive, got {}",
                self.stretch
            )));
        }
        if self.time_constant.is_nan() || self.time_constant <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "time_constant must be positive (INFINITY allowed), got {}",
                self.time_constant
            )));
        }
        Ok(())
    }

    /// The bare decay factor `exp(-(t / T)^n)`, 1 at `t = 0`.
    pub fn decay(&self, t: f64) -> f64 {
        let u = t / self.time_constant;
        if u == 0.0 {
            1.0
        } else {
            (-u.powf(self.stretch)).exp()
        }
    }
}

/// Optional `sin^2` modulation of a decay signal, as seen on echo traces
/// taken with a deliberately detuned final pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinSqModulation {
    pub frequency_mhz: f64,
    pub phase_rad: f64,
}

fn validate_sweep(name: &str, values: &[f64], nonnegative: bool) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidParameter(format!("{name} sweep is empty")));
    }
    for &v in values {
        ensure_finite(name, v)?;
        if nonnegative && v < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{name} values must be nonnegative, got {v}"
            )));
        }
    }
    Ok(())
}

/// |+1> population versus drive amplitude for a fixed-length resonant
/// pulse: `amplitude * decay(a) * sin^2(pi * f_rabi * a * t_pulse * 1e-3)
/// + offset`, where `f_rabi` is the Rabi frequency (MHz) at unit drive
/// amplitude. The envelope's time constant is in drive-amplitude units
/// here; pass [`DecayEnvelope::unit`] for an undamped oscillation.
pub fn rabi_signal(
    rabi_frequency_mhz: f64,
    amplitudes: &[f64],
    pulse_length_ns: f64,
    envelope: &DecayEnvelope,
) -> Result<Vec<f64>> {
    ensure_finite("rabi_frequency_mhz", rabi_frequency_mhz)?;
    if rabi_frequency_mhz <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "rabi_frequency_mhz must be positive, got {rabi_frequency_mhz}"
        )));
    }
    ensure_finite("pulse_length_ns", pulse_length_ns)?;
    if pulse_length_ns <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "pulse_length_ns must be positive, got {pulse_length_ns}"
        )));
    }
    validate_sweep("amplitude", amplitudes, true)?;
    envelope.validate()?;
    Ok(amplitudes
        .iter()
        .map(|&a| {
            let turns = rabi_frequency_mhz * a * pulse_length_ns * 1e-3;
            envelope.amplitude
                * envelope.decay(a)
                * (std::f64::consts::PI * turns).sin().powi(2)
                + envelope.offset
        })
        .collect())
}

/// Ramsey fringe versus free-evolution time:
/// `amplitude * decay(t) * cos(2 pi * detuning * t * 1e-3 + phase)
/// + offset`. The ideal two-pulse fringe has amplitude 0.5 and offset 0.5.
pub fn ramsey_signal(
    detuning_mhz: f64,
    phase_rad: f64,
    times_ns: &[f64],
    envelope: &DecayEnvelope,
) -> Result<Vec<f64>> {
    ensure_finite("detuning_mhz", detuning_mhz)?;
    ensure_finite("phase_rad", phase_rad)?;
    validate_sweep("times_ns", times_ns, true)?;
    envelope.validate()?;
    Ok(times_ns
        .iter()
        .map(|&t| {
            envelope.amplitude
                * envelope.decay(t)
                * (PHASE_PER_MHZ_NS * detuning_mhz * t + phase_rad).cos()
                + envelope.offset
        })
        .collect())
}

/// Echo-train decay versus total free-evolution time:
/// `amplitude * decay(t) * m(t) + offset`, where `m(t)` is 1 or the
/// supplied `sin^2` modulation. `n_pi` identifies the sequence (1 = Hahn
/// echo) and must be at least 1; the decay constant appropriate to that
/// order is the caller's to supply through the envelope.
pub fn cpmg_signal(
    n_pi: usize,
    times_ns: &[f64],
    envelope: &DecayEnvelope,
    modulation: Option<SinSqModulation>,
) -> Result<Vec<f64>> {
    if n_pi == 0 {
        return Err(Error::InvalidParameter(
            "n_pi must be at least 1 (1 = Hahn echo)".into(),
        ));
    }
    validate_sweep("times_ns", times_ns, true)?;
    envelope.validate()?;
    if let Some(m) = modulation {
        ensure_finite("modulation frequency_mhz", m.frequency_mhz)?;
        ensure_finite("modulation phase_rad", m.phase_rad)?;
    }
    Ok(times_ns
        .iter()
        .map(|&t| {
            let shape = match modulation {
                Some(m) => (PHASE_PER_MHZ_NS * m.frequency_mhz * t + m.phase_rad)
                    .sin()
                    .powi(2),
                None => 1.0,
            };
            envelope.amplitude * envelope.decay(t) * shape + envelope.offset
        })
        .collect())
}

/// [`cpmg_signal`] with a single refocusing pulse.
pub fn hahn_signal(
    times_ns: &[f64],
    envelope: &DecayEnvelope,
    modulation: Option<SinSqModulation>,
) -> Result<Vec<f64>> {
    cpmg_signal(1, times_ns, envelope, modulation)
}

/// Which sequence [`simulate_sequence_mc`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceKind {
    /// Single finite drive pulse; the sweep is over drive amplitude.
    Rabi,
    /// pi/2 - free - pi/2; the sweep is over free time (ns).
    Ramsey,
    /// pi/2 - free/2 - pi - free/2 - pi/2; sweep over total free time.
    Hahn,
    /// CPMG echo train with `n_pi` refocusing pulses; sweep over total
    /// free time.
    Cpmg,
}

/// Equatorial axis angles (radians from x) of the pi/2 and pi pulses.
/// The default is the CPMG convention: pi/2 about x, pi about y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulsePhases {
    pub half_rad: f64,
    pub pi_rad: f64,
}

impl Default for PulsePhases {
    fn default() -> Self {
        Self {
            half_rad: 0.0,
            pi_rad: std::f64::consts::FRAC_PI_2,
        }
    }
}

/// Full description of a pulse-sequence run.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSpec {
    pub kind: SequenceKind,
    /// Number of refocusing pulses; meaningful for `Cpmg` (and forced to
    /// 1 by `Hahn`).
    pub n_pi: usize,
    /// Deliberate drive detuning, MHz; quasi-static noise adds to this.
    pub detuning_mhz: f64,
    /// Rabi frequency at unit drive amplitude, MHz; used by `Rabi`.
    pub rabi_frequency_mhz: f64,
    /// Drive pulse length in ns; used by `Rabi`.
    pub pulse_length_ns: f64,
    /// Sweep values: drive amplitudes for `Rabi`, free-evolution times in
    /// ns otherwise.
    pub sweep: Vec<f64>,
    pub phases: PulsePhases,
}

impl SequenceSpec {
    /// A sequence with resonant ideal pulses and default phases.
    pub fn new(kind: SequenceKind, sweep: Vec<f64>) -> Self {
        Self {
            kind,
            n_pi: 1,
            detuning_mhz: 0.0,
            rabi_frequency_mhz: 1.25,
            pulse_length_ns: 400.0,
            sweep,
            phases: PulsePhases::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("detuning_mhz", self.detuning_mhz)?;
        ensure_finite("half_rad", self.phases.half_rad)?;
        ensure_finite("pi_rad", self.phases.pi_rad)?;
        match self.kind {
            SequenceKind::Rabi => {
                ensure_finite("rabi_frequency_mhz", self.rabi_frequency_mhz)?;
                if self.rabi_frequency_mhz <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "rabi_frequency_mhz must be positive, got {}",
                        self.rabi_frequency_mhz
                    )));
                }
                ensure_finite("pulse_length_ns", self.pulse_length_ns)?;
                if self.pulse_length_ns <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "pulse_length_ns must be positive, got {}",
                        self.pulse_length_ns
                    )));
                }
                validate_sweep("amplitude", &self.sweep, true)
            }
            SequenceKind::Cpmg if self.n_pi == 0 => Err(Error::InvalidParameter(
                "n_pi must be at least 1 for a CPMG train".into(),
            )),
            _ => validate_sweep("times_ns", &self.sweep, true),
        }
    }

    fn refocusing_pulses(&self) -> usize {
        match self.kind {
            SequenceKind::Hahn => 1,
            SequenceKind::Cpmg => self.n_pi,
            _ => 0,
        }
    }
}

/// One realization: run the sequence at every sweep value for a fixed
/// detuning offset, returning the |+1> population.
fn run_once(spec: &SequenceSpec, detuning_mhz: f64, t2_white_ns: Option<f64>, out: &mut [f64]) {
    let half = std::f64::consts::FRAC_PI_2;
    let omega = PHASE_PER_MHZ_NS * detuning_mhz;
    let damp = |state: BlochState, dt: f64| match t2_white_ns {
        Some(t2) => state.damp_transverse((-dt / t2).exp()),
        None => state,
    };
    for (slot, &v) in out.iter_mut().zip(&spec.sweep) {
        let final_state = match spec.kind {
            SequenceKind::Rabi => {
                // Finite pulse about the tilted drive axis.
                let rabi = PHASE_PER_MHZ_NS * spec.rabi_frequency_mhz * v;
                let w = (rabi * rabi + omega * omega).sqrt();
                if w == 0.0 {
                    BlochState::spin_up()
                } else {
                    BlochState::spin_up()
                        .rotate([rabi, 0.0, omega], w * spec.pulse_length_ns)
                }
            }
            SequenceKind::Ramsey => {
                let mut state = BlochState::spin_up().pulse(spec.phases.half_rad, half);
                state = damp(state.rotate_about_z(omega * v), v);
                state.pulse(spec.phases.half_rad, half)
            }
            SequenceKind::Hahn | SequenceKind::Cpmg => {
                let n = spec.refocusing_pulses();
                let edge = v / (2.0 * n as f64);
                let gap = v / n as f64;
                let mut state = BlochState::spin_up().pulse(spec.phases.half_rad, half);
                state = damp(state.rotate_about_z(omega * edge), edge);
                for k in 0..n {
                    state = state.pulse(spec.phases.pi_rad, std::f64::consts::PI);
                    let dt = if k + 1 == n { edge } else { gap };
                    state = damp(state.rotate_about_z(omega * dt), dt);
                }
                state.pulse(spec.phases.half_rad, half)
            }
        };
        *slot = final_state.excited_population();
    }
}

/// Noise-free closed run of the sequence; the zero-noise limit of the
/// Monte Carlo average.
pub fn simulate_sequence(
    spec: &SequenceSpec,
    t2_white_ns: Option<f64>,
) -> Result<Vec<f64>> {
    spec.validate()?;
    validate_t2_white(t2_white_ns)?;
    let mut out = vec![0.0; spec.sweep.len()];
    run_once(spec, spec.detuning_mhz, t2_white_ns, &mut out);
    Ok(out)
}

fn validate_t2_white(t2_white_ns: Option<f64>) -> Result<()> {
    if let Some(t2) = t2_white_ns {
        ensure_finite("t2_white_ns", t2)?;
        if t2 <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "t2_white_ns must be positive, got {t2}"
            )));
        }
    }
    Ok(())
}

/// Monte Carlo average of the sequence under quasi-static Gaussian
/// detuning noise: sample `k` adds `N(0, noise_sigma_mhz^2)` to the
/// detuning, constant for the whole sequence, with the draw taken from
/// substream `(seed, k)`. Returns the mean |+1> population at each sweep
/// value. Runs on rayon under the `parallel` feature with a fixed
/// chunking, so the result is identical to the sequential path.
pub fn simulate_sequence_mc(
    spec: &SequenceSpec,
    noise_sigma_mhz: f64,
    n_samples: usize,
    t2_white_ns: Option<f64>,
    seed: u64,
) -> Result<Vec<f64>> {
    mc_impl(spec, noise_sigma_mhz, n_samples, t2_white_ns, seed, true)
}

/// Sequential reference for [`simulate_sequence_mc`]; exists for
/// benchmarks and the determinism tests.
pub fn simulate_sequence_mc_seq(
    spec: &SequenceSpec,
    noise_sigma_mhz: f64,
    n_samples: usize,
    t2_white_ns: Option<f64>,
    seed: u64,
) -> Result<Vec<f64>> {
    mc_impl(spec, noise_sigma_mhz, n_samples, t2_white_ns, seed, false)
}

fn mc_impl(
    spec: &SequenceSpec,
    noise_sigma_mhz: f64,
    n_samples: usize,
    t2_white_ns: Option<f64>,
    seed: u64,
    parallel: bool,
) -> Result<Vec<f64>> {
    spec.validate()?;
    validate_t2_white(t2_white_ns)?;
    ensure_finite("noise_sigma_mhz", noise_sigma_mhz)?;
    if noise_sigma_mhz < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "noise_sigma_mhz must be nonnegative, got {noise_sigma_mhz}"
        )));
    }
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be positive".into()));
    }

    let n_sweep = spec.sweep.len();
    let chunk = 256;
    let accumulate = |range: std::ops::Range<usize>| {
        let mut sums = vec![0.0; n_sweep];
        let mut signal = vec![0.0; n_sweep];
        for k in range {
            let mut rng = substream(seed, k as u64);
            let draw: f64 = rand_distr::Distribution::sample(
                &rand_distr::StandardNormal,
                &mut rng,
            );
            let detuning = spec.detuning_mhz + noise_sigma_mhz * draw;
            run_once(spec, detuning, t2_white_ns, &mut signal);
            for (sum, s) in sums.iter_mut().zip(&signal) {
                *sum += s;
            }
        }
        sums
    };
    let partials = if parallel {
        exec::map_chunks(n_samples, chunk, accumulate)
    } else {
        exec::map_chunks_seq(n_samples, chunk, accumulate)
    };
    let mut totals = vec![0.0; n_sweep];
    for partial in partials {
        for (total, p) in totals.iter_mut().zip(partial) {
            *total += p;
        }
    }
    for total in &mut totals {
        *total /= n_samples as f64;
    }
    Ok(totals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rotation_preserves_norm() {
        let state = BlochState::new(0.36, -0.48, 0.8).unwrap();
        for (axis, angle) in [
            ([1.0, 0.0, 0.0], 0.7),
            ([0.3, -0.9, 0.1], 2.9),
            ([0.0, 0.0, 1.0], -4.0),
        ] {
            let rotated = state.rotate(axis, angle);
            assert_relative_eq!(rotated.norm(), state.norm(), max_relative = 1e-12);
        }
    }

    #[test]
    fn two_quarter_turns_make_a_half_turn() {
        let state = BlochState::new(0.1, 0.2, 0.9).unwrap();
        let axis = [0.6, 0.0, 0.8];
        let half = std::f64::consts::FRAC_PI_2;
        let twice = state.rotate(axis, half).rotate(axis, half);
        let once = state.rotate(axis, std::f64::consts::PI);
        assert_relative_eq!(twice.sx, once.sx, epsilon = 1e-12);
        assert_relative_eq!(twice.sy, once.sy, epsilon = 1e-12);
        assert_relative_eq!(twice.sz, once.sz, epsilon = 1e-12);
    }

    #[test]
    fn z_rotation_shortcut_matches_general_rotation() {
        let state = BlochState::new(0.5, -0.3, 0.2).unwrap();
        let general = state.rotate([0.0, 0.0, 1.0], 1.234);
        let fast = state.rotate_about_z(1.234);
        assert_relative_eq!(general.sx, fast.sx, epsilon = 1e-15);
        assert_relative_eq!(general.sy, fast.sy, epsilon = 1e-15);
        assert_eq!(fast.sz, state.sz);
    }

    #[test]
    fn bloch_state_rejects_long_vectors_and_nan() {
        assert!(BlochState::new(1.0, 1.0, 1.0).is_err());
        assert!(BlochState::new(f64::NAN, 0.0, 0.0).is_err());
        assert!(BlochState::new(0.6, 0.8, 0.0).is_ok());
    }

    #[test]
    fn resonant_rabi_sweep_matches_sin_squared() {
        // f_R * a * t_pulse * 1e-3 = 1/2 at a = 1: a full pi pulse.
        let amplitudes: Vec<f64> = (0..=40).map(|k| 0.05 * k as f64).collect();
        let spec = SequenceSpec {
            sweep: amplitudes.clone(),
            ..SequenceSpec::new(SequenceKind::Rabi, vec![])
        };
        let mc = simulate_sequence(&spec, None).unwrap();
        let closed = rabi_signal(1.25, &amplitudes, 400.0, &DecayEnvelope::unit()).unwrap();
        for (a, (m, c)) in amplitudes.iter().zip(mc.iter().zip(&closed)) {
            assert_relative_eq!(m, c, epsilon = 1e-12);
            if (a - 1.0).abs() < 1e-12 {
                assert_relative_eq!(*m, 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn detuned_rabi_never_reaches_full_transfer() {
        let amplitudes: Vec<f64> = (1..=60).map(|k| 0.05 * k as f64).collect();
        let spec = SequenceSpec {
            detuning_mhz: 1.0,
            sweep: amplitudes,
            ..SequenceSpec::new(SequenceKind::Rabi, vec![])
        };
        let signal = simulate_sequence(&spec, None).unwrap();
        assert!(signal.iter().all(|&p| p < 1.0 - 1e-6));
        assert!(signal.iter().copied().fold(0.0, f64::max) > 0.3);
    }

    #[test]
    fn noiseless_ramsey_matches_closed_form() {
        let times: Vec<f64> = (0..200).map(|k| 5.0 * k as f64).collect();
        let spec = SequenceSpec {
            detuning_mhz: 3.0,
            sweep: times.clone(),
            ..SequenceSpec::new(SequenceKind::Ramsey, vec![])
        };
        let simulated = simulate_sequence(&spec, None).unwrap();
        let envelope = DecayEnvelope {
            amplitude: 0.5,
            offset: 0.5,
            ..DecayEnvelope::unit()
        };
        let closed = ramsey_signal(3.0, 0.0, &times, &envelope).unwrap();
        for (s, c) in simulated.iter().zip(&closed) {
            assert_relative_eq!(s, c, epsilon = 1e-12);
        }
    }

    #[test]
    fn white_noise_channel_damps_ramsey_fringes() {
        let times: Vec<f64> = (0..100).map(|k| 20.0 * k as f64).collect();
        let spec = SequenceSpec {
            detuning_mhz: 2.0,
            sweep: times.clone(),
            ..SequenceSpec::new(SequenceKind::Ramsey, vec![])
        };
        let t2 = 600.0;
        let simulated = simulate_sequence(&spec, Some(t2)).unwrap();
        let envelope = DecayEnvelope {
            amplitude: 0.5,
            time_constant: t2,
            stretch: 1.0,
            offset: 0.5,
        };
        let closed = ramsey_signal(2.0, 0.0, &times, &envelope).unwrap();
        for (s, c) in simulated.iter().zip(&closed) {
            assert_relative_eq!(s, c, epsilon = 1e-12);
        }
    }

    #[test]
    fn hahn_echo_refocuses_static_detuning_exactly() {
        // Quasi-static noise, however strong, cancels over the two halves.
        let times: Vec<f64> = (1..=20).map(|k| 500.0 * k as f64).collect();
        let spec = SequenceSpec {
            sweep: times,
            ..SequenceSpec::new(SequenceKind::Hahn, vec![])
        };
        let signal = simulate_sequence_mc(&spec, 5.0, 400, None, 17).unwrap();
        for p in signal {
            assert_relative_eq!(p, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn cpmg_with_one_pulse_is_the_hahn_sequence() {
        let times: Vec<f64> = (1..=15).map(|k| 300.0 * k as f64).collect();
        let hahn = SequenceSpec {
            detuning_mhz: 1.3,
            sweep: times.clone(),
            ..SequenceSpec::new(SequenceKind::Hahn, vec![])
        };
        let cpmg = SequenceSpec {
            kind: SequenceKind::Cpmg,
            n_pi: 1,
            ..hahn.clone()
        };
        let a = simulate_sequence(&hahn, Some(2000.0)).unwrap();
        let b = simulate_sequence(&cpmg, Some(2000.0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn white_damping_of_an_echo_is_order_independent() {
        // The white channel commutes with refocusing: total transverse
        // damping depends only on total free time, so all orders agree.
        let times: Vec<f64> = (1..=10).map(|k| 1000.0 * k as f64).collect();
        let t2 = 9300.0;
        let mut signals = Vec::new();
        for n_pi in [1usize, 2, 4] {
            let spec = SequenceSpec {
                kind: SequenceKind::Cpmg,
                n_pi,
                sweep: times.clone(),
                ..SequenceSpec::new(SequenceKind::Cpmg, vec![])
            };
            signals.push(simulate_sequence(&spec, Some(t2)).unwrap());
        }
        let expected: Vec<f64> = times.iter().map(|&t| (1.0 + (-t / t2).exp()) / 2.0).collect();
        for signal in &signals {
            for (s, e) in signal.iter().zip(&expected) {
                assert_relative_eq!(s, e, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn ramsey_mc_fringe_decays_with_gaussian_envelope() {
        let sigma = 0.38;
        let t2_star = std::f64::consts::SQRT_2 * 1e3 / (2.0 * std::f64::consts::PI * sigma);
        let times: Vec<f64> = (0..=24).map(|k| k as f64 * t2_star / 8.0).collect();
        let spec = SequenceSpec {
            detuning_mhz: 3.0,
            sweep: times.clone(),
            ..SequenceSpec::new(SequenceKind::Ramsey, vec![])
        };
        let signal = simulate_sequence_mc(&spec, sigma, 40_000, None, 23).unwrap();
        for (t, s) in times.iter().zip(&signal) {
            let expected = 0.5
                + 0.5
                    * (-(t / t2_star).powi(2)).exp()
                    * (PHASE_PER_MHZ_NS * 3.0 * t).cos();
            // MC error at 40k samples is below 0.5 / sqrt(40000) = 2.5e-3.
            assert!(
                (s - expected).abs() < 0.012,
                "t = {t}: {s} vs {expected}"
            );
        }
    }

    #[test]
    fn mc_parallel_equals_sequential_bit_for_bit() {
        let spec = SequenceSpec {
            detuning_mhz: 2.0,
            sweep: (0..40).map(|k| 50.0 * k as f64).collect(),
            ..SequenceSpec::new(SequenceKind::Ramsey, vec![])
        };
        let a = simulate_sequence_mc(&spec, 1.0, 3000, Some(5e3), 7).unwrap();
        let b = simulate_sequence_mc_seq(&spec, 1.0, 3000, Some(5e3), 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mc_zero_noise_equals_closed_run() {
        let spec = SequenceSpec {
            detuning_mhz: 1.7,
            sweep: (0..20).map(|k| 100.0 * k as f64).collect(),
            ..SequenceSpec::new(SequenceKind::Ramsey, vec![])
        };
        let mc = simulate_sequence_mc(&spec, 0.0, 10, None, 0).unwrap();
        let closed = simulate_sequence(&spec, None).unwrap();
        for (m, c) in mc.iter().zip(&closed) {
            assert_relative_eq!(m, c, epsilon = 1e-15);
        }
    }

    #[test]
    fn closed_form_signal_validation() {
        let env = DecayEnvelope::unit();
        assert!(rabi_signal(0.0, &[1.0], 400.0, &env).is_err());
        assert!(rabi_signal(1.0, &[], 400.0, &env).is_err());
        assert!(rabi_signal(1.0, &[-1.0], 400.0, &env).is_err());
        assert!(ramsey_signal(f64::NAN, 0.0, &[1.0], &env).is_err());
        assert!(cpmg_signal(0, &[1.0], &env, None).is_err());
        let bad_env = DecayEnvelope {
            stretch: 0.0,
            ..env
        };
        assert!(cpmg_signal(1, &[1.0], &bad_env, None).is_err());
    }

    #[test]
    fn envelope_decay_limits() {
        let env = DecayEnvelope {
            amplitude: 1.0,
            time_constant: 100.0,
            stretch: 2.08,
            offset: 0.0,
        };
        assert_eq!(env.decay(0.0), 1.0);
        assert_relative_eq!(env.decay(100.0), (-1.0f64).exp(), max_relative = 1e-12);
        assert_eq!(DecayEnvelope::unit().decay(1e12), 1.0);
    }

    #[test]
    fn sequence_spec_validation() {
        let mut spec = SequenceSpec::new(SequenceKind::Cpmg, vec![100.0]);
        spec.n_pi = 0;
        assert!(spec.validate().is_err());
        let empty = SequenceSpec::new(SequenceKind::Ramsey, vec![]);
        assert!(empty.validate().is_err());
        let negative = SequenceSpec::new(SequenceKind::Hahn, vec![-5.0]);
        assert!(negative.validate().is_err());
        let mut rabi = SequenceSpec::new(SequenceKind::Rabi, vec![0.5]);
        rabi.pulse_length_ns = 0.0;
        assert!(rabi.validate().is_err());
    }

    #[test]
    fn sin_squared_modulated_echo_shape() {
        let times = [0.0, 250.0, 500.0];
        let env = DecayEnvelope {
            amplitude: 0.4,
            time_constant: 9300.0,
            stretch: 0.8,
            offset: 0.3,
        };
        let modulation = SinSqModulation {
            frequency_mhz: 1.0,
            phase_rad: 0.0,
        };
        let signal = hahn_signal(&times, &env, Some(modulation)).unwrap();
        // At t = 0 the sin^2 kills the decay term entirely.
        assert_relative_eq!(signal[0], 0.3, max_relative = 1e-12);
        // A quarter period of 1 MHz is 250 ns: sin^2 = 1 there.
        let expected = 0.4 * (-(250.0f64 / 9300.0).powf(0.8)).exp() + 0.3;
        assert_relative_eq!(signal[1], expected, max_relative = 1e-12);
    }
}
