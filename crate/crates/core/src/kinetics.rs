//! Three-level emitter kinetics.
//!
//! States: ground, optically excited, and a long-lived dark shelf.
//! Transitions: pumping ground -> excited, radiative decay excited ->
//! ground (the photon channel), shelving excited -> dark, deshelving
//! dark -> ground. Rates are events per nanosecond.
//!
//! The generator returned by [`rate_matrix`] is column-stochastic:
//! `M[(i, j)]` is the rate from state `j` into state `i` and each diagonal
//! entry is the negated sum of its column's off-diagonal entries, so
//! `dp/dt = M p` conserves total population exactly.
//!
//! [`evolve`] solves the system in closed form through the eigenvalues of
//! `M`, which are 0 plus the two roots of a quadratic. When those roots are
//! nearly degenerate with each other or with 0 (relative gap below 1e-8)
//! the closed form would divide by a small eigenvalue difference, so a
//! scaling-and-squaring matrix exponential takes over instead.

use nalgebra::{Complex, Matrix3, Vector3};

use crate::{ensure_finite, Error, Result};

/// Transition rates of the three-level model, in events per ns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeLevelRates {
    /// Ground -> excited excitation rate.
    pub pump: f64,
    /// Excited -> ground decay rate; every event emits a photon.
    pub radiative: f64,
    /// Excited -> dark shelving rate.
    pub shelve: f64,
    /// Dark -> ground recovery rate.
    pub deshelve: f64,
}

impl ThreeLevelRates {
    pub fn new(pump: f64, radiative: f64, shelve: f64, deshelve: f64) -> Result<Self> {
        let rates = Self {
            pump,
            radiative,
            shelve,
            deshelve,
        };
        rates.validate()?;
        Ok(rates)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("pump", self.pump),
            ("radiative", self.radiative),
            ("shelve", self.shelve),
            ("deshelve", self.deshelve),
        ] {
            ensure_finite(name, value)?;
            if value < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "rate `{name}` must be nonnegative, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Mean dwell time in the dark state, `None` when the dark state is
    /// absorbing (deshelve = 0).
    pub fn dark_lifetime_ns(&self) -> Option<f64> {
        (self.deshelve > 0.0).then(|| 1.0 / self.deshelve)
    }
}

/// Occupation probabilities of the three states. Valid states are
/// componentwise in [0, 1] and sum to 1 within 1e-12.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationState {
    pub ground: f64,
    pub excited: f64,
    pub dark: f64,
}

impl PopulationState {
    pub fn new(ground: f64, excited: f64, dark: f64) -> Result<Self> {
        let state = Self {
            ground,
            excited,
            dark,
        };
        state.validate()?;
        Ok(state)
    }

    /// Everything in the ground state; the state right after a photon
    /// emission, which is where a g2 measurement starts.
    pub fn all_ground() -> Self {
        Self {
            ground: 1.0,
            excited: 0.0,
            dark: 0.0,
        }
    }

    pub fn all_excited() -> Self {
        Self {
            ground: 0.0,
            excited: 1.0,
            dark: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("ground", self.ground),
            ("excited", self.excited),
            ("dark", self.dark),
        ] {
            ensure_finite(name, value)?;
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidParameter(format!(
                    "population `{name}` must lie in [0, 1], got {value}"
                )));
            }
        }
        let sum = self.sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "populations must sum to 1 within 1e-12, got {sum}"
            )));
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.ground + self.excited + self.dark
    }

    fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.ground, self.excited, self.dark)
    }

    fn from_vector(v: &Vector3<f64>) -> Self {
        Self {
            ground: v[0],
            excited: v[1],
            dark: v[2],
        }
    }
}

/// Column-stochastic generator of the rate equations.
///
/// Column order (and row order) is ground, excited, dark. Each diagonal
/// entry is the negated sum of the off-diagonal entries in its column, so
/// every column sums to exactly zero in floating point.
pub fn rate_matrix(rates: &ThreeLevelRates) -> Result<Matrix3<f64>> {
    rates.validate()?;
    let ThreeLevelRates {
        pump,
        radiative,
        shelve,
        deshelve,
    } = *rates;
    #[rustfmt::skip]
    let m = Matrix3::new(
        -pump,  radiative,           deshelve,
         pump, -(radiative + shelve), 0.0,
         0.0,   shelve,              -deshelve,
    );
    Ok(m)
}

/// Coefficients of the monic quadratic whose roots are the two nonzero
/// eigenvalues of the generator: lambda^2 + b lambda + c.
fn eigen_quadratic(rates: &ThreeLevelRates) -> (f64, f64) {
    let b = rates.pump + rates.radiative + rates.shelve + rates.deshelve;
    let c = rates.deshelve * (rates.pump + rates.radiative + rates.shelve)
        + rates.pump * rates.shelve;
    (b, c)
}

/// The two nonzero eigenvalues of the generator, ordered fast then slow by
/// real-part magnitude. Both have nonpositive real part; they form a
/// conjugate pair when the discriminant is negative.
pub fn decay_eigenvalues(rates: &ThreeLevelRates) -> Result<(Complex<f64>, Complex<f64>)> {
    rates.validate()?;
    let (b, c) = eigen_quadratic(rates);
    let disc = b * b - 4.0 * c;
    if disc >= 0.0 {
        // Citardauq for the small root; avoids cancellation when c << b^2.
        let fast = -(b + disc.sqrt()) / 2.0;
        let slow = if fast == 0.0 { 0.0 } else { c / fast };
        Ok((Complex::new(fast, 0.0), Complex::new(slow, 0.0)))
    } else {
        let re = -b / 2.0;
        let im = (-disc).sqrt() / 2.0;
        Ok((Complex::new(re, im), Complex::new(re, -im)))
    }
}

/// Relative eigenvalue gap below which `evolve` switches to the matrix
/// exponential.
const DEGENERACY_GAP: f64 = 1e-8;

/// Populations after free evolution for `t_ns` nanoseconds.
pub fn evolve(
    rates: &ThreeLevelRates,
    initial: &PopulationState,
    t_ns: f64,
) -> Result<PopulationState> {
    rates.validate()?;
    initial.validate()?;
    ensure_finite("t_ns", t_ns)?;
    if t_ns < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "t_ns must be nonnegative, got {t_ns}"
        )));
    }
    if t_ns == 0.0 {
        return Ok(*initial);
    }

    let m = rate_matrix(rates)?;
    let v0 = initial.as_vector();
    let (b, c) = eigen_quadratic(rates);
    if b == 0.0 {
        // All rates zero: nothing moves.
        return Ok(*initial);
    }

    let disc = b * b - 4.0 * c;
    let (fast, slow) = decay_eigenvalues(rates)?;
    let pair_gap = disc.abs().sqrt();
    let zero_gap = fast.norm().min(slow.norm());
    if pair_gap < DEGENERACY_GAP * b || zero_gap < DEGENERACY_GAP * b {
        let p = expm3(&(m * t_ns)) * v0;
        return Ok(PopulationState::from_vector(&p));
    }

    // Closed form. Each component is a_i + (terms in the two nonzero
    // eigenvalues); the coefficients follow from matching p, p', p'' at 0.
    let v1 = m * v0;
    let v2 = m * v1;
    let mut p = Vector3::zeros();
    if disc > 0.0 {
        let (l1, l2) = (fast.re, slow.re);
        let e1 = (l1 * t_ns).exp();
        let e2 = (l2 * t_ns).exp();
        for i in 0..3 {
            let beta = (v2[i] - l2 * v1[i]) / (l1 * (l1 - l2));
            let gamma = (v2[i] - l1 * v1[i]) / (l2 * (l2 - l1));
            let alpha = v0[i] - beta - gamma;
            p[i] = alpha + beta * e1 + gamma * e2;
        }
    } else {
        // Conjugate pair a +/- i w: components relax as
        // a_i + e^{a t} (beta cos(w t) + gamma sin(w t)).
        let (a, w) = (fast.re, fast.im.abs());
        let ea = (a * t_ns).exp();
        let (cos, sin) = ((w * t_ns).cos(), (w * t_ns).sin());
        let mag2 = a * a + w * w;
        for i in 0..3 {
            let beta = (2.0 * a * v1[i] - v2[i]) / mag2;
            let gamma = (v1[i] - a * beta) / w;
            let alpha = v0[i] - beta;
            p[i] = alpha + ea * (beta * cos + gamma * sin);
        }
    }
    Ok(PopulationState::from_vector(&p))
}

/// Matrix exponential by scaling and squaring with a Taylor series.
/// Accurate to near machine precision for the generator matrices used
/// here; only reached when the closed form is ill-conditioned.
fn expm3(a: &Matrix3<f64>) -> Matrix3<f64> {
    let norm = inf_norm(a);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let x = a / 2f64.powi(squarings as i32);
    let mut result = Matrix3::identity();
    let mut term = Matrix3::identity();
    for k in 1..=24 {
        term = (term * x) / k as f64;
        result += term;
        if inf_norm(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result *= result;
    }
    result
}

fn inf_norm(a: &Matrix3<f64>) -> f64 {
    (0..3)
        .map(|i| (0..3).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Long-time limit of the populations under continuous pumping.
///
/// Errors when no pumped steady state exists: `pump = 0` (everything
/// settles in the ground state and the excited population vanishes) or an
/// absorbing dark state (`shelve > 0` with `deshelve = 0`).
pub fn steady_state(rates: &ThreeLevelRates) -> Result<PopulationState> {
    rates.validate()?;
    if rates.pump == 0.0 {
        return Err(Error::NoSteadyState(
            "pump rate is zero, so the excited-state population vanishes".into(),
        ));
    }
    let dark = if rates.deshelve == 0.0 {
        if rates.shelve > 0.0 {
            return Err(Error::NoSteadyState(
                "dark state is absorbing (shelve > 0 with deshelve = 0)".into(),
            ));
        }
        0.0
    } else {
        rates.shelve / rates.deshelve
    };
    // Null vector of the generator, scaled so excited = 1, then normalized.
    let ground = (rates.radiative + rates.shelve) / rates.pump;
    let norm = ground + 1.0 + dark;
    Ok(PopulationState {
        ground: ground / norm,
        excited: 1.0 / norm,
        dark: dark / norm,
    })
}

/// Normalized second-order photon correlation of the continuously pumped
/// emitter: the excited population a time `|tau_ns|` after an emission
/// (which resets the emitter to the ground state), divided by its
/// steady-state value. Symmetric in the sign of `tau_ns`; exactly 0 at
/// `tau_ns = 0`, 1 in the long-delay limit.
pub fn g2_analytic(rates: &ThreeLevelRates, tau_ns: f64) -> Result<f64> {
    ensure_finite("tau_ns", tau_ns)?;
    let stationary = steady_state(rates)?;
    if stationary.excited <= 0.0 {
        return Err(Error::NoSteadyState(
            "steady-state excited population is zero".into(),
        ));
    }
    let p = evolve(rates, &PopulationState::all_ground(), tau_ns.abs())?;
    Ok(p.excited / stationary.excited)
}

/// Two-exponential empirical g2 shape: an antibunching dip recovering on
/// `t1_ns` and a bunching shoulder relaxing on `t2_ns`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2FitParams {
    pub amp_anti: f64,
    pub amp_bunch: f64,
    pub t1_ns: f64,
    pub t2_ns: f64,
}

impl G2FitParams {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("amp_anti", self.amp_anti), ("amp_bunch", self.amp_bunch)] {
            ensure_finite(name, value)?;
            if value < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be nonnegative, got {value}"
                )));
            }
        }
        for (name, value) in [("t1_ns", self.t1_ns), ("t2_ns", self.t2_ns)] {
            ensure_finite(name, value)?;
            if value <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// `1 - amp_anti exp(-|tau|/t1) + amp_bunch exp(-|tau|/t2)`.
///
/// The value at zero delay is `1 - amp_anti + amp_bunch`, so a fitted
/// antibunching amplitude below one captures residual coincidences from
/// background and timing jitter.
pub fn g2_fit_model(params: &G2FitParams, tau_ns: f64) -> Result<f64> {
    params.validate()?;
    ensure_finite("tau_ns", tau_ns)?;
    let tau = tau_ns.abs();
    Ok(1.0 - params.amp_anti * (-tau / params.t1_ns).exp()
        + params.amp_bunch * (-tau / params.t2_ns).exp())
}
