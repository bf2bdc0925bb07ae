//! Spin-1 ground-state Hamiltonian and ODMR spectra.
//!
//! `H = D Sz^2 + E (Sx^2 - Sy^2) + gamma (B . S)` in the basis
//! (|+1>, |0>, |-1>), with D and E in MHz, gamma in MHz/Gauss, and B in
//! Gauss, so eigenvalues come out in MHz. The matrix is Hermitian by
//! construction.
//!
//! Transition frequencies are labeled physically rather than by sort
//! order: the level with the largest |<0|psi>|^2 anchors the ladder and
//! the other two are assigned plus-like or minus-like by their |+1>
//! overlap. When a transverse field (or zero field) makes that call
//! ambiguous, the result carries a `degenerate_labeling` flag and falls
//! back to frequency order.

use nalgebra::{Complex, Matrix3, Vector3};

use crate::{ensure_finite, Error, Result};

/// Zero-field splitting (MHz) of the nanobeam-integrated basal divacancy.
pub const NANOBEAM_HH_D_MHZ: f64 = 1328.0;
/// Zero-field splitting (MHz) of the same defect family in bulk material.
pub const BULK_HH_D_MHZ: f64 = 1336.0;
/// Electron gyromagnetic ratio in MHz per Gauss.
pub const GYROMAGNETIC_MHZ_PER_G: f64 = 2.8;

/// Spin-1 system parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinSystem {
    /// Axial zero-field splitting D, MHz.
    pub d_mhz: f64,
    /// Transverse zero-field splitting E, MHz.
    pub e_mhz: f64,
    /// Gyromagnetic ratio, MHz/Gauss.
    pub gamma_mhz_per_g: f64,
    /// Static field (Bx, By, Bz), Gauss, with z along the defect axis.
    pub b_gauss: [f64; 3],
}

impl SpinSystem {
    /// Defect integrated in the photonic-crystal nanobeam, zero applied
    /// field.
    pub fn nanobeam_hh() -> Self {
        Self {
            d_mhz: NANOBEAM_HH_D_MHZ,
            e_mhz: 0.0,
            gamma_mhz_per_g: GYROMAGNETIC_MHZ_PER_G,
            b_gauss: [0.0; 3],
        }
    }

    /// Same defect family in bulk material, zero applied field.
    pub fn bulk_hh() -> Self {
        Self {
            d_mhz: BULK_HH_D_MHZ,
            e_mhz: 0.0,
            gamma_mhz_per_g: GYROMAGNETIC_MHZ_PER_G,
            b_gauss: [0.0; 3],
        }
    }

    pub fn with_field(self, b_gauss: [f64; 3]) -> Self {
        Self { b_gauss, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("d_mhz", self.d_mhz)?;
        ensure_finite("e_mhz", self.e_mhz)?;
        ensure_finite("gamma_mhz_per_g", self.gamma_mhz_per_g)?;
        if self.gamma_mhz_per_g <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gamma_mhz_per_g must be positive, got {}",
                self.gamma_mhz_per_g
            )));
        }
        for (axis, value) in ["bx", "by", "bz"].iter().zip(self.b_gauss) {
            ensure_finite(axis, value)?;
        }
        Ok(())
    }

    /// Soft sanity checks that do not block evaluation.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.e_mhz.abs() > self.d_mhz.abs() / 3.0 {
            out.push(format!(
                "|E| = {} MHz exceeds |D|/3 = {} MHz; by convention E is the \
                 smaller zero-field parameter",
                self.e_mhz.abs(),
                self.d_mhz.abs() / 3.0
            ));
        }
        out
    }
}

type C64 = Complex<f64>;

/// The Hamiltonian matrix in MHz, basis (|+1>, |0>, |-1>).
pub fn hamiltonian(system: &SpinSystem) -> Result<Matrix3<C64>> {
    system.validate()?;
    let d = system.d_mhz;
    let e = system.e_mhz;
    let [bx, by, bz] = system.b_gauss;
    let g = system.gamma_mhz_per_g;
    let zz = g * bz;
    // gamma (Bx Sx + By Sy) couples neighboring m levels through
    // (Bx -/+ i By)/sqrt(2).
    let t = C64::new(g * bx, -g * by) / C64::from(std::f64::consts::SQRT_2);
    let tc = t.conj();
    #[rustfmt::skip]
    let h = Matrix3::new(
        C64::from(d + zz), t,                 C64::from(e),
        tc,                C64::from(0.0),    t,
        C64::from(e),      tc,                C64::from(d - zz),
    );
    Ok(h)
}

/// Eigenvalues (MHz) and eigenvectors of the Hamiltonian, as parallel
/// arrays: `values[k]` belongs to the columns `vectors.column(k)`.
///
/// A diagonal Hamiltonian (no transverse field, E = 0) short-circuits to
/// the exact diagonal entries and basis eigenvectors, so Zeeman ladders
/// along z and zero-field degeneracies carry no iterative-solver noise.
pub fn eigensystem(system: &SpinSystem) -> Result<(Vector3<f64>, Matrix3<C64>)> {
    let h = hamiltonian(system)?;
    let off_diagonal_free = (0..3).all(|i| {
        (0..3).all(|j| i == j || h[(i, j)] == C64::from(0.0))
    });
    if off_diagonal_free {
        let values = Vector3::new(h[(0, 0)].re, h[(1, 1)].re, h[(2, 2)].re);
        return Ok((values, Matrix3::identity()));
    }
    let eigen = h.symmetric_eigen();
    Ok((eigen.eigenvalues, eigen.eigenvectors))
}

/// The two spin transition frequencies out of the zero-like level, MHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transitions {
    /// Frequency of zero-like -> minus-like.
    pub to_minus_mhz: f64,
    /// Frequency of zero-like -> plus-like.
    pub to_plus_mhz: f64,
    /// Energies (MHz) of the minus-like, zero-like, and plus-like levels.
    pub levels_mhz: [f64; 3],
    /// True when the outer levels are degenerate in energy or their
    /// plus/minus character is ambiguous (for example at zero field, or
    /// under a purely transverse field); the labels then carry no physical
    /// distinction and fall back to frequency order.
    pub degenerate_labeling: bool,
}

/// Overlap difference below which two levels are considered
/// indistinguishable in character.
const LABEL_TOL: f64 = 1e-9;

pub fn transition_frequencies(system: &SpinSystem) -> Result<Transitions> {
    let (values, vectors) = eigensystem(system)?;
    // Overlap of eigenvector k with basis state row: |vectors[(row, k)]|^2.
    let overlap = |row: usize, k: usize| vectors[(row, k)].norm_sqr();

    let mut by_zero: Vec<usize> = (0..3).collect();
    by_zero.sort_by(|&a, &b| overlap(1, b).total_cmp(&overlap(1, a)));
    let zero_like = by_zero[0];
    let mut degenerate = overlap(1, by_zero[0]) - overlap(1, by_zero[1]) < LABEL_TOL;

    let (a, b) = (by_zero[1], by_zero[2]);
    if (values[a] - values[b]).abs() < LABEL_TOL {
        degenerate = true;
    }
    let (plus_ovl_a, plus_ovl_b) = (overlap(0, a), overlap(0, b));
    let (plus_like, minus_like) = if (plus_ovl_a - plus_ovl_b).abs() < LABEL_TOL {
        degenerate = true;
        // Frequency order: lower level gets the minus label.
        if values[a] <= values[b] {
            (b, a)
        } else {
            (a, b)
        }
    } else if plus_ovl_a > plus_ovl_b {
        (a, b)
    } else {
        (b, a)
    };

    Ok(Transitions {
        to_minus_mhz: values[minus_like] - values[zero_like],
        to_plus_mhz: values[plus_like] - values[zero_like],
        levels_mhz: [values[minus_like], values[zero_like], values[plus_like]],
        degenerate_labeling: degenerate,
    })
}

/// A simulated ODMR trace: spin-resonance contrast versus drive frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct OdmrSpectrum {
    /// Drive frequency grid, MHz.
    pub frequencies_mhz: Vec<f64>,
    /// Relative PL contrast at each grid point; negative for a dip.
    pub contrast: Vec<f64>,
    /// Transition centers the trace was built from, MHz.
    pub peak_centers_mhz: Vec<f64>,
}

/// Lorentzian resonance lines at the system's transition frequencies.
///
/// Each line is peak-normalized, so an isolated resonance reaches exactly
/// `contrast_amplitude` at its center; a negative amplitude gives the
/// usual PL dip. The grid must be nondecreasing.
pub fn odmr_spectrum(
    system: &SpinSystem,
    grid_mhz: &[f64],
    linewidth_fwhm_mhz: f64,
    contrast_amplitude: f64,
) -> Result<OdmrSpectrum> {
    ensure_finite("linewidth_fwhm_mhz", linewidth_fwhm_mhz)?;
    if linewidth_fwhm_mhz <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "linewidth_fwhm_mhz must be positive, got {linewidth_fwhm_mhz}"
        )));
    }
    ensure_finite("contrast_amplitude", contrast_amplitude)?;
    if contrast_amplitude == 0.0 {
        return Err(Error::InvalidParameter(
            "contrast_amplitude must be nonzero".into(),
        ));
    }
    if grid_mhz.is_empty() {
        return Err(Error::InvalidParameter("frequency grid is empty".into()));
    }
    for (i, w) in grid_mhz.windows(2).enumerate() {
        ensure_finite("grid_mhz", w[1])?;
        if w[1] < w[0] {
            return Err(Error::InvalidParameter(format!(
                "frequency grid must be nondecreasing, but grid[{}] = {} < grid[{}] = {}",
                i + 1,
                w[1],
                i,
                w[0]
            )));
        }
    }
    ensure_finite("grid_mhz", grid_mhz[0])?;

    let transitions = transition_frequencies(system)?;
    let centers = vec![transitions.to_minus_mhz, transitions.to_plus_mhz];
    let half_width = linewidth_fwhm_mhz / 2.0;
    let contrast = grid_mhz
        .iter()
        .map(|&f| {
            centers
                .iter()
                .map(|&c| {
                    let detuning = f - c;
                    contrast_amplitude * half_width * half_width
                        / (detuning * detuning + half_width * half_width)
                })
                .sum()
        })
        .collect();
    Ok(OdmrSpectrum {
        frequencies_mhz: grid_mhz.to_vec(),
        contrast,
        peak_centers_mhz: centers,
    })
}

/// Transition frequencies along a sweep of the axial field component,
/// holding the transverse components fixed.
pub fn zeeman_fan(system: &SpinSystem, bz_gauss: &[f64]) -> Result<Vec<Transitions>> {
    bz_gauss
        .iter()
        .map(|&bz| {
            transition_frequencies(
                &system.with_field([system.b_gauss[0], system.b_gauss[1], bz]),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hamiltonian_is_hermitian() {
        let system = SpinSystem {
            d_mhz: 1328.0,
            e_mhz: 11.0,
            gamma_mhz_per_g: 2.8,
            b_gauss: [3.0, -7.0, 1.5],
        };
        let h = hamiltonian(&system).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(h[(i, j)], h[(j, i)].conj(), "({i}, {j})");
            }
            assert_eq!(h[(i, i)].im, 0.0);
        }
    }

    #[test]
    fn axial_field_ladder_is_exact() {
        let system = SpinSystem::nanobeam_hh().with_field([0.0, 0.0, 2.0]);
        let t = transition_frequencies(&system).unwrap();
        assert_eq!(t.to_plus_mhz, 1328.0 + 2.8 * 2.0);
        assert_eq!(t.to_minus_mhz, 1328.0 - 2.8 * 2.0);
        assert!(!t.degenerate_labeling);
        // Labels follow character, not energy order: flipping the field
        // swaps which level lies higher but not which is plus-like.
        let flipped = transition_frequencies(&system.with_field([0.0, 0.0, -2.0])).unwrap();
        assert_eq!(flipped.to_plus_mhz, 1328.0 - 2.8 * 2.0);
        assert_eq!(flipped.to_minus_mhz, 1328.0 + 2.8 * 2.0);
    }

    #[test]
    fn zero_field_is_exactly_degenerate() {
        let t = transition_frequencies(&SpinSystem::nanobeam_hh()).unwrap();
        assert_eq!(t.to_plus_mhz, 1328.0);
        assert_eq!(t.to_minus_mhz, 1328.0);
        assert!(t.degenerate_labeling);
        let bulk = transition_frequencies(&SpinSystem::bulk_hh()).unwrap();
        assert_eq!(bulk.to_plus_mhz, 1336.0);
    }

    #[test]
    fn transverse_splitting_at_zero_field_is_two_e() {
        let system = SpinSystem {
            e_mhz: 5.0,
            ..SpinSystem::nanobeam_hh()
        };
        let t = transition_frequencies(&system).unwrap();
        // E mixes |+1> and |-1> into (|+1> +/- |-1>)/sqrt(2) at D +/- E.
        assert_relative_eq!(t.to_plus_mhz - t.to_minus_mhz, 10.0, epsilon = 1e-9);
        assert_relative_eq!(
            0.5 * (t.to_plus_mhz + t.to_minus_mhz),
            1328.0,
            max_relative = 1e-12
        );
        assert!(t.degenerate_labeling);
    }

    #[test]
    fn eigenvalue_sum_equals_trace() {
        let system = SpinSystem {
            d_mhz: 1328.0,
            e_mhz: 3.0,
            gamma_mhz_per_g: 2.8,
            b_gauss: [12.0, -5.0, 218.0],
        };
        let (values, _) = eigensystem(&system).unwrap();
        // Trace is 2D regardless of field: the Zeeman term is traceless.
        assert_relative_eq!(values.iter().sum::<f64>(), 2.0 * 1328.0, max_relative = 1e-10);
    }

    #[test]
    fn eigenvectors_are_orthonormal() {
        let system = SpinSystem {
            d_mhz: 1328.0,
            e_mhz: 3.0,
            gamma_mhz_per_g: 2.8,
            b_gauss: [12.0, -5.0, 30.0],
        };
        let (_, vectors) = eigensystem(&system).unwrap();
        let gram = vectors.adjoint() * vectors;
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(gram[(i, j)].re, expected, epsilon = 1e-10);
                assert_relative_eq!(gram[(i, j)].im, 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn in_plane_field_direction_does_not_matter_without_e() {
        // With E = 0 the Hamiltonian is symmetric under rotations about z,
        // so only |B_perp| can matter.
        let base = SpinSystem::nanobeam_hh();
        let (a, _) = eigensystem(&base.with_field([5.0, 0.0, 7.0])).unwrap();
        let (b, _) = eigensystem(&base.with_field([3.0, 4.0, 7.0])).unwrap();
        let mut a: Vec<f64> = a.iter().copied().collect();
        let mut b: Vec<f64> = b.iter().copied().collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(x, y, max_relative = 1e-10);
        }
    }

    #[test]
    fn field_reversal_leaves_the_spectrum_unchanged() {
        let system = SpinSystem {
            d_mhz: 1328.0,
            e_mhz: 2.0,
            gamma_mhz_per_g: 2.8,
            b_gauss: [6.0, 1.0, -9.0],
        };
        let reversed = system.with_field([-6.0, -1.0, 9.0]);
        let (mut a, _) = eigensystem(&system).unwrap();
        let (mut b, _) = eigensystem(&reversed).unwrap();
        let (a, b) = (a.as_mut_slice(), b.as_mut_slice());
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(b.iter()) {
            assert_relative_eq!(x, y, max_relative = 1e-10);
        }
    }

    #[test]
    fn odmr_spectrum_has_dips_at_transitions() {
        let system = SpinSystem::nanobeam_hh().with_field([0.0, 0.0, 10.0]);
        let t = transition_frequencies(&system).unwrap();
        let grid: Vec<f64> = (0..=600).map(|k| 1290.0 + 0.125 * k as f64).collect();
        let spectrum = odmr_spectrum(&system, &grid, 1.5, -0.012).unwrap();
        assert_eq!(spectrum.peak_centers_mhz, vec![t.to_minus_mhz, t.to_plus_mhz]);
        // Contrast near a center approaches the full amplitude.
        let at = |f0: f64| {
            let k = grid
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| (*a - f0).abs().total_cmp(&(*b - f0).abs()))
                .unwrap()
                .0;
            spectrum.contrast[k]
        };
        assert!(at(t.to_minus_mhz) < -0.011);
        assert!(at(t.to_plus_mhz) < -0.011);
        // Far off resonance the contrast vanishes.
        assert!(spectrum.contrast[0].abs() < 2e-3);
    }

    #[test]
    fn odmr_rejects_bad_inputs() {
        let system = SpinSystem::nanobeam_hh();
        assert!(odmr_spectrum(&system, &[1.0, 0.5], 1.0, -0.01).is_err());
        assert!(odmr_spectrum(&system, &[], 1.0, -0.01).is_err());
        assert!(odmr_spectrum(&system, &[1.0, 2.0], 0.0, -0.01).is_err());
        assert!(odmr_spectrum(&system, &[1.0, 2.0], 1.0, 0.0).is_err());
    }

    #[test]
    fn zeeman_fan_slopes_match_gamma() {
        let system = SpinSystem::nanobeam_hh();
        let bz: Vec<f64> = (-5..=5).map(|k| 0.289 * k as f64).collect();
        let fan = zeeman_fan(&system, &bz).unwrap();
        for (b, t) in bz.iter().zip(&fan).filter(|(b, _)| **b != 0.0) {
            let plus_slope = (t.to_plus_mhz - 1328.0) / b;
            let minus_slope = (t.to_minus_mhz - 1328.0) / b;
            assert_relative_eq!(plus_slope, 2.8, max_relative = 1e-9);
            assert_relative_eq!(minus_slope, -2.8, max_relative = 1e-9);
        }
    }

    #[test]
    fn warns_on_large_e() {
        let system = SpinSystem {
            e_mhz: 500.0,
            ..SpinSystem::nanobeam_hh()
        };
        assert_eq!(system.warnings().len(), 1);
        assert!(SpinSystem::nanobeam_hh().warnings().is_empty());
    }

    #[test]
    fn rejects_nonpositive_gamma_and_nonfinite_field() {
        let mut bad = SpinSystem::nanobeam_hh();
        bad.gamma_mhz_per_g = 0.0;
        assert!(hamiltonian(&bad).is_err());
        let mut nan_field = SpinSystem::nanobeam_hh();
        nan_field.b_gauss = [f64::NAN, 0.0, 0.0];
        assert!(hamiltonian(&nan_field).is_err());
    }
}
