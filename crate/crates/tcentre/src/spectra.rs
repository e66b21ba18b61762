//! Transition frequencies, effective hyperfine quantities and synthetic
//! ODMR-style spectra.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::constants::{mhz_to_rad_s, rad_s_to_mhz, PhysicalConstants};
use crate::error::{Error, Result};
use crate::field::MagneticField;
use crate::linalg::C64;
use crate::spin::{self, ElectronBranch};

/// One ground-state transition: frequency and the ascending-order indices
/// of the two levels it connects, optionally tagged with an orientation
/// label.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transition {
    pub freq_mhz: f64,
    pub lower: usize,
    pub upper: usize,
    pub orientation: Option<String>,
}

/// Transition frequencies sorted ascending; all non-negative.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TransitionList {
    pub lines: Vec<Transition>,
}

impl TransitionList {
    pub fn frequencies_mhz(&self) -> Vec<f64> {
        self.lines.iter().map(|l| l.freq_mhz).collect()
    }

    pub fn sort(&mut self) {
        self.lines
            .sort_by(|a, b| a.freq_mhz.total_cmp(&b.freq_mhz));
    }

    /// Merge several lists (e.g. one per orientation) into one sorted list.
    pub fn merged(lists: impl IntoIterator<Item = TransitionList>) -> TransitionList {
        let mut all = TransitionList::default();
        for l in lists {
            all.lines.extend(l.lines);
        }
        all.sort();
        all
    }

    /// Split at a frequency threshold into (low, high) bands - by default
    /// the NMR-like and EPR-like groups of lines.
    pub fn split_bands(&self, threshold_mhz: f64) -> (TransitionList, TransitionList) {
        let (low, high): (Vec<_>, Vec<_>) = self
            .lines
            .iter()
            .cloned()
            .partition(|l| l.freq_mhz < threshold_mhz);
        (TransitionList { lines: low }, TransitionList { lines: high })
    }

    /// CSV with columns freq_MHz,lower,upper,orientation.
    pub fn to_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["freq_MHz", "lower", "upper", "orientation"])?;
        for l in &self.lines {
            wtr.write_record([
                format!("{:.9}", l.freq_mhz),
                l.lower.to_string(),
                l.upper.to_string(),
                l.orientation.clone().unwrap_or_default(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Default NMR/EPR presentation split.
pub const DEFAULT_BAND_THRESHOLD_MHZ: f64 = 100.0;

/// All six pairwise eigenvalue differences of the ground Hamiltonian,
/// labelled by ascending level indices.
pub fn transition_frequencies(
    field: &MagneticField,
    a_crystal_mhz: &Matrix3<f64>,
    consts: &PhysicalConstants,
) -> Result<TransitionList> {
    let h = spin::build_ground_hamiltonian(field, a_crystal_mhz, consts)?;
    let eig = spin::eigensystem(&h)?;
    let mut lines = Vec::with_capacity(6);
    for lower in 0..4 {
        for upper in (lower + 1)..4 {
            lines.push(Transition {
                freq_mhz: rad_s_to_mhz(eig.values[upper] - eig.values[lower]),
                lower,
                upper,
                orientation: None,
            });
        }
    }
    let mut list = TransitionList { lines };
    list.sort();
    Ok(list)
}

fn secular_guard(
    field: &MagneticField,
    a_crystal_mhz: &Matrix3<f64>,
    consts: &PhysicalConstants,
) -> Result<()> {
    let max_a_rad = mhz_to_rad_s(nalgebra::SymmetricEigen::new(*a_crystal_mhz)
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, w| m.max(w.abs())));
    let zeeman = consts.gamma_e().abs() * field.magnitude_t();
    if zeeman <= 10.0 * max_a_rad {
        return Err(Error::SecularRegime {
            zeeman_rad_s: zeeman,
            limit_rad_s: 10.0 * max_a_rad,
        });
    }
    Ok(())
}

/// Nuclear splittings of the two electron branches, rad/s. Branches are
/// identified by the dominant electron spin character of the eigenvectors
/// rather than by energy ordering, which swaps with field direction and the
/// sign of the effective coupling.
pub fn branch_splittings(
    field: &MagneticField,
    a_crystal_mhz: &Matrix3<f64>,
    consts: &PhysicalConstants,
) -> Result<(f64, f64)> {
    secular_guard(field, a_crystal_mhz, consts)?;
    let dir = field.direction()?;
    let h = spin::build_ground_hamiltonian(field, a_crystal_mhz, consts)?;
    let eig = spin::eigensystem(&h)?;

    let up = ElectronBranch::Up.spinor(&dir);
    let proj = {
        // |up><up| (x) 1 on the product space.
        let outer = DMatrix::from_fn(2, 2, |i, j| up[i] * up[j].conj());
        crate::linalg::kron(&outer, &DMatrix::<C64>::identity(2, 2))
    };

    let mut up_levels = Vec::new();
    let mut down_levels = Vec::new();
    for k in 0..4 {
        let v = eig.vectors.column(k).into_owned();
        let character = (v.adjoint() * &proj * &v)[(0, 0)].re;
        if character > 0.5 {
            up_levels.push(eig.values[k]);
        } else {
            down_levels.push(eig.values[k]);
        }
    }
    if up_levels.len() != 2 || down_levels.len() != 2 {
        return Err(Error::AmbiguousBranch(format!(
            "{} up-branch and {} down-branch states",
            up_levels.len(),
            down_levels.len()
        )));
    }
    Ok((
        (up_levels[1] - up_levels[0]).abs(),
        (down_levels[1] - down_levels[0]).abs(),
    ))
}

/// Effective hyperfine quantities in the secular (high-field) regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveCoupling {
    /// Secular effective coupling b^T A b, MHz.
    pub a_eff_mhz: f64,
    /// Splitting difference between electron branches,
    /// delta_e = Delta_down - Delta_up, MHz, from full diagonalization.
    pub delta_e_mhz: f64,
    /// Nuclear splitting in the spin-up electron branch, MHz.
    pub splitting_up_mhz: f64,
    /// Nuclear splitting in the spin-down electron branch, MHz.
    pub splitting_down_mhz: f64,
}

/// Compute the effective coupling and the electron-state-dependent nuclear
/// splitting difference delta_e. Errors below the secular regime guard
/// |gamma_e B| > 10 max|A|.
pub fn effective_hyperfine(
    field: &MagneticField,
    a_crystal_mhz: &Matrix3<f64>,
    consts: &PhysicalConstants,
) -> Result<EffectiveCoupling> {
    let (up, down) = branch_splittings(field, a_crystal_mhz, consts)?;
    let dir = field.direction()?;
    let a_eff = (dir.transpose() * a_crystal_mhz * dir)[(0, 0)];
    Ok(EffectiveCoupling {
        a_eff_mhz: a_eff,
        delta_e_mhz: rad_s_to_mhz(down - up),
        splitting_up_mhz: rad_s_to_mhz(up),
        splitting_down_mhz: rad_s_to_mhz(down),
    })
}

/// Splitting difference between a ground electron branch and the excited
/// state (bare Larmor): delta_h = Delta_n(branch) - gamma_n |B| / 2 pi, MHz.
/// Positive when the ground splitting exceeds the bare Larmor splitting.
/// This is the optically-induced dephasing rate of the nuclear memory.
pub fn delta_h(
    field: &MagneticField,
    a_crystal_mhz: &Matrix3<f64>,
    branch: ElectronBranch,
    consts: &PhysicalConstants,
) -> Result<f64> {
    let (up, down) = branch_splittings(field, a_crystal_mhz, consts)?;
    let ground = match branch {
        ElectronBranch::Up => up,
        ElectronBranch::Down => down,
    };
    Ok(rad_s_to_mhz(ground - consts.gamma_n() * field.magnitude_t()))
}

/// Line shape for synthetic spectra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LineShape {
    Lorentzian,
    Gaussian,
}

/// A synthetic spectrum on a uniform frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumProfile {
    pub freq_mhz: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub linewidth_mhz: f64,
    pub shape: LineShape,
}

impl SpectrumProfile {
    pub fn to_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["freq_MHz", "amplitude"])?;
        for (f, a) in self.freq_mhz.iter().zip(&self.amplitude) {
            wtr.write_record([format!("{f:.9}"), format!("{a:.9e}")])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Sum of unit-area line shapes at the line positions, with optional
/// per-line weights, plus optional Gaussian noise of the stated RMS drawn
/// from a fixed-seed generator. `linewidth_mhz` is the FWHM.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_spectrum(
    lines: &TransitionList,
    f_min_mhz: f64,
    f_max_mhz: f64,
    points: usize,
    linewidth_mhz: f64,
    shape: LineShape,
    weights: Option<&[f64]>,
    noise_rms: f64,
    seed: u64,
) -> Result<SpectrumProfile> {
    if linewidth_mhz <= 0.0 {
        return Err(Error::Parse("linewidth must be positive".into()));
    }
    if points < 2 || f_max_mhz <= f_min_mhz {
        return Err(Error::Parse("spectrum grid must have >= 2 ascending points".into()));
    }
    if let Some(w) = weights {
        if w.len() != lines.lines.len() {
            return Err(Error::Parse(format!(
                "{} weights for {} lines",
                w.len(),
                lines.lines.len()
            )));
        }
    }
    let step = (f_max_mhz - f_min_mhz) / (points - 1) as f64;
    let freq: Vec<f64> = (0..points).map(|k| f_min_mhz + step * k as f64).collect();
    let mut amplitude = vec![0.0; points];
    for (idx, line) in lines.lines.iter().enumerate() {
        let w = weights.map_or(1.0, |ws| ws[idx]);
        match shape {
            LineShape::Lorentzian => {
                let hwhm = linewidth_mhz / 2.0;
                for (a, f) in amplitude.iter_mut().zip(&freq) {
                    let d = f - line.freq_mhz;
                    *a += w * hwhm / (std::f64::consts::PI * (d * d + hwhm * hwhm));
                }
            }
            LineShape::Gaussian => {
                let sigma = linewidth_mhz / (2.0 * (2.0 * (2.0f64).ln()).sqrt());
                let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
                for (a, f) in amplitude.iter_mut().zip(&freq) {
                    let d = (f - line.freq_mhz) / sigma;
                    *a += w * norm * (-0.5 * d * d).exp();
                }
            }
        }
    }
    if noise_rms > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for a in amplitude.iter_mut() {
            // Box-Muller from two uniforms keeps the stream stable across
            // rand_distr versions.
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            let g = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
            *a += noise_rms * g;
        }
    }
    Ok(SpectrumProfile {
        freq_mhz: freq,
        amplitude,
        linewidth_mhz,
        shape,
    })
}

/// A located spectral peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub freq_mhz: f64,
    pub amplitude: f64,
}

/// Strict local maxima above `floor`, refined by three-point parabolic
/// interpolation. Lines closer than about half a linewidth merge into a
/// single reported peak; callers detect unresolved structure by comparing
/// counts.
pub fn find_peaks(profile: &SpectrumProfile, floor: f64) -> Vec<Peak> {
    let a = &profile.amplitude;
    let f = &profile.freq_mhz;
    let mut peaks = Vec::new();
    for i in 1..a.len().saturating_sub(1) {
        if a[i] > floor && a[i] > a[i - 1] && a[i] >= a[i + 1] {
            let denom = a[i - 1] - 2.0 * a[i] + a[i + 1];
            let shift = if denom.abs() > 1e-300 {
                0.5 * (a[i - 1] - a[i + 1]) / denom
            } else {
                0.0
            };
            let step = f[1] - f[0];
            peaks.push(Peak {
                freq_mhz: f[i] + shift.clamp(-0.5, 0.5) * step,
                amplitude: a[i] - 0.25 * (a[i - 1] - a[i + 1]) * shift,
            });
        }
    }
    peaks
}

/// Transitions for every orientation class of `tensor`, merged and tagged.
pub fn transitions_for_orientations(
    field: &MagneticField,
    tensor: &crate::tensor::HyperfineTensor,
    consts: &PhysicalConstants,
) -> Result<TransitionList> {
    let mut lists = Vec::new();
    for id in crate::orientations::orientation_set() {
        let m = crate::orientations::tensor_for_orientation(tensor, &id);
        let mut list = transition_frequencies(field, &m, consts)?;
        for line in &mut list.lines {
            line.orientation = Some(id.label.clone());
        }
        lists.push(list);
    }
    Ok(TransitionList::merged(lists))
}

/// Direction cosines of the three crystal symmetry axes used in the
/// measurements.
pub fn named_axis(name: &str) -> Option<Vector3<f64>> {
    match name {
        "001" => Some(Vector3::new(0.0, 0.0, 1.0)),
        "110" => Some(Vector3::new(1.0, 1.0, 0.0).normalize()),
        "111" => Some(Vector3::new(1.0, 1.0, 1.0).normalize()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{HyperfineTensor, MEASURED_TENSOR};
    use approx::assert_abs_diff_eq;

    fn consts() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn zero_field_top_three_transitions_and_mean() {
        let m = MEASURED_TENSOR.crystal_matrix_mhz();
        let list = transition_frequencies(&MagneticField::zero(), &m, &consts()).unwrap();
        let f = list.frequencies_mhz();
        assert_eq!(f.len(), 6);
        let top3 = &f[3..];
        assert_abs_diff_eq!(top3[0], 3.482, epsilon = 1e-9);
        assert_abs_diff_eq!(top3[1], 3.713, epsilon = 1e-9);
        assert_abs_diff_eq!(top3[2], 4.268, epsilon = 1e-9);
        let mean = top3.iter().sum::<f64>() / 3.0;
        assert_abs_diff_eq!(mean, 3.821, epsilon = 1e-9);
    }

    #[test]
    fn zero_field_intra_triplet_splittings() {
        let m = MEASURED_TENSOR.crystal_matrix_mhz();
        let list = transition_frequencies(&MagneticField::zero(), &m, &consts()).unwrap();
        let f = list.frequencies_mhz();
        let small = &f[..3];
        assert_abs_diff_eq!(small[0], 0.231, epsilon = 1e-9);
        assert_abs_diff_eq!(small[1], 0.555, epsilon = 1e-9);
        assert_abs_diff_eq!(small[2], 0.786, epsilon = 1e-9);
        for s in small {
            assert!(*s >= 0.2 && *s <= 0.8, "splitting {s} outside 200-800 kHz");
        }
    }

    #[test]
    fn isotropic_zero_field_single_line() {
        let m = HyperfineTensor::isotropic(1.7).crystal_matrix_mhz();
        let list = transition_frequencies(&MagneticField::zero(), &m, &consts()).unwrap();
        let f = list.frequencies_mhz();
        // Three degenerate lines at a, three at zero.
        for k in 0..3 {
            assert_abs_diff_eq!(f[k], 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(f[k + 3], 1.7, epsilon = 1e-9);
        }
    }

    #[test]
    fn a_eff_along_principal_axes() {
        let m = MEASURED_TENSOR.crystal_matrix_mhz();
        let [x_axis, _, z_axis] = MEASURED_TENSOR.axes();
        let c = consts();

        let b = MagneticField::along(z_axis, 1.0).unwrap();
        let eff = effective_hyperfine(&b, &m, &c).unwrap();
        assert_abs_diff_eq!(eff.a_eff_mhz, -2.927, epsilon = 1e-9);
        assert_abs_diff_eq!(eff.delta_e_mhz, -2.927, epsilon = 1e-3);

        let b = MagneticField::along(x_axis, 1.0).unwrap();
        let eff = effective_hyperfine(&b, &m, &c).unwrap();
        assert_abs_diff_eq!(eff.a_eff_mhz, 4.037, epsilon = 1e-9);
        assert_abs_diff_eq!(eff.delta_e_mhz, 4.037, epsilon = 1e-3);
    }

    #[test]
    fn secular_guard_rejects_low_field() {
        let m = MEASURED_TENSOR.crystal_matrix_mhz();
        let b = MagneticField::along(Vector3::z(), 1e-3).unwrap();
        assert!(matches!(
            effective_hyperfine(&b, &m, &consts()),
            Err(Error::SecularRegime { .. })
        ));
    }

    #[test]
    fn delta_h_vanishes_without_coupling() {
        let m = HyperfineTensor::zero().crystal_matrix_mhz();
        for b_t in [0.1, 1.0, 3.0] {
            let b = MagneticField::along(Vector3::new(0.2, 0.9, 0.4), b_t).unwrap();
            let d = delta_h(&b, &m, ElectronBranch::Up, &consts()).unwrap();
            assert_abs_diff_eq!(d, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn delta_h_along_principal_z_is_half_a_z_per_branch() {
        let m = MEASURED_TENSOR.crystal_matrix_mhz();
        let [_, _, z_axis] = MEASURED_TENSOR.axes();
        let b = MagneticField::along(z_axis, 1.0).unwrap();
        let c = consts();
        // Secular limit: Delta(up/down) = |gamma_n B -/+ A_Z/2|, so
        // delta_h = -/+ A_Z / 2 per branch (A_Z < 0).
        let up = delta_h(&b, &m, ElectronBranch::Up, &c).unwrap();
        let down = delta_h(&b, &m, ElectronBranch::Down, &c).unwrap();
        assert_abs_diff_eq!(up, 2.927 / 2.0, epsilon = 1e-3);
        assert_abs_diff_eq!(down, -2.927 / 2.0, epsilon = 1e-3);
    }

    #[test]
    fn single_line_spectrum_peaks_at_line() {
        let lines = TransitionList {
            lines: vec![Transition {
                freq_mhz: 3.5,
                lower: 0,
                upper: 1,
                orientation: None,
            }],
        };
        let prof =
            synthesize_spectrum(&lines, 3.0, 4.0, 2001, 0.05, LineShape::Lorentzian, None, 0.0, 0)
                .unwrap();
        let peaks = find_peaks(&prof, 0.1);
        assert_eq!(peaks.len(), 1);
        assert_abs_diff_eq!(peaks[0].freq_mhz, 3.5, epsilon = 5e-4);
    }

    #[test]
    fn zero_field_lines_resolved_by_peak_finder() {
        let m = MEASURED_TENSOR.crystal_matrix_mhz();
        let all = transition_frequencies(&MagneticField::zero(), &m, &consts()).unwrap();
        let top = TransitionList {
            lines: all.lines[3..].to_vec(),
        };
        let prof =
            synthesize_spectrum(&top, 3.2, 4.5, 6001, 0.05, LineShape::Gaussian, None, 0.0, 0)
                .unwrap();
        let peaks = find_peaks(&prof, 1.0);
        assert_eq!(peaks.len(), 3);
        for (p, want) in peaks.iter().zip([3.482, 3.713, 4.268]) {
            assert_abs_diff_eq!(p.freq_mhz, want, epsilon = 5e-3);
        }
    }

    #[test]
    fn unresolved_lines_merge() {
        let lines = TransitionList {
            lines: vec![
                Transition {
                    freq_mhz: 3.500,
                    lower: 0,
                    upper: 1,
                    orientation: None,
                },
                Transition {
                    freq_mhz: 3.515,
                    lower: 0,
                    upper: 2,
                    orientation: None,
                },
            ],
        };
        let prof =
            synthesize_spectrum(&lines, 3.0, 4.0, 4001, 0.05, LineShape::Lorentzian, None, 0.0, 0)
                .unwrap();
        let peaks = find_peaks(&prof, 0.5);
        assert_eq!(peaks.len(), 1, "lines closer than half a linewidth must merge");
    }

    #[test]
    fn line_area_is_proportional_to_weight() {
        let lines = TransitionList {
            lines: vec![Transition {
                freq_mhz: 2.0,
                lower: 0,
                upper: 1,
                orientation: None,
            }],
        };
        for shape in [LineShape::Lorentzian, LineShape::Gaussian] {
            let prof = synthesize_spectrum(
                &lines,
                -8.0,
                12.0,
                200_001,
                0.02,
                shape,
                Some(&[2.5]),
                0.0,
                0,
            )
            .unwrap();
            let step = prof.freq_mhz[1] - prof.freq_mhz[0];
            let area: f64 = prof.amplitude.iter().sum::<f64>() * step;
            assert!((area - 2.5).abs() < 0.01 * 2.5, "area {area}");
        }
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let lines = TransitionList { lines: vec![] };
        let a = synthesize_spectrum(&lines, 0.0, 1.0, 101, 0.01, LineShape::Gaussian, None, 0.3, 7)
            .unwrap();
        let b = synthesize_spectrum(&lines, 0.0, 1.0, 101, 0.01, LineShape::Gaussian, None, 0.3, 7)
            .unwrap();
        assert_eq!(a.amplitude, b.amplitude);
        let c = synthesize_spectrum(&lines, 0.0, 1.0, 101, 0.01, LineShape::Gaussian, None, 0.3, 8)
            .unwrap();
        assert_ne!(a.amplitude, c.amplitude);
    }
}
