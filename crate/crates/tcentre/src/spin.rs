//! Ground (T0) and excited (TX0) spin Hamiltonians of the coupled
//! electron-hydrogen system, and the eigensystem/propagator machinery built
//! on them.
//!
//! Conventions: spin-1/2 operators S = sigma/2 with hbar folded into the
//! gyromagnetic ratios; basis order electron (x) nucleus, i.e.
//! |up Up>, |up Dn>, |dn Up>, |dn Dn>; Hamiltonian entries in angular
//! frequency (rad/s). All user-facing frequencies are linear MHz.

use nalgebra::{DMatrix, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::constants::{mhz_to_rad_s, PhysicalConstants};
use crate::error::Result;
use crate::field::MagneticField;
use crate::linalg::{self, C64};
use crate::tensor::check_symmetric;

pub use crate::linalg::HermitianEigen as Eigensystem;

/// Hermitian spin Hamiltonian: 4x4 on the electron (x) nucleus product space
/// for T0, 2x2 on the nuclear subspace for TX0. Entries in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinHamiltonian {
    matrix: DMatrix<C64>,
}

impl SpinHamiltonian {
    /// Wrap a matrix, enforcing Hermiticity to within 1e-12 |H|.
    pub fn from_matrix(matrix: DMatrix<C64>) -> Result<Self> {
        linalg::check_hermitian(&matrix)?;
        Ok(SpinHamiltonian { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Pauli matrices.
pub fn pauli() -> [DMatrix<C64>; 3] {
    let sx = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
    let sy = DMatrix::from_row_slice(
        2,
        2,
        &[c(0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), c(0.0)],
    );
    let sz = DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]);
    [sx, sy, sz]
}

/// Electron spin operators S_k (x) 1 on the 4-dim product space.
pub fn electron_spin_ops() -> [DMatrix<C64>; 3] {
    let id = DMatrix::<C64>::identity(2, 2);
    pauli().map(|s| linalg::kron(&(s.scale(0.5)), &id))
}

/// Nuclear spin operators 1 (x) I_k on the 4-dim product space.
pub fn nuclear_spin_ops() -> [DMatrix<C64>; 3] {
    let id = DMatrix::<C64>::identity(2, 2);
    pauli().map(|s| linalg::kron(&id, &(s.scale(0.5))))
}

/// Nuclear spin operators I_k on the bare 2-dim nuclear space.
pub fn nuclear_spin_ops_2d() -> [DMatrix<C64>; 3] {
    pauli().map(|s| s.scale(0.5))
}

/// Ground-state Hamiltonian
/// H = -B (gamma_e S + gamma_n I) + S A I, with the hyperfine term
/// sum_ij A_ij S_i (x) I_j. `a_crystal_mhz` is the crystal-frame coupling
/// matrix in MHz and must be symmetric.
pub fn build_ground_hamiltonian(
    field: &MagneticField,
    a_crystal_mhz: &Matrix3<f64>,
    consts: &PhysicalConstants,
) -> Result<SpinHamiltonian> {
    check_symmetric(a_crystal_mhz)?;
    let s_ops = electron_spin_ops();
    let i_ops = nuclear_spin_ops();
    let b = field.vector_t;
    let mut h = DMatrix::<C64>::zeros(4, 4);
    for k in 0..3 {
        h += s_ops[k].scale(-consts.gamma_e() * b[k]);
        h += i_ops[k].scale(-consts.gamma_n() * b[k]);
    }
    for i in 0..3 {
        for j in 0..3 {
            let w = mhz_to_rad_s(a_crystal_mhz[(i, j)]);
            if w != 0.0 {
                h += (&s_ops[i] * &i_ops[j]).scale(w);
            }
        }
    }
    SpinHamiltonian::from_matrix(h)
}

/// Excited-state (TX0) Hamiltonian restricted to the nuclear subspace:
/// -gamma_n B . I. The hole Zeeman term commutes with everything nuclear
/// once the excited-state hyperfine coupling is taken to vanish, so it
/// contributes only a global phase per hole branch and is dropped.
pub fn build_excited_nuclear_hamiltonian(
    field: &MagneticField,
    consts: &PhysicalConstants,
) -> Result<SpinHamiltonian> {
    let i_ops = nuclear_spin_ops_2d();
    let b = field.vector_t;
    let mut h = DMatrix::<C64>::zeros(2, 2);
    for k in 0..3 {
        h += i_ops[k].scale(-consts.gamma_n() * b[k]);
    }
    SpinHamiltonian::from_matrix(h)
}

/// Eigendecomposition with ascending eigenvalues and the deterministic
/// phase convention of [`linalg::eigh`].
pub fn eigensystem(h: &SpinHamiltonian) -> Result<Eigensystem> {
    linalg::eigh(&h.matrix)
}

/// Propagator U(t) = exp(-i H t) assembled from the eigensystem.
/// Unitary to within 1e-10 for any t >= 0.
pub fn propagator(h: &SpinHamiltonian, t_s: f64) -> Result<DMatrix<C64>> {
    Ok(eigensystem(h)?.propagator(t_s))
}

/// Electron spin branch along the field direction. `Up` means
/// <S . b> = +1/2; for the negative electron gyromagnetic ratio this is the
/// higher-energy Zeeman branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElectronBranch {
    Up,
    Down,
}

impl ElectronBranch {
    /// <S . b> for this branch.
    pub fn spin_projection(&self) -> f64 {
        match self {
            ElectronBranch::Up => 0.5,
            ElectronBranch::Down => -0.5,
        }
    }

    /// Spinor with sigma.n |s> = +/- |s> for the given unit direction.
    pub fn spinor(&self, dir: &Vector3<f64>) -> Vector2<C64> {
        let theta = dir.z.clamp(-1.0, 1.0).acos();
        let phi = dir.y.atan2(dir.x);
        let (ct, st) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let eip = C64::new(phi.cos(), phi.sin());
        match self {
            ElectronBranch::Up => Vector2::new(C64::new(ct, 0.0), eip * st),
            ElectronBranch::Down => Vector2::new(-eip.conj() * st, C64::new(ct, 0.0)),
        }
    }

    pub fn other(&self) -> ElectronBranch {
        match self {
            ElectronBranch::Up => ElectronBranch::Down,
            ElectronBranch::Down => ElectronBranch::Up,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ElectronBranch::Up => "up",
            ElectronBranch::Down => "down",
        }
    }
}

/// Zero-field levels of the ground Hamiltonian in closed form, MHz,
/// ascending. For principal values (A_X, A_Y, A_Z) the four levels are
/// (s1 A_X + s2 A_Y + s3 A_Z)/4 over the sign triples
/// (+,-,+), (-,+,+), (+,+,-), (-,-,-).
pub fn zero_field_levels_mhz(principal_mhz: &[f64; 3]) -> [f64; 4] {
    let [x, y, z] = *principal_mhz;
    let mut levels = [
        (x - y + z) / 4.0,
        (-x + y + z) / 4.0,
        (x + y - z) / 4.0,
        (-x - y - z) / 4.0,
    ];
    levels.sort_by(f64::total_cmp);
    levels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::rad_s_to_mhz;
    use crate::tensor::{HyperfineTensor, MEASURED_TENSOR};
    use approx::assert_abs_diff_eq;

    fn consts() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    fn eigvals_mhz(h: &SpinHamiltonian) -> Vec<f64> {
        eigensystem(h)
            .unwrap()
            .values
            .iter()
            .map(|&w| rad_s_to_mhz(w))
            .collect()
    }

    #[test]
    fn isotropic_zero_field_singlet_triplet() {
        let a = 2.5;
        let m = HyperfineTensor::isotropic(a).crystal_matrix_mhz();
        let h = build_ground_hamiltonian(&MagneticField::zero(), &m, &consts()).unwrap();
        let v = eigvals_mhz(&h);
        assert_abs_diff_eq!(v[0], -3.0 * a / 4.0, epsilon = 1e-12);
        for k in 1..4 {
            assert_abs_diff_eq!(v[k], a / 4.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn measured_tensor_zero_field_levels() {
        let m = MEASURED_TENSOR.crystal_matrix_mhz();
        let h = build_ground_hamiltonian(&MagneticField::zero(), &m, &consts()).unwrap();
        let v = eigvals_mhz(&h);
        // Closed form: (s1 A_X + s2 A_Y + s3 A_Z)/4.
        let want = zero_field_levels_mhz(&MEASURED_TENSOR.principal_mhz);
        for (got, want) in v.iter().zip(want.iter()) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-9);
        }
        // Frozen values for the measured tensor.
        assert_abs_diff_eq!(v[0], -2.86575, epsilon = 1e-9);
        assert_abs_diff_eq!(v[1], 0.61625, epsilon = 1e-9);
        assert_abs_diff_eq!(v[2], 0.84725, epsilon = 1e-9);
        assert_abs_diff_eq!(v[3], 1.40225, epsilon = 1e-9);
    }

    #[test]
    fn measured_tensor_zero_field_transitions() {
        let m = MEASURED_TENSOR.crystal_matrix_mhz();
        let h = build_ground_hamiltonian(&MagneticField::zero(), &m, &consts()).unwrap();
        let v = eigvals_mhz(&h);
        let from_lowest: Vec<f64> = v[1..].iter().map(|x| x - v[0]).collect();
        assert_abs_diff_eq!(from_lowest[0], 3.482, epsilon = 1e-9);
        assert_abs_diff_eq!(from_lowest[1], 3.713, epsilon = 1e-9);
        assert_abs_diff_eq!(from_lowest[2], 4.268, epsilon = 1e-9);
    }

    #[test]
    fn ground_hamiltonian_is_traceless() {
        let b = MagneticField::from_spherical(0.7, 0.9, 2.1);
        let m = MEASURED_TENSOR.crystal_matrix_mhz();
        let h = build_ground_hamiltonian(&b, &m, &consts()).unwrap();
        assert!(h.matrix().trace().norm() < 1e-6 * h.matrix().norm());
    }

    #[test]
    fn asymmetric_tensor_is_rejected() {
        let mut m = MEASURED_TENSOR.crystal_matrix_mhz();
        m[(0, 2)] += 1e-3;
        assert!(build_ground_hamiltonian(&MagneticField::zero(), &m, &consts()).is_err());
    }

    #[test]
    fn excited_nuclear_hamiltonian_zero_field_is_zero() {
        let h = build_excited_nuclear_hamiltonian(&MagneticField::zero(), &consts()).unwrap();
        assert!(h.matrix().norm() == 0.0);
    }

    #[test]
    fn excited_nuclear_splitting_is_the_hydrogen_larmor_frequency() {
        let c = consts();
        let b = MagneticField::along(Vector3::z(), 1.0).unwrap();
        let h = build_excited_nuclear_hamiltonian(&b, &c).unwrap();
        let v = eigvals_mhz(&h);
        let splitting = v[1] - v[0];
        // Independent constant arithmetic: g_n mu_N B / h.
        let larmor = c.g_n * c.mu_n / crate::constants::PLANCK_H / 1e6;
        assert_abs_diff_eq!(splitting, larmor, epsilon = 1e-6);
        assert_abs_diff_eq!(splitting, 42.572_183, epsilon = 1e-5);
    }

    #[test]
    fn excited_splitting_is_direction_independent() {
        let c = consts();
        for dir in [
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(1.0, 1.0, 1.0),
            Vector3::new(0.3, -0.8, 0.52),
        ] {
            let b = MagneticField::along(dir, 0.35).unwrap();
            let h = build_excited_nuclear_hamiltonian(&b, &c).unwrap();
            let v = eigensystem(&h).unwrap().values;
            assert_abs_diff_eq!(v[1], c.gamma_n() * 0.35 / 2.0, epsilon = 1e-3);
            assert_abs_diff_eq!(v[0], -c.gamma_n() * 0.35 / 2.0, epsilon = 1e-3);
        }
    }

    #[test]
    fn eigensystem_of_diagonal_and_pauli() {
        let d = SpinHamiltonian::from_matrix(DMatrix::from_row_slice(
            2,
            2,
            &[c(1.0), c(0.0), c(0.0), c(2.0)],
        ))
        .unwrap();
        let e = eigensystem(&d).unwrap();
        assert_abs_diff_eq!(e.values[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 2.0, epsilon = 1e-14);

        let sx2 = SpinHamiltonian::from_matrix(pauli()[0].scale(0.5)).unwrap();
        let e = eigensystem(&sx2).unwrap();
        assert_abs_diff_eq!(e.values[0], -0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn propagator_identity_and_spinor_period() {
        let w = 2.0 * std::f64::consts::PI * 5.0e6;
        let h = SpinHamiltonian::from_matrix(pauli()[2].scale(0.5 * w)).unwrap();
        let u0 = propagator(&h, 0.0).unwrap();
        assert!((u0 - DMatrix::<C64>::identity(2, 2)).norm() < 1e-12);
        // One full spinor period picks up a global minus sign.
        let u = propagator(&h, 2.0 * std::f64::consts::PI / w).unwrap();
        assert!((u + DMatrix::<C64>::identity(2, 2)).norm() < 1e-9);
    }

    #[test]
    fn spinors_are_sigma_n_eigenstates() {
        let dir = Vector3::new(0.3, -0.7, 0.648).normalize();
        let [sx, sy, sz] = pauli();
        let sn = sx.scale(dir.x) + sy.scale(dir.y) + sz.scale(dir.z);
        for (branch, sign) in [(ElectronBranch::Up, 1.0), (ElectronBranch::Down, -1.0)] {
            let s = branch.spinor(&dir);
            let v = DMatrix::from_column_slice(2, 1, s.as_slice());
            assert!((&sn * &v - v.scale(sign)).norm() < 1e-12);
        }
    }
}
