//! The 12 inversion-symmetric T centre orientation classes, generated from
//! the identity orientation z0 by the proper rotations of the cubic group,
//! and their partition into spectrally equivalent subsets for a given field
//! direction.

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::field::MagneticField;
use crate::spectra;
use crate::tensor::HyperfineTensor;

/// One orientation class: a label z0..z11 and the proper rotation mapping
/// the z0 defect frame into the crystal frame. The 24 physical orientations
/// pair up under defect inversion, which leaves the coupling matrix - and
/// hence every spin observable in a magnetic field - unchanged, so only the
/// 12 distinct coupling matrices are enumerated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrientationId {
    pub label: String,
    #[serde(serialize_with = "serialize_rotation_row_major")]
    pub rotation: Matrix3<f64>,
}

fn serialize_rotation_row_major<S>(r: &Matrix3<f64>, s: S) -> std::result::Result<S::Ok, S::Error>
where
    S: serde::Serializer,
{
    let rows: Vec<f64> = (0..3).flat_map(|i| (0..3).map(move |j| r[(i, j)])).collect();
    serde::Serialize::serialize(&rows, s)
}

/// The 24 proper rotations of the cubic group as signed permutation
/// matrices, in a fixed order with the identity first.
pub fn cubic_rotations() -> Vec<Matrix3<f64>> {
    let perms: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut out = Vec::with_capacity(24);
    for perm in perms {
        for bits in 0..8u8 {
            let signs = [
                if bits & 1 == 0 { 1.0 } else { -1.0 },
                if bits & 2 == 0 { 1.0 } else { -1.0 },
                if bits & 4 == 0 { 1.0 } else { -1.0 },
            ];
            let mut m = Matrix3::<f64>::zeros();
            for (row, (&col, &sign)) in perm.iter().zip(signs.iter()).enumerate() {
                m[(row, col)] = sign;
            }
            if (m.determinant() - 1.0).abs() < 1e-12 {
                out.push(m);
            }
        }
    }
    debug_assert_eq!(out.len(), 24);
    out
}

/// Deterministic list of the 12 orientation classes. z0 is the identity
/// rotation; the rest are labelled z1..z11 in first-occurrence order as the
/// cubic rotations act on a generic tensor in the z0 Euler frame.
pub fn orientation_set() -> Vec<OrientationId> {
    // A reference tensor with distinct principal values in the z0 frame;
    // the class structure depends only on the frame, not on the values.
    let reference = HyperfineTensor::new([1.0, 2.0, 3.0], [135.0, 90.0, -45.0]);
    let m0 = reference.crystal_matrix_mhz();
    let mut classes: Vec<(Matrix3<f64>, Matrix3<f64>)> = Vec::new(); // (rotation, conjugated)
    for r in cubic_rotations() {
        let m = r * m0 * r.transpose();
        let seen = classes.iter().any(|(_, km)| (km - m).amax() < 1e-9);
        if !seen {
            classes.push((r, m));
        }
    }
    classes
        .into_iter()
        .enumerate()
        .map(|(k, (rotation, _))| OrientationId {
            label: format!("z{k}"),
            rotation,
        })
        .collect()
}

/// Crystal-frame coupling matrix of tensor `a` reoriented into class `id`:
/// R_id M_z0 R_id^T. Spectrum preserving.
pub fn tensor_for_orientation(a: &HyperfineTensor, id: &OrientationId) -> Matrix3<f64> {
    let m0 = a.crystal_matrix_mhz();
    let m = id.rotation * m0 * id.rotation.transpose();
    (m + m.transpose()) * 0.5
}

/// Partition of the 12 orientations into classes whose full ground-state
/// transition lists agree within `tolerance_mhz`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrientationPartition {
    /// Disjoint classes covering all 12 orientations, each listing member
    /// indices into [`orientation_set`], ordered by lowest member index.
    pub classes: Vec<Vec<usize>>,
    pub field_direction: Vector3<f64>,
    pub field_magnitude_t: f64,
    pub tolerance_mhz: f64,
}

/// Default spectral-equivalence tolerance: 1 kHz, well below the smallest
/// splitting distinctions of interest (hundreds of kHz).
pub const DEFAULT_PARTITION_TOLERANCE_MHZ: f64 = 1e-3;

/// Group orientations by spectral equivalence at the given field. Classes
/// are ordered by their lowest member index; members are ascending.
pub fn partition_by_field(
    direction: Vector3<f64>,
    a: &HyperfineTensor,
    magnitude_t: f64,
    tolerance_mhz: f64,
    consts: &PhysicalConstants,
) -> Result<OrientationPartition> {
    if direction.norm() == 0.0 {
        return Err(Error::ZeroField);
    }
    let field = MagneticField::along(direction, magnitude_t)?;
    let orientations = orientation_set();
    let mut spectra_per_orientation: Vec<Vec<f64>> = Vec::with_capacity(orientations.len());
    for id in &orientations {
        let m = tensor_for_orientation(a, id);
        let lines = spectra::transition_frequencies(&field, &m, consts)?;
        spectra_per_orientation.push(lines.frequencies_mhz());
    }

    let mut classes: Vec<Vec<usize>> = Vec::new();
    'next: for (idx, spec) in spectra_per_orientation.iter().enumerate() {
        for class in classes.iter_mut() {
            let rep = &spectra_per_orientation[class[0]];
            let close = rep
                .iter()
                .zip(spec.iter())
                .all(|(a, b)| (a - b).abs() <= tolerance_mhz);
            if close {
                class.push(idx);
                continue 'next;
            }
        }
        classes.push(vec![idx]);
    }
    Ok(OrientationPartition {
        classes,
        field_direction: direction.normalize(),
        field_magnitude_t: magnitude_t,
        tolerance_mhz,
    })
}
