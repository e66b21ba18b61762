use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Static magnetic field, stored as a Cartesian 3-vector in the silicon
/// crystal basis (tesla). The spherical accessors use the polar angle theta
/// measured from [001] and the azimuth phi measured from [100].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagneticField {
    pub vector_t: Vector3<f64>,
}

impl MagneticField {
    pub fn new(vector_t: Vector3<f64>) -> Self {
        MagneticField { vector_t }
    }

    pub fn zero() -> Self {
        MagneticField {
            vector_t: Vector3::zeros(),
        }
    }

    /// Field from magnitude (tesla) and crystal-frame spherical angles in
    /// radians: theta from [001], phi from [100].
    pub fn from_spherical(magnitude_t: f64, theta: f64, phi: f64) -> Self {
        MagneticField {
            vector_t: magnitude_t
                * Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()),
        }
    }

    /// Field of magnitude `magnitude_t` along the (not necessarily unit)
    /// direction `dir`. Errors on a zero direction.
    pub fn along(dir: Vector3<f64>, magnitude_t: f64) -> Result<Self> {
        let n = dir.norm();
        if n == 0.0 {
            return Err(Error::ZeroField);
        }
        Ok(MagneticField {
            vector_t: dir * (magnitude_t / n),
        })
    }

    pub fn magnitude_t(&self) -> f64 {
        self.vector_t.norm()
    }

    /// Unit direction. Errors for B = 0 where no direction exists.
    pub fn direction(&self) -> Result<Vector3<f64>> {
        let n = self.vector_t.norm();
        if n == 0.0 {
            return Err(Error::ZeroField);
        }
        Ok(self.vector_t / n)
    }

    /// Polar angle from [001], radians.
    pub fn theta(&self) -> Result<f64> {
        Ok(self.direction()?.z.clamp(-1.0, 1.0).acos())
    }

    /// Azimuth from [100], radians in (-pi, pi].
    pub fn phi(&self) -> Result<f64> {
        let d = self.direction()?;
        Ok(d.y.atan2(d.x))
    }
}
