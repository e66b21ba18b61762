use serde::{Deserialize, Serialize};

/// 2 pi, used for linear-frequency <-> angular-frequency conversions.
pub const TWO_PI: f64 = std::f64::consts::TAU;

/// Bohr magneton, J/T (CODATA 2018).
pub const MU_B: f64 = 9.274_010_078_3e-24;
/// Nuclear magneton, J/T (CODATA 2018).
pub const MU_N: f64 = 5.050_783_746_1e-27;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Planck constant, J s (exact).
pub const PLANCK_H: f64 = 6.626_070_15e-34;

/// Physical constants of the coupled electron-hydrogen spin system.
///
/// All internal spin dynamics are expressed in angular frequency (rad/s);
/// user-facing quantities are linear frequencies in MHz. The conversion
/// helpers below are the single place where the factor of 2 pi lives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Electron g-factor (dimensionless).
    pub g_e: f64,
    /// Hydrogen nuclear g-factor (dimensionless).
    pub g_n: f64,
    /// Bohr magneton, J/T.
    pub mu_b: f64,
    /// Nuclear magneton, J/T.
    pub mu_n: f64,
    /// Reduced Planck constant, J s.
    pub hbar: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            g_e: 2.005,
            g_n: 5.585,
            mu_b: MU_B,
            mu_n: MU_N,
            hbar: HBAR,
        }
    }
}

impl PhysicalConstants {
    /// Electron gyromagnetic ratio, rad/s/T. Negative: the electron moment
    /// is antiparallel to its spin.
    pub fn gamma_e(&self) -> f64 {
        -self.g_e * self.mu_b / self.hbar
    }

    /// Nuclear (hydrogen) gyromagnetic ratio, rad/s/T. Positive.
    pub fn gamma_n(&self) -> f64 {
        self.g_n * self.mu_n / self.hbar
    }

    /// Bare nuclear Larmor frequency at field magnitude `b_t` tesla, in MHz.
    pub fn larmor_mhz(&self, b_t: f64) -> f64 {
        rad_s_to_mhz(self.gamma_n() * b_t)
    }
}

/// Convert a linear frequency in MHz to angular frequency in rad/s.
pub fn mhz_to_rad_s(f_mhz: f64) -> f64 {
    TWO_PI * 1.0e6 * f_mhz
}

/// Convert an angular frequency in rad/s to a linear frequency in MHz.
pub fn rad_s_to_mhz(w_rad_s: f64) -> f64 {
    w_rad_s / (TWO_PI * 1.0e6)
}
