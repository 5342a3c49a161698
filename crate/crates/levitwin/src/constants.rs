//! Physical constants (CODATA 2018), SI units.

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_813e-12;

/// Boltzmann constant, J/K (exact).
pub const K_B: f64 = 1.380_649_00e-23;

/// Speed of light in vacuum, m/s (exact).
pub const C_LIGHT: f64 = 2.997_924_58e8;

/// Elementary charge, C (exact).
pub const E_CHARGE: f64 = 1.602_176_634e-19;
