//! Electrostatic equilibrium analysis for attractively coupled particles:
//! compensation field, transcendental equilibrium displacement along the
//! connecting axis, effective trap parameters and stability flags.

use crate::constants::EPSILON_0;
use crate::error::{Error, Result};
use crate::params::{DerivedParams, PhysicalConfig};

/// Maximum of u exp(-2 u^2) on [0, 1/2], attained at u = 1/2.
pub const DISPLACEMENT_RHS_MAX: f64 = 0.303265329856316727; // 1/(2 sqrt(e))

/// Outcome of the equilibrium analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumResult {
    /// Compensation field E_c (V/m); the formula value even when the caller
    /// chooses E_c = 0 for repulsive interaction.
    pub compensation_field: f64,
    /// Equilibrium displacement y_{0,1} along the connecting axis (m), absent
    /// when the transcendental equation has no solution.
    pub displacement: Option<f64>,
    /// Effective trap frequency along the optical axis (rad/s).
    pub omega0_eff: f64,
    /// Recoil-rate reduction factor exp(-2 y01^2 / w^2), in (0, 1].
    pub recoil_scale: f64,
    /// Center-of-mass trap frequency along y (rad/s).
    pub omega_y_plus: f64,
    /// Difference-mode frequency along y (rad/s); 0 when unstable.
    pub omega_y_minus: f64,
    /// Optical-axis trap still confining at the shifted equilibrium.
    pub stable_x: bool,
    /// Difference-mode y motion confined (omega_{y,-}^2 > 0). When false,
    /// feedback stabilisation with an additional differential field is needed.
    pub stable_y: bool,
}

/// Beam waist from the Rayleigh range, w = sqrt(2 x_R / k).
pub fn beam_waist(config: &PhysicalConfig) -> f64 {
    (2.0 * config.rayleigh_range / config.wavenumber()).sqrt()
}

/// Compensation field E_c = Q1 Q2 / ((Q1 - Q2) 2 pi eps_0 d^2).
pub fn compensation_field(charge1: f64, charge2: f64, separation: f64) -> Result<f64> {
    if charge1 == charge2 {
        return Err(Error::EqualCharges);
    }
    Ok(charge1 * charge2
        / ((charge1 - charge2) * 2.0 * std::f64::consts::PI * EPSILON_0 * separation * separation))
}

/// Right-hand side of the transcendental displacement equation,
/// (w d / x_R^2) (g/omega_0)_{y=0} (Q1 + Q2)/(Q1 - Q2).
pub fn displacement_rhs(config: &PhysicalConfig, derived: &DerivedParams) -> Result<f64> {
    if config.charge1 == config.charge2 {
        return Err(Error::EqualCharges);
    }
    let w = beam_waist(config);
    Ok(w * config.focus_separation / config.rayleigh_range.powi(2)
        * (derived.coupling / derived.omega0)
        * (config.charge1 + config.charge2)
        / (config.charge1 - config.charge2))
}

/// Solves (y/w) exp(-2 y^2/w^2) = rhs for the smallest root on [0, w/2] by
/// bisection. Returns `None` when |rhs| exceeds the left-hand-side maximum
/// 1/(2 sqrt(e)), which signals trap destabilisation rather than failure.
///
/// The displacement enters downstream only through y^2, so a negative rhs is
/// solved via its magnitude and the magnitude of the root is returned.
pub fn solve_equilibrium_displacement(
    config: &PhysicalConfig,
    derived: &DerivedParams,
) -> Result<Option<f64>> {
    let rhs = displacement_rhs(config, derived)?.abs();
    let w = beam_waist(config);
    if rhs == 0.0 {
        return Ok(Some(0.0));
    }
    if rhs > DISPLACEMENT_RHS_MAX {
        return Ok(None);
    }
    // u e^{-2u^2} is strictly increasing on [0, 1/2]; the root is unique there.
    let f = |u: f64| u * (-2.0 * u * u).exp() - rhs;
    let mut lo = 0.0f64;
    let mut hi = 0.5f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    let u = 0.5 * (lo + hi);
    debug_assert!((u * (-2.0 * u * u).exp() - rhs).abs() <= 1e-14 * rhs.max(1e-300));
    Ok(Some(u * w))
}

/// Effective trap parameters at the displaced equilibrium. `displacement` is
/// the solver output; `None` marks an unstable optical-axis configuration.
pub fn effective_trap(
    config: &PhysicalConfig,
    derived: &DerivedParams,
    displacement: Option<f64>,
) -> Result<EquilibriumResult> {
    let compensation = compensation_field(config.charge1, config.charge2, config.focus_separation)?;
    let w = beam_waist(config);
    let u2 = match displacement {
        Some(y01) => (y01 / w).powi(2),
        // No equilibrium: report the bare-focus parameters with both axes
        // flagged unstable.
        None => {
            return Ok(EquilibriumResult {
                compensation_field: compensation,
                displacement: None,
                omega0_eff: 0.0,
                recoil_scale: 1.0,
                omega_y_plus: 0.0,
                omega_y_minus: 0.0,
                stable_x: false,
                stable_y: false,
            })
        }
    };
    let envelope = (-2.0 * u2).exp();
    let bare_sq = derived.omega0 * derived.omega0;
    let omega0_eff_sq = bare_sq * (1.0 - 2.0 * u2) * envelope;
    let chi_e = config.susceptibility();
    let omega_y_plus_sq = 4.0 * chi_e * config.power
        / (std::f64::consts::PI * crate::constants::C_LIGHT * config.mass_density * w.powi(4))
        * (1.0 - 4.0 * u2)
        * envelope;
    let omega_y_minus_sq = omega_y_plus_sq - 4.0 * derived.coupling * derived.omega0;
    Ok(EquilibriumResult {
        compensation_field: compensation,
        displacement,
        omega0_eff: omega0_eff_sq.max(0.0).sqrt(),
        recoil_scale: envelope,
        omega_y_plus: omega_y_plus_sq.max(0.0).sqrt(),
        omega_y_minus: omega_y_minus_sq.max(0.0).sqrt(),
        stable_x: omega0_eff_sq > 0.0,
        stable_y: omega_y_minus_sq > 0.0,
    })
}

/// Full equilibrium analysis: compensation field, displacement, effective
/// trap parameters.
pub fn analyze(config: &PhysicalConfig, derived: &DerivedParams) -> Result<EquilibriumResult> {
    let displacement = solve_equilibrium_displacement(config, derived)?;
    effective_trap(config, derived, displacement)
}
