//! Experimental inputs and every derived physical quantity used downstream.
//!
//! All computation is in SI units. Charges are stored in coulombs; the CLI
//! layer converts from elementary-charge counts.

use crate::constants::{C_LIGHT, EPSILON_0, HBAR, K_B};
use crate::error::{Error, Result};

/// Raw experimental inputs, SI units throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalConfig {
    /// Tweezer wavelength (m).
    pub wavelength: f64,
    /// Tweezer drive power per trap (W).
    pub power: f64,
    /// Rayleigh range (m).
    pub rayleigh_range: f64,
    /// Particle radius (m).
    pub particle_radius: f64,
    /// Particle mass density (kg/m^3).
    pub mass_density: f64,
    /// Relative dielectric permittivity (dimensionless).
    pub rel_permittivity: f64,
    /// Charge of particle 1 (C, signed).
    pub charge1: f64,
    /// Charge of particle 2 (C, signed).
    pub charge2: f64,
    /// Separation of the tweezer foci (m).
    pub focus_separation: f64,
    /// Residual gas pressure (Pa). Informational; damping is a direct input.
    pub gas_pressure: f64,
    /// Gas temperature (K).
    pub gas_temperature: f64,
    /// Gas damping constant (rad/s), direct input.
    pub gas_damping: f64,
    /// In-loop detection efficiency (dimensionless).
    pub eta_in: f64,
    /// Out-of-loop detection efficiency (dimensionless).
    pub eta_out: f64,
    /// Additive contribution to the coupling constant (rad/s), e.g. optical
    /// binding. Any sign, default 0.
    pub extra_coupling: f64,
}

impl PhysicalConfig {
    /// Checks every invariant on the raw inputs.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("wavelength", self.wavelength),
            ("power", self.power),
            ("rayleigh_range", self.rayleigh_range),
            ("particle_radius", self.particle_radius),
            ("mass_density", self.mass_density),
            ("rel_permittivity", self.rel_permittivity),
            ("focus_separation", self.focus_separation),
            ("gas_pressure", self.gas_pressure),
            ("gas_temperature", self.gas_temperature),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be strictly positive, got {value}"
                )));
            }
        }
        if self.rel_permittivity <= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "rel_permittivity must exceed 1, got {}",
                self.rel_permittivity
            )));
        }
        if !(self.gas_damping >= 0.0) || !self.gas_damping.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "gas_damping must be non-negative, got {}",
                self.gas_damping
            )));
        }
        if self.charge1 == 0.0 || self.charge2 == 0.0 {
            return Err(Error::InvalidConfig(
                "charges must be nonzero".to_string(),
            ));
        }
        for (name, value) in [("eta_in", self.eta_in), ("eta_out", self.eta_out)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must lie in [0, 1], got {value}"
                )));
            }
        }
        if self.eta_in + self.eta_out > 1.0 + 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "eta_in + eta_out must not exceed 1, got {}",
                self.eta_in + self.eta_out
            )));
        }
        if !self.extra_coupling.is_finite() {
            return Err(Error::InvalidConfig(
                "extra_coupling must be finite".to_string(),
            ));
        }
        Ok(())
    }

    /// Optical wavenumber k = 2 pi / wavelength (rad/m).
    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    /// Electric susceptibility chi_e = 3 (eps_r - 1) / (eps_r + 2).
    pub fn susceptibility(&self) -> f64 {
        3.0 * (self.rel_permittivity - 1.0) / (self.rel_permittivity + 2.0)
    }

    /// Particle volume (m^3).
    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * std::f64::consts::PI * self.particle_radius.powi(3)
    }

    /// Particle mass (kg).
    pub fn mass(&self) -> f64 {
        self.mass_density * self.volume()
    }

    /// Combined detection efficiency eta = eta_in + eta_out.
    pub fn eta_total(&self) -> f64 {
        self.eta_in + self.eta_out
    }

    /// True when |Q1| = |Q2|. Electric feedback actuation then cannot address
    /// the sum mode; callers driving electric feedback must flag this.
    pub fn equal_charge_magnitudes(&self) -> bool {
        (self.charge1.abs() - self.charge2.abs()).abs()
            <= 1e-12 * self.charge1.abs().max(self.charge2.abs())
    }

    /// Reference setup: a 91 nm silica sphere (chi_e = 0.8, rho = 1850 kg/m^3)
    /// in a 1064 nm, 300 mW tweezer with x_R = 1.21 um, carrying 250 opposite
    /// elementary charges at 2 um separation, in 300 K nitrogen at 1e-8 mbar.
    pub fn reference_example() -> Self {
        PhysicalConfig {
            wavelength: 1.064e-6,
            power: 0.3,
            rayleigh_range: 1.21e-6,
            particle_radius: 45.5e-9,
            mass_density: 1850.0,
            rel_permittivity: 23.0 / 11.0, // chi_e = 0.8 exactly
            charge1: 250.0 * crate::constants::E_CHARGE,
            charge2: -250.0 * crate::constants::E_CHARGE,
            focus_separation: 2.0e-6,
            gas_pressure: 1.0e-6,
            gas_temperature: 300.0,
            gas_damping: 2.0 * std::f64::consts::PI * 10.0e-6,
            eta_in: 0.4,
            eta_out: 0.0,
            extra_coupling: 0.0,
        }
    }
}

/// Derived physical quantities, all SI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    /// Bare trap frequency omega_0 (rad/s).
    pub omega0: f64,
    /// Recoil heating rate Gamma_sc (rad/s).
    pub gamma_sc: f64,
    /// Coulomb coupling constant g (rad/s), > 0 for attraction.
    pub coupling: f64,
    /// Sum-mode frequency (rad/s), equals omega_0.
    pub omega_plus: f64,
    /// Difference-mode frequency (rad/s).
    pub omega_minus: f64,
    /// Measurement accuracy L^2 = hbar / (8 m omega_0 Gamma_sc) (m^2).
    pub l_squared: f64,
    /// Gas momentum-diffusion constant D_g = gamma_g m k_B T_g (kg^2 m^2 / s^3).
    pub gas_diffusion: f64,
    /// Net heating rate Gamma = Gamma_sc + gamma_g k_B T_g / (hbar omega_0) (rad/s).
    pub heating_rate: f64,
    /// Effective detection efficiency eta_eff = eta_in Gamma_sc / Gamma.
    pub eta_eff: f64,
    /// Particle mass (kg); carried along for downstream use.
    pub mass: f64,
    /// In-loop detection efficiency.
    pub eta_in: f64,
    /// Out-of-loop detection efficiency.
    pub eta_out: f64,
}

impl DerivedParams {
    /// Computes every derived quantity from a validated configuration.
    pub fn from_config(config: &PhysicalConfig) -> Result<Self> {
        config.validate()?;
        let omega0 = derive_trap_frequency(config)?;
        let gamma_sc = derive_recoil_rate(config, omega0);
        let coupling = derive_coupling(config, omega0);
        let (omega_plus, omega_minus) = derive_normal_modes(omega0, coupling)?;
        let (gas_diffusion, heating_rate, eta_eff, l_squared) =
            derive_thermal_and_detection(config, omega0, gamma_sc);
        Ok(Self {
            omega0,
            gamma_sc,
            coupling,
            omega_plus,
            omega_minus,
            l_squared,
            gas_diffusion,
            heating_rate,
            eta_eff,
            mass: config.mass(),
            eta_in: config.eta_in,
            eta_out: config.eta_out,
        })
    }

    /// Builds a self-consistent parameter set directly from the physical
    /// rates, bypassing the optical derivations. `gas_excess` is the gas
    /// contribution Gamma - Gamma_sc to the heating rate; the matching gas
    /// diffusion D_g = m (Gamma - Gamma_sc) hbar omega_0 is filled in.
    /// Intended for sweeps and synthetic test fixtures.
    pub fn synthetic(
        omega0: f64,
        gamma_sc: f64,
        coupling: f64,
        gas_excess: f64,
        eta_in: f64,
        eta_out: f64,
        mass: f64,
    ) -> Result<Self> {
        for (name, value) in [
            ("omega0", omega0),
            ("gamma_sc", gamma_sc),
            ("mass", mass),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be strictly positive, got {value}"
                )));
            }
        }
        if gas_excess < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "gas_excess must be non-negative, got {gas_excess}"
            )));
        }
        if eta_in < 0.0 || eta_out < 0.0 || eta_in + eta_out > 1.0 + 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "efficiencies must be non-negative with eta_in + eta_out <= 1, got {eta_in}, {eta_out}"
            )));
        }
        let (omega_plus, omega_minus) = derive_normal_modes(omega0, coupling)?;
        let heating_rate = gamma_sc + gas_excess;
        Ok(Self {
            omega0,
            gamma_sc,
            coupling,
            omega_plus,
            omega_minus,
            l_squared: HBAR / (8.0 * mass * omega0 * gamma_sc),
            gas_diffusion: mass * gas_excess * HBAR * omega0,
            heating_rate,
            eta_eff: eta_in * gamma_sc / heating_rate,
            mass,
            eta_in,
            eta_out,
        })
    }

    /// Reduced parameter space used by analytic sweeps: omega_0 = 1 rad/s,
    /// unit mass, no gas, with the coupling and heating rate given as
    /// fractions of omega_0 and eta_in chosen so that eta_eff comes out as
    /// requested.
    pub fn reduced(eta_eff: f64, gamma_over_omega0: f64, g_over_omega0: f64) -> Result<Self> {
        Self::synthetic(
            1.0,
            gamma_over_omega0,
            g_over_omega0,
            0.0,
            eta_eff,
            0.0,
            1.0,
        )
    }

    /// Combined detection efficiency eta = eta_in + eta_out.
    pub fn eta_total(&self) -> f64 {
        self.eta_in + self.eta_out
    }

    /// Normal-mode frequency for the given mode.
    pub fn mode_frequency(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Plus => self.omega_plus,
            Mode::Minus => self.omega_minus,
        }
    }
}

/// Sum (+) or difference (-) normal mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Plus,
    Minus,
}

impl Mode {
    pub const BOTH: [Mode; 2] = [Mode::Plus, Mode::Minus];

    pub fn label(&self) -> &'static str {
        match self {
            Mode::Plus => "plus",
            Mode::Minus => "minus",
        }
    }
}

/// Trap frequency omega_0 = sqrt(chi_e k P / (pi c rho x_R^3)).
pub fn derive_trap_frequency(config: &PhysicalConfig) -> Result<f64> {
    config.validate()?;
    let chi_e = config.susceptibility();
    let k = config.wavenumber();
    let num = chi_e * k * config.power;
    let den = std::f64::consts::PI
        * C_LIGHT
        * config.mass_density
        * config.rayleigh_range.powi(3);
    Ok((num / den).sqrt())
}

/// Recoil heating rate
/// Gamma_sc = omega_0 chi_e k^5 V x_R^2 / (60 pi) * [2 + 5 (1 - 1/(k x_R))^2].
pub fn derive_recoil_rate(config: &PhysicalConfig, omega0: f64) -> f64 {
    let chi_e = config.susceptibility();
    let k = config.wavenumber();
    let x_r = config.rayleigh_range;
    let bracket = 2.0 + 5.0 * (1.0 - 1.0 / (k * x_r)).powi(2);
    omega0 * chi_e * k.powi(5) * config.volume() * x_r * x_r
        / (60.0 * std::f64::consts::PI)
        * bracket
}

/// Coupling constant g = -Q1 Q2 / (8 pi m omega_0 eps_0 d^3) plus any
/// user-supplied additive contribution. Positive for attraction.
pub fn derive_coupling(config: &PhysicalConfig, omega0: f64) -> f64 {
    let d = config.focus_separation;
    -config.charge1 * config.charge2
        / (8.0 * std::f64::consts::PI * config.mass() * omega0 * EPSILON_0 * d.powi(3))
        + config.extra_coupling
}

/// Normal-mode frequencies omega_+ = omega_0 and
/// omega_-^2 = omega_0^2 + 4 g omega_0.
pub fn derive_normal_modes(omega0: f64, coupling: f64) -> Result<(f64, f64)> {
    let omega_minus_sq = omega0 * omega0 + 4.0 * coupling * omega0;
    if omega_minus_sq <= 0.0 {
        return Err(Error::UnstableTrap { omega_minus_sq });
    }
    Ok((omega0, omega_minus_sq.sqrt()))
}

/// Gas diffusion, net heating rate, effective detection efficiency, and the
/// measurement accuracy L^2. Returns (D_g, Gamma, eta_eff, L^2).
pub fn derive_thermal_and_detection(
    config: &PhysicalConfig,
    omega0: f64,
    gamma_sc: f64,
) -> (f64, f64, f64, f64) {
    let mass = config.mass();
    let gas_diffusion = config.gas_damping * mass * K_B * config.gas_temperature;
    let heating_rate =
        gamma_sc + config.gas_damping * K_B * config.gas_temperature / (HBAR * omega0);
    let eta_eff = config.eta_in * gamma_sc / heating_rate;
    let l_squared = HBAR / (8.0 * mass * omega0 * gamma_sc);
    (gas_diffusion, heating_rate, eta_eff, l_squared)
}
