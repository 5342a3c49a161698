//! Flat key=value run configuration.
//!
//! The file format is plain text: one `key=value` per line, `#` starts a
//! comment, blank lines are ignored. Units are encoded in the key names
//! (`_m`, `_w`, `_pa`, `_k`, `_rad_s`, `_s`, `_e` for elementary charges).
//! Unknown keys are rejected with their name so typos surface immediately.

use std::fmt::Write as _;

use levitwin::constants::E_CHARGE;
use levitwin::params::{DerivedParams, Mode, PhysicalConfig};
use levitwin::filter::FilterModel;
use levitwin::{Error, Result};

/// Sweep axis spacing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

/// Which PSD rows to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    One(usize),
    Both,
}

/// Complete run description: physical setup, feedback filters, sweep and
/// simulation controls. Every field has a default, so an empty file is a
/// valid configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub physical: PhysicalConfig,
    /// Feedback damping rates (rad/s); 0 means the default omega0/10.
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    /// Filter bandwidths Omega_s (rad/s); 0 means the minimum-bandwidth
    /// shape W = sqrt(3) omega_s.
    pub omega_filter_plus: f64,
    pub omega_filter_minus: f64,
    /// Sweep spec for `negativity`.
    pub sweep_parameter: SweepParameter,
    pub sweep_min: f64,
    pub sweep_max: f64,
    pub sweep_points: usize,
    pub sweep_scale: Scale,
    /// Reduced-model base point for `negativity`.
    pub eta_eff: f64,
    pub gamma_sc_over_omega0: f64,
    pub g_over_omega0: f64,
    /// Simulation controls; 0 means "choose automatically".
    pub seed: u64,
    pub n_traj: usize,
    pub duration_s: f64,
    pub dt_s: f64,
    pub burn_in_s: f64,
    pub record_stride: usize,
    /// PSD grid for `psd`.
    pub psd_omega_min: f64,
    pub psd_omega_max: f64,
    pub psd_points: usize,
    pub psd_mode: Selection,
    pub psd_channel: Selection,
    /// Geometry for `demo-electron`.
    pub electron_distance: f64,
    pub electron_angle: f64,
    pub electron_amplitude: f64,
    pub electron_quality: f64,
}

/// Parameter swept by the `negativity` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    GOverOmega0,
    EtaEff,
    GammaScOverOmega0,
}

impl SweepParameter {
    pub fn key(&self) -> &'static str {
        match self {
            SweepParameter::GOverOmega0 => "g_over_omega0",
            SweepParameter::EtaEff => "eta_eff",
            SweepParameter::GammaScOverOmega0 => "gamma_sc_over_omega0",
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut physical = PhysicalConfig::reference_example();
        // The shipped setup taps 5% of the light for an out-of-loop
        // detector so `sql` and `demo-electron` work out of the box.
        physical.eta_out = 0.05;
        RunConfig {
            physical,
            gamma_plus: 0.0,
            gamma_minus: 0.0,
            omega_filter_plus: 0.0,
            omega_filter_minus: 0.0,
            sweep_parameter: SweepParameter::GOverOmega0,
            sweep_min: 0.0,
            sweep_max: 10.0,
            sweep_points: 41,
            sweep_scale: Scale::Linear,
            eta_eff: 0.45,
            gamma_sc_over_omega0: 0.1,
            g_over_omega0: 4.0,
            seed: 1,
            n_traj: 0,
            duration_s: 0.0,
            dt_s: 0.0,
            burn_in_s: 0.0,
            record_stride: 50,
            psd_omega_min: 0.0,
            psd_omega_max: 0.0,
            psd_points: 60,
            psd_mode: Selection::Both,
            psd_channel: Selection::Both,
            electron_distance: 10.0e-6,
            electron_angle: std::f64::consts::FRAC_PI_4,
            electron_amplitude: 1.0e-6,
            electron_quality: 10.0,
        }
    }
}

fn bad(key: &str, value: &str, want: &str) -> Error {
    Error::InvalidConfig(format!("key `{key}`: cannot parse `{value}` as {want}"))
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value.parse().map_err(|_| bad(key, value, "a number"))
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value.parse().map_err(|_| bad(key, value, "a non-negative integer"))
}

fn parse_u64(key: &str, value: &str) -> Result<u64> {
    value.parse().map_err(|_| bad(key, value, "a non-negative integer"))
}

impl RunConfig {
    /// Parses a configuration text, starting from the defaults.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut config = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "line {}: expected key=value, got `{line}`",
                    lineno + 1
                ))
            })?;
            config.apply(key.trim(), value.trim())?;
        }
        Ok(config)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let p = &mut self.physical;
        match key {
            "wavelength_m" => p.wavelength = parse_f64(key, value)?,
            "power_w" => p.power = parse_f64(key, value)?,
            "rayleigh_range_m" => p.rayleigh_range = parse_f64(key, value)?,
            "particle_radius_m" => p.particle_radius = parse_f64(key, value)?,
            "mass_density_kg_m3" => p.mass_density = parse_f64(key, value)?,
            "rel_permittivity" => p.rel_permittivity = parse_f64(key, value)?,
            "charge1_e" => p.charge1 = parse_f64(key, value)? * E_CHARGE,
            "charge2_e" => p.charge2 = parse_f64(key, value)? * E_CHARGE,
            "focus_separation_m" => p.focus_separation = parse_f64(key, value)?,
            "pressure_pa" => p.gas_pressure = parse_f64(key, value)?,
            "gas_temperature_k" => p.gas_temperature = parse_f64(key, value)?,
            "gas_damping_rad_s" => p.gas_damping = parse_f64(key, value)?,
            "eta_in" => p.eta_in = parse_f64(key, value)?,
            "eta_out" => p.eta_out = parse_f64(key, value)?,
            "extra_coupling_rad_s" => p.extra_coupling = parse_f64(key, value)?,
            "gamma_plus_rad_s" => self.gamma_plus = parse_f64(key, value)?,
            "gamma_minus_rad_s" => self.gamma_minus = parse_f64(key, value)?,
            "Omega_plus_rad_s" => self.omega_filter_plus = parse_f64(key, value)?,
            "Omega_minus_rad_s" => self.omega_filter_minus = parse_f64(key, value)?,
            "sweep_parameter" => {
                self.sweep_parameter = match value {
                    "g_over_omega0" => SweepParameter::GOverOmega0,
                    "eta_eff" => SweepParameter::EtaEff,
                    "gamma_sc_over_omega0" => SweepParameter::GammaScOverOmega0,
                    _ => {
                        return Err(bad(
                            key,
                            value,
                            "one of g_over_omega0 | eta_eff | gamma_sc_over_omega0",
                        ))
                    }
                }
            }
            "sweep_min" => self.sweep_min = parse_f64(key, value)?,
            "sweep_max" => self.sweep_max = parse_f64(key, value)?,
            "sweep_points" => self.sweep_points = parse_usize(key, value)?,
            "sweep_scale" => {
                self.sweep_scale = match value {
                    "linear" => Scale::Linear,
                    "log" => Scale::Log,
                    _ => return Err(bad(key, value, "linear | log")),
                }
            }
            "eta_eff" => self.eta_eff = parse_f64(key, value)?,
            "gamma_sc_over_omega0" => self.gamma_sc_over_omega0 = parse_f64(key, value)?,
            "g_over_omega0" => self.g_over_omega0 = parse_f64(key, value)?,
            "seed" => self.seed = parse_u64(key, value)?,
            "n_traj" => self.n_traj = parse_usize(key, value)?,
            "duration_s" => self.duration_s = parse_f64(key, value)?,
            "dt_s" => self.dt_s = parse_f64(key, value)?,
            "burn_in_s" => self.burn_in_s = parse_f64(key, value)?,
            "record_stride" => self.record_stride = parse_usize(key, value)?.max(1),
            "psd_omega_min_rad_s" => self.psd_omega_min = parse_f64(key, value)?,
            "psd_omega_max_rad_s" => self.psd_omega_max = parse_f64(key, value)?,
            "psd_points" => self.psd_points = parse_usize(key, value)?,
            "psd_mode" => {
                self.psd_mode = match value {
                    "plus" => Selection::One(0),
                    "minus" => Selection::One(1),
                    "both" => Selection::Both,
                    _ => return Err(bad(key, value, "plus | minus | both")),
                }
            }
            "psd_channel" => {
                self.psd_channel = match value {
                    "in" => Selection::One(0),
                    "out" => Selection::One(1),
                    "both" => Selection::Both,
                    _ => return Err(bad(key, value, "in | out | both")),
                }
            }
            "electron_distance_m" => self.electron_distance = parse_f64(key, value)?,
            "electron_angle_rad" => self.electron_angle = parse_f64(key, value)?,
            "electron_amplitude_m" => self.electron_amplitude = parse_f64(key, value)?,
            "electron_quality" => self.electron_quality = parse_f64(key, value)?,
            _ => return Err(Error::InvalidConfig(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Feedback damping rate for one mode, resolving the 0 = default rule.
    pub fn gamma(&self, derived: &DerivedParams, mode: Mode) -> f64 {
        let raw = match mode {
            Mode::Plus => self.gamma_plus,
            Mode::Minus => self.gamma_minus,
        };
        if raw > 0.0 {
            raw
        } else {
            derived.omega0 / 10.0
        }
    }

    /// Feedback filter for one mode, resolving defaults against the derived
    /// parameters: damping omega0/10, minimum-bandwidth shape.
    pub fn filter(&self, derived: &DerivedParams, mode: Mode) -> Result<FilterModel> {
        let omega_s = derived.mode_frequency(mode);
        let gamma = self.gamma(derived, mode);
        let omega_big = match mode {
            Mode::Plus => self.omega_filter_plus,
            Mode::Minus => self.omega_filter_minus,
        };
        if omega_big > 0.0 {
            FilterModel::from_bandwidth(omega_s, gamma, omega_big)
        } else {
            FilterModel::from_shape(omega_s, gamma, 3.0f64.sqrt() * omega_s)
        }
    }

    /// Serialises the effective configuration as a key=value text that
    /// parses back to an identical run (a byte-level fixed point: the echo
    /// of the re-parsed text equals the echo). Sentinel values (0 = choose
    /// automatically) are echoed as given; `derive` reports the resolved
    /// values as comments.
    pub fn echo(&self) -> String {
        let mut out = String::from("# levitwin effective configuration\n");
        let p = &self.physical;
        let pairs: Vec<(&str, String)> = vec![
            ("wavelength_m", format!("{:e}", p.wavelength)),
            ("power_w", format!("{:e}", p.power)),
            ("rayleigh_range_m", format!("{:e}", p.rayleigh_range)),
            ("particle_radius_m", format!("{:e}", p.particle_radius)),
            ("mass_density_kg_m3", format!("{:e}", p.mass_density)),
            ("rel_permittivity", format!("{:e}", p.rel_permittivity)),
            ("charge1_e", format!("{:e}", p.charge1 / E_CHARGE)),
            ("charge2_e", format!("{:e}", p.charge2 / E_CHARGE)),
            ("focus_separation_m", format!("{:e}", p.focus_separation)),
            ("pressure_pa", format!("{:e}", p.gas_pressure)),
            ("gas_temperature_k", format!("{:e}", p.gas_temperature)),
            ("gas_damping_rad_s", format!("{:e}", p.gas_damping)),
            ("eta_in", format!("{:e}", p.eta_in)),
            ("eta_out", format!("{:e}", p.eta_out)),
            ("extra_coupling_rad_s", format!("{:e}", p.extra_coupling)),
            ("gamma_plus_rad_s", format!("{:e}", self.gamma_plus)),
            ("gamma_minus_rad_s", format!("{:e}", self.gamma_minus)),
            ("Omega_plus_rad_s", format!("{:e}", self.omega_filter_plus)),
            ("Omega_minus_rad_s", format!("{:e}", self.omega_filter_minus)),
            ("sweep_parameter", self.sweep_parameter.key().to_string()),
            ("sweep_min", format!("{:e}", self.sweep_min)),
            ("sweep_max", format!("{:e}", self.sweep_max)),
            ("sweep_points", format!("{}", self.sweep_points)),
            (
                "sweep_scale",
                match self.sweep_scale {
                    Scale::Linear => "linear".to_string(),
                    Scale::Log => "log".to_string(),
                },
            ),
            ("eta_eff", format!("{:e}", self.eta_eff)),
            (
                "gamma_sc_over_omega0",
                format!("{:e}", self.gamma_sc_over_omega0),
            ),
            ("g_over_omega0", format!("{:e}", self.g_over_omega0)),
            ("seed", format!("{}", self.seed)),
            ("n_traj", format!("{}", self.n_traj)),
            ("duration_s", format!("{:e}", self.duration_s)),
            ("dt_s", format!("{:e}", self.dt_s)),
            ("burn_in_s", format!("{:e}", self.burn_in_s)),
            ("record_stride", format!("{}", self.record_stride)),
            ("psd_omega_min_rad_s", format!("{:e}", self.psd_omega_min)),
            ("psd_omega_max_rad_s", format!("{:e}", self.psd_omega_max)),
            ("psd_points", format!("{}", self.psd_points)),
            (
                "psd_mode",
                match self.psd_mode {
                    Selection::One(0) => "plus".to_string(),
                    Selection::One(_) => "minus".to_string(),
                    Selection::Both => "both".to_string(),
                },
            ),
            (
                "psd_channel",
                match self.psd_channel {
                    Selection::One(0) => "in".to_string(),
                    Selection::One(_) => "out".to_string(),
                    Selection::Both => "both".to_string(),
                },
            ),
            ("electron_distance_m", format!("{:e}", self.electron_distance)),
            ("electron_angle_rad", format!("{:e}", self.electron_angle)),
            (
                "electron_amplitude_m",
                format!("{:e}", self.electron_amplitude),
            ),
            ("electron_quality", format!("{:e}", self.electron_quality)),
        ];
        for (key, value) in pairs {
            writeln!(out, "{key}={value}").unwrap();
        }
        out
    }
}
