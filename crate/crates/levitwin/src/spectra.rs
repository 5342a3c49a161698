//! Frequency-domain machinery: mechanical susceptibilities, in-loop and
//! out-of-loop noise spectra, the resonant force-noise floor, sensitivity
//! estimates, and the oscillating-electron detection demo.
//!
//! Conventions. Fourier transforms are symmetric, A[omega] =
//! int dt e^{i omega t} A(t) / sqrt(2 pi), so the mean square of a stationary
//! signal is int S(omega) d omega / (2 pi). Displacement spectra follow
//!
//!   S_rs(omega) = |chi_s(omega)|^2 (2 pi S_KK(omega) + N_rs(omega)) / (2 pi m^2),
//!
//! where N_rs is the total force-equivalent noise of channel r in {in, out}
//! for mode s and chi_s^{-1} = omega_s^2 - omega^2 + gamma_s sqrt(2 pi)
//! H_s(omega) is the feedback-damped susceptibility.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::constants::{E_CHARGE, EPSILON_0, HBAR};
use crate::error::{Error, Result};
use crate::filter::{FeedbackResponse, FilterModel};
use crate::params::{DerivedParams, Mode, PhysicalConfig};

/// Detection channel: inside or outside the feedback loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    InLoop,
    OutLoop,
}

impl Channel {
    pub const BOTH: [Channel; 2] = [Channel::InLoop, Channel::OutLoop];

    pub fn label(&self) -> &'static str {
        match self {
            Channel::InLoop => "in",
            Channel::OutLoop => "out",
        }
    }
}

/// External force PSD S_KK(omega) driving one mode (N^2 s, two-sided, even).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForceSpec {
    /// No external force.
    None,
    /// Frequency-flat PSD.
    White { psd: f64 },
    /// Symmetric pair of Lorentzian lines at +/- center. `weight` is the
    /// integrated power int S d omega; the peak value is approximately
    /// weight / (2 pi hwhm) plus the far tail of the mirror line.
    Lorentzian { weight: f64, center: f64, hwhm: f64 },
}

impl ForceSpec {
    /// Two-sided PSD value at `omega` (N^2 s).
    pub fn psd(&self, omega: f64) -> f64 {
        match *self {
            ForceSpec::None => 0.0,
            ForceSpec::White { psd } => psd,
            ForceSpec::Lorentzian {
                weight,
                center,
                hwhm,
            } => {
                let lobe = |x: f64| hwhm / (std::f64::consts::PI * (x * x + hwhm * hwhm));
                0.5 * weight * (lobe(omega - center) + lobe(omega + center))
            }
        }
    }
}

/// Everything needed to evaluate the spectra of one mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSpectrum {
    pub mass: f64,
    pub l_squared: f64,
    pub gas_diffusion: f64,
    pub eta_in: f64,
    pub eta_out: f64,
    pub omega_s: f64,
    pub filter: FilterModel,
}

impl ModeSpectrum {
    pub fn from_derived(derived: &DerivedParams, mode: Mode, filter: FilterModel) -> Self {
        Self {
            mass: derived.mass,
            l_squared: derived.l_squared,
            gas_diffusion: derived.gas_diffusion,
            eta_in: derived.eta_in,
            eta_out: derived.eta_out,
            omega_s: derived.mode_frequency(mode),
            filter,
        }
    }

    /// Inverse susceptibility chi^{-1}(omega) (s^-2).
    pub fn susceptibility_inverse(&self, omega: f64) -> Complex64 {
        let h = self.filter.transfer(omega);
        Complex64::new(self.omega_s * self.omega_s - omega * omega, 0.0)
            + self.filter.gamma * h
    }

    /// Feedback-damped mechanical susceptibility chi(omega) (s^2).
    pub fn susceptibility(&self, omega: f64) -> Result<Complex64> {
        let inv = self.susceptibility_inverse(omega);
        if inv.norm() < 1e-30 {
            return Err(Error::SingularResponse { omega });
        }
        Ok(inv.inv())
    }

    /// Force-equivalent noise PSD N_r(omega) of the requested channel
    /// (N^2 s). The out-of-loop channel is bounded below by the back-action
    /// floor hbar^2/4L^2 + 2 D_g; the in-loop channel can dip below it
    /// (noise squashing) because the shot noise it contains is correlated
    /// with the feedback force.
    pub fn noise_psd(&self, omega: f64, channel: Channel) -> Result<f64> {
        let eta_r = match channel {
            Channel::InLoop => self.eta_in,
            Channel::OutLoop => self.eta_out,
        };
        if eta_r <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "channel '{}' has zero detection efficiency",
                channel.label()
            )));
        }
        let floor = HBAR * HBAR / (4.0 * self.l_squared) + 2.0 * self.gas_diffusion;
        let m2l2 = self.mass * self.mass * self.l_squared;
        let gamma = self.filter.gamma;
        let chi_inv_sq = self.susceptibility_inverse(omega).norm_sqr();
        // |sqrt(2 pi) H|^2 = g^2 + omega^2 f^2
        let h_sq = self.filter.transfer(omega).norm_sqr();
        let value = match channel {
            Channel::OutLoop => {
                floor
                    + m2l2
                        * (chi_inv_sq / eta_r + gamma * gamma * h_sq / self.eta_in)
            }
            Channel::InLoop => {
                let detuning = self.omega_s * self.omega_s - omega * omega;
                floor
                    + m2l2 / self.eta_in
                        * (chi_inv_sq
                            - gamma * gamma * h_sq
                            - 2.0 * detuning * gamma * self.filter.g(omega))
            }
        };
        Ok(value)
    }

    /// Displacement PSD of the channel's record,
    /// |chi|^2 (2 pi S_KK + N) / (2 pi m^2) (m^2 s).
    pub fn signal_psd(&self, omega: f64, channel: Channel, force: &ForceSpec) -> Result<f64> {
        let chi_sq = self.susceptibility(omega)?.norm_sqr();
        let noise = self.noise_psd(omega, channel)?;
        Ok(chi_sq * (2.0 * std::f64::consts::PI * force.psd(omega) + noise)
            / (2.0 * std::f64::consts::PI * self.mass * self.mass))
    }
}

/// Result of the resonant force-noise-floor optimization over the
/// measurement strength L^2 at fixed feedback damping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqlReport {
    pub mode: Mode,
    /// Numerically minimised N_out(omega_s) over L^2 (N^2 s).
    pub noise_floor: f64,
    /// Minimising measurement accuracy (m^2).
    pub optimal_l_squared: f64,
    /// Closed-form floor hbar m gamma_s omega_s sqrt(1/eta_in + 1/eta_out).
    pub closed_form_floor: f64,
    /// Closed-form minimiser hbar / (2 m gamma_s omega_s sqrt(B)).
    pub closed_form_l_squared: f64,
    /// Recoil rate realising the optimal L^2, gamma_s omega_s sqrt(B)/(4 omega_0).
    pub optimal_gamma_sc: f64,
}

/// Minimises the resonant out-of-loop force noise N_out(omega_s) over the
/// measurement strength L^2 at fixed feedback damping gamma_s, with D_g = 0.
/// Golden-section search over log L^2 bracketing the closed-form minimiser;
/// the closed form is returned alongside as a cross-check.
pub fn sql_resonant(
    derived: &DerivedParams,
    mode: Mode,
    gamma_s: f64,
    eta_in: f64,
    eta_out: f64,
) -> Result<SqlReport> {
    if !(gamma_s > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "sql_resonant requires gamma_s > 0, got {gamma_s}"
        )));
    }
    if !(eta_in > 0.0) || !(eta_out > 0.0) || eta_in + eta_out > 1.0 + 1e-12 {
        return Err(Error::InvalidConfig(format!(
            "sql_resonant requires eta_in, eta_out > 0 with sum <= 1, got {eta_in}, {eta_out}"
        )));
    }
    let omega_s = derived.mode_frequency(mode);
    let m = derived.mass;
    let b = 1.0 / eta_in + 1.0 / eta_out;
    // N_out(omega_s; L^2) = hbar^2/4L^2 + m^2 L^2 gamma^2 omega_s^2 B, since
    // |chi^-1(omega_s)|^2 = gamma^2 omega_s^2 and |sqrt(2pi)H|^2 = omega_s^2.
    let resonant_noise = |l2: f64| {
        HBAR * HBAR / (4.0 * l2) + m * m * l2 * gamma_s * gamma_s * omega_s * omega_s * b
    };
    let closed_l2 = HBAR / (2.0 * m * gamma_s * omega_s * b.sqrt());
    let (mut lo, mut hi) = ((closed_l2 * 1e-3).ln(), (closed_l2 * 1e3).ln());
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = resonant_noise(x1.exp());
    let mut f2 = resonant_noise(x2.exp());
    while hi - lo > 1e-12 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = resonant_noise(x1.exp());
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = resonant_noise(x2.exp());
        }
    }
    let optimal_l_squared = (0.5 * (lo + hi)).exp();
    Ok(SqlReport {
        mode,
        noise_floor: resonant_noise(optimal_l_squared),
        optimal_l_squared,
        closed_form_floor: HBAR * m * gamma_s * omega_s * b.sqrt(),
        closed_form_l_squared: closed_l2,
        optimal_gamma_sc: gamma_s * omega_s * b.sqrt() / (4.0 * derived.omega0),
    })
}

/// Minimum detectable force and force gradient for a given force-equivalent
/// noise floor and integration time: force = sqrt(N / T); the gradient maps
/// the difference-mode force K_- = (K_2 - K_1)/sqrt(2) to a gradient over the
/// particle separation d, picking up a sqrt(2).
pub fn min_detectable_force(
    noise_floor: f64,
    integration_time: f64,
    separation: f64,
) -> (f64, f64) {
    let force = (noise_floor / integration_time).sqrt();
    (force, 2.0f64.sqrt() * force / separation)
}

/// Geometry of the oscillating-charge detection scenario: a single elementary
/// charge at distance `distance` from the trap midpoint, direction `angle`
/// from the trap axis, oscillating radially with amplitude `amplitude` at the
/// difference-mode frequency with quality factor `quality`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElectronGeometry {
    pub distance: f64,
    pub angle: f64,
    pub amplitude: f64,
    pub quality: f64,
}

/// Outcome of the oscillating-electron demo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElectronDemoReport {
    /// Fundamental Fourier amplitude of the difference-mode force (N).
    pub force_amplitude: f64,
    /// Lorentzian line model of the drive.
    pub line: ForceSpec,
    /// Resonant signal-to-noise ratio 2 pi S_KK(omega_-) / N_out(omega_-).
    pub snr: f64,
}

/// Resonant SNR for detecting a single elementary charge oscillating at the
/// difference-mode frequency.
///
/// Force model: the particles sit at (-d/2, 0) and (+d/2, 0); the charge sits
/// at r_e(t) = (R + a sin omega_- t)(cos angle, sin angle). The exact
/// point-charge Coulomb force along the measured axis is evaluated over one
/// oscillation period and its fundamental Fourier amplitude A_1 extracted
/// numerically (to first order in a/R this is the gradient-coupling
/// amplitude). The drive line is modelled as a Lorentzian centred at omega_-
/// with half width omega_-/(2 Q_f) and integrated power pi A_1^2 (a sinusoid
/// of amplitude A_1 has mean square A_1^2/2 = int S d omega / 2 pi).
pub fn electron_demo(
    config: &PhysicalConfig,
    derived: &DerivedParams,
    geometry: &ElectronGeometry,
    filter_minus: FilterModel,
) -> Result<ElectronDemoReport> {
    if !(geometry.distance > 0.0) || geometry.amplitude < 0.0 || !(geometry.quality > 0.0) {
        return Err(Error::GeometryInvalid(format!(
            "need distance > 0, amplitude >= 0, quality > 0; got {geometry:?}"
        )));
    }
    if geometry.distance < 2.0 * geometry.amplitude {
        return Err(Error::GeometryInvalid(format!(
            "oscillation amplitude {} m too large for distance {} m",
            geometry.amplitude, geometry.distance
        )));
    }
    if geometry.distance < 2.0 * config.focus_separation {
        return Err(Error::GeometryInvalid(format!(
            "charge distance {} m too close to the trap pair (separation {} m)",
            geometry.distance, config.focus_separation
        )));
    }
    let omega_minus = derived.omega_minus;
    let d = config.focus_separation;
    let (cos_t, sin_t) = (geometry.angle.cos(), geometry.angle.sin());
    let coulomb = |q: f64, x_p: f64, r_e: f64| {
        let (xe, ye) = (r_e * cos_t, r_e * sin_t);
        let (dx, dy) = (x_p - xe, -ye);
        let dist3 = (dx * dx + dy * dy).sqrt().powi(3);
        q * E_CHARGE * dx / (4.0 * std::f64::consts::PI * EPSILON_0 * dist3)
    };
    // Fundamental Fourier amplitude of K_-(t) over one drive period.
    let n = 2048;
    let (mut a1c, mut a1s) = (0.0, 0.0);
    for i in 0..n {
        let phase = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        let r_e = geometry.distance + geometry.amplitude * phase.sin();
        let k_minus = (coulomb(config.charge2, d / 2.0, r_e)
            - coulomb(config.charge1, -d / 2.0, r_e))
            / 2.0f64.sqrt();
        a1c += k_minus * phase.cos();
        a1s += k_minus * phase.sin();
    }
    let amp = 2.0 / n as f64 * (a1c * a1c + a1s * a1s).sqrt();
    let hwhm = omega_minus / (2.0 * geometry.quality);
    let line = ForceSpec::Lorentzian {
        weight: std::f64::consts::PI * amp * amp,
        center: omega_minus,
        hwhm,
    };
    let spectrum = ModeSpectrum::from_derived(derived, Mode::Minus, filter_minus);
    let noise = spectrum.noise_psd(omega_minus, Channel::OutLoop)?;
    let snr = 2.0 * std::f64::consts::PI * line.psd(omega_minus) / noise;
    Ok(ElectronDemoReport {
        force_amplitude: amp,
        line,
        snr,
    })
}

/// One PSD sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub omega_rad_s: f64,
    pub mode: Mode,
    pub channel: Channel,
    pub value_si: f64,
}

/// Frequency grid with per-channel, per-mode PSD values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpectrumTable {
    pub rows: Vec<SpectrumRow>,
}

impl SpectrumTable {
    /// Serialises to CSV with header `omega_rad_s,mode,channel,value_si`.
    /// Floats use Rust's shortest round-trip formatting, so output is
    /// byte-stable for identical inputs.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega_rad_s,mode,channel,value_si\n");
        for row in &self.rows {
            writeln!(
                out,
                "{:e},{},{},{:e}",
                row.omega_rad_s,
                row.mode.label(),
                row.channel.label(),
                row.value_si
            )
            .unwrap();
        }
        out
    }
}

/// Frequency grid that is linear inside [omega_s - 10 gamma, omega_s + 10
/// gamma] (resolving the mechanical line) and logarithmic outside, clipped to
/// [lo, hi]. Strictly increasing, deduplicated.
pub fn frequency_grid(lo: f64, hi: f64, omega_s: f64, gamma: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo, "grid requires 0 < lo < hi");
    let band_lo = (omega_s - 10.0 * gamma).max(lo);
    let band_hi = (omega_s + 10.0 * gamma).min(hi);
    let mut grid = Vec::with_capacity(3 * n);
    let log_span = |a: f64, b: f64, m: usize, grid: &mut Vec<f64>| {
        if b <= a || m == 0 {
            return;
        }
        let (la, lb) = (a.ln(), b.ln());
        for i in 0..=m {
            grid.push((la + (lb - la) * i as f64 / m as f64).exp());
        }
    };
    if band_hi > band_lo {
        log_span(lo, band_lo, n, &mut grid);
        for i in 0..=n {
            grid.push(band_lo + (band_hi - band_lo) * i as f64 / n as f64);
        }
        log_span(band_hi, hi, n, &mut grid);
    } else {
        log_span(lo, hi, 3 * n, &mut grid);
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup_by(|a, b| (*a - *b).abs() <= f64::EPSILON * a.abs());
    grid
}
