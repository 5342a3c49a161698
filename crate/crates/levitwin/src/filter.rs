//! Feedback-filter transfer functions.
//!
//! Cold damping applies a force F_s(t) = -m gamma_s (h_s * dy_s)(t) built from
//! the in-loop record. In frequency space the loop response is
//! sqrt(2 pi) H_s(omega) = g_s(omega) - i omega f_s(omega), with f and g real
//! and even. The shipped family is a single-pole low-pass velocity filter,
//!
//!   f_s(omega) = (W^2 + omega_s^2) / (W^2 + omega^2),   g_s = 0,
//!
//! with shape parameter W. It is normalised so that f_s(omega_s) = 1: on
//! resonance the feedback acts as pure damping at rate gamma_s. Its effective
//! noise bandwidth is Omega_s = (W^2 + omega_s^2)^2 / (2 W^3), minimised at
//! W = sqrt(3) omega_s where Omega_s = 8 omega_s / (3 sqrt 3).

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Frequency response of a feedback loop; f and g are real and even.
pub trait FeedbackResponse {
    /// Velocity-quadrature (damping) response f(omega).
    fn f(&self, omega: f64) -> f64;

    /// Position-quadrature (spring) response g(omega).
    fn g(&self, omega: f64) -> f64;

    /// sqrt(2 pi) H(omega) = g(omega) - i omega f(omega).
    fn transfer(&self, omega: f64) -> Complex64 {
        Complex64::new(self.g(omega), -omega * self.f(omega))
    }
}

/// Single-pole low-pass velocity filter for one mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterModel {
    /// Mode frequency the filter is tuned to (rad/s).
    pub omega_s: f64,
    /// Feedback damping rate gamma_s (rad/s).
    pub gamma: f64,
    /// Low-pass shape parameter W (rad/s).
    pub shape_omega: f64,
}

impl FilterModel {
    /// Builds a filter from its shape parameter directly.
    pub fn from_shape(omega_s: f64, gamma: f64, shape_omega: f64) -> Result<Self> {
        if !(omega_s > 0.0) || !(shape_omega > 0.0) || !(gamma >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "filter requires omega_s > 0, shape > 0, gamma >= 0; \
                 got {omega_s}, {shape_omega}, {gamma}"
            )));
        }
        Ok(Self {
            omega_s,
            gamma,
            shape_omega,
        })
    }

    /// Smallest noise bandwidth the family can realise at this mode frequency,
    /// 8 omega_s / (3 sqrt 3).
    pub fn min_bandwidth(omega_s: f64) -> f64 {
        8.0 * omega_s / (3.0 * 3.0f64.sqrt())
    }

    /// Builds a filter with the requested noise bandwidth Omega_s, choosing
    /// the broadband branch W >= sqrt(3) omega_s. Bandwidths below the family
    /// minimum are unreachable.
    pub fn from_bandwidth(omega_s: f64, gamma: f64, bandwidth: f64) -> Result<Self> {
        let minimum = Self::min_bandwidth(omega_s);
        if bandwidth < minimum * (1.0 - 1e-12) {
            return Err(Error::BandwidthUnreachable {
                requested: bandwidth,
                minimum,
            });
        }
        // Omega(W) is increasing on the broadband branch and Omega(W) > W/2,
        // so the root lies in [sqrt(3) omega_s, 2 Omega_s].
        let mut lo = 3.0f64.sqrt() * omega_s;
        let mut hi = 2.0 * bandwidth + lo;
        let target = |w: f64| (w * w + omega_s * omega_s).powi(2) / (2.0 * w.powi(3)) - bandwidth;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if target(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Self::from_shape(omega_s, gamma, 0.5 * (lo + hi))
    }

    /// Noise bandwidth Omega_s = (W^2 + omega_s^2)^2 / (2 W^3).
    pub fn bandwidth(&self) -> f64 {
        let w = self.shape_omega;
        (w * w + self.omega_s * self.omega_s).powi(2) / (2.0 * w.powi(3))
    }
}

impl FeedbackResponse for FilterModel {
    fn f(&self, omega: f64) -> f64 {
        let w2 = self.shape_omega * self.shape_omega;
        (w2 + self.omega_s * self.omega_s) / (w2 + omega * omega)
    }

    fn g(&self, _omega: f64) -> f64 {
        0.0
    }
}
