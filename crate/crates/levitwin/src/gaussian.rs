//! Conditional Gaussian state engine: closed-form stationary conditional
//! covariance, deterministic covariance ODE integration, and purity.
//!
//! States live in the normal-mode basis with component order
//! (x_+, p_+, x_-, p_-). The covariance dynamics follow the matrix Riccati
//! equation obtained from the Gaussian closure of the conditional moment
//! equations,
//!
//!   d sigma/dt = A sigma + sigma A^T + D - sigma M sigma,
//!
//! with harmonic drift A, momentum diffusion D = diag(0, hbar^2/4L^2 + 2 D_g,
//! 0, ...) and measurement back-action M = (eta/L^2) diag(1, 0, 1, 0).

use nalgebra::{Matrix4, Vector4};

use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::params::{DerivedParams, Mode};

/// Conditional (record-resolved) or unconditional (record-averaged) state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    Conditional,
    Unconditional,
}

/// SI units or dimensionless quadratures (vacuum variance 1/2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Si,
    Dimensionless,
}

/// First moments plus 4x4 symmetric covariance in (x_+, p_+, x_-, p_-) order.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceState {
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
    pub kind: StateKind,
    pub basis: Basis,
}

impl CovarianceState {
    /// Converts an SI-basis state to dimensionless quadratures via
    /// x_s = sqrt(hbar/(m omega_0)) X_s and p_s = sqrt(hbar m omega_0) P_s.
    /// The quadrature scale is always omega_0, not the mode frequency.
    pub fn to_dimensionless(&self, derived: &DerivedParams) -> CovarianceState {
        match self.basis {
            Basis::Dimensionless => self.clone(),
            Basis::Si => {
                let sx = (derived.mass * derived.omega0 / HBAR).sqrt();
                let sp = 1.0 / (HBAR * derived.mass * derived.omega0).sqrt();
                let scale = Matrix4::from_diagonal(&Vector4::new(sx, sp, sx, sp));
                CovarianceState {
                    mean: scale * self.mean,
                    cov: scale * self.cov * scale,
                    kind: self.kind,
                    basis: Basis::Dimensionless,
                }
            }
        }
    }

    /// Inverse of [`CovarianceState::to_dimensionless`].
    pub fn to_si(&self, derived: &DerivedParams) -> CovarianceState {
        match self.basis {
            Basis::Si => self.clone(),
            Basis::Dimensionless => {
                let sx = (HBAR / (derived.mass * derived.omega0)).sqrt();
                let sp = (HBAR * derived.mass * derived.omega0).sqrt();
                let scale = Matrix4::from_diagonal(&Vector4::new(sx, sp, sx, sp));
                CovarianceState {
                    mean: scale * self.mean,
                    cov: scale * self.cov * scale,
                    kind: self.kind,
                    basis: Basis::Si,
                }
            }
        }
    }

    /// Per-mode 2x2 covariance block.
    pub fn mode_block(&self, mode: Mode) -> nalgebra::Matrix2<f64> {
        let o = match mode {
            Mode::Plus => 0,
            Mode::Minus => 2,
        };
        nalgebra::Matrix2::new(
            self.cov[(o, o)],
            self.cov[(o, o + 1)],
            self.cov[(o + 1, o)],
            self.cov[(o + 1, o + 1)],
        )
    }

    /// Maximum relative asymmetry of the covariance matrix.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.cov.abs().max();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..4 {
            for j in 0..4 {
                worst = worst.max((self.cov[(i, j)] - self.cov[(j, i)]).abs());
            }
        }
        worst / scale
    }

    /// Symplectic spectrum of the covariance itself (no partial transpose),
    /// sorted ascending. Physical states have every value >= 1/2 in the
    /// dimensionless basis.
    pub fn symplectic_spectrum(&self) -> [f64; 2] {
        symplectic_spectrum(&self.cov)
    }

    /// Checks sigma + (i/2) Omega >= 0 via the symplectic spectrum; the state
    /// must be in the dimensionless basis.
    pub fn check_physical(&self, tol: f64) -> Result<()> {
        debug_assert_eq!(self.basis, Basis::Dimensionless);
        let [nu_min, _] = self.symplectic_spectrum();
        if nu_min < 0.5 - tol {
            return Err(Error::NonPhysicalState { min_eig: nu_min });
        }
        Ok(())
    }
}

/// Symplectic form Omega in (x_+, p_+, x_-, p_-) order.
pub fn symplectic_form() -> Matrix4<f64> {
    Matrix4::new(
        0.0, 1.0, 0.0, 0.0, //
        -1.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        0.0, 0.0, -1.0, 0.0,
    )
}

/// Symplectic eigenvalues of a symmetric positive-semidefinite 4x4
/// covariance, sorted ascending. Computed as the singular values of the
/// antisymmetric matrix sigma^{1/2} Omega sigma^{1/2}, which avoids the
/// non-symmetric eigensolver (it can stall on badly scaled Omega sigma).
pub fn symplectic_spectrum(cov: &Matrix4<f64>) -> [f64; 2] {
    let sym = nalgebra::SymmetricEigen::new(*cov);
    let sqrt_vals = sym.eigenvalues.map(|l| l.max(0.0).sqrt());
    let root =
        &sym.eigenvectors * Matrix4::from_diagonal(&sqrt_vals) * sym.eigenvectors.transpose();
    let k = root * symplectic_form() * root;
    let mut s: Vec<f64> = k.singular_values().iter().copied().collect();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // Singular values of an antisymmetric matrix come in equal pairs:
    // (nu1, nu1, nu2, nu2) after ascending sort.
    [0.5 * (s[0] + s[1]), 0.5 * (s[2] + s[3])]
}

/// Squeezing parameter zeta_s^2 of the stationary conditional state,
/// sqrt(1 + eta (hbar^2 + 8 D_g L^2) / (4 m^2 L^4 omega_s^4)) - 1.
pub fn zeta_squared(derived: &DerivedParams, omega_s: f64) -> f64 {
    let l2 = derived.l_squared;
    let m = derived.mass;
    let eta = derived.eta_total();
    let x = eta * (HBAR * HBAR + 8.0 * derived.gas_diffusion * l2)
        / (4.0 * m * m * l2 * l2 * omega_s.powi(4));
    // sqrt(1 + x) - 1 written without cancellation for small x.
    x / ((1.0 + x).sqrt() + 1.0)
}

/// Closed-form stationary conditional covariance (SI basis, zero means).
///
/// Block diagonal in the sum/difference modes; independent of the applied
/// feedback and of external forces by construction.
pub fn stationary_conditional_covariance(derived: &DerivedParams) -> Result<CovarianceState> {
    let eta = derived.eta_total();
    if eta <= 0.0 {
        return Err(Error::InvalidConfig(
            "stationary conditional covariance requires eta_in + eta_out > 0".to_string(),
        ));
    }
    let mut cov = Matrix4::zeros();
    for (offset, omega_s) in [(0, derived.omega_plus), (2, derived.omega_minus)] {
        let z2 = zeta_squared(derived, omega_s);
        let z = z2.sqrt();
        let l2 = derived.l_squared;
        let m = derived.mass;
        let v_x = 2.0f64.sqrt() * l2 * omega_s * z / eta;
        let c_xp = m * l2 * omega_s * omega_s * z2 / eta;
        let v_p = m * m * omega_s * omega_s * v_x * (1.0 + z2);
        cov[(offset, offset)] = v_x;
        cov[(offset, offset + 1)] = c_xp;
        cov[(offset + 1, offset)] = c_xp;
        cov[(offset + 1, offset + 1)] = v_p;
    }
    Ok(CovarianceState {
        mean: Vector4::zeros(),
        cov,
        kind: StateKind::Conditional,
        basis: Basis::Si,
    })
}

/// Right-hand side of the deterministic covariance equation (SI basis).
pub fn covariance_rhs(derived: &DerivedParams, cov: &Matrix4<f64>) -> Matrix4<f64> {
    let (drift, diffusion, backaction) = riccati_matrices(derived);
    drift * cov + cov * drift.transpose() + diffusion - cov * backaction * cov
}

/// The (A, D, M) matrices of the covariance Riccati equation.
pub fn riccati_matrices(derived: &DerivedParams) -> (Matrix4<f64>, Matrix4<f64>, Matrix4<f64>) {
    let m = derived.mass;
    let mut drift = Matrix4::zeros();
    for (offset, omega_s) in [(0, derived.omega_plus), (2, derived.omega_minus)] {
        drift[(offset, offset + 1)] = 1.0 / m;
        drift[(offset + 1, offset)] = -m * omega_s * omega_s;
    }
    let momentum_diffusion =
        HBAR * HBAR / (4.0 * derived.l_squared) + 2.0 * derived.gas_diffusion;
    let diffusion = Matrix4::from_diagonal(&Vector4::new(
        0.0,
        momentum_diffusion,
        0.0,
        momentum_diffusion,
    ));
    let k = derived.eta_total() / derived.l_squared;
    let backaction = Matrix4::from_diagonal(&Vector4::new(k, 0.0, k, 0.0));
    (drift, diffusion, backaction)
}

/// Normalisation scale for stationarity residuals: the largest magnitude among
/// the individual Riccati terms.
pub fn covariance_rhs_scale(derived: &DerivedParams, cov: &Matrix4<f64>) -> f64 {
    let (drift, diffusion, backaction) = riccati_matrices(derived);
    let a = (drift * cov).abs().max();
    let d = diffusion.abs().max();
    let n = (cov * backaction * cov).abs().max();
    a.max(d).max(n)
}

/// Maximum step size accepted by the fixed-step integrator.
pub fn max_ode_step(derived: &DerivedParams) -> f64 {
    2.0 * std::f64::consts::PI / (100.0 * derived.omega_plus.max(derived.omega_minus))
}

/// Relaxation-time estimate for convergence checks, 10/(eta omega_< zeta_<).
pub fn relaxation_time(derived: &DerivedParams) -> f64 {
    let omega_lt = derived.omega_plus.min(derived.omega_minus);
    let zeta = zeta_squared(derived, omega_lt).sqrt();
    10.0 / (derived.eta_total() * omega_lt * zeta)
}

/// Integrates the deterministic covariance ODE with a fixed-step classical
/// 4th-order scheme. Returns the sampled trajectory including the initial
/// state; `stride` controls output decimation (1 keeps every step).
pub fn integrate_covariance_ode(
    initial: &CovarianceState,
    derived: &DerivedParams,
    t_end: f64,
    dt: f64,
    stride: usize,
) -> Result<Vec<(f64, CovarianceState)>> {
    debug_assert_eq!(initial.basis, Basis::Si);
    let bound = max_ode_step(derived);
    if dt > bound {
        return Err(Error::StepTooLarge { dt, bound });
    }
    let steps = (t_end / dt).ceil() as usize;
    let stride = stride.max(1);
    let mut cov = initial.cov;
    let mut out = Vec::with_capacity(steps / stride + 2);
    let snapshot = |t: f64, cov: Matrix4<f64>| {
        (
            t,
            CovarianceState {
                mean: initial.mean,
                cov,
                kind: StateKind::Conditional,
                basis: Basis::Si,
            },
        )
    };
    out.push(snapshot(0.0, cov));
    for n in 0..steps {
        // Advance one grid step. Far from equilibrium the Riccati damping term
        // sigma M sigma can be much faster than the mechanical frequencies
        // (e.g. a room-temperature initial state collapses at rate
        // eta sigma_xx / L^2), so each grid step is internally subdivided to
        // keep the relative change per sub-step small. The subdivision is a
        // deterministic function of the state, and in the mild regime a single
        // sub-step of size dt is taken, recovering the plain fixed-step scheme.
        let mut t_loc = 0.0;
        while t_loc < dt {
            let k1 = covariance_rhs(derived, &cov);
            let mut rate = 0.0f64;
            for i in 0..4 {
                if cov[(i, i)] <= 0.0 {
                    return Err(Error::NonPhysicalState { min_eig: 0.0 });
                }
                rate = rate.max(k1[(i, i)].abs() / cov[(i, i)]);
            }
            let remaining = dt - t_loc;
            let h = if rate * remaining > 0.1 {
                0.1 / rate
            } else {
                remaining
            };
            let k2 = covariance_rhs(derived, &(cov + k1 * (h / 2.0)));
            let k3 = covariance_rhs(derived, &(cov + k2 * (h / 2.0)));
            let k4 = covariance_rhs(derived, &(cov + k3 * h));
            cov += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            // Re-symmetrise to keep round-off from accumulating.
            cov = (cov + cov.transpose()) * 0.5;
            t_loc += h;
        }
        if n % 128 == 0 || n + 1 == steps {
            let state = snapshot((n + 1) as f64 * dt, cov);
            state
                .1
                .to_dimensionless(derived)
                .check_physical(1e-6)?;
        }
        if (n + 1) % stride == 0 {
            out.push(snapshot((n + 1) as f64 * dt, cov));
        }
    }
    Ok(out)
}

/// Purity of a conditional Gaussian state in the dimensionless basis,
/// 1 / (4 sqrt(det sigma_+ det sigma_-)).
pub fn conditional_purity(state: &CovarianceState) -> f64 {
    debug_assert_eq!(state.basis, Basis::Dimensionless);
    debug_assert_eq!(state.kind, StateKind::Conditional);
    let det_plus = state.mode_block(Mode::Plus).determinant();
    let det_minus = state.mode_block(Mode::Minus).determinant();
    1.0 / (4.0 * (det_plus * det_minus).sqrt())
}

/// Dimensionless stationary conditional covariance from the closed-form
/// expressions in (eta_eff, Gamma) variables; used as an algebraic cross-check
/// of the SI route. Valid for eta_out = 0, where eta_eff = eta_in
/// Gamma_sc / Gamma; with eta_out > 0 the same forms hold with the combined
/// efficiency (eta_in + eta_out) Gamma_sc / Gamma.
pub fn conditional_covariance_dimensionless(derived: &DerivedParams) -> CovarianceState {
    let eta_eff = derived.eta_total() * derived.gamma_sc / derived.heating_rate;
    let gamma = derived.heating_rate;
    let omega0 = derived.omega0;
    let mut cov = Matrix4::zeros();
    for (offset, omega_s) in [(0, derived.omega_plus), (2, derived.omega_minus)] {
        let shift = 16.0 * eta_eff * omega0 * omega0 * gamma * gamma;
        let root = (omega_s.powi(4) + shift).sqrt();
        // sqrt(root - omega_s^2) written without cancellation for small Gamma.
        let v_x =
            (shift / (root + omega_s * omega_s)).sqrt() / (4.0 * 2.0f64.sqrt() * eta_eff * gamma);
        let v_p = omega_s * omega_s / (omega0 * omega0) * v_x
            + 32.0 * eta_eff * eta_eff * gamma * gamma / (omega0 * omega0) * v_x.powi(3);
        let c_xp = 4.0 * eta_eff * gamma / omega0 * v_x * v_x;
        cov[(offset, offset)] = v_x;
        cov[(offset, offset + 1)] = c_xp;
        cov[(offset + 1, offset)] = c_xp;
        cov[(offset + 1, offset + 1)] = v_p;
    }
    CovarianceState {
        mean: Vector4::zeros(),
        cov,
        kind: StateKind::Conditional,
        basis: Basis::Dimensionless,
    }
}
