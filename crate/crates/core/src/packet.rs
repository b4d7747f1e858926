//! The Gaussian packet ψ(x, τ) = N(τ)·exp(−ω(τ)x²/2 + b(τ)x) built from an
//! auxiliary trajectory u(τ).
//!
//! ω = −iM·u̇/u, b = b(0)/u, and N follows from the x⁰ terms of the
//! Schrödinger equation: Ṅ/N = −i(ω − b²)/(2M). Along any admissible
//! trajectory the Poisson parameter λ = 2|b|²/(ω + ω*) collapses to the
//! constant 2|b(0)|²/W₀, because |u|² cancels between |b|² and the width.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::classical::{AuxiliaryTrajectory, U_BREAKDOWN};
use crate::error::{Error, Result};
use crate::ode::{integrate_complex, OdeOptions};
use crate::quadrature::GaussHermite;

/// Relative tolerance on Re(i·W0) / Im(i·W0) when classifying the Wronskian.
const WRONSKIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketConfig {
    /// Initial linear coefficient b(0).
    pub b0: Complex64,
    /// Phase of N(τ₀); its magnitude is fixed by normalization.
    pub n0_phase: f64,
}

impl Default for PacketConfig {
    fn default() -> Self {
        Self {
            b0: Complex64::new(1.0, 0.0),
            n0_phase: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketState {
    pub tau: f64,
    pub omega: Complex64,
    pub b: Complex64,
    pub norm_factor: Complex64,
    /// (Δx)² = 1/(ω + ω*).
    pub width: f64,
    pub lambda: f64,
}

/// ω = −i·M·u̇/u.
pub fn omega_from_u(mass: f64, u: Complex64, du: Complex64) -> Result<Complex64> {
    if u.norm() < U_BREAKDOWN {
        return Err(Error::DivisionByZeroU { modulus: u.norm() });
    }
    Ok(-Complex64::i() * mass * du / u)
}

/// b(τ) = b(0)/u(τ); assumes u(τ₀) = 1.
pub fn b_of_tau(b0: Complex64, u: Complex64) -> Result<Complex64> {
    if u.norm() < U_BREAKDOWN {
        return Err(Error::DivisionByZeroU { modulus: u.norm() });
    }
    Ok(b0 / u)
}

fn require_normalizable(omega: Complex64) -> Result<()> {
    if omega.re > 0.0 && omega.re.is_finite() {
        Ok(())
    } else {
        Err(Error::NonNormalizable { re_omega: omega.re })
    }
}

/// (Δx)² = 1/(ω + ω*).
pub fn width(omega: Complex64) -> Result<f64> {
    require_normalizable(omega)?;
    Ok(1.0 / (2.0 * omega.re))
}

/// λ = 2|b|²/(ω + ω*), evaluated from the raw coefficients.
pub fn lambda_of_tau(b: Complex64, omega: Complex64) -> Result<f64> {
    require_normalizable(omega)?;
    Ok(b.norm_sqr() / omega.re)
}

/// W₀ = i·W(0), or an error unless it is real and positive.
pub fn positive_wronskian(w0: Complex64) -> Result<f64> {
    let rotated = Complex64::i() * w0;
    let scale = w0.norm();
    if !(rotated.re > WRONSKIAN_TOL * scale.max(f64::MIN_POSITIVE)) || rotated.im.abs() > WRONSKIAN_TOL * scale {
        return Err(Error::InadmissibleWronskian { re: w0.re, im: w0.im });
    }
    Ok(rotated.re)
}

/// λ₀ = 2|b(0)|²/W₀ with W(0) = −iW₀.
pub fn lambda0(b0: Complex64, w0: Complex64) -> Result<f64> {
    let w = positive_wronskian(w0)?;
    Ok(2.0 * b0.norm_sqr() / w)
}

/// |N| fixed by ∫|ψ|² dx = 1: |N|² = √(Re ω/π)·exp(−(Re b)²/Re ω).
pub fn normalization_modulus(omega: Complex64, b: Complex64) -> Result<f64> {
    require_normalizable(omega)?;
    let a = omega.re;
    Ok(((a / std::f64::consts::PI).sqrt() * (-(b.re * b.re) / a).exp()).sqrt())
}

/// Integrates ln N along the trajectory's grid together with (u, u̇), and
/// returns N at every grid point.
pub fn evolve_normalization(
    traj: &AuxiliaryTrajectory,
    cfg: &PacketConfig,
    opts: &OdeOptions,
) -> Result<Vec<Complex64>> {
    positive_wronskian(traj.w0)?;
    let model = traj.model;
    let tau0 = traj.tau[0];
    let omega0 = omega_from_u(model.mass(tau0), traj.u[0], traj.du[0])?;
    let b_start = b_of_tau(cfg.b0, traj.u[0])?;
    let log_n0 = Complex64::new(normalization_modulus(omega0, b_start)?.ln(), cfg.n0_phase);
    let b0 = cfg.b0;

    let sol = integrate_complex(
        |t, y, dy| {
            let m = model.mass(t);
            let (u, du) = (y[0], y[1]);
            let omega = -Complex64::i() * m * du / u;
            let b = b0 / u;
            dy[0] = du;
            dy[1] = -model.gamma(t) * du - u;
            dy[2] = -Complex64::i() * (omega - b * b) / (2.0 * m);
        },
        &[traj.u[0], traj.du[0], log_n0],
        &traj.tau,
        opts,
    )?;
    Ok(sol.y.iter().map(|row| row[2].exp()).collect())
}

/// Builds the packet at every grid point of an admissible trajectory.
pub fn build_packet(traj: &AuxiliaryTrajectory, cfg: &PacketConfig, opts: &OdeOptions) -> Result<Vec<PacketState>> {
    let norms = evolve_normalization(traj, cfg, opts)?;
    (0..traj.len())
        .map(|i| {
            let tau = traj.tau[i];
            let omega = omega_from_u(traj.model.mass(tau), traj.u[i], traj.du[i])?;
            let b = b_of_tau(cfg.b0, traj.u[i])?;
            Ok(PacketState {
                tau,
                omega,
                b,
                norm_factor: norms[i],
                width: width(omega)?,
                lambda: lambda_of_tau(b, omega)?,
            })
        })
        .collect()
}

impl PacketState {
    /// Packet at τ with |N| from the closed normalization formula and phase `phase`.
    pub fn from_coefficients(tau: f64, omega: Complex64, b: Complex64, phase: f64) -> Result<Self> {
        let modulus = normalization_modulus(omega, b)?;
        Ok(Self {
            tau,
            omega,
            b,
            norm_factor: Complex64::from_polar(modulus, phase),
            width: width(omega)?,
            lambda: lambda_of_tau(b, omega)?,
        })
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        self.norm_factor * (-0.5 * self.omega * x * x + self.b * x).exp()
    }

    /// Peak of |ψ|², at 2·(Δx)²·Re(b).
    pub fn center(&self) -> f64 {
        2.0 * self.width * self.b.re
    }

    /// Distance from the origin beyond which |ψ| stays below `amplitude`.
    pub fn half_extent(&self, amplitude: f64) -> f64 {
        let peak = (2.0 * std::f64::consts::PI * self.width).powf(-0.25);
        let ratio = (peak / amplitude).ln().max(0.0);
        self.center().abs() + 2.0 * self.width.sqrt() * ratio.sqrt()
    }

    /// ∫|ψ|² dx by Gauss–Hermite quadrature after y = √(Re ω)·x.
    pub fn quadrature_norm(&self) -> f64 {
        let s = self.omega.re.sqrt();
        let shift = 2.0 * self.b.re / s;
        static RULE: OnceLock<GaussHermite> = OnceLock::new();
        let rule = RULE.get_or_init(|| GaussHermite::new(96));
        let integral: f64 = rule.integrate(|y| (shift * y).exp());
        self.norm_factor.norm_sqr() * integral / s
    }
}

/// Smallest symmetric box half-width holding every state below `amplitude`
/// at its edges.
pub fn required_half_width(states: &[PacketState], amplitude: f64) -> f64 {
    states.iter().map(|s| s.half_extent(amplitude)).fold(0.0, f64::max)
}

/// Admissibility diagnostics for an auxiliary trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    /// W₀ = i·W(0).
    pub w0_positive_part: f64,
    /// Sharp criterion: i·W(0) real and positive.
    pub wronskian_admissible: bool,
    pub min_re_omega: f64,
    /// Re ω > 0 at every grid point.
    pub omega_admissible: bool,
    /// Grid points where u is (numerically) real or pure imaginary.
    pub heuristic_violations: usize,
    /// The heuristic "u neither real nor pure imaginary" holds at every grid point.
    pub heuristic_admissible: bool,
    /// The sharp criterion and the Re ω check agree.
    pub consistent: bool,
    pub admissible: bool,
}

pub fn check_admissibility(traj: &AuxiliaryTrajectory) -> AdmissibilityReport {
    let w0_positive_part = (Complex64::i() * traj.w0).re;
    let wronskian_admissible = positive_wronskian(traj.w0).is_ok();
    let mut min_re_omega = f64::INFINITY;
    let mut heuristic_violations = 0;
    for i in 0..traj.len() {
        let u = traj.u[i];
        let re_omega = match omega_from_u(traj.model.mass(traj.tau[i]), u, traj.du[i]) {
            Ok(w) => w.re,
            Err(_) => f64::NAN,
        };
        min_re_omega = if re_omega.is_nan() {
            f64::NAN
        } else {
            min_re_omega.min(re_omega)
        };
        let tiny = 1e-12 * u.norm();
        if u.re.abs() <= tiny || u.im.abs() <= tiny {
            heuristic_violations += 1;
        }
    }
    // Re ω = M·Im(u̇u*)/|u|² = W₀/(2|u|²): flat zero means u, u* are dependent.
    let omega_admissible = min_re_omega > 0.0;
    let consistent = wronskian_admissible == omega_admissible;
    AdmissibilityReport {
        w0_positive_part,
        wronskian_admissible,
        min_re_omega,
        omega_admissible,
        heuristic_violations,
        heuristic_admissible: heuristic_violations == 0,
        consistent,
        admissible: wronskian_admissible && omega_admissible,
    }
}
