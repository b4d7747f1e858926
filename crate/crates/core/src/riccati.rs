//! Gaussian packets Ψ = N·exp(i[y·x̃² + ⟨p⟩x̃/ħ]) for the frequency-modulated
//! oscillator, with x̃ = x − η. The complex Riccati coefficient y comes from
//! an Ermakov amplitude α via 2ħy/m = α̇/α + i/α², and η follows Newton's
//! equation η̈ + w²η = 0.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::classical::{effective_frequency, solve_ermakov, solve_newton, AuxiliaryTrajectory, RealTrajectory};
use crate::error::{Error, Result};
use crate::fd::{central_derivative, uniform_spacing};
use crate::mass::MassModel;
use crate::ode::OdeOptions;
use crate::packet::positive_wronskian;
use crate::pde::{Grid, GridWavefunction, PacketEvaluator};

/// Tolerance for matching a requested snapshot time against sampled times.
const TIME_MATCH: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub m: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self { hbar: 1.0, m: 1.0 }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.hbar > 0.0 && self.hbar.is_finite() && self.m > 0.0 && self.m.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "ħ and m must be positive, got ħ = {}, m = {}",
                self.hbar, self.m
            )));
        }
        Ok(())
    }

    fn is_unit(&self) -> bool {
        self.hbar == 1.0 && self.m == 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiccatiState {
    pub t: f64,
    pub y: Complex64,
    pub alpha: f64,
    pub dalpha: f64,
    pub eta: f64,
    pub deta: f64,
    /// ⟨p⟩ = m·η̇.
    pub p: f64,
}

/// y = (m/2ħ)(α̇/α + i/α²).
pub fn y_from_alpha(alpha: f64, dalpha: f64, consts: &PhysicalConstants) -> Result<Complex64> {
    if !(alpha > 0.0) {
        return Err(Error::ErmakovSingularity { t: f64::NAN });
    }
    let k = consts.m / (2.0 * consts.hbar);
    Ok(Complex64::new(k * dalpha / alpha, k / (alpha * alpha)))
}

/// Max over interior points of |(2ħ/m)ẏ + ((2ħ/m)y)² + w²| with ẏ from
/// central differences on the uniform grid `t`.
pub fn riccati_residual(
    t: &[f64],
    y: &[Complex64],
    w2: &dyn Fn(f64) -> f64,
    consts: &PhysicalConstants,
) -> Result<f64> {
    if t.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "{} times but {} samples",
            t.len(),
            y.len()
        )));
    }
    if t.len() < 3 {
        return Err(Error::GridTooCoarse {
            needed: 3,
            got: t.len(),
        });
    }
    let h = uniform_spacing(t)?;
    let (off, dy) = central_derivative(y, h)?;
    let k = 2.0 * consts.hbar / consts.m;
    Ok(dy
        .iter()
        .enumerate()
        .map(|(j, d)| {
            let i = off + j;
            let ky = k * y[i];
            (k * d + ky * ky + w2(t[i])).norm()
        })
        .fold(0.0, f64::max))
}

/// I = ½[(η̇α − ηα̇)² + (η/α)²].
pub fn ermakov_lewis_invariant(alpha: f64, dalpha: f64, eta: f64, deta: f64) -> f64 {
    let a = deta * alpha - eta * dalpha;
    let b = eta / alpha;
    0.5 * (a * a + b * b)
}

impl RiccatiState {
    pub fn new(t: f64, alpha: f64, dalpha: f64, eta: f64, deta: f64, consts: &PhysicalConstants) -> Result<Self> {
        let y = y_from_alpha(alpha, dalpha, consts).map_err(|_| Error::ErmakovSingularity { t })?;
        Ok(Self {
            t,
            y,
            alpha,
            dalpha,
            eta,
            deta,
            p: consts.m * deta,
        })
    }

    /// Density variance ħα²/(2m) = 1/(4y_I).
    pub fn variance(&self) -> f64 {
        0.25 / self.y.im
    }

    /// Distance from the origin beyond which |Ψ| stays below `amplitude`.
    pub fn half_extent(&self, amplitude: f64) -> f64 {
        let peak = (2.0 * self.y.im / std::f64::consts::PI).powf(0.25);
        self.eta.abs() + ((peak / amplitude).ln().max(0.0) / self.y.im).sqrt()
    }

    pub fn invariant(&self) -> f64 {
        ermakov_lewis_invariant(self.alpha, self.dalpha, self.eta, self.deta)
    }

    /// Ψ(x) with real positive N and K = 0.
    pub fn eval(&self, x: f64, consts: &PhysicalConstants) -> Result<Complex64> {
        if !(self.y.im > 0.0) {
            return Err(Error::NonNormalizable { re_omega: self.y.im });
        }
        let n = (2.0 * self.y.im / std::f64::consts::PI).powf(0.25);
        let xt = x - self.eta;
        Ok(n * (Complex64::i() * (self.y * xt * xt + self.p * xt / consts.hbar)).exp())
    }

    pub fn snapshot(&self, grid: &Grid, consts: &PhysicalConstants) -> Result<GridWavefunction> {
        let psi = grid
            .points()
            .map(|x| self.eval(x, consts))
            .collect::<Result<Vec<_>>>()?;
        Ok(GridWavefunction {
            grid: *grid,
            psi,
            t: self.t,
        })
    }
}

/// Zips Ermakov and Newton trajectories sampled on the same grid.
pub fn riccati_states(
    alpha: &RealTrajectory,
    eta: &RealTrajectory,
    consts: &PhysicalConstants,
) -> Result<Vec<RiccatiState>> {
    consts.validate()?;
    if alpha.t != eta.t {
        return Err(Error::InvalidInput(
            "α and η trajectories use different time grids".into(),
        ));
    }
    alpha
        .t
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            RiccatiState::new(
                t,
                alpha.value[i],
                alpha.derivative[i],
                eta.value[i],
                eta.derivative[i],
                consts,
            )
        })
        .collect()
}

/// One grid snapshot per state.
pub fn build_wp(states: &[RiccatiState], grid: &Grid, consts: &PhysicalConstants) -> Result<Vec<GridWavefunction>> {
    states.iter().map(|s| s.snapshot(grid, consts)).collect()
}

/// Initial data for the mass-model bridge. (η₀, η̇₀) refer to the
/// q = √M·x frame in which the dynamics is a pure frequency modulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeConfig {
    pub u0: Complex64,
    pub du0: Complex64,
    pub eta0: f64,
    pub deta0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WpFamily {
    pub model: MassModel,
    pub consts: PhysicalConstants,
    pub alpha: RealTrajectory,
    pub eta: RealTrajectory,
    pub states: Vec<RiccatiState>,
}

impl WpFamily {
    pub fn state_at(&self, t: f64) -> Result<&RiccatiState> {
        self.states
            .iter()
            .find(|s| (s.t - t).abs() <= TIME_MATCH)
            .ok_or_else(|| Error::InvalidInput(format!("no Riccati state sampled at t = {t}")))
    }

    /// Max relative spread of the Ermakov–Lewis invariant.
    pub fn invariant_drift(&self) -> f64 {
        relative_drift(self.states.iter().map(RiccatiState::invariant))
    }

    /// Width of the packet mapped back to the x frame: ħα²/(2m)/M(τ).
    pub fn x_frame_width(&self, i: usize) -> f64 {
        let s = &self.states[i];
        s.variance() / self.model.mass(s.t)
    }

    pub fn riccati_residual(&self) -> Result<f64> {
        let t: Vec<f64> = self.states.iter().map(|s| s.t).collect();
        let y: Vec<Complex64> = self.states.iter().map(|s| s.y).collect();
        riccati_residual(&t, &y, &effective_frequency(self.model), &self.consts)
    }
}

impl PacketEvaluator for WpFamily {
    fn snapshot(&self, t: f64, grid: &Grid) -> Result<GridWavefunction> {
        self.state_at(t)?.snapshot(grid, &self.consts)
    }
}

pub(crate) fn relative_drift(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let Some(&first) = v.first() else { return 0.0 };
    let spread = v.iter().map(|x| (x - first).abs()).fold(0.0, f64::max);
    if first.abs() > 0.0 {
        spread / first.abs()
    } else {
        spread
    }
}

/// Ermakov data (α₀, α̇₀) equivalent to the auxiliary initial data (u₀, u̇₀)
/// through q = √M·u.
pub fn alpha_from_u(model: &MassModel, tau0: f64, u0: Complex64, du0: Complex64) -> Result<(f64, f64)> {
    let s = model.eval(tau0);
    let one = Complex64::new(1.0, 0.0);
    let w0 = positive_wronskian(s.mass * crate::classical::wronskian(one, du0 / u0))?;
    let root_m = s.mass.sqrt();
    // u is rescaled to u(τ₀) = 1 by the classical solver.
    let q0 = Complex64::new(root_m, 0.0);
    let dq0 = root_m * (0.5 * s.gamma + du0 / u0);
    let wq = 0.5 * w0;
    let q_abs = q0.norm();
    let alpha0 = q_abs / wq.sqrt();
    let dalpha0 = (q0.conj() * dq0).re / (q_abs * wq.sqrt());
    Ok((alpha0, dalpha0))
}

/// Riccati packet family equivalent to the auxiliary trajectory started from
/// (u₀, u̇₀) under `model`. Only ħ = m = 1 is meaningful here.
pub fn wp_from_mass_model(
    model: MassModel,
    cfg: &BridgeConfig,
    samples: &[f64],
    consts: &PhysicalConstants,
    opts: &OdeOptions,
) -> Result<WpFamily> {
    model.validate()?;
    consts.validate()?;
    if !consts.is_unit() {
        return Err(Error::InvalidInput(
            "the mass-model bridge is defined for ħ = m = 1".into(),
        ));
    }
    let tau0 = *samples
        .first()
        .ok_or_else(|| Error::InvalidInput("no sample times".into()))?;
    if cfg.u0.norm() < crate::classical::U_BREAKDOWN {
        return Err(Error::DivisionByZeroU { modulus: cfg.u0.norm() });
    }
    let (alpha0, dalpha0) = alpha_from_u(&model, tau0, cfg.u0, cfg.du0)?;
    let w2 = effective_frequency(model);
    let alpha = solve_ermakov(&w2, alpha0, dalpha0, samples, opts)?;
    let eta = solve_newton(&w2, cfg.eta0, cfg.deta0, samples, opts)?;
    let states = riccati_states(&alpha, &eta, consts)?;
    Ok(WpFamily {
        model,
        consts: *consts,
        alpha,
        eta,
        states,
    })
}

/// Max |w_riccati/w_u − 1| between the x-frame Riccati width and |u|²/W₀.
pub fn cross_pipeline_width_deviation(family: &WpFamily, traj: &AuxiliaryTrajectory) -> Result<f64> {
    if family.states.len() != traj.len() {
        return Err(Error::InvalidInput("pipelines sampled on different grids".into()));
    }
    let w0 = traj.w0_positive_part();
    let mut worst = 0.0f64;
    for (i, s) in family.states.iter().enumerate() {
        if (s.t - traj.tau[i]).abs() > TIME_MATCH {
            return Err(Error::InvalidInput("pipelines sampled on different grids".into()));
        }
        let u_width = traj.u[i].norm_sqr() / w0;
        worst = worst.max((family.x_frame_width(i) / u_width - 1.0).abs());
    }
    Ok(worst)
}
