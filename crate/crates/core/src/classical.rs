//! Auxiliary classical equations: the damped oscillator for u, the Newtonian
//! centroid equation, and the Ermakov equation, plus Wronskian bookkeeping.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fd::{central_derivative, uniform_spacing};
use crate::mass::MassModel;
use crate::ode::{integrate, integrate_complex, OdeOptions};

/// Below this |u| the packet coefficients are meaningless.
pub const U_BREAKDOWN: f64 = 1e-12;

/// W[u, u*] = u·u̇* − u̇·u*, evaluated as 2i·Im(u·u̇*) so the real part is exactly zero.
pub fn wronskian(u: Complex64, du: Complex64) -> Complex64 {
    Complex64::new(0.0, 2.0 * (u * du.conj()).im)
}

/// Complex solution of ü + γ(τ)u̇ + u = 0 sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryTrajectory {
    pub tau: Vec<f64>,
    pub u: Vec<Complex64>,
    pub du: Vec<Complex64>,
    /// M(τ₀)·W[u, u*; τ₀] after normalizing u(τ₀) = 1.
    pub w0: Complex64,
    pub model: MassModel,
}

impl AuxiliaryTrajectory {
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    /// W₀ = i·W(0); positive for admissible trajectories.
    pub fn w0_positive_part(&self) -> f64 {
        (Complex64::i() * self.w0).re
    }

    pub fn wronskian_at(&self, i: usize) -> Complex64 {
        wronskian(self.u[i], self.du[i])
    }

    /// |M(τ)·W(τ) − W0| / |W0| at every grid point.
    pub fn abel_drift(&self) -> Vec<f64> {
        let scale = self.w0.norm();
        (0..self.len())
            .map(|i| (self.model.mass(self.tau[i]) * self.wronskian_at(i) - self.w0).norm() / scale)
            .collect()
    }

    pub fn max_abel_drift(&self) -> f64 {
        self.abel_drift().into_iter().fold(0.0, f64::max)
    }

    /// Largest finite-difference residual of u̇ = d/dτ u and ü + γu̇ + u = 0,
    /// relative to the largest |u| on the grid.
    pub fn residual(&self) -> Result<f64> {
        let h = uniform_spacing(&self.tau)?;
        let (off, du_fd) = central_derivative(&self.u, h)?;
        let (_, ddu_fd) = central_derivative(&self.du, h)?;
        let scale = self.u.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        let mut worst = 0.0f64;
        for (k, (d1, d2)) in du_fd.iter().zip(&ddu_fd).enumerate() {
            let i = off + k;
            let gamma = self.model.gamma(self.tau[i]);
            let r1 = (*d1 - self.du[i]).norm();
            let r2 = (*d2 + gamma * self.du[i] + self.u[i]).norm();
            worst = worst.max(r1).max(r2);
        }
        Ok(worst / scale)
    }
}

/// Integrates the damped oscillator ü + γu̇ + u = 0 on `samples`.
///
/// The initial data are rescaled so that u(τ₀) = 1; this rescales W0 by the
/// positive factor |u0|⁻², leaving its sign intact.
pub fn solve_damped_oscillator(
    model: MassModel,
    u0: Complex64,
    du0: Complex64,
    samples: &[f64],
    opts: &OdeOptions,
) -> Result<AuxiliaryTrajectory> {
    model.validate()?;
    let tau0 = *samples
        .first()
        .ok_or_else(|| Error::InvalidInput("empty time grid".into()))?;
    if u0.norm() < U_BREAKDOWN {
        return Err(Error::DivisionByZeroU { modulus: u0.norm() });
    }
    let du0 = du0 / u0;
    let u0 = Complex64::new(1.0, 0.0);
    let w0 = model.mass(tau0) * wronskian(u0, du0);

    let sol = integrate_complex(
        |t, y, dy| {
            dy[0] = y[1];
            dy[1] = -model.gamma(t) * y[1] - y[0];
        },
        &[u0, du0],
        samples,
        opts,
    )?;
    let (u, du) = sol.y.iter().map(|row| (row[0], row[1])).unzip();
    Ok(AuxiliaryTrajectory {
        tau: sol.t,
        u,
        du,
        w0,
        model,
    })
}

/// Real scalar trajectory with its first derivative (η, η̇) or (α, α̇).
#[derive(Debug, Clone, PartialEq)]
pub struct RealTrajectory {
    pub t: Vec<f64>,
    pub value: Vec<f64>,
    pub derivative: Vec<f64>,
}

impl RealTrajectory {
    fn from_solution(sol: crate::ode::Solution) -> Self {
        let (value, derivative) = sol.y.iter().map(|r| (r[0], r[1])).unzip();
        Self {
            t: sol.t,
            value,
            derivative,
        }
    }

    /// Max finite-difference residual of the second-order equation
    /// ẍ = `accel`(t, x), together with ẋ = d/dt x. Divided by `scale`(t, x)
    /// pointwise when given.
    pub fn residual(&self, accel: impl Fn(f64, f64) -> f64, scale: Option<&dyn Fn(f64, f64) -> f64>) -> Result<f64> {
        let h = uniform_spacing(&self.t)?;
        let (off, dv) = central_derivative(&self.value, h)?;
        let (_, ddv) = central_derivative(&self.derivative, h)?;
        let mut worst = 0.0f64;
        for (k, (d1, d2)) in dv.iter().zip(&ddv).enumerate() {
            let i = off + k;
            let (t, x) = (self.t[i], self.value[i]);
            let s = scale.map_or(1.0, |f| f(t, x));
            let r = (d1 - self.derivative[i]).abs().max((d2 - accel(t, x)).abs());
            worst = worst.max(r / s);
        }
        Ok(worst)
    }
}

/// η̈ + w²(t)η = 0.
pub fn solve_newton(
    w2: &dyn Fn(f64) -> f64,
    eta0: f64,
    deta0: f64,
    samples: &[f64],
    opts: &OdeOptions,
) -> Result<RealTrajectory> {
    let sol = integrate(
        |t, y, dy| {
            dy[0] = y[1];
            dy[1] = -w2(t) * y[0];
        },
        &[eta0, deta0],
        samples,
        opts,
    )?;
    Ok(RealTrajectory::from_solution(sol))
}

/// α̈ + w²(t)α = 1/α³ with α₀ > 0. A collapse of α is reported as
/// [`Error::ErmakovSingularity`].
pub fn solve_ermakov(
    w2: &dyn Fn(f64) -> f64,
    alpha0: f64,
    dalpha0: f64,
    samples: &[f64],
    opts: &OdeOptions,
) -> Result<RealTrajectory> {
    let t0 = samples.first().copied().unwrap_or(0.0);
    if !(alpha0 > 0.0) || !(1.0 / alpha0.powi(3)).is_finite() {
        return Err(Error::ErmakovSingularity { t: t0 });
    }
    let sol = integrate(
        |t, y, dy| {
            dy[0] = y[1];
            dy[1] = -w2(t) * y[0] + 1.0 / y[0].powi(3);
        },
        &[alpha0, dalpha0],
        samples,
        opts,
    )
    .map_err(|e| match e {
        Error::StepSizeUnderflow { t } => Error::ErmakovSingularity { t },
        other => other,
    })?;
    let traj = RealTrajectory::from_solution(sol);
    if let Some(i) = traj.value.iter().position(|&a| !(a > 0.0)) {
        return Err(Error::ErmakovSingularity { t: traj.t[i] });
    }
    Ok(traj)
}

/// w²(τ) = 1 − γ̇/2 − γ²/4: the frequency of q = √M·u, which removes the
/// damping term from ü + γu̇ + u = 0.
pub fn effective_frequency(model: MassModel) -> impl Fn(f64) -> f64 + Copy + Send + Sync {
    move |tau| {
        let g = model.gamma(tau);
        1.0 - 0.5 * model.gamma_rate(tau) - 0.25 * g * g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::uniform_grid;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn wronskian_examples() {
        assert_eq!(wronskian(c(1.0, 0.0), c(0.0, 1.0)), c(0.0, -2.0));
        for tau in [0.0, 0.3, 2.0, 7.1] {
            let u = Complex64::from_polar(1.0, tau);
            let w = wronskian(u, Complex64::i() * u);
            assert!((w - c(0.0, -2.0)).norm() < 1e-15);
        }
        assert_eq!(wronskian(c(0.7, 0.0), c(-1.3, 0.0)).norm(), 0.0);
    }

    #[test]
    fn constant_mass_gives_plane_rotation() {
        let grid = uniform_grid(0.0, 10.0, 1e-2);
        let traj = solve_damped_oscillator(
            MassModel::constant(1.0),
            c(1.0, 0.0),
            c(0.0, 1.0),
            &grid,
            &OdeOptions::default(),
        )
        .unwrap();
        assert_eq!(traj.w0, c(0.0, -2.0));
        for (t, u) in traj.tau.iter().zip(&traj.u) {
            assert!((u - Complex64::from_polar(1.0, *t)).norm() < 1e-8);
            assert!((u.norm() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn initial_data_are_normalized() {
        let grid = uniform_grid(0.0, 1.0, 0.1);
        let traj = solve_damped_oscillator(
            MassModel::constant(2.0),
            c(0.0, 2.0),
            c(-2.0, 0.0),
            &grid,
            &OdeOptions::default(),
        )
        .unwrap();
        assert_eq!(traj.u[0], c(1.0, 0.0));
        // du0/u0 = (-2)/(2i) = i; W0 = 2·(−2i).
        assert!((traj.w0 - c(0.0, -4.0)).norm() < 1e-15);
        assert!(matches!(
            solve_damped_oscillator(
                MassModel::constant(1.0),
                c(0.0, 0.0),
                c(1.0, 0.0),
                &grid,
                &OdeOptions::default()
            ),
            Err(Error::DivisionByZeroU { .. })
        ));
    }

    #[test]
    fn abel_identity_for_decaying_mass() {
        let grid = uniform_grid(0.0, 10.0, 1e-2);
        let model = MassModel::gaussian_decaying(0.1);
        let traj =
            solve_damped_oscillator(model, c(1.0, 0.0), c(0.0, 1.0), &grid, &OdeOptions::with_tol(1e-10)).unwrap();
        let drift = traj.max_abel_drift();
        assert!(drift < 1e-6, "drift {drift:e}");
        assert_eq!(traj.w0.re, 0.0);

        // Tighter tolerance agrees and drifts less.
        let fine =
            solve_damped_oscillator(model, c(1.0, 0.0), c(0.0, 1.0), &grid, &OdeOptions::with_tol(1e-12)).unwrap();
        let diff = traj
            .u
            .iter()
            .zip(&fine.u)
            .map(|(a, b)| (a - b).norm() / b.norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-7, "{diff:e}");
        assert!(fine.max_abel_drift() <= drift);
    }

    #[test]
    fn damped_residual_below_threshold() {
        let tol = 1e-10;
        let grid = uniform_grid(0.0, 10.0, 1e-2);
        for model in [
            MassModel::constant(1.0),
            MassModel::gaussian_decaying(0.1),
            MassModel::exponential(0.5),
        ] {
            let traj =
                solve_damped_oscillator(model, c(1.0, 0.0), c(0.0, 1.0), &grid, &OdeOptions::with_tol(tol)).unwrap();
            let r = traj.residual().unwrap();
            assert!(r < 100.0 * tol, "{}: residual {r:e}", model.name());
        }
    }

    #[test]
    fn newton_examples() {
        let opts = OdeOptions::default();
        let one = |_: f64| 1.0;
        let grid = uniform_grid(0.0, 2.0 * PI, 1e-2);
        let eta = solve_newton(&one, 1.0, 0.0, &grid, &opts).unwrap();
        for (t, v) in eta.t.iter().zip(&eta.value) {
            assert!((v - t.cos()).abs() < 1e-9);
        }
        let eta = solve_newton(&one, 0.0, 1.0, &[0.0, FRAC_PI_2], &opts).unwrap();
        assert!((eta.value[1] - 1.0).abs() < 1e-9);
        let zero = |_: f64| 0.0;
        let eta = solve_newton(&zero, 0.5, -2.0, &grid, &opts).unwrap();
        for (t, v) in eta.t.iter().zip(&eta.value) {
            assert!((v - (0.5 - 2.0 * t)).abs() < 1e-9);
        }
        assert!(eta.residual(|_, _| 0.0, None).unwrap() < 1e-8);
    }

    #[test]
    fn ermakov_fixed_point_and_free_case() {
        let opts = OdeOptions::default();
        let grid = uniform_grid(0.0, 10.0, 1e-2);
        let a = solve_ermakov(&|_| 1.0, 1.0, 0.0, &grid, &opts).unwrap();
        assert!(a.value.iter().all(|v| (v - 1.0).abs() < 1e-12));

        let a = solve_ermakov(&|_| 0.0, 1.0, 0.0, &grid, &opts).unwrap();
        for (t, v) in a.t.iter().zip(&a.value) {
            assert!((v - (1.0 + t * t).sqrt()).abs() < 1e-8 * v);
        }
    }

    #[test]
    fn ermakov_oscillates_positive() {
        let tol = 1e-10;
        let grid = uniform_grid(0.0, 20.0, 1e-3);
        let a = solve_ermakov(&|_| 1.0, 2.0, 0.0, &grid, &OdeOptions::with_tol(tol)).unwrap();
        let min = a.value.iter().copied().fold(f64::INFINITY, f64::min);
        // α² = A cos² t + B sin² t with AB = 1: minimum 1/2 here.
        assert!((min - 0.5).abs() < 1e-3 && min > 0.0, "{min}");
        let scale = |_: f64, x: f64| x.abs() + x.powi(-3).abs();
        let r = a.residual(|_, x| -x + x.powi(-3), Some(&scale)).unwrap();
        assert!(r < 100.0 * tol, "{r:e}");
    }

    #[test]
    fn ermakov_collapse_is_an_error() {
        let grid = uniform_grid(0.0, 1.0, 0.1);
        let opts = OdeOptions::default();
        assert!(matches!(
            solve_ermakov(&|_| 1.0, 0.0, 0.0, &grid, &opts),
            Err(Error::ErmakovSingularity { .. })
        ));
        assert!(matches!(
            solve_ermakov(&|_| 1.0, -1.0, 0.0, &grid, &opts),
            Err(Error::ErmakovSingularity { .. })
        ));
        assert!(matches!(
            solve_ermakov(&|_| 1.0, 1e-120, 0.0, &grid, &opts),
            Err(Error::ErmakovSingularity { .. })
        ));
    }

    #[test]
    fn effective_frequency_examples() {
        let w2 = effective_frequency(MassModel::constant(3.0));
        assert_eq!(w2(1.3), 1.0);
        let w2 = effective_frequency(MassModel::exponential(0.5));
        assert!((w2(4.0) - (1.0 - 0.0625)).abs() < 1e-15);
        let g = 0.1;
        let w2 = effective_frequency(MassModel::gaussian_decaying(g));
        for tau in [0.0, 1.0, 3.5] {
            assert!((w2(tau) - (1.0 + g / 2.0 - g * g * tau * tau / 4.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn reduction_reproduces_damped_equation() {
        let tol = 1e-10;
        let grid = uniform_grid(0.0, 5.0, 1e-2);
        let opts = OdeOptions::with_tol(tol);
        for model in [
            MassModel::constant(1.0),
            MassModel::gaussian_growing(0.1),
            MassModel::gaussian_decaying(0.1),
            MassModel::exponential(0.5),
        ] {
            let w2 = effective_frequency(model);
            // Two real solutions q combine into u = q/√M.
            let q1 = solve_newton(&w2, 1.0, 0.0, &grid, &opts).unwrap();
            let q2 = solve_newton(&w2, 0.0, 1.0, &grid, &opts).unwrap();
            let mut u = Vec::new();
            let mut du = Vec::new();
            for i in 0..grid.len() {
                let s = model.eval(grid[i]);
                let q = Complex64::new(q1.value[i], q2.value[i]);
                let dq = Complex64::new(q1.derivative[i], q2.derivative[i]);
                let root = s.mass.sqrt();
                u.push(q / root);
                du.push(dq / root - 0.5 * s.gamma * q / root);
            }
            let traj = AuxiliaryTrajectory {
                tau: grid.clone(),
                u,
                du,
                w0: Complex64::default(),
                model,
            };
            let r = traj.residual().unwrap();
            assert!(r < 1e-6, "{}: {r:e}", model.name());
        }
    }
}
