//! Crank–Nicolson integration of i∂ψ/∂τ = Hψ on a uniform grid with hard
//! walls. This is the independent check on the analytic packets: it only
//! touches them through their initial snapshot.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mass::MassModel;
use crate::packet::PacketState;

pub const DEFAULT_LEAK_THRESHOLD: f64 = 1e-8;

/// Uniform spatial grid with `n` nodes starting at `x_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub x_min: f64,
    pub h: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, h: f64) -> Result<Self> {
        if !(x_max > x_min) || !(h > 0.0) {
            return Err(Error::InvalidInput(format!("bad grid [{x_min}, {x_max}] with h = {h}")));
        }
        let cells = ((x_max - x_min) / h).round();
        if (cells * h - (x_max - x_min)).abs() > 1e-9 * (x_max - x_min) || cells < 4.0 {
            return Err(Error::InvalidInput(format!(
                "grid spacing {h} does not divide [{x_min}, {x_max}] into at least 4 cells"
            )));
        }
        Ok(Self {
            x_min,
            h,
            n: cells as usize + 1,
        })
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.h
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.n - 1)
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|j| self.x(j))
    }

    fn same_as(&self, other: &Grid) -> bool {
        self.n == other.n
            && (self.x_min - other.x_min).abs() <= 1e-12 * self.h
            && (self.h - other.h).abs() <= 1e-12 * self.h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridWavefunction {
    pub grid: Grid,
    pub psi: Vec<Complex64>,
    pub t: f64,
}

impl GridWavefunction {
    pub fn from_fn(grid: Grid, t: f64, f: impl Fn(f64) -> Complex64) -> Self {
        Self {
            grid,
            psi: grid.points().map(f).collect(),
            t,
        }
    }

    /// h·Σ|ψⱼ|².
    pub fn norm(&self) -> f64 {
        self.grid.h * self.psi.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    pub fn normalized(mut self) -> Self {
        let s = self.norm().sqrt();
        self.psi.iter_mut().for_each(|z| *z /= s);
        self
    }

    pub fn density(&self) -> Vec<f64> {
        self.psi.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Grid point of maximal |ψ|².
    pub fn argmax(&self) -> f64 {
        let (j, _) = self
            .psi
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
            .expect("non-empty grid");
        self.grid.x(j)
    }

    /// Amplitude at the nodes next to the walls.
    pub fn edge_amplitude(&self) -> f64 {
        let n = self.psi.len();
        self.psi[0]
            .norm()
            .max(self.psi[1].norm())
            .max(self.psi[n - 2].norm())
            .max(self.psi[n - 1].norm())
    }

    pub fn mean_position(&self) -> f64 {
        let h = self.grid.h;
        self.psi
            .iter()
            .enumerate()
            .map(|(j, z)| self.grid.x(j) * z.norm_sqr() * h)
            .sum::<f64>()
            / self.norm()
    }
}

/// The Hamiltonian driving the grid evolution (ħ = 1).
#[derive(Clone)]
pub enum Hamiltonian {
    /// ½(−∂²/M(τ) + M(τ)x²).
    Mass(MassModel),
    /// ½(−∂² + w²(τ)x²).
    Frequency(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    Zero,
}

impl std::fmt::Debug for Hamiltonian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Hamiltonian::Mass(m) => f.debug_tuple("Mass").field(m).finish(),
            Hamiltonian::Frequency(_) => f.write_str("Frequency(..)"),
            Hamiltonian::Zero => f.write_str("Zero"),
        }
    }
}

impl Hamiltonian {
    pub fn frequency(w2: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Hamiltonian::Frequency(Arc::new(w2))
    }

    /// (kinetic prefactor 1/M, potential prefactor M or w²) at time τ.
    fn coefficients(&self, tau: f64) -> Option<(f64, f64)> {
        match self {
            Hamiltonian::Mass(m) => {
                let mass = m.mass(tau);
                Some((1.0 / mass, mass))
            }
            Hamiltonian::Frequency(w2) => Some((1.0, w2(tau))),
            Hamiltonian::Zero => None,
        }
    }
}

/// Reusable Crank–Nicolson stepper: (1 + iHΔτ/2)ψ' = (1 − iHΔτ/2)ψ with H
/// evaluated at the step midpoint and a three-point Laplacian.
pub struct CrankNicolson {
    hamiltonian: Hamiltonian,
    leak_threshold: f64,
    rhs: Vec<Complex64>,
    c_prime: Vec<Complex64>,
}

impl CrankNicolson {
    pub fn new(hamiltonian: Hamiltonian, leak_threshold: f64) -> Self {
        Self {
            hamiltonian,
            leak_threshold,
            rhs: Vec::new(),
            c_prime: Vec::new(),
        }
    }

    pub fn step(&mut self, psi: &mut GridWavefunction, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!("time step must be > 0, got {dt}")));
        }
        let tau_mid = psi.t + 0.5 * dt;
        let Some((kin, pot)) = self.hamiltonian.coefficients(tau_mid) else {
            psi.t += dt;
            return Ok(());
        };
        let grid = psi.grid;
        let n = grid.n;
        let h2 = grid.h * grid.h;
        let half = Complex64::new(0.0, 0.5 * dt);
        let off = -0.5 * kin / h2;
        let diag = |j: usize| {
            let x = grid.x(j);
            kin / h2 + 0.5 * pot * x * x
        };

        // Interior unknowns j = 1..n−2; walls stay at zero.
        let m = n - 2;
        self.rhs.resize(m, Complex64::default());
        self.c_prime.resize(m, Complex64::default());
        let p = &psi.psi;
        for k in 0..m {
            let j = k + 1;
            let hpsi = diag(j) * p[j] + off * (p[j - 1] + p[j + 1]);
            self.rhs[k] = p[j] - half * hpsi;
        }
        // Thomas algorithm with constant off-diagonal a = c = iΔτ/2·off.
        let a = half * off;
        let mut denom = Complex64::new(1.0, 0.0) + half * diag(1);
        self.c_prime[0] = a / denom;
        self.rhs[0] /= denom;
        for k in 1..m {
            denom = Complex64::new(1.0, 0.0) + half * diag(k + 1) - a * self.c_prime[k - 1];
            self.c_prime[k] = a / denom;
            let prev = self.rhs[k - 1];
            self.rhs[k] = (self.rhs[k] - a * prev) / denom;
        }
        for k in (0..m - 1).rev() {
            let next = self.rhs[k + 1];
            self.rhs[k] -= self.c_prime[k] * next;
        }
        let out = &mut psi.psi;
        out[0] = Complex64::default();
        out[n - 1] = Complex64::default();
        out[1..n - 1].copy_from_slice(&self.rhs);
        psi.t += dt;
        self.check_leak(psi)
    }

    fn check_leak(&self, psi: &GridWavefunction) -> Result<()> {
        let amplitude = psi.edge_amplitude();
        if amplitude > self.leak_threshold {
            return Err(Error::BoundaryLeak { t: psi.t, amplitude });
        }
        Ok(())
    }
}

/// Single Crank–Nicolson step.
pub fn crank_nicolson_step(psi: &GridWavefunction, hamiltonian: &Hamiltonian, dt: f64) -> Result<GridWavefunction> {
    let mut out = psi.clone();
    CrankNicolson::new(hamiltonian.clone(), DEFAULT_LEAK_THRESHOLD).step(&mut out, dt)?;
    Ok(out)
}

/// Evolves `psi0` and returns a snapshot at each of `times` (non-decreasing,
/// not before `psi0.t`). The last step before each snapshot is shortened so
/// the snapshot time is hit exactly.
pub fn evolve(
    psi0: &GridWavefunction,
    hamiltonian: &Hamiltonian,
    times: &[f64],
    dt: f64,
    leak_threshold: f64,
) -> Result<Vec<GridWavefunction>> {
    let mut stepper = CrankNicolson::new(hamiltonian.clone(), leak_threshold);
    stepper.check_leak(psi0)?;
    let mut psi = psi0.clone();
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        if target < psi.t - 1e-12 {
            return Err(Error::InvalidInput(format!(
                "snapshot time {target} precedes {}",
                psi.t
            )));
        }
        // Step count from the remaining span so round-off never adds a sliver step.
        let remaining = target - psi.t;
        let steps = (remaining / dt - 1e-9).ceil().max(0.0) as usize;
        for k in 0..steps {
            let this = if k + 1 == steps { target - psi.t } else { dt };
            stepper.step(&mut psi, this)?;
        }
        psi.t = target;
        out.push(psi.clone());
    }
    Ok(out)
}

/// |⟨a|b⟩| for unit-normalized copies of `a` and `b`; insensitive to global phase.
pub fn fidelity(a: &GridWavefunction, b: &GridWavefunction) -> Result<f64> {
    if !a.grid.same_as(&b.grid) {
        return Err(Error::GridMismatch);
    }
    let overlap: Complex64 = a.psi.iter().zip(&b.psi).map(|(x, y)| x.conj() * y).sum::<Complex64>() * a.grid.h;
    Ok((overlap.norm() / (a.norm() * b.norm()).sqrt()).min(1.0))
}

/// Analytic packet sampled on a grid at a given time.
pub trait PacketEvaluator {
    fn snapshot(&self, t: f64, grid: &Grid) -> Result<GridWavefunction>;
}

/// Analytic packet from the packet builder, sampled at the requested times.
impl PacketEvaluator for [PacketState] {
    fn snapshot(&self, t: f64, grid: &Grid) -> Result<GridWavefunction> {
        let state = self
            .iter()
            .find(|s| (s.tau - t).abs() <= 1e-9)
            .ok_or_else(|| Error::InvalidInput(format!("no packet state sampled at t = {t}")))?;
        Ok(GridWavefunction::from_fn(*grid, t, |x| state.eval(x)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnapshotCheck {
    pub t: f64,
    pub infidelity: f64,
    pub norm_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certification {
    pub snapshots: Vec<SnapshotCheck>,
    pub max_infidelity: f64,
}

/// Evolves the analytic packet's snapshot at `times[0]` numerically and
/// compares against the analytic packet at every entry of `times`.
pub fn certify_packet<E: PacketEvaluator + ?Sized>(
    analytic: &E,
    hamiltonian: &Hamiltonian,
    grid: &Grid,
    times: &[f64],
    dt: f64,
    leak_threshold: f64,
) -> Result<Certification> {
    let t0 = *times
        .first()
        .ok_or_else(|| Error::InvalidInput("no snapshot times".into()))?;
    let initial = analytic.snapshot(t0, grid)?.normalized();
    let numeric = evolve(&initial, hamiltonian, times, dt, leak_threshold)?;
    let mut snapshots = Vec::with_capacity(times.len());
    for (num, &t) in numeric.iter().zip(times) {
        let exact = analytic.snapshot(t, grid)?;
        snapshots.push(SnapshotCheck {
            t,
            infidelity: 1.0 - fidelity(num, &exact)?,
            norm_error: (num.norm() - 1.0).abs(),
        });
    }
    let max_infidelity = snapshots.iter().map(|s| s.infidelity).fold(0.0, f64::max);
    Ok(Certification {
        snapshots,
        max_infidelity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ground(grid: Grid) -> GridWavefunction {
        GridWavefunction::from_fn(grid, 0.0, |x| {
            Complex64::new(PI.powf(-0.25) * (-x * x / 2.0).exp(), 0.0)
        })
    }

    fn coherent(grid: Grid, x0: f64, p0: f64) -> GridWavefunction {
        GridWavefunction::from_fn(grid, 0.0, |x| {
            PI.powf(-0.25) * Complex64::new(-(x - x0).powi(2) / 2.0, p0 * x).exp()
        })
    }

    #[test]
    fn grid_construction() {
        let g = Grid::new(-20.0, 20.0, 0.02).unwrap();
        assert_eq!(g.n, 2001);
        assert!((g.x_max() - 20.0).abs() < 1e-12);
        assert!(Grid::new(-1.0, 1.0, 0.3).is_err());
        assert!(Grid::new(1.0, -1.0, 0.1).is_err());
    }

    #[test]
    fn step_is_unitary() {
        let grid = Grid::new(-10.0, 10.0, 0.02).unwrap();
        let psi = coherent(grid, 1.5, -0.7);
        for ham in [
            Hamiltonian::Mass(MassModel::gaussian_decaying(0.3)),
            Hamiltonian::frequency(|t| 1.0 + 0.5 * t.sin()),
        ] {
            let next = crank_nicolson_step(&psi, &ham, 1e-3).unwrap();
            assert!((next.norm() - psi.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let grid = Grid::new(-10.0, 10.0, 0.05).unwrap();
        let psi = coherent(grid, 0.5, 1.0);
        let next = crank_nicolson_step(&psi, &Hamiltonian::Zero, 0.1).unwrap();
        assert_eq!(next.psi, psi.psi);
        assert!((next.t - 0.1).abs() < 1e-15);
    }

    #[test]
    fn ground_state_is_stationary() {
        let grid = Grid::new(-10.0, 10.0, 0.02).unwrap();
        let psi = ground(grid);
        let ham = Hamiltonian::Mass(MassModel::constant(1.0));
        let out = evolve(&psi, &ham, &[1.0], 1e-3, DEFAULT_LEAK_THRESHOLD).unwrap();
        for (a, b) in out[0].psi.iter().zip(&psi.psi) {
            assert!((a.norm() - b.norm()).abs() < grid.h * grid.h);
        }
    }

    #[test]
    fn coherent_centroid_oscillates() {
        let grid = Grid::new(-10.0, 10.0, 0.02).unwrap();
        let psi = coherent(grid, 1.0, 0.0);
        let ham = Hamiltonian::Mass(MassModel::constant(1.0));
        let times: Vec<f64> = (0..=8).map(|k| k as f64 * PI / 4.0).collect();
        let out = evolve(&psi, &ham, &times, 1e-3, DEFAULT_LEAK_THRESHOLD).unwrap();
        for (snap, t) in out.iter().zip(&times) {
            assert!((snap.t - t).abs() < 1e-12);
            assert!((snap.mean_position() - t.cos()).abs() < grid.h * grid.h, "t = {t}");
        }
    }

    #[test]
    fn long_run_norm_drift() {
        let grid = Grid::new(-10.0, 10.0, 0.05).unwrap();
        let psi = coherent(grid, 1.0, 0.5);
        let n0 = psi.norm();
        let out = evolve(
            &psi,
            &Hamiltonian::Mass(MassModel::constant(1.0)),
            &[10.0],
            1e-3,
            DEFAULT_LEAK_THRESHOLD,
        )
        .unwrap();
        assert!((out[0].norm() - n0).abs() < 1e-9);
    }

    #[test]
    fn fidelity_properties() {
        let grid = Grid::new(-10.0, 10.0, 0.02).unwrap();
        let psi = coherent(grid, 0.3, 0.8);
        assert!((fidelity(&psi, &psi).unwrap() - 1.0).abs() < 1e-14);
        let mut rotated = psi.clone();
        rotated
            .psi
            .iter_mut()
            .for_each(|z| *z *= Complex64::from_polar(1.0, 2.1));
        assert!((fidelity(&psi, &rotated).unwrap() - 1.0).abs() < 1e-14);
        let g0 = ground(grid);
        let g1 = GridWavefunction::from_fn(grid, 0.0, |x| Complex64::new(x * (-x * x / 2.0).exp(), 0.0));
        assert!(fidelity(&g0, &g1).unwrap() < 1e-8);
        let other = ground(Grid::new(-10.0, 10.0, 0.04).unwrap());
        assert_eq!(fidelity(&g0, &other), Err(Error::GridMismatch));
    }

    #[test]
    fn packet_at_the_wall_leaks() {
        let grid = Grid::new(-3.0, 3.0, 0.02).unwrap();
        let psi = coherent(grid, 2.0, 0.0);
        let err = evolve(
            &psi,
            &Hamiltonian::Mass(MassModel::constant(1.0)),
            &[1.0],
            1e-3,
            DEFAULT_LEAK_THRESHOLD,
        )
        .unwrap_err();
        assert!(matches!(err, Error::BoundaryLeak { .. }));
    }
}
