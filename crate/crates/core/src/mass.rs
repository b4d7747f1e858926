//! Time-dependent mass families M(τ) > 0 and the damping parameter γ = Ṁ/M.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default threshold for the quasi-coherence condition |γ| ≪ 1.
pub const DEFAULT_QUASI_COHERENCE_EPS: f64 = 0.1;

/// Closed-form mass families. All derivatives are analytic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MassModel {
    /// M(τ) = M₀.
    Constant { m0: f64 },
    /// M(τ) = exp(γ₀τ²/2), γ(τ) = γ₀τ.
    GaussianGrowing { gamma0: f64 },
    /// M(τ) = exp(−γ₀τ²/2), γ(τ) = −γ₀τ.
    GaussianDecaying { gamma0: f64 },
    /// M(τ) = exp(−γ₀τ), γ(τ) = −γ₀.
    Exponential { gamma0: f64 },
}

impl Default for MassModel {
    fn default() -> Self {
        MassModel::Constant { m0: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassSample {
    pub mass: f64,
    pub mass_rate: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Asymptotics {
    Constant,
    /// M(τ) → ∞ as τ → ∞; physically unacceptable.
    Diverges,
    ConvergesToZero,
}

/// Diagnostics for a mass model over a simulation window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassReport {
    pub accepted: bool,
    pub asymptotics: Asymptotics,
    pub positive: bool,
    pub bounded_on_window: bool,
    pub min_mass: f64,
    pub max_mass: f64,
    pub messages: Vec<String>,
}

/// Sub-intervals of a window where the damping parameter is negligible.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuasiCoherence {
    pub eps: f64,
    pub intervals: Vec<(f64, f64)>,
    /// True when |γ| grows without bound, so the condition cannot hold at arbitrary time.
    pub fails_at_large_tau: bool,
    pub note: Option<String>,
}

impl QuasiCoherence {
    pub fn covers(&self, tau: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| tau >= a && tau <= b)
    }
}

// Above this the mass is considered unbounded on a finite window.
const MASS_BOUND: f64 = 1e12;

impl MassModel {
    pub fn constant(m0: f64) -> Self {
        MassModel::Constant { m0 }
    }

    pub fn gaussian_growing(gamma0: f64) -> Self {
        MassModel::GaussianGrowing { gamma0 }
    }

    pub fn gaussian_decaying(gamma0: f64) -> Self {
        MassModel::GaussianDecaying { gamma0 }
    }

    pub fn exponential(gamma0: f64) -> Self {
        MassModel::Exponential { gamma0 }
    }

    /// Same family with its parameter (m0 or gamma0) replaced.
    pub fn with_parameter(&self, p: f64) -> Self {
        match self {
            MassModel::Constant { .. } => MassModel::Constant { m0: p },
            MassModel::GaussianGrowing { .. } => MassModel::GaussianGrowing { gamma0: p },
            MassModel::GaussianDecaying { .. } => MassModel::GaussianDecaying { gamma0: p },
            MassModel::Exponential { .. } => MassModel::Exponential { gamma0: p },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MassModel::Constant { .. } => "constant",
            MassModel::GaussianGrowing { .. } => "gaussian_growing",
            MassModel::GaussianDecaying { .. } => "gaussian_decaying",
            MassModel::Exponential { .. } => "exponential",
        }
    }

    /// The model's single parameter (M₀ or γ₀).
    pub fn parameter(&self) -> f64 {
        match *self {
            MassModel::Constant { m0 } => m0,
            MassModel::GaussianGrowing { gamma0 }
            | MassModel::GaussianDecaying { gamma0 }
            | MassModel::Exponential { gamma0 } => gamma0,
        }
    }

    /// Checks the parameter constraints of each family.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidMassModel(msg));
        match *self {
            MassModel::Constant { m0 } if !(m0 > 0.0 && m0.is_finite()) => {
                bad(format!("constant mass must be positive, got {m0}"))
            }
            MassModel::GaussianGrowing { gamma0 } if !gamma0.is_finite() => {
                bad(format!("gamma0 must be finite, got {gamma0}"))
            }
            MassModel::GaussianDecaying { gamma0 } | MassModel::Exponential { gamma0 }
                if !(gamma0 > 0.0 && gamma0.is_finite()) =>
            {
                bad(format!("{} requires gamma0 > 0, got {gamma0}", self.name()))
            }
            _ => Ok(()),
        }
    }

    pub fn mass(&self, tau: f64) -> f64 {
        match *self {
            MassModel::Constant { m0 } => m0,
            MassModel::GaussianGrowing { gamma0 } => (0.5 * gamma0 * tau * tau).exp(),
            MassModel::GaussianDecaying { gamma0 } => (-0.5 * gamma0 * tau * tau).exp(),
            MassModel::Exponential { gamma0 } => (-gamma0 * tau).exp(),
        }
    }

    /// γ(τ) = Ṁ/M.
    pub fn gamma(&self, tau: f64) -> f64 {
        match *self {
            MassModel::Constant { .. } => 0.0,
            MassModel::GaussianGrowing { gamma0 } => gamma0 * tau,
            MassModel::GaussianDecaying { gamma0 } => -gamma0 * tau,
            MassModel::Exponential { gamma0 } => -gamma0,
        }
    }

    /// dγ/dτ.
    pub fn gamma_rate(&self, _tau: f64) -> f64 {
        match *self {
            MassModel::Constant { .. } | MassModel::Exponential { .. } => 0.0,
            MassModel::GaussianGrowing { gamma0 } => gamma0,
            MassModel::GaussianDecaying { gamma0 } => -gamma0,
        }
    }

    pub fn eval(&self, tau: f64) -> MassSample {
        let mass = self.mass(tau);
        let gamma = self.gamma(tau);
        MassSample {
            mass,
            mass_rate: gamma * mass,
            gamma,
        }
    }

    pub fn asymptotics(&self) -> Asymptotics {
        match *self {
            MassModel::Constant { .. } => Asymptotics::Constant,
            MassModel::GaussianGrowing { gamma0 } if gamma0 > 0.0 => Asymptotics::Diverges,
            MassModel::GaussianGrowing { gamma0: 0.0 } => Asymptotics::Constant,
            _ => Asymptotics::ConvergesToZero,
        }
    }

    /// Admissibility diagnostics on `[tau0, tau1]`, sampled every `dt`.
    pub fn validate_on(&self, window: (f64, f64), dt: f64) -> Result<MassReport> {
        self.validate()?;
        check_window(window)?;
        let grid = crate::ode::uniform_grid(window.0, window.1, dt);
        let (mut min_mass, mut max_mass) = (f64::INFINITY, f64::NEG_INFINITY);
        for &t in &grid {
            let m = self.mass(t);
            min_mass = min_mass.min(m);
            max_mass = max_mass.max(m);
        }
        let positive = min_mass > 0.0;
        let bounded_on_window = max_mass.is_finite() && max_mass < MASS_BOUND;
        let asymptotics = self.asymptotics();

        let mut messages = Vec::new();
        match asymptotics {
            Asymptotics::Diverges => messages.push("mass diverges as τ→∞".to_string()),
            Asymptotics::ConvergesToZero => messages.push("mass converges to zero as τ→∞".to_string()),
            Asymptotics::Constant => {}
        }
        if let MassModel::Exponential { gamma0 } = *self {
            if gamma0 >= 1.0 {
                messages.push(format!(
                    "exponential mass recommended with 0 < gamma0 < 1, got {gamma0}"
                ));
            }
        }
        if !positive {
            messages.push("mass underflows to zero on the window".to_string());
        }
        if !bounded_on_window {
            messages.push(format!("mass exceeds {MASS_BOUND:e} on the window"));
        }
        Ok(MassReport {
            accepted: positive && bounded_on_window && asymptotics != Asymptotics::Diverges,
            asymptotics,
            positive,
            bounded_on_window,
            min_mass,
            max_mass,
            messages,
        })
    }

    /// Sub-intervals of the sampled window on which |γ(τ)| < ε. Interval ends
    /// are grid points, so boundaries are resolved to one grid step.
    pub fn quasi_coherence_window(&self, window: (f64, f64), eps: f64, dt: f64) -> Result<QuasiCoherence> {
        if !(eps > 0.0) {
            return Err(Error::InvalidInput(format!("eps must be > 0, got {eps}")));
        }
        check_window(window)?;
        let grid = crate::ode::uniform_grid(window.0, window.1, dt);
        let mut intervals = Vec::new();
        let mut open: Option<f64> = None;
        let mut last = window.0;
        for &t in &grid {
            let inside = self.gamma(t).abs() < eps;
            match (inside, open) {
                (true, None) => open = Some(t),
                (false, Some(start)) => {
                    intervals.push((start, last));
                    open = None;
                }
                _ => {}
            }
            last = t;
        }
        if let Some(start) = open {
            intervals.push((start, last));
        }
        let fails_at_large_tau = matches!(
            self,
            MassModel::GaussianGrowing { gamma0 } | MassModel::GaussianDecaying { gamma0 } if *gamma0 != 0.0
        );
        let note = fails_at_large_tau.then(|| {
            "damping parameter is linear in τ: quasi-coherence cannot be satisfied at arbitrary time".to_string()
        });
        Ok(QuasiCoherence {
            eps,
            intervals,
            fails_at_large_tau,
            note,
        })
    }
}

fn check_window(window: (f64, f64)) -> Result<()> {
    if !(window.0 < window.1) || !window.0.is_finite() || !window.1.is_finite() {
        return Err(Error::InvalidInput(format!(
            "window must satisfy tau0 < tau1, got [{}, {}]",
            window.0, window.1
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn with_parameter_keeps_family() {
        let m = MassModel::exponential(0.5).with_parameter(0.2);
        assert_eq!(m, MassModel::exponential(0.2));
        assert_eq!(m.parameter(), 0.2);
        assert_eq!(MassModel::constant(1.0).with_parameter(3.0), MassModel::constant(3.0));
    }

    #[test]
    fn constant_mass_has_no_damping() {
        let s = MassModel::constant(1.0).eval(3.7);
        assert_eq!((s.mass, s.mass_rate, s.gamma), (1.0, 0.0, 0.0));
    }

    #[test]
    fn gaussian_growing_gamma_is_linear() {
        let m = MassModel::gaussian_growing(0.3);
        for tau in [0.0, 0.5, 2.0, -1.5] {
            assert!((m.gamma(tau) - 0.3 * tau).abs() < 1e-15);
        }
    }

    #[test]
    fn exponential_at_two() {
        let s = MassModel::exponential(0.5).eval(2.0);
        assert!((s.mass - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(s.gamma, -0.5);
    }

    #[test]
    fn parameter_constraints() {
        assert!(MassModel::gaussian_decaying(0.0).validate().is_err());
        assert!(MassModel::exponential(-0.1).validate().is_err());
        assert!(MassModel::constant(0.0).validate().is_err());
        assert!(MassModel::gaussian_growing(-0.2).validate().is_ok());
    }

    #[test]
    fn growing_mass_is_flagged() {
        let r = MassModel::gaussian_growing(0.1).validate_on((0.0, 10.0), 0.01).unwrap();
        assert!(!r.accepted);
        assert_eq!(r.asymptotics, Asymptotics::Diverges);
        assert!(r.messages.iter().any(|m| m.contains("diverges as τ→∞")));
    }

    #[test]
    fn decaying_mass_is_accepted() {
        let r = MassModel::gaussian_decaying(0.1)
            .validate_on((0.0, 10.0), 0.01)
            .unwrap();
        assert!(r.accepted && r.positive && r.bounded_on_window);
        assert!(r.messages.iter().any(|m| m.contains("converges to zero as τ→∞")));
    }

    #[test]
    fn constant_mass_report_is_clean() {
        let r = MassModel::constant(1.0).validate_on((-3.0, 40.0), 0.1).unwrap();
        assert!(r.accepted && r.messages.is_empty());
    }

    #[test]
    fn exponential_recommendation() {
        let r = MassModel::exponential(1.5).validate_on((0.0, 1.0), 0.01).unwrap();
        assert!(r.messages.iter().any(|m| m.contains("0 < gamma0 < 1")));
        let r = MassModel::exponential(0.5).validate_on((0.0, 1.0), 0.01).unwrap();
        assert!(r.messages.iter().all(|m| !m.contains("0 < gamma0 < 1")));
    }

    #[test]
    fn quasi_coherence_windows() {
        let dt = 1e-3;
        let q = MassModel::constant(1.0)
            .quasi_coherence_window((0.0, 10.0), 0.1, dt)
            .unwrap();
        assert_eq!(q.intervals, vec![(0.0, 10.0)]);

        let q = MassModel::gaussian_decaying(0.2)
            .quasi_coherence_window((0.0, 10.0), 0.1, dt)
            .unwrap();
        assert_eq!(q.intervals.len(), 1);
        let (a, b) = q.intervals[0];
        assert_eq!(a, 0.0);
        assert!((b - 0.5).abs() <= dt * (1.0 + 1e-9), "{b}");
        assert!(q.fails_at_large_tau && q.note.is_some());

        let q = MassModel::exponential(0.05)
            .quasi_coherence_window((0.0, 10.0), 0.1, dt)
            .unwrap();
        assert_eq!(q.intervals, vec![(0.0, 10.0)]);

        let q = MassModel::exponential(0.5)
            .quasi_coherence_window((0.0, 10.0), 0.1, dt)
            .unwrap();
        assert!(q.intervals.is_empty());
        assert!(MassModel::constant(1.0)
            .quasi_coherence_window((0.0, 1.0), 0.0, dt)
            .is_err());
    }

    fn any_model() -> impl Strategy<Value = MassModel> {
        prop_oneof![
            (0.1f64..10.0).prop_map(MassModel::constant),
            (-1.0f64..1.0).prop_map(MassModel::gaussian_growing),
            (0.01f64..1.0).prop_map(MassModel::gaussian_decaying),
            (0.01f64..2.0).prop_map(MassModel::exponential),
        ]
    }

    proptest! {
        #[test]
        fn derivative_identity(model in any_model(), tau in -5.0f64..5.0) {
            let s = model.eval(tau);
            prop_assert!(s.mass > 0.0);
            prop_assert!((s.gamma * s.mass - s.mass_rate).abs() <= 1e-15 * s.mass_rate.abs().max(1.0));
        }

        #[test]
        fn decaying_is_inverse_of_growing(g in 0.01f64..1.0, tau in -5.0f64..5.0) {
            let a = MassModel::gaussian_decaying(g).mass(tau);
            let b = MassModel::gaussian_growing(g).mass(tau);
            prop_assert!((a * b - 1.0).abs() < 1e-14);
        }

        #[test]
        fn constant_window_is_full(m0 in 0.1f64..5.0, eps in 1e-6f64..10.0) {
            let q = MassModel::constant(m0).quasi_coherence_window((0.0, 3.0), eps, 0.01).unwrap();
            prop_assert_eq!(q.intervals, vec![(0.0, 3.0)]);
        }
    }
}
