//! Expansion of the packet over the time-dependent Hermite–Gaussian
//! elements Φₙ(x, τ) and comparison of |Cₙ|² with Poisson weights.
//!
//! Φₙ = (2ⁿn!)^{−1/2}·((ω+ω*)/2π)^{1/4}·Hₙ(√((ω+ω*)/2)·x)·exp(−ωx²/2).
//! The Gaussian factor of Φₘ*Φₙ is exp(−(ω+ω*)x²/2), which is real, so the
//! Φₙ are orthonormal at any fixed τ.
//!
//! The moduli |Cₙ|² follow a Poisson law whose mean is |b|²/(ω+ω*), i.e.
//! half of λ = 2|b|²/(ω+ω*). Both numbers are time-independent.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::packet::{lambda_of_tau, PacketState};
use crate::quadrature::GaussHermite;

pub const DEFAULT_MAX_DEGREE: usize = 64;
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-9;

/// Physicists' Hermite polynomial by the three-term recurrence.
pub fn hermite(n: usize, z: f64) -> Result<f64> {
    if n > DEFAULT_MAX_DEGREE {
        return Err(Error::DegreeTooLarge {
            degree: n,
            max: DEFAULT_MAX_DEGREE,
        });
    }
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..n {
        let next = 2.0 * z * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Φₙ(x) for the packet coefficient ω.
pub fn phi_n(n: usize, omega: Complex64, x: f64) -> Result<Complex64> {
    if !(omega.re > 0.0) {
        return Err(Error::NonNormalizable { re_omega: omega.re });
    }
    let two_re = 2.0 * omega.re;
    let log_norm =
        -0.5 * (n as f64 * 2f64.ln() + ln_factorial(n)) + 0.25 * (two_re / (2.0 * std::f64::consts::PI)).ln();
    let h = hermite(n, (two_re / 2.0).sqrt() * x)?;
    Ok(log_norm.exp() * h * (-0.5 * omega * x * x).exp())
}

/// Overlap matrix ∫Φₘ*Φₙ dx for m, n ≤ `n_max`, by Gauss–Hermite quadrature.
pub fn gram_matrix(omega: Complex64, n_max: usize) -> Result<Vec<Vec<Complex64>>> {
    if !(omega.re > 0.0) {
        return Err(Error::NonNormalizable { re_omega: omega.re });
    }
    let s = omega.re.sqrt();
    let rule = GaussHermite::new(2 * n_max + 32);
    // Φ values at the mapped nodes, with the real Gaussian factor removed.
    let table: Vec<Vec<Complex64>> = (0..=n_max)
        .map(|n| {
            rule.nodes
                .iter()
                .map(|&y| phi_n(n, omega, y / s).map(|v| v * (0.5 * y * y).exp()))
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok((0..=n_max)
        .map(|m| {
            (0..=n_max)
                .map(|n| {
                    rule.weights
                        .iter()
                        .enumerate()
                        .map(|(k, &w)| table[m][k].conj() * table[n][k] * w)
                        .sum::<Complex64>()
                        / s
                })
                .collect()
        })
        .collect())
}

/// e^{−λ}λⁿ/n! for n = 0..=n_max, in log space.
pub fn poisson_weights(lambda: f64, n_max: usize) -> Vec<f64> {
    assert!(lambda >= 0.0, "Poisson parameter must be non-negative");
    if lambda == 0.0 {
        let mut w = vec![0.0; n_max + 1];
        w[0] = 1.0;
        return w;
    }
    let ln_lambda = lambda.ln();
    let mut ln_fact = 0.0;
    (0..=n_max)
        .map(|n| {
            if n > 1 {
                ln_fact += (n as f64).ln();
            }
            (-lambda + n as f64 * ln_lambda - ln_fact).exp()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionSpectrum {
    pub tau: f64,
    pub n_max: usize,
    pub coefficients: Vec<Complex64>,
    /// λ = 2|b|²/(ω+ω*) at this instant.
    pub lambda: f64,
    /// Mean of the Poisson law obeyed by |Cₙ|²: λ/2.
    pub poisson_mean: f64,
    pub poisson_ref: Vec<f64>,
    pub total_prob: f64,
}

impl ExpansionSpectrum {
    pub fn probabilities(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.norm_sqr()).collect()
    }

    /// Probability outside n ≤ n_max.
    pub fn tail(&self) -> f64 {
        1.0 - self.total_prob
    }
}

/// Cₙ = ∫Φₙ*ψ dx for n ≤ `n_max`.
///
/// With y = √(Re ω)·x the integrand becomes N·h̃ₙ(y)·e^{−y²}·e^{(b/√Re ω)y}/√√(Re ω),
/// where h̃ₙ are the orthonormal Hermite polynomials, so a Gauss–Hermite rule
/// with 2·n_max + 32 nodes integrates it.
pub fn coefficients_quadrature(state: &PacketState, n_max: usize, tail_tolerance: f64) -> Result<ExpansionSpectrum> {
    let lambda = lambda_of_tau(state.b, state.omega)?;
    let s = state.omega.re.sqrt();
    let beta = state.b / s;
    let rule = GaussHermite::new(2 * n_max + 32);
    let pim4 = std::f64::consts::PI.powf(-0.25);

    let mut sums = vec![Complex64::default(); n_max + 1];
    for (&y, &w) in rule.nodes.iter().zip(&rule.weights) {
        let factor = (beta * y).exp() * w;
        let (mut prev, mut cur) = (0.0f64, pim4);
        for (n, sum) in sums.iter_mut().enumerate() {
            *sum += factor * cur;
            let nf = n as f64;
            let next = (2.0 / (nf + 1.0)).sqrt() * y * cur - (nf / (nf + 1.0)).sqrt() * prev;
            prev = cur;
            cur = next;
        }
    }
    let prefactor = state.norm_factor / s.sqrt();
    let coefficients: Vec<Complex64> = sums.into_iter().map(|c| prefactor * c).collect();
    let total_prob = coefficients.iter().map(|c| c.norm_sqr()).sum::<f64>();
    let poisson_mean = 0.5 * lambda;
    let spectrum = ExpansionSpectrum {
        tau: state.tau,
        n_max,
        coefficients,
        lambda,
        poisson_mean,
        poisson_ref: poisson_weights(poisson_mean, n_max),
        total_prob,
    };
    if spectrum.tail() > tail_tolerance {
        return Err(Error::TailTooLarge {
            tail: spectrum.tail(),
            tolerance: tail_tolerance,
        });
    }
    Ok(spectrum)
}

/// Truncation order covering a Poisson law of mean `mean` far into its tail.
pub fn recommended_n_max(mean: f64) -> usize {
    (mean + 10.0 * mean.sqrt()).ceil() as usize + 10
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistributionReport {
    pub max_abs_err: f64,
    /// Over n whose reference weight exceeds `RELATIVE_FLOOR`.
    pub max_rel_err: f64,
    pub tail: f64,
}

/// Reference weights below this are compared in absolute terms only.
pub const RELATIVE_FLOOR: f64 = 1e-12;

/// |Cₙ|² against the spectrum's Poisson reference.
pub fn compare_distributions(spectrum: &ExpansionSpectrum) -> DistributionReport {
    compare_with_reference(spectrum, &spectrum.poisson_ref, RELATIVE_FLOOR)
}

/// |Cₙ|² against arbitrary reference weights; relative errors only where the
/// reference exceeds `floor`.
pub fn compare_with_reference(spectrum: &ExpansionSpectrum, reference: &[f64], floor: f64) -> DistributionReport {
    let mut max_abs_err = 0.0f64;
    let mut max_rel_err = 0.0f64;
    for (p, &r) in spectrum.probabilities().iter().zip(reference) {
        let err = (p - r).abs();
        max_abs_err = max_abs_err.max(err);
        if r > floor {
            max_rel_err = max_rel_err.max(err / r);
        }
    }
    DistributionReport {
        max_abs_err,
        max_rel_err,
        tail: spectrum.tail(),
    }
}

/// sup over pairs of spectra of max_n ||Cₙ(τ₁)|² − |Cₙ(τ₂)|²|.
pub fn cross_time_deviation(spectra: &[ExpansionSpectrum]) -> f64 {
    let probs: Vec<Vec<f64>> = spectra.iter().map(|s| s.probabilities()).collect();
    let mut worst = 0.0f64;
    for (i, a) in probs.iter().enumerate() {
        for b in &probs[i + 1..] {
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    worst
}
