//! Gauss–Hermite rules for ∫ f(y) e^{−y²} dy.

use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Orthonormal Hermite recurrence at `z`: returns (p_n(z), p_{n−1}(z)).
fn orthonormal_pair(n: usize, z: f64) -> (f64, f64) {
    let (mut p1, mut p2) = (PI.powf(-0.25), 0.0f64);
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    (p1, p2)
}

/// Eigenvalues of the symmetric tridiagonal matrix with zero diagonal and
/// off-diagonal `e` (implicit QL with Wilkinson shifts).
fn tridiagonal_eigenvalues(mut e: Vec<f64>) -> Vec<f64> {
    let n = e.len() + 1;
    let mut d = vec![0.0f64; n];
    e.push(0.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 100, "QL iteration did not converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d
}

impl GaussHermite {
    /// `n`-point rule, exact for polynomials of degree ≤ 2n − 1.
    ///
    /// Nodes start from the Jacobi-matrix eigenvalues and are polished by
    /// Newton steps on the orthonormal recurrence; weights are 2/p'_n(y)².
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "rule needs at least one node");
        let off: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
        let mut nodes = tridiagonal_eigenvalues(off);
        nodes.sort_by(|a, b| b.total_cmp(a));
        let scale = (2.0 * n as f64).sqrt();
        let weights = nodes
            .iter_mut()
            .map(|z| {
                let mut pp = 0.0;
                for _ in 0..3 {
                    let (p1, p2) = orthonormal_pair(n, *z);
                    pp = scale * p2;
                    *z -= p1 / pp;
                }
                2.0 / (pp * pp)
            })
            .collect();
        // Enforce exact symmetry.
        for i in 0..n / 2 {
            let z = 0.5 * (nodes[i] - nodes[n - 1 - i]);
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Σ wₖ f(yₖ).
    pub fn integrate<T, F>(&self, f: F) -> T
    where
        F: Fn(f64) -> T,
        T: std::iter::Sum<T> + std::ops::Mul<f64, Output = T>,
    {
        self.nodes.iter().zip(&self.weights).map(|(&y, &w)| f(y) * w).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_order_rules() {
        let r = GaussHermite::new(1);
        assert_eq!(r.nodes, vec![0.0]);
        assert!((r.weights[0] - PI.sqrt()).abs() < 1e-15);
        let r = GaussHermite::new(2);
        assert!((r.nodes[0] - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((r.weights[0] - PI.sqrt() / 2.0).abs() < 1e-15);
        let r = GaussHermite::new(3);
        assert_eq!(r.nodes[1], 0.0);
        assert!((r.nodes[0] - 1.5f64.sqrt()).abs() < 1e-15);
        assert!((r.weights[1] - 2.0 * PI.sqrt() / 3.0).abs() < 1e-15);
    }

    #[test]
    fn moments_are_exact() {
        // ∫ y^{2k} e^{−y²} = Γ(k + 1/2).
        let r = GaussHermite::new(40);
        let mut gamma = PI.sqrt();
        for k in 0..40 {
            let m: f64 = r.integrate(|y| y.powi(2 * k));
            assert!((m - gamma).abs() < 1e-12 * gamma, "k = {k}: {m} vs {gamma}");
            gamma *= k as f64 + 0.5;
        }
        let odd: f64 = r.integrate(|y| y.powi(7));
        assert!(odd.abs() < 1e-12);
    }

    #[test]
    fn large_rules_stay_finite() {
        for n in [64, 127, 128, 200] {
            let r = GaussHermite::new(n);
            let total: f64 = r.weights.iter().sum();
            assert!((total - PI.sqrt()).abs() < 1e-13, "n = {n}: {total}");
            assert!(r.nodes.windows(2).all(|w| w[0] > w[1]));
            // ∫ e^{2y} e^{−y²} = √π·e.
            let m: f64 = r.integrate(|y| (2.0 * y).exp());
            assert!((m / (PI.sqrt() * 1f64.exp()) - 1.0).abs() < 1e-13, "n = {n}");
        }
        // Largest root of H_200 (reference value from an independent library).
        assert!((GaussHermite::new(200).nodes[0] - 19.339248667911406).abs() < 1e-11);
    }
}
