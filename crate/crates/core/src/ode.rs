//! Adaptive Dormand–Prince 5(4) driver shared by every auxiliary ODE.
//!
//! The driver steps exactly onto each requested sample time, so samples are
//! genuine step endpoints rather than interpolants. Local error is controlled
//! with a mixed absolute/relative norm where both tolerances equal `tol`, and
//! the step size follows a PI controller.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_steps: 50_000_000,
        }
    }
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// States sampled at the requested times; `y[i]` is the state at `t[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSolution {
    pub t: Vec<f64>,
    pub y: Vec<Vec<Complex64>>,
}

/// `n` equal sub-intervals covering `[t0, t1]` with spacing at most `dt`.
pub fn uniform_grid(t0: f64, t1: f64, dt: f64) -> Vec<f64> {
    assert!(t1 > t0 && dt > 0.0);
    let n = (((t1 - t0) / dt) - 1e-9).ceil().max(1.0) as usize;
    let step = (t1 - t0) / n as f64;
    (0..=n)
        .map(|i| if i == n { t1 } else { t0 + i as f64 * step })
        .collect()
}

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - 0.75 * BETA;

struct Stages {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    err: Vec<f64>,
}

impl Stages {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y_new: vec![0.0; n],
            err: vec![0.0; n],
        }
    }
}

fn error_norm(y: &[f64], y_new: &[f64], err: &[f64], tol: f64) -> f64 {
    let n = y.len() as f64;
    let sum: f64 = y
        .iter()
        .zip(y_new)
        .zip(err)
        .map(|((a, b), e)| {
            let scale = tol + tol * a.abs().max(b.abs());
            (e / scale).powi(2)
        })
        .sum();
    let norm = (sum / n).sqrt();
    if norm.is_finite() {
        norm
    } else {
        f64::INFINITY
    }
}

/// One Dormand–Prince step from `(t, y)` with size `h`; `k[0]` must hold f(t, y).
/// Fills `y_new`, `k[6]` = f(t+h, y_new) and the embedded error estimate.
fn dopri_step<F>(rhs: &F, t: f64, y: &[f64], h: f64, s: &mut Stages)
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    macro_rules! stage {
        ($dst:expr, $c:expr, $( ($a:expr, $ki:expr) ),+ ) => {{
            for i in 0..n {
                s.tmp[i] = y[i] + h * (0.0 $( + $a * s.k[$ki][i] )+);
            }
            let (tmp, k) = (&s.tmp, &mut s.k);
            rhs(t + $c * h, tmp, &mut k[$dst]);
        }};
    }
    stage!(1, C2, (A21, 0));
    stage!(2, C3, (A31, 0), (A32, 1));
    stage!(3, C4, (A41, 0), (A42, 1), (A43, 2));
    stage!(4, C5, (A51, 0), (A52, 1), (A53, 2), (A54, 3));
    stage!(5, 1.0, (A61, 0), (A62, 1), (A63, 2), (A64, 3), (A65, 4));
    for i in 0..n {
        s.y_new[i] =
            y[i] + h * (A71 * s.k[0][i] + A73 * s.k[2][i] + A74 * s.k[3][i] + A75 * s.k[4][i] + A76 * s.k[5][i]);
    }
    {
        let (y_new, k) = (&s.y_new, &mut s.k);
        rhs(t + h, y_new, &mut k[6]);
    }
    for i in 0..n {
        s.err[i] =
            h * (E1 * s.k[0][i] + E3 * s.k[2][i] + E4 * s.k[3][i] + E5 * s.k[4][i] + E6 * s.k[5][i] + E7 * s.k[6][i]);
    }
}

fn initial_step(y0: &[f64], f0: &[f64], span: f64, tol: f64) -> f64 {
    let scale = |v: f64| tol + tol * v.abs();
    let d0 = (y0.iter().map(|&v| (v / scale(v)).powi(2)).sum::<f64>() / y0.len() as f64).sqrt();
    let d1 = (f0.iter().zip(y0).map(|(&f, &v)| (f / scale(v)).powi(2)).sum::<f64>() / y0.len() as f64).sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span).min(0.1 * span.max(f64::MIN_POSITIVE))
}

/// Integrates `y' = rhs(t, y)` and returns the state at every entry of
/// `samples` (strictly increasing; the first entry is the initial time).
pub fn integrate<F>(rhs: F, y0: &[f64], samples: &[f64], opts: &OdeOptions) -> Result<Solution>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be > 0, got {}", opts.tol)));
    }
    if samples.is_empty() {
        return Err(Error::InvalidInput("no sample times requested".into()));
    }
    if samples.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("sample times must be strictly increasing".into()));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("initial state is not finite".into()));
    }

    let n = y0.len();
    let mut s = Stages::new(n);
    let mut t = samples[0];
    let mut y = y0.to_vec();
    rhs(t, &y, &mut s.k[0]);
    if s.k[0].iter().any(|v| !v.is_finite()) {
        return Err(Error::StepSizeUnderflow { t });
    }

    let mut out_y = Vec::with_capacity(samples.len());
    out_y.push(y.clone());

    let span = samples[samples.len() - 1] - samples[0];
    let mut h_natural = if span > 0.0 {
        initial_step(&y, &s.k[0], span, opts.tol)
    } else {
        0.0
    };
    let mut fac_old = 1e-4_f64;
    let mut steps = 0usize;

    for &target in &samples[1..] {
        while t < target {
            let remaining = target - t;
            let clamped = h_natural >= remaining;
            let h = if clamped { remaining } else { h_natural };
            if h <= 1e-13 * t.abs().max(1.0) && !clamped {
                return Err(Error::StepSizeUnderflow { t });
            }
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::StepSizeUnderflow { t });
            }

            dopri_step(&rhs, t, &y, h, &mut s);
            let err = error_norm(&y, &s.y_new, &s.err, opts.tol);
            let finite = s.y_new.iter().chain(&s.k[6]).all(|v| v.is_finite());
            let err = if finite { err } else { f64::INFINITY };

            let fac11 = err.powf(EXPO);
            if err <= 1.0 {
                let fac = (fac11 / fac_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                fac_old = err.max(1e-4);
                t = if clamped { target } else { t + h };
                std::mem::swap(&mut y, &mut s.y_new);
                s.k.swap(0, 6);
                if !clamped {
                    h_natural = h / fac;
                }
            } else {
                let shrink = if err.is_finite() {
                    (fac11 / SAFETY).min(1.0 / FAC_MIN)
                } else {
                    1.0 / FAC_MIN
                };
                h_natural = h / shrink;
                if h_natural <= 1e-13 * t.abs().max(1.0) {
                    return Err(Error::StepSizeUnderflow { t });
                }
            }
        }
        out_y.push(y.clone());
    }

    Ok(Solution {
        t: samples.to_vec(),
        y: out_y,
    })
}

/// Complex-valued wrapper: each complex component is carried as a (re, im)
/// pair of the real integrator.
pub fn integrate_complex<F>(rhs: F, y0: &[Complex64], samples: &[f64], opts: &OdeOptions) -> Result<ComplexSolution>
where
    F: Fn(f64, &[Complex64], &mut [Complex64]),
{
    let n = y0.len();
    let flat: Vec<f64> = y0.iter().flat_map(|z| [z.re, z.im]).collect();
    let scratch = std::cell::RefCell::new((vec![Complex64::default(); n], vec![Complex64::default(); n]));
    let real_rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let mut guard = scratch.borrow_mut();
        let (zs, dz) = &mut *guard;
        for (i, z) in zs.iter_mut().enumerate() {
            *z = Complex64::new(y[2 * i], y[2 * i + 1]);
        }
        rhs(t, zs, dz);
        for (i, d) in dz.iter().enumerate() {
            dy[2 * i] = d.re;
            dy[2 * i + 1] = d.im;
        }
    };
    let sol = integrate(real_rhs, &flat, samples, opts)?;
    let y = sol
        .y
        .into_iter()
        .map(|row| row.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect())
        .collect();
    Ok(ComplexSolution { t: sol.t, y })
}
