//! Central finite differences on uniform grids, used for post-hoc residuals.

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// Interior derivative estimates of `values` sampled with uniform spacing `h`.
///
/// Returns `(offset, derivs)` where `derivs[k]` approximates the derivative at
/// index `offset + k`. Uses the five-point stencil when at least five samples
/// are available and the three-point stencil otherwise.
pub fn central_derivative<T>(values: &[T], h: f64) -> Result<(usize, Vec<T>)>
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    let n = values.len();
    if n < 3 {
        return Err(Error::GridTooCoarse { needed: 3, got: n });
    }
    if n < 5 {
        let d = (1..n - 1)
            .map(|i| (values[i + 1] - values[i - 1]) * (0.5 / h))
            .collect();
        return Ok((1, d));
    }
    let d = (2..n - 2)
        .map(|i| ((values[i - 2] - values[i + 2]) + (values[i + 1] - values[i - 1]) * 8.0) * (1.0 / (12.0 * h)))
        .collect();
    Ok((2, d))
}

/// Spacing of a uniform grid, or an error if the grid is not uniform.
pub fn uniform_spacing(grid: &[f64]) -> Result<f64> {
    if grid.len() < 2 {
        return Err(Error::GridTooCoarse {
            needed: 2,
            got: grid.len(),
        });
    }
    let h = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    let uniform = grid
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1e-300));
    if !uniform || !(h > 0.0) {
        return Err(Error::InvalidInput(
            "residual checks need a uniform increasing grid".into(),
        ));
    }
    Ok(h)
}
