//! Brute-force ground truth: exhaustive value functions, grid minimax values
//! and saddle-point checks.
//!
//! Nothing here shares code with the solvers in [`crate::inner`]; every value
//! is a direct evaluation of `½‖F(x) − Cy‖²` over an explicit enumeration.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::norm_sq;
use crate::problem::{BrlsInstance, FeasibleSet};
use crate::scalar::Scalar;

/// Largest `n` accepted by [`phi_bruteforce`].
pub const PHI_ENUM_LIMIT: usize = 25;
/// Largest `n` accepted by the grid-based routines.
pub const GRID_ENUM_LIMIT: usize = 20;
/// Largest number of grid points.
pub const GRID_POINT_LIMIT: u128 = 10_000_000;

/// Axis-aligned grid over a box, corners included.
#[derive(Clone, Debug)]
pub struct GridSpec<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub pitch: T,
}

impl<T: Scalar> GridSpec<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>, pitch: T) -> Result<Self> {
        if !(pitch > T::zero()) {
            return Err(Error::Invalid(format!("grid pitch must be positive, got {pitch}")));
        }
        if lower.len() != upper.len() || lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::Invalid("grid bounds are inconsistent".into()));
        }
        Ok(Self { lower, upper, pitch })
    }

    /// Grid over the bounding box of `X`.
    pub fn covering(set: &FeasibleSet<T>, pitch: T) -> Result<Self> {
        match set {
            FeasibleSet::Box { lo, hi } => Self::new(lo.clone(), hi.clone(), pitch),
            FeasibleSet::Ball { center, radius } => Self::new(
                center.iter().map(|&c| c - *radius).collect(),
                center.iter().map(|&c| c + *radius).collect(),
                pitch,
            ),
        }
    }

    fn axis(&self, d: usize) -> Vec<T> {
        let (lo, hi) = (self.lower[d], self.upper[d]);
        let mut pts = vec![lo];
        let mut k = 1usize;
        loop {
            let v = lo + self.pitch * T::from_usize(k).unwrap();
            if v >= hi - self.pitch * T::lit(1e-9) {
                break;
            }
            pts.push(v);
            k += 1;
        }
        if hi > lo {
            pts.push(hi);
        }
        pts
    }

    pub fn point_count(&self) -> u128 {
        (0..self.lower.len())
            .map(|d| self.axis(d).len() as u128)
            .product()
    }

    /// Grid points lying in `X`, in lexicographic order (first coordinate
    /// slowest).
    pub fn points(&self, set: &FeasibleSet<T>) -> Result<Vec<Vec<T>>> {
        let count = self.point_count();
        if count > GRID_POINT_LIMIT {
            return Err(Error::GridTooLarge {
                points: count,
                limit: GRID_POINT_LIMIT,
            });
        }
        let axes: Vec<Vec<T>> = (0..self.lower.len()).map(|d| self.axis(d)).collect();
        let mut out = Vec::with_capacity(count as usize);
        let mut idx = vec![0usize; axes.len()];
        loop {
            let p: Vec<T> = idx.iter().enumerate().map(|(d, &i)| axes[d][i]).collect();
            if set.contains(&p, self.pitch * T::lit(1e-9)) {
                out.push(set.project(&p));
            }
            // odometer, last coordinate fastest
            let mut d = axes.len();
            loop {
                if d == 0 {
                    return Ok(out);
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < axes[d].len() {
                    break;
                }
                idx[d] = 0;
            }
        }
    }

    /// Distance from any point of the box to its nearest grid point.
    pub fn covering_radius(&self) -> T {
        let m = T::from_usize(self.lower.len()).unwrap();
        self.pitch * m.sqrt() / T::lit(2.0)
    }
}

fn guard(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        Err(Error::TooLarge { n, limit })
    } else {
        Ok(())
    }
}

fn enumerate_max<T: Scalar>(inst: &BrlsInstance<T>, x: &[T]) -> Result<(T, usize)> {
    let n = inst.n();
    let f = inst.residual_vector(x, &vec![T::zero(); n])?;
    let c = inst.noise();
    let mut best = (T::neg_infinity(), 0usize);
    let mut resid = f.clone();
    for mask in 0usize..1 << n {
        resid.copy_from_slice(&f);
        for j in (0..n).filter(|&j| mask >> j & 1 == 1) {
            for (i, ri) in resid.iter_mut().enumerate() {
                *ri = *ri - c.get(i, j);
            }
        }
        let v = T::lit(0.5) * norm_sq(&resid);
        if v > best.0 {
            best = (v, mask);
        }
    }
    Ok(best)
}

/// `φ(x) = max_{y∈{0,1}^n} Θ(x, y)` by plain enumeration.
pub fn phi_bruteforce<T: Scalar>(inst: &BrlsInstance<T>, x: &[T]) -> Result<T> {
    guard(inst.n(), PHI_ENUM_LIMIT)?;
    Ok(enumerate_max(inst, x)?.0)
}

/// `φ(x)` together with its maximizer (smallest mask among exact ties).
pub fn argmax_bruteforce<T: Scalar>(inst: &BrlsInstance<T>, x: &[T]) -> Result<(T, Vec<bool>)> {
    guard(inst.n(), PHI_ENUM_LIMIT)?;
    let (v, mask) = enumerate_max(inst, x)?;
    Ok((v, (0..inst.n()).map(|j| mask >> j & 1 == 1).collect()))
}

#[derive(Clone, Debug)]
pub struct MinimaxPoint<T> {
    pub value: T,
    pub x: Vec<T>,
    pub y: Vec<bool>,
}

/// `min` over grid points of `max` over `{0,1}^n`.
///
/// Ties go to the lexicographically smallest grid point, then to the
/// smallest `y` read as an integer with `y_1` the least significant bit.
pub fn minimax_bruteforce<T: Scalar>(inst: &BrlsInstance<T>, grid: &GridSpec<T>) -> Result<MinimaxPoint<T>> {
    guard(inst.n(), GRID_ENUM_LIMIT)?;
    let points = grid.points(inst.feasible())?;
    if points.is_empty() {
        return Err(Error::Invalid("grid has no point inside the feasible set".into()));
    }
    let values: Vec<(T, usize)> = points
        .par_iter()
        .map(|p| enumerate_max(inst, p))
        .collect::<Result<_>>()?;
    let mut best = 0usize;
    for (k, v) in values.iter().enumerate() {
        if v.0 < values[best].0 {
            best = k;
        }
    }
    let (value, mask) = values[best];
    Ok(MinimaxPoint {
        value,
        x: points[best].clone(),
        y: (0..inst.n()).map(|j| mask >> j & 1 == 1).collect(),
    })
}

/// Checks `Θ(x, y′) ≤ Θ(x, y) ≤ Θ(x′, y)` for every `y′ ∈ {0,1}^n` and every
/// grid point `x′`, up to `tol`.
pub fn saddle_check<T: Scalar>(
    inst: &BrlsInstance<T>,
    x: &[T],
    y: &[bool],
    grid: &GridSpec<T>,
    tol: T,
) -> Result<bool> {
    guard(inst.n(), GRID_ENUM_LIMIT)?;
    let value = inst.theta_binary(x, y)?;
    if enumerate_max(inst, x)?.0 > value + tol {
        return Ok(false);
    }
    let points = grid.points(inst.feasible())?;
    let below = points
        .par_iter()
        .map(|p| inst.theta_binary(p, y).map(|v| v < value - tol))
        .collect::<Result<Vec<bool>>>()?;
    Ok(!below.into_iter().any(|b| b))
}
