//! Column-angle classification of the noise matrix and brute-force
//! verification of the induced super/submodularity of `Θ(x, ·)`.
//!
//! Off-diagonal entries of `Σ = CᵀC` decide everything: all nonnegative
//! means `Θ(x, ·)` is supermodular for every `x`, all nonpositive means
//! submodular, all zero means modular (separable in `y`).

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Matrix};
use crate::problem::BrlsInstance;
use crate::scalar::Scalar;

/// Largest `n` accepted by [`verify_modularity_bruteforce`].
pub const MODULARITY_ENUM_LIMIT: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Orthogonal,
    Acute,
    Obtuse,
    General,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Orthogonal => "orthogonal",
            Self::Acute => "acute",
            Self::Obtuse => "obtuse",
            Self::General => "general",
        };
        f.write_str(s)
    }
}

impl Verdict {
    /// Shape of `Θ(x, ·)` this class induces for every `x`.
    pub fn predicted_shape(self) -> SetFunctionShape {
        match self {
            Self::Orthogonal => SetFunctionShape::Modular,
            Self::Acute => SetFunctionShape::Supermodular,
            Self::Obtuse => SetFunctionShape::Submodular,
            Self::General => SetFunctionShape::Neither,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModularityClass<T> {
    pub verdict: Verdict,
    /// Pairwise column angles `θ_ij ∈ [0, π]`.
    pub angles: Matrix<T>,
    /// Smallest and largest off-diagonal inner product `c_iᵀc_j` (zero for
    /// `n ≤ 1`).
    pub min_inner: T,
    pub max_inner: T,
    pub tol: T,
}

/// `1e-10 · max_i ‖c_i‖²`.
pub fn default_tolerance<T: Scalar>(c: &Matrix<T>) -> T {
    let max_sq = (0..c.cols())
        .map(|j| {
            let col = c.column(j);
            dot(&col, &col)
        })
        .fold(T::zero(), T::max);
    T::lit(1e-10) * max_sq
}

/// Classifies `C` by the signs of its off-diagonal column inner products.
///
/// An inner product `p` counts as nonnegative when `p ≥ −tol` and as
/// nonpositive when `p ≤ tol`.
pub fn classify<T: Scalar>(c: &Matrix<T>, tol: T) -> Result<ModularityClass<T>> {
    if tol < T::zero() {
        return Err(Error::Invalid(format!("tolerance must be nonnegative, got {tol}")));
    }
    let n = c.cols();
    let cols: Vec<Vec<T>> = (0..n).map(|j| c.column(j)).collect();
    if let Some(j) = cols.iter().position(|col| col.iter().all(|&v| v == T::zero())) {
        return Err(Error::ZeroColumn(j));
    }
    let norms: Vec<T> = cols.iter().map(|col| norm(col)).collect();
    let mut angles = Matrix::zeros(n, n);
    let mut min_inner = T::infinity();
    let mut max_inner = T::neg_infinity();
    for i in 0..n {
        for j in i + 1..n {
            let p = dot(&cols[i], &cols[j]);
            min_inner = min_inner.min(p);
            max_inner = max_inner.max(p);
            let a = angle_from(p, norms[i], norms[j]);
            angles.set(i, j, a);
            angles.set(j, i, a);
        }
    }
    if n < 2 {
        min_inner = T::zero();
        max_inner = T::zero();
    }
    let nonneg = min_inner >= -tol;
    let nonpos = max_inner <= tol;
    let verdict = match (nonneg, nonpos) {
        (true, true) => Verdict::Orthogonal,
        (true, false) => Verdict::Acute,
        (false, true) => Verdict::Obtuse,
        (false, false) => Verdict::General,
    };
    Ok(ModularityClass {
        verdict,
        angles,
        min_inner,
        max_inner,
        tol,
    })
}

/// [`classify`] with [`default_tolerance`].
pub fn classify_default<T: Scalar>(c: &Matrix<T>) -> Result<ModularityClass<T>> {
    classify(c, default_tolerance(c))
}

fn angle_from<T: Scalar>(p: T, ni: T, nj: T) -> T {
    let cos = (p / (ni * nj)).max(-T::one()).min(T::one());
    cos.acos()
}

/// Angle `θ_ij = arccos(c_iᵀc_j / ‖c_i‖‖c_j‖)` between columns `i` and `j`.
pub fn angle_of<T: Scalar>(c: &Matrix<T>, i: usize, j: usize) -> Result<T> {
    for &k in &[i, j] {
        if k >= c.cols() {
            return Err(Error::IndexOutOfRange { index: k, len: c.cols() });
        }
    }
    if i == j {
        return Ok(T::zero());
    }
    let (ci, cj) = (c.column(i), c.column(j));
    let (ni, nj) = (norm(&ci), norm(&cj));
    if ni == T::zero() {
        return Err(Error::ZeroColumn(i));
    }
    if nj == T::zero() {
        return Err(Error::ZeroColumn(j));
    }
    Ok(angle_from(dot(&ci, &cj), ni, nj).min(T::lit(PI)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SetFunctionShape {
    Supermodular,
    Submodular,
    Modular,
    Neither,
}

/// Decides the shape of an arbitrary set function on `{0,1}^n` by checking
/// every marginal-difference inequality
/// `h(y + e_i) − h(y)` vs `h(y' + e_i) − h(y')` for `y ≤ y'`, `i ∉ supp(y')`.
///
/// `values[mask]` holds `h` at the set encoded by `mask` (bit `i` ↔ `y_i`).
pub fn set_function_shape<T: Scalar>(n: usize, values: &[T], tol: T) -> SetFunctionShape {
    debug_assert_eq!(values.len(), 1usize << n);
    let full = (1usize << n) - 1;
    let mut submodular = true;
    let mut supermodular = true;
    'outer: for big in 0..=full {
        let free = full & !big;
        for i in (0..n).filter(|&i| free >> i & 1 == 1) {
            let bit = 1usize << i;
            let gain_big = values[big | bit] - values[big];
            // enumerate every submask of `big`
            let mut small = big;
            loop {
                let gain_small = values[small | bit] - values[small];
                if gain_small < gain_big - tol {
                    submodular = false;
                }
                if gain_small > gain_big + tol {
                    supermodular = false;
                }
                if !submodular && !supermodular {
                    break 'outer;
                }
                if small == 0 {
                    break;
                }
                small = (small - 1) & big;
            }
        }
    }
    match (supermodular, submodular) {
        (true, true) => SetFunctionShape::Modular,
        (true, false) => SetFunctionShape::Supermodular,
        (false, true) => SetFunctionShape::Submodular,
        (false, false) => SetFunctionShape::Neither,
    }
}

/// Exhaustive modularity check of `Θ(x, ·)`; refuses `n > 16`.
pub fn verify_modularity_bruteforce<T: Scalar>(
    inst: &BrlsInstance<T>,
    x: &[T],
) -> Result<SetFunctionShape> {
    let n = inst.n();
    if n > MODULARITY_ENUM_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: MODULARITY_ENUM_LIMIT,
        });
    }
    let mut values = Vec::with_capacity(1 << n);
    let mut y = vec![T::zero(); n];
    for mask in 0usize..1 << n {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = if mask >> i & 1 == 1 { T::one() } else { T::zero() };
        }
        values.push(inst.theta(x, &y)?);
    }
    let scale = values.iter().fold(T::one(), |m, v| m.max(v.abs()));
    let tol = T::lit(1e3) * T::epsilon() * scale;
    Ok(set_function_shape(n, &values, tol))
}
