//! Lovász extension of `Θ(x, ·)` and of arbitrary set functions.
//!
//! Used for verification only: vertex agreement, concavity of the extension
//! for acute `C`, and equality of the discrete and relaxed value functions.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::norm_sq;
use crate::oracle::{self, GridSpec};
use crate::problem::BrlsInstance;
use crate::scalar::Scalar;

/// Chain representation `y = Σ_k w_k · e_{j₁..j_k}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainDecomposition<T> {
    /// Indices sorted by decreasing `y`, ties by ascending index.
    pub order: Vec<usize>,
    /// `w_0..w_n`, `w_k = y_{j_k} − y_{j_{k+1}}` with `y_{j_0} = 1`, `y_{j_{n+1}} = 0`.
    pub weights: Vec<T>,
}

impl<T: Scalar> ChainDecomposition<T> {
    /// Indicator vector of chain point `k`, i.e. of `{j₁, …, j_k}`.
    pub fn chain_point(&self, k: usize) -> Vec<bool> {
        let mut s = vec![false; self.order.len()];
        for &j in &self.order[..k] {
            s[j] = true;
        }
        s
    }

    /// `Σ_k w_k · e_{j₁..j_k}`.
    pub fn reconstruct(&self) -> Vec<T> {
        let n = self.order.len();
        let mut y = vec![T::zero(); n];
        let mut acc = T::zero();
        // y_{j_k} = Σ_{l ≥ k} w_l
        for k in (1..=n).rev() {
            acc = acc + self.weights[k];
            y[self.order[k - 1]] = acc;
        }
        y
    }
}

pub fn chain_decompose<T: Scalar>(y: &[T]) -> Result<ChainDecomposition<T>> {
    if let Some(i) = y.iter().position(|&v| !(v >= T::zero() && v <= T::one())) {
        return Err(Error::OutsideUnitCube(i));
    }
    let n = y.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| y[b].partial_cmp(&y[a]).unwrap().then(a.cmp(&b)));
    let at = |k: usize| -> T {
        if k == 0 {
            T::one()
        } else if k > n {
            T::zero()
        } else {
            y[order[k - 1]]
        }
    };
    let weights = (0..=n).map(|k| at(k) - at(k + 1)).collect();
    Ok(ChainDecomposition { order, weights })
}

/// Lovász extension of a set function `h` given as a closure on indicator
/// vectors.
pub fn lovasz_extension<T: Scalar>(y: &[T], mut h: impl FnMut(&[bool]) -> T) -> Result<T> {
    let chain = chain_decompose(y)?;
    let mut set = vec![false; y.len()];
    let mut total = chain.weights[0] * h(&set);
    for (k, &j) in chain.order.iter().enumerate() {
        set[j] = true;
        total = total + chain.weights[k + 1] * h(&set);
    }
    Ok(total)
}

/// `Θ^L(x, y) = Σ_k w_k Θ(x, e_{j₁..j_k})`, costing `n + 1` evaluations of
/// `Θ` along the chain.
pub fn lovasz_eval<T: Scalar>(inst: &BrlsInstance<T>, x: &[T], y: &[T]) -> Result<T> {
    if y.len() != inst.n() {
        return Err(Error::Dimension(format!(
            "y has length {}, expected {}",
            y.len(),
            inst.n()
        )));
    }
    let chain = chain_decompose(y)?;
    let mut resid = inst.residual_vector(x, &vec![T::zero(); inst.n()])?;
    let c = inst.noise();
    let half = T::lit(0.5);
    let mut total = chain.weights[0] * half * norm_sq(&resid);
    for (k, &j) in chain.order.iter().enumerate() {
        for (i, ri) in resid.iter_mut().enumerate() {
            *ri = *ri - c.get(i, j);
        }
        total = total + chain.weights[k + 1] * half * norm_sq(&resid);
    }
    Ok(total)
}

/// Outcome of comparing `φ(x)` with sampled values of the Lovász extension.
#[derive(Clone, Debug)]
pub struct ValueAgreement<T> {
    /// `φ(x)` by enumeration of `{0,1}^n`.
    pub phi: T,
    /// Largest sampled `Θ^L(x, y)`.
    pub sampled_max: T,
    /// `Θ^L(x, y*)` at the enumerated maximizer.
    pub at_argmax: T,
}

impl<T: Scalar> ValueAgreement<T> {
    /// Sampled values never exceed `φ(x) + slack` and `φ` is attained at the
    /// enumerated vertex.
    pub fn holds(&self, slack: T) -> bool {
        self.sampled_max <= self.phi + slack && (self.at_argmax - self.phi).abs() <= slack
    }
}

/// Compares the binary value function with the maximum of the Lovász
/// extension over `samples` uniform points of `[0,1]^n`.
pub fn value_functions_agree<T: Scalar, R: Rng + ?Sized>(
    inst: &BrlsInstance<T>,
    x: &[T],
    samples: usize,
    rng: &mut R,
) -> Result<ValueAgreement<T>> {
    let (phi, y_star) = oracle::argmax_bruteforce(inst, x)?;
    let at_argmax = lovasz_eval(inst, x, &crate::problem::to_real(&y_star))?;
    let mut sampled_max = T::neg_infinity();
    let mut y = vec![T::zero(); inst.n()];
    for _ in 0..samples {
        for v in y.iter_mut() {
            *v = T::lit(rng.random::<f64>());
        }
        sampled_max = sampled_max.max(lovasz_eval(inst, x, &y)?);
    }
    Ok(ValueAgreement {
        phi,
        sampled_max,
        at_argmax,
    })
}

/// Saddle test for the relaxed problem `min_x max_{y∈[0,1]^n} Θ^L(x, y)`:
/// checks `Θ^L(x, y′) ≤ Θ^L(x, y) ≤ Θ^L(x′, y)` for every enumerated vertex
/// `y′` and every grid point `x′`.
///
/// Vertices suffice on the `y` side because `Θ^L(x, ·)` is a convex
/// combination of its vertex values.
pub fn lovasz_saddle_check<T: Scalar>(
    inst: &BrlsInstance<T>,
    x: &[T],
    y: &[T],
    grid: &GridSpec<T>,
    tol: T,
) -> Result<bool> {
    let value = lovasz_eval(inst, x, y)?;
    let phi = oracle::phi_bruteforce(inst, x)?;
    if phi > value + tol {
        return Ok(false);
    }
    for xp in grid.points(inst.feasible())? {
        if lovasz_eval(inst, &xp, y)? < value - tol {
            return Ok(false);
        }
    }
    Ok(true)
}
